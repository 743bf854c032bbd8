//! Experiment config files: a line-based key/value format with one `piece`
//! line per initial-data segment.
//!
//! ```text
//! name = large-shocks
//! model = burgers
//! epsilon = 0.5
//! delta = sqrt_h              # or a positive number
//! cells = 400 800 1600 3200
//! time_horizon = 0.3
//! output_times = 0.05 0.1 0.15 0.2 0.25 0.3
//! fine_multiplier = 8
//! cfl = 0.45
//! piece = -inf 0.25 const 3
//! piece = 0.25 0.5 affine 1 2   # a + b x
//! piece = 0.625 inf const 0
//! ```

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::preprocess::PieceForm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// `delta = sqrt(h)` per rung.
    SqrtH,
    Fixed(f64),
}

impl DeltaRule {
    pub fn value(&self, h: f64) -> f64 {
        match *self {
            DeltaRule::SqrtH => h.sqrt(),
            DeltaRule::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub model_name: String,
    pub model_params: ModelParams,
    pub epsilon: f64,
    pub delta_rule: DeltaRule,
    /// Mesh ladder: cells per unit length, strictly increasing.
    pub cells: Vec<usize>,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub fine_multiplier: usize,
    pub cfl: f64,
    pub pieces: Vec<(f64, f64, PieceForm)>,
}

fn parse_pos(tok: &str, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Config(format!("bad {what}: '{tok}'")))?;
    Ok(v)
}

fn parse_x(tok: &str) -> Result<f64> {
    match tok {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => parse_pos(tok, "coordinate"),
    }
}

/// Parse a config from its text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut name = String::from("experiment");
    let mut model_name = String::from("burgers");
    let mut params = ModelParams::default();
    let mut epsilon = None;
    let mut delta_rule = DeltaRule::SqrtH;
    let mut cells = Vec::new();
    let mut t_end = None;
    let mut output_times = Vec::new();
    let mut fine_multiplier = 8usize;
    let mut cfl = 0.45;
    let mut pieces = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let toks: Vec<&str> = value.split_whitespace().collect();
        match key {
            "name" => name = toks.join("-"),
            "model" => model_name = toks.join(""),
            "flux_coeffs" => {
                params.flux_coeffs = Some(
                    toks.iter()
                        .map(|t| parse_pos(t, "flux coefficient"))
                        .collect::<Result<_>>()?,
                )
            }
            "entropy_coeffs" => {
                params.entropy_coeffs = Some(
                    toks.iter()
                        .map(|t| parse_pos(t, "entropy coefficient"))
                        .collect::<Result<_>>()?,
                )
            }
            "epsilon" => epsilon = Some(parse_pos(toks.first().unwrap_or(&""), "epsilon")?),
            "delta" => {
                delta_rule = match toks.first() {
                    Some(&"sqrt_h") => DeltaRule::SqrtH,
                    Some(t) => DeltaRule::Fixed(parse_pos(t, "delta")?),
                    None => return Err(Error::Config("empty delta".into())),
                }
            }
            "cells" => {
                cells = toks
                    .iter()
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad cell count '{t}'")))
                    })
                    .collect::<Result<_>>()?
            }
            "time_horizon" => t_end = Some(parse_pos(toks.first().unwrap_or(&""), "time_horizon")?),
            "output_times" => {
                output_times = toks
                    .iter()
                    .map(|t| parse_pos(t, "output time"))
                    .collect::<Result<_>>()?
            }
            "fine_multiplier" => {
                fine_multiplier = toks
                    .first()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Config("bad fine_multiplier".into()))?
            }
            "cfl" => cfl = parse_pos(toks.first().unwrap_or(&""), "cfl")?,
            "piece" => {
                if toks.len() < 4 {
                    return Err(Error::Config(format!(
                        "line {}: piece needs 'xlo xhi kind coeffs...'",
                        lineno + 1
                    )));
                }
                let xlo = parse_x(toks[0])?;
                let xhi = parse_x(toks[1])?;
                let form = match toks[2] {
                    "const" => PieceForm::Const(parse_pos(toks[3], "const value")?),
                    "affine" => {
                        if toks.len() < 5 {
                            return Err(Error::Config(format!(
                                "line {}: affine needs two coefficients (a b for a + b x)",
                                lineno + 1
                            )));
                        }
                        PieceForm::Affine {
                            a: parse_pos(toks[3], "affine a")?,
                            b: parse_pos(toks[4], "affine b")?,
                        }
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown piece kind '{other}'",
                            lineno + 1
                        )))
                    }
                };
                pieces.push((xlo, xhi, form));
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
    }

    let epsilon = epsilon.ok_or_else(|| Error::Config("missing epsilon".into()))?;
    let t_end = t_end.ok_or_else(|| Error::Config("missing time_horizon".into()))?;
    if pieces.is_empty() {
        return Err(Error::Config("no piece lines".into()));
    }
    if cells.is_empty() {
        return Err(Error::Config("missing cells ladder".into()));
    }
    if cells.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("cells ladder must be strictly increasing".into()));
    }
    if fine_multiplier < 4 {
        return Err(Error::Config("fine_multiplier must be at least 4".into()));
    }
    if output_times.is_empty() {
        output_times = vec![t_end];
    }
    output_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if output_times.last().copied().unwrap_or(0.0) > t_end + 1e-12 {
        return Err(Error::Config("output time beyond the horizon".into()));
    }
    Ok(ExperimentConfig {
        name,
        model_name,
        model_params: params,
        epsilon,
        delta_rule,
        cells,
        t_end,
        output_times,
        fine_multiplier,
        cfl,
        pieces,
    })
}

/// Read and parse a config file.
pub fn load_config(path: &str) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
