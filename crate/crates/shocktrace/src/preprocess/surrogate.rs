//! Numerical stand-in for the evolved extension of a rapidly decreasing
//! plateau piece.
//!
//! Every such extension is a min/max clamp of two slope-M lines anchored at
//! `x_J` and `x_I`, so its evolution is a clamp of two x-translates of one
//! shared line solution.  Given that shared solution (simulated once), the
//! surrogate is evaluable everywhere without simulating the piece itself.

use super::{DiscPieceKind, Extension, PieceForm};
use crate::error::{Error, Result};

/// Which branch of the clamp is active at a query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateBranch {
    /// Far ceiling constant.
    Ceiling,
    /// Translated line solution anchored at `x_I` (right riser).
    Riser,
    /// Plateau constant of the piece.
    Plateau,
    /// Translated line solution anchored at `x_J` (left faller).
    Faller,
    /// Far floor constant.
    Floor,
}

/// Clamp description of one plateau piece's evolved extension.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateSpec {
    pub plateau: f64,
    pub ceiling: f64,
    pub floor: f64,
    /// Evaluate the shared line solution at `x - faller_shift` to get the
    /// left line through `(x_J, plateau)`.
    pub faller_shift: f64,
    /// Shift for the right line through `(x_I, plateau)`.
    pub riser_shift: f64,
}

/// Build the clamp description from a plateau piece's extension.  The shared
/// line solution is assumed to start from `u0(x) = M x`.
pub fn rd_extension_surrogate(ext: &Extension, kind: DiscPieceKind, m: f64) -> Result<SurrogateSpec> {
    if !matches!(kind, DiscPieceKind::RdPlateau { .. }) {
        return Err(Error::Preprocess(
            "surrogate requested for a piece outside rapidly decreasing regions".into(),
        ));
    }
    let plateau = match ext.form {
        PieceForm::Const(c) => c,
        _ => {
            return Err(Error::Preprocess(
                "rapidly decreasing plateau piece must be constant".into(),
            ))
        }
    };
    let left = ext
        .left
        .as_ref()
        .ok_or_else(|| Error::Preprocess("plateau piece lacks a left extension".into()))?;
    let right = ext
        .right
        .as_ref()
        .ok_or_else(|| Error::Preprocess("plateau piece lacks a right extension".into()))?;
    Ok(SurrogateSpec {
        plateau,
        ceiling: right.far_level.max(plateau),
        floor: left.far_level.min(plateau),
        faller_shift: left.x_kink - plateau / m,
        riser_shift: right.x_kink - plateau / m,
    })
}

impl SurrogateSpec {
    /// Value of the surrogate given the shared line solution `line(x, t)`.
    pub fn value(&self, line: &dyn Fn(f64, f64) -> f64, x: f64, t: f64) -> f64 {
        let faller = line(x - self.faller_shift, t);
        let riser = line(x - self.riser_shift, t);
        let inner = riser.max(self.plateau.min(faller)).max(self.floor);
        inner.min(self.ceiling)
    }

    /// Active branch at a query point (ties resolve to the constant branch,
    /// which carries zero residual).
    pub fn branch(&self, line: &dyn Fn(f64, f64) -> f64, x: f64, t: f64) -> SurrogateBranch {
        let faller = line(x - self.faller_shift, t);
        let riser = line(x - self.riser_shift, t);
        let capped_faller = self.plateau.min(faller);
        let mut inner = capped_faller;
        let mut branch = if faller < self.plateau {
            SurrogateBranch::Faller
        } else {
            SurrogateBranch::Plateau
        };
        if riser > inner {
            inner = riser;
            branch = SurrogateBranch::Riser;
        }
        if self.floor > inner {
            inner = self.floor;
            branch = SurrogateBranch::Floor;
        }
        if self.ceiling < inner {
            branch = SurrogateBranch::Ceiling;
        }
        branch
    }
}

/// Convenience wrapper matching the clamp in one call.
pub fn surrogate_eval(
    spec: &SurrogateSpec,
    line: &dyn Fn(f64, f64) -> f64,
    x: f64,
    t: f64,
) -> f64 {
    spec.value(line, x, t)
}
