//! Initial-data preprocessing: classify pieces as nearly non-decreasing or
//! rapidly decreasing, break rapidly decreasing pieces into staircases of
//! width `delta`, and build the global Lipschitz extensions of every piece.

mod extension;
mod surrogate;

pub use extension::{build_extensions, slope_m_of_pieces, Extension, ExtensionSet, SideExt};
pub use surrogate::{rd_extension_surrogate, surrogate_eval, SurrogateBranch, SurrogateSpec};

use crate::error::{Error, Result};

/// Closed-form description of one piece of the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceForm {
    Const(f64),
    /// `a + b x`.
    Affine { a: f64, b: f64 },
}

impl PieceForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PieceForm::Const(c) => c,
            PieceForm::Affine { a, b } => a + b * x,
        }
    }

    /// Constant slope of the piece (one-sided derivatives coincide).
    pub fn slope(&self) -> f64 {
        match *self {
            PieceForm::Const(_) => 0.0,
            PieceForm::Affine { b, .. } => b,
        }
    }

    /// Supremum over a (possibly unbounded) interval.
    fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            PieceForm::Const(c) => c,
            PieceForm::Affine { b, .. } => {
                if b >= 0.0 {
                    self.eval_clamped(hi)
                } else {
                    self.eval_clamped(lo)
                }
            }
        }
    }

    fn inf_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            PieceForm::Const(c) => c,
            PieceForm::Affine { b, .. } => {
                if b >= 0.0 {
                    self.eval_clamped(lo)
                } else {
                    self.eval_clamped(hi)
                }
            }
        }
    }

    fn eval_clamped(&self, x: f64) -> f64 {
        if x.is_finite() {
            self.eval(x)
        } else {
            match *self {
                PieceForm::Const(c) => c,
                PieceForm::Affine { b, .. } => {
                    if (x > 0.0) == (b > 0.0) && b != 0.0 {
                        f64::INFINITY * 1.0_f64.copysign(1.0)
                    } else if b == 0.0 {
                        self.eval(0.0)
                    } else {
                        f64::NEG_INFINITY
                    }
                }
            }
        }
    }
}

/// Class of one initial-data piece relative to the slope threshold `-epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceClass {
    NearlyNonDecreasing,
    RapidlyDecreasing,
}

/// One classified piece on `(xlo, xhi)`; unbounded ends use infinities.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub xlo: f64,
    pub xhi: f64,
    pub form: PieceForm,
    pub class: PieceClass,
}

/// Classified initial data: contiguous pieces with down-jumps only.
#[derive(Debug, Clone)]
pub struct SegmentedProfile {
    pub segments: Vec<Segment>,
    pub epsilon: f64,
}

impl SegmentedProfile {
    /// Internal breakpoints (between consecutive segments).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.xlo).collect()
    }

    /// Down-jump sizes at the internal breakpoints.
    pub fn jumps(&self) -> Vec<f64> {
        self.segments
            .windows(2)
            .map(|w| w[0].form.eval(w[0].xhi) - w[1].form.eval(w[1].xlo))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        for seg in &self.segments {
            if x < seg.xhi {
                return seg.form.eval(x);
            }
        }
        self.segments.last().map(|s| s.form.eval(x)).unwrap_or(0.0)
    }

    /// Value range attained by the raw profile.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            lo = lo.min(s.form.inf_on(s.xlo, s.xhi));
            hi = hi.max(s.form.sup_on(s.xlo, s.xhi));
        }
        (lo, hi)
    }
}

/// Classify a contiguous list of pieces against the slope threshold.
///
/// Rejects up-jumps, pieces whose slope sits on the wrong side of `-epsilon`
/// inconsistently (the caller must pre-split such pieces), and adjacent
/// nearly non-decreasing pieces without a strict down-jump.
pub fn classify(pieces: &[(f64, f64, PieceForm)], epsilon: f64) -> Result<SegmentedProfile> {
    if !(epsilon > 0.0) {
        return Err(Error::Preprocess(format!(
            "slope threshold must be positive, got {epsilon}"
        )));
    }
    if pieces.is_empty() {
        return Err(Error::Preprocess("profile has no pieces".into()));
    }
    let mut segments = Vec::with_capacity(pieces.len());
    for (k, &(xlo, xhi, form)) in pieces.iter().enumerate() {
        if !(xhi > xlo) {
            return Err(Error::Preprocess(format!(
                "piece {k} has empty interval ({xlo}, {xhi})"
            )));
        }
        if k > 0 && pieces[k - 1].1 != xlo {
            return Err(Error::Preprocess(format!(
                "piece {k} does not start where piece {} ends",
                k - 1
            )));
        }
        let slope = form.slope();
        let class = if slope > -epsilon {
            PieceClass::NearlyNonDecreasing
        } else {
            PieceClass::RapidlyDecreasing
        };
        // Closed forms here have a single slope, so the "mixed sign" rejection
        // only triggers for rapidly decreasing pieces on unbounded intervals
        // (those cannot stay bounded).
        if class == PieceClass::RapidlyDecreasing && (!xlo.is_finite() || !xhi.is_finite()) {
            return Err(Error::Preprocess(format!(
                "rapidly decreasing piece {k} on an unbounded interval"
            )));
        }
        segments.push(Segment {
            xlo,
            xhi,
            form,
            class,
        });
    }
    for k in 1..segments.len() {
        let left = segments[k - 1];
        let right = segments[k];
        let jump = left.form.eval(left.xhi) - right.form.eval(right.xlo);
        if jump < 0.0 {
            return Err(Error::Preprocess(format!(
                "up-jump of size {} at x = {}",
                -jump,
                right.xlo
            )));
        }
        if jump == 0.0
            && left.class == PieceClass::NearlyNonDecreasing
            && right.class == PieceClass::NearlyNonDecreasing
        {
            return Err(Error::Preprocess(format!(
                "adjacent nearly non-decreasing pieces at x = {} need a strict down-jump \
                 (merge them or split elsewhere)",
                right.xlo
            )));
        }
    }
    Ok(SegmentedProfile { segments, epsilon })
}

/// Staircase approximation of one rapidly decreasing piece: plateaus sampled
/// at step midpoints, uniform step width `len/ceil(len/delta) <= delta`.
#[derive(Debug, Clone)]
pub struct StepApproximation {
    pub parent: (f64, f64),
    pub delta: f64,
    pub width: f64,
    pub plateaus: Vec<f64>,
    /// Sub-breakpoints strictly inside the parent interval.
    pub sub_breakpoints: Vec<f64>,
    /// Set when `delta` exceeded the piece length and a single step was used.
    pub single_step_warning: bool,
}

pub fn discretize_rd(seg: &Segment, delta: f64) -> Result<StepApproximation> {
    if !(delta > 0.0) {
        return Err(Error::Preprocess(format!(
            "step width must be positive, got {delta}"
        )));
    }
    if seg.class != PieceClass::RapidlyDecreasing {
        return Err(Error::Preprocess(
            "discretize_rd called on a nearly non-decreasing piece".into(),
        ));
    }
    let len = seg.xhi - seg.xlo;
    let n = ((len / delta).ceil() as usize).max(1);
    let width = len / n as f64;
    let plateaus: Vec<f64> = (0..n)
        .map(|k| seg.form.eval(seg.xlo + width * (k as f64 + 0.5)))
        .collect();
    let sub_breakpoints: Vec<f64> = (1..n).map(|k| seg.xlo + width * k as f64).collect();
    Ok(StepApproximation {
        parent: (seg.xlo, seg.xhi),
        delta,
        width,
        plateaus,
        sub_breakpoints,
        single_step_warning: delta > len,
    })
}

/// `M = max(1, max piece Lipschitz constant)` of a classified profile.
pub fn slope_m(profile: &SegmentedProfile) -> f64 {
    slope_m_of_slopes(profile.segments.iter().map(|s| s.form.slope()))
}

pub(crate) fn slope_m_of_slopes(slopes: impl Iterator<Item = f64>) -> f64 {
    slopes.fold(1.0_f64, |m, s| m.max(s.abs()))
}

/// Role of a discretized piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscPieceKind {
    NearlyNonDecreasing,
    /// Plateau belonging to the rapidly decreasing region with this index.
    RdPlateau { region: usize },
}

/// One piece of the discretized profile (staircases inserted).
#[derive(Debug, Clone, Copy)]
pub struct DiscPiece {
    pub xlo: f64,
    pub xhi: f64,
    pub form: PieceForm,
    pub kind: DiscPieceKind,
}

/// One rapidly decreasing region after discretization.
#[derive(Debug, Clone)]
pub struct RdRegion {
    /// Inclusive plateau piece range in `DiscretizedProfile::pieces`.
    pub first_piece: usize,
    pub last_piece: usize,
    pub xlo: f64,
    pub xhi: f64,
    pub parent_lip: f64,
    pub step_width: f64,
    pub delta: f64,
}

/// Profile with staircases inserted; the input to the extension builder and
/// the initial data of the glued numerical solution.
#[derive(Debug, Clone)]
pub struct DiscretizedProfile {
    pub pieces: Vec<DiscPiece>,
    pub rd_regions: Vec<RdRegion>,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub single_step_warnings: usize,
}

impl DiscretizedProfile {
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.xlo).collect()
    }

    pub fn jumps(&self) -> Vec<f64> {
        self.pieces
            .windows(2)
            .map(|w| w[0].form.eval(w[0].xhi) - w[1].form.eval(w[1].xlo))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        for p in &self.pieces {
            if x < p.xhi {
                return p.form.eval(x);
            }
        }
        self.pieces.last().map(|p| p.form.eval(x)).unwrap_or(0.0)
    }

    /// Value range of the discretized data (the glued solution's band).
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            lo = lo.min(p.form.inf_on(p.xlo, p.xhi));
            hi = hi.max(p.form.sup_on(p.xlo, p.xhi));
        }
        (lo, hi)
    }

    /// Does piece `i` belong to a rapidly decreasing region?
    pub fn is_rd_piece(&self, i: usize) -> bool {
        matches!(self.pieces[i].kind, DiscPieceKind::RdPlateau { .. })
    }
}

/// Replace every rapidly decreasing piece by its staircase.
pub fn insert_steps(profile: &SegmentedProfile, delta: f64) -> Result<DiscretizedProfile> {
    let mut pieces = Vec::new();
    let mut rd_regions = Vec::new();
    let mut warnings = 0;
    for seg in &profile.segments {
        match seg.class {
            PieceClass::NearlyNonDecreasing => pieces.push(DiscPiece {
                xlo: seg.xlo,
                xhi: seg.xhi,
                form: seg.form,
                kind: DiscPieceKind::NearlyNonDecreasing,
            }),
            PieceClass::RapidlyDecreasing => {
                let steps = discretize_rd(seg, delta)?;
                if steps.single_step_warning {
                    warnings += 1;
                }
                let region = rd_regions.len();
                let first = pieces.len();
                for (k, &p) in steps.plateaus.iter().enumerate() {
                    let xlo = seg.xlo + steps.width * k as f64;
                    let xhi = seg.xlo + steps.width * (k + 1) as f64;
                    pieces.push(DiscPiece {
                        xlo,
                        xhi,
                        form: PieceForm::Const(p),
                        kind: DiscPieceKind::RdPlateau { region },
                    });
                }
                rd_regions.push(RdRegion {
                    first_piece: first,
                    last_piece: pieces.len() - 1,
                    xlo: seg.xlo,
                    xhi: seg.xhi,
                    parent_lip: seg.form.slope().abs(),
                    step_width: steps.width,
                    delta,
                });
            }
        }
    }
    let delta = if rd_regions.is_empty() {
        None
    } else {
        Some(delta)
    };
    Ok(DiscretizedProfile {
        pieces,
        rd_regions,
        epsilon: profile.epsilon,
        delta,
        single_step_warnings: warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn experiment1_pieces() -> Vec<(f64, f64, PieceForm)> {
        vec![
            (f64::NEG_INFINITY, 0.25, PieceForm::Const(3.0)),
            (0.25, 0.5, PieceForm::Affine { a: 1.0, b: 2.0 }),
            (0.5, 0.625, PieceForm::Affine { a: 0.0, b: 1.0 }),
            (0.625, f64::INFINITY, PieceForm::Const(0.0)),
        ]
    }

    pub(crate) fn experiment2_pieces() -> Vec<(f64, f64, PieceForm)> {
        vec![
            (f64::NEG_INFINITY, 0.2, PieceForm::Const(2.5)),
            (0.2, 0.4, PieceForm::Affine { a: 3.5, b: -5.0 }),
            (0.4, 0.625, PieceForm::Affine { a: 1.1, b: 1.0 }),
            (0.625, f64::INFINITY, PieceForm::Const(0.0)),
        ]
    }

    #[test]
    fn classify_experiment1() {
        let p = classify(&experiment1_pieces(), 0.5).unwrap();
        assert_eq!(p.segments.len(), 4);
        assert!(p
            .segments
            .iter()
            .all(|s| s.class == PieceClass::NearlyNonDecreasing));
        let jumps = p.jumps();
        assert_eq!(jumps.len(), 3);
        assert!((jumps[0] - 1.5).abs() < 1e-15);
        assert!((jumps[1] - 1.5).abs() < 1e-15);
        assert!((jumps[2] - 0.625).abs() < 1e-15);
        assert_eq!(p.breakpoints(), vec![0.25, 0.5, 0.625]);
    }

    #[test]
    fn classify_experiment2() {
        let p = classify(&experiment2_pieces(), 0.5).unwrap();
        let classes: Vec<_> = p.segments.iter().map(|s| s.class).collect();
        assert_eq!(
            classes,
            vec![
                PieceClass::NearlyNonDecreasing,
                PieceClass::RapidlyDecreasing,
                PieceClass::NearlyNonDecreasing,
                PieceClass::NearlyNonDecreasing,
            ]
        );
    }

    #[test]
    fn classify_constant_profile() {
        let p = classify(
            &[(f64::NEG_INFINITY, f64::INFINITY, PieceForm::Const(1.0))],
            0.5,
        )
        .unwrap();
        assert_eq!(p.segments.len(), 1);
        assert!(p.jumps().is_empty());
    }

    #[test]
    fn classify_rejects_up_jump() {
        let pieces = vec![
            (f64::NEG_INFINITY, 0.0, PieceForm::Const(0.0)),
            (0.0, f64::INFINITY, PieceForm::Const(1.0)),
        ];
        assert!(classify(&pieces, 0.5).is_err());
    }

    #[test]
    fn classify_rejects_touching_nnd_pieces() {
        let pieces = vec![
            (f64::NEG_INFINITY, 0.0, PieceForm::Const(1.0)),
            (0.0, f64::INFINITY, PieceForm::Affine { a: 1.0, b: 1.0 }),
        ];
        assert!(classify(&pieces, 0.5).is_err());
    }

    #[test]
    fn discretize_rd_example() {
        let seg = Segment {
            xlo: 0.2,
            xhi: 0.4,
            form: PieceForm::Affine { a: 3.5, b: -5.0 },
            class: PieceClass::RapidlyDecreasing,
        };
        let steps = discretize_rd(&seg, 0.05).unwrap();
        assert_eq!(steps.plateaus.len(), 4);
        let want = [2.375, 2.125, 1.875, 1.625];
        for (got, want) in steps.plateaus.iter().zip(want) {
            assert!((got - want).abs() < 1e-14);
        }
        for w in steps.plateaus.windows(2) {
            assert!((w[0] - w[1] - 0.25).abs() < 1e-14, "jump should be delta*Lip");
        }
        assert!(!steps.single_step_warning);
    }

    #[test]
    fn discretize_rd_single_step() {
        let seg = Segment {
            xlo: 0.0,
            xhi: 0.1,
            form: PieceForm::Affine { a: 0.0, b: -1.0 },
            class: PieceClass::RapidlyDecreasing,
        };
        let steps = discretize_rd(&seg, 0.5).unwrap();
        assert_eq!(steps.plateaus.len(), 1);
        assert!((steps.plateaus[0] + 0.05).abs() < 1e-15);
        assert!(steps.single_step_warning);
    }

    #[test]
    fn jump_size_window() {
        // Jump sizes of the staircase sit in [delta*eps, delta*Lip] for a
        // sweep of rapidly decreasing slopes and widths.
        let eps = 0.5;
        for (slope, len, delta) in [
            (-5.0, 0.2, 0.05),
            (-0.5, 1.0, 0.1),
            (-2.0, 0.73, 0.08),
            (-11.0, 0.41, 0.033),
        ] {
            let seg = Segment {
                xlo: 0.0,
                xhi: len,
                form: PieceForm::Affine { a: 0.0, b: slope },
                class: PieceClass::RapidlyDecreasing,
            };
            let steps = discretize_rd(&seg, delta).unwrap();
            for w in steps.plateaus.windows(2) {
                let jump = w[0] - w[1];
                assert!(jump <= delta * slope.abs() + 1e-12);
                assert!(jump >= delta * eps - 1e-12, "jump {jump} below delta*eps");
            }
        }
    }

    #[test]
    fn slope_m_examples() {
        let p1 = classify(&experiment1_pieces(), 0.5).unwrap();
        assert_eq!(slope_m(&p1), 2.0);
        let p2 = classify(&experiment2_pieces(), 0.5).unwrap();
        assert_eq!(slope_m(&p2), 5.0);
        let flat = classify(
            &[(f64::NEG_INFINITY, f64::INFINITY, PieceForm::Const(7.0))],
            0.5,
        )
        .unwrap();
        assert_eq!(slope_m(&flat), 1.0);
    }

    #[test]
    fn insert_steps_experiment2() {
        let p = classify(&experiment2_pieces(), 0.5).unwrap();
        let disc = insert_steps(&p, 0.05).unwrap();
        // 1 + 4 + 1 + 1 pieces, one region covering plateaus 1..=4.
        assert_eq!(disc.pieces.len(), 7);
        assert_eq!(disc.rd_regions.len(), 1);
        assert_eq!(disc.rd_regions[0].first_piece, 1);
        assert_eq!(disc.rd_regions[0].last_piece, 4);
        // All junction jumps stay strict down-jumps.
        for j in disc.jumps() {
            assert!(j > 0.0);
        }
        // Staircase slope is gone: extension slope M of the discretized data
        // is driven by the remaining pieces only.
        let m = slope_m_of_slopes(disc.pieces.iter().map(|p| p.form.slope()));
        assert_eq!(m, 1.0);
    }
}
