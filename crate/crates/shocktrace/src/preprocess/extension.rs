//! Global piecewise-linear extensions of the discretized initial-data pieces.
//!
//! Each piece is continued beyond its interval with its own edge slope for a
//! short run, then with the shared slope `M` until it reaches a clamped
//! plateau level.  The levels stack jump sums and run offsets so that
//! `v_i(x) - v_{i+1}(x) >= jump_i / 2` holds for all `x`; this ordering is
//! verified by dense sampling before the set is returned.

use super::{slope_m_of_slopes, DiscPiece, DiscretizedProfile};
use crate::error::{Error, Result};

/// Run-length cap of the extension construction.  The unit length is the
/// construction's own scale; both bundled experiments have O(1) domains.
pub const RUN_CAP: f64 = 1.0;

/// One side of an extension beyond the core interval.
#[derive(Debug, Clone, Copy)]
pub struct SideExt {
    /// Where the own-slope run ends and the slope-M run starts
    /// (`x_I` on the right, `x_J` on the left).
    pub x_kink: f64,
    /// Where the slope-M run reaches the far level (`x_R` / `x_L`).
    pub x_stop: f64,
    /// Far plateau level (ceiling on the right, floor on the left).
    pub far_level: f64,
    /// Piece value at the core edge.
    pub edge_value: f64,
    /// Own slope used on `(edge, x_kink)`.
    pub edge_slope: f64,
    /// Level reached at `x_kink`.
    pub kink_level: f64,
}

/// Global Lipschitz extension of one discretized piece.
#[derive(Debug, Clone)]
pub struct Extension {
    pub core_lo: f64,
    pub core_hi: f64,
    pub form: super::PieceForm,
    /// Present unless this is the first piece.
    pub left: Option<SideExt>,
    /// Present unless this is the last piece.
    pub right: Option<SideExt>,
}

impl Extension {
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.core_lo && x <= self.core_hi {
            return self.form.eval(x);
        }
        if x > self.core_hi {
            let side = match &self.right {
                Some(s) => s,
                None => return self.form.eval(x),
            };
            if x <= side.x_kink {
                side.edge_value + (x - self.core_hi) * side.edge_slope
            } else if x <= side.x_stop {
                side.kink_level + (x - side.x_kink) * slope_of_stop(side)
            } else {
                side.far_level
            }
        } else {
            let side = match &self.left {
                Some(s) => s,
                None => return self.form.eval(x),
            };
            if x >= side.x_kink {
                side.edge_value + (x - self.core_lo) * side.edge_slope
            } else if x >= side.x_stop {
                side.kink_level + (x - side.x_kink) * slope_of_stop(side)
            } else {
                side.far_level
            }
        }
    }

    /// Largest slope magnitude anywhere on the extension.
    pub fn lip(&self) -> f64 {
        let mut l = self.form.slope().abs();
        for side in [&self.left, &self.right].into_iter().flatten() {
            l = l.max(side.edge_slope.abs());
            if side.x_stop != side.x_kink {
                l = l.max(slope_of_stop(side).abs());
            }
        }
        l
    }

    /// Smallest one-sided slope anywhere on the extension.
    pub fn min_slope(&self) -> f64 {
        let mut s = self.form.slope();
        for side in [&self.left, &self.right].into_iter().flatten() {
            s = s.min(side.edge_slope);
            s = s.min(0.0); // far plateaus are flat
        }
        s
    }

    /// Kink positions where one-sided derivatives can differ.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v = Vec::new();
        if let Some(s) = &self.left {
            v.push(s.x_stop);
            v.push(s.x_kink);
            v.push(self.core_lo);
        }
        if let Some(s) = &self.right {
            v.push(self.core_hi);
            v.push(s.x_kink);
            v.push(s.x_stop);
        }
        v
    }

    /// Value band attained by the extension.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        push(self.form.eval(self.core_lo.max(-1e12)));
        push(self.form.eval(self.core_hi.min(1e12)));
        for side in [&self.left, &self.right].into_iter().flatten() {
            push(side.far_level);
            push(side.kink_level);
            push(side.edge_value);
        }
        (lo, hi)
    }
}

fn slope_of_stop(side: &SideExt) -> f64 {
    if side.x_stop == side.x_kink {
        0.0
    } else {
        (side.far_level - side.kink_level) / (side.x_stop - side.x_kink)
    }
}

/// The full set of extensions plus the shared slope `M` (computed from the
/// discretized pieces, so staircases contribute slope zero).
#[derive(Debug, Clone)]
pub struct ExtensionSet {
    pub exts: Vec<Extension>,
    pub slope_m: f64,
    pub breakpoints: Vec<f64>,
    pub jumps: Vec<f64>,
}

impl ExtensionSet {
    /// Band covering every extension, widened by 10%.
    pub fn band(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in &self.exts {
            let (l, h) = e.value_range();
            lo = lo.min(l);
            hi = hi.max(h);
        }
        let pad = 0.1 * (hi - lo).max(1e-9);
        (lo - pad, hi + pad)
    }
}

/// Shared slope of the extension construction for a set of discretized pieces.
pub fn slope_m_of_pieces(pieces: &[DiscPiece]) -> f64 {
    slope_m_of_slopes(pieces.iter().map(|p| p.form.slope()))
}

/// Build the global extensions of every piece of a discretized profile.
///
/// Fails if the ordering guarantee `v_i - v_{i+1} >= jump_i / 2` does not
/// hold on a dense sample (a construction bug, not a data error) or if an
/// end piece is unbounded in the stacking direction.
pub fn build_extensions(disc: &DiscretizedProfile) -> Result<ExtensionSet> {
    let n = disc.pieces.len();
    let m = slope_m_of_pieces(&disc.pieces);
    let bp = disc.breakpoints();
    let jumps = disc.jumps();

    if n == 1 {
        let p = disc.pieces[0];
        return Ok(ExtensionSet {
            exts: vec![Extension {
                core_lo: p.xlo,
                core_hi: p.xhi,
                form: p.form,
                left: None,
                right: None,
            }],
            slope_m: m,
            breakpoints: bp,
            jumps,
        });
    }

    // Own-slope run lengths, capped at RUN_CAP:
    //   right of piece j: x_I[j] = bp[j] + min(CAP, jump[j] / (2(M + |s_j|)))
    //   left  of piece j: x_J[j] = bp[j-1] - min(CAP, jump[j-1] / (2(M + |s_j|)))
    let x_i: Vec<f64> = (0..n - 1)
        .map(|j| {
            let s = disc.pieces[j].form.slope().abs();
            bp[j] + RUN_CAP.min(jumps[j] / (2.0 * (m + s)))
        })
        .collect();
    let x_j: Vec<f64> = (1..n)
        .map(|j| {
            let s = disc.pieces[j].form.slope().abs();
            bp[j - 1] - RUN_CAP.min(jumps[j - 1] / (2.0 * (m + s)))
        })
        .collect(); // indexed by j-1

    // Ascent/descent offsets of the own-slope runs.
    let ascent: Vec<f64> = (0..n - 1)
        .map(|j| (x_i[j] - bp[j]) * disc.pieces[j].form.slope().abs())
        .collect();
    let descent: Vec<f64> = (1..n)
        .map(|j| (bp[j - 1] - x_j[j - 1]) * disc.pieces[j].form.slope().abs())
        .collect(); // indexed by j-1

    // Profile extrema outside each breakpoint.
    let sup_right: Vec<f64> = (0..n - 1)
        .map(|j| {
            disc.pieces[j + 1..]
                .iter()
                .map(|p| p.form.sup_on(p.xlo, p.xhi))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let inf_left: Vec<f64> = (0..n - 1)
        .map(|j| {
            disc.pieces[..=j]
                .iter()
                .map(|p| p.form.inf_on(p.xlo, p.xhi))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut exts = Vec::with_capacity(n);
    for j in 0..n {
        let piece = disc.pieces[j];
        let slope = piece.form.slope();

        let right = if j < n - 1 {
            let edge_value = piece.form.eval(bp[j]);
            let kink_level = edge_value + (x_i[j] - bp[j]) * slope;
            // Stacked ceiling: everything to the right lifted by the jumps
            // and the own-slope ascents of the pieces between.
            let stacked = sup_right[j]
                + jumps[j..].iter().sum::<f64>()
                + ascent[j + 1..].iter().sum::<f64>();
            if !stacked.is_finite() {
                return Err(Error::Preprocess(format!(
                    "extension ceiling of piece {j} is unbounded; end pieces must be bounded"
                )));
            }
            let far_level = kink_level.max(stacked);
            let x_stop = if stacked <= kink_level {
                x_i[j]
            } else {
                x_i[j] + (stacked - kink_level) / m
            };
            Some(SideExt {
                x_kink: x_i[j],
                x_stop,
                far_level,
                edge_value,
                edge_slope: slope,
                kink_level,
            })
        } else {
            None
        };

        let left = if j > 0 {
            let edge_value = piece.form.eval(bp[j - 1]);
            let kink_level = edge_value + (x_j[j - 1] - bp[j - 1]) * slope;
            let stacked = inf_left[j - 1]
                - jumps[..j].iter().sum::<f64>()
                - descent[..j.saturating_sub(1)].iter().sum::<f64>();
            if !stacked.is_finite() {
                return Err(Error::Preprocess(format!(
                    "extension floor of piece {j} is unbounded; end pieces must be bounded"
                )));
            }
            let far_level = kink_level.min(stacked);
            let x_stop = if stacked >= kink_level {
                x_j[j - 1]
            } else {
                x_j[j - 1] - (kink_level - stacked) / m
            };
            Some(SideExt {
                x_kink: x_j[j - 1],
                x_stop,
                far_level,
                edge_value,
                edge_slope: slope,
                kink_level,
            })
        } else {
            None
        };

        exts.push(Extension {
            core_lo: if j > 0 { bp[j - 1] } else { piece.xlo },
            core_hi: if j < n - 1 { bp[j] } else { piece.xhi },
            form: piece.form,
            left,
            right,
        });
    }

    let set = ExtensionSet {
        exts,
        slope_m: m,
        breakpoints: bp,
        jumps,
    };
    check_ordering(&set)?;
    Ok(set)
}

/// Dense-sample verification of the pointwise ordering guarantee.
fn check_ordering(set: &ExtensionSet) -> Result<()> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in &set.exts {
        for x in e.nodes() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if !lo.is_finite() {
        return Ok(());
    }
    let (lo, hi) = (lo - 1.0, hi + 1.0);
    let samples = 1000;
    for i in 0..set.exts.len() - 1 {
        let gap = 0.5 * set.jumps[i];
        for k in 0..=samples {
            let x = lo + (hi - lo) * k as f64 / samples as f64;
            let d = set.exts[i].eval(x) - set.exts[i + 1].eval(x);
            if d < gap - 1e-9 * (1.0 + gap.abs()) {
                return Err(Error::Preprocess(format!(
                    "extension ordering violated between pieces {i} and {} at x={x}: \
                     gap {d} < {gap}",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{classify, insert_steps, PieceForm};

    fn build(pieces: &[(f64, f64, PieceForm)], eps: f64, delta: f64) -> ExtensionSet {
        let p = classify(pieces, eps).unwrap();
        let d = insert_steps(&p, delta).unwrap();
        build_extensions(&d).unwrap()
    }

    /// Two constant pieces 1 | 0: both extensions clamp immediately and are
    /// globally constant.
    #[test]
    fn two_piece_hand_check() {
        let set = build(
            &[
                (f64::NEG_INFINITY, 0.0, PieceForm::Const(1.0)),
                (0.0, f64::INFINITY, PieceForm::Const(0.0)),
            ],
            0.5,
            0.1,
        );
        assert_eq!(set.slope_m, 1.0);
        let r = set.exts[0].right.as_ref().unwrap();
        assert!((r.x_kink - 0.5).abs() < 1e-15, "x_I = min(1, 1/2)");
        assert!((r.far_level - 1.0).abs() < 1e-15, "ceiling = max(1, 0+1)");
        assert_eq!(r.x_stop, r.x_kink, "rise truncated immediately");
        for k in -20..=20 {
            let x = k as f64 * 0.25;
            assert!((set.exts[0].eval(x) - 1.0).abs() < 1e-15);
            assert!(set.exts[1].eval(x).abs() < 1e-15);
        }
    }

    #[test]
    fn experiment1_levels() {
        let p = crate::preprocess::tests::experiment1_pieces();
        let set = build(&p, 0.5, 0.1);
        assert_eq!(set.slope_m, 2.0);
        // Hand-evaluated node positions and clamp levels.
        let e0r = set.exts[0].right.as_ref().unwrap();
        assert!((e0r.x_kink - 0.625).abs() < 1e-12);
        assert!((e0r.far_level - 6.104166666666666).abs() < 1e-9);
        let e1 = &set.exts[1];
        assert!((e1.left.as_ref().unwrap().x_kink - 0.0625).abs() < 1e-12);
        assert!((e1.left.as_ref().unwrap().far_level - 1.125).abs() < 1e-12);
        assert!((e1.right.as_ref().unwrap().x_kink - 0.6875).abs() < 1e-12);
        assert!((e1.right.as_ref().unwrap().far_level - 2.854166666666667).abs() < 1e-9);
        let e2 = &set.exts[2];
        assert!((e2.left.as_ref().unwrap().x_kink - 0.25).abs() < 1e-12);
        // Floor: inf over pieces 0..=1 (1.5) minus both jumps (3.0) minus the
        // descent of piece 1 (0.375).
        assert!((e2.left.as_ref().unwrap().far_level + 1.875).abs() < 1e-12);
        assert!((e2.right.as_ref().unwrap().x_kink - 0.7291666666666666).abs() < 1e-12);
        let e3 = &set.exts[3];
        // 0.5 - 3.625 - (0.375 + 0.25).
        assert!((e3.left.as_ref().unwrap().far_level + 3.75).abs() < 1e-12);
    }

    #[test]
    fn experiment1_ordering_gap() {
        let p = crate::preprocess::tests::experiment1_pieces();
        let set = build(&p, 0.5, 0.1);
        // Eq-style gap audit at dense sample points per adjacent pair.
        for i in 0..3 {
            let gap = 0.5 * set.jumps[i];
            for k in 0..=1000 {
                let x = -4.0 + 8.0 * k as f64 / 1000.0;
                assert!(set.exts[i].eval(x) - set.exts[i + 1].eval(x) >= gap - 1e-12);
            }
        }
    }

    #[test]
    fn single_piece_is_identity() {
        let set = build(
            &[(f64::NEG_INFINITY, f64::INFINITY, PieceForm::Affine { a: 0.0, b: 1.0 })],
            0.5,
            0.1,
        );
        assert_eq!(set.exts.len(), 1);
        for k in -10..=10 {
            let x = k as f64;
            assert_eq!(set.exts[0].eval(x), x);
        }
    }

    #[test]
    fn slopes_bounded_by_m() {
        let p = crate::preprocess::tests::experiment2_pieces();
        let set = build(&p, 0.5, 0.05);
        // M of the discretized profile: staircase slopes are 0.
        assert_eq!(set.slope_m, 1.0);
        for e in &set.exts {
            assert!(e.lip() <= set.slope_m + 1e-12);
            assert!(e.nodes().len() <= 6);
        }
    }

    #[test]
    fn experiment2_ordering_with_staircase() {
        let p = crate::preprocess::tests::experiment2_pieces();
        let set = build(&p, 0.5, 0.05);
        for i in 0..set.exts.len() - 1 {
            let gap = 0.5 * set.jumps[i];
            assert!(gap > 0.0);
            for k in 0..=500 {
                let x = -3.0 + 6.0 * k as f64 / 500.0;
                assert!(
                    set.exts[i].eval(x) - set.exts[i + 1].eval(x) >= gap - 1e-12,
                    "pair {i} at x={x}"
                );
            }
        }
    }
}
