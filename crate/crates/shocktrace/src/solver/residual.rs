//! Space-time residual quadrature over the shrinking cone of information.

use super::{PieceSolution, SlabView};
use crate::error::{Error, Result};
use crate::model::Model;

/// Shrinking spatial window `[-S + s t, S - s t]`.
#[derive(Debug, Clone, Copy)]
pub struct ConeWindow {
    /// Half-width `S` at `t = 0`.
    pub s_half: f64,
    /// Information speed `s`.
    pub info_speed: f64,
}

impl ConeWindow {
    pub fn interval(&self, t: f64) -> (f64, f64) {
        (
            -self.s_half + self.info_speed * t,
            self.s_half - self.info_speed * t,
        )
    }

    pub fn width(&self, t: f64) -> f64 {
        (self.interval(t).1 - self.interval(t).0).max(0.0)
    }

    /// Construction constraint: the cone edges must outrun every shock curve.
    pub fn validate(&self, max_breakpoint: f64, t_end: f64, sup_da: f64) -> Result<()> {
        if self.s_half <= max_breakpoint + (self.info_speed + sup_da) * t_end {
            return Err(Error::Solver(format!(
                "cone half-width {} too small for breakpoints up to {max_breakpoint} \
                 over [0, {t_end}]",
                self.s_half
            )));
        }
        Ok(())
    }
}

/// Incremental accumulator for the windowed squared-residual integral.
///
/// Each slab contributes `max_i R_i^2` integrated over the cone section; the
/// per-piece windows come from the previous outer pass (or cover everything
/// on the first pass, where the max is relaxed to a sum).
#[derive(Debug, Clone, Default)]
pub struct ResidualAccumulator {
    total: f64,
    history: Vec<f64>,
}

impl ResidualAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one slab's contribution and return the running total.
    pub fn push_slab(&mut self, contribution: f64) -> f64 {
        debug_assert!(contribution >= -1e-30);
        self.total += contribution.max(0.0);
        self.history.push(self.total);
        self.total
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Running value after slab `k` (nondecreasing in `k`).
    pub fn at_step(&self, k: usize) -> f64 {
        if self.history.is_empty() || k == 0 {
            0.0
        } else {
            self.history[(k - 1).min(self.history.len() - 1)]
        }
    }
}

/// Windowed max over pieces of the squared residual, integrated over one
/// slab's `[clo, chi]` section.  `windows[i]` is the potential-revelation
/// interval of piece `i`; `None` means every piece counts everywhere (first
/// pass), in which case contributions are summed instead of maxed.
pub fn slab_residual_contribution(
    model: &dyn Model,
    slabs: &[SlabView<'_>],
    clo: f64,
    chi: f64,
    windows: Option<&[(f64, f64)]>,
    scratch: &mut Vec<f64>,
) -> f64 {
    if slabs.is_empty() || chi <= clo {
        return 0.0;
    }
    let grid = slabs[0].grid;
    match windows {
        None => slabs
            .iter()
            .map(|s| {
                let (j0, j1) = patch_range(&grid, clo, chi);
                (j0..j1)
                    .map(|j| s.patch_residual_sq(model, j, clo, chi))
                    .sum::<f64>()
            })
            .sum(),
        Some(wins) => {
            let (j0, j1) = patch_range(&grid, clo, chi);
            scratch.clear();
            scratch.resize(j1 - j0, 0.0);
            for (s, win) in slabs.iter().zip(wins) {
                let lo = win.0.max(clo);
                let hi = win.1.min(chi);
                if hi <= lo {
                    continue;
                }
                let (w0, w1) = patch_range(&grid, lo, hi);
                for j in w0.max(j0)..w1.min(j1) {
                    let v = s.patch_residual_sq(model, j, lo, hi);
                    let cell = &mut scratch[j - j0];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
            scratch.iter().sum()
        }
    }
}

fn patch_range(grid: &super::Grid, lo: f64, hi: f64) -> (usize, usize) {
    let m0 = grid.midpoint(0);
    let j0 = (((lo - m0) / grid.h).floor().max(0.0)) as usize;
    let j1 = ((((hi - m0) / grid.h).ceil()) as usize).min(grid.n - 1);
    (j0.min(j1), j1)
}

/// Windowed residual integral over `[0, t_end]` for fully stored solutions.
///
/// `deltas(step, piece)` returns the potential-revelation window of a piece
/// at a step; `None` integrates every piece everywhere (the pessimistic
/// first-pass bound, relaxed from a max to a sum).
pub fn residual_l2_cone(
    model: &dyn Model,
    sols: &[&PieceSolution],
    cone: &ConeWindow,
    t_end: f64,
    deltas: Option<&dyn Fn(usize, usize) -> (f64, f64)>,
) -> Result<f64> {
    if sols.is_empty() {
        return Ok(0.0);
    }
    let steps = sols[0].levels.len() - 1;
    let dt = sols[0].grid.dt;
    for s in sols {
        if s.levels.len() - 1 != steps || (s.grid.dt - dt).abs() > 1e-15 {
            return Err(Error::Solver(
                "residual quadrature needs a shared time grid across pieces".into(),
            ));
        }
    }
    let last = ((t_end / dt).round() as usize).min(steps);
    let mut acc = ResidualAccumulator::new();
    let mut scratch = Vec::new();
    let mut windows_buf = Vec::new();
    for k in 0..last {
        let slabs: Vec<SlabView<'_>> = sols.iter().map(|s| s.slab(k)).collect();
        let t_mid = 0.5 * (slabs[0].t0 + slabs[0].t1);
        let (clo, chi) = cone.interval(t_mid);
        let wins = match deltas {
            None => None,
            Some(f) => {
                windows_buf.clear();
                for i in 0..sols.len() {
                    windows_buf.push(f(k, i));
                }
                Some(windows_buf.as_slice())
            }
        };
        let c = slab_residual_contribution(model, &slabs, clo, chi, wins, &mut scratch);
        acc.push_slab(c);
    }
    Ok(acc.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Burgers;
    use crate::solver::{evolve, BoundaryMode, Grid};

    /// Refining the quadrature grid does not change the windowed residual
    /// beyond the expected first-order wiggle (quadrature sanity check).
    #[test]
    fn quadrature_refinement_check() {
        let m = Burgers;
        let cone = ConeWindow {
            s_half: 2.0,
            info_speed: 1.0,
        };
        let mut vals = Vec::new();
        for n in [256usize, 512] {
            let grid = Grid::new(-4.0, 4.0, n, 4.0, 0.45).unwrap();
            let sol = evolve(&m, 0.0, grid, &|x: f64| x.clamp(-1.0, 1.0), 0.5,
                BoundaryMode::Extrapolate)
            .unwrap();
            vals.push(
                residual_l2_cone(&m, &[&sol], &cone, 0.5, None)
                    .unwrap()
                    .sqrt(),
            );
        }
        // First-order scheme: residual norm halves under refinement.
        let eoc = (vals[0] / vals[1]).log2();
        assert!(eoc > 0.7 && eoc < 1.4, "EoC {eoc} out of range: {vals:?}");
    }

    #[test]
    fn windowed_max_below_sum() {
        let m = Burgers;
        let grid = Grid::new(-4.0, 4.0, 256, 4.0, 0.45).unwrap();
        let a = evolve(&m, 0.0, grid, &|x: f64| x.clamp(-1.0, 1.0), 0.4,
            BoundaryMode::Extrapolate)
        .unwrap();
        let b = evolve(&m, 0.0, grid, &|x: f64| (x - 0.3).clamp(-0.5, 0.5), 0.4,
            BoundaryMode::Extrapolate)
        .unwrap();
        let cone = ConeWindow {
            s_half: 2.0,
            info_speed: 1.0,
        };
        let everything = residual_l2_cone(&m, &[&a, &b], &cone, 0.4, None).unwrap();
        let windowed =
            residual_l2_cone(&m, &[&a, &b], &cone, 0.4, Some(&|_, _| (-2.0, 2.0))).unwrap();
        assert!(windowed <= everything + 1e-15);
        assert!(windowed > 0.0);
    }
}
