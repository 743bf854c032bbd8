//! First-order finite-volume evolution of one extended piece, with a
//! continuous piecewise-bilinear space-time reconstruction and the residual
//! quadrature the estimator consumes.

mod bounds;
mod residual;

pub use bounds::{
    gap_bound, gronwall_constant, level_set_check, linf_bound, lipschitz_bound, LevelSetCheck,
    LipBound,
};
pub use residual::{
    residual_l2_cone, slab_residual_contribution, ConeWindow, ResidualAccumulator,
};

use crate::error::{Error, Result};
use crate::model::Model;

/// Uniform grid with an explicit-Euler time step under a CFL constraint.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub xlo: f64,
    pub xhi: f64,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub cfl: f64,
}

impl Grid {
    /// Grid over `[xlo, xhi]` with `n` cells and `dt = cfl * h / max_speed`.
    pub fn new(xlo: f64, xhi: f64, n: usize, max_speed: f64, cfl: f64) -> Result<Grid> {
        if !(xhi > xlo) || n < 4 {
            return Err(Error::Solver(format!(
                "degenerate grid [{xlo}, {xhi}] with {n} cells"
            )));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Solver(format!("CFL number {cfl} outside (0, 1]")));
        }
        if !(max_speed > 0.0) {
            return Err(Error::Solver(format!("non-positive wave speed {max_speed}")));
        }
        let h = (xhi - xlo) / n as f64;
        Ok(Grid {
            xlo,
            xhi,
            n,
            h,
            dt: cfl * h / max_speed,
            cfl,
        })
    }

    /// Same grid with the time step snapped so that `t_end` is an exact
    /// multiple of `dt` (never increasing the step).
    pub fn snapped_to(mut self, t_end: f64) -> Grid {
        let steps = (t_end / self.dt).ceil().max(1.0);
        self.dt = t_end / steps;
        self
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.xlo + (j as f64 + 0.5) * self.h
    }
}

/// Engquist-Osher numerical flux, split at the sonic state:
/// `A(0) + integral_0^left max(A',0) + integral_0^right min(A',0)`.
///
/// `sonic` is where `A'` changes sign (a huge-magnitude sentinel when `A'`
/// keeps one sign on the band, see [`crate::model::ModelConstants`]).
pub fn eo_flux(m: &dyn Model, sonic: f64, left: f64, right: f64) -> f64 {
    m.flux(0.0) + (m.flux(left.max(sonic)) - m.flux(0.0_f64.max(sonic)))
        + (m.flux(right.min(sonic)) - m.flux(0.0_f64.min(sonic)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Constant extrapolation ghost cells (default; pieces are padded so the
    /// cone never sees the boundary).
    Extrapolate,
    /// Periodic wrap (conservation test fixtures).
    Periodic,
}

/// Streaming finite-volume integrator holding the current two time levels.
pub struct PieceStepper<'m> {
    pub grid: Grid,
    model: &'m dyn Model,
    sonic: f64,
    boundary: BoundaryMode,
    u_prev: Vec<f64>,
    u: Vec<f64>,
    ep: Vec<f64>,
    em: Vec<f64>,
    pub step: usize,
    init_min: f64,
    init_max: f64,
    lip_prev: f64,
    lip_curr: f64,
    monotone_curr: bool,
}

impl<'m> PieceStepper<'m> {
    pub fn new(
        model: &'m dyn Model,
        sonic: f64,
        grid: Grid,
        init: &dyn Fn(f64) -> f64,
        boundary: BoundaryMode,
    ) -> Result<Self> {
        let mut u = vec![0.0; grid.n];
        // Cell averages by 2-point Gauss (exact for affine stretches,
        // second order in kink cells).
        let g = 0.5 / 3.0_f64.sqrt();
        for (j, uj) in u.iter_mut().enumerate() {
            let c = grid.midpoint(j);
            *uj = 0.5 * (init(c - g * grid.h) + init(c + g * grid.h));
        }
        let (lo, hi) = min_max(&u);
        let lip = lipschitz_of(&u, grid.h);
        let mono = is_monotone(&u);
        let s = PieceStepper {
            grid,
            model,
            sonic,
            boundary,
            u_prev: u.clone(),
            ep: vec![0.0; grid.n],
            em: vec![0.0; grid.n],
            u,
            step: 0,
            init_min: lo,
            init_max: hi,
            lip_prev: lip,
            lip_curr: lip,
            monotone_curr: mono,
        };
        s.check_cfl()?;
        Ok(s)
    }

    fn check_cfl(&self) -> Result<()> {
        let speed = self
            .u
            .iter()
            .map(|&v| self.model.dflux(v).abs())
            .fold(0.0, f64::max);
        if self.grid.dt * speed > self.grid.h * (1.0 + 1e-12) {
            return Err(Error::Solver(format!(
                "CFL violation: dt*|A'| = {} exceeds h = {}",
                self.grid.dt * speed,
                self.grid.h
            )));
        }
        Ok(())
    }

    pub fn t_curr(&self) -> f64 {
        self.step as f64 * self.grid.dt
    }

    /// One forward-Euler step.  Enforces the monotone-scheme maximum
    /// principle and aborts on non-finite values.
    pub fn advance(&mut self) -> Result<()> {
        std::mem::swap(&mut self.u_prev, &mut self.u);
        self.lip_prev = self.lip_curr;
        let n = self.grid.n;
        let lam = self.grid.dt / self.grid.h;
        for j in 0..n {
            let v = self.u_prev[j];
            self.ep[j] = self.model.flux(v.max(self.sonic));
            self.em[j] = self.model.flux(v.min(self.sonic));
        }
        let (ghost_lo, ghost_hi) = match self.boundary {
            BoundaryMode::Extrapolate => (0, n - 1),
            BoundaryMode::Periodic => (n - 1, 0),
        };
        for j in 0..n {
            let jm = if j == 0 { ghost_lo } else { j - 1 };
            let jp = if j == n - 1 { ghost_hi } else { j + 1 };
            // F(u_j, u_{j+1}) - F(u_{j-1}, u_j); the A(0)-anchored constants
            // cancel in the difference.
            let df = (self.ep[j] + self.em[jp]) - (self.ep[jm] + self.em[j]);
            self.u[j] = self.u_prev[j] - lam * df;
        }
        self.step += 1;

        let (lo, hi) = min_max(&self.u);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite state at step {} (t = {})",
                self.step,
                self.t_curr()
            )));
        }
        let slack = 1e-12 * (1.0 + self.init_max.abs().max(self.init_min.abs()));
        if lo < self.init_min - slack || hi > self.init_max + slack {
            return Err(Error::Numeric(format!(
                "maximum principle violated at step {}: [{lo}, {hi}] vs [{}, {}]",
                self.step, self.init_min, self.init_max
            )));
        }
        self.lip_curr = lipschitz_of(&self.u, self.grid.h);
        self.monotone_curr = self.monotone_curr && is_monotone(&self.u);
        Ok(())
    }

    /// View of the current slab (the last completed step).
    pub fn slab(&self) -> SlabView<'_> {
        SlabView {
            grid: self.grid,
            t0: (self.step.saturating_sub(1)) as f64 * self.grid.dt,
            t1: self.t_curr(),
            u0: &self.u_prev,
            u1: &self.u,
        }
    }

    pub fn lip_slab_max(&self) -> f64 {
        self.lip_prev.max(self.lip_curr)
    }

    /// True while every level so far has been nondecreasing.
    pub fn nondecreasing(&self) -> bool {
        self.monotone_curr
    }

    pub fn current(&self) -> &[f64] {
        &self.u
    }

    /// Smallest adjacent-midpoint slope of the current level.
    pub fn min_slope_current(&self) -> f64 {
        let mut s = f64::INFINITY;
        for w in self.u.windows(2) {
            s = s.min((w[1] - w[0]) / self.grid.h);
        }
        s
    }
}

fn min_max(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn lipschitz_of(u: &[f64], h: f64) -> f64 {
    u.windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0, f64::max)
}

fn is_monotone(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[1] >= w[0] - 1e-13)
}

/// Two consecutive time levels of one piece; reconstruction queries and
/// residual quadrature run against this view.
#[derive(Clone, Copy)]
pub struct SlabView<'a> {
    pub grid: Grid,
    pub t0: f64,
    pub t1: f64,
    pub u0: &'a [f64],
    pub u1: &'a [f64],
}

impl<'a> SlabView<'a> {
    /// Bilinear reconstruction: linear between cell midpoints in space
    /// (clamped beyond the outermost midpoints), linear in time.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let tau = if self.t1 > self.t0 {
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let v0 = space_interp(&self.grid, self.u0, x);
        let v1 = space_interp(&self.grid, self.u1, x);
        v0 + tau * (v1 - v0)
    }

    /// Spatial slope of the reconstruction at fixed time.
    pub fn x_slope(&self, x: f64, t: f64) -> f64 {
        let tau = if self.t1 > self.t0 {
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let s0 = space_slope(&self.grid, self.u0, x);
        let s1 = space_slope(&self.grid, self.u1, x);
        s0 + tau * (s1 - s0)
    }

    /// Squared-residual integral over one reconstruction patch (between
    /// midpoints `j` and `j+1`, full slab in time) by 2x2 Gauss quadrature,
    /// clipped in x to `[clip_lo, clip_hi]`.
    pub fn patch_residual_sq(
        &self,
        model: &dyn Model,
        j: usize,
        clip_lo: f64,
        clip_hi: f64,
    ) -> f64 {
        let xl = self.grid.midpoint(j);
        let xr = self.grid.midpoint(j + 1);
        let lo = xl.max(clip_lo);
        let hi = xr.min(clip_hi);
        if hi <= lo {
            return 0.0;
        }
        let dtau = self.t1 - self.t0;
        if dtau <= 0.0 {
            return 0.0;
        }
        let c00 = self.u0[j];
        let c01 = self.u0[j + 1];
        let c10 = self.u1[j];
        let c11 = self.u1[j + 1];
        let g = 0.5 / 3.0_f64.sqrt();
        let pts = [0.5 - g, 0.5 + g];
        let mut acc = 0.0;
        for &tau in &pts {
            let sx = ((1.0 - tau) * (c01 - c00) + tau * (c11 - c10)) / self.grid.h;
            for &gx in &pts {
                let x = lo + gx * (hi - lo);
                let xi = (x - xl) / self.grid.h;
                let st = ((1.0 - xi) * (c10 - c00) + xi * (c11 - c01)) / dtau;
                let v = (1.0 - xi) * ((1.0 - tau) * c00 + tau * c10)
                    + xi * ((1.0 - tau) * c01 + tau * c11);
                let r = st + model.dflux(v) * sx;
                acc += r * r;
            }
        }
        acc * 0.25 * (hi - lo) * dtau
    }

    /// Number of interior reconstruction patches.
    pub fn patch_count(&self) -> usize {
        self.grid.n - 1
    }
}

fn space_interp(grid: &Grid, u: &[f64], x: f64) -> f64 {
    let m0 = grid.midpoint(0);
    let pos = (x - m0) / grid.h;
    if pos <= 0.0 {
        return u[0];
    }
    let j = pos.floor() as usize;
    if j + 1 >= u.len() {
        return u[u.len() - 1];
    }
    let frac = pos - j as f64;
    u[j] + frac * (u[j + 1] - u[j])
}

fn space_slope(grid: &Grid, u: &[f64], x: f64) -> f64 {
    let m0 = grid.midpoint(0);
    let pos = (x - m0) / grid.h;
    if pos <= 0.0 || pos.floor() as usize + 1 >= u.len() {
        return 0.0;
    }
    let j = pos.floor() as usize;
    (u[j + 1] - u[j]) / grid.h
}

/// Fully stored evolution (tests and small fixtures; the experiment pipeline
/// streams slabs instead).
pub struct PieceSolution {
    pub grid: Grid,
    pub levels: Vec<Vec<f64>>,
    pub lips: Vec<f64>,
}

impl PieceSolution {
    pub fn t_end(&self) -> f64 {
        (self.levels.len() - 1) as f64 * self.grid.dt
    }

    pub fn level_time(&self, k: usize) -> f64 {
        k as f64 * self.grid.dt
    }

    pub fn slab(&self, k: usize) -> SlabView<'_> {
        SlabView {
            grid: self.grid,
            t0: self.level_time(k),
            t1: self.level_time(k + 1),
            u0: &self.levels[k],
            u1: &self.levels[k + 1],
        }
    }

    /// Reconstruction at an arbitrary point of the stored window.
    pub fn reconstruct(&self, x: f64, t: f64) -> Result<f64> {
        if t < -1e-12 || t > self.t_end() + 1e-12 {
            return Err(Error::Solver(format!(
                "reconstruction query at t = {t} outside stored window [0, {}]",
                self.t_end()
            )));
        }
        if x < self.grid.xlo - 1e-12 || x > self.grid.xhi + 1e-12 {
            return Err(Error::Solver(format!(
                "reconstruction query at x = {x} outside [{}, {}]",
                self.grid.xlo, self.grid.xhi
            )));
        }
        let k = ((t / self.grid.dt).floor() as usize).min(self.levels.len().saturating_sub(2));
        Ok(self.slab(k).value(x, t))
    }

    /// Largest spatial Lipschitz constant over all stored levels.
    pub fn sup_lip(&self) -> f64 {
        self.lips.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest adjacent-midpoint slope over all stored levels.
    pub fn min_slope(&self) -> f64 {
        let mut s = f64::INFINITY;
        for lvl in &self.levels {
            for w in lvl.windows(2) {
                s = s.min((w[1] - w[0]) / self.grid.h);
            }
        }
        s
    }
}

/// Evolve initial data to `t_end`, storing every level.
pub fn evolve(
    model: &dyn Model,
    sonic: f64,
    grid: Grid,
    init: &dyn Fn(f64) -> f64,
    t_end: f64,
    boundary: BoundaryMode,
) -> Result<PieceSolution> {
    let grid = grid.snapped_to(t_end);
    let mut stepper = PieceStepper::new(model, sonic, grid, init, boundary)?;
    let steps = (t_end / grid.dt).round() as usize;
    let mut levels = Vec::with_capacity(steps + 1);
    let mut lips = Vec::with_capacity(steps + 1);
    levels.push(stepper.current().to_vec());
    lips.push(stepper.lip_slab_max());
    for _ in 0..steps {
        stepper.advance()?;
        levels.push(stepper.current().to_vec());
        lips.push(lipschitz_of(stepper.current(), grid.h));
    }
    Ok(PieceSolution { grid, levels, lips })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Burgers;

    const SONIC: f64 = 0.0;

    #[test]
    fn eo_flux_examples() {
        let m = Burgers;
        // Both states positive: pure upwind.
        assert!((eo_flux(&m, SONIC, 1.0, 2.0) - 0.5).abs() < 1e-15);
        // Consistency at arbitrary states.
        for u in [-2.0, -0.5, 0.0, 0.1, 3.0] {
            assert!((eo_flux(&m, SONIC, u, u) - m.flux(u)).abs() < 1e-15);
        }
        // Transonic shock spans the sonic state from above.
        assert!((eo_flux(&m, SONIC, 1.0, -1.0) - 1.0).abs() < 1e-15);
        // Transonic rarefaction evaluates to the sonic flux.
        assert!((eo_flux(&m, SONIC, -1.0, 1.0) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn eo_flux_monotone() {
        let m = Burgers;
        let grid: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
        for &r in &grid {
            let mut prev = f64::NEG_INFINITY;
            for &l in &grid {
                let f = eo_flux(&m, SONIC, l, r);
                assert!(f >= prev - 1e-14, "not nondecreasing in left at ({l},{r})");
                prev = f;
            }
        }
        for &l in &grid {
            let mut prev = f64::INFINITY;
            for &r in &grid {
                let f = eo_flux(&m, SONIC, l, r);
                assert!(f <= prev + 1e-14, "not nonincreasing in right at ({l},{r})");
                prev = f;
            }
        }
    }

    #[test]
    fn constant_data_is_exact() {
        let m = Burgers;
        let grid = Grid::new(-1.0, 1.0, 64, 2.0, 0.45).unwrap();
        let sol = evolve(&m, SONIC, grid, &|_| 1.5, 0.5, BoundaryMode::Extrapolate).unwrap();
        for lvl in &sol.levels {
            for &v in lvl {
                assert_eq!(v, 1.5);
            }
        }
        let cone = ConeWindow {
            s_half: 0.8,
            info_speed: 0.1,
        };
        let r = residual_l2_cone(&m, &[&sol], &cone, 0.5, None).unwrap();
        assert!(r < 1e-28, "residual {r} should vanish to round-off");
    }

    /// Interior solution of `u0(x) = x` stays close to the similarity
    /// solution `x/(1+t)`; the interior max error decays at order h.
    #[test]
    fn affine_similarity_oracle() {
        let m = Burgers;
        let mut errs = Vec::new();
        for n in [200usize, 400, 800] {
            let grid = Grid::new(-8.0, 8.0, n * 16, 8.0, 0.45).unwrap();
            let sol = evolve(&m, SONIC, grid, &|x| x, 1.0, BoundaryMode::Extrapolate).unwrap();
            let mut err = 0.0_f64;
            for k in 0..=200 {
                let x = -1.0 + 2.0 * k as f64 / 200.0;
                let got = sol.reconstruct(x, 1.0).unwrap();
                err = err.max((got - x / 2.0).abs());
            }
            errs.push(err);
        }
        for w in errs.windows(2) {
            let eoc = (w[0] / w[1]).log2();
            assert!(eoc > 0.8, "interior EoC {eoc} below first order: {errs:?}");
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let m = Burgers;
        let grid = Grid::new(-4.0, 4.0, 512, 4.0, 0.45).unwrap();
        let init = |x: f64| x.clamp(-1.0, 2.0);
        let sol = evolve(&m, SONIC, grid, &init, 0.7, BoundaryMode::Extrapolate).unwrap();
        for lvl in &sol.levels {
            for w in lvl.windows(2) {
                assert!(w[1] >= w[0] - 1e-13);
            }
            let (lo, hi) = min_max(lvl);
            assert!(lo >= -1.0 - 1e-12 && hi <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn conservation_on_periodic_fixture() {
        let m = Burgers;
        let grid = Grid::new(0.0, 1.0, 128, 2.0, 0.45).unwrap();
        let init = |x: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin();
        let mut stepper =
            PieceStepper::new(&m, SONIC, grid, &init, BoundaryMode::Periodic).unwrap();
        let mass0: f64 = stepper.current().iter().sum::<f64>() * grid.h;
        for _ in 0..300 {
            stepper.advance().unwrap();
            let mass: f64 = stepper.current().iter().sum::<f64>() * grid.h;
            assert!((mass - mass0).abs() < 1e-12 * mass0.abs());
        }
    }

    #[test]
    fn reconstruct_nodes_and_time_mean() {
        let m = Burgers;
        let grid = Grid::new(-2.0, 2.0, 64, 2.0, 0.45).unwrap();
        let sol = evolve(&m, SONIC, grid, &|x| 0.25 * x, 0.3, BoundaryMode::Extrapolate).unwrap();
        for (k, lvl) in sol.levels.iter().enumerate().step_by(7) {
            let t = sol.level_time(k);
            for j in (0..grid.n).step_by(11) {
                assert_eq!(sol.reconstruct(sol.grid.midpoint(j), t).unwrap(), lvl[j]);
            }
        }
        let x = 0.37;
        let t0 = sol.level_time(3);
        let t1 = sol.level_time(4);
        let mid = sol.reconstruct(x, 0.5 * (t0 + t1)).unwrap();
        let a = sol.reconstruct(x, t0).unwrap();
        let b = sol.reconstruct(x, t1).unwrap();
        assert!((mid - 0.5 * (a + b)).abs() < 1e-14);
        assert!(sol.reconstruct(0.0, 1.0).is_err());
        assert!(sol.reconstruct(5.0, 0.1).is_err());
    }

    #[test]
    fn cfl_violation_rejected() {
        let m = Burgers;
        let mut grid = Grid::new(-1.0, 1.0, 64, 2.0, 0.9).unwrap();
        grid.dt *= 10.0;
        assert!(PieceStepper::new(&m, SONIC, grid, &|_| 2.0, BoundaryMode::Extrapolate).is_err());
    }
}
