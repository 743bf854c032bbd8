//! A posteriori bounds: per-shock position uncertainty with its three error
//! sources, the shock-size fix-point, collision certificates, front-tracking
//! budgets, and the assembled L1/L2 error report.

pub mod certificates;
pub mod ft_bounds;
pub mod gronwall;
pub mod report;

pub use certificates::{rd_pair_certificate, min_rh_speed_diff, CertKind, CertificateWatch, FictCurve};
pub use ft_bounds::{
    boundary_d_tilde, delta_inner, delta_inner_worst, gamma, upsilon, GammaInputs, UpsilonInputs,
};
pub use gronwall::{gronwall_step, zeta, GronwallAccumulator, ZetaAccumulator};
pub use report::{l2_bound, merge_intervals, EventKind, EventRecord, ReportRow};

use crate::model::{rh_speed, Model};
use crate::shocks::{PieceFields, ShockClass};

/// Per-curve uncertainty state: the three Gronwall accumulators, the
/// shock-size floor, and the candidate flank pairs in the shifted
/// configuration.
#[derive(Debug, Clone)]
pub struct CurveUncertainty {
    pub class: ShockClass,
    /// Position uncertainty carried over a re-classification restart,
    /// compounded by the growth weight.
    pub base: f64,
    /// ODE-defect integral.
    pub a: f64,
    /// Pair-ambiguity integral (zero while the candidate set is trivial).
    pub b: f64,
    /// `integral zeta(t,s)^2 / s_floor(s) ds`.
    pub c_weight_sq: f64,
    /// Current certified shock-size floor.
    pub s_floor: f64,
    /// Smallest floor seen so far.
    pub s_floor_min: f64,
    /// Candidate flank pairs of the shifted curve; always contains the truth.
    pub pairs: Vec<(usize, usize)>,
    /// Current flank pieces in the glued solution.
    pub hat_pair: (usize, usize),
    /// Certified-merge bounds on the shifted flank indices.
    pub cert_left: usize,
    pub cert_right: usize,
    /// Set when the shock-size floor collapsed (bound becomes infinite).
    pub collapsed: bool,
}

impl CurveUncertainty {
    pub fn new(curve: usize, class: ShockClass, initial_jump: f64) -> Self {
        CurveUncertainty {
            class,
            base: 0.0,
            a: 0.0,
            b: 0.0,
            c_weight_sq: 0.0,
            s_floor: initial_jump,
            s_floor_min: initial_jump,
            pairs: vec![(curve, curve + 1)],
            hat_pair: (curve, curve + 1),
            cert_left: curve,
            cert_right: curve + 1,
            collapsed: false,
        }
    }

    /// Advance all accumulators by one slab.
    pub fn step(&mut self, alpha_a: f64, alpha_b: f64, beta: f64, dt: f64, s_floor: f64) {
        self.a = gronwall_step(self.a, alpha_a, beta, dt);
        self.b = gronwall_step(self.b, alpha_b, beta, dt);
        self.base = gronwall_step(self.base, 0.0, beta, dt);
        if s_floor <= 0.0 {
            self.collapsed = true;
        } else {
            let g = (2.0 * beta * dt).exp();
            self.c_weight_sq = self.c_weight_sq * g + dt * g / s_floor;
            self.s_floor = s_floor;
            self.s_floor_min = self.s_floor_min.min(s_floor);
        }
    }

    /// Dissipation-route term: `||zeta/sqrt(s)||_{L2} * sqrt(budget)` with
    /// `budget = C e^{Ct} (initial entropy + windowed residual)`.
    pub fn c_term(&self, budget: f64) -> f64 {
        if self.collapsed {
            f64::INFINITY
        } else {
            self.c_weight_sq.sqrt() * budget.sqrt()
        }
    }

    /// Assembled position uncertainty.  `extra` carries the boundary-class
    /// worst-case term (zero for large shocks).
    pub fn delta(&self, budget: f64, extra: f64) -> f64 {
        if self.collapsed {
            return f64::INFINITY;
        }
        self.base + self.a + self.b + self.c_term(budget) + extra
    }

    /// True while the B-source must be integrated.
    pub fn ambiguous(&self) -> bool {
        self.pairs.len() > 1 || self.pairs[0] != self.hat_pair
    }

    /// Record a merge in the glued solution: the not-merged options stay and
    /// every (left of this curve) x (right of the partner) combination joins
    /// the candidate set.
    pub fn on_merge(&mut self, partner_pairs: &[(usize, usize)], this_is_left: bool, post: (usize, usize)) {
        let mut new_pairs = self.pairs.clone();
        for &(l, r) in &self.pairs {
            for &(pl, pr) in partner_pairs {
                let cand = if this_is_left { (l, pr) } else { (pl, r) };
                if !new_pairs.contains(&cand) {
                    new_pairs.push(cand);
                }
            }
        }
        self.pairs = new_pairs;
        self.hat_pair = post;
    }

    /// A certificate proved the shifted curves merged: drop the not-merged
    /// options.
    pub fn on_certified_merge(&mut self, cert_left: usize, cert_right: usize) {
        self.cert_left = self.cert_left.min(cert_left);
        self.cert_right = self.cert_right.max(cert_right);
        self.pairs
            .retain(|&(l, r)| l <= cert_left && r >= cert_right);
        if self.pairs.is_empty() {
            self.pairs.push((cert_left, cert_right));
        }
        self.hat_pair = (self.hat_pair.0, self.hat_pair.1);
    }

    /// Restart the Gronwall ledger at a certificate time, carrying the
    /// current uncertainty (used when a collapsed staircase region is
    /// re-classified as a large shock).
    pub fn restart_as_large(&mut self, carried_uncertainty: f64, s_floor: f64) {
        self.class = ShockClass::Large;
        self.base = carried_uncertainty;
        self.a = 0.0;
        self.b = 0.0;
        self.c_weight_sq = 0.0;
        self.s_floor = s_floor;
        self.s_floor_min = s_floor;
    }
}

/// Largest candidate-pair speed discrepancy at the glued curve position,
/// capped at twice the supersonic speed; zero when unambiguous.
pub fn pair_speed_gap(
    model: &dyn Model,
    fields: &dyn PieceFields,
    est: &CurveUncertainty,
    pos: f64,
    t: f64,
    cap: f64,
) -> f64 {
    if !est.ambiguous() {
        return 0.0;
    }
    let hat = rh_speed(
        model,
        fields.value(est.hat_pair.0, pos, t),
        fields.value(est.hat_pair.1, pos, t),
    );
    let mut worst = 0.0_f64;
    for &(l, r) in &est.pairs {
        let s = rh_speed(model, fields.value(l, pos, t), fields.value(r, pos, t));
        worst = worst.max((hat - s).abs());
    }
    worst.min(cap)
}

/// Iterate the shock-size floor: measure the smallest flank gap over the
/// current position interval, recompute the interval from the implied
/// uncertainty, and repeat until the floor stops growing.
///
/// `gap_inf(lo, hi)` returns the infimum of the candidate flank difference
/// over `[lo, hi]`; `delta_of(s)` the uncertainty the floor `s` implies.
pub fn shock_size_fixpoint(
    pos: f64,
    rough: (f64, f64),
    gap_inf: &dyn Fn(f64, f64) -> f64,
    delta_of: &dyn Fn(f64) -> f64,
) -> (f64, (f64, f64), usize) {
    let mut interval = rough;
    let mut s = gap_inf(interval.0, interval.1).max(0.0);
    let mut iters = 0;
    for _ in 0..10 {
        iters += 1;
        if s <= 0.0 {
            break;
        }
        let d = delta_of(s);
        let tightened = ((pos - d).max(rough.0), (pos + d).min(rough.1));
        if tightened.1 <= tightened.0 {
            break;
        }
        interval = tightened;
        let s_new = gap_inf(interval.0, interval.1).max(0.0);
        debug_assert!(s_new >= s - 1e-12, "fix-point floor decreased");
        if s_new <= s * (1.0 + 1e-3) {
            s = s_new.max(s);
            break;
        }
        s = s_new;
    }
    (s, interval, iters)
}
