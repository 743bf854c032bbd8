//! Collision certificates: after a merge in the glued solution, the two
//! participating curves are continued forward *as if they had not collided*.
//! Once the two continuation intervals separate in the wrong order, the
//! shifted curves must have merged — the certificate fires and the candidate
//! flank sets tighten.

use super::gronwall::gronwall_step;
use crate::error::Result;
use crate::model::{rh_speed, Model};
use crate::shocks::PieceFields;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    /// At least one participant is a large shock.
    LargePair,
    /// Two boundary shocks separated by a nearly non-decreasing piece.
    NndBoundaryPair,
}

/// Fictitious continuation of one curve with frozen flank pieces.  Its
/// uncertainty propagates with the ambiguity source switched off and the
/// merge-time value carried in `base`.
#[derive(Debug, Clone)]
pub struct FictCurve {
    pub pos: f64,
    pub pair: (usize, usize),
    pub base: f64,
    pub a: f64,
    pub c_weight_sq: f64,
    pub s_floor: f64,
    /// Extra worst-case term for boundary-class participants.
    pub extra: f64,
}

impl FictCurve {
    /// One slab: RK4 on the frozen pair plus accumulator updates.
    pub fn advance(
        &mut self,
        model: &dyn Model,
        fields: &dyn PieceFields,
        t0: f64,
        t1: f64,
        beta: f64,
        extra: f64,
    ) -> Result<()> {
        let dt = t1 - t0;
        let f = |x: f64, t: f64| {
            rh_speed(
                model,
                fields.value(self.pair.0, x, t),
                fields.value(self.pair.1, x, t),
            )
        };
        let k1 = f(self.pos, t0);
        let k2 = f(self.pos + 0.5 * dt * k1, t0 + 0.5 * dt);
        let k3 = f(self.pos + 0.5 * dt * k2, t0 + 0.5 * dt);
        let k4 = f(self.pos + dt * k3, t1);
        let new_pos = self.pos + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let defect = ((new_pos - self.pos) / dt
            - f(0.5 * (self.pos + new_pos), 0.5 * (t0 + t1)))
        .abs();
        self.pos = new_pos;
        self.a = gronwall_step(self.a, defect, beta, dt);
        self.base = gronwall_step(self.base, 0.0, beta, dt);
        let g = (2.0 * beta * dt).exp();
        if self.s_floor > 0.0 {
            self.c_weight_sq = self.c_weight_sq * g + dt * g / self.s_floor;
        }
        self.extra = extra;
        Ok(())
    }

    pub fn delta(&self, budget: f64) -> f64 {
        self.base + self.a + self.c_weight_sq.sqrt() * budget.sqrt() + self.extra
    }
}

/// An open certificate question spawned at a merge.
#[derive(Debug, Clone)]
pub struct CertificateWatch {
    pub kind: CertKind,
    pub spawn_t: f64,
    /// Participating curve ids in spatial order.
    pub group: Vec<usize>,
    pub left: FictCurve,
    pub right: FictCurve,
    pub fired_at: Option<f64>,
}

impl CertificateWatch {
    /// Certificate fires once the continuation intervals separate with the
    /// left curve strictly to the right — contradicting the no-collision
    /// hypothesis.
    pub fn check_fire(&mut self, t: f64, budget: f64) -> bool {
        if self.fired_at.is_some() {
            return false;
        }
        if self.left.pos - self.left.delta(budget) > self.right.pos + self.right.delta(budget) {
            self.fired_at = Some(t);
            true
        } else {
            false
        }
    }
}

/// Smallest Rankine-Hugoniot speed difference `sigma(w, v) - sigma(v, u)`
/// over ordered triples with `|states| <= band_max` and `w - u > rho`, by a
/// grid search (closed form `rho/2` for a quadratic flux).
pub fn min_rh_speed_diff(model: &dyn Model, band_max: f64, rho: f64) -> f64 {
    let n = 60;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let w = -band_max + 2.0 * band_max * i as f64 / n as f64;
        for j in 0..=n {
            let u = -band_max + 2.0 * band_max * j as f64 / n as f64;
            if w - u <= rho {
                continue;
            }
            for k in 0..=n {
                let v = u + (w - u) * k as f64 / n as f64;
                best = best.min(rh_speed(model, w, v) - rh_speed(model, v, u));
            }
        }
    }
    best
}

/// Certificate for the two boundary shocks of one staircase region after
/// they touch in the glued solution at `t_touch`: fires at the first time
/// with `m (t - t_touch) > delta_left + delta_right + upsilons(t)`.
///
/// `upsilons(t)` is the sum of the two boundary velocity-error budgets at
/// `t`.  Returns the firing time found on `[t_touch, t_end]`, if any.
pub fn rd_pair_certificate(
    m_speed_diff: f64,
    t_touch: f64,
    delta_sum_at_touch: f64,
    upsilons: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Option<f64> {
    if m_speed_diff <= 0.0 {
        return None;
    }
    let mut t = t_touch;
    while t <= t_end + 1e-12 {
        if m_speed_diff * (t - t_touch) > delta_sum_at_touch + upsilons(t) {
            return Some(t);
        }
        t += dt;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Burgers;
    use crate::shocks::PieceFields;

    struct ConstFields(Vec<f64>);
    impl PieceFields for ConstFields {
        fn n_pieces(&self) -> usize {
            self.0.len()
        }
        fn value(&self, piece: usize, _x: f64, _t: f64) -> f64 {
            self.0[piece]
        }
    }

    fn fict(pos: f64, pair: (usize, usize), s_floor: f64) -> FictCurve {
        FictCurve {
            pos,
            pair,
            base: 0.0,
            a: 0.0,
            c_weight_sq: 0.0,
            s_floor,
            extra: 0.0,
        }
    }

    /// Separated speeds with point intervals: fires as soon as the
    /// continuations pull apart in the wrong order.
    #[test]
    fn zero_error_fires_immediately() {
        let m = Burgers;
        // Continuations: left pair (0, 2) is faster than right pair (1, 3).
        let fields = ConstFields(vec![3.0, 2.0, 1.0, 0.0]);
        let mut watch = CertificateWatch {
            kind: CertKind::LargePair,
            spawn_t: 0.0,
            group: vec![0, 1],
            left: fict(1.0, (0, 2), 1.0),
            right: fict(1.0, (1, 3), 1.0),
            fired_at: None,
        };
        let mut t = 0.0;
        let dt = 0.01;
        let mut fired = None;
        for _ in 0..50 {
            watch
                .left
                .advance(&m, &fields, t, t + dt, 0.0, 0.0)
                .unwrap();
            watch
                .right
                .advance(&m, &fields, t, t + dt, 0.0, 0.0)
                .unwrap();
            t += dt;
            if watch.check_fire(t, 0.0) {
                fired = Some(t);
                break;
            }
        }
        // Speed gap sigma(3,1) - sigma(2,0) = 1: with zero budgets the
        // intervals are points and separate after one step.
        assert!((fired.unwrap() - dt).abs() < 1e-12);
    }

    /// Latency grows with the error intervals: roughly interval sum divided
    /// by the speed gap.
    #[test]
    fn latency_tracks_interval_size() {
        let m = Burgers;
        let fields = ConstFields(vec![3.0, 2.0, 1.0, 0.0]);
        let mut latencies = Vec::new();
        for base in [0.01, 0.005, 0.0025] {
            let mut watch = CertificateWatch {
                kind: CertKind::LargePair,
                spawn_t: 0.0,
                group: vec![0, 1],
                left: FictCurve {
                    base,
                    ..fict(1.0, (0, 2), 1.0)
                },
                right: FictCurve {
                    base,
                    ..fict(1.0, (1, 3), 1.0)
                },
                fired_at: None,
            };
            let dt = 1e-4;
            let mut t = 0.0;
            while watch.fired_at.is_none() && t < 1.0 {
                watch
                    .left
                    .advance(&m, &fields, t, t + dt, 0.0, 0.0)
                    .unwrap();
                watch
                    .right
                    .advance(&m, &fields, t, t + dt, 0.0, 0.0)
                    .unwrap();
                t += dt;
                watch.check_fire(t, 0.0);
            }
            latencies.push(watch.fired_at.unwrap());
        }
        // Halving the intervals roughly halves the latency.
        for w in latencies.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 1.6 && ratio < 2.4, "latency ratio {ratio}");
        }
    }

    #[test]
    fn min_speed_diff_burgers_closed_form() {
        let m = Burgers;
        for rho in [0.4, 1.0, 1.7] {
            let got = min_rh_speed_diff(&m, 3.0, rho);
            assert!(
                (got - rho / 2.0).abs() < 1e-6 + rho * 0.02,
                "rho={rho}: got {got}, want {}",
                rho / 2.0
            );
            assert!(got >= rho / 2.0 - 1e-9, "grid search must not undershoot");
        }
    }

    /// Frozen uncertainties 0.01 each and constant budgets: latency
    /// 4*0.01 / (rho/2) = 0.08 for rho = 1.
    #[test]
    fn rd_pair_latency_example() {
        let fired = rd_pair_certificate(0.5, 0.1, 0.02, &|_t| 0.02, 1.0, 1e-5).unwrap();
        assert!((fired - 0.1 - 0.08).abs() < 1e-3, "fired at {fired}");
        // Zero uncertainties: immediate.
        let now = rd_pair_certificate(0.5, 0.1, 0.0, &|_t| 0.0, 1.0, 1e-5).unwrap();
        assert!(now - 0.1 < 1e-4);
        // Never fires within the horizon: ambiguity persists (sound).
        assert!(rd_pair_certificate(0.5, 0.1, 10.0, &|_t| 10.0, 0.2, 1e-3).is_none());
    }
}
