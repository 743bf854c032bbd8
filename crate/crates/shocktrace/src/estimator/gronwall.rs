//! Incremental Gronwall accumulators: every exponentially weighted time
//! integral of the estimator advances by one multiply-and-add per step, with
//! the integrand frozen on each slab.

/// One step of the weighted-integral recurrence:
/// `F <- F e^{beta dt} + alpha dt e^{beta dt}`.
pub fn gronwall_step(f: f64, alpha: f64, beta: f64, dt: f64) -> f64 {
    let g = (beta * dt).exp();
    f * g + alpha * dt * g
}

/// Running value of `integral_0^t zeta(t,s) alpha(s) ds` with
/// `zeta(t,s) = exp(integral_s^t beta)` for piecewise-constant `alpha, beta`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GronwallAccumulator {
    pub value: f64,
}

impl GronwallAccumulator {
    pub fn new() -> Self {
        Self { value: 0.0 }
    }

    pub fn step(&mut self, alpha: f64, beta: f64, dt: f64) {
        self.value = gronwall_step(self.value, alpha, beta, dt);
    }
}

/// Exponential growth weight `zeta(t, s)` over a stored per-step rate
/// history (`rate[k]` holding `amax * max_i Lip` on slab `k` of width `dt`).
pub fn zeta(rates: &[f64], dt: f64, from_step: usize, to_step: usize) -> f64 {
    let sum: f64 = rates[from_step..to_step].iter().sum();
    (sum * dt).exp()
}

/// Streaming form of `zeta(t, 0)`: accumulate per-slab log factors.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZetaAccumulator {
    log_total: f64,
}

impl ZetaAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rate: f64, dt: f64) {
        self.log_total += rate * dt;
    }

    /// `zeta(t, 0)` at the current time.
    pub fn from_origin(&self) -> f64 {
        self.log_total.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_growth_and_pure_sum() {
        // alpha = 0: exponential growth only.
        let mut f = 1.0;
        for _ in 0..10 {
            f = gronwall_step(f, 0.0, 2.0, 0.1);
        }
        assert!((f - (2.0_f64).exp()).abs() < 1e-12);
        // beta = 0: running sum of alpha dt.
        let mut f = 0.0;
        for _ in 0..100 {
            f = gronwall_step(f, 3.0, 0.0, 0.01);
        }
        assert!((f - 3.0).abs() < 1e-12);
    }

    /// The recurrence reproduces the direct double sum
    /// `F_i = sum_j alpha_j dt exp(sum_{k=j..i} beta_k dt)` to 1e-12.
    #[test]
    fn direct_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _case in 0..20 {
            let n = 100;
            let dt = 0.01;
            let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let betas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let mut acc = GronwallAccumulator::new();
            for (a, b) in alphas.iter().zip(&betas) {
                acc.step(*a, *b, dt);
            }
            let mut direct = 0.0;
            for j in 0..n {
                let expo: f64 = betas[j..n].iter().sum::<f64>() * dt;
                direct += alphas[j] * dt * expo.exp();
            }
            assert!(
                (acc.value - direct).abs() <= 1e-12 * (1.0 + direct.abs()),
                "recurrence {} vs direct {}",
                acc.value,
                direct
            );
        }
    }

    /// Splitting a step in half is exact for beta = 0 and agrees to the
    /// O(beta dt) source-placement wiggle otherwise.
    #[test]
    fn half_step_consistency() {
        let (alpha, dt) = (1.3, 0.02);
        // Exact for beta = 0.
        let full = gronwall_step(0.7, alpha, 0.0, dt);
        let half = gronwall_step(gronwall_step(0.7, alpha, 0.0, dt / 2.0), alpha, 0.0, dt / 2.0);
        assert!((full - half).abs() < 1e-15);
        // Tiny beta*dt: agreement to 1e-12.
        let beta = 1e-10;
        let full = gronwall_step(0.7, alpha, beta, dt);
        let half = gronwall_step(gronwall_step(0.7, alpha, beta, dt / 2.0), alpha, beta, dt / 2.0);
        assert!((full - half).abs() < 1e-12);
        // General beta: the deviation is bounded by the slab-placement term.
        let beta = 2.0;
        let full = gronwall_step(0.0, alpha, beta, dt);
        let half = gronwall_step(gronwall_step(0.0, alpha, beta, dt / 2.0), alpha, beta, dt / 2.0);
        assert!((full - half).abs() <= full * beta * dt);
    }

    #[test]
    fn zeta_closed_forms() {
        // All pieces flat: weight 1.
        assert_eq!(zeta(&[0.0; 50], 0.01, 0, 50), 1.0);
        // Constant rate L over the window: exp(L (t - s)).
        let rates = vec![2.5; 100];
        let z = zeta(&rates, 0.01, 20, 70);
        assert!((z - (2.5 * 0.5_f64).exp()).abs() < 1e-12);
    }

    /// Accumulator form equals the direct product of per-step factors.
    #[test]
    fn zeta_accumulator_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rates: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..4.0)).collect();
        let dt = 0.005;
        let mut acc = ZetaAccumulator::new();
        let mut product = 1.0;
        for &r in &rates {
            acc.push(r, dt);
            product *= (r * dt).exp();
        }
        assert!((acc.from_origin() - product).abs() <= 1e-14 * product);
    }
}
