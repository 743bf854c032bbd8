//! Front-tracking-region budgets: the per-shock velocity-error bound, the
//! regional L1 budget, and the interior position uncertainty, plus the
//! boundary-shock worst-case carry term.

/// Inputs of the per-shock velocity-error budget.
#[derive(Debug, Clone, Copy)]
pub struct UpsilonInputs {
    /// Initial size of the tracked shock.
    pub s_star0: f64,
    /// Sum of squared initial sizes of the artificial boundary shocks (those
    /// where the exact data is continuous).
    pub boundary_s0_sq_sum: f64,
    /// Initial relative-entropy mass of the nearly non-decreasing pieces.
    pub nnd_init_entropy: f64,
    /// Windowed squared-residual integral at time t.
    pub residual_sq: f64,
    /// Smallest certified shock size over [0, t].
    pub s_star_min: f64,
    /// sup eta''.
    pub hmax: f64,
    /// sup A''.
    pub amax: f64,
    /// Largest front-tracking shock size seen anywhere so far.
    pub s_bar: f64,
    /// Gronwall constant.
    pub c: f64,
    /// Staircase parameter delta.
    pub delta: f64,
    pub t: f64,
}

/// Velocity-error budget of one front-tracking shock:
/// `sqrt(t/min s) * [2 H delta (s0^2 + sum boundary s0^2) + E_nnd + R]^(1/2) e^{Ct}
///  + t * s_bar * amax`.
pub fn upsilon(inp: &UpsilonInputs) -> f64 {
    let bracket = 2.0 * inp.hmax * inp.delta * (inp.s_star0 * inp.s_star0 + inp.boundary_s0_sq_sum)
        + inp.nnd_init_entropy
        + inp.residual_sq;
    let first = if bracket > 0.0 {
        (inp.t / inp.s_star_min).sqrt() * bracket.sqrt() * (inp.c * inp.t).exp()
    } else {
        0.0
    };
    first + inp.t * inp.s_bar * inp.amax
}

/// Inputs of the regional L1 budget.
#[derive(Debug, Clone, Copy)]
pub struct GammaInputs {
    /// Oscillation of the region's staircase (max - min plateau).
    pub oscillation: f64,
    /// Initial width of the region.
    pub width: f64,
    pub delta: f64,
    /// sup-in-time Lipschitz constant of the shared line solution.
    pub m_hat: f64,
    /// max over the region's shocks of the velocity-error budget.
    pub max_upsilon: f64,
    /// Initial relative-entropy mass of the glued configuration.
    pub init_entropy: f64,
    pub residual_sq: f64,
    pub c: f64,
    pub amax: f64,
    pub t: f64,
}

/// Regional L1 budget: dissipation term + collision-bookkeeping terms.
pub fn gamma(g: &GammaInputs) -> f64 {
    let load = g.oscillation + g.width / g.delta * g.m_hat * g.max_upsilon;
    let budget = g.c * (g.init_entropy + g.residual_sq) * (g.c * g.t).exp();
    let first = if load > 0.0 && budget > 0.0 {
        load.sqrt() * g.t.sqrt() * budget.sqrt()
    } else {
        0.0
    };
    first
        + 2.0 * g.width / g.delta * g.m_hat * g.max_upsilon * g.max_upsilon
        + load * 2.0 * g.amax * g.m_hat * g.t * g.max_upsilon
}

/// Interior position uncertainty from the regional budget and the discrete
/// slope (falling back to the threshold floor `eps/2` when the slope is
/// unavailable or smaller).
pub fn delta_inner(gamma: f64, epsilon: f64, discrete_slope: Option<f64>) -> f64 {
    let floor = (0.5 * epsilon).max(discrete_slope.unwrap_or(0.0));
    (2.0 * gamma / floor).sqrt()
}

/// Worst-case interior bound used when the validity window fails or when the
/// shock may have interacted with a boundary shock.
pub fn delta_inner_worst(
    delta_inner: f64,
    amax: f64,
    m_hat: f64,
    t_horizon: f64,
    max_upsilon: f64,
    gamma: f64,
) -> f64 {
    delta_inner + (amax * m_hat * t_horizon + 1.0) * max_upsilon + (amax * t_horizon + 1.0) * gamma.sqrt()
}

/// Boundary-shock carry term: the worst case over the run, amplified by the
/// global growth weight.
pub fn boundary_d_tilde(zeta_from_origin: f64, worst_case: f64) -> f64 {
    zeta_from_origin * worst_case
}
