//! Flux/entropy algebra for the scalar law: Rankine-Hugoniot speeds, relative
//! quantities, the entropy-dissipation bound, and all derived constants used
//! by the error estimator.

mod registry;

pub use registry::{ModelParams, ModelRegistry};

use crate::error::{Error, Result};
use std::sync::Arc;

/// Strictly convex flux + strictly convex entropy pair for `u_t + A(u)_x = 0`.
///
/// Implementations must provide `A`, `eta` and their first two derivatives,
/// plus the entropy flux `q` with `q' = eta' * A'` (checked by sampling when
/// [`ModelConstants`] is built).
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;
    /// Flux `A(u)`.
    fn flux(&self, u: f64) -> f64;
    /// `A'(u)`.
    fn dflux(&self, u: f64) -> f64;
    /// `A''(u)`.
    fn ddflux(&self, u: f64) -> f64;
    /// Entropy `eta(u)`.
    fn eta(&self, u: f64) -> f64;
    /// `eta'(u)`.
    fn deta(&self, u: f64) -> f64;
    /// `eta''(u)`.
    fn ddeta(&self, u: f64) -> f64;
    /// Entropy flux `q(u)` with `q' = eta' A'`.
    fn entropy_flux(&self, u: f64) -> f64;
}

pub type SharedModel = Arc<dyn Model>;

/// Burgers flux `A(u) = u^2/2` with entropy `eta(u) = u^2/2`, `q(u) = u^3/3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Burgers;

impl Model for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }
    fn flux(&self, u: f64) -> f64 {
        0.5 * u * u
    }
    fn dflux(&self, u: f64) -> f64 {
        u
    }
    fn ddflux(&self, _u: f64) -> f64 {
        1.0
    }
    fn eta(&self, u: f64) -> f64 {
        0.5 * u * u
    }
    fn deta(&self, u: f64) -> f64 {
        u
    }
    fn ddeta(&self, _u: f64) -> f64 {
        1.0
    }
    fn entropy_flux(&self, u: f64) -> f64 {
        u * u * u / 3.0
    }
}

/// Polynomial flux and entropy given by coefficient lists (ascending powers).
/// The entropy flux is integrated in closed form from `q' = eta' A'`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    flux: Vec<f64>,
    entropy: Vec<f64>,
    qflux: Vec<f64>,
}

impl Polynomial {
    pub fn new(flux: Vec<f64>, entropy: Vec<f64>) -> Result<Self> {
        if flux.len() < 3 {
            return Err(Error::Model(
                "polynomial flux needs degree >= 2 for strict convexity".into(),
            ));
        }
        if entropy.len() < 3 {
            return Err(Error::Model(
                "polynomial entropy needs degree >= 2 for strict convexity".into(),
            ));
        }
        // q' = eta' * A' is a polynomial; integrate term by term with q(0)=0.
        let deta = derive(&entropy);
        let dflux = derive(&flux);
        let mut prod = vec![0.0; deta.len() + dflux.len() - 1];
        for (i, a) in deta.iter().enumerate() {
            for (j, b) in dflux.iter().enumerate() {
                prod[i + j] += a * b;
            }
        }
        let mut qflux = vec![0.0; prod.len() + 1];
        for (k, c) in prod.iter().enumerate() {
            qflux[k + 1] = c / (k as f64 + 1.0);
        }
        Ok(Polynomial {
            flux,
            entropy,
            qflux,
        })
    }
}

fn derive(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * k as f64)
        .collect()
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

fn horner_d(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * u + c * k as f64;
    }
    acc
}

fn horner_dd(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(2).rev() {
        acc = acc * u + c * (k * (k - 1)) as f64;
    }
    acc
}

impl Model for Polynomial {
    fn name(&self) -> &'static str {
        "poly"
    }
    fn flux(&self, u: f64) -> f64 {
        horner(&self.flux, u)
    }
    fn dflux(&self, u: f64) -> f64 {
        horner_d(&self.flux, u)
    }
    fn ddflux(&self, u: f64) -> f64 {
        horner_dd(&self.flux, u)
    }
    fn eta(&self, u: f64) -> f64 {
        horner(&self.entropy, u)
    }
    fn deta(&self, u: f64) -> f64 {
        horner_d(&self.entropy, u)
    }
    fn ddeta(&self, u: f64) -> f64 {
        horner_dd(&self.entropy, u)
    }
    fn entropy_flux(&self, u: f64) -> f64 {
        horner(&self.qflux, u)
    }
}

/// Rankine-Hugoniot speed of the jump `(v, w)`; the coincident-state branch
/// removes the singularity.  Nearly coincident states take the midpoint
/// derivative, which is second-order accurate and avoids the catastrophic
/// cancellation of the difference quotient.
pub fn rh_speed(m: &dyn Model, v: f64, w: f64) -> f64 {
    if (v - w).abs() <= 1e-9 * (1.0 + v.abs() + w.abs()) {
        m.dflux(0.5 * (v + w))
    } else {
        (m.flux(v) - m.flux(w)) / (v - w)
    }
}

/// Relative entropy `eta(a|b) = eta(a) - eta(b) - eta'(b)(a - b)`.
pub fn relative_entropy(m: &dyn Model, a: f64, b: f64) -> f64 {
    m.eta(a) - m.eta(b) - m.deta(b) * (a - b)
}

/// Relative flux `A(a|b) = A(a) - A(b) - A'(b)(a - b)`.
pub fn relative_flux(m: &dyn Model, a: f64, b: f64) -> f64 {
    m.flux(a) - m.flux(b) - m.dflux(b) * (a - b)
}

/// Relative entropy flux `q(a;b) = q(a) - q(b) - eta'(b)(A(a) - A(b))`.
pub fn relative_entropy_flux(m: &dyn Model, a: f64, b: f64) -> f64 {
    m.entropy_flux(a) - m.entropy_flux(b) - m.deta(b) * (m.flux(a) - m.flux(b))
}

/// State band `[lo, hi]` over which derived constants are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Band {
        Band { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Widen by a relative margin on each side.
    pub fn widened(&self, rel: f64) -> Band {
        let pad = rel * self.width().max(1e-12);
        Band::new(self.lo - pad, self.hi + pad)
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u <= self.hi
    }
}

/// Derived constants over a state band, obtained by dense sampling:
/// wave-speed bound, information speed, convexity extrema, the relative
/// entropy comparability constants and the shift-dissipation constant.
#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    pub band: Band,
    /// `sup |A'|` over the band (wave-speed bound).
    pub sup_da: f64,
    /// Information speed `s`: `|q(a;b)| <= s * eta(a|b)` on the band,
    /// with a 5% safety factor on the sampled supremum.
    pub info_speed: f64,
    /// `sup A''`.
    pub amax: f64,
    /// `inf A''`.
    pub amin: f64,
    /// `inf eta''`.
    pub hmin: f64,
    /// `sup eta''`.
    pub hmax: f64,
    /// `c*`: lower comparability constant, `c*(a-b)^2 <= eta(a|b)`.
    pub cstar: f64,
    /// `c**`: upper comparability constant, `eta(a|b) <= c**(a-b)^2`.
    pub cstarstar: f64,
    /// Shift-dissipation constant `c = inf A'' * inf eta'' / (24 sup A'')`.
    pub diss_c: f64,
    /// Sonic state where `A'` changes sign, clamped to the band (used by the
    /// Engquist-Osher split); a large negative sentinel when `A' > 0` on the
    /// whole band.
    pub sonic: f64,
}

const SAMPLES: usize = 2049;

impl ModelConstants {
    /// Sample all derived constants over `band`.  Rejects models whose flux
    /// or entropy fails strict convexity on the band, or whose entropy flux
    /// fails the compatibility `q' = eta' A'` beyond quadrature tolerance.
    pub fn sample(m: &dyn Model, band: Band) -> Result<ModelConstants> {
        if !(band.hi > band.lo) || !band.lo.is_finite() || !band.hi.is_finite() {
            return Err(Error::Model(format!(
                "invalid state band [{}, {}]",
                band.lo, band.hi
            )));
        }
        let step = band.width() / (SAMPLES - 1) as f64;
        let mut sup_da: f64 = 0.0;
        let mut amax = f64::NEG_INFINITY;
        let mut amin = f64::INFINITY;
        let mut hmax = f64::NEG_INFINITY;
        let mut hmin = f64::INFINITY;
        let fd = 1e-6 * band.width().max(1.0);
        for k in 0..SAMPLES {
            let u = band.lo + step * k as f64;
            let da = m.dflux(u);
            let dda = m.ddflux(u);
            let ddh = m.ddeta(u);
            if !(da.is_finite() && dda.is_finite() && ddh.is_finite()) {
                return Err(Error::Model(format!("non-finite derivative at u={u}")));
            }
            if dda <= 0.0 {
                return Err(Error::Model(format!(
                    "flux not strictly convex on band: A''({u}) = {dda}"
                )));
            }
            if ddh <= 0.0 {
                return Err(Error::Model(format!(
                    "entropy not strictly convex on band: eta''({u}) = {ddh}"
                )));
            }
            // Compatibility q' = eta' A', via a centered difference of q.
            let qd = (m.entropy_flux(u + fd) - m.entropy_flux(u - fd)) / (2.0 * fd);
            let want = m.deta(u) * m.dflux(u);
            let scale = 1.0 + qd.abs().max(want.abs());
            if (qd - want).abs() > 1e-5 * scale {
                return Err(Error::Model(format!(
                    "entropy flux incompatible with q' = eta' A' at u={u}: {qd} vs {want}"
                )));
            }
            sup_da = sup_da.max(da.abs());
            amax = amax.max(dda);
            amin = amin.min(dda);
            hmax = hmax.max(ddh);
            hmin = hmin.min(ddh);
        }

        // c* and c**: extremize eta(a|b)/(a-b)^2 over a coarser pair grid;
        // the diagonal limit is eta''(b)/2, included explicitly.
        let pair_n = 101usize;
        let pstep = band.width() / (pair_n - 1) as f64;
        let mut ratio_min = f64::INFINITY;
        let mut ratio_max = f64::NEG_INFINITY;
        let mut speed_ratio: f64 = 0.0;
        for i in 0..pair_n {
            let a = band.lo + pstep * i as f64;
            // Diagonal limits: eta''/2 for the comparability ratio, |A'| for
            // the information speed.
            ratio_min = ratio_min.min(0.5 * m.ddeta(a));
            ratio_max = ratio_max.max(0.5 * m.ddeta(a));
            speed_ratio = speed_ratio.max(m.dflux(a).abs());
            for j in 0..pair_n {
                if i == j {
                    continue;
                }
                let b = band.lo + pstep * j as f64;
                let re = relative_entropy(m, a, b);
                let d2 = (a - b) * (a - b);
                ratio_min = ratio_min.min(re / d2);
                ratio_max = ratio_max.max(re / d2);
                speed_ratio = speed_ratio.max(relative_entropy_flux(m, a, b).abs() / re);
            }
        }

        // Sonic state for the Engquist-Osher split: A' is increasing, so a
        // single bisection finds the sign change (if any) on the band.
        let sonic = if m.dflux(band.lo) >= 0.0 {
            -1e306
        } else if m.dflux(band.hi) <= 0.0 {
            1e306
        } else {
            let (mut lo, mut hi) = (band.lo, band.hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if m.dflux(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };

        Ok(ModelConstants {
            band,
            sup_da,
            info_speed: 1.05 * speed_ratio,
            amax,
            amin,
            hmax,
            hmin,
            cstar: 0.99 * ratio_min,
            cstarstar: 1.01 * ratio_max,
            diss_c: amin * hmin / (24.0 * amax),
            sonic,
        })
    }
}

/// Right-hand side of the entropy-dissipation inequality for a shifted shock:
/// `-(1/12) inf A'' inf eta'' * s_floor * ((u+ - ub+)^2 + (u- - ub-)^2)`.
///
/// The directly computed left side ([`dissipation_lhs`]) is bounded above by
/// this value whenever `u_minus >= u_plus` and `ub_minus - ub_plus >= s_floor > 0`.
pub fn dissipation_bound(
    consts: &ModelConstants,
    u_plus: f64,
    u_minus: f64,
    ub_plus: f64,
    ub_minus: f64,
    shock_floor: f64,
) -> Result<f64> {
    if !(shock_floor > 0.0) {
        return Err(Error::Model(format!(
            "shock size floor must be positive, got {shock_floor}"
        )));
    }
    if u_minus < u_plus {
        return Err(Error::Model(format!(
            "state ordering violated: u- = {u_minus} < u+ = {u_plus}"
        )));
    }
    if ub_minus - ub_plus < shock_floor {
        return Err(Error::Model(format!(
            "reference jump {} below floor {shock_floor}",
            ub_minus - ub_plus
        )));
    }
    let d = (u_plus - ub_plus).powi(2) + (u_minus - ub_minus).powi(2);
    Ok(-consts.amin * consts.hmin * shock_floor * d / 12.0)
}

/// Left side of the dissipation inequality, computed directly:
/// `q(u+;ub+) - q(u-;ub-) - sigma(u+,u-) (eta(u+|ub+) - eta(u-|ub-))`.
pub fn dissipation_lhs(
    m: &dyn Model,
    u_plus: f64,
    u_minus: f64,
    ub_plus: f64,
    ub_minus: f64,
) -> f64 {
    relative_entropy_flux(m, u_plus, ub_plus) - relative_entropy_flux(m, u_minus, ub_minus)
        - rh_speed(m, u_plus, u_minus)
            * (relative_entropy(m, u_plus, ub_plus) - relative_entropy(m, u_minus, ub_minus))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers() -> Burgers {
        Burgers
    }

    #[test]
    fn rh_speed_examples() {
        let m = burgers();
        assert_eq!(rh_speed(&m, 2.0, 0.0), 1.0);
        assert_eq!(rh_speed(&m, 3.0, 3.0), 3.0);
        assert!((rh_speed(&m, 0.5, -0.5)).abs() < 1e-15);
        // Quadratic flux: sigma(a,b) = (a+b)/2, symmetric.
        for (a, b) in [(1.3, -0.7), (2.0, 0.25), (-1.0, -2.5)] {
            assert!((rh_speed(&m, a, b) - 0.5 * (a + b)).abs() < 1e-14);
            assert!((rh_speed(&m, a, b) - rh_speed(&m, b, a)).abs() < 1e-14);
        }
    }

    #[test]
    fn rh_speed_monotone_in_each_argument() {
        let m = burgers();
        let w = 0.3;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let v = -2.0 + 4.0 * k as f64 / 99.0;
            let s = rh_speed(&m, v, w);
            assert!(s > prev, "sigma not increasing at v={v}");
            prev = s;
        }
    }

    #[test]
    fn relative_quantities_examples() {
        let m = burgers();
        assert!((relative_entropy(&m, 3.0, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(relative_entropy(&m, 0.7, 0.7), 0.0);
        assert!((relative_flux(&m, 2.0, 0.0) - 2.0).abs() < 1e-15);
        assert_eq!(relative_flux(&m, -1.1, -1.1), 0.0);
        assert_eq!(relative_entropy_flux(&m, 0.4, 0.4), 0.0);
        assert!((relative_entropy_flux(&m, 1.0, 0.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relative_quantities_band_properties() {
        let m = burgers();
        let consts = ModelConstants::sample(&m, Band::new(-2.0, 2.0)).unwrap();
        // Deterministic pair sweep standing in for 1e4 random pairs.
        let n = 101;
        for i in 0..n {
            for j in 0..n {
                let a = -2.0 + 4.0 * i as f64 / (n - 1) as f64;
                let b = -2.0 + 4.0 * j as f64 / (n - 1) as f64;
                let re = relative_entropy(&m, a, b);
                let d2 = (a - b) * (a - b);
                assert!(re >= consts.cstar * d2 - 1e-12);
                assert!(re <= consts.cstarstar * d2 + 1e-12);
                assert!(relative_flux(&m, a, b) >= -1e-15);
                assert!(relative_flux(&m, a, b) <= 0.5 * consts.amax * d2 + 1e-12);
                assert!(
                    relative_entropy_flux(&m, a, b).abs() <= consts.info_speed * re + 1e-12,
                    "info speed bound fails at ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn burgers_constants() {
        let consts = ModelConstants::sample(&burgers(), Band::new(-1.0, 3.0)).unwrap();
        assert!((consts.amax - 1.0).abs() < 1e-14);
        assert!((consts.amin - 1.0).abs() < 1e-14);
        assert!((consts.diss_c - 1.0 / 24.0).abs() < 1e-14);
        assert!((consts.sup_da - 3.0).abs() < 1e-12);
        // s = 1.05 * sup |2a+b|/3 = 1.05 * 3 on [-1,3] (attained at a=b=3).
        assert!((consts.info_speed - 3.15).abs() < 0.02);
        assert!(consts.cstar <= 0.5 && consts.cstarstar >= 0.5);
    }

    #[test]
    fn dissipation_bound_examples() {
        let m = burgers();
        let consts = ModelConstants::sample(&m, Band::new(-4.0, 4.0)).unwrap();
        // Coincident states: bound 0, left side <= 0.
        let b = dissipation_bound(&consts, 1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(b, 0.0);
        assert!(dissipation_lhs(&m, 1.0, 2.0, 1.0, 2.0) <= 1e-14);
        // d+ = d- = 1, floor 1: bound -(1/12)*2 = -1/6.
        let b = dissipation_bound(&consts, 1.0, 2.0, 0.0, 1.0, 1.0).unwrap();
        assert!((b + 1.0 / 6.0).abs() < 1e-12);
        // Rejections.
        assert!(dissipation_bound(&consts, 1.0, 2.0, 0.0, 1.0, 0.0).is_err());
        assert!(dissipation_bound(&consts, 2.0, 1.0, 0.0, 1.0, 0.5).is_err());
        assert!(dissipation_bound(&consts, 1.0, 2.0, 1.0, 1.2, 0.5).is_err());
    }

    /// Exhaustive grid check of the dissipation inequality over admissible
    /// quadruples on the band.
    #[test]
    fn dissipation_inequality_grid() {
        let m = burgers();
        let consts = ModelConstants::sample(&m, Band::new(-1.0, 1.0)).unwrap();
        let n = 20;
        let grid: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
        let mut checked = 0u64;
        for &u_plus in &grid {
            for &u_minus in &grid {
                if u_minus < u_plus {
                    continue;
                }
                for &ub_plus in &grid {
                    for &ub_minus in &grid {
                        let gap = ub_minus - ub_plus;
                        if gap <= 1e-9 {
                            continue;
                        }
                        let rhs =
                            dissipation_bound(&consts, u_plus, u_minus, ub_plus, ub_minus, gap)
                                .unwrap();
                        let lhs = dissipation_lhs(&m, u_plus, u_minus, ub_plus, ub_minus);
                        assert!(
                            lhs <= rhs + 1e-12,
                            "dissipation inequality fails: lhs={lhs} rhs={rhs} \
                             ({u_plus},{u_minus},{ub_plus},{ub_minus})"
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn polynomial_matches_burgers() {
        let p = Polynomial::new(vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.5]).unwrap();
        let m = burgers();
        for k in 0..50 {
            let u = -2.0 + 4.0 * k as f64 / 49.0;
            assert!((p.flux(u) - m.flux(u)).abs() < 1e-14);
            assert!((p.entropy_flux(u) - m.entropy_flux(u)).abs() < 1e-14);
            assert!((p.ddflux(u) - 1.0).abs() < 1e-14);
        }
        ModelConstants::sample(&p, Band::new(-2.0, 2.0)).unwrap();
    }

    #[test]
    fn non_convex_flux_rejected() {
        let p = Polynomial::new(vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0, 0.5]).unwrap();
        // A = u + u^3 has A'' = 6u which changes sign on [-1, 1].
        assert!(ModelConstants::sample(&p, Band::new(-1.0, 1.0)).is_err());
    }
}
