//! Assembled error bounds and the run's event log.

use serde::Serialize;

/// Squared and root L2 bound: `C (init + R) e^{Ct}`.
pub fn l2_bound(c: f64, t: f64, init_l2_sq: f64, residual_sq: f64) -> (f64, f64) {
    let sq = c * (init_l2_sq + residual_sq) * (c * t).exp();
    (sq, sq.sqrt())
}

/// Merge overlapping intervals in place (no double counting in the
/// uncertainty-band integral).
pub fn merge_intervals(intervals: &mut Vec<(f64, f64)>) {
    intervals.retain(|iv| iv.1 > iv.0);
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for &(lo, hi) in intervals.iter() {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    *intervals = out;
}

/// One output-time row of the error report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub t: f64,
    /// Windowed squared-residual integral.
    pub residual_sq: f64,
    pub l2_bound_sq: f64,
    pub l2_bound: f64,
    /// Uncertainty-band integral of the revealed-value spread.
    pub band_integral: f64,
    /// Front-tracking budgets summed over regions.
    pub ft_l1_budget: f64,
    /// Full L1 bound on the glued-vs-exact difference.
    pub l1_bound: f64,
    /// Per-curve position uncertainties (curve id, class, delta).
    pub deltas: Vec<(usize, String, f64)>,
    pub max_delta: f64,
    pub upsilon_max: f64,
    pub gamma: f64,
    pub delta_inner: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    Merge {
        curves: Vec<usize>,
    },
    Certificate {
        curves: Vec<usize>,
        merge_t: f64,
        latency: f64,
    },
    RdPairCertificate {
        curves: Vec<usize>,
        touch_t: f64,
        latency: f64,
    },
    LevelSetCheck {
        pass: bool,
        margin: f64,
    },
    FloorCollapse {
        curve: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}
