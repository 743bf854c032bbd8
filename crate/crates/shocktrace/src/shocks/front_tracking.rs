//! Event-driven scalar front tracking for staircase data: fronts move at
//! exact Rankine-Hugoniot speeds between collisions, collisions merge
//! plateaus in time order.

use crate::error::{Error, Result};
use crate::model::{rh_speed, Model};

/// One recorded collision.
#[derive(Debug, Clone)]
pub struct FtEvent {
    pub t: f64,
    pub pos: f64,
    /// Surviving front id (the left participant).
    pub survivor: usize,
    pub absorbed: Vec<usize>,
}

/// Piecewise-constant decreasing profile with tracked fronts.
#[derive(Debug, Clone)]
pub struct FrontTrackState {
    /// Plateau values `q_0 > q_1 > ... > q_m`.
    plateaus: Vec<f64>,
    /// Front positions `z_1 < ... < z_m`.
    positions: Vec<f64>,
    /// Stable front ids (survive merges; the left id wins).
    ids: Vec<usize>,
    /// Injected per-front speed errors, indexed by original id
    /// (test hook for the approximate front-tracking estimate).
    speed_bump: Vec<f64>,
    pub t: f64,
    pub events: Vec<FtEvent>,
    /// Per original id: polyline of (t, x) samples at construction, every
    /// event involving the front, and the final query time.
    trails: Vec<Vec<(f64, f64)>>,
}

impl FrontTrackState {
    pub fn new(plateaus: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if plateaus.len() != positions.len() + 1 || positions.is_empty() {
            return Err(Error::Shocks(format!(
                "need m+1 plateaus for m >= 1 fronts, got {} and {}",
                plateaus.len(),
                positions.len()
            )));
        }
        if plateaus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Shocks("plateaus must be strictly decreasing".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shocks("front positions must be increasing".into()));
        }
        let n = positions.len();
        let trails = positions.iter().map(|&z| vec![(0.0, z)]).collect();
        Ok(FrontTrackState {
            plateaus,
            positions,
            ids: (0..n).collect(),
            speed_bump: vec![0.0; n],
            t: 0.0,
            events: Vec::new(),
            trails,
        })
    }

    /// Restriction keeping fronts `p..=q` (0-based original indices) with the
    /// flanking plateaus continued as constants.
    pub fn clipped(&self, p: usize, q: usize) -> Result<Self> {
        if self.t != 0.0 {
            return Err(Error::Shocks("clip the initial state, not an evolved one".into()));
        }
        if p > q || q >= self.positions.len() {
            return Err(Error::Shocks(format!("bad clip range {p}..={q}")));
        }
        FrontTrackState::new(
            self.plateaus[p..=q + 1].to_vec(),
            self.positions[p..=q].to_vec(),
        )
    }

    /// Inject a speed error on the front with original id `id`.
    pub fn set_speed_bump(&mut self, id: usize, bump: f64) {
        self.speed_bump[id] = bump;
    }

    pub fn n_fronts(&self) -> usize {
        self.positions.len()
    }

    pub fn plateaus(&self) -> &[f64] {
        &self.plateaus
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn front_ids(&self) -> &[usize] {
        &self.ids
    }

    /// Jump size across front `k` (current indexing).
    pub fn jump(&self, k: usize) -> f64 {
        self.plateaus[k] - self.plateaus[k + 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.positions.partition_point(|&z| z <= x);
        self.plateaus[k]
    }

    fn speeds(&self, m: &dyn Model) -> Vec<f64> {
        (0..self.positions.len())
            .map(|k| rh_speed(m, self.plateaus[k], self.plateaus[k + 1]) + self.speed_bump[self.ids[k]])
            .collect()
    }

    /// Advance to `t_target`, processing collisions in time order
    /// (left-to-right on ties).
    pub fn advance_to(&mut self, m: &dyn Model, t_target: f64) -> Result<()> {
        while self.t < t_target - 1e-15 {
            let speeds = self.speeds(m);
            // Earliest adjacent collision.
            let mut hit: Option<(f64, usize)> = None;
            for k in 0..self.positions.len().saturating_sub(1) {
                let closing = speeds[k] - speeds[k + 1];
                if closing <= 1e-14 {
                    continue;
                }
                let tau = (self.positions[k + 1] - self.positions[k]) / closing;
                let t_hit = self.t + tau.max(0.0);
                if hit.map_or(true, |(best, _)| t_hit < best - 1e-15) {
                    hit = Some((t_hit, k));
                }
            }
            match hit {
                Some((t_hit, k)) if t_hit <= t_target => {
                    let dt = t_hit - self.t;
                    for (z, s) in self.positions.iter_mut().zip(&speeds) {
                        *z += s * dt;
                    }
                    self.t = t_hit;
                    // Merge fronts k and k+1: drop the plateau between them.
                    let survivor = self.ids[k];
                    let absorbed = self.ids[k + 1];
                    let pos = 0.5 * (self.positions[k] + self.positions[k + 1]);
                    self.positions[k] = pos;
                    self.positions.remove(k + 1);
                    self.plateaus.remove(k + 1);
                    self.ids.remove(k + 1);
                    self.trails[survivor].push((self.t, pos));
                    self.trails[absorbed].push((self.t, pos));
                    self.events.push(FtEvent {
                        t: self.t,
                        pos,
                        survivor,
                        absorbed: vec![absorbed],
                    });
                    if self.positions.is_empty() {
                        break;
                    }
                }
                _ => {
                    let dt = t_target - self.t;
                    for (z, s) in self.positions.iter_mut().zip(&speeds) {
                        *z += s * dt;
                    }
                    self.t = t_target;
                }
            }
        }
        self.t = self.t.max(t_target);
        for (k, &id) in self.ids.iter().enumerate() {
            self.trails[id].push((self.t, self.positions[k]));
        }
        Ok(())
    }

    /// Polyline trajectory of the front with original id `id` (merged fronts
    /// continue along their survivor).
    pub fn trajectory(&self, id: usize) -> &[(f64, f64)] {
        &self.trails[id]
    }

    /// `integral of u dx` over `[a, b]` (must contain all fronts).
    pub fn mass_on(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        let mut x = a;
        for (k, &z) in self.positions.iter().enumerate() {
            acc += self.plateaus[k] * (z - x);
            x = z;
        }
        acc + self.plateaus[self.plateaus.len() - 1] * (b - x)
    }
}

/// Evolve an initial staircase to time `t_end`.
pub fn ft_evolve(initial: FrontTrackState, m: &dyn Model, t_end: f64) -> Result<FrontTrackState> {
    let mut state = initial;
    state.advance_to(m, t_end)?;
    Ok(state)
}

/// Discrete slope of a staircase: the infimum of difference quotients
/// `(u(x) - u(y))/(y - x)` over `y > x + delta` with both points between the
/// first and last fronts.  `None` when fewer than two fronts survive (the
/// estimator then falls back to its threshold floor).
pub fn discrete_slope(state: &FrontTrackState, delta: f64) -> Option<f64> {
    let z = &state.positions;
    let q = &state.plateaus;
    let m = z.len();
    if m < 2 {
        return None;
    }
    let mut best = f64::INFINITY;
    // Interior plateau i spans (z[i-1], z[i]).  For a fixed plateau pair
    // (i, j) the quotient is smallest at the widest admissible span:
    // x at the left edge of plateau i, y at the right edge of plateau j.
    for i in 1..m {
        for j in i..m {
            let span = z[j] - z[i - 1];
            if span <= delta * (1.0 + 1e-12) {
                continue;
            }
            best = best.min((q[i] - q[j]) / span);
        }
    }
    if best.is_finite() {
        Some(best.max(0.0))
    } else {
        None
    }
}

/// Exact L1 distance of two staircases with matching far fields.
pub fn l1_distance(a: &FrontTrackState, b: &FrontTrackState) -> f64 {
    let mut cuts: Vec<f64> = a
        .positions
        .iter()
        .chain(b.positions.iter())
        .copied()
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        acc += (a.eval(mid) - b.eval(mid)).abs() * (w[1] - w[0]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Burgers;

    /// Plateaus 3/2/1 with fronts at 0 and 1: speeds 2.5 and 1.5, collision
    /// at t = 1, x = 2.5; the merged front continues at sigma(3,1) = 2.
    #[test]
    fn two_front_kinematics() {
        let m = Burgers;
        let st = FrontTrackState::new(vec![3.0, 2.0, 1.0], vec![0.0, 1.0]).unwrap();
        let st = ft_evolve(st, &m, 1.5).unwrap();
        assert_eq!(st.n_fronts(), 1);
        assert_eq!(st.events.len(), 1);
        let e = &st.events[0];
        assert!((e.t - 1.0).abs() < 1e-12);
        assert!((e.pos - 2.5).abs() < 1e-12);
        assert!((st.positions()[0] - (2.5 + 2.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn single_front_straight_line() {
        let m = Burgers;
        let st = FrontTrackState::new(vec![2.0, 0.0], vec![0.3]).unwrap();
        let st = ft_evolve(st, &m, 2.0).unwrap();
        assert!((st.positions()[0] - (0.3 + 1.0 * 2.0)).abs() < 1e-14);
        let traj = st.trajectory(0);
        assert_eq!(traj.first().unwrap().1, 0.3);
    }

    /// Staircase from the rapidly decreasing fixture: total variation never
    /// increases and the plateau set shrinks only by merges.
    #[test]
    fn staircase_event_audit() {
        let m = Burgers;
        let n = 12;
        let plateaus: Vec<f64> = (0..=n).map(|k| 2.5 - k as f64 / n as f64).collect();
        let positions: Vec<f64> = (0..n).map(|k| 0.2 + 0.2 * k as f64 / n as f64).collect();
        let tv0: f64 = plateaus.windows(2).map(|w| w[0] - w[1]).sum();
        let st = FrontTrackState::new(plateaus, positions).unwrap();
        let st = ft_evolve(st, &m, 0.22).unwrap();
        let tv: f64 = st.plateaus().windows(2).map(|w| w[0] - w[1]).sum();
        assert!(tv <= tv0 + 1e-12);
        assert_eq!(st.n_fronts() + st.events.len(), n);
        for w in st.positions().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    /// Mass plus boundary-flux bookkeeping is conserved exactly.
    #[test]
    fn conservation_with_flux_bookkeeping() {
        let m = Burgers;
        let st0 = FrontTrackState::new(vec![2.0, 1.4, 0.9, 0.1], vec![0.0, 0.4, 0.9]).unwrap();
        let window = (-1.0, 8.0);
        let mass0 = st0.mass_on(window.0, window.1);
        let flux_drift = m.flux(0.1) - m.flux(2.0);
        for t in [0.3, 0.9, 2.0] {
            let st = ft_evolve(st0.clone(), &m, t).unwrap();
            let mass = st.mass_on(window.0, window.1);
            assert!(
                (mass - (mass0 - flux_drift * t)).abs() < 1e-12,
                "mass drift at t={t}"
            );
        }
    }

    /// Uniform staircase with steps delta wide and k*delta tall: adjacent
    /// pairs give exactly k/2 and dominate the infimum.
    #[test]
    fn discrete_slope_uniform_staircase() {
        let delta = 0.1;
        let k = 5.0;
        let n = 8;
        let plateaus: Vec<f64> = (0..=n).map(|j| -(j as f64) * k * delta).collect();
        let positions: Vec<f64> = (1..=n).map(|j| j as f64 * delta).collect();
        let st = FrontTrackState::new(plateaus, positions).unwrap();
        let s = discrete_slope(&st, delta).unwrap();
        assert!((s - k / 2.0).abs() < 1e-12, "got {s}");
    }

    #[test]
    fn discrete_slope_sentinel_and_positivity() {
        let m = Burgers;
        let st = FrontTrackState::new(vec![3.0, 2.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(discrete_slope(&st, 0.3).unwrap() >= 0.0);
        let merged = ft_evolve(st, &m, 1.5).unwrap();
        assert_eq!(merged.n_fronts(), 1);
        assert!(discrete_slope(&merged, 0.3).is_none());
    }

    #[test]
    fn clipping_keeps_flank_plateaus() {
        let st = FrontTrackState::new(vec![4.0, 3.0, 2.0, 1.0, 0.0], vec![0.0, 0.1, 0.2, 0.3])
            .unwrap();
        let clip = st.clipped(1, 2).unwrap();
        assert_eq!(clip.plateaus(), &[3.0, 2.0, 1.0]);
        assert_eq!(clip.positions(), &[0.1, 0.2]);
    }

    /// Injected velocity errors move fronts off the exact trajectories; the
    /// L1 distance growth rate obeys the pathwise jump*|error| estimate.
    #[test]
    fn speed_bump_hook() {
        let m = Burgers;
        let mut bumped =
            FrontTrackState::new(vec![3.0, 2.0, 1.0], vec![0.0, 1.0]).unwrap();
        bumped.set_speed_bump(0, 0.1);
        let exact = FrontTrackState::new(vec![3.0, 2.0, 1.0], vec![0.0, 1.0]).unwrap();
        let t = 0.5;
        let b = ft_evolve(bumped, &m, t).unwrap();
        let e = ft_evolve(exact, &m, t).unwrap();
        let d = l1_distance(&b, &e);
        // |jump| * |bump| * t = 1 * 0.1 * 0.5.
        assert!((d - 0.05).abs() < 1e-12, "got {d}");
    }
}
