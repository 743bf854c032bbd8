//! Shock curves of the glued solution: Rankine-Hugoniot ODEs advanced with
//! classic RK4 over the reconstruction slabs, merge-on-contact with k-way
//! cascades, and the glued evaluator.  The scalar front-tracking engine for
//! staircase regions lives in [`front_tracking`].

pub mod front_tracking;

pub use front_tracking::{
    discrete_slope, ft_evolve, l1_distance, FrontTrackState, FtEvent,
};

use crate::error::{Error, Result};
use crate::model::{rh_speed, Model};

/// How a shock curve is treated by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShockClass {
    /// Size independent of the staircase parameter.
    Large,
    /// Left- or right-most shock of a rapidly decreasing region.
    Boundary,
    /// Interior staircase shock of a rapidly decreasing region.
    FrontTracking,
}

/// Read access to the per-piece fields of the glued solution on the current
/// time slab.  Plateau pieces return their constant; simulated pieces return
/// the bilinear reconstruction.
pub trait PieceFields {
    fn n_pieces(&self) -> usize;
    fn value(&self, piece: usize, x: f64, t: f64) -> f64;
}

/// One curve of discontinuity.
#[derive(Debug, Clone)]
pub struct ShockCurve {
    pub id: usize,
    pub class: ShockClass,
    pub pos: f64,
    pub left_piece: usize,
    pub right_piece: usize,
    /// Id of the curve this one has been glued into (leader id; self while
    /// unmerged).  Absorbed curves mirror the leader's trajectory.
    pub leader: usize,
    pub merged_at: Option<f64>,
    /// Position at every step boundary.
    pub history: Vec<f64>,
    /// Per-step speed-defect sample |hdot - sigma| at the slab midpoint.
    pub defect: Vec<f64>,
}

impl ShockCurve {
    pub fn alive(&self) -> bool {
        self.leader == self.id
    }
}

/// A merge recorded during one slab.
#[derive(Debug, Clone)]
pub struct MergeEvent {
    pub t: f64,
    pub pos: f64,
    pub leader: usize,
    /// Participants in spatial order with their pre-merge flank pieces.
    pub members: Vec<(usize, usize, usize)>,
    pub post_left: usize,
    pub post_right: usize,
}

/// The ordered family of shock curves of one glued solution.
#[derive(Debug, Clone)]
pub struct CurveSet {
    pub curves: Vec<ShockCurve>,
}

impl CurveSet {
    /// Curves at the breakpoints of a discretized profile: curve `i`
    /// separates pieces `i` and `i+1`.
    pub fn new(breakpoints: &[f64], classes: Vec<ShockClass>) -> Result<CurveSet> {
        if breakpoints.len() != classes.len() {
            return Err(Error::Shocks("one class per breakpoint required".into()));
        }
        let curves = breakpoints
            .iter()
            .zip(classes)
            .enumerate()
            .map(|(i, (&x, class))| ShockCurve {
                id: i,
                class,
                pos: x,
                left_piece: i,
                right_piece: i + 1,
                leader: i,
                merged_at: None,
                history: vec![x],
                defect: Vec::new(),
            })
            .collect();
        Ok(CurveSet { curves })
    }

    pub fn alive_ids(&self) -> Vec<usize> {
        self.curves.iter().filter(|c| c.alive()).map(|c| c.id).collect()
    }

    /// Advance every alive curve across `[t0, t1]`, merging on contact.
    /// Returns the merge events of the slab.
    pub fn advance_slab(
        &mut self,
        model: &dyn Model,
        fields: &dyn PieceFields,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<MergeEvent>> {
        let mut events = Vec::new();
        let alive = self.alive_ids();
        // Tentative RK4 advance of all alive curves.
        let mut start = Vec::with_capacity(alive.len());
        for &id in &alive {
            let c = &self.curves[id];
            start.push(c.pos);
            let (new_pos, defect) =
                rk4_step(model, fields, c.left_piece, c.right_piece, c.pos, t0, t1)?;
            let c = &mut self.curves[id];
            c.pos = new_pos;
            c.defect.push(defect);
        }

        // Merge-on-contact: resolve crossings in time order until the alive
        // leaders are strictly ordered again.  Crossing times come from the
        // in-slab linear interpolants (exact for plateau-flanked curves,
        // O(dt^2)-accurate otherwise) and are refined against the bisection
        // tolerance by the interpolation itself.
        let mut pos0: Vec<(usize, f64)> = alive.iter().copied().zip(start).collect();
        loop {
            let leaders: Vec<usize> = pos0
                .iter()
                .map(|&(id, _)| id)
                .filter(|&id| self.curves[id].alive())
                .collect();
            let mut first: Option<(f64, usize, usize)> = None;
            for w in leaders.windows(2) {
                let (a, b) = (w[0], w[1]);
                let pa1 = self.curves[a].pos;
                let pb1 = self.curves[b].pos;
                if pa1 < pb1 - 1e-12 {
                    continue;
                }
                let pa0 = pos0.iter().find(|&&(id, _)| id == a).unwrap().1;
                let pb0 = pos0.iter().find(|&&(id, _)| id == b).unwrap().1;
                let gap0 = pb0 - pa0;
                let close = (pa1 - pb1) + gap0;
                let frac = if close > 0.0 {
                    (gap0 / close).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let t_hit = t0 + frac * (t1 - t0);
                if first.map_or(true, |(best, _, _)| t_hit < best - 1e-15) {
                    first = Some((t_hit, a, b));
                }
            }
            let Some((t_hit, a, b)) = first else { break };
            let pa0 = pos0.iter().find(|&&(id, _)| id == a).unwrap().1;
            let frac = (t_hit - t0) / (t1 - t0).max(1e-300);
            let touch = pa0 + frac * (self.curves[a].pos - pa0);

            // Glue b (and its group) into a.
            let pre_a = (a, self.curves[a].left_piece, self.curves[a].right_piece);
            let pre_b = (b, self.curves[b].left_piece, self.curves[b].right_piece);
            let post_left = self.curves[a].left_piece;
            let post_right = self.curves[b].right_piece;
            for c in &mut self.curves {
                if c.leader == b {
                    c.leader = a;
                    c.merged_at = Some(t_hit);
                }
            }
            let la = &mut self.curves[a];
            la.right_piece = post_right;
            la.pos = touch;
            // Re-advance the merged curve from the contact time.
            let (new_pos, _) =
                rk4_step(model, fields, post_left, post_right, touch, t_hit, t1)?;
            self.curves[a].pos = new_pos;
            for p in pos0.iter_mut() {
                if p.0 == a {
                    p.1 = touch - (self.curves[a].pos - touch) * (t_hit - t0)
                        / (t1 - t_hit).max(1e-300);
                }
            }
            events.push(MergeEvent {
                t: t_hit,
                pos: touch,
                leader: a,
                members: vec![pre_a, pre_b],
                post_left,
                post_right,
            });
        }

        // Consolidate simultaneous pair merges into k-way events.
        events = consolidate(events);

        // Record history; absorbed curves mirror their leader.
        for idx in 0..self.curves.len() {
            let leader = self.leader_of(idx);
            let p = self.curves[leader].pos;
            if !p.is_finite() || p.abs() > 1e9 {
                return Err(Error::Numeric(format!(
                    "shock curve {idx} escaped to {p} at t = {t1}"
                )));
            }
            self.curves[idx].pos = p;
            self.curves[idx].history.push(p);
        }
        // Ordering audit: alive leaders must be nondecreasing.
        let ids = self.alive_ids();
        for w in ids.windows(2) {
            let (pa, pb) = (self.curves[w[0]].pos, self.curves[w[1]].pos);
            if pa > pb + 1e-10 {
                return Err(Error::Numeric(format!(
                    "curve ordering violated at t = {t1}: {pa} > {pb}"
                )));
            }
        }
        Ok(events)
    }

    pub fn leader_of(&self, id: usize) -> usize {
        let mut k = id;
        while self.curves[k].leader != k {
            k = self.curves[k].leader;
        }
        k
    }

    /// Piece revealed at `(x, t)`; queries exactly on a curve return the
    /// right piece.
    pub fn piece_at(&self, x: f64) -> usize {
        let mut piece = None;
        for c in &self.curves {
            if !c.alive() {
                continue;
            }
            if x < c.pos {
                piece = Some(c.left_piece);
                break;
            }
            piece = Some(c.right_piece);
        }
        piece.unwrap_or(0)
    }
}

/// Classic 4-stage Runge-Kutta step on `hdot = sigma(vL(h,.), vR(h,.))`,
/// returning the new position and the midpoint speed-defect sample.
fn rk4_step(
    model: &dyn Model,
    fields: &dyn PieceFields,
    left: usize,
    right: usize,
    pos: f64,
    t0: f64,
    t1: f64,
) -> Result<(f64, f64)> {
    let dt = t1 - t0;
    if dt <= 0.0 {
        return Ok((pos, 0.0));
    }
    let f = |x: f64, t: f64| rh_speed(model, fields.value(left, x, t), fields.value(right, x, t));
    let k1 = f(pos, t0);
    let k2 = f(pos + 0.5 * dt * k1, t0 + 0.5 * dt);
    let k3 = f(pos + 0.5 * dt * k2, t0 + 0.5 * dt);
    let k4 = f(pos + dt * k3, t1);
    let new_pos = pos + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !new_pos.is_finite() {
        return Err(Error::Numeric(format!(
            "shock ODE produced non-finite position near x = {pos}, t = {t0}"
        )));
    }
    let defect = ((new_pos - pos) / dt - f(0.5 * (pos + new_pos), 0.5 * (t0 + t1))).abs();
    Ok((new_pos, defect))
}

fn consolidate(events: Vec<MergeEvent>) -> Vec<MergeEvent> {
    let mut out: Vec<MergeEvent> = Vec::new();
    for e in events {
        if let Some(prev) = out.iter_mut().find(|p| {
            (p.t - e.t).abs() < 1e-13 && (p.leader == e.leader || e.members.iter().any(|m| m.0 == p.leader))
        }) {
            for m in e.members {
                if !prev.members.iter().any(|pm| pm.0 == m.0) {
                    prev.members.push(m);
                }
            }
            prev.post_right = e.post_right;
        } else {
            out.push(e);
        }
    }
    out
}

/// Evaluator of the glued solution over a piece-field view.
pub struct GluedSolution<'a> {
    pub curves: &'a CurveSet,
    pub fields: &'a dyn PieceFields,
}

impl<'a> GluedSolution<'a> {
    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        self.fields.value(self.curves.piece_at(x), x, t)
    }

    /// Left and right traces at an alive curve.
    pub fn traces(&self, curve: usize, t: f64) -> (f64, f64) {
        let c = &self.curves.curves[curve];
        (
            self.fields.value(c.left_piece, c.pos, t),
            self.fields.value(c.right_piece, c.pos, t),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Burgers;

    /// Constant plateau fields: RK4 collapses to exact linear front motion.
    struct ConstFields(Vec<f64>);
    impl PieceFields for ConstFields {
        fn n_pieces(&self) -> usize {
            self.0.len()
        }
        fn value(&self, piece: usize, _x: f64, _t: f64) -> f64 {
            self.0[piece]
        }
    }

    #[test]
    fn constant_pieces_exact_speed() {
        let m = Burgers;
        let fields = ConstFields(vec![2.0, 0.0]);
        let mut set = CurveSet::new(&[0.0], vec![ShockClass::Large]).unwrap();
        let mut t = 0.0;
        for _ in 0..100 {
            let ev = set.advance_slab(&m, &fields, t, t + 0.01).unwrap();
            assert!(ev.is_empty());
            t += 0.01;
        }
        // sigma(2, 0) = 1 exactly; defect identically zero.
        assert!((set.curves[0].pos - 1.0).abs() < 1e-12);
        assert!(set.curves[0].defect.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn merge_on_contact_and_gluing() {
        let m = Burgers;
        // Three plateaus: middle front faster than right front.
        let fields = ConstFields(vec![3.0, 2.0, 1.0, 0.0]);
        let mut set = CurveSet::new(
            &[0.0, 0.5, 2.0],
            vec![ShockClass::Large, ShockClass::Large, ShockClass::Large],
        )
        .unwrap();
        // Speeds: 2.5, 1.5, 0.5. Curve 0 catches curve 1 at t = 0.5.
        let mut t = 0.0;
        let mut merges = Vec::new();
        for _ in 0..120 {
            merges.extend(set.advance_slab(&m, &fields, t, t + 0.01).unwrap());
            t += 0.01;
        }
        assert!(!merges.is_empty());
        let e = &merges[0];
        assert!((e.t - 0.5).abs() < 1e-9, "merge at t = {}", e.t);
        assert!((e.pos - 1.25).abs() < 1e-9);
        assert_eq!((e.post_left, e.post_right), (0, 2));
        // Glued trajectories are identical after the merge.
        let c0 = &set.curves[0];
        let c1 = &set.curves[1];
        assert_eq!(c1.leader, 0);
        for k in 55..c0.history.len() {
            assert_eq!(c0.history[k], c1.history[k]);
        }
        // Post-merge speed is sigma(3, 1) = 2 until the next contact.
        assert!(set.curves[0].alive() && !set.curves[1].alive());
    }

    #[test]
    fn three_way_merge_cascade() {
        let m = Burgers;
        let fields = ConstFields(vec![4.0, 2.6, 2.4, 0.0]);
        // Nearly coincident curves collapse within one slab.
        let mut set = CurveSet::new(
            &[0.0, 1e-4, 2e-4],
            vec![ShockClass::Large, ShockClass::Large, ShockClass::Large],
        )
        .unwrap();
        let ev = set.advance_slab(&m, &fields, 0.0, 0.01).unwrap();
        let total: usize = ev.iter().map(|e| e.members.len()).sum();
        assert!(total >= 3, "expected a cascade, got {ev:?}");
        assert_eq!(set.alive_ids(), vec![0]);
        assert_eq!(set.curves[0].right_piece, 3);
    }

    #[test]
    fn glued_evaluator_conventions() {
        let fields = ConstFields(vec![2.0, 1.0, 0.0]);
        let set = CurveSet::new(&[0.0, 1.0], vec![ShockClass::Large, ShockClass::Large]).unwrap();
        let glued = GluedSolution {
            curves: &set,
            fields: &fields,
        };
        assert_eq!(glued.evaluate(-0.5, 0.0), 2.0);
        assert_eq!(glued.evaluate(0.5, 0.0), 1.0);
        assert_eq!(glued.evaluate(1.5, 0.0), 0.0);
        // On-curve queries take the right trace.
        assert_eq!(glued.evaluate(0.0, 0.0), 1.0);
        let (l, r) = glued.traces(0, 0.0);
        assert!(l > r, "down-jump at the curve");
    }

    /// Speed-defect sample shrinks at fourth order against a halved-step
    /// oracle on smooth flank data.
    #[test]
    fn rk4_defect_step_halving() {
        let m = Burgers;
        struct Smooth;
        impl PieceFields for Smooth {
            fn n_pieces(&self) -> usize {
                2
            }
            fn value(&self, piece: usize, x: f64, t: f64) -> f64 {
                // Smooth, gently varying flank values.
                let base = if piece == 0 { 2.0 } else { 0.5 };
                base + 0.3 * (x - 0.7 * t).sin()
            }
        }
        let fields = Smooth;
        let run = |dt: f64| -> f64 {
            let mut pos = 0.1;
            let mut t = 0.0;
            while t < 0.5 - 1e-12 {
                let (p, _) = rk4_step(&m, &fields, 0, 1, pos, t, t + dt).unwrap();
                pos = p;
                t += dt;
            }
            pos
        };
        let coarse = run(0.02);
        let fine = run(0.01);
        let finer = run(0.005);
        let e1 = (coarse - finer).abs();
        let e2 = (fine - finer).abs();
        // Fourth-order: halving the step cuts the error by about 16.
        assert!(e1 / e2 > 8.0, "ratio {} too small (e1={e1}, e2={e2})", e1 / e2);
    }
}
