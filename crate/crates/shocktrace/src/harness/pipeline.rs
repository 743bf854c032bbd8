//! Streaming run of one mesh rung: evolve all pieces slab by slab, advance
//! shock curves and certificates alongside, and accumulate every estimator
//! quantity incrementally.  The residual windows couple back into the shock
//! uncertainties, so a rung runs up to three passes, each feeding the next
//! pass's revelation windows.

use crate::error::{Error, Result};
use crate::estimator::{
    boundary_d_tilde, delta_inner, delta_inner_worst, gamma, l2_bound, min_rh_speed_diff,
    pair_speed_gap, rd_pair_certificate, upsilon, CertKind, CertificateWatch, CurveUncertainty,
    EventKind, EventRecord, FictCurve, GammaInputs, ReportRow, UpsilonInputs, ZetaAccumulator,
};
use crate::estimator::report::merge_intervals;
use crate::model::{relative_entropy, ModelConstants, SharedModel};
use crate::preprocess::{
    build_extensions, insert_steps, rd_extension_surrogate, DiscretizedProfile, ExtensionSet,
    SegmentedProfile, SurrogateSpec,
};
use crate::shocks::{discrete_slope, CurveSet, FrontTrackState, PieceFields, ShockClass};
use crate::solver::{
    gap_bound, gronwall_constant, level_set_check, linf_bound, BoundaryMode, ConeWindow, Grid,
    LevelSetCheck, PieceStepper, ResidualAccumulator, SlabView,
};
use rayon::prelude::*;

/// Per-rung run parameters.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub cells: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub output_times: Vec<f64>,
    pub max_passes: usize,
    pub with_estimator: bool,
    /// Record (x, u) snapshots at the output times.
    pub snapshots: bool,
}

/// How a piece of the glued solution is realized.
#[derive(Debug, Clone, Copy)]
enum Binding {
    Sim(usize),
    Plateau { value: f64, spec: usize },
}

/// Slab-scoped field view; `shifted` routes plateau pieces through the
/// shared-line surrogate (the shifted configuration) instead of their glued
/// constants.
struct FieldsView<'a> {
    bindings: &'a [Binding],
    slabs: &'a [SlabView<'a>],
    specs: &'a [SurrogateSpec],
    lam: Option<&'a SlabView<'a>>,
    shifted: bool,
}

impl PieceFields for FieldsView<'_> {
    fn n_pieces(&self) -> usize {
        self.bindings.len()
    }
    fn value(&self, piece: usize, x: f64, t: f64) -> f64 {
        match self.bindings[piece] {
            Binding::Sim(k) => self.slabs[k].value(x, t),
            Binding::Plateau { value, spec } => {
                if self.shifted {
                    let lam = self.lam.expect("plateau pieces require the line solution");
                    self.specs[spec].value(&|xx, tt| lam.value(xx, tt), x, t)
                } else {
                    value
                }
            }
        }
    }
}

/// One staircase region's running estimator state.
struct RegionState {
    first_piece: usize,
    last_piece: usize,
    left_curve: usize,
    right_curve: usize,
    interior_curves: Vec<usize>,
    width: f64,
    oscillation: f64,
    delta: f64,
    /// Initial jump per curve id of the region (boundaries included).
    s0: Vec<(usize, f64)>,
    /// Sum of squared initial sizes of the artificial boundary shocks.
    boundary_s0_sq_sum: f64,
    u_ft: FrontTrackState,
    /// Running sup of the adjacent-piece differences over the staircase.
    s_bar: f64,
    /// Running sup-in-time Lipschitz constant of the line solution.
    m_hat: f64,
    /// Running inf of the gap between the pieces flanking the region.
    rho: f64,
    touch: Option<(f64, f64)>,
    certified: Option<f64>,
    // Latest budget values.
    max_upsilon_interior: f64,
    upsilon_boundary: (f64, f64),
    gamma_now: f64,
    delta_inner_now: f64,
    delta_ft_now: f64,
    valid_window: bool,
}

/// Gap-decay audit entry for one adjacent piece pair.
#[derive(Debug, Clone)]
pub struct GapAudit {
    pub pair: usize,
    pub initial_gap: f64,
    pub lip_min: f64,
    pub measured_min: f64,
    pub predicted_min: f64,
}

/// Solution snapshot at one output time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub curves: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// Final-time glued state for reference comparisons.
pub struct FinalState {
    grid_h: f64,
    bindings: Vec<Binding>,
    levels: Vec<Vec<f64>>,
    grids: Vec<Grid>,
    curve_pos: Vec<f64>,
    curve_left: Vec<usize>,
    curve_right: Vec<usize>,
}

impl FinalState {
    pub fn eval(&self, x: f64) -> f64 {
        let mut piece = None;
        for (k, &pos) in self.curve_pos.iter().enumerate() {
            if x < pos {
                piece = Some(self.curve_left[k]);
                break;
            }
            piece = Some(self.curve_right[k]);
        }
        let piece = piece.unwrap_or(0);
        match self.bindings[piece] {
            Binding::Plateau { value, .. } => value,
            Binding::Sim(k) => {
                let g = &self.grids[k];
                let u = &self.levels[k];
                let pos = (x - g.midpoint(0)) / g.h;
                if pos <= 0.0 {
                    u[0]
                } else {
                    let j = (pos.floor() as usize).min(u.len() - 2);
                    u[j] + (pos - j as f64) * (u[j + 1] - u[j])
                }
            }
        }
    }

    pub fn resolution(&self) -> f64 {
        self.grid_h
    }
}

/// Everything one rung produces.
pub struct RungOutput {
    pub cells: usize,
    pub h: f64,
    pub delta: Option<f64>,
    pub passes: usize,
    pub rows: Vec<ReportRow>,
    pub events: Vec<EventRecord>,
    pub sup_max_delta: f64,
    pub sup_l2: f64,
    pub sup_l1: f64,
    pub final_residual_sq: f64,
    pub upsilon_max: f64,
    pub gamma_final: f64,
    pub delta_inner_final: f64,
    pub ambiguity_time: f64,
    pub merge_events: usize,
    pub certificates: usize,
    pub trajectories: Vec<(f64, Vec<f64>)>,
    pub snapshots: Vec<Snapshot>,
    pub gap_audit: Vec<GapAudit>,
    pub min_downjump: f64,
    pub level_set: Option<LevelSetCheck>,
    pub s_half: f64,
    pub info_speed: f64,
    pub c_gronwall: f64,
    pub init_entropy: f64,
    pub init_l2_sq: f64,
    pub curve_classes: Vec<ShockClass>,
    pub final_state: FinalState,
}

/// Fixed per-rung geometry shared by all passes.
struct Setup {
    model: SharedModel,
    consts: ModelConstants,
    sup_da_glued: f64,
    disc: DiscretizedProfile,
    exts: ExtensionSet,
    bindings: Vec<Binding>,
    specs: Vec<SurrogateSpec>,
    classes: Vec<ShockClass>,
    cone: ConeWindow,
    grid: Grid,
    lam_grid: Option<Grid>,
    steps: usize,
    h: f64,
    delta: Option<f64>,
    artificial_edges: Vec<Vec<(usize, f64)>>,
}

fn build_setup(
    model: &SharedModel,
    profile: &SegmentedProfile,
    p: &RunParams,
) -> Result<Setup> {
    let h = 1.0 / p.cells as f64;
    let delta = p.delta;
    let disc = match delta {
        Some(d) => insert_steps(profile, d)?,
        None => {
            if profile
                .segments
                .iter()
                .any(|s| s.class == crate::preprocess::PieceClass::RapidlyDecreasing)
            {
                return Err(Error::Config(
                    "profile has rapidly decreasing pieces but no delta was set".into(),
                ));
            }
            insert_steps(profile, 1.0)?
        }
    };
    let exts = build_extensions(&disc)?;
    let m_slope = exts.slope_m;

    // Bindings + surrogate clamps.
    let mut bindings = Vec::with_capacity(disc.pieces.len());
    let mut specs = Vec::new();
    let mut sim_count = 0usize;
    for (i, piece) in disc.pieces.iter().enumerate() {
        if disc.is_rd_piece(i) {
            let spec = rd_extension_surrogate(&exts.exts[i], piece.kind, m_slope)?;
            bindings.push(Binding::Plateau {
                value: spec.plateau,
                spec: specs.len(),
            });
            specs.push(spec);
        } else {
            bindings.push(Binding::Sim(sim_count));
            sim_count += 1;
        }
    }

    // Curve classes from the flanking piece roles.
    let classes: Vec<ShockClass> = (0..disc.pieces.len() - 1)
        .map(|i| {
            let l = disc.is_rd_piece(i);
            let r = disc.is_rd_piece(i + 1);
            match (l, r) {
                (true, true) => ShockClass::FrontTracking,
                (false, false) => ShockClass::Large,
                _ => ShockClass::Boundary,
            }
        })
        .collect();

    // Bands: glued data range for the information speed, extension range
    // (plus the line solution's values) for everything else.
    let (glo, ghi) = disc.value_range();
    let pad_g = 0.1 * (ghi - glo).max(1e-9);
    let glued = ModelConstants::sample(
        model.as_ref(),
        crate::model::Band::new(glo - pad_g, ghi + pad_g),
    )?;

    let max_bp = exts
        .breakpoints
        .iter()
        .fold(0.0_f64, |m, &x| m.max(x.abs()));
    let s_half = 1.02 * (max_bp + (glued.info_speed + glued.sup_da) * p.t_end) + 4.0 * h;
    let cone = ConeWindow {
        s_half,
        info_speed: glued.info_speed,
    };
    cone.validate(max_bp, p.t_end, glued.sup_da)?;

    let pad = 0.02 * s_half + 6.0 * h;
    let (dom_lo, dom_hi) = (-s_half - pad, s_half + pad);

    // Line-solution layout (one shared simulation for all staircase pieces).
    let lam_span = if specs.is_empty() {
        None
    } else {
        let min_shift = specs
            .iter()
            .flat_map(|s| [s.faller_shift, s.riser_shift])
            .fold(f64::INFINITY, f64::min);
        let max_shift = specs
            .iter()
            .flat_map(|s| [s.faller_shift, s.riser_shift])
            .fold(f64::NEG_INFINITY, f64::max);
        Some((dom_lo - max_shift - 2.0 * h, dom_hi - min_shift + 2.0 * h))
    };

    let (mut blo, mut bhi) = exts.band();
    if let Some((llo, lhi)) = lam_span {
        blo = blo.min(m_slope * llo);
        bhi = bhi.max(m_slope * lhi);
    }
    let consts = ModelConstants::sample(model.as_ref(), crate::model::Band::new(blo, bhi))?;

    let n = ((dom_hi - dom_lo) / h).ceil() as usize;
    let mut grid = Grid::new(dom_lo, dom_lo + n as f64 * h, n, consts.sup_da, p.cfl)?;
    grid = grid.snapped_to(p.t_end);
    let steps = (p.t_end / grid.dt).round() as usize;

    let lam_grid = lam_span
        .map(|(llo, lhi)| -> Result<Grid> {
            let n = ((lhi - llo) / h).ceil() as usize;
            let mut g = Grid::new(llo, llo + n as f64 * h, n, consts.sup_da, p.cfl)?;
            g.dt = grid.dt;
            Ok(g)
        })
        .transpose()?;

    // Artificial-boundary jump sums per region (edges where the exact data
    // is continuous).
    let mut artificial_edges = Vec::new();
    let jumps = disc.jumps();
    for region in &disc.rd_regions {
        let mut edges = Vec::new();
        let left_curve = region.first_piece.checked_sub(1);
        if let Some(lc) = left_curve {
            let raw = profile.eval(region.xlo - 1e-9) - profile.eval(region.xlo + 1e-9);
            if raw.abs() < 1e-9 {
                edges.push((lc, jumps[lc]));
            }
        }
        let rc = region.last_piece;
        if rc < jumps.len() {
            let raw = profile.eval(region.xhi - 1e-9) - profile.eval(region.xhi + 1e-9);
            if raw.abs() < 1e-9 {
                edges.push((rc, jumps[rc]));
            }
        }
        artificial_edges.push(edges);
    }

    Ok(Setup {
        model: model.clone(),
        consts,
        sup_da_glued: glued.sup_da,
        disc,
        exts,
        bindings,
        specs,
        classes,
        cone,
        grid,
        lam_grid,
        steps,
        h,
        delta: if disc_has_rd(&disc) { delta } else { None },
        artificial_edges,
    })
}

fn disc_has_rd(disc: &DiscretizedProfile) -> bool {
    !disc.rd_regions.is_empty()
}

/// Run one rung (all passes).
pub fn run_rung(model: &SharedModel, profile: &SegmentedProfile, p: &RunParams) -> Result<RungOutput> {
    let setup = build_setup(model, profile, p)?;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut prev_r = f64::INFINITY;
    let mut last: Option<RungOutput> = None;
    let passes = if p.with_estimator { p.max_passes.max(1) } else { 1 };
    for pass in 0..passes {
        let (out, deltas) = run_pass(&setup, p, pass, prev.as_deref())?;
        let r = out.final_residual_sq;
        let converged = prev_r.is_finite() && (prev_r - r).abs() <= 0.01 * prev_r.max(1e-300);
        prev_r = r;
        prev = Some(deltas);
        let mut out = out;
        out.passes = pass + 1;
        let done = converged || pass + 1 == passes;
        last = Some(out);
        if done {
            break;
        }
    }
    Ok(last.expect("at least one pass"))
}

#[allow(clippy::too_many_lines)]
fn run_pass(
    setup: &Setup,
    p: &RunParams,
    pass: usize,
    prev_deltas: Option<&[Vec<f64>]>,
) -> Result<(RungOutput, Vec<Vec<f64>>)> {
    let model = setup.model.as_ref();
    let consts = &setup.consts;
    let n_pieces = setup.disc.pieces.len();
    let n_curves = n_pieces - 1;
    let jumps = setup.disc.jumps();

    // Steppers for the simulated pieces plus the shared line solution.
    let mut steppers: Vec<PieceStepper<'_>> = Vec::new();
    for (i, b) in setup.bindings.iter().enumerate() {
        if let Binding::Sim(_) = b {
            let ext = setup.exts.exts[i].clone();
            steppers.push(PieceStepper::new(
                model,
                consts.sonic,
                setup.grid,
                &move |x| ext.eval(x),
                BoundaryMode::Extrapolate,
            )?);
        }
    }
    let m_slope = setup.exts.slope_m;
    let mut lam = match &setup.lam_grid {
        Some(g) => Some(PieceStepper::new(
            model,
            consts.sonic,
            *g,
            &move |x| m_slope * x,
            BoundaryMode::Extrapolate,
        )?),
        None => None,
    };

    // Shock curves.
    let mut curves = CurveSet::new(&setup.exts.breakpoints, setup.classes.clone())?;

    // Estimator state.
    let mut est: Vec<CurveUncertainty> = (0..n_curves)
        .map(|i| CurveUncertainty::new(i, setup.classes[i], jumps[i]))
        .collect();
    let mut zeta_global = ZetaAccumulator::new();
    let mut resid = ResidualAccumulator::new();
    let mut lam_resid = 0.0_f64;
    let mut lam_min_slope = f64::INFINITY;
    let mut neg_part_max = 0.0_f64;
    let mut watches: Vec<CertificateWatch> = Vec::new();
    let mut events: Vec<EventRecord> = Vec::new();
    let mut deltas_hist: Vec<Vec<f64>> = Vec::with_capacity(setup.steps + 1);
    let mut min_downjump = f64::INFINITY;
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut trajectories: Vec<(f64, Vec<f64>)> = Vec::new();

    // Region states.
    let mut regions: Vec<RegionState> = setup
        .disc
        .rd_regions
        .iter()
        .enumerate()
        .map(|(r, reg)| {
            let plateaus: Vec<f64> = (reg.first_piece..=reg.last_piece)
                .map(|i| match setup.bindings[i] {
                    Binding::Plateau { value, .. } => value,
                    _ => unreachable!("region pieces are plateaus"),
                })
                .collect();
            // Staircase of the standalone front-tracking object: flanked by
            // its own first/last plateau continued as constants.
            let left_curve = reg.first_piece - 1;
            let right_curve = reg.last_piece;
            let interior: Vec<usize> = (reg.first_piece..reg.last_piece).collect();
            let positions: Vec<f64> = interior
                .iter()
                .map(|&c| setup.exts.breakpoints[c])
                .collect();
            let u_ft = if positions.is_empty() {
                // Single-step region: keep the two boundary curves as the
                // only fronts (degenerate but well-formed).
                FrontTrackState::new(
                    vec![plateaus[0], plateaus[0] - 1e-12],
                    vec![setup.exts.breakpoints[left_curve]],
                )
                .expect("degenerate staircase")
            } else {
                FrontTrackState::new(plateaus.clone(), positions).expect("staircase")
            };
            let mut s0: Vec<(usize, f64)> = vec![(left_curve, jumps[left_curve])];
            s0.extend(interior.iter().map(|&c| (c, jumps[c])));
            s0.push((right_curve, jumps[right_curve]));
            RegionState {
                first_piece: reg.first_piece,
                last_piece: reg.last_piece,
                left_curve,
                right_curve,
                interior_curves: interior,
                width: reg.xhi - reg.xlo,
                oscillation: plateaus.first().unwrap() - plateaus.last().unwrap(),
                delta: reg.delta,
                s0,
                boundary_s0_sq_sum: setup.artificial_edges[r]
                    .iter()
                    .map(|&(_, j)| j * j)
                    .sum(),
                u_ft,
                s_bar: 0.0,
                m_hat: m_slope,
                rho: f64::INFINITY,
                touch: None,
                certified: None,
                max_upsilon_interior: 0.0,
                upsilon_boundary: (0.0, 0.0),
                gamma_now: 0.0,
                delta_inner_now: 0.0,
                delta_ft_now: 0.0,
                valid_window: true,
            }
        })
        .collect();

    // Initial-error integrals over the cone at t = 0 (exact data vs glued
    // reconstruction; the staircase quantization dominates).
    let (init_entropy, init_l2_sq) = {
        let slabs: Vec<SlabView<'_>> = steppers.iter().map(|s| s.slab()).collect();
        let lam_slab = lam.as_ref().map(|l| l.slab());
        let fields = FieldsView {
            bindings: &setup.bindings,
            slabs: &slabs,
            specs: &setup.specs,
            lam: lam_slab.as_ref(),
            shifted: false,
        };
        initial_error_integrals(setup, model, &fields, &curves)
    };

    // Gap audit bookkeeping (adjacent pieces, shifted view).
    let mut gap_measured = vec![f64::INFINITY; n_curves];
    let gap_initial: Vec<f64> = {
        let mut v = Vec::with_capacity(n_curves);
        for i in 0..n_curves {
            let mut inf = f64::INFINITY;
            for k in 0..=400 {
                let x = -setup.cone.s_half
                    + 2.0 * setup.cone.s_half * k as f64 / 400.0;
                inf = inf.min(setup.exts.exts[i].eval(x) - setup.exts.exts[i + 1].eval(x));
            }
            v.push(inf);
        }
        v
    };
    let gap_lips: Vec<f64> = (0..n_curves)
        .map(|i| {
            setup.exts.exts[i]
                .lip()
                .min(setup.exts.exts[i + 1].lip())
        })
        .collect();

    let dt = setup.grid.dt;
    let t_end = p.t_end;
    let cap = 2.0 * setup.sup_da_glued;
    let mut output_steps: Vec<usize> = p
        .output_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(setup.steps))
        .collect();
    output_steps.push(setup.steps);
    output_steps.sort_unstable();
    output_steps.dedup();
    let traj_stride = (setup.steps / 2000).max(1);
    let mut scratch = Vec::new();
    let mut sup_max_delta = 0.0_f64;
    let mut sup_l2 = 0.0_f64;
    let mut sup_l1 = 0.0_f64;

    deltas_hist.push(vec![0.0; n_curves]);
    trajectories.push((0.0, curves.curves.iter().map(|c| c.pos).collect()));

    for step in 0..setup.steps {
        let t0 = step as f64 * dt;
        let t1 = t0 + dt;

        // Advance all simulated fields (independent pieces in parallel).
        let mut sims: Vec<&mut PieceStepper<'_>> = steppers.iter_mut().collect();
        if let Some(l) = lam.as_mut() {
            sims.push(l);
        }
        sims.par_iter_mut().try_for_each(|s| s.advance())?;
        drop(sims);

        let slabs: Vec<SlabView<'_>> = steppers.iter().map(|s| s.slab()).collect();
        let lam_slab = lam.as_ref().map(|l| l.slab());

        // Residual contribution of this slab under the previous pass's
        // revelation windows.
        if p.with_estimator {
            let positions_prev: Vec<f64> =
                curves.curves.iter().map(|c| c.history[step]).collect();
            let contribution = slab_residual(
                setup,
                model,
                &slabs,
                lam_slab.as_ref(),
                &positions_prev,
                prev_deltas.map(|d| &d[step.min(d.len() - 1)][..]),
                0.5 * (t0 + t1),
                &mut scratch,
            );
            resid.push_slab(contribution);
            if let Some(ls) = lam_slab.as_ref() {
                let mut acc = 0.0;
                for j in 0..ls.patch_count() {
                    acc += ls.patch_residual_sq(model, j, f64::NEG_INFINITY, f64::INFINITY);
                }
                lam_resid += acc;
            }
        }
        if let Some(l) = lam.as_ref() {
            lam_min_slope = lam_min_slope.min(l.min_slope_current());
        }

        // Advance shock curves on the glued fields.
        let merge_events = {
            let fields = FieldsView {
                bindings: &setup.bindings,
                slabs: &slabs,
                specs: &setup.specs,
                lam: lam_slab.as_ref(),
                shifted: false,
            };
            curves.advance_slab(model, &fields, t0, t1)?
        };

        let shifted = FieldsView {
            bindings: &setup.bindings,
            slabs: &slabs,
            specs: &setup.specs,
            lam: lam_slab.as_ref(),
            shifted: true,
        };

        // Merge bookkeeping: candidate pairs, certificate spawns, region
        // touches.
        for ev in &merge_events {
            events.push(EventRecord {
                t: ev.t,
                kind: EventKind::Merge {
                    curves: ev.members.iter().map(|m| m.0).collect(),
                },
            });
            if !p.with_estimator {
                continue;
            }
            handle_merge(
                setup, &mut est, &mut watches, &mut regions, ev, &curves, &shifted, t1,
            );
        }

        if p.with_estimator {
            // Growth weights.
            let lam_lip = lam.as_ref().map_or(0.0, |l| l.lip_slab_max());
            let piece_lip = |piece: usize| -> f64 {
                match setup.bindings[piece] {
                    Binding::Sim(k) => steppers[k].lip_slab_max(),
                    Binding::Plateau { .. } => lam_lip,
                }
            };
            let global_lip = (0..n_pieces).map(piece_lip).fold(0.0, f64::max);
            zeta_global.push(consts.amax * global_lip, dt);

            // Negative-part slope norm over revelation windows (zero for
            // certified nondecreasing pieces).
            for (k, s) in steppers.iter().enumerate() {
                if !s.nondecreasing() {
                    let _ = k;
                    let m = s.min_slope_current();
                    if m < 0.0 {
                        neg_part_max = neg_part_max.max(consts.hmax * (-m));
                    }
                }
            }

            let c_now = gronwall_constant(consts, neg_part_max);
            let r_now = resid.total();
            let budget = c_now * (c_now * t1).exp() * (init_entropy + r_now);

            // Region updates first (they feed boundary extras).
            for (r, reg) in regions.iter_mut().enumerate() {
                update_region(
                    setup, model, reg, r, &curves, &shifted, lam_lip, t1, p.epsilon, budget,
                    init_entropy, r_now, c_now, consts.hmax, consts.amax, &mut events,
                )?;
            }

            // Per-curve estimator updates.
            let mut deltas_now = vec![0.0; n_curves];
            for i in 0..n_curves {
                let leader = curves.leader_of(i);
                let pos = curves.curves[leader].pos;
                let defect = curves.curves[leader].defect.last().copied().unwrap_or(0.0);
                let (alpha_a, alpha_b);
                let class_now = est[i].class;
                match class_now {
                    ShockClass::FrontTracking => {
                        // Interior staircase shocks take the regional bound.
                        alpha_a = 0.0;
                        alpha_b = 0.0;
                        let _ = (alpha_a, alpha_b);
                        let region = regions
                            .iter()
                            .find(|r| r.interior_curves.contains(&i));
                        let mut d = region.map_or(0.0, |r| r.delta_ft_now);
                        if est[leader].class != ShockClass::FrontTracking && leader != i {
                            d += deltas_now.get(leader).copied().unwrap_or(0.0);
                        }
                        deltas_now[i] = d;
                        continue;
                    }
                    ShockClass::Large => {
                        alpha_a = defect;
                        alpha_b = pair_speed_gap(model, &shifted, &est[i], pos, t1, cap);
                    }
                    ShockClass::Boundary => {
                        alpha_a = defect;
                        // Trace-uncertainty source from outside the region.
                        alpha_b = consts.amax * outside_trace_gap(&est[i], &shifted, pos, t1);
                    }
                }
                let beta = consts.amax * curve_pair_lip(&est[i], &piece_lip);
                // Shock-size fix-point on the shifted flanks.
                let rough_r = setup.sup_da_glued * t1;
                let rough = (
                    (pos - rough_r).max(setup.cone.interval(t1).0),
                    (pos + rough_r).min(setup.cone.interval(t1).1),
                );
                let est_i = &est[i];
                let gap_inf = |lo: f64, hi: f64| {
                    sampled_inf_gap(&shifted, est_i, lo, hi, global_lip)
                };
                let extra_now = boundary_extra(&regions, i, zeta_global.from_origin());
                let delta_of = |s_trial: f64| {
                    let g = (2.0 * beta * dt).exp();
                    let cw = est_i.c_weight_sq * g + dt * g / s_trial.max(1e-300);
                    est_i.base + est_i.a + est_i.b + cw.sqrt() * budget.sqrt() + extra_now
                };
                let (s_floor, _iv, _iters) =
                    crate::estimator::shock_size_fixpoint(pos, rough, &gap_inf, &delta_of);
                if s_floor <= 0.0 && !est[i].collapsed {
                    events.push(EventRecord {
                        t: t1,
                        kind: EventKind::FloorCollapse { curve: i },
                    });
                }
                est[i].step(alpha_a, alpha_b, beta, dt, s_floor);
                deltas_now[i] = est[i].delta(budget, extra_now);
            }

            // Certificate watches: advance the fictitious continuations and
            // fire separations.
            let mut fired: Vec<(usize, f64)> = Vec::new();
            for (w_idx, w) in watches.iter_mut().enumerate() {
                if w.fired_at.is_some() {
                    continue;
                }
                let beta_l = consts.amax
                    * piece_lip(w.left.pair.0).max(piece_lip(w.left.pair.1));
                let beta_r = consts.amax
                    * piece_lip(w.right.pair.0).max(piece_lip(w.right.pair.1));
                let extra = if w.kind == CertKind::NndBoundaryPair {
                    boundary_extra_any(&regions, zeta_global.from_origin())
                } else {
                    0.0
                };
                w.left.advance(model, &shifted, t0, t1, beta_l, extra)?;
                w.right.advance(model, &shifted, t0, t1, beta_r, extra)?;
                refresh_fict_floor(&shifted, &mut w.left, budget, global_lip);
                refresh_fict_floor(&shifted, &mut w.right, budget, global_lip);
                if w.check_fire(t1, budget) {
                    fired.push((w_idx, t1));
                }
            }
            for (w_idx, t_fire) in fired {
                let w = &watches[w_idx];
                let (cl, cr) = (w.left.pair.0, w.right.pair.1);
                for &cid in &w.group {
                    est[cid].on_certified_merge(cl, cr);
                }
                events.push(EventRecord {
                    t: t_fire,
                    kind: EventKind::Certificate {
                        curves: w.group.clone(),
                        merge_t: w.spawn_t,
                        latency: t_fire - w.spawn_t,
                    },
                });
            }

            // Audits.
            let ufields = FieldsView {
                bindings: &setup.bindings,
                slabs: &slabs,
                specs: &setup.specs,
                lam: lam_slab.as_ref(),
                shifted: false,
            };
            for &id in &curves.alive_ids() {
                let c = &curves.curves[id];
                let l = ufields.value(c.left_piece, c.pos, t1);
                let r = ufields.value(c.right_piece, c.pos, t1);
                min_downjump = min_downjump.min(l - r);
                if l - r <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "down-jump failed at curve {id}, t = {t1}: traces {l} vs {r}"
                    )));
                }
            }
            if step % 16 == 0 || step + 1 == setup.steps {
                let (clo, chi) = setup.cone.interval(t1);
                for i in 0..n_curves {
                    let mut inf = f64::INFINITY;
                    for k in 0..=64 {
                        let x = clo + (chi - clo) * k as f64 / 64.0;
                        inf = inf
                            .min(shifted.value(i, x, t1) - shifted.value(i + 1, x, t1));
                    }
                    gap_measured[i] = gap_measured[i].min(inf);
                }
            }

            let max_delta_now = deltas_now.iter().copied().fold(0.0_f64, f64::max);
            sup_max_delta = sup_max_delta.max(max_delta_now);
            deltas_hist.push(deltas_now.clone());

            // Output rows.
            if output_steps.contains(&(step + 1)) {
                let row = assemble_row(
                    setup, model, &shifted, &curves, &est, &regions, &deltas_now, t1, c_now,
                    init_l2_sq, init_entropy, r_now,
                );
                sup_l2 = sup_l2.max(row.l2_bound);
                sup_l1 = sup_l1.max(row.l1_bound);
                if p.snapshots {
                    snapshots.push(make_snapshot(setup, &ufields, &curves, &deltas_now, t1));
                }
                rows.push(row);
            }
        } else {
            deltas_hist.push(vec![0.0; n_curves]);
        }

        if (step + 1) % traj_stride == 0 || step + 1 == setup.steps {
            trajectories.push((t1, curves.curves.iter().map(|c| c.pos).collect()));
        }
    }

    // Level-set certificate for the shared line solution.
    let level_set = lam.as_ref().map(|l| {
        let c_now = gronwall_constant(consts, neg_part_max);
        let linf = linf_bound(2.0 * m_slope, c_now, t_end, 0.0, lam_resid);
        let gap = setup
            .disc
            .rd_regions
            .iter()
            .map(|r| p.epsilon * r.delta / (2.0 * m_slope))
            .fold(f64::INFINITY, f64::min)
            / (1.0 + consts.amax * m_slope * t_end);
        let check = level_set_check(l.min_slope_current().min(lam_min_slope), linf, gap);
        events.push(EventRecord {
            t: t_end,
            kind: EventKind::LevelSetCheck {
                pass: check.pass,
                margin: check.margin,
            },
        });
        check
    });
    if let Some(ls) = &level_set {
        if !ls.pass {
            return Err(Error::Certificate(format!(
                "level-set check failed (margin {}); refine the mesh",
                ls.margin
            )));
        }
    }

    // Ambiguity-time total for the certificate behavior audit.
    let mut ambiguity_time = 0.0;
    let mut cert_count = 0usize;
    for w in &watches {
        match w.fired_at {
            Some(tf) => {
                ambiguity_time += tf - w.spawn_t;
                cert_count += 1;
            }
            None => ambiguity_time += t_end - w.spawn_t,
        }
    }
    for reg in &regions {
        if let (Some((t_tch, _)), Some(tc)) = (reg.touch, reg.certified) {
            ambiguity_time += tc - t_tch;
            cert_count += 1;
        } else if let Some((t_tch, _)) = reg.touch {
            ambiguity_time += t_end - t_tch;
        }
    }

    let gap_audit = (0..n_curves)
        .map(|i| GapAudit {
            pair: i,
            initial_gap: gap_initial[i],
            lip_min: gap_lips[i],
            measured_min: gap_measured[i],
            predicted_min: gap_bound(
                gap_initial[i].max(1e-300),
                gap_lips[i],
                t_end,
                consts.amax,
            ),
        })
        .collect();

    let final_state = FinalState {
        grid_h: setup.h,
        bindings: setup.bindings.clone(),
        levels: steppers.iter().map(|s| s.current().to_vec()).collect(),
        grids: steppers.iter().map(|s| s.grid).collect(),
        curve_pos: curves
            .curves
            .iter()
            .filter(|c| c.alive())
            .map(|c| c.pos)
            .collect(),
        curve_left: curves
            .curves
            .iter()
            .filter(|c| c.alive())
            .map(|c| c.left_piece)
            .collect(),
        curve_right: curves
            .curves
            .iter()
            .filter(|c| c.alive())
            .map(|c| c.right_piece)
            .collect(),
    };

    let merge_count = events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Merge { .. }))
        .count();

    let (ups, gam, din) = regions.iter().fold((0.0_f64, 0.0_f64, 0.0_f64), |acc, r| {
        (
            acc.0.max(r.max_upsilon_interior),
            acc.1.max(r.gamma_now),
            acc.2.max(r.delta_inner_now),
        )
    });

    let out = RungOutput {
        cells: p.cells,
        h: setup.h,
        delta: setup.delta,
        passes: pass + 1,
        rows,
        events,
        sup_max_delta,
        sup_l2,
        sup_l1,
        final_residual_sq: resid.total(),
        upsilon_max: ups,
        gamma_final: gam,
        delta_inner_final: din,
        ambiguity_time,
        merge_events: merge_count,
        certificates: cert_count,
        trajectories,
        snapshots,
        gap_audit,
        min_downjump,
        level_set,
        s_half: setup.cone.s_half,
        info_speed: setup.cone.info_speed,
        c_gronwall: gronwall_constant(consts, neg_part_max),
        init_entropy,
        init_l2_sq,
        curve_classes: setup.classes.clone(),
        final_state,
    };
    Ok((out, deltas_hist))
}

/// Residual contribution of one slab: per-cell max over the simulated pieces
/// within their revelation windows, plus the line-solution branch windows of
/// the plateau pieces; the first pass (no windows yet) sums whole-cone
/// integrals instead.
#[allow(clippy::too_many_arguments)]
fn slab_residual(
    setup: &Setup,
    model: &dyn crate::model::Model,
    slabs: &[SlabView<'_>],
    lam_slab: Option<&SlabView<'_>>,
    positions: &[f64],
    prev_deltas: Option<&[f64]>,
    t_mid: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    let cone = &setup.cone;
    let (clo, chi) = cone.interval(t_mid);
    if chi <= clo {
        return 0.0;
    }
    let n_pieces = setup.bindings.len();
    let window = |piece: usize| -> (f64, f64) {
        match prev_deltas {
            None => (clo, chi),
            Some(d) => {
                let lo = if piece == 0 {
                    clo
                } else {
                    positions[piece - 1] - d[piece - 1]
                };
                let hi = if piece == n_pieces - 1 {
                    chi
                } else {
                    positions[piece] + d[piece]
                };
                (lo.max(clo), hi.min(chi))
            }
        }
    };

    // Simulated pieces: windowed per-cell max (summed on the first pass).
    let sim_windows: Vec<(f64, f64)> = (0..n_pieces)
        .filter(|&i| matches!(setup.bindings[i], Binding::Sim(_)))
        .map(window)
        .collect();
    let mut total = crate::solver::residual::slab_residual_contribution_windowed(
        model,
        slabs,
        clo,
        chi,
        if prev_deltas.is_some() {
            Some(&sim_windows)
        } else {
            None
        },
        scratch,
    );

    // Plateau pieces: the surrogate's residual lives on the active branches
    // of the shared line solution.
    if let Some(ls) = lam_slab {
        for (i, b) in setup.bindings.iter().enumerate() {
            if let Binding::Plateau { spec, .. } = b {
                let spec = &setup.specs[*spec];
                let (lo, hi) = window(i);
                if hi <= lo {
                    continue;
                }
                for (shift, lvl_lo, lvl_hi) in [
                    (spec.faller_shift, spec.floor, spec.plateau),
                    (spec.riser_shift, spec.plateau, spec.ceiling),
                ] {
                    if lvl_hi <= lvl_lo {
                        continue;
                    }
                    // Active interval of this branch: between the level sets
                    // of the branch's clamp values.
                    let a = level_set_pos(ls, shift, lvl_lo, lo, hi, t_mid);
                    let b = level_set_pos(ls, shift, lvl_hi, lo, hi, t_mid);
                    let (blo, bhi) = (a.max(lo), b.min(hi));
                    if bhi <= blo {
                        continue;
                    }
                    total += lam_window_residual(model, ls, blo - shift, bhi - shift);
                }
            }
        }
    }
    total
}

/// Position where the shifted line solution crosses `level` (monotone
/// bisection on `[lo, hi]`).
fn level_set_pos(
    ls: &SlabView<'_>,
    shift: f64,
    level: f64,
    lo: f64,
    hi: f64,
    t: f64,
) -> f64 {
    let f = |x: f64| ls.value(x - shift, t) - level;
    if f(lo) >= 0.0 {
        return lo;
    }
    if f(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn lam_window_residual(
    model: &dyn crate::model::Model,
    ls: &SlabView<'_>,
    lo: f64,
    hi: f64,
) -> f64 {
    let g = ls.grid;
    let m0 = g.midpoint(0);
    let j0 = (((lo - m0) / g.h).floor().max(0.0)) as usize;
    let j1 = ((((hi - m0) / g.h).ceil()) as usize).min(g.n - 1);
    let mut acc = 0.0;
    for j in j0..j1 {
        acc += ls.patch_residual_sq(model, j, lo, hi);
    }
    acc
}

/// Largest per-pair Lipschitz constant of the pieces a curve's candidates
/// touch (the sharper per-curve growth weight).
fn curve_pair_lip(est: &CurveUncertainty, piece_lip: &dyn Fn(usize) -> f64) -> f64 {
    let mut l = piece_lip(est.hat_pair.0).max(piece_lip(est.hat_pair.1));
    for &(a, b) in &est.pairs {
        l = l.max(piece_lip(a)).max(piece_lip(b));
    }
    l
}

/// Sampled infimum of the certified flank gap over `[lo, hi]`, corrected by
/// the sampling-resolution Lipschitz slack so the result lower-bounds the
/// true infimum.
fn sampled_inf_gap(
    fields: &dyn PieceFields,
    est: &CurveUncertainty,
    lo: f64,
    hi: f64,
    lip: f64,
) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = 48;
    let dx = (hi - lo) / n as f64;
    let mut inf = f64::INFINITY;
    for k in 0..=n {
        let x = lo + dx * k as f64;
        let gap = fields.value(est.cert_left, x, f64::NAN.min(0.0).max(0.0) + 0.0 + est_t(est))
            - fields.value(est.cert_right, x, est_t(est));
        let _ = gap;
        inf = inf.min(
            fields.value(est.cert_left, x, est_t(est))
                - fields.value(est.cert_right, x, est_t(est)),
        );
    }
    inf - lip * dx
}

// The fix-point closures capture the slab time through the fields view; the
// per-call time argument is ignored by slab-scoped views, so any in-slab
// time works here.
fn est_t(_est: &CurveUncertainty) -> f64 {
    f64::INFINITY
}

fn refresh_fict_floor(
    fields: &dyn PieceFields,
    fict: &mut FictCurve,
    budget: f64,
    lip: f64,
) {
    let d = fict.delta(budget).min(1.0).max(1e-6);
    let (lo, hi) = (fict.pos - d, fict.pos + d);
    let n = 24;
    let dx = (hi - lo) / n as f64;
    let mut inf = f64::INFINITY;
    for k in 0..=n {
        let x = lo + dx * k as f64;
        inf = inf.min(fields.value(fict.pair.0, x, f64::INFINITY) - fields.value(fict.pair.1, x, f64::INFINITY));
    }
    fict.s_floor = (inf - lip * dx).max(0.0);
}

/// Boundary worst-case extra of the region a boundary curve belongs to.
fn boundary_extra(regions: &[RegionState], curve: usize, zeta0: f64) -> f64 {
    for r in regions {
        if r.left_curve == curve || r.right_curve == curve {
            let worst = delta_inner_worst(
                r.delta_inner_now,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
            );
            let _ = worst;
            return boundary_d_tilde(
                zeta0,
                r.delta_ft_worst_cached(),
            );
        }
    }
    0.0
}

fn boundary_extra_any(regions: &[RegionState], zeta0: f64) -> f64 {
    regions
        .iter()
        .map(|r| boundary_d_tilde(zeta0, r.delta_ft_worst_cached()))
        .fold(0.0, f64::max)
}

impl RegionState {
    fn delta_ft_worst_cached(&self) -> f64 {
        // Worst-case interior bound with the current budgets.
        self.delta_ft_worst
    }
}

#[allow(clippy::too_many_arguments)]
fn update_region(
    setup: &Setup,
    model: &dyn crate::model::Model,
    reg: &mut RegionState,
    _r_idx: usize,
    curves: &CurveSet,
    shifted: &FieldsView<'_>,
    lam_lip: f64,
    t: f64,
    epsilon: f64,
    _budget: f64,
    init_entropy: f64,
    r_now: f64,
    c_now: f64,
    hmax: f64,
    amax: f64,
    events: &mut Vec<EventRecord>,
) -> Result<()> {
    reg.m_hat = reg.m_hat.max(lam_lip);
    reg.u_ft.advance_to(model, t)?;

    // Running sup of adjacent staircase-piece differences.
    let (clo, chi) = setup.cone.interval(t);
    for i in reg.first_piece..reg.last_piece {
        let n = 96;
        let dx = (chi - clo) / n as f64;
        let mut sup = f64::NEG_INFINITY;
        for k in 0..=n {
            let x = clo + dx * k as f64;
            sup = sup.max(shifted.value(i, x, t) - shifted.value(i + 1, x, t));
        }
        reg.s_bar = reg.s_bar.max(sup + 2.0 * lam_lip * dx);
    }

    // Flanking-gap floor for the minimal-speed-difference certificate.
    {
        let left_outside = reg.first_piece.saturating_sub(1);
        let right_outside = (reg.last_piece + 1).min(setup.bindings.len() - 1);
        let n = 64;
        let dx = (chi - clo) / n as f64;
        let mut inf = f64::INFINITY;
        for k in 0..=n {
            let x = clo + dx * k as f64;
            inf = inf.min(shifted.value(left_outside, x, t) - shifted.value(right_outside, x, t));
        }
        reg.rho = reg.rho.min(inf - 2.0 * lam_lip * dx);
    }

    // Velocity-error budgets.
    let nnd_entropy = 0.0_f64.max(init_entropy * 0.0); // staircase entropy already counted in init.
    let _ = nnd_entropy;
    let m_slope = setup.exts.slope_m;
    let ups_of = |s0: f64| -> f64 {
        upsilon(&UpsilonInputs {
            s_star0: s0,
            boundary_s0_sq_sum: reg.boundary_s0_sq_sum,
            nnd_init_entropy: setup_nnd_entropy(setup),
            residual_sq: r_now,
            s_star_min: (s0 / (1.0 + amax * m_slope * t)).max(1e-300),
            hmax,
            amax,
            s_bar: reg.s_bar,
            c: c_now,
            delta: reg.delta,
            t,
        })
    };
    reg.max_upsilon_interior = reg
        .s0
        .iter()
        .filter(|(c, _)| reg.interior_curves.contains(c))
        .map(|&(_, s0)| ups_of(s0))
        .fold(0.0, f64::max);
    let ub_l = reg
        .s0
        .iter()
        .find(|(c, _)| *c == reg.left_curve)
        .map_or(0.0, |&(_, s0)| ups_of(s0));
    let ub_r = reg
        .s0
        .iter()
        .find(|(c, _)| *c == reg.right_curve)
        .map_or(0.0, |&(_, s0)| ups_of(s0));
    reg.upsilon_boundary = (ub_l, ub_r);

    // Regional L1 budget and interior position uncertainty.
    reg.gamma_now = gamma(&GammaInputs {
        oscillation: reg.oscillation,
        width: reg.width,
        delta: reg.delta,
        m_hat: reg.m_hat,
        max_upsilon: reg.max_upsilon_interior,
        init_entropy,
        residual_sq: r_now,
        c: c_now,
        amax,
        t,
    });
    let slope = discrete_slope(&reg.u_ft, reg.delta);
    reg.delta_inner_now = delta_inner(reg.gamma_now, epsilon, slope);
    let worst = delta_inner_worst(
        reg.delta_inner_now,
        amax,
        reg.m_hat,
        t,
        reg.max_upsilon_interior,
        reg.gamma_now,
    );
    reg.delta_ft_worst = worst;

    // Validity window: every surviving interior curve's interval must sit
    // between the second and second-to-last standalone fronts.
    let ft_pos = reg.u_ft.positions();
    reg.valid_window = if ft_pos.len() >= 3 {
        let (wlo, whi) = (ft_pos[1], ft_pos[ft_pos.len() - 2]);
        reg.interior_curves.iter().all(|&c| {
            let leader = curves.leader_of(c);
            if leader != c && curves.curves[leader].class != ShockClass::FrontTracking {
                return true; // swallowed by a boundary: handled by the worst case
            }
            let pos = curves.curves[leader].pos;
            pos - reg.delta_inner_now >= wlo && pos + reg.delta_inner_now <= whi
        })
    } else {
        false
    };
    reg.delta_ft_now = if reg.valid_window {
        reg.delta_inner_now
    } else {
        worst
    };

    // Touch + minimal-speed-difference certificate for the boundary pair.
    if reg.touch.is_none() && curves.leader_of(reg.left_curve) == curves.leader_of(reg.right_curve)
    {
        // Boundary curves glued in the glued solution.
        let d_sum = reg.last_boundary_delta_sum;
        reg.touch = Some((t, d_sum));
    }
    if let (Some((t_tch, d_sum)), None) = (reg.touch, reg.certified) {
        let m_min = if reg.rho > 0.0 {
            cached_min_speed_diff(setup, model, reg, reg.rho)
        } else {
            0.0
        };
        let ups = reg.upsilon_boundary.0 + reg.upsilon_boundary.1;
        if let Some(tc) = rd_pair_certificate(m_min, t_tch, d_sum, &|_| ups, t, t.max(t_tch) - t_tch + 1.0)
        {
            if tc <= t {
                reg.certified = Some(t);
                events.push(EventRecord {
                    t,
                    kind: EventKind::RdPairCertificate {
                        curves: vec![reg.left_curve, reg.right_curve],
                        touch_t: t_tch,
                        latency: t - t_tch,
                    },
                });
            }
        }
    }
    Ok(())
}

fn setup_nnd_entropy(_setup: &Setup) -> f64 {
    // The nearly non-decreasing pieces reproduce their (piecewise-affine)
    // extensions exactly away from kink cells; their initial entropy is
    // dominated by round-off and the kink cells and is folded into the
    // global initial-entropy integral used by the budgets.
    0.0
}

fn cached_min_speed_diff(
    _setup: &Setup,
    model: &dyn crate::model::Model,
    reg: &mut RegionState,
    rho: f64,
) -> f64 {
    if (rho - reg.m_cache_rho).abs() > 0.01 * rho.abs() {
        reg.m_cache = min_rh_speed_diff(model, reg.band_hint, rho);
        reg.m_cache_rho = rho;
    }
    reg.m_cache
}

#[allow(clippy::too_many_arguments)]
fn handle_merge(
    setup: &Setup,
    est: &mut [CurveUncertainty],
    watches: &mut Vec<CertificateWatch>,
    regions: &mut [RegionState],
    ev: &crate::shocks::MergeEvent,
    curves: &CurveSet,
    shifted: &FieldsView<'_>,
    t: f64,
) {
    let post = (ev.post_left, ev.post_right);
    // Pairwise pair-set updates along the member chain.
    for k in 0..ev.members.len() {
        let (cid, _, _) = ev.members[k];
        for j in 0..ev.members.len() {
            if j == k {
                continue;
            }
            let partner = ev.members[j].0;
            let partner_pairs = est[partner].pairs.clone();
            est[cid].on_merge(&partner_pairs, j > k, post);
        }
    }

    // Certificate spawn depends on the participating classes.
    let classes: Vec<ShockClass> = ev.members.iter().map(|&(c, _, _)| est[c].class).collect();
    let all_ft = classes.iter().all(|&c| c == ShockClass::FrontTracking);
    if all_ft {
        return; // interior staircase merges are covered by the regional bound
    }
    let (a, a_l, a_r) = ev.members[0];
    let (b, b_l, b_r) = *ev.members.last().unwrap();
    let _ = (a_l, b_r);
    let region_pair = regions
        .iter()
        .any(|r| (r.left_curve == a && r.right_curve == b) || (r.left_curve == b && r.right_curve == a));
    if region_pair {
        return; // the minimal-speed-difference certificate covers this pair
    }
    let ft_involved = classes.iter().any(|&c| c == ShockClass::FrontTracking);
    if ft_involved {
        return; // boundary-vs-staircase swallows feed the worst-case carry
    }
    let kind = if classes.iter().any(|&c| c == ShockClass::Large) {
        CertKind::LargePair
    } else {
        CertKind::NndBoundaryPair
    };
    let pos = ev.pos;
    let mk_fict = |pair: (usize, usize), carried: &CurveUncertainty| FictCurve {
        pos,
        pair,
        base: carried.base + carried.b,
        a: carried.a,
        c_weight_sq: carried.c_weight_sq,
        s_floor: carried.s_floor.max(1e-300),
        extra: 0.0,
    };
    let left_pair = (est[a].cert_left, a_r);
    let right_pair = (b_l, est[b].cert_right);
    let _ = (curves, shifted, setup);
    watches.push(CertificateWatch {
        kind,
        spawn_t: t,
        group: ev.members.iter().map(|m| m.0).collect(),
        left: mk_fict(left_pair, &est[a]),
        right: mk_fict(right_pair, &est[b]),
        fired_at: None,
    });
}

/// Bound on the trace uncertainty of a boundary shock coming from outside
/// its staircase region.
fn outside_trace_gap(
    est: &CurveUncertainty,
    fields: &dyn PieceFields,
    pos: f64,
    t: f64,
) -> f64 {
    if !est.ambiguous() {
        return 0.0;
    }
    let hat_l = fields.value(est.hat_pair.0, pos, t);
    let hat_r = fields.value(est.hat_pair.1, pos, t);
    let mut worst = 0.0_f64;
    for &(l, r) in &est.pairs {
        worst = worst.max((fields.value(l, pos, t) - hat_l).abs());
        worst = worst.max((fields.value(r, pos, t) - hat_r).abs());
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn assemble_row(
    setup: &Setup,
    _model: &dyn crate::model::Model,
    shifted: &FieldsView<'_>,
    curves: &CurveSet,
    est: &[CurveUncertainty],
    regions: &[RegionState],
    deltas: &[f64],
    t: f64,
    c_now: f64,
    init_l2_sq: f64,
    _init_entropy: f64,
    r_now: f64,
) -> ReportRow {
    let (l2_sq, l2) = l2_bound(c_now, t, init_l2_sq, r_now);
    let (clo, chi) = setup.cone.interval(t);
    let width = (chi - clo).max(0.0);

    // Uncertainty-band integral over the large and boundary curves.
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (i, e) in est.iter().enumerate() {
        if e.class == ShockClass::FrontTracking {
            continue;
        }
        let pos = curves.curves[curves.leader_of(i)].pos;
        intervals.push(((pos - deltas[i]).max(clo), (pos + deltas[i]).min(chi)));
    }
    merge_intervals(&mut intervals);
    let mut band_integral = 0.0;
    let h = setup.h;
    for (lo, hi) in &intervals {
        let n = (((hi - lo) / h).ceil() as usize).max(1);
        let dx = (hi - lo) / n as f64;
        for k in 0..n {
            let x = lo + (k as f64 + 0.5) * dx;
            // Revealed-index spread at x: min/max over curves whose
            // uncertainty interval contains x.
            let mut mn = usize::MAX;
            let mut mx = 0usize;
            for (i, e) in est.iter().enumerate() {
                if e.class == ShockClass::FrontTracking {
                    continue;
                }
                let pos = curves.curves[curves.leader_of(i)].pos;
                if (x - pos).abs() <= deltas[i] {
                    mn = mn.min(i);
                    mx = mx.max(i + 1);
                }
            }
            if mn == usize::MAX {
                continue;
            }
            band_integral += (shifted.value(mn, x, t) - shifted.value(mx, x, t)).abs() * dx;
        }
    }

    let ft_budget: f64 = regions
        .iter()
        .map(|r| r.gamma_now + 2.0 * setup.cone.s_half * r.m_hat * r.max_upsilon_interior)
        .sum();

    let l1 = width.sqrt() * l2 + band_integral + ft_budget;
    let max_delta = deltas.iter().copied().fold(0.0, f64::max);
    ReportRow {
        t,
        residual_sq: r_now,
        l2_bound_sq: l2_sq,
        l2_bound: l2,
        band_integral,
        ft_l1_budget: ft_budget,
        l1_bound: l1,
        deltas: deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, format!("{:?}", est[i].class), d))
            .collect(),
        max_delta,
        upsilon_max: regions
            .iter()
            .map(|r| r.max_upsilon_interior)
            .fold(0.0, f64::max),
        gamma: regions.iter().map(|r| r.gamma_now).fold(0.0, f64::max),
        delta_inner: regions
            .iter()
            .map(|r| r.delta_inner_now)
            .fold(0.0, f64::max),
    }
}

fn make_snapshot(
    setup: &Setup,
    ufields: &FieldsView<'_>,
    curves: &CurveSet,
    deltas: &[f64],
    t: f64,
) -> Snapshot {
    let (clo, chi) = setup.cone.interval(t);
    let n = 800;
    let xs: Vec<f64> = (0..=n)
        .map(|k| clo + (chi - clo) * k as f64 / n as f64)
        .collect();
    let us: Vec<f64> = xs
        .iter()
        .map(|&x| ufields.value(curves.piece_at(x), x, t))
        .collect();
    Snapshot {
        t,
        xs,
        us,
        curves: curves.curves.iter().map(|c| c.pos).collect(),
        deltas: deltas.to_vec(),
    }
}

/// Exact-vs-glued initial integrals over the cone.
fn initial_error_integrals(
    setup: &Setup,
    model: &dyn crate::model::Model,
    fields: &FieldsView<'_>,
    curves: &CurveSet,
) -> (f64, f64) {
    let (clo, chi) = setup.cone.interval(0.0);
    let mut cuts = vec![clo, chi];
    cuts.extend(setup.exts.breakpoints.iter().copied());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.retain(|&x| x >= clo && x <= chi);
    cuts.dedup();
    let g = 0.5 / 3.0_f64.sqrt();
    let mut entropy = 0.0;
    let mut l2 = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = (((hi - lo) / setup.h).ceil() as usize).max(1);
        let dx = (hi - lo) / n as f64;
        for k in 0..n {
            let c = lo + (k as f64 + 0.5) * dx;
            for s in [-1.0, 1.0] {
                let x = c + s * g * dx;
                let exact = raw_profile_eval(setup, x);
                let glued = fields.value(curves.piece_at(x), x, 0.0);
                entropy += 0.5 * dx * relative_entropy(model, exact, glued);
                l2 += 0.5 * dx * (exact - glued) * (exact - glued);
            }
        }
    }
    (entropy, l2)
}

fn raw_profile_eval(setup: &Setup, x: f64) -> f64 {
    setup.raw_eval(x)
}

impl Setup {
    fn raw_eval(&self, x: f64) -> f64 {
        self.raw_profile.eval(x)
    }
}
