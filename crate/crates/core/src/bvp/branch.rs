//! Periodic-orbit collocation and pseudo-arclength continuation in `a2`.

use serde::Serialize;

use crate::bvp::collocation::{
    phase_data, redistribute_mesh, reinterpolate, solution_from_samples, solve_periodic_bvp,
    CollocOptions, CollocationSolution, GaussBasis, PalcRow, PeriodicBcs, M_STAGES,
};
use crate::error::{Error, Result};
use crate::geometry::geometry;
use crate::mmo::{classify_series, find_periodic, MmoSignature, OrbitOptions, Thresholds};
use crate::params::ParameterSet;
use crate::reductions::{build_field, FieldExtras, FieldTag, VectorField};

#[derive(Debug, Clone)]
pub struct BranchOptions {
    pub n_mesh: usize,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    /// Arclength weights for the period and the parameter.
    pub w_t: f64,
    pub w_param: f64,
    /// Explosion marker: the branch is flagged where the orbit measure
    /// accumulates a jump of `explosion_measure_jump` while `a2` moves by
    /// less than `explosion_da2` (evaluated over trailing windows of
    /// accepted points, so a sharp fold is caught whether it is crossed in
    /// one stride or in many small corrector steps).
    pub explosion_da2: f64,
    pub explosion_measure_jump: f64,
    pub colloc: CollocOptions,
    pub orbit: OrbitOptions,
    pub redistribute_every: usize,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self {
            n_mesh: 420,
            ds_init: 5e-3,
            ds_min: 1e-12,
            ds_max: 2e-2,
            max_points: 2500,
            w_t: 0.05,
            w_param: 1.0,
            explosion_da2: 1e-4,
            explosion_measure_jump: 1e-2,
            colloc: CollocOptions { newton_max: 18, tol_residual: 1e-10, tol_step: 1e-12, trace: false },
            orbit: OrbitOptions::default(),
            redistribute_every: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub a2: f64,
    pub max_y: f64,
    pub l2_norm: f64,
    pub period: f64,
    pub p: usize,
    pub s: usize,
    pub ambiguous: usize,
    /// |a2 - a2_previous| of the accepted step.
    pub step_a2: f64,
    pub explosion: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub index: usize,
    pub a2: f64,
    pub from: (usize, usize),
    pub to: (usize, usize),
    /// True when an explosion marker fires on or next to the transition step.
    pub at_marker: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub transitions: Vec<Transition>,
    pub stalled: bool,
}

fn field_for_a2(base: ParameterSet) -> impl Fn(f64) -> Result<Box<dyn VectorField>> {
    move |a2: f64| {
        let mut p = base;
        p.a2 = a2;
        let f = build_field(FieldTag::Full4D, &p, FieldExtras::default())?;
        Ok(Box::new(f) as Box<dyn VectorField>)
    }
}

/// Solves the periodic BVP for the orbit found by the return map at the
/// parameter set `p`, returning the converged collocation solution.
pub fn solve_periodic(
    p: &ParameterSet,
    seed: &[f64],
    n_mesh: usize,
    colloc: &CollocOptions,
    orbit: &OrbitOptions,
) -> Result<(CollocationSolution, GaussBasis)> {
    let orb = find_periodic(p, seed, orbit)?;
    let (_, traj) = crate::mmo::return_map(p, &orb.anchor, orbit)?;
    solve_periodic_from_trajectory(p, &traj.ts, &traj.states, n_mesh, colloc)
}

/// Solves the periodic BVP from a trajectory covering approximately one
/// period (endpoint gap small).
pub fn solve_periodic_from_trajectory(
    p: &ParameterSet,
    ts: &[f64],
    states: &[Vec<f64>],
    n_mesh: usize,
    colloc: &CollocOptions,
) -> Result<(CollocationSolution, GaussBasis)> {
    let first = &states[0];
    let last = &states[states.len() - 1];
    let gap = first
        .iter()
        .zip(last)
        .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
        .fold(0.0, f64::max);
    if gap > 0.1 {
        return Err(Error::Collocation(format!(
            "seed trajectory endpoint gap {gap:.3} too large for a periodic solve"
        )));
    }
    let basis = GaussBasis::new();
    let mut init = solution_from_samples(ts, states, 4, n_mesh, &basis, p.a2);
    // Close the seed exactly.
    let dim = init.dim;
    let n = init.n_intervals();
    for c in 0..dim {
        let avg = 0.5 * (init.nodes[c] + init.nodes[n * dim + c]);
        init.nodes[c] = avg;
        init.nodes[n * dim + c] = avg;
    }
    let field_for = field_for_a2(*p);
    let solve_at = |init: &CollocationSolution| -> Result<CollocationSolution> {
        let (pd, pc) = phase_data(init, &basis);
        let bcs = PeriodicBcs { phase_deriv: pd, phase_const: pc, palc: None };
        solve_periodic_bvp(&field_for, &basis, init, &bcs, colloc)
    };
    let mut sol = solve_at(&init)?;
    // One redistribution pass to settle the mesh on the converged orbit.
    let mesh = redistribute_mesh(&sol, &basis);
    let re = reinterpolate(&sol, &basis, &mesh);
    if let Ok(better) = solve_at(&re) {
        sol = better;
    }
    Ok((sol, basis))
}

struct Measures {
    max_y: f64,
    l2: f64,
    p: usize,
    s: usize,
    ambiguous: usize,
}

fn measures(
    base: &ParameterSet,
    sol: &CollocationSolution,
    basis: &GaussBasis,
) -> Result<Measures> {
    let mut p = *base;
    p.a2 = sol.param;
    let geom = geometry(&p)?;
    let thr = Thresholds::from_geometry(&geom);
    let (ts, states) = sol.sample_series(basis, 6);
    let xs: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let ys: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let xr: Vec<f64> = states.iter().map(|s| s[2]).collect();
    let sig: MmoSignature = classify_series(&ts, &xs, &ys, &xr, &geom, &thr)?;
    Ok(Measures {
        max_y: ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        l2: sol.l2_norm(basis),
        p: sig.p,
        s: sig.s,
        ambiguous: sig.ambiguous,
    })
}

/// Weighted secant tangent between two solutions on the same mesh.
fn secant_tangent(
    basis: &GaussBasis,
    newer: &CollocationSolution,
    older: &CollocationSolution,
    w_t: f64,
    w_param: f64,
) -> (Vec<f64>, f64, f64, f64) {
    let d = newer.dim;
    let n = newer.n_intervals();
    let mut v: Vec<f64> = newer
        .stages
        .iter()
        .zip(&older.stages)
        .map(|(a, b)| a - b)
        .collect();
    let vt = newer.t_total - older.t_total;
    let vp = newer.param - older.param;
    let mut norm2 = 0.0;
    for i in 0..n {
        let h = newer.mesh[i + 1] - newer.mesh[i];
        for j in 0..M_STAGES {
            let o = (i * M_STAGES + j) * d;
            for c in 0..d {
                norm2 += h * basis.w[j] * v[o + c] * v[o + c];
            }
        }
    }
    norm2 += w_t * vt * vt + w_param * vp * vp;
    let norm = norm2.sqrt().max(1e-300);
    for x in v.iter_mut() {
        *x /= norm;
    }
    (v, vt / norm, vp / norm, norm)
}

fn predict(sol: &CollocationSolution, older: &CollocationSolution, frac: f64) -> CollocationSolution {
    let mut out = sol.clone();
    for (o, (a, b)) in out.nodes.iter_mut().zip(sol.nodes.iter().zip(&older.nodes)) {
        *o = a + frac * (a - b);
    }
    for (o, (a, b)) in out.stages.iter_mut().zip(sol.stages.iter().zip(&older.stages)) {
        *o = a + frac * (a - b);
    }
    out.t_total = sol.t_total + frac * (sol.t_total - older.t_total);
    out.param = sol.param + frac * (sol.param - older.param);
    out
}

/// Pseudo-arclength continuation of the periodic orbit in `a2` across
/// `[a2_from, a2_to]`.  Records one point per accepted step with measures,
/// (p, s) signature and explosion markers; labels signature transitions.
pub fn continue_branch(
    base: &ParameterSet,
    seed: &[f64],
    a2_from: f64,
    a2_to: f64,
    opts: &BranchOptions,
) -> Result<Branch> {
    let mut p0 = *base;
    p0.a2 = a2_from;
    let (mut sol, basis) = solve_periodic(&p0, seed, opts.n_mesh, &opts.colloc, &opts.orbit)?;
    let field_for = field_for_a2(*base);
    let dir = (a2_to - a2_from).signum();

    let mut points: Vec<BranchPoint> = vec![];
    let mut transitions: Vec<Transition> = vec![];
    let m0 = measures(base, &sol, &basis)?;
    points.push(BranchPoint {
        a2: sol.param,
        max_y: m0.max_y,
        l2_norm: m0.l2,
        period: sol.t_total,
        p: m0.p,
        s: m0.s,
        ambiguous: m0.ambiguous,
        step_a2: 0.0,
        explosion: false,
        residual: sol.residual_inf,
    });

    // Second point by natural continuation, shrinking the parameter step
    // until the corrector converges (the orbit is exponentially sensitive
    // near canard transitions).
    let mut prev = sol.clone();
    {
        let mut da0 = dir * 1e-4 * (1.0 + a2_from.abs());
        let mut done = false;
        for _ in 0..24 {
            let mut init = sol.clone();
            init.param = a2_from + da0;
            let (pd, pc) = phase_data(&init, &basis);
            let bcs = PeriodicBcs { phase_deriv: pd, phase_const: pc, palc: None };
            match solve_periodic_bvp_fixed(&field_for, &basis, &init, &bcs, &opts.colloc) {
                Ok(s) => {
                    sol = s;
                    done = true;
                    break;
                }
                Err(_) => da0 *= 0.5,
            }
        }
        if !done {
            return Err(Error::ContinuationStall(
                "could not take the initial parameter step".into(),
            ));
        }
    }
    let m1 = measures(base, &sol, &basis)?;
    push_point(&mut points, &mut transitions, &sol, &m1, (sol.param - prev.param).abs(), opts);

    let mut ds = opts.ds_init;
    let mut stalled = false;
    let mut since_redist = 0usize;
    let span = (a2_to - a2_from).abs();
    while points.len() < opts.max_points {
        let last_a2 = sol.param;
        if (dir > 0.0 && last_a2 >= a2_to) || (dir < 0.0 && last_a2 <= a2_to) {
            break;
        }
        // A branch fold may carry the path out of the commanded range on the
        // entry side; stop rather than follow it away.
        if (last_a2 - a2_from.min(a2_to)) < -1e-6 * span
            || (last_a2 - a2_from.max(a2_to)) > 1e-6 * span
        {
            break;
        }
        // Mesh maintenance, keeping predictor history consistent.
        since_redist += 1;
        if since_redist >= opts.redistribute_every {
            since_redist = 0;
            let mesh = redistribute_mesh(&sol, &basis);
            let sol_re = reinterpolate(&sol, &basis, &mesh);
            let prev_re = reinterpolate(&prev, &basis, &mesh);
            let (pd, pc) = phase_data(&sol_re, &basis);
            let bcs = PeriodicBcs { phase_deriv: pd, phase_const: pc, palc: None };
            if let Ok(s2) = solve_periodic_bvp_fixed(&field_for, &basis, &sol_re, &bcs, &opts.colloc) {
                sol = s2;
                prev = prev_re;
            }
        }
        let (v, vt, vp, raw_norm) = secant_tangent(&basis, &sol, &prev, opts.w_t, opts.w_param);
        if raw_norm < 1e-15 {
            stalled = true;
            break;
        }
        let mut accepted = false;
        let mut attempt = 0;
        // Every so often after a stretch of tiny steps, probe a larger one:
        // sharp canard sub-segments are best crossed in one stride.
        if ds < 1e-4 && points.len().is_multiple_of(7) {
            ds = (ds * 50.0).min(opts.ds_max);
        }
        while attempt < 80 {
            // Full secant predictor first; near sharp turns fall back to a
            // pure corrector step anchored at the current point.
            let frac = if attempt % 2 == 0 { ds / raw_norm } else { 0.0 };
            let init = predict(&sol, &prev, frac);
            let (pd, pc) = phase_data(&init, &basis);
            let palc = PalcRow {
                v_stages: v.clone(),
                v_t: vt,
                v_param: vp,
                prev_stages: sol.stages.clone(),
                prev_t: sol.t_total,
                prev_param: sol.param,
                ds,
                w_t: opts.w_t,
                w_param: opts.w_param,
            };
            let bcs = PeriodicBcs { phase_deriv: pd, phase_const: pc, palc: Some(palc) };
            match solve_periodic_bvp(&field_for, &basis, &init, &bcs, &opts.colloc) {
                Ok(new_sol) => {
                    let m = measures(base, &new_sol, &basis)?;
                    let step = (new_sol.param - sol.param).abs();
                    prev = sol;
                    sol = new_sol;
                    push_point(&mut points, &mut transitions, &sol, &m, step, opts);
                    ds = (ds * 1.6).min(opts.ds_max);
                    accepted = true;
                    break;
                }
                Err(_) => {
                    if attempt % 2 == 1 {
                        ds *= 0.35;
                    }
                    attempt += 1;
                    if ds < opts.ds_min {
                        break;
                    }
                }
            }
        }
        if !accepted {
            // Restart heuristic: record the stall location, reseed the orbit
            // from scratch a little further along the parameter and continue.
            let hop = dir * 1e-5 * (1.0 + sol.param.abs());
            let mut q = *base;
            q.a2 = sol.param + hop;
            match solve_periodic(&q, seed, opts.n_mesh, &opts.colloc, &opts.orbit) {
                Ok((new_sol, _)) => {
                    let m = measures(base, &new_sol, &basis)?;
                    let step = (new_sol.param - sol.param).abs();
                    prev = new_sol.clone();
                    sol = new_sol;
                    push_point(&mut points, &mut transitions, &sol, &m, step, opts);
                    ds = opts.ds_init * 0.2;
                    since_redist = 0;
                }
                Err(_) => {
                    stalled = true;
                    break;
                }
            }
        }
    }
    flag_explosions(&mut points, opts);
    let transitions = label_transitions(&points, opts);
    Ok(Branch { points, transitions, stalled })
}

/// Windowed explosion detection: walk backward from each point until the
/// relative measure jump exceeds the threshold; if the parameter moved less
/// than `explosion_da2` over that window, the whole window is a
/// quasi-vertical segment.
fn flag_explosions(points: &mut [BranchPoint], opts: &BranchOptions) {
    let n = points.len();
    for i in 1..n {
        let mut j = i;
        let mut jumped = false;
        while j > 0 && i - j <= 30 {
            j -= 1;
            let dl2 = (points[i].l2_norm - points[j].l2_norm).abs();
            let dt = (points[i].period - points[j].period).abs() / (1.0 + points[j].period.abs());
            if dl2.max(dt) > opts.explosion_measure_jump {
                jumped = true;
                break;
            }
            if (points[i].a2 - points[j].a2).abs() > opts.explosion_da2 {
                break;
            }
        }
        if jumped && (points[i].a2 - points[j].a2).abs() < opts.explosion_da2 {
            for q in points.iter_mut().take(i + 1).skip(j) {
                q.explosion = true;
            }
        }
    }
}

/// Labels signature transitions on a de-noised label sequence: episodes
/// shorter than `SHORT_EPISODE` points flanked by identical signatures are
/// classification noise of near-threshold oscillations, not transitions.
fn label_transitions(points: &[BranchPoint], opts: &BranchOptions) -> Vec<Transition> {
    const SHORT_EPISODE: usize = 12;
    let mut out = vec![];
    if points.len() < 3 {
        return out;
    }
    let mut labels: Vec<(usize, usize)> = points.iter().map(|q| (q.p, q.s)).collect();
    for _ in 0..6 {
        // Runs of equal labels.
        let mut runs: Vec<(usize, usize, (usize, usize))> = vec![];
        let mut start = 0;
        for k in 1..=labels.len() {
            if k == labels.len() || labels[k] != labels[start] {
                runs.push((start, k - 1, labels[start]));
                start = k;
            }
        }
        let mut changed = false;
        for w in 1..runs.len().saturating_sub(1) {
            let (a, b, _) = runs[w];
            if b - a + 1 < SHORT_EPISODE && runs[w - 1].2 == runs[w + 1].2 {
                for l in labels.iter_mut().take(b + 1).skip(a) {
                    *l = runs[w - 1].2;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut current = labels[0];
    for k in 1..labels.len() {
        if labels[k] != current {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(points.len() - 1);
            let near_marker = points[lo..=hi].iter().any(|q| q.explosion)
                || points[k].step_a2 < opts.explosion_da2;
            out.push(Transition {
                index: k,
                a2: points[k].a2,
                from: current,
                to: labels[k],
                at_marker: near_marker,
            });
            current = labels[k];
        }
    }
    out
}

fn solve_periodic_bvp_fixed(
    field_for: &dyn Fn(f64) -> Result<Box<dyn VectorField>>,
    basis: &GaussBasis,
    init: &CollocationSolution,
    bcs: &PeriodicBcs,
    colloc: &CollocOptions,
) -> Result<CollocationSolution> {
    solve_periodic_bvp(field_for, basis, init, bcs, colloc)
}

fn push_point(
    points: &mut Vec<BranchPoint>,
    _transitions: &mut Vec<Transition>,
    sol: &CollocationSolution,
    m: &Measures,
    step_a2: f64,
    opts: &BranchOptions,
) {
    let _ = opts;
    let explosion = false; // assigned by the windowed pass at the end
    points.push(BranchPoint {
        a2: sol.param,
        max_y: m.max_y,
        l2_norm: m.l2,
        period: sol.t_total,
        p: m.p,
        s: m.s,
        ambiguous: m.ambiguous,
        step_a2,
        explosion,
        residual: sol.residual_inf,
    });
}
