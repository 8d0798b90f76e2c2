//! Slow-manifold computation by one-parameter families of orbit segments,
//! and secondary-canard detection from trace intersections in the section
//! through the folded node.
//!
//! Attracting-side segments of the local normal form start on the critical
//! manifold `y = -x^2 - x^3/(3 lambda1)` at a fixed `x = x0` with the family
//! parameter `s = X(0) < 0`, and end in the section `{X = X_end}`.  The
//! repelling side runs the same construction on the time-reversed field from
//! the middle branch with `s > 0`.

use serde::Serialize;

use crate::bvp::collocation::{
    redistribute_mesh, reinterpolate, solution_from_samples, solve_segment, CollocOptions,
    CollocationSolution, GaussBasis, SegmentBcs,
};
use crate::error::{Error, Result};
use crate::geometry::FoldGeometry;
use crate::integrate::{integrate_to_section, IntegrateOptions, Section, Tol};
use crate::params::ParameterSet;
use crate::reductions::{build_field, FieldExtras, FieldTag, ReversedField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Attracting,
    Repelling,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Start-curve abscissa (local coordinates); defaults: +1 attracting,
    /// -1 repelling.
    pub x0_curve: Option<f64>,
    /// Section value of the slow variable (local coordinates).
    pub x_end: f64,
    /// Shallowest |s| of the sweep.
    pub s_abs_min: f64,
    /// Deepest |s|; default 1.8 * sqrt(eps) * sqrt(a0)/A.  The sweep also
    /// stops on its own once the endpoint trace stagnates at the spiral core
    /// below numerical resolution.
    pub s_abs_max: Option<f64>,
    /// Trace resolution: family members per full endpoint winding.
    pub points_per_winding: f64,
    /// Stop the sweep once the estimated endpoint winding exceeds this.
    pub winding_budget: f64,
    pub n_mesh: usize,
    pub max_members: usize,
    pub colloc: CollocOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            x0_curve: None,
            x_end: 0.0,
            s_abs_min: 5e-4,
            s_abs_max: None,
            points_per_winding: 30.0,
            winding_budget: 20.0,
            n_mesh: 260,
            max_members: 8000,
            colloc: CollocOptions::default(),
        }
    }
}

/// One computed orbit segment of the family.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    /// Family parameter: start value of the slow variable.
    pub s: f64,
    pub solution: CollocationSolution,
}

/// A one-parameter family of orbit segments approximating one slow manifold,
/// with its endpoint trace in the end section.
pub struct ManifoldFamily {
    pub side: Side,
    pub members: Vec<FamilyMember>,
    /// Endpoint (x, y) of every member in the end section, sweep order
    /// (outermost first).
    pub trace: Vec<[f64; 2]>,
    /// Start-curve abscissa and section value used by the sweep (needed to
    /// re-solve members during intersection refinement).
    pub x0_curve: f64,
    pub x_end: f64,
}

impl ManifoldFamily {
    /// Unwrapped winding angle along the trace around `center`.
    pub fn unwrapped_angle(&self, center: [f64; 2]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trace.len());
        let mut prev = 0.0;
        for (i, p) in self.trace.iter().enumerate() {
            let mut th = (p[1] - center[1]).atan2(p[0] - center[0]);
            if i > 0 {
                while th - prev > std::f64::consts::PI {
                    th -= 2.0 * std::f64::consts::PI;
                }
                while th - prev < -std::f64::consts::PI {
                    th += 2.0 * std::f64::consts::PI;
                }
            }
            out.push(th);
            prev = th;
        }
        out
    }

    /// Estimated spiral core: endpoint of the deepest member.
    pub fn core(&self) -> [f64; 2] {
        *self.trace.last().expect("empty family")
    }
}

fn critical_manifold_y(p: &ParameterSet, x: f64) -> f64 {
    -x * x - x * x * x / (3.0 * p.lambda1)
}

/// Sweeps one slow-manifold family of the local normal form.
pub fn sweep_manifold(
    p: &ParameterSet,
    geom: &FoldGeometry,
    side: Side,
    opts: &SweepOptions,
) -> Result<ManifoldFamily> {
    if geom.phi <= 0.0 {
        return Err(Error::Window(format!(
            "slow drift phi = {} <= 0 (folded saddle / saddle-node): no rotational funnel to sweep",
            geom.phi
        )));
    }
    let base = build_field(FieldTag::NormalFormLocal, p, FieldExtras::default())?;
    let field: Box<dyn VectorField> = match side {
        Side::Attracting => Box::new(base),
        Side::Repelling => Box::new(OwnedReversed(base)),
    };
    let x0 = opts.x0_curve.unwrap_or(match side {
        Side::Attracting => 1.0,
        Side::Repelling => -1.0,
    });
    let a = geom.a_lin(p);
    let window = p.a0.sqrt() / a * p.eps.sqrt();
    let s_deep = opts.s_abs_max.unwrap_or(1.8 * window);
    let sign = match side {
        Side::Attracting => -1.0,
        Side::Repelling => 1.0,
    };
    let basis = GaussBasis::new();
    let y0 = critical_manifold_y(p, x0);

    // First member by forward integration to the section.
    let s = sign * opts.s_abs_min;
    let stop = Section::coordinate("sigma_end", 2, opts.x_end, -(sign as i8));
    let int_opts = IntegrateOptions { tol: Tol::new(1e-10, 1e-10), ..Default::default() };
    // Time budget: the slow drift covers the start offset plus margins.
    let t_budget = 20.0 + 5.0 * (s_deep + opts.s_abs_min) / (p.delta * geom.phi);
    let (traj, _) = integrate_to_section(
        field.as_ref(),
        &[x0, y0, s],
        0.0,
        t_budget,
        stop,
        &[],
        &int_opts,
    )
    .map_err(|e| Error::ContinuationStall(format!("first family member: {e}")))?;
    let mut sol = solution_from_samples(&traj.ts, &traj.states, 3, opts.n_mesh, &basis, 0.0);
    sol = solve_member(field.as_ref(), &basis, &sol, x0, y0, s, opts)?;

    let mut members = vec![FamilyMember { s, solution: sol.clone() }];
    let mut prev_sol = sol;
    let mut prev_prev: Option<(f64, CollocationSolution)> = None;
    let mut winding_est = 0.0;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut since_redist = 0usize;
    let mut stagnant = 0usize;

    while members.len() < opts.max_members {
        let s_cur = members.last().unwrap().s;
        if s_cur.abs() >= s_deep || winding_est > two_pi * opts.winding_budget {
            break;
        }
        // Endpoint trace frozen at the spiral core: nothing more to resolve.
        if members.len() >= 2 {
            let n = members.len();
            let e1 = members[n - 1].solution.end();
            let e0 = members[n - 2].solution.end();
            let move2 = (e1[0] - e0[0]).powi(2) + (e1[1] - e0[1]).powi(2);
            if move2 < 1e-22 {
                stagnant += 1;
                if stagnant >= 8 {
                    break;
                }
            } else {
                stagnant = 0;
            }
        }
        // Pace the family parameter so the endpoint advances a fixed angle
        // per member; the empirical winding rate of the endpoint trace is
        // about twice omega/(delta (phi + psi_chart z)) in chart scaling.
        let z = s_cur / p.eps.sqrt();
        let omega = (p.a0 - (a * z).powi(2)).max(0.02).sqrt();
        let drift = (geom.phi + geom.psi * p.eps.sqrt() * z).abs().max(0.3 * geom.phi);
        // Pacing rate carries an empirical factor 2 over the winding rate of
        // the endpoint; the budget accounting removes it again.
        let dtheta_ds = 2.0 * omega / (p.delta * drift * p.eps.sqrt());
        let mut ds = (two_pi / opts.points_per_winding) / dtheta_ds;
        ds = ds.min((s_deep - s_cur.abs()).max(1e-6) * 0.5 + 1e-6).min(0.02 * window.max(1e-4));
        let mut attempt = 0;
        loop {
            let s_new = s_cur + sign * ds;
            // Secant predictor.
            let mut init = prev_sol.clone();
            if let Some((s_old, ref sol_old)) = prev_prev {
                let ratio = (s_new - s_cur) / (s_cur - s_old);
                if ratio.is_finite() && sol_old.mesh.len() == init.mesh.len() {
                    for (v, w) in init.nodes.iter_mut().zip(&sol_old.nodes) {
                        *v += ratio * (*v - *w);
                    }
                    for (v, w) in init.stages.iter_mut().zip(&sol_old.stages) {
                        *v += ratio * (*v - *w);
                    }
                    init.t_total += ratio * (init.t_total - sol_old.t_total);
                }
            }
            match solve_member(field.as_ref(), &basis, &init, x0, y0, s_new, opts) {
                Ok(new_sol) => {
                    winding_est += 0.5 * dtheta_ds * ds;
                    prev_prev = Some((s_cur, prev_sol.clone()));
                    prev_sol = new_sol.clone();
                    members.push(FamilyMember { s: s_new, solution: new_sol });
                    since_redist += 1;
                    if since_redist >= 10 {
                        since_redist = 0;
                        let mesh = redistribute_mesh(&prev_sol, &basis);
                        let re = reinterpolate(&prev_sol, &basis, &mesh);
                        if let Ok(rs) =
                            solve_member(field.as_ref(), &basis, &re, x0, y0, s_new, opts)
                        {
                            prev_sol = rs.clone();
                            members.last_mut().unwrap().solution = rs;
                            prev_prev = None;
                        }
                    }
                    break;
                }
                Err(_) if attempt < 7 => {
                    attempt += 1;
                    ds *= 0.5;
                    if ds < 1e-14 {
                        break;
                    }
                }
                Err(e) => {
                    // Stall: return what we have if nontrivial, else error.
                    if members.len() > 3 {
                        let trace = trace_of(&members);
                        return Ok(ManifoldFamily { side, members, trace, x0_curve: x0, x_end: opts.x_end });
                    }
                    return Err(Error::ContinuationStall(format!(
                        "sweep stalled at member {} (s = {s_new}): {e}",
                        members.len()
                    )));
                }
            }
        }
    }
    let trace = trace_of(&members);
    Ok(ManifoldFamily { side, members, trace, x0_curve: x0, x_end: opts.x_end })
}

fn trace_of(members: &[FamilyMember]) -> Vec<[f64; 2]> {
    members
        .iter()
        .map(|m| {
            let e = m.solution.end();
            [e[0], e[1]]
        })
        .collect()
}

fn solve_member(
    field: &dyn VectorField,
    basis: &GaussBasis,
    init: &CollocationSolution,
    x0: f64,
    y0: f64,
    s: f64,
    opts: &SweepOptions,
) -> Result<CollocationSolution> {
    let x_end = opts.x_end;
    let bcs = SegmentBcs {
        start: vec![
            Box::new(move |u: &[f64]| u[0] - x0),
            Box::new(move |u: &[f64]| u[1] - y0),
            Box::new(move |u: &[f64]| u[2] - s),
        ],
        end: vec![Box::new(move |u: &[f64]| u[2] - x_end)],
    };
    let mut init = init.clone();
    // Make the initial guess satisfy the pinned start exactly.
    init.nodes[2] = s;
    let sol = solve_segment(field, basis, &init, &bcs, &opts.colloc)?;
    if sol.t_total <= 0.0 {
        return Err(Error::Collocation("non-positive segment time".into()));
    }
    Ok(sol)
}

struct OwnedReversed(crate::reductions::Field);

impl VectorField for OwnedReversed {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        ReversedField(&self.0).eval(state, out)
    }
    fn name(&self) -> String {
        format!("reversed({})", self.0.name())
    }
}

/// A transversal intersection of the attracting and repelling traces: a
/// secondary canard.
#[derive(Debug, Clone, Serialize)]
pub struct CanardIntersection {
    /// Location in the section (local normal-form x, y).
    pub x: f64,
    pub y: f64,
    /// Family parameters of the two intersecting members.
    pub s_attracting: f64,
    pub s_repelling: f64,
    /// Small-oscillation count of the assembled canard orbit.
    pub rotation: u32,
    /// Whether the oscillation train stayed above the numerical resolution
    /// floor, i.e. the count is trustworthy.
    pub rotation_resolved: bool,
    /// Smallest oscillation peak amplitude seen while counting.
    pub min_osc_amplitude: f64,
    /// Winding angle (radians) of the attracting trace from its outermost
    /// point to this intersection.
    pub winding_from_outermost: f64,
    /// Distance to the previous/next detected canard in the end section.
    pub gap_prev: Option<f64>,
    pub gap_next: Option<f64>,
    /// Spacing to the previous/next canard along the entry curve (the
    /// attracting family parameter), the measure the spacing bounds apply to.
    pub gap_entry_prev: Option<f64>,
    pub gap_entry_next: Option<f64>,
}

/// Detects secondary canards as intersections of the two traces in the end
/// section, refines each crossing by re-solving both family members at the
/// interpolated parameters, assigns rotation numbers by counting the
/// oscillations of the assembled canard orbit, and reports neighbor gaps.
pub fn detect_canards(
    p: &ParameterSet,
    geom: &FoldGeometry,
    fam_a: &ManifoldFamily,
    fam_r: &ManifoldFamily,
) -> Result<Vec<CanardIntersection>> {
    if fam_a.trace.len() < 3 || fam_r.trace.len() < 3 {
        return Ok(vec![]);
    }
    let basis = GaussBasis::new();
    let refine_opts = SweepOptions::default();
    let base_field = build_field(FieldTag::NormalFormLocal, p, FieldExtras::default())?;
    let field_a: Box<dyn VectorField> = Box::new(base_field);
    let base_field_r = build_field(FieldTag::NormalFormLocal, p, FieldExtras::default())?;
    let field_r: Box<dyn VectorField> = Box::new(OwnedReversed(base_field_r));
    let a_angles = fam_a.unwrapped_angle(fam_a.core());
    let mut raw: Vec<(usize, f64, usize, f64, [f64; 2])> = vec![];
    let noise_chord = 1e-10;
    for i in 0..fam_a.trace.len() - 1 {
        let (p1, p2) = (fam_a.trace[i], fam_a.trace[i + 1]);
        if chord2(p1, p2) < noise_chord * noise_chord {
            continue;
        }
        for j in 0..fam_r.trace.len() - 1 {
            let (q1, q2) = (fam_r.trace[j], fam_r.trace[j + 1]);
            if chord2(q1, q2) < noise_chord * noise_chord {
                continue;
            }
            if let Some((t, u, pt)) = seg_intersect(p1, p2, q1, q2) {
                raw.push((i, t, j, u, pt));
            }
        }
    }
    if raw.is_empty() {
        return Ok(vec![]);
    }
    // Order along the attracting trace from outermost to innermost.
    raw.sort_by(|a, b| {
        (a.0 as f64 + a.1)
            .partial_cmp(&(b.0 as f64 + b.1))
            .unwrap()
    });
    // Deduplicate crossings that share the same segment pair neighborhood.
    raw.dedup_by(|a, b| (a.0 as f64 + a.1 - b.0 as f64 - b.1).abs() < 0.5);
    let mut out: Vec<CanardIntersection> = vec![];
    for &(i, t, j, u, pt) in &raw {
        let s_a = fam_a.members[i].s * (1.0 - t) + fam_a.members[i + 1].s * t;
        let s_r = fam_r.members[j].s * (1.0 - u) + fam_r.members[j + 1].s * u;
        let winding = (a_angles[i] + t * (a_angles[i + 1] - a_angles[i]) - a_angles[0]).abs();
        // Assemble the canard orbit: attracting member to the section, then
        // the repelling member traversed backward (forward in real time).
        // Re-solve both members at the interpolated crossing parameters so
        // the two halves of the canard orbit meet at the same point.
        let ma_near = if t < 0.5 { &fam_a.members[i] } else { &fam_a.members[i + 1] };
        let mr_near = if u < 0.5 { &fam_r.members[j] } else { &fam_r.members[j + 1] };
        let sol_a = refine_member(field_a.as_ref(), &basis, fam_a, ma_near, s_a, &refine_opts)
            .unwrap_or_else(|_| ma_near.solution.clone());
        let sol_r = refine_member(field_r.as_ref(), &basis, fam_r, mr_near, s_r, &refine_opts)
            .unwrap_or_else(|_| mr_near.solution.clone());
        let (rotation, min_amp, collapsed) =
            count_canard_rotations(p, geom, &basis, &sol_a, &sol_r);
        out.push(CanardIntersection {
            x: pt[0],
            y: pt[1],
            s_attracting: s_a,
            s_repelling: s_r,
            rotation,
            rotation_resolved: !collapsed,
            min_osc_amplitude: min_amp,
            winding_from_outermost: winding,
            gap_prev: None,
            gap_next: None,
            gap_entry_prev: None,
            gap_entry_next: None,
        });
    }
    // Merge near-tangent double detections: crossings far closer in the
    // family parameter than the typical canard spacing are one canard.
    if out.len() >= 3 {
        let mut gaps: Vec<f64> = out
            .windows(2)
            .map(|w| (w[1].s_attracting - w[0].s_attracting).abs())
            .collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = gaps[gaps.len() / 2];
        let mut merged: Vec<CanardIntersection> = vec![];
        for c in out.into_iter() {
            match merged.last() {
                Some(prev)
                    if (c.s_attracting - prev.s_attracting).abs() < 0.25 * median => {}
                _ => merged.push(c),
            }
        }
        out = merged;
    }
    for k in 0..out.len() {
        if k > 0 {
            out[k].gap_prev = Some(dist2(&out[k], &out[k - 1]));
            out[k].gap_entry_prev = Some((out[k].s_attracting - out[k - 1].s_attracting).abs());
        }
        if k + 1 < out.len() {
            out[k].gap_next = Some(dist2(&out[k], &out[k + 1]));
            out[k].gap_entry_next = Some((out[k + 1].s_attracting - out[k].s_attracting).abs());
        }
    }
    Ok(out)
}

fn dist2(a: &CanardIntersection, b: &CanardIntersection) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn chord2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn refine_member(
    field: &dyn VectorField,
    basis: &GaussBasis,
    fam: &ManifoldFamily,
    near: &FamilyMember,
    s: f64,
    opts: &SweepOptions,
) -> Result<CollocationSolution> {
    let _ = basis;
    let y0 = critical_manifold_y_for(fam, near);
    solve_member(field, basis, &near.solution, fam.x0_curve, y0, s, opts)
}

fn critical_manifold_y_for(fam: &ManifoldFamily, near: &FamilyMember) -> f64 {
    // The start y is pinned on the critical manifold at x0; read it off the
    // stored member (exact by its boundary condition).
    let _ = fam;
    near.solution.start()[1]
}

/// Deviation level below which the oscillation train counts as numerically
/// collapsed onto the manifold.
pub const ROTATION_AMPLITUDE_FLOOR: f64 = 1e-12;

/// Counts the small oscillations of the canard orbit assembled from an
/// attracting segment and a (time-reversed) repelling segment: sign-change
/// pairs of the rectified fast deviation `x + A X`.  Also returns the
/// smallest arc peak seen, and whether the train ever collapsed below the
/// resolution floor for a sustained stretch (in which case the count is a
/// lower bound only).
fn count_canard_rotations(
    p: &ParameterSet,
    geom: &FoldGeometry,
    basis: &GaussBasis,
    sol_a: &CollocationSolution,
    sol_r: &CollocationSolution,
) -> (u32, f64, bool) {
    let a = geom.a_lin(p);
    let mut series: Vec<f64> = vec![];
    let (_, states_a) = sol_a.sample_series(basis, 6);
    for st in &states_a {
        series.push(st[0] + a * st[2]);
    }
    let (_, states_r) = sol_r.sample_series(basis, 6);
    for st in states_r.iter().rev() {
        series.push(st[0] + a * st[2]);
    }
    // Crossing indices of the deviation.
    let mut crossings: Vec<usize> = vec![];
    let mut last_sign = 0i8;
    for (idx, &v) in series.iter().enumerate() {
        let s = if v > 0.0 {
            1i8
        } else if v < 0.0 {
            -1i8
        } else {
            0
        };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                crossings.push(idx);
            }
            last_sign = s;
        }
    }
    let changes = crossings.len() as u32;
    // Per-arc peaks and collapse gauge: a count is trustworthy only if every
    // arc between crossings is a genuine half-oscillation, i.e. its peak
    // stands above the numerical noise floor and its interior does not sink
    // back to noise level (a sunk interior means oscillations were lost).
    let mut min_peak = f64::INFINITY;
    let mut collapsed = false;
    for w in crossings.windows(2) {
        let arc = &series[w[0]..w[1]];
        let peak = arc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        min_peak = min_peak.min(peak);
        if peak < 50.0 * ROTATION_AMPLITUDE_FLOOR {
            collapsed = true;
        }
        if arc.len() > 60 {
            let q = arc.len() / 4;
            let interior_min = arc[q..arc.len() - q]
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            // A genuine half-oscillation arc keeps its middle half near the
            // peak (half-sine shape, ratio ~0.6); a long arc whose interior
            // sinks well below its peak is a glued stretch where further
            // oscillations fell under the slow-manifold offset.
            if interior_min < 0.3 * peak {
                collapsed = true;
            }
        }
    }
    (changes / 2, min_peak, collapsed)
}

/// Full canard pipeline: classifies the folded singularity, and if it is a
/// node, sweeps both manifold families and detects their intersections.  A
/// folded saddle or saddle-node has no rotational sectors: the result is an
/// empty list.
pub fn canard_analysis(
    p: &ParameterSet,
    opts: &SweepOptions,
) -> Result<Vec<CanardIntersection>> {
    let geom = crate::geometry::geometry(p)?;
    let fs = crate::folded::classify_with_geometry(p, &geom, p.delta)?;
    if fs.kind != crate::folded::FoldedKind::FoldedNode {
        return Ok(vec![]);
    }
    let fam_a = sweep_manifold(p, &geom, Side::Attracting, opts)?;
    let fam_r = sweep_manifold(p, &geom, Side::Repelling, opts)?;
    detect_canards(p, &geom, &fam_a, &fam_r)
}

/// Proper segment intersection with parametric coordinates.
fn seg_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> Option<(f64, f64, [f64; 2])> {
    let r = [p2[0] - p1[0], p2[1] - p1[1]];
    let s = [q2[0] - q1[0], q2[1] - q1[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    let qp = [q1[0] - p1[0], q1[1] - p1[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u, [p1[0] + t * r[0], p1[1] + t * r[1]]))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_intersection_basics() {
        let hit = seg_intersect([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]).unwrap();
        assert!((hit.0 - 0.5).abs() < 1e-15);
        assert!((hit.2[0] - 0.5).abs() < 1e-15);
        assert!(seg_intersect([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]).is_none());
    }
}
