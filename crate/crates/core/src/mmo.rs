//! Trajectory segmentation into pulsatility / surge / pause / transition,
//! (p, s) counting, and location of the attracting periodic orbit through
//! the endsurge return map.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{geometry, FoldGeometry};
use crate::hypotheses::check_hypotheses;
use crate::integrate::{integrate_to_section, IntegrateOptions, Tol, Trajectory};
use crate::params::ParameterSet;
use crate::reductions::{build_field, FieldExtras, FieldTag};
use crate::sections;

/// Classifier thresholds, all in units of the model variables.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    /// Surge whenever `y` exceeds this (default `5 y_f`).
    pub y_surge: f64,
    /// Pulse when the oscillation's y-swing exceeds this (default `0.5 y_f`).
    pub a_pulse: f64,
    /// Small oscillation when the y-swing stays below this (default `0.1 y_f`).
    pub a_small: f64,
    /// Pause requires the small oscillations to sit within this band of `x_f`.
    pub x_fold_band: f64,
    /// Prominence filter for local maxima of `x` (default `a_small / 2`).
    pub x_prominence: f64,
    /// Pause oscillations are also filtered relative to the most prominent
    /// one: consecutive fold oscillations shrink by a large structural
    /// factor, so counting only those within `x_prominence_rel` of the
    /// largest makes the count robust against sub-dominant oscillations
    /// drifting through the absolute floor.
    pub x_prominence_rel: f64,
}

impl Thresholds {
    pub fn from_geometry(geom: &FoldGeometry) -> Self {
        let y_f = geom.y_f;
        Self {
            y_surge: 5.0 * y_f,
            a_pulse: 0.5 * y_f,
            a_small: 0.1 * y_f,
            x_fold_band: 0.5,
            x_prominence: 0.05 * y_f,
            x_prominence_rel: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseKind {
    Pulsatility,
    Surge,
    Pause,
    Transition,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseInterval {
    pub kind: PhaseKind,
    pub t_start: f64,
    pub t_end: f64,
    pub y_max: f64,
    pub y_min: f64,
}

/// Pulse / small-oscillation counts with the phase partition of the span.
#[derive(Debug, Clone, Serialize)]
pub struct MmoSignature {
    pub p: usize,
    pub s: usize,
    pub phases: Vec<PhaseInterval>,
    /// Oscillations with swing between `a_small` and `a_pulse`.
    pub ambiguous: usize,
}

impl MmoSignature {
    pub fn label(&self) -> String {
        format!("({},{})", self.p, self.s)
    }
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    left: usize,
    right: usize,
    /// Inter-surge segment the peak belongs to.
    segment: usize,
    swing: f64,
    prominence: f64,
    near_fold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PeakClass {
    Pulse,
    Small,
    Ambiguous,
}

/// Classifies a sampled trajectory given as parallel arrays. `xs`, `ys`,
/// `x_regs` are the secretor fast/slow and regulator fast coordinates.
pub fn classify_series(
    ts: &[f64],
    xs: &[f64],
    ys: &[f64],
    x_regs: &[f64],
    geom: &FoldGeometry,
    thr: &Thresholds,
) -> Result<MmoSignature> {
    let n = ts.len();
    if n < 3 {
        return Err(Error::TrajectoryTooShort(format!("{n} samples")));
    }
    let x_span = xs.iter().cloned().fold(f64::INFINITY, f64::min)
        ..=xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let xr_min = x_regs.iter().cloned().fold(f64::INFINITY, f64::min);
    let xr_max = x_regs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let essentially_constant =
        (x_span.end() - x_span.start()).abs() < 1e-9 && (xr_max - xr_min).abs() < 1e-9;
    if essentially_constant {
        return Ok(MmoSignature {
            p: 0,
            s: 0,
            phases: vec![PhaseInterval {
                kind: PhaseKind::Transition,
                t_start: ts[0],
                t_end: ts[n - 1],
                y_max: ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                y_min: ys.iter().cloned().fold(f64::INFINITY, f64::min),
            }],
            ambiguous: 0,
        });
    }
    if !(xr_min < -geom.gamma && xr_max > geom.gamma) {
        return Err(Error::TrajectoryTooShort(format!(
            "X range [{xr_min:.3}, {xr_max:.3}] does not span (-gamma, gamma)"
        )));
    }

    // Surge intervals: maximal runs with y above the surge threshold.
    let mut surges: Vec<(usize, usize)> = vec![];
    let mut i = 0;
    while i < n {
        if ys[i] > thr.y_surge {
            let start = i;
            while i < n && ys[i] > thr.y_surge {
                i += 1;
            }
            surges.push((start, i - 1));
        } else {
            i += 1;
        }
    }

    let in_surge = |idx: usize| surges.iter().any(|&(a, b)| idx >= a && idx <= b);
    // Walks may not cross surge intervals, so oscillation windows and their
    // amplitude measurements stay within one inter-surge segment.
    let surge_left_bound = |idx: usize| {
        surges
            .iter()
            .filter(|&&(_, b)| b < idx)
            .map(|&(_, b)| b + 1)
            .max()
            .unwrap_or(0)
    };
    let surge_right_bound = |idx: usize| {
        surges
            .iter()
            .filter(|&&(a, _)| a > idx)
            .map(|&(a, _)| a.saturating_sub(1))
            .min()
            .unwrap_or(n - 1)
    };

    // Local maxima of x with prominence filtering.
    let mut peaks: Vec<Peak> = vec![];
    for i in 1..n - 1 {
        if !(xs[i] > xs[i - 1] && xs[i] >= xs[i + 1]) {
            continue;
        }
        if in_surge(i) {
            continue;
        }
        let lo_bound = surge_left_bound(i);
        let hi_bound = surge_right_bound(i);
        // Walk left/right to the bounding troughs (lower ground before a
        // higher peak) to get the prominence.
        let mut left = i;
        let mut left_min = xs[i];
        let mut j = i;
        while j > lo_bound {
            j -= 1;
            if xs[j] < left_min {
                left_min = xs[j];
                left = j;
            }
            if xs[j] > xs[i] {
                break;
            }
        }
        let mut right = i;
        let mut right_min = xs[i];
        let mut j = i;
        while j < hi_bound {
            j += 1;
            if xs[j] < right_min {
                right_min = xs[j];
                right = j;
            }
            if xs[j] > xs[i] {
                break;
            }
        }
        let prominence = xs[i] - left_min.max(right_min);
        if prominence < thr.x_prominence {
            continue;
        }
        // Amplitude: y-swing over each flank separately, taking the smaller
        // one so a neighboring surge ramp or jump does not inflate it.
        let yswing = |a: usize, b: usize| {
            let mut y_max = f64::NEG_INFINITY;
            let mut y_min = f64::INFINITY;
            for k in a..=b {
                y_max = y_max.max(ys[k]);
                y_min = y_min.min(ys[k]);
            }
            y_max - y_min
        };
        let swing = yswing(left.min(i), i.max(left)).min(yswing(i, right.max(i)));
        peaks.push(Peak {
            left,
            right,
            segment: lo_bound,
            swing,
            prominence,
            near_fold: (xs[i] - geom.x_f).abs() <= thr.x_fold_band,
        });
    }

    // Dominant prominence among fold oscillations, per inter-surge segment.
    let mut seg_max_prom: std::collections::BTreeMap<usize, f64> = Default::default();
    for pk in &peaks {
        if pk.swing < thr.a_pulse && pk.near_fold {
            let e = seg_max_prom.entry(pk.segment).or_insert(0.0);
            *e = e.max(pk.prominence);
        }
    }
    let class_of = |pk: &Peak| {
        if pk.swing >= thr.a_pulse {
            PeakClass::Pulse
        } else if pk.swing <= thr.a_small && pk.near_fold {
            let dominant = seg_max_prom.get(&pk.segment).copied().unwrap_or(0.0);
            if pk.prominence >= thr.x_prominence_rel * dominant {
                PeakClass::Small
            } else {
                PeakClass::Ambiguous
            }
        } else {
            PeakClass::Ambiguous
        }
    };

    let p_count = peaks.iter().filter(|pk| class_of(pk) == PeakClass::Pulse).count();
    let ambiguous = peaks.iter().filter(|pk| class_of(pk) == PeakClass::Ambiguous).count();

    // Group consecutive same-class peaks into intervals.
    let mut intervals: Vec<(PhaseKind, usize, usize)> = surges
        .iter()
        .map(|&(a, b)| (PhaseKind::Surge, a, b))
        .collect();
    let mut s_count = 0usize;
    let mut k = 0;
    while k < peaks.len() {
        let cls = class_of(&peaks[k]);
        if cls == PeakClass::Ambiguous {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < peaks.len()
            && class_of(&peaks[k + 1]) == cls
            && peaks[k + 1].segment == peaks[k].segment
        {
            k += 1;
        }
        let (a, b) = (peaks[start].left, peaks[k].right);
        match cls {
            PeakClass::Pulse => intervals.push((PhaseKind::Pulsatility, a, b)),
            PeakClass::Small => {
                s_count += k - start + 1;
                intervals.push((PhaseKind::Pause, a, b));
            }
            PeakClass::Ambiguous => unreachable!(),
        }
        k += 1;
    }
    intervals.sort_by_key(|x| x.1);
    // Clip overlaps in index space, then fill gaps with transitions.
    let mut clipped: Vec<(PhaseKind, usize, usize)> = vec![];
    for (kind, a, b) in intervals {
        let a = match clipped.last() {
            Some(&(_, _, prev_b)) if a <= prev_b => prev_b + 1,
            _ => a,
        };
        if a > b {
            continue;
        }
        clipped.push((kind, a, b));
    }
    let mut phases: Vec<PhaseInterval> = vec![];
    let mut cursor = 0usize;
    let make = |kind, a: usize, b: usize| {
        let mut y_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        for k in a..=b {
            y_max = y_max.max(ys[k]);
            y_min = y_min.min(ys[k]);
        }
        PhaseInterval { kind, t_start: ts[a], t_end: ts[b], y_max, y_min }
    };
    for &(kind, a, b) in &clipped {
        if a > cursor {
            phases.push(make(PhaseKind::Transition, cursor, a));
        }
        phases.push(make(kind, a, b));
        cursor = b;
    }
    if cursor < n - 1 {
        phases.push(make(PhaseKind::Transition, cursor, n - 1));
    }

    Ok(MmoSignature { p: p_count, s: s_count, phases, ambiguous })
}

/// Classifies an integrated trajectory of the full system.
pub fn classify_trajectory(
    traj: &Trajectory,
    geom: &FoldGeometry,
    thr: &Thresholds,
) -> Result<MmoSignature> {
    let xs: Vec<f64> = traj.states.iter().map(|s| s[0]).collect();
    let ys: Vec<f64> = traj.states.iter().map(|s| s[1]).collect();
    let xr: Vec<f64> = traj.states.iter().map(|s| s[2]).collect();
    classify_series(&traj.ts, &xs, &ys, &xr, geom, thr)
}

#[derive(Debug, Clone)]
pub struct OrbitOptions {
    pub tol: Tol,
    pub eta: f64,
    pub max_iterations: usize,
    /// Time budget per return (in the slowest time scale).
    pub time_budget: f64,
    pub thresholds: Option<Thresholds>,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            tol: Tol::new(1e-10, 1e-10),
            eta: sections::DEFAULT_ETA,
            max_iterations: 30,
            time_budget: 60.0,
            thresholds: None,
        }
    }
}

/// One application of the endsurge return map: integrates the full system
/// from `state` (on the section) to the next upward crossing.
pub fn return_map(
    p: &ParameterSet,
    state: &[f64],
    opts: &OrbitOptions,
) -> Result<(Vec<f64>, Trajectory)> {
    let rep = check_hypotheses(p)?;
    if !rep.all_hold {
        return Err(Error::Domain(format!(
            "return map requires H1-H4; margins: H1 {:.3}, H2 {:.3}, H3 {:.3}, H4 {:.3}",
            rep.h1.margin, rep.h2.margin, rep.h3.margin, rep.h4.margin
        )));
    }
    let geom = geometry(p)?;
    let field = build_field(FieldTag::Full4D, p, FieldExtras::default())?;
    let stop = sections::sigma_endsurge(p, &geom, opts.eta, 1)?;
    let inner = vec![
        sections::sigma_in(&geom, opts.eta, 0),
        sections::sigma_fold(&geom, 0),
        sections::sigma_surge(p, &geom, opts.eta, 0)?,
    ];
    let int_opts = IntegrateOptions { tol: opts.tol, ..Default::default() };
    let (traj, ev) = integrate_to_section(
        &field,
        state,
        0.0,
        opts.time_budget,
        stop,
        &inner,
        &int_opts,
    )?;
    Ok((ev.state, traj))
}

/// The located attracting periodic orbit.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub period: f64,
    pub anchor: Vec<f64>,
    /// Linearized return-map contraction along the section, measured by a
    /// small transverse perturbation of the anchor.
    pub contraction_ratio: f64,
    pub signature: MmoSignature,
    /// Scaled section distance at convergence.
    pub residual: f64,
    pub iterations: usize,
    /// Successive iterate separations.
    pub history: Vec<f64>,
}

fn scaled_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

/// Fixed-point iteration of the return map from a seed state anywhere in the
/// basin: burns in to the section, iterates to convergence, then measures the
/// empirical contraction and the orbit signature.
pub fn find_periodic(p: &ParameterSet, seed: &[f64], opts: &OrbitOptions) -> Result<PeriodicOrbit> {
    let geom = geometry(p)?;
    let field = build_field(FieldTag::Full4D, p, FieldExtras::default())?;
    let int_opts = IntegrateOptions { tol: opts.tol, ..Default::default() };
    // Burn in: reach the section once.
    let stop = sections::sigma_endsurge(p, &geom, opts.eta, 1)?;
    let (_, ev) =
        integrate_to_section(&field, seed, 0.0, 2.0 * opts.time_budget, stop, &[], &int_opts)?;
    let mut current = ev.state;
    let mut history = vec![];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let (next, _traj) = return_map(p, &current, opts)?;
        let d = scaled_dist(&next, &current);
        history.push(d);
        current = next;
        if d < 1e-8 {
            residual = d;
            break;
        }
    }
    if residual.is_infinite() {
        return Err(Error::Nonconvergence(format!(
            "return map did not converge in {} iterations (last distance {:.3e})",
            opts.max_iterations,
            history.last().copied().unwrap_or(f64::NAN)
        )));
    }
    // Linearized contraction: perturb transversally on the section (x is
    // pinned by the section; use the y component).
    let h = 1e-4;
    let mut pert = current.clone();
    pert[1] += h;
    let (img_pert, _) = return_map(p, &pert, opts)?;
    let (img_anchor, traj) = return_map(p, &current, opts)?;
    let num: f64 = img_pert
        .iter()
        .zip(&img_anchor)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let contraction_ratio = num / h;
    let period = traj.t_end() - traj.t_start();
    let thr = opts.thresholds.unwrap_or_else(|| Thresholds::from_geometry(&geom));
    let signature = classify_trajectory(&traj, &geom, &thr)?;
    Ok(PeriodicOrbit {
        period,
        anchor: current,
        contraction_ratio,
        signature,
        residual,
        iterations,
        history,
    })
}
