//! The four structural hypotheses on the parameter set.
//!
//! H1: the regulator minimum lands just left of the secretor fold value
//! (`X_min <= X_f`, with a closeness band for visible small oscillations).
//! H2: at `X = -gamma` the secretor equilibrium sits on the middle branch.
//! H3: `X_max < X_SN`, so node and saddle persist at the surge onset.
//! H4: at `X = gamma` the node and saddle still exist.

use serde::Serialize;

use crate::cubics;
use crate::error::Result;
use crate::geometry::{geometry, FoldGeometry};
use crate::params::ParameterSet;

pub const DEFAULT_H1_CLOSENESS_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// Signed slack of the defining inequality; positive means it holds.
    pub margin: f64,
}

impl HypothesisCheck {
    fn from_margin(margin: f64) -> Self {
        Self { holds: margin > 0.0, margin }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisReport {
    pub h1: HypothesisCheck,
    pub h2: HypothesisCheck,
    pub h3: HypothesisCheck,
    pub h4: HypothesisCheck,
    /// Gap `X_f - X_min`; H1 additionally wants this small.
    pub h1_gap: f64,
    /// True when the gap exceeds the closeness band, i.e. the inequality
    /// holds but small oscillations may be invisible.
    pub h1_closeness_warning: bool,
    pub all_hold: bool,
}

pub fn check_hypotheses(p: &ParameterSet) -> Result<HypothesisReport> {
    check_hypotheses_with_band(p, DEFAULT_H1_CLOSENESS_BAND)
}

pub fn check_hypotheses_with_band(p: &ParameterSet, band: f64) -> Result<HypothesisReport> {
    let geo = geometry(p)?;
    Ok(report_from_geometry(p, &geo, band))
}

pub fn report_from_geometry(p: &ParameterSet, geo: &FoldGeometry, band: f64) -> HypothesisReport {
    let h1_gap = geo.big_x_f - geo.big_x_min;
    let h1 = HypothesisCheck::from_margin(h1_gap);
    // H2: -a0 x_f + a1 f(-x_f) + a2 - c gamma < 0
    let v2 = -p.a0 * geo.x_f + p.a1 * cubics::f(p, -geo.x_f) + p.a2 - p.c * geo.gamma;
    let h2 = HypothesisCheck::from_margin(-v2);
    // H3: X_max < X_SN
    let h3 = HypothesisCheck::from_margin(geo.big_x_sn - geo.big_x_max);
    // H4: -a0 x_f + a1 f(-x_f) + a2 + c gamma > 0
    let v4 = -p.a0 * geo.x_f + p.a1 * cubics::f(p, -geo.x_f) + p.a2 + p.c * geo.gamma;
    let h4 = HypothesisCheck::from_margin(v4);
    let all_hold = h1.holds && h2.holds && h3.holds && h4.holds;
    HypothesisReport {
        h1,
        h2,
        h3,
        h4,
        h1_gap,
        h1_closeness_warning: h1.holds && h1_gap > band,
        all_hold,
    }
}
