//! Named flow sections of the full system.
//!
//! With a small offset `eta` the four sections are
//! `in: {y = y_f - eta}`, `fold: {x = x_f}`,
//! `surge: {x = x_sing(X_max) + eta}` and `endsurge: {x = x_sing(gamma) - eta}`.

use crate::cubics;
use crate::error::Result;
use crate::geometry::FoldGeometry;
use crate::integrate::Section;
use crate::params::ParameterSet;

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_RHO: f64 = 0.3;

#[derive(Debug, Clone, Copy)]
pub struct SectionOffsets {
    pub eta: f64,
    /// Entry-section radius of the local normal form (`y = -rho^2`).
    pub rho: f64,
}

impl Default for SectionOffsets {
    fn default() -> Self {
        Self { eta: DEFAULT_ETA, rho: DEFAULT_RHO }
    }
}

pub fn sigma_in(geom: &FoldGeometry, eta: f64, direction: i8) -> Section {
    Section::coordinate("sigma_in", 1, geom.y_f - eta, direction)
}

pub fn sigma_fold(geom: &FoldGeometry, direction: i8) -> Section {
    Section::coordinate("sigma_f", 0, geom.x_f, direction)
}

pub fn sigma_surge(p: &ParameterSet, geom: &FoldGeometry, eta: f64, direction: i8) -> Result<Section> {
    let x = cubics::x_sing(geom.big_x_max, p)? + eta;
    Ok(Section::coordinate("sigma_surge", 0, x, direction))
}

/// The return section used for the global map: `x = x_sing(gamma) - eta`,
/// crossed upward late in the surge.
pub fn sigma_endsurge(
    p: &ParameterSet,
    geom: &FoldGeometry,
    eta: f64,
    direction: i8,
) -> Result<Section> {
    let x = cubics::x_sing(geom.gamma, p)? - eta;
    Ok(Section::coordinate("sigma_endsurge", 0, x, direction))
}

/// Abscissa of the endsurge section.
pub fn endsurge_x(p: &ParameterSet, geom: &FoldGeometry, eta: f64) -> Result<f64> {
    Ok(cubics::x_sing(geom.gamma, p)? - eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geometry;

    #[test]
    fn section_values() {
        let p = ParameterSet::reference();
        let geom = geometry(&p).unwrap();
        let s = sigma_endsurge(&p, &geom, 0.1, 1).unwrap();
        // x_sing(gamma) ~ -1.6351, so the section sits near -1.7351.
        let v = (s.func)(&[-1.7351, 0.0, 0.0, 0.0]);
        assert!(v.abs() < 2e-3, "{v}");
        let si = sigma_in(&geom, 0.1, 0);
        assert!((si.func)(&[0.0, geom.y_f - 0.1, 0.0, 0.0]).abs() < 1e-14);
    }
}
