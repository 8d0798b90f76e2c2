//! Derived geometric constants of the fold structure.

use serde::Serialize;

use crate::cubics;
use crate::error::{Error, Result};
use crate::params::ParameterSet;

/// Geometric constants derived from a parameter set.
///
/// `x_f` is the right fold of the secretor cubic, `gamma` the right knee of
/// the regulator cubic, `big_x_f` the regulator value placing the secretor
/// equilibrium at the fold, `big_x_sn` the saddle-node value, `alpha` the
/// local rescale factor, and `phi`, `psi` the value and slope of the slow
/// drift `(X + b1 g(X) + b2)/g'(X)` at `big_x_f`.  `big_x_min`/`big_x_max`
/// are the singular-limit extremes of `X` along the regulator relaxation
/// cycle (jump landing points).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FoldGeometry {
    pub x_f: f64,
    pub y_f: f64,
    pub gamma: f64,
    #[serde(rename = "X_f")]
    pub big_x_f: f64,
    #[serde(rename = "X_SN")]
    pub big_x_sn: f64,
    pub alpha: f64,
    pub phi: f64,
    pub psi: f64,
    pub x_c_minus: f64,
    pub x_c_plus: f64,
    #[serde(rename = "X_min")]
    pub big_x_min: f64,
    #[serde(rename = "X_max")]
    pub big_x_max: f64,
}

impl FoldGeometry {
    /// `A = alpha c / a0`, the slope of the fold-region critical manifold.
    pub fn a_lin(&self, p: &ParameterSet) -> f64 {
        self.alpha * p.c / p.a0
    }
}

/// Slow drift `(X + b1 g(X) + b2) / g'(X)` of the regulator on its cubic.
pub fn slow_drift(p: &ParameterSet, x_reg: f64) -> f64 {
    (x_reg + p.b1 * cubics::g(p, x_reg) + p.b2) / cubics::g_prime(p, x_reg)
}

fn slow_drift_derivative(p: &ParameterSet, x_reg: f64) -> f64 {
    let g = cubics::g(p, x_reg);
    let gp = cubics::g_prime(p, x_reg);
    let gpp = cubics::g_second(p, x_reg);
    let num = (1.0 + p.b1 * gp) * gp - (x_reg + p.b1 * g + p.b2) * gpp;
    num / (gp * gp)
}

/// Computes all derived fold constants. Fails if the regulator fold
/// configuration is degenerate (`g'(X_f) = 0`).
pub fn geometry(p: &ParameterSet) -> Result<FoldGeometry> {
    p.validate()?;
    let x_f = (p.lambda1 / (-3.0 * p.lambda3)).sqrt();
    let y_f = cubics::f(p, x_f);
    let gamma = (p.mu1 / (-3.0 * p.mu3)).sqrt();
    let big_x_f = -(p.a0 * x_f + p.a1 * y_f + p.a2) / p.c;
    let big_x_sn = (p.a0 + p.a1 * p.lambda1).powi(2) / (4.0 * p.a1 * p.c * p.lambda1);
    let alpha = (-3.0 * p.lambda1 * p.lambda3).sqrt();
    let gp_at_xf = cubics::g_prime(p, big_x_f);
    if gp_at_xf.abs() < 1e-12 {
        return Err(Error::DegenerateGeometry(format!(
            "g'(X_f) = {gp_at_xf:.3e}: regulator fold coincides with X_f"
        )));
    }
    let phi = slow_drift(p, big_x_f);
    let psi = slow_drift_derivative(p, big_x_f);
    // Critical points of f_tilde: x^2 = -(a0 + a1 lambda1)/(3 a1 lambda3).
    let xc2 = -(p.a0 + p.a1 * p.lambda1) / (3.0 * p.a1 * p.lambda3);
    let xc = xc2.sqrt();
    // Jump landing points: g(X) = g(gamma) left of -gamma and
    // g(X) = g(-gamma) right of gamma.
    let big_x_min = jump_landing(p, gamma, true)?;
    let big_x_max = jump_landing(p, -gamma, false)?;
    Ok(FoldGeometry {
        x_f,
        y_f,
        gamma,
        big_x_f,
        big_x_sn,
        alpha,
        phi,
        psi,
        x_c_minus: -xc,
        x_c_plus: xc,
        big_x_min,
        big_x_max,
    })
}

/// Root of `g(X) = g(knee)` on the branch opposite the knee.
fn jump_landing(p: &ParameterSet, knee: f64, left_branch: bool) -> Result<f64> {
    let target = cubics::g(p, knee);
    let roots = cubics::cubic_real_roots(p.mu3, 0.0, p.mu1, -target);
    let gamma = (p.mu1 / (-3.0 * p.mu3)).sqrt();
    let pick = roots
        .into_iter()
        .find(|&r| if left_branch { r < -gamma + 1e-9 && (r - knee).abs() > 1e-6 } else { r > gamma - 1e-9 && (r - knee).abs() > 1e-6 });
    pick.ok_or_else(|| {
        Error::DegenerateGeometry(format!("no jump landing found from knee {knee}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let p = ParameterSet::reference();
        let geo = geometry(&p).unwrap();
        assert!((geo.x_f - 0.707107).abs() < 1e-6);
        assert!((geo.gamma - 1.154701).abs() < 1e-6);
        assert!((geo.big_x_f - (-2.204708)).abs() < 1e-5);
        assert!((geo.big_x_sn - 12.81280).abs() < 1e-4);
        assert!((geo.alpha - 2.121320).abs() < 1e-6);
        assert!((geo.phi - 0.283940).abs() < 1e-5);
        assert!((geo.psi - 0.260439).abs() < 1e-5);
        assert!((geo.big_x_min - (-2.309401)).abs() < 1e-6);
        assert!((geo.big_x_max - 2.309401).abs() < 1e-6);
    }

    #[test]
    fn fold_conditions_hold() {
        let p = ParameterSet::reference();
        let geo = geometry(&p).unwrap();
        assert!(cubics::f_prime(&p, geo.x_f).abs() < 1e-12);
        assert!(cubics::f_prime(&p, -geo.x_f).abs() < 1e-12);
        assert!(cubics::g_prime(&p, geo.gamma).abs() < 1e-12);
        assert!(cubics::g_prime(&p, -geo.gamma).abs() < 1e-12);
        assert!(geo.big_x_min < -geo.gamma && -geo.gamma < geo.gamma && geo.gamma < geo.big_x_max);
        assert!(geo.x_c_minus < 0.0 && geo.x_c_plus > 0.0);
        assert!(cubics::f_tilde_prime(&p, geo.x_c_minus).abs() < 1e-10);
        assert!(cubics::f_tilde_prime(&p, geo.x_c_plus).abs() < 1e-10);
    }

    #[test]
    fn symmetric_cubic_jump_identity() {
        // For the odd cubic family, g(2 gamma) = g(-gamma) exactly.
        let p = ParameterSet::reference();
        let geo = geometry(&p).unwrap();
        assert!((geo.big_x_max - 2.0 * geo.gamma).abs() < 1e-10);
        assert!((geo.big_x_min + 2.0 * geo.gamma).abs() < 1e-10);
        let mut q = p;
        q.mu1 = 2.7;
        q.mu3 = -0.4;
        let geo = geometry(&q).unwrap();
        assert!((geo.big_x_max - 2.0 * geo.gamma).abs() < 1e-10);
    }

    #[test]
    fn unit_fold_for_matched_cubic() {
        let mut p = ParameterSet::reference();
        p.lambda1 = 3.0;
        p.lambda3 = -1.0;
        let geo = geometry(&p).unwrap();
        assert!((geo.x_f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invariants_hold_across_sampled_parameter_sets() {
        // Deterministic xorshift sampling of valid parameter boxes.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = move |lo: f64, hi: f64| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            lo + (hi - lo) * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        let mut checked = 0;
        for _ in 0..40 {
            let p = ParameterSet {
                a0: rnd(0.5, 2.0),
                a1: rnd(0.01, 0.1),
                a2: rnd(0.3, 1.2),
                c: rnd(0.3, 1.5),
                b1: rnd(-0.2, 0.2),
                b2: rnd(-1.5, -0.1),
                lambda1: rnd(0.5, 3.0),
                lambda3: rnd(-2.0, -0.5),
                mu1: rnd(1.0, 5.0),
                mu3: rnd(-2.0, -0.5),
                eps: 0.05,
                delta: 0.1,
            };
            let geo = match geometry(&p) {
                Ok(g) => g,
                Err(_) => continue, // degenerate g'(X_f) configurations are rejected
            };
            checked += 1;
            assert!(cubics::f_prime(&p, geo.x_f).abs() < 1e-12);
            assert!(cubics::g_prime(&p, geo.gamma).abs() < 1e-12);
            assert!(
                geo.big_x_min < -geo.gamma && geo.gamma < geo.big_x_max,
                "cycle extremes out of order for {p:?}"
            );
            assert!(geo.x_c_minus < 0.0 && 0.0 < geo.x_c_plus);
            assert!(cubics::f_tilde_prime(&p, geo.x_c_minus).abs() < 1e-10);
            assert!(cubics::f_tilde_prime(&p, geo.x_c_plus).abs() < 1e-10);
            // psi against a central difference.
            let h = 1e-6;
            let fd =
                (slow_drift(&p, geo.big_x_f + h) - slow_drift(&p, geo.big_x_f - h)) / (2.0 * h);
            assert!(((geo.psi - fd) / fd).abs() < 1e-5, "psi mismatch for {p:?}");
            // x_sing consistency where defined.
            for i in 0..5 {
                let xr = geo.big_x_min + (geo.big_x_max - geo.big_x_min) * i as f64 / 4.0;
                if let Ok(mid) = cubics::x_sing(xr, &p) {
                    assert!(
                        (cubics::f_tilde(&p, mid) - xr).abs() < 1e-9,
                        "x_sing inconsistency for {p:?}"
                    );
                }
            }
        }
        assert!(checked >= 25, "only {checked} parameter sets admissible");
    }

    #[test]
    fn psi_matches_central_difference() {
        let p = ParameterSet::reference();
        let geo = geometry(&p).unwrap();
        let h = 1e-6;
        let fd = (slow_drift(&p, geo.big_x_f + h) - slow_drift(&p, geo.big_x_f - h)) / (2.0 * h);
        assert!(
            ((geo.psi - fd) / fd).abs() < 1e-6,
            "psi {} vs fd {}",
            geo.psi,
            fd
        );
        // Same check with b1 nonzero to exercise the full derivative formula.
        let mut q = p;
        q.b1 = 0.07;
        let geo = geometry(&q).unwrap();
        let fd = (slow_drift(&q, geo.big_x_f + h) - slow_drift(&q, geo.big_x_f - h)) / (2.0 * h);
        assert!(((geo.psi - fd) / fd).abs() < 1e-6);
    }
}
