//! The model cubics, their derivatives, and a robust real-cubic solver.
//!
//! Besides `f` and `g` this module houses `f_tilde(x) = -(a0 x + a1 f(x) + a2)/c`,
//! the value of `X` that places a secretor equilibrium at `x`, and
//! `x_sing(X)`, the middle of the three equilibrium abscissas.

use crate::error::{Error, Result};
use crate::params::ParameterSet;

pub fn f(p: &ParameterSet, x: f64) -> f64 {
    p.lambda3 * x * x * x + p.lambda1 * x
}

pub fn f_prime(p: &ParameterSet, x: f64) -> f64 {
    3.0 * p.lambda3 * x * x + p.lambda1
}

pub fn f_second(p: &ParameterSet, x: f64) -> f64 {
    6.0 * p.lambda3 * x
}

pub fn g(p: &ParameterSet, x: f64) -> f64 {
    p.mu3 * x * x * x + p.mu1 * x
}

pub fn g_prime(p: &ParameterSet, x: f64) -> f64 {
    3.0 * p.mu3 * x * x + p.mu1
}

pub fn g_second(p: &ParameterSet, x: f64) -> f64 {
    6.0 * p.mu3 * x
}

pub fn f_tilde(p: &ParameterSet, x: f64) -> f64 {
    -(p.a0 * x + p.a1 * f(p, x) + p.a2) / p.c
}

pub fn f_tilde_prime(p: &ParameterSet, x: f64) -> f64 {
    -(p.a0 + p.a1 * f_prime(p, x)) / p.c
}

/// One-shot evaluation of all six values at a point.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CubicValues {
    pub f: f64,
    pub f_prime: f64,
    pub g: f64,
    pub g_prime: f64,
    pub f_tilde: f64,
    pub f_tilde_prime: f64,
}

pub fn eval_cubics(x: f64, p: &ParameterSet) -> CubicValues {
    CubicValues {
        f: f(p, x),
        f_prime: f_prime(p, x),
        g: g(p, x),
        g_prime: g_prime(p, x),
        f_tilde: f_tilde(p, x),
        f_tilde_prime: f_tilde_prime(p, x),
    }
}

/// All real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending.
///
/// Uses the trigonometric closed form on the depressed cubic followed by one
/// Newton polish per root. Near-double roots are resolved by the sign of the
/// discriminant with a relative tolerance of 1e-12.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    if c3 == 0.0 {
        // Quadratic fallback.
        if c2 == 0.0 {
            if c1 == 0.0 {
                return vec![];
            }
            return vec![-c0 / c1];
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return vec![];
        }
        let s = disc.sqrt();
        let mut r = vec![(-c1 - s) / (2.0 * c2), (-c1 + s) / (2.0 * c2)];
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return r;
    }
    // Depress: x = t - c2/(3 c3), t^3 + p t + q = 0.
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    let scale = p.abs().powi(3).max(q * q).max(1e-300);
    let mut roots = if disc > -1e-12 * scale && p < 0.0 {
        // Three real roots (or a near-double pair): trigonometric form.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos();
        (0..3)
            .map(|k| m * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - shift)
            .collect::<Vec<_>>()
    } else {
        // One real root: Cardano via hyperbolic form.
        let t = if p == 0.0 {
            -q.cbrt()
        } else if p > 0.0 {
            let m = 2.0 * (p / 3.0).sqrt();
            let arg = 3.0 * q / (p * m);
            -m * (arg.asinh() / 3.0).sinh()
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q.abs() / (-p * m)).max(1.0);
            -q.signum() * m * (arg.acosh() / 3.0).cosh()
        };
        vec![t - shift]
    };
    // Newton polish on the original polynomial.
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let v = ((c3 * *r + c2) * *r + c1) * *r + c0;
            let d = (3.0 * c3 * *r + 2.0 * c2) * *r + c1;
            if d != 0.0 {
                let step = v / d;
                if step.is_finite() {
                    *r -= step;
                }
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10 * (1.0 + a.abs()));
    roots
}

/// The middle root of `a0 x + a1 f(x) + a2 + c X = 0` in `x`, i.e. the
/// abscissa of the middle secretor equilibrium at regulator value `X`.
pub fn x_sing(x_reg: f64, p: &ParameterSet) -> Result<f64> {
    // a1*lambda3 x^3 + (a0 + a1*lambda1) x + (a2 + c X) = 0
    let c3 = p.a1 * p.lambda3;
    let c1 = p.a0 + p.a1 * p.lambda1;
    let c0 = p.a2 + p.c * x_reg;
    // Depressed cubic: discriminant -4 p^3 - 27 q^2 with p = c1/c3, q = c0/c3.
    let pp = c1 / c3;
    let qq = c0 / c3;
    let disc = -4.0 * pp * pp * pp - 27.0 * qq * qq;
    let scale = pp.abs().powi(3).max(qq * qq).max(1e-300);
    if disc <= 1e-12 * scale {
        return Err(Error::FewerThanThreeIntersections(format!(
            "at X = {x_reg} the equilibrium cubic has discriminant {disc:.3e} <= 0"
        )));
    }
    let roots = cubic_real_roots(c3, 0.0, c1, c0);
    if roots.len() == 3 {
        return Ok(roots[1]);
    }
    // Fallback: bracket the middle root between the critical points of the
    // cubic, where it is monotone, and bisect.
    let xc = (-pp / 3.0).sqrt();
    let eval = |x: f64| (c3 * x * x + c1) * x + c0;
    let (mut lo, mut hi) = (-xc, xc);
    let (flo, fhi) = (eval(lo), eval(hi));
    if flo * fhi > 0.0 {
        return Err(Error::FewerThanThreeIntersections(format!(
            "bisection bracket failed at X = {x_reg}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) * eval(lo) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() < 1e-15 * (1.0 + mid_abs(lo, hi)) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mid_abs(a: f64, b: f64) -> f64 {
    (0.5 * (a + b)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ParameterSet {
        ParameterSet::reference()
    }

    #[test]
    fn values_at_zero() {
        let v = eval_cubics(0.0, &p());
        assert_eq!(v.f, 0.0);
        assert!((v.f_prime - 1.5).abs() < 1e-15);
        // f_tilde(0) = -0.8/0.69
        assert!((v.f_tilde - (-0.8 / 0.69)).abs() < 1e-12);
        assert!((v.f_tilde + 1.15942).abs() < 1e-4);
    }

    #[test]
    fn fold_point_of_f() {
        let pr = p();
        let x_f = (pr.lambda1 / (-3.0 * pr.lambda3)).sqrt();
        assert!((x_f - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(f_prime(&pr, x_f).abs() < 1e-14);
        assert!((f(&pr, x_f) - x_f).abs() < 1e-14); // y_f = (2/3) lambda1 x_f = x_f here
    }

    #[test]
    fn f_is_odd() {
        let pr = p();
        for i in 0..50 {
            let x = -2.0 + 4.0 * (i as f64) / 49.0;
            assert!((f(&pr, -x) + f(&pr, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pr = p();
        let h = 1e-6;
        for &x in &[-1.7, -0.3, 0.0, 0.9, 2.4] {
            let dfd = (f(&pr, x + h) - f(&pr, x - h)) / (2.0 * h);
            assert!((dfd - f_prime(&pr, x)).abs() < 1e-7);
            let dgd = (g(&pr, x + h) - g(&pr, x - h)) / (2.0 * h);
            assert!((dgd - g_prime(&pr, x)).abs() < 1e-7);
            let dtd = (f_tilde(&pr, x + h) - f_tilde(&pr, x - h)) / (2.0 * h);
            assert!((dtd - f_tilde_prime(&pr, x)).abs() < 1e-7);
        }
    }

    #[test]
    fn cubic_solver_known_roots() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let r = cubic_real_roots(1.0, -6.0, 11.0, -6.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // Single real root.
        let r = cubic_real_roots(1.0, 0.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_sing_odd_symmetry_when_a2_zero() {
        let mut pr = p();
        pr.a2 = 1e-300; // a2 must stay positive; effectively zero
        let m = x_sing(0.0, &pr).unwrap();
        assert!(m.abs() < 1e-10);
    }

    #[test]
    fn x_sing_matches_bracketing_bisection_oracle() {
        let pr = p();
        // Oracle: bisection of x^3 - 51.5 x - (40 + 34.5 X) on the middle
        // monotone section, independently of the production solver.
        let oracle = |x_reg: f64| -> f64 {
            let q = |x: f64| x * x * x - 51.5 * x - (40.0 + 34.5 * x_reg);
            let xc = (51.5f64 / 3.0).sqrt();
            let (mut lo, mut hi) = (-xc, xc);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if q(mid) * q(lo) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let gamma = (pr.mu1 / (-3.0 * pr.mu3)).sqrt();
        let x_max = 2.0 * gamma;
        let got_max = x_sing(x_max, &pr).unwrap();
        assert!((got_max - oracle(x_max)).abs() < 1e-9, "{got_max}");
        assert!((got_max + 2.7104).abs() < 2e-3, "{got_max}");
        let got_gamma = x_sing(gamma, &pr).unwrap();
        assert!((got_gamma - oracle(gamma)).abs() < 1e-9);
        assert!((got_gamma + 1.6351).abs() < 2e-3, "{got_gamma}");
        // Consistency: f_tilde(x_sing(X)) = X.
        for &xr in &[x_max, gamma, 0.0, -1.0, 2.0] {
            let m = x_sing(xr, &pr).unwrap();
            assert!((f_tilde(&pr, m) - xr).abs() < 1e-9);
        }
    }

    #[test]
    fn x_sing_fails_outside_three_root_region() {
        let pr = p();
        // For very large X the cubic has a single real root.
        assert!(x_sing(500.0, &pr).is_err());
    }
}
