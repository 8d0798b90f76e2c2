//! Model parameters and the full four-dimensional state.
//!
//! The model couples two FitzHugh-Nagumo style oscillators: a fast pair
//! `(x, y)` (the secretor) driven through the linear term `c X` by a slow
//! pair `(X, Y)` (the regulator).  The cubics `f` and `g` are fixed to the
//! family `f(x) = lambda3 x^3 + lambda1 x`, `g(X) = mu3 X^3 + mu1 X`.
//! The two singular parameters `eps` and `delta` set the time-scale
//! separations: `x` evolves at rate `1/(eps*delta)`, `y` and `X` at `1/delta`
//! and `Y` at rate one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All model constants plus the two singular parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub b1: f64,
    pub b2: f64,
    pub lambda1: f64,
    pub lambda3: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub eps: f64,
    pub delta: f64,
}

impl ParameterSet {
    /// Validates every sign and range constraint, returning a descriptive
    /// error for the first violation found.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("c", self.c),
            ("lambda1", self.lambda1),
            ("mu1", self.mu1),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let negative = [("lambda3", self.lambda3), ("mu3", self.mu3)];
        for (name, v) in negative {
            if !(v < 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be negative and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("b1", self.b1), ("b2", self.b2)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Validated constructor from raw values.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a0: f64,
        a1: f64,
        a2: f64,
        c: f64,
        b1: f64,
        b2: f64,
        lambda1: f64,
        lambda3: f64,
        mu1: f64,
        mu3: f64,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        let p = Self { a0, a1, a2, c, b1, b2, lambda1, lambda3, mu1, mu3, eps, delta };
        p.validate()?;
        Ok(p)
    }

    /// The reference parameter set used throughout: c = 0.69, a0 = 1,
    /// a1 = 0.02, a2 = 0.8, b1 = 0, b2 = -0.8, lambda3 = -1, lambda1 = 1.5,
    /// mu3 = -1, mu1 = 4, with desk-scale eps = 0.05, delta = 0.1.
    pub fn reference() -> Self {
        Self {
            a0: 1.0,
            a1: 0.02,
            a2: 0.8,
            c: 0.69,
            b1: 0.0,
            b2: -0.8,
            lambda1: 1.5,
            lambda3: -1.0,
            mu1: 4.0,
            mu3: -1.0,
            eps: 0.05,
            delta: 0.1,
        }
    }

    pub fn with_eps_delta(mut self, eps: f64, delta: f64) -> Self {
        self.eps = eps;
        self.delta = delta;
        self
    }

    /// Sets a field by name; used by the CLI `--param key=value` overrides.
    pub fn set_by_name(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "a0" => self.a0 = value,
            "a1" => self.a1 = value,
            "a2" => self.a2 = value,
            "c" => self.c = value,
            "b1" => self.b1 = value,
            "b2" => self.b2 = value,
            "lambda1" => self.lambda1 = value,
            "lambda3" => self.lambda3 = value,
            "mu1" => self.mu1 = value,
            "mu3" => self.mu3 = value,
            "eps" => self.eps = value,
            "delta" => self.delta = value,
            other => {
                return Err(Error::InvalidParameter(format!("unknown parameter `{other}`")))
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: ParameterSet =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("parameter file: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// Full 4D state: secretor `(x, y)`, regulator `(X, Y)` stored as
/// `(x_reg, y_reg)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State4 {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "X")]
    pub x_reg: f64,
    #[serde(rename = "Y")]
    pub y_reg: f64,
}

impl State4 {
    pub fn new(x: f64, y: f64, x_reg: f64, y_reg: f64) -> Self {
        Self { x, y, x_reg, y_reg }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.x_reg, self.y_reg]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self { x: s[0], y: s[1], x_reg: s[2], y_reg: s[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Right-hand side of the full system:
/// `xdot = (-y + f(x)) / (eps*delta)`, `ydot = (a0 x + a1 y + a2 + c X) / delta`,
/// `Xdot = (-Y + g(X)) / delta`, `Ydot = X + b1 Y + b2`.
pub fn eval_full_rhs(s: &State4, p: &ParameterSet) -> State4 {
    let f = crate::cubics::f(p, s.x);
    let g = crate::cubics::g(p, s.x_reg);
    State4 {
        x: (-s.y + f) / (p.eps * p.delta),
        y: (p.a0 * s.x + p.a1 * s.y + p.a2 + p.c * s.x_reg) / p.delta,
        x_reg: (-s.y_reg + g) / p.delta,
        y_reg: s.x_reg + p.b1 * s.y_reg + p.b2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_set_is_valid() {
        ParameterSet::reference().validate().unwrap();
    }

    #[test]
    fn rejects_bad_signs() {
        let mut p = ParameterSet::reference();
        p.lambda3 = 1.0;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::reference();
        p.eps = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::reference();
        p.c = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn full_rhs_at_origin_matches_hand_substitution() {
        let p = ParameterSet::reference().with_eps_delta(0.1, 0.1);
        let d = eval_full_rhs(&State4::new(0.0, 0.0, 0.0, 0.0), &p);
        assert_eq!(d.x, 0.0);
        assert!((d.y - 8.0).abs() < 1e-14);
        assert_eq!(d.x_reg, 0.0);
        assert!((d.y_reg + 0.8).abs() < 1e-15);
    }

    #[test]
    fn full_rhs_zero_at_equilibrium() {
        // Construct a full equilibrium: y = f(x), Y = g(X), with X chosen so the
        // y-equation vanishes and then b2 so the Y-equation vanishes.
        let mut p = ParameterSet::reference();
        let x = 0.3;
        let y = crate::cubics::f(&p, x);
        let x_reg = -(p.a0 * x + p.a1 * y + p.a2) / p.c;
        let y_reg = crate::cubics::g(&p, x_reg);
        p.b2 = -(x_reg + p.b1 * y_reg);
        let d = eval_full_rhs(&State4::new(x, y, x_reg, y_reg), &p);
        for v in d.to_array() {
            assert!(v.abs() < 1e-12, "residual {v}");
        }
    }

    #[test]
    fn fast_component_scales_exactly_with_inverse_eps() {
        let p = ParameterSet::reference();
        let mut p_half = p;
        p_half.eps = p.eps / 2.0;
        let s = State4::new(0.4, -0.2, 1.1, 0.3);
        let d = eval_full_rhs(&s, &p);
        let dh = eval_full_rhs(&s, &p_half);
        assert_eq!(dh.x, 2.0 * d.x);
        assert_eq!(dh.y, d.y);
        assert_eq!(dh.x_reg, d.x_reg);
        assert_eq!(dh.y_reg, d.y_reg);
    }

    #[test]
    fn json_roundtrip_rejects_unknown_keys() {
        let p = ParameterSet::reference();
        let s = serde_json::to_string(&p).unwrap();
        let q = ParameterSet::from_json_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(ParameterSet::from_json_str(&s.replace("\"a0\"", "\"a9\"")).is_err());
    }
}
