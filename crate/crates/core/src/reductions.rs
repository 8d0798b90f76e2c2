//! Reduced vector fields for the different phases of the dynamics.
//!
//! Every reduction is exposed behind the same [`VectorField`] trait so the
//! integrator and BVP solver can consume any of them.  Remainder terms of
//! higher order in the singular parameters are realized at leading order
//! (set to zero); the full model is available as `Full4D` when exact
//! dynamics are needed.

use serde::Serialize;

use crate::cubics;
use crate::error::{Error, Result};
use crate::geometry::{geometry, slow_drift, FoldGeometry};
use crate::params::ParameterSet;

/// Evaluable autonomous vector field.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()>;
    fn name(&self) -> String;
}

/// Adapter turning a closure into a [`VectorField`]; used by tests and the
/// BVP layer.
pub struct FnField<F: Fn(&[f64], &mut [f64])> {
    dim: usize,
    name: String,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, name: &str, f: F) -> Self {
        Self { dim, name: name.to_string(), f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(state, out);
        Ok(())
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Field with every component negated; integrating it forward traverses the
/// original orbits backward.
pub struct ReversedField<'a, V: VectorField + ?Sized>(pub &'a V);

impl<V: VectorField + ?Sized> VectorField for ReversedField<'_, V> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.eval(state, out)?;
        for v in out.iter_mut() {
            *v = -*v;
        }
        Ok(())
    }
    fn name(&self) -> String {
        format!("reversed({})", self.0.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldTag {
    /// The full model: states (x, y, X, Y).
    Full4D,
    /// Three-time-scale 3D reduction on the regulator cubic: states (x, y, X).
    ThreeScale3D,
    /// Planar slow-fast system for the surge phase: states (x, X).
    SurgePlanar,
    /// Boundary-layer system with frozen Y: states (x, y, X).
    BoundaryLayer3D,
    /// Desingularized reduced system on the critical manifold: states (x, X).
    DesingularizedReduced,
    /// Local normal form near the folded singularity: states (x, y, X),
    /// translated/rescaled coordinates.
    NormalFormLocal,
    /// Entry chart of the blow-up: states (x1, r1, X1, eps1).
    ChartK1,
    /// Flow restricted to the attracting center manifold in the entry chart:
    /// states (r1, X1, eps1).
    ChartK1CenterManifold,
    /// Transition chart of the blow-up, eps frozen: states (x2, y2, X2).
    ChartK2,
    /// Transition chart after rectifying the fold-region critical manifold:
    /// states (x, y, X).
    RectifiedK2,
}

impl FieldTag {
    pub fn dim(&self) -> usize {
        match self {
            FieldTag::Full4D | FieldTag::ChartK1 => 4,
            FieldTag::ThreeScale3D
            | FieldTag::BoundaryLayer3D
            | FieldTag::NormalFormLocal
            | FieldTag::ChartK1CenterManifold
            | FieldTag::ChartK2
            | FieldTag::RectifiedK2 => 3,
            FieldTag::SurgePlanar | FieldTag::DesingularizedReduced => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "full4d" | "full" => FieldTag::Full4D,
            "threescale3d" | "3d3ts" | "threescale" => FieldTag::ThreeScale3D,
            "surgeplanar" | "surge" => FieldTag::SurgePlanar,
            "boundarylayer3d" | "boundarylayer" | "fast3d" => FieldTag::BoundaryLayer3D,
            "desingularizedreduced" | "desing" => FieldTag::DesingularizedReduced,
            "normalformlocal" | "normalform" | "local" => FieldTag::NormalFormLocal,
            "chartk1" | "k1" => FieldTag::ChartK1,
            "chartk1centermanifold" | "k1cm" => FieldTag::ChartK1CenterManifold,
            "chartk2" | "k2" => FieldTag::ChartK2,
            "rectifiedk2" | "k2rect" | "rectified" => FieldTag::RectifiedK2,
            other => return Err(Error::Config(format!("unknown field tag `{other}`"))),
        })
    }
}

impl std::fmt::Display for FieldTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Tag-specific constants that are not part of [`ParameterSet`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FieldExtras {
    /// Frozen regulator slow variable for `BoundaryLayer3D`.
    pub frozen_y_reg: Option<f64>,
}

/// A built reduced field: parameter closure plus derived fold constants.
pub struct Field {
    pub tag: FieldTag,
    pub p: ParameterSet,
    pub geom: FoldGeometry,
    pub extras: FieldExtras,
}

/// Constructs an evaluable field for the requested reduction.
pub fn build_field(tag: FieldTag, p: &ParameterSet, extras: FieldExtras) -> Result<Field> {
    p.validate()?;
    let geom = geometry(p)?;
    if tag == FieldTag::BoundaryLayer3D && extras.frozen_y_reg.is_none() {
        return Err(Error::Config(
            "BoundaryLayer3D requires a frozen Y value in the field extras".into(),
        ));
    }
    Ok(Field { tag, p: *p, geom, extras })
}

impl Field {
    /// Coefficients of the local forms, reported by the CLI.
    pub fn coefficients(&self) -> LocalCoefficients {
        let p = &self.p;
        LocalCoefficients {
            alpha: self.geom.alpha,
            phi: self.geom.phi,
            psi: self.geom.psi,
            a_lin: self.geom.a_lin(p),
            eps: p.eps,
            delta: p.delta,
        }
    }

    /// Scalar functions whose zeros bound the domain of this reduction,
    /// evaluated at `state`.
    pub fn singular_locus_values(&self, state: &[f64]) -> Vec<(&'static str, f64)> {
        let p = &self.p;
        match self.tag {
            FieldTag::SurgePlanar => vec![
                ("f'(x)", cubics::f_prime(p, state[0])),
                ("g'(X)", cubics::g_prime(p, state[1])),
            ],
            FieldTag::ThreeScale3D => vec![("g'(X)", cubics::g_prime(p, state[2]))],
            FieldTag::DesingularizedReduced => {
                vec![("g'(X)", cubics::g_prime(p, state[1]))]
            }
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalCoefficients {
    pub alpha: f64,
    pub phi: f64,
    pub psi: f64,
    /// A = alpha c / a0.
    pub a_lin: f64,
    pub eps: f64,
    pub delta: f64,
}

fn guard_div(num: f64, den: f64, what: &str) -> Result<f64> {
    if den.abs() < 1e-12 {
        return Err(Error::Domain(format!(
            "evaluation at singular locus: {what} = {den:.3e}"
        )));
    }
    Ok(num / den)
}

impl VectorField for Field {
    fn dim(&self) -> usize {
        self.tag.dim()
    }

    fn name(&self) -> String {
        format!("{}", self.tag)
    }

    fn eval(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        let p = &self.p;
        let (eps, delta) = (p.eps, p.delta);
        match self.tag {
            FieldTag::Full4D => {
                let (x, y, xr, yr) = (s[0], s[1], s[2], s[3]);
                out[0] = (-y + cubics::f(p, x)) / (eps * delta);
                out[1] = (p.a0 * x + p.a1 * y + p.a2 + p.c * xr) / delta;
                out[2] = (-yr + cubics::g(p, xr)) / delta;
                out[3] = xr + p.b1 * yr + p.b2;
            }
            FieldTag::ThreeScale3D => {
                let (x, y, xr) = (s[0], s[1], s[2]);
                out[0] = (-y + cubics::f(p, x)) / (eps * delta);
                out[1] = (p.a0 * x + p.a1 * y + p.a2 + p.c * xr) / delta;
                out[2] = guard_div(
                    xr + p.b1 * cubics::g(p, xr) + p.b2,
                    cubics::g_prime(p, xr),
                    "g'(X)",
                )?;
            }
            FieldTag::SurgePlanar => {
                let (x, xr) = (s[0], s[1]);
                out[0] = guard_div(
                    p.a0 * x + p.a1 * cubics::f(p, x) + p.a2 + p.c * xr,
                    delta * cubics::f_prime(p, x),
                    "f'(x)",
                )?;
                out[1] = guard_div(
                    xr + p.b1 * cubics::g(p, xr) + p.b2,
                    cubics::g_prime(p, xr),
                    "g'(X)",
                )?;
            }
            FieldTag::BoundaryLayer3D => {
                let (x, y, xr) = (s[0], s[1], s[2]);
                let yr = self.extras.frozen_y_reg.unwrap_or(0.0);
                out[0] = (-y + cubics::f(p, x)) / eps;
                out[1] = p.a0 * x + p.a1 * y + p.a2 + p.c * xr;
                out[2] = -yr + cubics::g(p, xr);
            }
            FieldTag::DesingularizedReduced => {
                let (x, xr) = (s[0], s[1]);
                out[0] = -(p.a0 * x + p.a1 * cubics::f(p, x) + p.a2 + p.c * xr);
                let drift = guard_div(
                    xr + p.b1 * cubics::g(p, xr) + p.b2,
                    cubics::g_prime(p, xr),
                    "g'(X)",
                )?;
                out[1] = -delta * drift * cubics::f_prime(p, x);
            }
            FieldTag::NormalFormLocal => {
                // eps*xdot = -y - x^2 - x^3/(3 lambda1); ydot = a0 x + a1 y + alpha c X;
                // Xdot = delta (phi + psi X).  Time carries the 1/delta rescale.
                let (x, y, xr) = (s[0], s[1], s[2]);
                let g = &self.geom;
                out[0] = (-y - x * x - x * x * x / (3.0 * p.lambda1)) / eps;
                out[1] = p.a0 * x + p.a1 * y + g.alpha * p.c * xr;
                out[2] = delta * (g.phi + g.psi * xr);
            }
            FieldTag::ChartK1 => {
                let (x1, r1, bx1, e1) = (s[0], s[1], s[2], s[3]);
                let g = &self.geom;
                let big_f = -p.a0 * x1 + p.a1 * r1 - g.alpha * p.c * bx1;
                out[0] = -0.5 * x1 * e1 * big_f
                    - (-1.0 + x1 * x1 + r1 * x1 * x1 * x1 / (3.0 * p.lambda1));
                out[1] = 0.5 * r1 * e1 * big_f;
                out[2] = -0.5 * bx1 * e1 * big_f + e1 * delta * (g.phi + g.psi * r1 * bx1);
                out[3] = -e1 * e1 * big_f;
            }
            FieldTag::ChartK1CenterManifold => {
                let (r1, bx1, e1) = (s[0], s[1], s[2]);
                let g = &self.geom;
                let ft = -p.a0 + (p.a1 + p.a0 / (6.0 * p.lambda1)) * r1 - g.alpha * p.c * bx1;
                out[0] = 0.5 * r1 * ft;
                out[1] = -0.5 * bx1 * ft + delta * (g.phi + g.psi * r1 * bx1);
                out[2] = -e1 * ft;
            }
            FieldTag::ChartK2 => {
                let (x2, y2, bx2) = (s[0], s[1], s[2]);
                let g = &self.geom;
                let se = eps.sqrt();
                out[0] = -y2 - x2 * x2 - se * x2 * x2 * x2 / (3.0 * p.lambda1);
                out[1] = p.a0 * x2 + g.alpha * p.c * bx2 + p.a1 * se * y2;
                out[2] = delta * (g.phi + se * g.psi * bx2);
            }
            FieldTag::RectifiedK2 => {
                let (x, y, bx) = (s[0], s[1], s[2]);
                let g = &self.geom;
                let a = g.a_lin(p);
                out[0] = -y + 2.0 * a * bx * x - x * x;
                out[1] = p.a0 * x;
                out[2] = delta * (g.phi + g.psi * bx);
            }
        }
        if out[..self.dim()].iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "{} evaluated to a non-finite derivative at {s:?}",
                self.tag
            )));
        }
        Ok(())
    }
}

/// Restriction of the three-time-scale reduction to the regulator cubic at
/// the given `X`, used by consistency checks.
pub fn three_scale_x_drift(p: &ParameterSet, x_reg: f64) -> f64 {
    slow_drift(p, x_reg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ParameterSet {
        ParameterSet::reference()
    }

    fn eval(tag: FieldTag, extras: FieldExtras, s: &[f64]) -> Vec<f64> {
        let f = build_field(tag, &p(), extras).unwrap();
        let mut out = vec![0.0; f.dim()];
        f.eval(s, &mut out).unwrap();
        out
    }

    #[test]
    fn desingularized_vanishes_at_folded_singularity() {
        let geo = geometry(&p()).unwrap();
        let out = eval(
            FieldTag::DesingularizedReduced,
            FieldExtras::default(),
            &[geo.x_f, geo.big_x_f],
        );
        assert!(out[0].abs() < 1e-12, "{out:?}");
        assert!(out[1].abs() < 1e-12, "{out:?}");
    }

    #[test]
    fn three_scale_slow_drift_value() {
        let out = eval(FieldTag::ThreeScale3D, FieldExtras::default(), &[0.1, 0.2, -2.0]);
        // (-2 + 0 - 0.8) / g'(-2) = -2.8 / -8 = 0.35
        assert!((out[2] - 0.35).abs() < 1e-14, "{out:?}");
    }

    #[test]
    fn surge_planar_stationary_on_nullcline() {
        let pr = p();
        let x = -2.0;
        let xr = cubics::f_tilde(&pr, x);
        let out = eval(FieldTag::SurgePlanar, FieldExtras::default(), &[x, xr]);
        assert!(out[0].abs() < 1e-12, "{out:?}");
    }

    #[test]
    fn surge_planar_errors_on_fold() {
        let f = build_field(FieldTag::SurgePlanar, &p(), FieldExtras::default()).unwrap();
        let geo = geometry(&p()).unwrap();
        let mut out = vec![0.0; 2];
        assert!(f.eval(&[geo.x_f, 1.5], &mut out).is_err());
    }

    #[test]
    fn boundary_layer_requires_frozen_y() {
        assert!(build_field(FieldTag::BoundaryLayer3D, &p(), FieldExtras::default()).is_err());
        let f = build_field(
            FieldTag::BoundaryLayer3D,
            &p(),
            FieldExtras { frozen_y_reg: Some(1.0) },
        )
        .unwrap();
        let mut out = vec![0.0; 3];
        f.eval(&[0.0, 0.0, 0.0], &mut out).unwrap();
        assert!((out[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn chart_k2_critical_manifold_is_stationary_at_eps_zero() {
        // With eps -> 0 the fast part of ChartK2 vanishes exactly on
        // x2 = -A X2, y2 = -A^2 X2^2.
        let mut pr = p();
        pr.eps = 1e-300_f64.max(f64::MIN_POSITIVE); // effectively zero, still valid (0,1)
        let f = build_field(FieldTag::ChartK2, &pr, FieldExtras::default()).unwrap();
        let a = f.geom.a_lin(&pr);
        for &bx in &[-0.5, -0.1, 0.3] {
            let s = [-a * bx, -(a * bx) * (a * bx), bx];
            let mut out = vec![0.0; 3];
            f.eval(&s, &mut out).unwrap();
            assert!(out[0].abs() < 1e-12, "{out:?}");
            assert!(out[1].abs() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn desingularized_reverses_time_on_repelling_sheet() {
        // On the repelling sheet (f'(x) > 0) the desingularized field is a
        // negative multiple of the reduced slow flow; on the attracting
        // sheets a positive multiple.
        let pr = p();
        let desing = build_field(FieldTag::DesingularizedReduced, &pr, FieldExtras::default())
            .unwrap();
        let reduced = |x: f64, xr: f64| -> [f64; 2] {
            let num = pr.a0 * x + pr.a1 * cubics::f(&pr, x) + pr.a2 + pr.c * xr;
            [
                num / (pr.delta * cubics::f_prime(&pr, x)),
                slow_drift(&pr, xr),
            ]
        };
        for &(x, xr) in &[(0.2, -1.8), (-0.3, -2.0), (1.5, -1.9), (-1.4, -2.1)] {
            let mut d = [0.0; 2];
            desing.eval(&[x, xr], &mut d).unwrap();
            let r = reduced(x, xr);
            // d = lambda * r with lambda = -delta * f'(x)
            let lambda = -pr.delta * cubics::f_prime(&pr, x);
            assert!((d[0] - lambda * r[0]).abs() < 1e-9 * (1.0 + d[0].abs()));
            assert!((d[1] - lambda * r[1]).abs() < 1e-9 * (1.0 + d[1].abs()));
            if cubics::f_prime(&pr, x) > 0.0 {
                assert!(lambda < 0.0);
            } else {
                assert!(lambda > 0.0);
            }
        }
    }

    #[test]
    fn full_and_three_scale_share_fast_components() {
        let s4 = [0.4, 0.1, -1.9, 0.0];
        let pr = p();
        let full = build_field(FieldTag::Full4D, &pr, FieldExtras::default()).unwrap();
        let three = build_field(FieldTag::ThreeScale3D, &pr, FieldExtras::default()).unwrap();
        let mut o4 = vec![0.0; 4];
        let mut o3 = vec![0.0; 3];
        full.eval(&s4, &mut o4).unwrap();
        three.eval(&s4[..3], &mut o3).unwrap();
        assert_eq!(o4[0], o3[0]);
        assert_eq!(o4[1], o3[1]);
    }

    #[test]
    fn k1_center_manifold_equilibria_are_stationary() {
        // The center-manifold flow in the entry chart has equilibria at
        // r1 = eps1 = 0, X1 = X1+-; the full entry-chart field is also
        // stationary there on x1 = 1 at leading order.
        let pr = p();
        let (x1m, x1p) = crate::folded::k1_equilibria(&pr, pr.delta).unwrap();
        let cm = build_field(FieldTag::ChartK1CenterManifold, &pr, FieldExtras::default())
            .unwrap();
        for &bx in &[x1m, x1p] {
            let mut out = vec![0.0; 3];
            cm.eval(&[0.0, bx, 0.0], &mut out).unwrap();
            for v in &out {
                assert!(v.abs() < 1e-12, "CM field {out:?} at X1 = {bx}");
            }
        }
        let k1 = build_field(FieldTag::ChartK1, &pr, FieldExtras::default()).unwrap();
        let mut out = vec![0.0; 4];
        k1.eval(&[1.0, 0.0, x1p, 0.0], &mut out).unwrap();
        assert!(out[0].abs() < 1e-12, "x1 equation {out:?}");
        assert!(out[1].abs() < 1e-15 && out[3].abs() < 1e-15);
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(FieldTag::parse("full4d").unwrap(), FieldTag::Full4D);
        assert_eq!(FieldTag::parse("ChartK2").unwrap(), FieldTag::ChartK2);
        assert!(FieldTag::parse("bogus").is_err());
    }
}
