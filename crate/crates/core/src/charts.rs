//! Blow-up charts, the transitions between them, and the local coordinate
//! change near the folded singularity.

use crate::error::{Error, Result};
use crate::geometry::FoldGeometry;

/// A point in one of the two blow-up charts.
///
/// `K1` is the entry chart (`ybar = -1`) with coordinates `(x1, r1, X1, eps1)`;
/// `K2` is the transition chart (`epsbar = 1`) with coordinates
/// `(x2, y2, X2)` and the shared singular parameter `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartPoint {
    K1 { x: f64, r: f64, big_x: f64, eps: f64 },
    K2 { x: f64, y: f64, big_x: f64, eps: f64 },
}

/// K1 -> K2: `x2 = x1/sqrt(eps1)`, `y2 = -1/eps1`, `X2 = X1/sqrt(eps1)`.
pub fn k1_to_k2(pt: &ChartPoint) -> Result<ChartPoint> {
    match *pt {
        ChartPoint::K1 { x, r, big_x, eps } => {
            if !(eps > 0.0) {
                return Err(Error::ChartOverlap(format!("k1_to_k2 requires eps1 > 0, got {eps}")));
            }
            let se = eps.sqrt();
            Ok(ChartPoint::K2 {
                x: x / se,
                y: -1.0 / eps,
                big_x: big_x / se,
                eps: r * r * eps,
            })
        }
        ChartPoint::K2 { .. } => Err(Error::ChartOverlap("point is already in K2".into())),
    }
}

/// K2 -> K1: `x1 = x2/sqrt(-y2)`, `eps1 = -1/y2`, `X1 = X2/sqrt(-y2)` with
/// `r1` recovered from the shared `eps`.
pub fn k2_to_k1(pt: &ChartPoint) -> Result<ChartPoint> {
    match *pt {
        ChartPoint::K2 { x, y, big_x, eps } => {
            if !(y < 0.0) {
                return Err(Error::ChartOverlap(format!("k2_to_k1 requires y2 < 0, got {y}")));
            }
            let s = (-y).sqrt();
            Ok(ChartPoint::K1 {
                x: x / s,
                // r1 = sqrt(eps) sqrt(-y2), from y = -r1^2 = eps y2.
                r: (-eps * y).sqrt(),
                big_x: big_x / s,
                eps: -1.0 / y,
            })
        }
        ChartPoint::K1 { .. } => Err(Error::ChartOverlap("point is already in K1".into())),
    }
}

/// Blow-down to the local normal-form coordinates `(x, y, X, eps)`.
///
/// K1: `(r1 x1, -r1^2, r1 X1, r1^2 eps1)`; K2: `(sqrt(eps) x2, eps y2, sqrt(eps) X2, eps)`.
pub fn blow_down(pt: &ChartPoint) -> [f64; 4] {
    match *pt {
        ChartPoint::K1 { x, r, big_x, eps } => [r * x, -(r * r), r * big_x, r * r * eps],
        ChartPoint::K2 { x, y, big_x, eps } => {
            let se = eps.sqrt();
            [se * x, eps * y, se * big_x, eps]
        }
    }
}

/// Original coordinates -> local normal-form coordinates:
/// `xbar = alpha (x - x_f)`, `ybar = alpha (y - y_f)`, `Xbar = X - X_f`.
pub fn to_local(state: [f64; 3], geom: &FoldGeometry) -> [f64; 3] {
    [
        geom.alpha * (state[0] - geom.x_f),
        geom.alpha * (state[1] - geom.y_f),
        state[2] - geom.big_x_f,
    ]
}

/// Exact inverse of [`to_local`].
pub fn from_local(local: [f64; 3], geom: &FoldGeometry) -> [f64; 3] {
    [
        local[0] / geom.alpha + geom.x_f,
        local[1] / geom.alpha + geom.y_f,
        local[2] + geom.big_x_f,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geometry;
    use crate::params::ParameterSet;

    #[test]
    fn unit_eps1_maps_identically() {
        let pt = ChartPoint::K1 { x: 1.0, r: 0.3, big_x: 0.0, eps: 1.0 };
        let k2 = k1_to_k2(&pt).unwrap();
        match k2 {
            ChartPoint::K2 { x, y, big_x, .. } => {
                assert_eq!(x, 1.0);
                assert_eq!(y, -1.0);
                assert_eq!(big_x, 0.0);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn quarter_eps1_doubles_x() {
        let pt = ChartPoint::K1 { x: 0.5, r: 0.1, big_x: 0.2, eps: 0.25 };
        match k1_to_k2(&pt).unwrap() {
            ChartPoint::K2 { x, y, .. } => {
                assert!((x - 1.0).abs() < 1e-15);
                assert!((y + 4.0).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn chart_roundtrip_is_identity() {
        for &(x, r, bx, e) in
            &[(0.9, 0.2, -0.4, 0.5), (1.1, 0.05, 0.3, 2.0), (-0.7, 0.4, -1.0, 0.1)]
        {
            let pt = ChartPoint::K1 { x, r, big_x: bx, eps: e };
            let back = k2_to_k1(&k1_to_k2(&pt).unwrap()).unwrap();
            match back {
                ChartPoint::K1 { x: x2, r: r2, big_x: bx2, eps: e2 } => {
                    assert!((x - x2).abs() < 1e-14);
                    assert!((r - r2).abs() < 1e-14);
                    assert!((bx - bx2).abs() < 1e-14);
                    assert!((e - e2).abs() < 1e-14);
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn chart_domain_violations() {
        assert!(k1_to_k2(&ChartPoint::K1 { x: 1.0, r: 0.1, big_x: 0.0, eps: 0.0 }).is_err());
        assert!(k2_to_k1(&ChartPoint::K2 { x: 1.0, y: 0.5, big_x: 0.0, eps: 0.01 }).is_err());
    }

    #[test]
    fn blow_down_collapses_at_r_zero() {
        let pt = ChartPoint::K1 { x: 1.3, r: 0.0, big_x: -0.5, eps: 0.7 };
        assert_eq!(blow_down(&pt), [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn blow_down_k2_substitution() {
        let pt = ChartPoint::K2 { x: 1.0, y: -1.0, big_x: 2.0, eps: 0.01 };
        let b = blow_down(&pt);
        assert!((b[0] - 0.1).abs() < 1e-15);
        assert!((b[1] + 0.01).abs() < 1e-15);
        assert!((b[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn blow_down_agrees_across_charts() {
        for &(x, r, bx, e) in &[(0.9, 0.2, -0.4, 0.5), (1.2, 0.3, 0.1, 1.5)] {
            let k1 = ChartPoint::K1 { x, r, big_x: bx, eps: e };
            let k2 = k1_to_k2(&k1).unwrap();
            let b1 = blow_down(&k1);
            let b2 = blow_down(&k2);
            for i in 0..4 {
                assert!((b1[i] - b2[i]).abs() < 1e-12, "{b1:?} vs {b2:?}");
            }
        }
    }

    #[test]
    fn local_coordinates_roundtrip_and_origin() {
        let geo = geometry(&ParameterSet::reference()).unwrap();
        let at_fold = to_local([geo.x_f, geo.y_f, geo.big_x_f], &geo);
        for v in at_fold {
            assert!(v.abs() < 1e-14);
        }
        let local = to_local([geo.x_f + 0.1, geo.y_f, geo.big_x_f], &geo);
        assert!((local[0] - 0.2121320).abs() < 1e-6);
        for &(a, b, c) in &[(0.3, -0.2, 1.4), (-1.0, 0.5, -2.2)] {
            let back = from_local(to_local([a, b, c], &geo), &geo);
            assert!((back[0] - a).abs() < 1e-14);
            assert!((back[1] - b).abs() < 1e-14);
            assert!((back[2] - c).abs() < 1e-14);
        }
    }
}
