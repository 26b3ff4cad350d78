//! Rigid transport of small balls along polylines.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FlowMap, TranslationField, VectorField};
use crate::error::{Error, Result};
use crate::geom::Vector;
use crate::maps::{compose, sphere_points, Region, SmoothMap};

/// Tube radius used for transports, as a multiple of the ball radius.
pub const TUBE_FACTOR: f64 = 1.25;

/// The support of a damped translation lies within this multiple of its
/// tube radius from the segment.
const SUPPORT_FACTOR: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Vector>,
    pub clearance: f64,
}

impl Polyline {
    pub fn new(vertices: Vec<Vector>, clearance: f64) -> Polyline {
        Polyline {
            vertices,
            clearance,
        }
    }

    pub fn first(&self) -> &Vector {
        &self.vertices[0]
    }

    pub fn last(&self) -> &Vector {
        &self.vertices[self.vertices.len() - 1]
    }

    pub fn reversed(&self) -> Polyline {
        Polyline {
            vertices: self.vertices.iter().rev().cloned().collect(),
            clearance: self.clearance,
        }
    }

    /// Segments between distinct consecutive vertices.
    pub fn segments(&self) -> Vec<(Vector, Vector)> {
        self.vertices
            .windows(2)
            .filter(|w| w[0] != w[1])
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect()
    }

    fn validate(&self, eps: f64) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(Error::Geometry(
                "a route needs at least two vertices".into(),
            ));
        }
        let n = self.vertices[0].dim();
        if self.vertices.iter().any(|v| v.dim() != n || !v.is_finite()) {
            return Err(Error::Geometry(
                "route vertices must be finite and share a dimension".into(),
            ));
        }
        if self.clearance < TUBE_FACTOR * eps * (1.0 - 1e-12) {
            return Err(Error::Geometry(format!(
                "route clearance {} is below {TUBE_FACTOR}·ε = {}",
                self.clearance,
                TUBE_FACTOR * eps
            )));
        }
        Ok(())
    }
}

fn point_segment_distance(x: &Vector, a: &Vector, b: &Vector) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    let t = if dd == 0.0 {
        0.0
    } else {
        ((x - a).dot(&d) / dd).clamp(0.0, 1.0)
    };
    x.distance(&a.axpy(t, &d))
}

/// Distance between segments `[a, b]` and `[c, d]`.
pub(crate) fn segment_distance(a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64 {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let (uu, uv, vv, uw, vw) = (u.dot(&u), u.dot(&v), v.dot(&v), u.dot(&w), v.dot(&w));
    let den = uu * vv - uv * uv;
    let mut best = point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b));
    if den > 1e-14 * uu * vv {
        let s = (uv * vw - vv * uw) / den;
        let t = (uu * vw - uv * uw) / den;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            best = best.min(a.axpy(s, &u).distance(&c.axpy(t, &v)));
        }
    }
    best
}

/// Sampled check that the `radius`-capsule around `[a, b]` lies in `region`.
pub fn check_tube(region: &Region, a: &Vector, b: &Vector, radius: f64) -> Result<()> {
    if matches!(region, Region::All) {
        return Ok(());
    }
    let n = a.dim();
    let dirs = sphere_points(n, if n == 2 { 64 } else { 200 });
    let stations = 2 + (a.distance(b) / radius).ceil() as usize;
    for k in 0..=stations {
        let c = a.axpy(k as f64 / stations as f64, &(b - a));
        for w in &dirs {
            let x = c.axpy(radius, w);
            if !region.contains(&x) {
                return Err(Error::Geometry(format!(
                    "tube around {a:?}→{b:?} leaves the working region near {x:?}"
                )));
            }
        }
    }
    Ok(())
}

/// Flow carrying `B̄(q, ε)` onto `B̄(p, ε)` by the rigid translation
/// `x ↦ x + (p − q)`, the identity outside the `tube_radius` tube around
/// `[q, p]`. The field is exactly `p − q` on the tube of radius
/// `ε + (tube_radius − ε)/2`.
pub fn damped_translation(q: &Vector, p: &Vector, eps: f64, tube_radius: f64) -> Result<SmoothMap> {
    if !(eps > 0.0) || !(tube_radius > eps) {
        return Err(Error::Geometry(format!(
            "tube radius {tube_radius} must exceed the ball radius {eps} > 0"
        )));
    }
    let n = q.dim();
    if q == p {
        return Ok(SmoothMap::identity(n));
    }
    let inner = eps + 0.5 * (tube_radius - eps);
    let field = TranslationField::new(q, p, inner, tube_radius)?;
    Ok(FlowMap::new(
        VectorField::DampedTranslation(field),
        1.0,
        super::DEFAULT_STEPS,
    )
    .into_map(n)
    .with_label("damped_translation"))
}

/// Composite of per-segment damped translations: `B̄(first, ε)` goes onto
/// `B̄(last, ε)` by rigid translation.
pub fn transport_along_polyline(path: &Polyline, eps: f64) -> Result<SmoothMap> {
    path.validate(eps)?;
    let n = path.first().dim();
    let mut stages = Vec::new();
    for (a, b) in path.segments() {
        stages.push(Arc::new(damped_translation(
            &a,
            &b,
            eps,
            TUBE_FACTOR * eps,
        )?));
    }
    if stages.is_empty() {
        return Ok(SmoothMap::identity(n));
    }
    stages.reverse();
    Ok(compose(stages)?.with_label("transport"))
}

/// Move each `B̄(route.first, ε)` onto `B̄(route.last, ε)` simultaneously,
/// the identity outside `U`.
pub fn move_balls(u: &Region, routes: &[Polyline], eps: f64) -> Result<SmoothMap> {
    let Some(first) = routes.first() else {
        return Err(Error::Geometry("no routes given".into()));
    };
    let n = first.first().dim();
    let support = SUPPORT_FACTOR * TUBE_FACTOR * eps;
    for (i, r) in routes.iter().enumerate() {
        r.validate(eps).map_err(|e| e.at(format!("route {i}")))?;
        if r.first().dim() != n {
            return Err(Error::Geometry(format!(
                "route {i} has dimension {}",
                r.first().dim()
            )));
        }
        for (a, b) in r.segments() {
            check_tube(u, &a, &b, support).map_err(|e| e.at(format!("route {i}")))?;
        }
    }
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            if routes[i].first() == routes[j].first() || routes[i].last() == routes[j].last() {
                return Err(Error::Geometry(format!(
                    "routes {i} and {j} share an endpoint"
                )));
            }
            let (si, sj) = (routes[i].segments(), routes[j].segments());
            // a trivial route still pins its ball, which the other tube must avoid
            let pin_i = [(routes[i].first().clone(), routes[i].first().clone())];
            let pin_j = [(routes[j].first().clone(), routes[j].first().clone())];
            let (ri, rj) = (
                if si.is_empty() { eps } else { support },
                if sj.is_empty() { eps } else { support },
            );
            let (si, sj) = (
                if si.is_empty() { &pin_i[..] } else { &si[..] },
                if sj.is_empty() { &pin_j[..] } else { &sj[..] },
            );
            for (a, b) in si {
                for (c, d) in sj {
                    if segment_distance(a, b, c, d) <= ri + rj {
                        return Err(Error::Geometry(format!(
                            "routes {i} and {j} have intersecting tubes"
                        )));
                    }
                }
            }
        }
    }
    let mut stages = Vec::new();
    for r in routes {
        let t = transport_along_polyline(r, eps)?;
        if !t.is_identity() {
            stages.push(Arc::new(t));
        }
    }
    if stages.is_empty() {
        return Ok(SmoothMap::identity(n));
    }
    Ok(compose(stages)?.with_label("move_balls"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vector {
        Vector::from([x, y])
    }

    #[test]
    fn same_endpoints_give_identity() {
        assert!(damped_translation(&v(1.0, 1.0), &v(1.0, 1.0), 0.1, 0.125)
            .unwrap()
            .is_identity());
    }

    #[test]
    fn l_shaped_path_translates_ball() {
        let path = Polyline::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0)], 0.15);
        let t = transport_along_polyline(&path, 0.1).unwrap();
        for k in 0..50 {
            let a = k as f64 * 0.4;
            let x = v(
                0.1 * (k as f64 / 50.0) * a.cos(),
                0.1 * (k as f64 / 50.0) * a.sin(),
            );
            let y = t.eval(&x).unwrap();
            assert!(y.distance(&(&x + &v(1.0, 1.0))) <= 1e-15);
        }
        let far = v(0.5, 0.6);
        assert_eq!(t.eval(&far).unwrap(), far);
    }

    #[test]
    fn crossing_routes_are_rejected() {
        let a = Polyline::new(vec![v(-1.0, 0.0), v(1.0, 0.0)], 0.15);
        let b = Polyline::new(vec![v(0.0, -1.0), v(0.0, 1.0)], 0.15);
        let err = move_balls(&Region::All, &[a, b], 0.1).unwrap_err();
        assert!(err.to_string().contains("routes 0 and 1"));
    }

    #[test]
    fn parallel_routes_move_independently() {
        let u = Region::Box {
            lo: v(-2.0, -2.0),
            hi: v(2.0, 2.0),
        };
        let a = Polyline::new(vec![v(-1.0, 0.5), v(1.0, 0.5)], 0.15);
        let b = Polyline::new(vec![v(1.0, -0.5), v(-1.0, -0.5)], 0.15);
        let h = move_balls(&u, &[a, b], 0.1).unwrap();
        assert_eq!(h.eval(&v(-1.05, 0.5)).unwrap(), v(-1.05 + 2.0, 0.5));
        assert_eq!(h.eval(&v(1.0, -0.45)).unwrap(), v(1.0 - 2.0, -0.45));
        assert_eq!(h.eval(&v(3.0, 0.0)).unwrap(), v(3.0, 0.0));
    }

    #[test]
    fn routes_must_stay_in_u() {
        let u = Region::ball(Vector::zeros(2), 1.0);
        let a = Polyline::new(vec![v(-0.5, 0.0), v(0.95, 0.0)], 0.15);
        assert!(move_balls(&u, &[a], 0.1).is_err());
    }

    #[test]
    fn segment_distance_cases() {
        assert!(
            (segment_distance(&v(0.0, 0.0), &v(1.0, 0.0), &v(0.0, 1.0), &v(1.0, 1.0)) - 1.0).abs()
                < 1e-15
        );
        assert_eq!(
            segment_distance(&v(-1.0, 0.0), &v(1.0, 0.0), &v(0.0, -1.0), &v(0.0, 1.0)),
            0.0
        );
        assert!(
            (segment_distance(&v(0.0, 0.0), &v(1.0, 0.0), &v(2.0, 1.0), &v(3.0, 1.0))
                - 2f64.sqrt())
            .abs()
                < 1e-15
        );
    }
}
