//! Regions of ℝⁿ: membership, distance and bounding boxes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SmoothMap;
use crate::error::{Error, Result};
use crate::geom::Vector;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    /// Closed ball.
    Ball {
        center: Vector,
        radius: f64,
    },
    /// Closed shell `inner ≤ |x − center| ≤ outer`.
    Annulus {
        center: Vector,
        inner: f64,
        outer: f64,
    },
    Box {
        lo: Vector,
        hi: Vector,
    },
    Complement {
        of: Box<Region>,
    },
    Union {
        parts: Vec<Region>,
    },
    Intersection {
        parts: Vec<Region>,
    },
    /// `map(region)`; membership through the map's inverse.
    ImageOf {
        map: Arc<SmoothMap>,
        region: Box<Region>,
    },
    /// Open `radius`-neighborhood of `set`.
    Neighborhood {
        set: Box<Region>,
        radius: f64,
    },
}

/// Axis-aligned box `[lo, hi]`.
pub type Bounds = (Vector, Vector);

impl Region {
    pub fn ball(center: Vector, radius: f64) -> Region {
        Region::Ball { center, radius }
    }

    pub fn annulus(center: Vector, inner: f64, outer: f64) -> Region {
        Region::Annulus {
            center,
            inner,
            outer,
        }
    }

    pub fn complement(of: Region) -> Region {
        Region::Complement { of: Box::new(of) }
    }

    pub fn image_of(map: Arc<SmoothMap>, region: Region) -> Region {
        Region::ImageOf {
            map,
            region: Box::new(region),
        }
    }

    pub fn neighborhood(set: Region, radius: f64) -> Region {
        Region::Neighborhood {
            set: Box::new(set),
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        match self {
            Region::All => Ok(()),
            Region::Ball { center, radius } => {
                if !(*radius > 0.0) || !radius.is_finite() || !center.is_finite() {
                    return bad(format!(
                        "ball radius must be positive and finite, got {radius}"
                    ));
                }
                Ok(())
            }
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                if !(*inner > 0.0 && inner < outer && outer.is_finite()) || !center.is_finite() {
                    return bad(format!(
                        "annulus needs 0 < inner < outer, got {inner}, {outer}"
                    ));
                }
                Ok(())
            }
            Region::Box { lo, hi } => {
                if lo.dim() != hi.dim() || lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
                    return bad("box needs lo < hi componentwise".into());
                }
                Ok(())
            }
            Region::Complement { of } => of.validate(),
            Region::Union { parts } | Region::Intersection { parts } => {
                parts.iter().try_for_each(Region::validate)
            }
            Region::ImageOf { region, .. } => region.validate(),
            Region::Neighborhood { set, radius } => {
                if !(*radius > 0.0) {
                    return bad(format!(
                        "neighborhood radius must be positive, got {radius}"
                    ));
                }
                set.validate()
            }
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        match self {
            Region::All => true,
            Region::Ball { center, radius } => x.distance(center) <= *radius,
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = x.distance(center);
                r >= *inner && r <= *outer
            }
            Region::Box { lo, hi } => (0..x.dim()).all(|i| x[i] >= lo[i] && x[i] <= hi[i]),
            Region::Complement { of } => !of.contains(x),
            Region::Union { parts } => parts.iter().any(|p| p.contains(x)),
            Region::Intersection { parts } => parts.iter().all(|p| p.contains(x)),
            Region::ImageOf { map, region } => match map.inverse(x) {
                Ok(pre) => region.contains(&pre) && residual_ok(map, &pre, x),
                Err(_) => false,
            },
            Region::Neighborhood { set, radius } => match set.distance(x) {
                Some(d) => d < *radius,
                None => false,
            },
        }
    }

    /// Euclidean distance from `x` to the set, when it can be computed.
    pub fn distance(&self, x: &Vector) -> Option<f64> {
        match self {
            Region::All => Some(0.0),
            Region::Ball { center, radius } => Some((x.distance(center) - radius).max(0.0)),
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = x.distance(center);
                Some((inner - r).max(r - outer).max(0.0))
            }
            Region::Box { lo, hi } => {
                let d2: f64 = (0..x.dim())
                    .map(|i| {
                        let d = (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0);
                        d * d
                    })
                    .sum();
                Some(d2.sqrt())
            }
            Region::Union { parts } => parts
                .iter()
                .map(|p| p.distance(x))
                .try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d))),
            Region::Neighborhood { set, radius } => set.distance(x).map(|d| (d - radius).max(0.0)),
            Region::ImageOf { map, region } => match region.as_ref() {
                Region::Ball { center, radius } => {
                    if self.contains(x) {
                        Some(0.0)
                    } else {
                        Some(distance_to_sphere_image(map, center, *radius, x))
                    }
                }
                _ => None,
            },
            Region::Complement { .. } | Region::Intersection { .. } => {
                if self.contains(x) {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// A box containing the region, if it is bounded.
    pub fn bounding_box(&self) -> Option<Bounds> {
        match self {
            Region::All | Region::Complement { .. } => None,
            Region::Ball { center, radius }
            | Region::Annulus {
                center,
                outer: radius,
                ..
            } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Region::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Region::Union { parts } => {
                let mut acc: Option<Bounds> = None;
                for p in parts {
                    let b = p.bounding_box()?;
                    acc = Some(match acc {
                        None => b,
                        Some(a) => union_bounds(&a, &b),
                    });
                }
                acc
            }
            Region::Intersection { parts } => {
                let mut acc: Option<Bounds> = None;
                for b in parts.iter().filter_map(Region::bounding_box) {
                    acc = Some(match acc {
                        None => b,
                        Some((lo, hi)) => (
                            (0..lo.dim()).map(|i| lo[i].max(b.0[i])).collect(),
                            (0..lo.dim()).map(|i| hi[i].min(b.1[i])).collect(),
                        ),
                    });
                }
                acc
            }
            Region::ImageOf { map, region } => match region.as_ref() {
                Region::Ball { center, radius } => {
                    let n = center.dim();
                    let pts = sphere_points(n, sphere_sample_count(n));
                    let mut lo = Vector::from(vec![f64::INFINITY; n]);
                    let mut hi = Vector::from(vec![f64::NEG_INFINITY; n]);
                    for w in &pts {
                        let y = map.eval(&center.axpy(*radius, w)).ok()?;
                        for i in 0..n {
                            lo[i] = lo[i].min(y[i]);
                            hi[i] = hi[i].max(y[i]);
                        }
                    }
                    let pad = 0.05 * (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
                    Some((
                        lo.iter().map(|v| v - pad).collect(),
                        hi.iter().map(|v| v + pad).collect(),
                    ))
                }
                other => {
                    let (lo, hi) = other.bounding_box()?;
                    // image of the box corners is not a bound in general; use the
                    // box's circumscribed ball instead
                    let center: Vector = (0..lo.dim()).map(|i| 0.5 * (lo[i] + hi[i])).collect();
                    let radius = 0.5 * lo.distance(&hi);
                    Region::image_of(map.clone(), Region::ball(center, radius)).bounding_box()
                }
            },
            Region::Neighborhood { set, radius } => {
                let (lo, hi) = set.bounding_box()?;
                Some((
                    lo.iter().map(|v| v - radius).collect(),
                    hi.iter().map(|v| v + radius).collect(),
                ))
            }
        }
    }

    /// Coordinates of the region's finite "features", used to size sampling
    /// boxes for unbounded regions such as complements.
    pub fn feature_box(&self) -> Option<Bounds> {
        match self {
            Region::Complement { of } => of.feature_box(),
            Region::All => None,
            Region::Union { parts } | Region::Intersection { parts } => {
                let mut acc: Option<Bounds> = None;
                for b in parts.iter().filter_map(Region::feature_box) {
                    acc = Some(match acc {
                        None => b,
                        Some(a) => union_bounds(&a, &b),
                    });
                }
                acc
            }
            other => other.bounding_box(),
        }
    }
}

fn residual_ok(map: &SmoothMap, pre: &Vector, y: &Vector) -> bool {
    match map.eval(pre) {
        Ok(fx) => fx.distance(y) <= 1e-9 * (1.0 + y.norm()),
        Err(_) => false,
    }
}

pub(crate) fn union_bounds(a: &Bounds, b: &Bounds) -> Bounds {
    let n = a.0.dim();
    (
        (0..n).map(|i| a.0[i].min(b.0[i])).collect(),
        (0..n).map(|i| a.1[i].max(b.1[i])).collect(),
    )
}

pub(crate) fn sphere_sample_count(n: usize) -> usize {
    match n {
        2 => 256,
        3 => 1200,
        _ => 400 * n,
    }
}

/// Deterministic, roughly uniform unit vectors in ℝⁿ.
pub fn sphere_points(n: usize, count: usize) -> Vec<Vector> {
    use std::f64::consts::PI;
    match n {
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * (k as f64) / (count as f64);
                Vector::from([t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    Vector::from([r * t.cos(), r * t.sin(), z])
                })
                .collect()
        }
        _ => {
            // Kronecker sequence in the cube, rejected to the ball, projected
            let alphas: Vec<f64> = (0..n)
                .map(|i| (PRIMES[i % PRIMES.len()] as f64).sqrt().fract())
                .collect();
            let mut out = Vec::with_capacity(count);
            let mut k = 1u64;
            while out.len() < count {
                let v: Vector = alphas
                    .iter()
                    .map(|a| 2.0 * (a * k as f64).fract() - 1.0)
                    .collect();
                let r = v.norm();
                if r > 1e-3 && r <= 1.0 {
                    out.push(v.scale(1.0 / r));
                }
                k += 1;
            }
            out
        }
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// min over |ω| = 1 of |map(center + radius·ω) − x|, by multistart
/// projected descent from a fixed sphere lattice.
fn distance_to_sphere_image(map: &SmoothMap, center: &Vector, radius: f64, x: &Vector) -> f64 {
    let n = center.dim();
    let pts = sphere_points(n, sphere_sample_count(n));
    let mut scored: Vec<(f64, usize)> = pts
        .iter()
        .enumerate()
        .filter_map(|(k, w)| {
            map.eval(&center.axpy(radius, w))
                .ok()
                .map(|y| (y.distance(x), k))
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored.first().map(|s| s.0).unwrap_or(f64::INFINITY);
    for &(_, k) in scored.iter().take(3) {
        let mut w = pts[k].clone();
        let mut f = match map.eval(&center.axpy(radius, &w)) {
            Ok(y) => y.distance(x),
            Err(_) => continue,
        };
        let mut step = radius * 0.05;
        for _ in 0..60 {
            let p = center.axpy(radius, &w);
            let Ok((y, j)) = map.eval_jac(&p) else { break };
            let r = &y - x;
            // gradient of ½|r|² w.r.t. ω, projected on the tangent space
            let g_p = j.transpose().mul_vec(&r).scale(radius);
            let g = g_p.axpy(-g_p.dot(&w), &w);
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            let mut improved = false;
            while step > 1e-14 * radius {
                let cand = w.axpy(-step / (gn * radius), &g);
                let cand = cand.scale(1.0 / cand.norm());
                if let Ok(yc) = map.eval(&center.axpy(radius, &cand)) {
                    let fc = yc.distance(x);
                    if fc < f {
                        w = cand;
                        f = fc;
                        improved = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.min(f);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_and_annulus_membership() {
        let b = Region::ball(Vector::from([0.0, 0.0]), 1.0);
        assert!(b.contains(&Vector::from([0.6, 0.8])));
        assert!(!b.contains(&Vector::from([0.8, 0.8])));
        let a = Region::annulus(Vector::from([0.0, 0.0]), 1.0, 2.0);
        assert!(a.contains(&Vector::from([1.5, 0.0])));
        assert!(!a.contains(&Vector::from([0.5, 0.0])));
        assert_eq!(a.distance(&Vector::from([3.0, 0.0])), Some(1.0));
        assert_eq!(a.distance(&Vector::from([0.25, 0.0])), Some(0.75));
    }

    #[test]
    fn complement_and_union() {
        let b = Region::ball(Vector::from([0.0, 0.0]), 1.0);
        let c = Region::complement(b.clone());
        assert!(c.contains(&Vector::from([2.0, 0.0])));
        assert!(c.bounding_box().is_none());
        assert!(c.feature_box().is_some());
        let u = Region::Union {
            parts: vec![b, Region::ball(Vector::from([3.0, 0.0]), 1.0)],
        };
        let (lo, hi) = u.bounding_box().unwrap();
        assert_eq!(lo, Vector::from([-1.0, -1.0]));
        assert_eq!(hi, Vector::from([4.0, 1.0]));
        assert_eq!(u.distance(&Vector::from([1.5, 0.0])), Some(0.5));
    }

    #[test]
    fn validation() {
        assert!(Region::ball(Vector::from([0.0, 0.0]), -1.0)
            .validate()
            .is_err());
        assert!(Region::annulus(Vector::from([0.0, 0.0]), 2.0, 1.0)
            .validate()
            .is_err());
        assert!(Region::Box {
            lo: Vector::from([0.0, 0.0]),
            hi: Vector::from([1.0, 1.0])
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn sphere_points_are_unit() {
        for n in 2..6 {
            let pts = sphere_points(n, 50);
            assert_eq!(pts.len(), 50);
            assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        }
    }
}
