//! Gluing prescribed maps of disjoint balls into one global diffeomorphism,
//! and inserting an inner map inside a given one.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::extension::{extend_ball_automorphism, normalize_balls_detailed, Normalization};
use crate::flows::{move_balls, Polyline, TUBE_FACTOR};
use crate::geom::Vector;
use crate::maps::{compose, sphere_points, BallDiffeo, Orientation, Region, SmoothMap};

/// One prescribed map `F_i : D_i → D′_i`, with both balls given by
/// parametrizations and a route from `D_i` to `D′_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluePair {
    pub source: BallDiffeo,
    pub target: BallDiffeo,
    pub map: Arc<SmoothMap>,
    /// Path from the source ball to the target ball. Its end vertices are
    /// replaced by the anchors; omitted means a straight segment.
    #[serde(default)]
    pub route: Option<Polyline>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlueTolerances {
    /// Largest allowed `|F(x) − F_i(x)|` on `D_i`.
    pub agreement: f64,
    /// Largest allowed `|F(x) − x|` outside `U`.
    pub outside: f64,
    pub roundtrip: f64,
    /// Boundary mismatch allowed when checking `F_i(D_i) = D′_i`.
    pub boundary: f64,
}

impl Default for GlueTolerances {
    fn default() -> Self {
        GlueTolerances {
            agreement: 1e-9,
            outside: 1e-13,
            roundtrip: 1e-7,
            boundary: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlueScenario {
    pub n: usize,
    pub u: Region,
    pub pairs: Vec<GluePair>,
    pub eps: f64,
    #[serde(default)]
    pub tolerances: GlueTolerances,
}

/// Everything built while gluing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluePipeline {
    pub eps: f64,
    pub sources: Normalization,
    pub targets: Normalization,
    /// Routes actually used, from target anchors to source anchors.
    pub routes: Vec<Polyline>,
    pub transport: Arc<SmoothMap>,
    /// Extended per-ball automorphisms of `B̄(p_i, ε)`.
    pub automorphisms: Vec<Arc<SmoothMap>>,
    pub result: SmoothMap,
}

fn boundary_points(g: &BallDiffeo, count: usize) -> Result<Vec<Vector>> {
    sphere_points(g.dim(), count)
        .iter()
        .map(|w| g.map.eval(&g.center.axpy(g.radius, w)))
        .collect()
}

fn dir_count(n: usize) -> usize {
    if n == 2 {
        96
    } else {
        300
    }
}

fn validate(s: &GlueScenario) -> Result<()> {
    if s.pairs.is_empty() {
        return Err(Error::Parameter("scenario has no ball pairs".into()));
    }
    if !(s.eps > 0.0 && s.eps.is_finite()) {
        return Err(Error::Parameter(format!(
            "ε must be positive, got {}",
            s.eps
        )));
    }
    s.u.validate()?;
    let n = s.n;
    let count = dir_count(n);
    let offsets = sphere_points(n, if n == 2 { 16 } else { 40 });
    for (i, p) in s.pairs.iter().enumerate() {
        if p.source.dim() != n || p.target.dim() != n || p.map.dim != n {
            return Err(Error::Parameter(format!(
                "pair {i} does not have dimension {n}"
            )));
        }
        if p.map
            .jacobian(&p.source.map.eval(&p.source.center)?)?
            .determinant()
            <= 0.0
        {
            return Err(Error::Orientation(format!(
                "map of pair {i} reverses orientation"
            )));
        }
        let tol = s.tolerances.boundary;
        for x in boundary_points(&p.source, count)? {
            // the ε-collar of each ball hosts its normalization
            for w in &offsets {
                let z = x.axpy(s.eps, w);
                if !s.u.contains(&z) {
                    return Err(Error::Geometry(format!(
                        "the ε-neighborhood of source ball {i} leaves U near {z:?}"
                    )));
                }
            }
            let y = p.map.eval(&x)?;
            let pre = p.target.map.inverse(&y)?;
            let r = pre.distance(&p.target.center);
            if (r - p.target.radius).abs() > tol * (1.0 + p.target.radius) {
                return Err(Error::Geometry(format!(
                    "map of pair {i} does not carry the source ball onto the target ball: boundary point {x:?} lands at parameter radius {r}"
                )));
            }
        }
        for x in boundary_points(&p.target, count)? {
            for w in &offsets {
                let z = x.axpy(s.eps, w);
                if !s.u.contains(&z) {
                    return Err(Error::Geometry(format!(
                        "the ε-neighborhood of target ball {i} leaves U near {z:?}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn snap_route(pair: &GluePair, p: &Vector, q: &Vector, eps: f64) -> Polyline {
    match &pair.route {
        Some(r) if r.vertices.len() >= 2 => {
            let mut v = r.vertices.clone();
            let last = v.len() - 1;
            v[0] = p.clone();
            v[last] = q.clone();
            Polyline::new(v, r.clearance)
        }
        _ => Polyline::new(vec![p.clone(), q.clone()], TUBE_FACTOR * eps),
    }
}

/// Global diffeomorphism `F` with `F = F_i` on every `D_i` and `F = id`
/// outside `U`.
pub fn glue_ball_maps(s: &GlueScenario) -> Result<SmoothMap> {
    Ok(glue_pipeline(s)?.result)
}

pub fn glue_pipeline(s: &GlueScenario) -> Result<GluePipeline> {
    validate(s).stage("scenario")?;
    let eps = s.eps;
    let sources: Vec<BallDiffeo> = s.pairs.iter().map(|p| p.source.clone()).collect();
    let targets: Vec<BallDiffeo> = s.pairs.iter().map(|p| p.target.clone()).collect();
    let a1 = normalize_balls_detailed(&sources, eps).stage("normalize sources")?;
    let a2 = normalize_balls_detailed(&targets, eps).stage("normalize targets")?;

    let routes: Vec<Polyline> = s
        .pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| snap_route(pair, &a1.balls[i].anchor, &a2.balls[i].anchor, eps).reversed())
        .collect();
    let h = Arc::new(move_balls(&s.u, &routes, eps).stage("move balls")?);
    let h_inv = Arc::new(h.inverted());

    // collars B(p_i, 1.5ε) are disjoint since the balls are more than 4ε apart
    let collar = 0.5 * eps;
    let autos = s
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| -> Result<Arc<SmoothMap>> {
            let src = &a1.balls[i];
            let tgt = &a2.balls[i];
            let tgt_inv = Arc::new(tgt.local.map.inverted());
            let gi = compose(vec![
                h.clone(),
                tgt_inv,
                pair.map.clone(),
                src.local.map.clone(),
            ])?
            .with_orientation(Orientation::Preserving);
            let gi = Arc::new(gi);
            let mut margin = src.local.margin.min(tgt.local.margin);
            let ball = loop {
                match BallDiffeo::new(gi.clone(), src.anchor.clone(), eps, margin) {
                    Ok(b) => break b,
                    Err(e) if margin < 1e-3 => return Err(e),
                    Err(_) => margin *= 0.5,
                }
            };
            Ok(Arc::new(extend_ball_automorphism(&ball, collar)?))
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.at(format!("ball {i} automorphism"))))
        .collect::<Result<Vec<_>>>()?;

    let stages: Vec<Arc<SmoothMap>> = autos.iter().filter(|g| !g.is_identity()).cloned().collect();
    let g = if stages.is_empty() {
        SmoothMap::identity(s.n)
    } else {
        compose(stages)?
    };

    let a1_map = Arc::new(a1.map.clone());
    let a1_inv = Arc::new(a1_map.inverted());
    let f = compose(vec![Arc::new(a2.map.clone()), h_inv, Arc::new(g), a1_inv])
        .stage("assemble")?
        .with_label("glued")
        .with_orientation(Orientation::Preserving);
    Ok(GluePipeline {
        eps,
        sources: a1,
        targets: a2,
        routes,
        transport: h,
        automorphisms: autos,
        result: f,
    })
}

/// The inner gluing built by [`insert_inner_map_detailed`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Insertion {
    pub eps: f64,
    pub inner: GluePipeline,
    pub result: SmoothMap,
}

const MAX_EPS_HALVINGS: usize = 6;

/// `H = F ∘ Φ` with `H = G` on `D₂` and `H = F` outside `D̊₁`, where `D₂` is
/// the ball of `g`, `D₁` the image of the ball of `d1`, and `Φ` is supported
/// in `u_inner ⊂ D̊₁`.
pub fn insert_inner_map(
    f: Arc<SmoothMap>,
    g: &BallDiffeo,
    d1: &BallDiffeo,
    u_inner: &Region,
) -> Result<SmoothMap> {
    Ok(insert_inner_map_detailed(f, g, d1, u_inner)?.result)
}

fn in_interior(d: &BallDiffeo, z: &Vector) -> Result<bool> {
    Ok(d.map.inverse(z)?.distance(&d.center) < d.radius)
}

pub fn insert_inner_map_detailed(
    f: Arc<SmoothMap>,
    g: &BallDiffeo,
    d1: &BallDiffeo,
    u_inner: &Region,
) -> Result<Insertion> {
    let n = g.dim();
    if f.dim != n || d1.dim() != n {
        return Err(Error::Parameter(
            "maps and balls must share a dimension".into(),
        ));
    }
    let count = dir_count(n);
    let dirs = sphere_points(n, count);
    let (c2, r2) = (&g.center, g.radius);
    for w in &dirs {
        let x = c2.axpy(r2, w);
        if !in_interior(d1, &x)? {
            return Err(Error::Containment(format!(
                "D₂ is not inside the interior of D₁ near {x:?}"
            )));
        }
        let z = f.inverse(&g.map.eval(&x)?)?;
        if !in_interior(d1, &z)? {
            return Err(Error::Containment(format!(
                "G(D₂) is not inside F(D̊₁): G({x:?}) pulls back to {z:?}"
            )));
        }
    }
    if let Some((lo, hi)) = u_inner.bounding_box() {
        let samples = crate::maps::lattice_in_box(&lo, &hi, if n == 2 { 21 } else { 9 });
        for z in samples.iter().filter(|z| u_inner.contains(z)) {
            if !in_interior(d1, z)? {
                return Err(Error::Containment(format!(
                    "working region leaves D̊₁ near {z:?}"
                )));
            }
        }
    } else {
        return Err(Error::Containment("working region must be bounded".into()));
    }

    let source = BallDiffeo::unchecked(Arc::new(SmoothMap::identity(n)), c2.clone(), r2, g.margin)?;
    let pulled = Arc::new(
        compose(vec![Arc::new(f.inverted()), g.map.clone()])?
            .with_orientation(Orientation::Preserving),
    );
    let target =
        BallDiffeo::new(pulled.clone(), c2.clone(), r2, g.margin).stage("pulled-back ball")?;

    // ε: a fraction of the room left around both balls, halved until the
    // transport tube fits
    let q = pulled.eval(c2)?;
    let src_bd: Vec<Vector> = dirs.iter().map(|w| c2.axpy(r2, w)).collect();
    let tgt_bd = boundary_points(&target, count)?;
    let d1_bd = boundary_points(d1, count)?;
    let gap = |a: &[Vector]| -> f64 {
        a.iter()
            .flat_map(|x| d1_bd.iter().map(move |y| x.distance(y)))
            .fold(f64::INFINITY, f64::min)
    };
    let inner_q = tgt_bd
        .iter()
        .map(|x| x.distance(&q))
        .fold(f64::INFINITY, f64::min);
    let mut eps = 0.25 * r2.min(inner_q).min(gap(&src_bd)).min(gap(&tgt_bd));
    let mut last = None;
    for _ in 0..=MAX_EPS_HALVINGS {
        let scenario = GlueScenario {
            n,
            u: u_inner.clone(),
            pairs: vec![GluePair {
                source: source.clone(),
                target: target.clone(),
                map: pulled.clone(),
                route: None,
            }],
            eps,
            tolerances: GlueTolerances::default(),
        };
        match glue_pipeline(&scenario) {
            Ok(inner) => {
                let h = compose(vec![f.clone(), Arc::new(inner.result.clone())])?
                    .with_label("inserted")
                    .with_domain(f.domain.clone())
                    .with_orientation(Orientation::Preserving);
                return Ok(Insertion {
                    eps,
                    inner,
                    result: h,
                });
            }
            Err(e) if matches!(e.root(), Error::Geometry(_) | Error::Margin(_)) => {
                last = Some(e);
                eps *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Geometry("no admissible ε".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Matrix;
    use crate::maps::{construct_builtin, Builtin};
    use std::f64::consts::PI;

    fn v(x: f64, y: f64) -> Vector {
        Vector::from([x, y])
    }

    fn builtin(b: Builtin) -> Arc<SmoothMap> {
        construct_builtin(2, b, Region::All).unwrap().shared()
    }

    fn round_ball(c: Vector, r: f64) -> BallDiffeo {
        BallDiffeo::new(Arc::new(SmoothMap::identity(2)), c, r, 0.5).unwrap()
    }

    #[test]
    fn identity_pair_glues_to_identity_on_the_ball() {
        let s = GlueScenario {
            n: 2,
            u: Region::ball(Vector::zeros(2), 10.0),
            pairs: vec![GluePair {
                source: round_ball(Vector::zeros(2), 1.0),
                target: round_ball(Vector::zeros(2), 1.0),
                map: Arc::new(SmoothMap::identity(2)),
                route: None,
            }],
            eps: 0.2,
            tolerances: GlueTolerances::default(),
        };
        let f = glue_ball_maps(&s).unwrap();
        for k in 0..30 {
            let x = v(0.03 * k as f64, -0.02 * k as f64);
            assert!(f.eval(&x).unwrap().distance(&x) < 1e-12);
        }
    }

    #[test]
    fn translation_between_balls() {
        let shift = Builtin::Affine {
            matrix: Matrix::identity(2),
            offset: v(6.0, 0.0),
        };
        let s = GlueScenario {
            n: 2,
            u: Region::ball(Vector::zeros(2), 10.0),
            pairs: vec![GluePair {
                source: round_ball(v(-3.0, 0.0), 1.0),
                target: round_ball(v(3.0, 0.0), 1.0),
                map: builtin(shift),
                route: None,
            }],
            eps: 0.2,
            tolerances: GlueTolerances::default(),
        };
        let f = glue_ball_maps(&s).unwrap();
        for k in 0..40 {
            let t = k as f64 * 0.77;
            let x = v(-3.0, 0.0).axpy((k as f64 / 40.0).sqrt(), &v(t.cos(), t.sin()));
            let y = f.eval(&x).unwrap();
            assert!(y.distance(&v(x[0] + 6.0, x[1])) <= 1e-9, "{x:?} -> {y:?}");
            assert!(f.inverse(&y).unwrap().distance(&x) <= 1e-7);
            let far = v(10.5 * t.cos(), 10.5 * t.sin());
            assert_eq!(f.eval(&far).unwrap(), far);
        }
    }

    #[test]
    fn rotation_inserted_inside_identity() {
        let g = BallDiffeo::new(
            builtin(Builtin::Rotation {
                angle: PI / 6.0,
                center: Vector::zeros(2),
                plane: [0, 1],
            }),
            Vector::zeros(2),
            1.0,
            0.5,
        )
        .unwrap();
        let d1 = round_ball(Vector::zeros(2), 2.0);
        let f = Arc::new(SmoothMap::identity(2).with_domain(Region::ball(Vector::zeros(2), 5.0)));
        let h = insert_inner_map(f, &g, &d1, &Region::ball(Vector::zeros(2), 1.95)).unwrap();
        for k in 0..40 {
            let t = k as f64 * 0.53;
            let x = v(t.cos(), t.sin()).scale((k as f64 / 40.0).sqrt());
            assert!(h.eval(&x).unwrap().distance(&g.map.eval(&x).unwrap()) <= 1e-9);
            let out = v(t.cos(), t.sin()).scale(2.0 + 0.05 * k as f64);
            assert_eq!(h.eval(&out).unwrap(), out);
        }
    }

    #[test]
    fn large_translation_breaks_containment() {
        let g = BallDiffeo::new(
            builtin(Builtin::Affine {
                matrix: Matrix::identity(2),
                offset: v(5.0, 0.0),
            }),
            Vector::zeros(2),
            1.0,
            0.5,
        )
        .unwrap();
        let d1 = round_ball(Vector::zeros(2), 2.0);
        let err = insert_inner_map(
            Arc::new(SmoothMap::identity(2)),
            &g,
            &d1,
            &Region::ball(Vector::zeros(2), 1.95),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Containment(_)));
    }
}
