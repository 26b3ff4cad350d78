//! Extension of ball diffeomorphisms to global diffeomorphisms of ℝⁿ that
//! are the identity away from the ball and its image.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::flows::{damped_translation, TUBE_FACTOR};
use crate::geom::{transition_profile, Matrix, TransitionProfile, Vector};
use crate::linearize::{local_linearize, LinearizationRadii};
use crate::maps::{
    compose, extend_conjugate, glue_piecewise, radial_squeeze, sphere_points, Affine, BallDiffeo,
    Orientation, Piece, Region, SeamEvidence, SmoothMap,
};

const MAX_TAU_HALVINGS: usize = 20;
/// Containment is tested against `ε / CONTAINMENT_PAD`.
const CONTAINMENT_PAD: f64 = 1.1;
const SEAM_TOL: f64 = 1e-10;
const ROUTE_SLACK: f64 = 1e-9;

/// The intermediate maps of an extension, kept for inspection and replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PalaisStages {
    /// `H` made the identity near the center.
    pub linearized: Arc<SmoothMap>,
    /// Radial squeeze of `B(c, ϱ+τ)` onto `B(c, δ)`.
    pub squeeze: Arc<SmoothMap>,
    /// `H₁ ∘ Φ⁻¹ ∘ H₁⁻¹`, extended by the identity.
    pub conjugated: Arc<SmoothMap>,
    /// `conjugated ∘ Φ`, equal to `H₁` on `B(c, ϱ+τ)`.
    pub global: Arc<SmoothMap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PalaisPipeline {
    pub input: BallDiffeo,
    pub eps: f64,
    pub tau: f64,
    pub delta: f64,
    pub tau_halvings: usize,
    /// Largest sampled distance from the working ball and its image to `A`.
    pub containment: f64,
    pub radii: Option<LinearizationRadii>,
    pub stages: Option<PalaisStages>,
    pub seam: SeamEvidence,
    pub result: SmoothMap,
}

impl PalaisPipeline {
    pub fn center(&self) -> &Vector {
        &self.input.center
    }

    pub fn rho(&self) -> f64 {
        self.input.radius
    }

    /// `A = B̄(c, ϱ) ∪ H(B̄(c, ϱ))`.
    pub fn core_set(&self) -> Region {
        core_set(&self.input)
    }

    /// `|H₁(Φ⁻¹(H₁⁻¹(y))) − y|`; zero on the image of the outer shell.
    pub fn shell_defect(&self, y: &Vector) -> Result<f64> {
        let Some(s) = &self.stages else {
            return Ok(0.0);
        };
        let x = s.linearized.inverse(y)?;
        let z = s.squeeze.inverse(&x)?;
        Ok(s.linearized.eval(&z)?.distance(y))
    }

    /// `|H₂(x) − H₁(x)|`; zero on `B(c, ϱ+τ)`.
    pub fn interior_defect(&self, x: &Vector) -> Result<f64> {
        let Some(s) = &self.stages else {
            return Ok(0.0);
        };
        Ok(s.global.eval(x)?.distance(&s.linearized.eval(x)?))
    }
}

pub(crate) fn core_set(h: &BallDiffeo) -> Region {
    let ball = h.ball();
    if h.map.is_identity() {
        return ball;
    }
    Region::Union {
        parts: vec![ball.clone(), Region::image_of(h.map.clone(), ball)],
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!(
            "ε must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

fn sample_dirs(n: usize) -> Vec<Vector> {
    sphere_points(n, if n == 2 { 128 } else { 400 })
}

/// Largest sampled distance from `B(c, ϱ+3τ) ∪ H(B(c, ϱ+3τ))` to `A`,
/// bounded above through radial projection onto the sphere `|x − c| = ϱ`.
fn containment_defect(h: &BallDiffeo, tau: f64, dirs: &[Vector]) -> Result<f64> {
    let (c, rho) = (&h.center, h.radius);
    let rings = [1.0, 2.0, 3.0];
    let worst = dirs
        .par_iter()
        .map(|w| -> Result<f64> {
            let base = h.map.eval(&c.axpy(rho, w))?;
            let mut worst = 0.0f64;
            for k in rings {
                let x = c.axpy(rho + k * tau, w);
                worst = worst.max(k * tau).max(h.map.eval(&x)?.distance(&base));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Radius of a ball about `c` containing `H(B(c, r))`, from the image of
/// its boundary sphere with generous padding.
fn image_radius(h: &BallDiffeo, r: f64, dirs: &[Vector]) -> Result<f64> {
    let mut m = r;
    for w in dirs {
        m = m.max(h.map.eval(&h.center.axpy(r, w))?.distance(&h.center));
    }
    Ok(1.25 * m)
}

/// Run the full extension pipeline and keep every stage.
pub fn palais_pipeline(h: &BallDiffeo, eps: f64) -> Result<PalaisPipeline> {
    check_eps(eps)?;
    let (c, rho, n) = (h.center.clone(), h.radius, h.dim());
    let (hc, l) = h.map.eval_jac(&c)?;
    if hc.distance(&c) > 1e-12 * (1.0 + c.norm() + rho) {
        return Err(Error::Parameter(format!(
            "map must fix its center {c:?}, sends it to {hc:?}"
        )));
    }
    if l.determinant() <= 0.0 || h.map.orientation == Orientation::Reversing {
        return Err(Error::Orientation(format!(
            "det DH(c) = {:.3e}",
            l.determinant()
        )));
    }
    if h.map.is_identity() {
        return Ok(PalaisPipeline {
            input: h.clone(),
            eps,
            tau: 0.0,
            delta: 0.0,
            tau_halvings: 0,
            containment: 0.0,
            radii: None,
            stages: None,
            seam: SeamEvidence::default(),
            result: SmoothMap::identity(n).with_orientation(Orientation::Preserving),
        });
    }

    let dirs = sample_dirs(n);
    // a quarter rather than a third leaves H₁ a sliver of margin beyond ϱ+3τ
    let mut tau = rho * h.margin / 4.0;
    let mut halvings = 0;
    let containment = loop {
        let d = containment_defect(h, tau, &dirs).stage("containment")?;
        if d * CONTAINMENT_PAD < eps {
            break d;
        }
        if halvings == MAX_TAU_HALVINGS {
            return Err(Error::Margin(format!(
                "no working margin τ keeps the image within ε = {eps} of A (last τ = {tau:.3e}, distance {d:.3e})"
            )));
        }
        tau *= 0.5;
        halvings += 1;
    };

    let big_r = rho + 3.0 * tau;
    let h_big = h.with_radius(big_r)?;
    let lin = local_linearize(&h_big).stage("local linearization")?;
    let delta = lin.delta;
    let h1 = Arc::new(lin.map);

    let profile: TransitionProfile =
        transition_profile(rho + tau, rho + 2.0 * tau, delta / (rho + tau), 1.0)?;
    let phi = Arc::new(radial_squeeze(profile, c.clone())?);
    let phi_inv = Arc::new(phi.inverted());

    let bound = image_radius(h, big_r, &dirs)?;
    let conj = Arc::new(
        extend_conjugate(
            h1.clone(),
            phi_inv,
            Region::ball(c.clone(), big_r),
            Region::complement(Region::ball(c.clone(), rho + 2.0 * tau)),
            Region::ball(c.clone(), bound),
        )
        .stage("conjugate extension")?
        .with_orientation(Orientation::Preserving),
    );
    let h2 = Arc::new(
        compose(vec![conj.clone(), phi.clone()])
            .stage("global stage")?
            .with_orientation(Orientation::Preserving),
    );

    // the pieces overlap on an annulus inside B̄(c, ϱ) where H₁ = H
    let seam_inner = 0.5 * (0.5 * big_r + rho);
    let glued = glue_piecewise(
        vec![
            // widened a hair so rounding on |x − c| = ϱ still routes to H
            Piece::new(
                Region::ball(c.clone(), rho * (1.0 + ROUTE_SLACK)),
                h.map.clone(),
            ),
            Piece::new(
                Region::complement(Region::ball(c.clone(), seam_inner)),
                h2.clone(),
            ),
        ],
        200,
        SEAM_TOL,
    )
    .stage("final glue")?;
    let seam = glued.seam_evidence().cloned().unwrap_or_default();
    let result = glued
        .with_label("palais_extension")
        .with_orientation(Orientation::Preserving);

    Ok(PalaisPipeline {
        input: h.clone(),
        eps,
        tau,
        delta,
        tau_halvings: halvings,
        containment,
        radii: Some(lin.radii),
        stages: Some(PalaisStages {
            linearized: h1,
            squeeze: phi,
            conjugated: conj,
            global: h2,
        }),
        seam,
        result,
    })
}

/// Global diffeomorphism equal to `H` on `B̄(c, ϱ)` and to the identity at
/// distance `ε` or more from `B̄(c, ϱ) ∪ H(B̄(c, ϱ))`.
pub fn palais_extend(h: &BallDiffeo, eps: f64) -> Result<SmoothMap> {
    Ok(palais_pipeline(h, eps)?.result)
}

const ONTO_TOL: f64 = 1e-10;

fn check_automorphism(g: &BallDiffeo) -> Result<()> {
    let (a, r) = (&g.center, g.radius);
    for w in sample_dirs(g.dim()) {
        let x = a.axpy(r, &w);
        let fwd = g.map.eval(&x)?.distance(a);
        let back = g.map.inverse(&x)?.distance(a);
        if (fwd - r).abs() > ONTO_TOL * (1.0 + r) || (back - r).abs() > ONTO_TOL * (1.0 + r) {
            return Err(Error::Automorphism(format!(
                "boundary point {x:?} goes to radius {fwd:.12} (inverse {back:.12}), ball radius {r}"
            )));
        }
    }
    Ok(())
}

/// Global diffeomorphism equal to `G` on `B̄(a, r)` and the identity outside
/// `B(a, r + ε)`, for `G` mapping that ball onto itself.
pub fn extend_ball_automorphism(g: &BallDiffeo, eps: f64) -> Result<SmoothMap> {
    check_eps(eps)?;
    check_automorphism(g)?;
    let (a, r) = (&g.center, g.radius);
    let ga = g.map.eval(a)?;
    let d = ga.distance(a);
    let recenter = if d > 1e-14 * (1.0 + r + a.norm()) {
        // the damped translation's support lies within √2·tube of [G(a), a]
        let payload = (r - d) / 4.0;
        if !(payload > 0.0) {
            return Err(Error::Geometry(format!(
                "G(a) = {ga:?} is not inside the ball"
            )));
        }
        let tube = TUBE_FACTOR * payload;
        if d + std::f64::consts::SQRT_2 * tube >= r {
            return Err(Error::Geometry(
                "recentering tube does not fit inside the ball".into(),
            ));
        }
        Some(Arc::new(
            damped_translation(&ga, a, payload, tube).stage("recentering")?,
        ))
    } else {
        None
    };
    let fixed = match &recenter {
        Some(t) => BallDiffeo::unchecked(
            Arc::new(
                compose(vec![t.clone(), g.map.clone()])?.with_orientation(Orientation::Preserving),
            ),
            a.clone(),
            r,
            g.margin,
        )?,
        None => g.clone(),
    };
    let ext = Arc::new(palais_extend(&fixed, eps).stage("extension")?);
    let out = match recenter {
        Some(t) => compose(vec![Arc::new(t.inverted()), ext])?,
        None => Arc::try_unwrap(ext).unwrap_or_else(|e| (*e).clone()),
    };
    Ok(out
        .with_label("ball_automorphism_extension")
        .with_orientation(Orientation::Preserving))
}

/// Per-ball data from [`normalize_balls_detailed`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedBall {
    pub anchor: Vector,
    /// `H_i`, carrying `B̄(anchor, ε)` onto `D_i` and fixing the anchor.
    pub local: BallDiffeo,
    pub extension: Arc<SmoothMap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub map: SmoothMap,
    pub balls: Vec<NormalizedBall>,
}

impl Normalization {
    pub fn anchors(&self) -> Vec<Vector> {
        self.balls.iter().map(|b| b.anchor.clone()).collect()
    }
}

/// `H_i(x) = G_i(c_i + (ϱ_i/ε)(x − p_i))` with `p_i = G_i(c_i)`.
fn local_parametrization(g: &BallDiffeo, eps: f64) -> Result<(Vector, BallDiffeo)> {
    let n = g.dim();
    let p = g.map.eval(&g.center)?;
    let s = g.radius / eps;
    let scale = Affine {
        matrix: Matrix::identity(n).scale(s),
        offset: &g.center - &p.scale(s),
    };
    let scale = Arc::new(scale.into_map()?);
    let h = compose(vec![g.map.clone(), scale])?.with_orientation(Orientation::Preserving);
    let local = BallDiffeo::unchecked(Arc::new(h), p.clone(), eps, g.margin)?;
    Ok((p, local))
}

fn boundary_image(g: &BallDiffeo, dirs: &[Vector]) -> Result<Vec<Vector>> {
    dirs.iter()
        .map(|w| g.map.eval(&g.center.axpy(g.radius, w)))
        .collect()
}

/// Global `F_ε` with `F_ε(B̄(p_i, ε)) = D_i`, the identity at distance `ε`
/// or more from `∪ D_i`; anchors `p_i = G_i(c_i)`.
pub fn normalize_balls(balls: &[BallDiffeo], eps: f64) -> Result<(SmoothMap, Vec<Vector>)> {
    let norm = normalize_balls_detailed(balls, eps)?;
    let anchors = norm.anchors();
    Ok((norm.map, anchors))
}

pub fn normalize_balls_detailed(balls: &[BallDiffeo], eps: f64) -> Result<Normalization> {
    check_eps(eps)?;
    let Some(first) = balls.first() else {
        return Err(Error::Geometry("no balls to normalize".into()));
    };
    let n = first.dim();
    let dirs = sample_dirs(n);
    let mut boundaries = Vec::with_capacity(balls.len());
    for (i, g) in balls.iter().enumerate() {
        if g.dim() != n {
            return Err(Error::Geometry(format!(
                "ball {i} has dimension {}",
                g.dim()
            )));
        }
        if g.jacobian_at_center()?.determinant() <= 0.0 || g.orientation() == Orientation::Reversing
        {
            return Err(Error::Orientation(format!(
                "parametrization of ball {i} reverses orientation"
            )));
        }
        boundaries.push(boundary_image(g, &dirs)?);
    }
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let d = boundaries[i]
                .iter()
                .flat_map(|x| boundaries[j].iter().map(move |y| x.distance(y)))
                .fold(f64::INFINITY, f64::min);
            if d <= 4.0 * eps {
                return Err(Error::Geometry(format!(
                    "balls {i} and {j} are {d:.4} apart, which is not more than 4ε = {}",
                    4.0 * eps
                )));
            }
        }
    }

    let normalized = balls
        .par_iter()
        .enumerate()
        .map(|(i, g)| -> Result<NormalizedBall> {
            let (p, local) = local_parametrization(g, eps)?;
            // B̄(p, ε) must sit inside D̊_i
            for w in &dirs {
                let pre = g.map.inverse(&p.axpy(eps, w))?;
                if pre.distance(&g.center) >= g.radius {
                    return Err(Error::Geometry(format!(
                        "ε = {eps} too large: B̄(p_{i}, ε) is not inside the interior of ball {i}"
                    )));
                }
            }
            let ext = palais_extend(&local, eps).map_err(|e| e.at(format!("ball {i}")))?;
            Ok(NormalizedBall {
                anchor: p,
                local,
                extension: Arc::new(ext),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let stages: Vec<Arc<SmoothMap>> = normalized
        .iter()
        .filter(|b| !b.extension.is_identity())
        .map(|b| b.extension.clone())
        .collect();
    let map = if stages.is_empty() {
        SmoothMap::identity(n)
    } else {
        compose(stages)?
    };
    Ok(Normalization {
        map: map
            .with_label("normalization")
            .with_orientation(Orientation::Preserving),
        balls: normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{construct_builtin, Builtin};
    use std::f64::consts::PI;

    fn v(x: f64, y: f64) -> Vector {
        Vector::from([x, y])
    }

    fn ball(b: Builtin, center: Vector, radius: f64, margin: f64) -> BallDiffeo {
        let m = construct_builtin(center.dim(), b, Region::All)
            .unwrap()
            .shared();
        BallDiffeo::new(m, center, radius, margin).unwrap()
    }

    fn rotation(angle: f64, center: Vector) -> Builtin {
        Builtin::Rotation {
            angle,
            center,
            plane: [0, 1],
        }
    }

    #[test]
    fn identity_extends_to_identity() {
        let h = BallDiffeo::new(Arc::new(SmoothMap::identity(2)), v(0.0, 0.0), 1.0, 0.5).unwrap();
        assert!(palais_extend(&h, 0.3).unwrap().is_identity());
    }

    #[test]
    fn rotation_extension_contract() {
        let h = ball(rotation(PI / 4.0, v(0.0, 0.0)), v(0.0, 0.0), 1.0, 0.5);
        let p = palais_pipeline(&h, 0.5).unwrap();
        let f = &p.result;
        for k in 0..60 {
            let t = k as f64 * 0.37;
            let r = (k as f64 / 60.0).sqrt();
            let x = v(r * t.cos(), r * t.sin());
            assert_eq!(f.eval(&x).unwrap(), h.map.eval(&x).unwrap());
            let far = v(1.5 * t.cos(), 1.5 * t.sin()).scale(1.0 + k as f64 / 30.0);
            assert_eq!(f.eval(&far).unwrap(), far);
        }
        for k in 0..100 {
            let t = k as f64 * 0.61;
            let r = 1.0 + 0.5 * k as f64 / 100.0;
            let x = v(r * t.cos(), r * t.sin());
            let (y, j) = f.eval_jac(&x).unwrap();
            assert!(j.determinant() > 0.0);
            assert!(f.inverse(&y).unwrap().distance(&x) < 1e-8);
        }
    }

    #[test]
    fn internal_identities_hold() {
        let h = ball(
            Builtin::PolyPerturb {
                coef: 0.1,
                center: v(0.0, 0.0),
                source: 0,
                target: 1,
            },
            v(0.0, 0.0),
            1.0,
            0.5,
        );
        let p = palais_pipeline(&h, 0.3).unwrap();
        let s = p.stages.as_ref().unwrap();
        let (c, rho, tau) = (p.center().clone(), p.rho(), p.tau);
        for k in 0..100 {
            let t = k as f64 * 0.83;
            let w = v(t.cos(), t.sin());
            let x = c.axpy((rho + tau) * (k as f64 / 100.0), &w);
            assert!(p.interior_defect(&x).unwrap() <= 1e-10);
            let shell = c.axpy(rho + 2.0 * tau + tau * (k as f64 / 100.0), &w);
            let y = s.linearized.eval(&shell).unwrap();
            assert!(p.shell_defect(&y).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn reversing_map_is_rejected() {
        let m = Affine {
            matrix: Matrix::from_diagonal(&[1.0, -1.0]),
            offset: Vector::zeros(2),
        }
        .into_map()
        .unwrap()
        .shared();
        let h = BallDiffeo::unchecked(m, v(0.0, 0.0), 1.0, 0.5).unwrap();
        assert!(matches!(palais_extend(&h, 0.3), Err(Error::Orientation(_))));
    }

    #[test]
    fn tiny_epsilon_still_fits() {
        let h = ball(rotation(0.3, v(1.0, 1.0)), v(1.0, 1.0), 1.0, 0.5);
        let p = palais_pipeline(&h, 0.01).unwrap();
        assert!(p.tau_halvings > 0);
        let far = v(1.0, 2.02);
        assert_eq!(p.result.eval(&far).unwrap(), far);
    }

    #[test]
    fn off_center_automorphism_is_recentered() {
        let a = v(1.0, -1.0);
        let g = ball(
            Builtin::DampedTranslate {
                from: a.clone(),
                to: v(1.3, -1.0),
                radius: 0.2,
            },
            a.clone(),
            1.0,
            0.5,
        );
        let f = extend_ball_automorphism(&g, 0.25).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.71;
            let x = a.axpy(0.99 * (k as f64 / 50.0), &v(t.cos(), t.sin()));
            assert!(f.eval(&x).unwrap().distance(&g.map.eval(&x).unwrap()) <= 1e-12);
            let far = a.axpy(1.25 + 0.01 * k as f64, &v(t.cos(), t.sin()));
            assert_eq!(f.eval(&far).unwrap(), far);
        }
    }

    #[test]
    fn non_automorphism_is_rejected() {
        let g = ball(rotation(0.5, v(0.2, 0.0)), v(0.0, 0.0), 1.0, 0.5);
        assert!(matches!(
            extend_ball_automorphism(&g, 0.2),
            Err(Error::Automorphism(_))
        ));
    }

    #[test]
    fn affine_ball_normalization() {
        let c = v(3.0, 1.0);
        let g = BallDiffeo::new(
            Arc::new(
                Affine {
                    matrix: Matrix::identity(2).scale(2.0),
                    offset: c.clone(),
                }
                .into_map()
                .unwrap(),
            ),
            Vector::zeros(2),
            1.0,
            0.5,
        )
        .unwrap();
        let (f, anchors) = normalize_balls(&[g], 0.2).unwrap();
        assert_eq!(anchors[0], c);
        let y = f.eval(&c.axpy(0.2, &v(1.0, 0.0))).unwrap();
        assert!(y.distance(&v(5.0, 1.0)) < 1e-12, "{y:?}");
        let far = v(3.0, 3.25);
        assert_eq!(f.eval(&far).unwrap(), far);
    }

    #[test]
    fn close_balls_are_rejected() {
        let a = ball(Builtin::Identity, v(0.0, 0.0), 1.0, 0.5);
        let b = ball(Builtin::Identity, v(2.5, 0.0), 1.0, 0.5);
        let err = normalize_balls(&[a, b], 0.2).unwrap_err();
        assert!(err.to_string().contains("balls 0 and 1"));
    }
}
