//! Local linearization: make a center-fixing ball diffeomorphism the identity
//! near its center while leaving it untouched near the boundary.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::flows::{DampedLinearField, FlowMap, VectorField};
use crate::geom::{linear_factorize, Cutoff, Matrix, Vector};
use crate::maps::{
    compose, glue_piecewise, newton_solve, sphere_points, BallDiffeo, Eval, Node, Piece, Region,
    SeamEvidence, SmoothMap,
};

/// `H_b(x) = (1 − β)·H(x) + β·(H(c) + L(x − c))`, with `β` the cutoff that is
/// 1 on `B(c, inner)` and 0 outside `B(c, outer)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Blend {
    pub map: Arc<SmoothMap>,
    pub center: Vector,
    pub anchor: Vector,
    pub linear: Matrix,
    pub cutoff: Cutoff,
}

impl Blend {
    fn linear_part(&self, x: &Vector) -> Vector {
        &self.anchor + &self.linear.mul_vec(&(x - &self.center))
    }

    fn linear_inverse(&self, y: &Vector) -> Result<Vector> {
        let z = self
            .linear
            .solve(&(y - &self.anchor))
            .ok_or_else(|| Error::NotDiffeomorphism("singular linear part".into()))?;
        Ok(&self.center + &z)
    }

    fn tol(&self, y: &Vector) -> f64 {
        1e-14 * (1.0 + y.norm() + self.cutoff.outer)
    }
}

impl Eval for Blend {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        let r = x.distance(&self.center);
        if r >= self.cutoff.outer {
            return self.map.eval(x);
        }
        if r <= self.cutoff.inner {
            return Ok(self.linear_part(x));
        }
        let b = self.cutoff.value(r);
        let h = self.map.eval(x)?;
        Ok(h.scale(1.0 - b).axpy(b, &self.linear_part(x)))
    }

    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        let z = x - &self.center;
        let r = z.norm();
        if r >= self.cutoff.outer {
            return self.map.eval_jac(x);
        }
        if r <= self.cutoff.inner {
            return Ok((self.linear_part(x), self.linear.clone()));
        }
        let b = self.cutoff.value(r);
        let (h, dh) = self.map.eval_jac(x)?;
        let lin = self.linear_part(x);
        let y = h.scale(1.0 - b).axpy(b, &lin);
        let mut jac = &dh.scale(1.0 - b) + &self.linear.scale(b);
        let db = self.cutoff.deriv(r);
        if db != 0.0 && r > 0.0 {
            jac += &(&lin - &h).outer(&z.scale(db / r));
        }
        Ok((y, jac))
    }

    fn inverse(&self, y: &Vector) -> Result<Vector> {
        let xl = self.linear_inverse(y)?;
        if xl.distance(&self.center) <= self.cutoff.inner {
            return Ok(xl);
        }
        let xh = self.map.inverse(y).ok();
        if let Some(xh) = &xh {
            if xh.distance(&self.center) >= self.cutoff.outer {
                return Ok(xh.clone());
            }
        }
        let tol = self.tol(y);
        let mut seeds = vec![xl];
        seeds.extend(xh);
        seeds.push(y.clone());
        let mut best: Option<(f64, Vector)> = None;
        for s in &seeds {
            let out = newton_solve(|x| self.eval_jac(x), y, s, tol);
            if out.converged {
                return Ok(out.x);
            }
            if best.as_ref().is_none_or(|(r, _)| out.residual < *r) {
                best = Some((out.residual, out.x));
            }
        }
        match best {
            Some((r, x)) if r <= 1e3 * tol => Ok(x),
            _ => Err(Error::NotDiffeomorphism(format!(
                "blend inversion failed at {y:?}"
            ))),
        }
    }
}

/// Minimum Jacobian determinant of `map` over a polar grid of the shell
/// `inner ≤ |x − c| ≤ outer`.
fn min_det_on_shell(map: &SmoothMap, c: &Vector, inner: f64, outer: f64) -> Result<(f64, Vector)> {
    let n = c.dim();
    let dirs = sphere_points(n, if n == 2 { 96 } else { 300 });
    let rings = 16;
    let mut worst = (f64::INFINITY, c.clone());
    for k in 0..=rings {
        let r = inner + (outer - inner) * k as f64 / rings as f64;
        for w in &dirs {
            let x = c.axpy(r, w);
            let d = map.jacobian(&x)?.determinant();
            if d < worst.0 {
                worst = (d, x);
            }
        }
    }
    Ok(worst)
}

/// Blend `H` into its derivative at the center: `DH(c)`-affine on
/// `B(c, δ₁)`, `H` outside `B(c, δ₂)`.
pub fn blend_with_derivative(h: &BallDiffeo, delta2: f64, delta1: f64) -> Result<SmoothMap> {
    if !(delta1 > 0.0 && delta1 < delta2 && delta2 <= 0.5 * h.radius * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!(
            "blend radii need 0 < δ₁ < δ₂ ≤ ϱ/2, got δ₁={delta1}, δ₂={delta2}, ϱ={}",
            h.radius
        )));
    }
    let (anchor, linear) = h.map.eval_jac(&h.center)?;
    if linear.determinant() <= 0.0 {
        return Err(Error::Orientation(
            "derivative at the center has non-positive determinant".into(),
        ));
    }
    let n = h.dim();
    let blend = Blend {
        map: h.map.clone(),
        center: h.center.clone(),
        anchor,
        linear,
        cutoff: Cutoff::new(delta1, delta2)?,
    };
    let m = SmoothMap::new(n, Node::Blend(blend))
        .with_domain(h.map.domain.clone())
        .with_label("blend");
    let (min_det, point) = min_det_on_shell(&m, &h.center, delta1, delta2)?;
    if !(min_det > 0.0) {
        return Err(Error::BlendFailure { min_det, point });
    }
    Ok(m)
}

/// Flow-built diffeomorphism `Λ` with `Λ(x) = c + A(x − c)` on `B(c, r_in)`
/// and `Λ = id` outside `B(c, r_out)`: the stretch `exp(Y)` then the
/// rotation `exp(K)`, each the time-1 map of a damped linear field.
pub fn damped_linear_deform(
    a: &Matrix,
    center: &Vector,
    r_in: f64,
    r_out: f64,
) -> Result<SmoothMap> {
    let n = center.dim();
    if a.dim() != n {
        return Err(Error::Parameter(
            "matrix and center disagree in dimension".into(),
        ));
    }
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::Parameter(format!(
            "need 0 < r_in < r_out, got {r_in}, {r_out}"
        )));
    }
    let f = linear_factorize(a)?;
    let growth = f.sym.spectral_norm();
    let plateau = r_in * growth.exp() * 1.1;
    if plateau >= r_out {
        return Err(Error::Geometry(format!(
            "stretch plateau {plateau:.4e} does not fit inside r_out = {r_out:.4e}; shrink r_in"
        )));
    }
    let cutoff = Cutoff::new(plateau, r_out)?;
    let mut stages = Vec::new();
    if f.skew.max_abs() > 0.0 {
        let field = DampedLinearField::new(center.clone(), f.skew.clone(), cutoff);
        stages.push(Arc::new(
            FlowMap::new(VectorField::DampedLinear(field), 1.0, 1).into_map(n),
        ));
    }
    if f.sym.max_abs() > 0.0 {
        let field = VectorField::DampedLinear(DampedLinearField::new(
            center.clone(),
            f.sym.clone(),
            cutoff,
        ));
        let steps = refined_steps(&field, center, plateau, r_out)?;
        stages.push(Arc::new(FlowMap::new(field, 1.0, steps).into_map(n)));
    }
    let out = match stages.len() {
        0 => SmoothMap::identity(n),
        _ => compose(stages)?,
    };
    Ok(out.with_label("damped_linear_deform"))
}

const MAX_STEPS: usize = 1 << 13;

/// Smallest power-of-two step count (at least 32) for which doubling the
/// steps moves probe points of the transition shell by ≤ 1e−12·r_out.
fn refined_steps(field: &VectorField, center: &Vector, inner: f64, outer: f64) -> Result<usize> {
    let n = center.dim();
    let dirs = sphere_points(n, if n == 2 { 12 } else { 24 });
    let probes: Vec<Vector> = [0.2, 0.5, 0.8]
        .iter()
        .flat_map(|f| {
            let r = inner + f * (outer - inner);
            dirs.iter().map(move |w| center.axpy(r, w))
        })
        .collect();
    let mut steps = 32;
    let mut prev: Vec<Vector> = probes
        .iter()
        .map(|x| crate::flows::integrate_flow(field, 1.0, x, steps))
        .collect::<Result<_>>()?;
    while steps < MAX_STEPS {
        let next: Vec<Vector> = probes
            .iter()
            .map(|x| crate::flows::integrate_flow(field, 1.0, x, 2 * steps))
            .collect::<Result<_>>()?;
        let change = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        steps *= 2;
        if change <= 1e-12 * outer {
            return Ok(steps);
        }
        prev = next;
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizationRadii {
    /// Identity plateau radius δ.
    pub delta0: f64,
    /// Support radius of the linear deformation.
    pub delta1_prime: f64,
    /// Outer radius of the affine region of the blend.
    pub delta1: f64,
    /// Radius beyond which the map is untouched.
    pub delta2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearizationResult {
    pub map: SmoothMap,
    pub delta: f64,
    pub radii: LinearizationRadii,
    pub min_det: f64,
    pub seam: SeamEvidence,
    pub halvings: usize,
}

const MAX_HALVINGS: usize = 40;

/// Replace `H` by `H₁` with `H₁ = id` on `B(c, δ)` and `H₁ = H` outside
/// `B(c, δ₂) ⊂ B(c, ϱ/2)`; `δ₂` starts at `ϱ/4` and halves until the blend
/// and the composite both have positive Jacobian determinant.
pub fn local_linearize(h: &BallDiffeo) -> Result<LinearizationResult> {
    let c = &h.center;
    let n = h.dim();
    let rho = h.radius;
    let (hc, l) = h.map.eval_jac(c)?;
    if hc.distance(c) > 1e-12 * (1.0 + c.norm() + rho) {
        return Err(Error::Parameter(format!(
            "map must fix its center, moves it to {hc:?}"
        )));
    }
    if l.determinant() <= 0.0 {
        return Err(Error::Orientation(format!(
            "det DH(c) = {:.3e}",
            l.determinant()
        )));
    }
    if h.map.is_identity() {
        let d = rho / 4.0;
        return Ok(LinearizationResult {
            map: SmoothMap::identity(n),
            delta: d,
            radii: LinearizationRadii {
                delta0: d,
                delta1_prime: d,
                delta1: d,
                delta2: d,
            },
            min_det: 1.0,
            seam: SeamEvidence::default(),
            halvings: 0,
        });
    }
    let l_inv = l
        .inverse()
        .ok_or_else(|| Error::Conditioning("singular derivative".into()))?;
    let inv_factors = linear_factorize(&l_inv).stage("factorize DH(c)⁻¹")?;
    let growth = inv_factors.sym.spectral_norm().exp();

    let mut delta2 = rho / 4.0;
    let mut last_failure = None;
    for halvings in 0..=MAX_HALVINGS {
        if halvings > 0 {
            delta2 *= 0.5;
        }
        let delta1 = 0.5 * delta2;
        let blend = match blend_with_derivative(h, delta2, delta1) {
            Ok(b) => Arc::new(b),
            Err(e @ Error::BlendFailure { .. }) => {
                last_failure = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let delta1_prime = delta1 / (1.1 * growth);
        let delta0 = delta1_prime / (2.2 * growth);
        let lambda =
            Arc::new(damped_linear_deform(&l_inv, c, delta0, delta1_prime).stage("linear deform")?);
        let middle = Arc::new(compose(vec![blend, lambda])?.with_label("blend∘deform"));
        let (min_det, point) = min_det_on_shell(&middle, c, 0.0, delta2)?;
        if !(min_det > 0.0) {
            last_failure = Some(Error::BlendFailure { min_det, point });
            continue;
        }
        let pieces = vec![
            Piece::new(
                Region::ball(c.clone(), delta0),
                Arc::new(SmoothMap::identity(n)),
            ),
            Piece::new(
                Region::complement(Region::ball(c.clone(), delta2)),
                h.map.clone(),
            ),
            Piece::new(Region::ball(c.clone(), delta2), middle),
        ];
        let glued = glue_piecewise(pieces, 200, 1e-12).stage("glue linearization")?;
        let seam = glued.seam_evidence().cloned().unwrap_or_default();
        let map = glued
            .with_label("linearized")
            .with_domain(h.map.domain.clone());
        return Ok(LinearizationResult {
            map,
            delta: delta0,
            radii: LinearizationRadii {
                delta0,
                delta1_prime,
                delta1,
                delta2,
            },
            min_det,
            seam,
            halvings,
        });
    }
    Err(Error::Linearization(format!(
        "no admissible radius after {MAX_HALVINGS} halvings; last failure: {}",
        last_failure.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{construct_builtin, Builtin};
    use std::f64::consts::PI;

    fn ball(map: SmoothMap, radius: f64) -> BallDiffeo {
        let n = map.dim;
        BallDiffeo::new(Arc::new(map), Vector::zeros(n), radius, 0.5).unwrap()
    }

    #[test]
    fn linear_maps_blend_to_themselves() {
        let a = Matrix::from_rows(&[vec![1.0, 0.3], vec![-0.2, 0.9]]);
        let h = ball(
            construct_builtin(
                2,
                Builtin::Affine {
                    matrix: a,
                    offset: Vector::zeros(2),
                },
                Region::All,
            )
            .unwrap(),
            1.0,
        );
        let b = blend_with_derivative(&h, 0.4, 0.2).unwrap();
        for p in [[0.1, 0.05], [0.3, -0.1], [0.0, 0.38]] {
            let x = Vector::from(p);
            assert!(b.eval(&x).unwrap().distance(&h.map.eval(&x).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn quadratic_blend_keeps_positive_determinant() {
        let h = ball(
            construct_builtin(
                2,
                Builtin::PolyPerturb {
                    coef: 1.0,
                    center: Vector::zeros(2),
                    source: 0,
                    target: 1,
                },
                Region::All,
            )
            .unwrap(),
            0.5,
        );
        let b = blend_with_derivative(&h, 0.2, 0.1).unwrap();
        let x = Vector::from([0.05, 0.03]);
        assert_eq!(b.eval(&x).unwrap(), x);
        let x = Vector::from([0.25, 0.0]);
        assert_eq!(b.eval(&x).unwrap(), h.map.eval(&x).unwrap());
        let mut min_det = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let x = Vector::from([
                    -0.25 + 0.5 * i as f64 / 199.0,
                    -0.25 + 0.5 * j as f64 / 199.0,
                ]);
                min_det = min_det.min(b.jacobian(&x).unwrap().determinant());
            }
        }
        assert!(min_det > 0.0);
    }

    #[test]
    fn rotation_deform_preserves_norms() {
        let a = Matrix::plane_rotation(2, 0, 1, PI / 2.0);
        let d = damped_linear_deform(&a, &Vector::zeros(2), 0.5, 1.0);
        // a quarter turn has no stretch, so the plateau is 0.55 < 1
        let d = d.unwrap();
        for k in 0..300 {
            let t = k as f64 * 0.021;
            let x = Vector::from([t.cos(), t.sin()]).scale(1.2 * k as f64 / 300.0);
            let y = d.eval(&x).unwrap();
            assert!((y.norm() - x.norm()).abs() <= 1e-10);
            if x.norm() <= 0.5 {
                assert!(y.distance(&a.mul_vec(&x)) < 1e-15);
            }
            if x.norm() >= 1.0 {
                assert_eq!(y, x);
            }
        }
    }

    #[test]
    fn stretch_deform_is_exact_inside_and_converged_outside() {
        let a = Matrix::from_diagonal(&[2.0, 0.5]);
        let d = damped_linear_deform(&a, &Vector::zeros(2), 0.1, 1.0).unwrap();
        assert!(
            d.eval(&Vector::from([0.05, 0.0]))
                .unwrap()
                .distance(&Vector::from([0.1, 0.0]))
                < 1e-15
        );
        let Node::Flow(flow) = &d.node else {
            panic!("expected a single flow")
        };
        for i in 0..50 {
            for j in 0..50 {
                let x = Vector::from([-1.0 + 2.0 * i as f64 / 49.0, -1.0 + 2.0 * j as f64 / 49.0]);
                let fine = flow.integrate(&x, flow.steps * 10).unwrap();
                assert!(d.eval(&x).unwrap().distance(&fine) <= 1e-9);
            }
        }
    }

    #[test]
    fn oversized_inner_radius_is_a_geometry_error() {
        let a = Matrix::from_diagonal(&[3.0, 1.0 / 3.0]);
        assert!(matches!(
            damped_linear_deform(&a, &Vector::zeros(2), 0.5, 1.0),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn linearized_twist_is_identity_near_center() {
        let twist = construct_builtin(
            2,
            Builtin::Twist {
                angle: PI / 3.0,
                center: Vector::zeros(2),
                inner: 0.1,
                outer: 0.9,
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap();
        let h = ball(twist, 1.0);
        let res = local_linearize(&h).unwrap();
        let d = res.delta;
        for k in 0..100 {
            let t = k as f64 * 0.37;
            let x = Vector::from([t.cos(), t.sin()]).scale(0.99 * d * (k as f64 / 100.0));
            assert_eq!(res.map.eval(&x).unwrap(), x);
        }
        for k in 0..100 {
            let t = k as f64 * 0.37;
            let x = Vector::from([t.cos(), t.sin()]).scale(0.5 + 0.5 * (k as f64 / 100.0));
            assert_eq!(res.map.eval(&x).unwrap(), h.map.eval(&x).unwrap());
        }
        for k in 0..200 {
            let t = k as f64 * 0.37;
            let x = Vector::from([t.cos(), t.sin()]).scale(0.6 * (k as f64 / 200.0));
            let y = res.map.eval(&x).unwrap();
            assert!(res.map.inverse(&y).unwrap().distance(&x) < 1e-8);
            assert!(res.map.jacobian(&x).unwrap().determinant() > 0.0);
        }
    }
}
