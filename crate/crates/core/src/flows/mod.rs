//! Compactly supported vector fields and their time-t maps.

mod translation;
mod transport;

use serde::{Deserialize, Serialize};

pub use translation::TranslationField;
pub use transport::{
    check_tube, damped_translation, move_balls, transport_along_polyline, Polyline, TUBE_FACTOR,
};

use crate::error::{Error, Result};
use crate::geom::{expm, Cutoff, Matrix, Vector};
use crate::maps::{Eval, Node, Region, SmoothMap};

pub const DEFAULT_STEPS: usize = 64;

/// `β(|x − c|) · M (x − c)`, vanishing outside `B(c, cutoff.outer)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampedLinearField {
    pub center: Vector,
    pub matrix: Matrix,
    pub cutoff: Cutoff,
    /// Spectral norm of `matrix`: trajectories grow by at most `e^{rate·|t|}`.
    pub rate: f64,
}

impl DampedLinearField {
    pub fn new(center: Vector, matrix: Matrix, cutoff: Cutoff) -> DampedLinearField {
        let rate = matrix.spectral_norm();
        DampedLinearField {
            center,
            matrix,
            cutoff,
            rate,
        }
    }

    /// Whether the whole trajectory of `z = x − center` over time `t` stays
    /// where the cutoff is 1, so that the flow is `exp(tM)` exactly.
    fn stays_linear(&self, r: f64, t: f64) -> bool {
        r * (self.rate * t.abs()).exp() <= self.cutoff.inner
    }

    pub fn is_skew(&self) -> bool {
        let m = &self.matrix;
        let n = m.dim();
        let scale = m.max_abs();
        (0..n).all(|i| (0..=i).all(|j| (m[(i, j)] + m[(j, i)]).abs() <= 1e-15 * scale))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorField {
    Zero,
    Constant { value: Vector },
    Linear { matrix: Matrix },
    DampedLinear(DampedLinearField),
    DampedTranslation(TranslationField),
}

impl VectorField {
    /// Closed region outside which the field vanishes; `None` for the zero field.
    pub fn support(&self) -> Option<Region> {
        match self {
            VectorField::Zero => None,
            VectorField::Constant { .. } | VectorField::Linear { .. } => Some(Region::All),
            VectorField::DampedLinear(f) => Some(Region::ball(f.center.clone(), f.cutoff.outer)),
            VectorField::DampedTranslation(f) => {
                let mid = (&f.from + &f.to).scale(0.5);
                Some(Region::ball(
                    mid,
                    0.5 * f.length() + std::f64::consts::SQRT_2 * f.outer,
                ))
            }
        }
    }

    fn vanishes_near(&self, x: &Vector) -> bool {
        match self {
            VectorField::Zero => true,
            VectorField::Constant { .. } | VectorField::Linear { .. } => false,
            VectorField::DampedLinear(f) => x.distance(&f.center) >= f.cutoff.outer,
            VectorField::DampedTranslation(f) => !f.in_support(x),
        }
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        match self {
            VectorField::Zero => Vector::zeros(x.dim()),
            VectorField::Constant { value } => value.clone(),
            VectorField::Linear { matrix } => matrix.mul_vec(x),
            VectorField::DampedLinear(f) => {
                let z = x - &f.center;
                let b = f.cutoff.value(z.norm());
                if b == 0.0 {
                    return Vector::zeros(x.dim());
                }
                f.matrix.mul_vec(&z).scale(b)
            }
            VectorField::DampedTranslation(f) => f.value(x),
        }
    }

    /// Field value and Jacobian.
    pub fn eval_jac(&self, x: &Vector) -> (Vector, Matrix) {
        let n = x.dim();
        match self {
            VectorField::Zero | VectorField::Constant { .. } => (self.eval(x), Matrix::zeros(n)),
            VectorField::Linear { matrix } => (matrix.mul_vec(x), matrix.clone()),
            VectorField::DampedLinear(f) => {
                let z = x - &f.center;
                let r = z.norm();
                let b = f.cutoff.value(r);
                if b == 0.0 {
                    return (Vector::zeros(n), Matrix::zeros(n));
                }
                let mz = f.matrix.mul_vec(&z);
                let mut jac = f.matrix.scale(b);
                let db = f.cutoff.deriv(r);
                if db != 0.0 && r > 0.0 {
                    jac += &mz.outer(&z.scale(db / r));
                }
                (mz.scale(b), jac)
            }
            VectorField::DampedTranslation(f) => f.value_jac(x),
        }
    }
}

fn checked(v: Vector, x: &Vector) -> Result<Vector> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("non-finite field value near {x:?}")))
    }
}

/// Classical fixed-step fourth-order integration of `x' = field(x)` over
/// `[0, t]`. Points where the field vanishes identically are returned as is.
pub fn integrate_flow(field: &VectorField, t: f64, x: &Vector, steps: usize) -> Result<Vector> {
    if steps == 0 {
        return Err(Error::Parameter(
            "integration needs at least one step".into(),
        ));
    }
    if let VectorField::Constant { value } = field {
        return Ok(x.axpy(t, value));
    }
    if field.vanishes_near(x) {
        return Ok(x.clone());
    }
    let h = t / steps as f64;
    let mut z = x.clone();
    for _ in 0..steps {
        let k1 = checked(field.eval(&z), &z)?;
        let k2 = checked(field.eval(&z.axpy(0.5 * h, &k1)), &z)?;
        let k3 = checked(field.eval(&z.axpy(0.5 * h, &k2)), &z)?;
        let k4 = checked(field.eval(&z.axpy(h, &k3)), &z)?;
        z = z.axpy(h / 6.0, &(k1 + k2.scale(2.0) + k3.scale(2.0) + k4));
    }
    Ok(z)
}

/// As [`integrate_flow`], also carrying the variational equation for the
/// Jacobian of the time-`t` map.
pub fn integrate_flow_jac(
    field: &VectorField,
    t: f64,
    x: &Vector,
    steps: usize,
) -> Result<(Vector, Matrix)> {
    let n = x.dim();
    if steps == 0 {
        return Err(Error::Parameter(
            "integration needs at least one step".into(),
        ));
    }
    if let VectorField::Constant { value } = field {
        return Ok((x.axpy(t, value), Matrix::identity(n)));
    }
    if field.vanishes_near(x) {
        return Ok((x.clone(), Matrix::identity(n)));
    }
    let h = t / steps as f64;
    let mut z = x.clone();
    let mut j = Matrix::identity(n);
    for _ in 0..steps {
        let (k1, a1) = field.eval_jac(&z);
        let l1 = &a1 * &j;
        let (k2, a2) = field.eval_jac(&z.axpy(0.5 * h, &k1));
        let l2 = &a2 * &(&j + &l1.scale(0.5 * h));
        let (k3, a3) = field.eval_jac(&z.axpy(0.5 * h, &k2));
        let l3 = &a3 * &(&j + &l2.scale(0.5 * h));
        let (k4, a4) = field.eval_jac(&z.axpy(h, &k3));
        let l4 = &a4 * &(&j + &l3.scale(h));
        z = z.axpy(
            h / 6.0,
            &checked(k1 + k2.scale(2.0) + k3.scale(2.0) + k4, &z)?,
        );
        let dj = &(&l1 + &l2.scale(2.0)) + &(&l3.scale(2.0) + &l4);
        j = &j + &dj.scale(h / 6.0);
    }
    Ok((z, j))
}

/// Time-`time` map of a field. Damped translations and damped skew fields
/// are evaluated in closed form; everything else by fixed-step integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub field: VectorField,
    pub time: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

impl FlowMap {
    pub fn new(field: VectorField, time: f64, steps: usize) -> FlowMap {
        FlowMap { field, time, steps }
    }

    pub fn into_map(self, dim: usize) -> SmoothMap {
        SmoothMap::new(dim, Node::Flow(self)).with_label("flow")
    }

    /// Whether the map is evaluated without time stepping.
    pub fn is_closed_form(&self) -> bool {
        match &self.field {
            VectorField::DampedLinear(f) => f.is_skew(),
            VectorField::DampedTranslation(_)
            | VectorField::Zero
            | VectorField::Constant { .. } => true,
            VectorField::Linear { .. } => true,
        }
    }

    /// Same map evaluated by time stepping with `steps` steps, ignoring any
    /// closed form. Used to check the closed forms and step convergence.
    pub fn integrate(&self, x: &Vector, steps: usize) -> Result<Vector> {
        integrate_flow(&self.field, self.time, x, steps)
    }

    fn apply(&self, x: &Vector, t: f64) -> Result<Vector> {
        match &self.field {
            VectorField::DampedTranslation(f) => f.flow(x, t),
            VectorField::DampedLinear(f) if f.is_skew() => {
                let z = x - &f.center;
                let b = f.cutoff.value(z.norm());
                if b == 0.0 {
                    return Ok(x.clone());
                }
                Ok(&f.center + &expm(&f.matrix.scale(b * t)).mul_vec(&z))
            }
            VectorField::Linear { matrix } => Ok(expm(&matrix.scale(t)).mul_vec(x)),
            VectorField::DampedLinear(f) => {
                let z = x - &f.center;
                if f.stays_linear(z.norm(), t) {
                    return Ok(&f.center + &expm(&f.matrix.scale(t)).mul_vec(&z));
                }
                integrate_flow(&self.field, t, x, self.steps)
            }
            field => integrate_flow(field, t, x, self.steps),
        }
    }

    fn apply_jac(&self, x: &Vector, t: f64) -> Result<(Vector, Matrix)> {
        let n = x.dim();
        match &self.field {
            VectorField::DampedTranslation(f) => f.flow_jac(x, t),
            VectorField::DampedLinear(f) if f.is_skew() => {
                let z = x - &f.center;
                let r = z.norm();
                let b = f.cutoff.value(r);
                if b == 0.0 {
                    return Ok((x.clone(), Matrix::identity(n)));
                }
                let e = expm(&f.matrix.scale(b * t));
                let ez = e.mul_vec(&z);
                let mut jac = e;
                let db = f.cutoff.deriv(r);
                if db != 0.0 && r > 0.0 {
                    // d/dβ exp(βtK) z = tK exp(βtK) z
                    let dir = f.matrix.mul_vec(&ez).scale(t);
                    jac += &dir.outer(&z.scale(db / r));
                }
                Ok((&f.center + &ez, jac))
            }
            VectorField::Linear { matrix } => {
                let e = expm(&matrix.scale(t));
                Ok((e.mul_vec(x), e))
            }
            VectorField::DampedLinear(f) => {
                let z = x - &f.center;
                if f.stays_linear(z.norm(), t) {
                    let e = expm(&f.matrix.scale(t));
                    return Ok((&f.center + &e.mul_vec(&z), e));
                }
                integrate_flow_jac(&self.field, t, x, self.steps)
            }
            field => integrate_flow_jac(field, t, x, self.steps),
        }
    }
}

impl Eval for FlowMap {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        self.apply(x, self.time)
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        self.apply_jac(x, self.time)
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.apply(y, -self.time)
    }
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        self.apply_jac(y, -self.time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_fixes_everything() {
        let x = Vector::from([0.4, -0.2]);
        assert_eq!(integrate_flow(&VectorField::Zero, 1.0, &x, 8).unwrap(), x);
    }

    #[test]
    fn constant_field_translates() {
        let v = Vector::from([0.25, -0.5, 1.0]);
        let x = Vector::from([1.0, 2.0, 3.0]);
        let y = integrate_flow(&VectorField::Constant { value: v.clone() }, 2.0, &x, 16).unwrap();
        assert_eq!(y, x.axpy(2.0, &v));
    }

    #[test]
    fn skew_linear_field_matches_exponential() {
        let k = Matrix::from_rows(&[
            vec![0.0, -0.7, 0.2],
            vec![0.7, 0.0, -0.4],
            vec![-0.2, 0.4, 0.0],
        ]);
        let x = Vector::from([0.3, -0.5, 0.9]);
        let field = VectorField::Linear { matrix: k.clone() };
        let y = integrate_flow(&field, 1.0, &x, 400).unwrap();
        assert!((y.norm() - x.norm()).abs() < 1e-10);
        assert!(y.distance(&expm(&k).mul_vec(&x)) < 1e-9);
    }

    #[test]
    fn variational_jacobian_matches_closed_form() {
        let field = DampedLinearField::new(
            Vector::from([0.1, 0.0]),
            Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]),
            Cutoff {
                inner: 0.3,
                outer: 1.0,
            },
        );
        let closed = FlowMap::new(VectorField::DampedLinear(field.clone()), 1.0, 64);
        for p in [[0.5, 0.2], [-0.4, 0.3], [0.0, 0.05]] {
            let x = Vector::from(p);
            let (y, j) = closed.eval_jac(&x).unwrap();
            let (yi, ji) = integrate_flow_jac(&closed.field, 1.0, &x, 2000).unwrap();
            assert!(y.distance(&yi) < 1e-10);
            assert!((&j - &ji).max_abs() < 1e-8);
        }
    }

    #[test]
    fn damped_stretch_is_identity_outside_support() {
        let field = VectorField::DampedLinear(DampedLinearField::new(
            Vector::zeros(2),
            Matrix::from_diagonal(&[0.5, -0.5]),
            Cutoff {
                inner: 0.2,
                outer: 1.0,
            },
        ));
        let f = FlowMap::new(field, 1.0, 64);
        let x = Vector::from([0.8, 0.6]);
        assert_eq!(f.eval(&x).unwrap(), x);
        let x = Vector::from([0.3, 0.2]);
        assert!(f.inverse(&f.eval(&x).unwrap()).unwrap().distance(&x) < 1e-9);
    }
}
