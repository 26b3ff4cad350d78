//! Damped translation along a segment, solved in closed form.
//!
//! With `u` the unit direction from `q` to `p`, `L = |p − q|`, `s = (x − q)·u`
//! and `ρ` the distance to the axis, the field is
//! `v(x) = u · L k(ρ) / σ'(s)`, where `k` is a radial cutoff and `σ` is a
//! clock: the identity on the plateau `[−r_in, L + r_in]` and running off to
//! `∓∞` at `s = −r_out` and `s = L + r_out`. Along a trajectory `ρ` is
//! constant and `σ(s)` grows linearly, so the time-`t` map is
//! `s ↦ σ⁻¹(σ(s) + L k t)`. On the plateau the field is the constant `p − q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Cutoff, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationField {
    pub from: Vector,
    pub to: Vector,
    /// Radius of the tube on which the field is exactly `to − from`.
    pub inner: f64,
    /// Support radius.
    pub outer: f64,
}

/// `G(u) = exp(1/u − 1/(1 − u))` on `(0, 1)`, with its first two derivatives.
fn edge(u: f64) -> (f64, f64, f64) {
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    if u <= 0.0 {
        return (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    }
    let v = 1.0 - u;
    let h = 1.0 / u - 1.0 / v;
    let h1 = -1.0 / (u * u) - 1.0 / (v * v);
    let h2 = 2.0 / (u * u * u) - 2.0 / (v * v * v);
    let g = h.exp();
    (g, g * h1, g * (h1 * h1 + h2))
}

/// Solve `G(v) − v = t` for `v ∈ (0, 1)`, where both edge pieces of the
/// clock reduce to this equation. Newton runs on `ln G(v) − ln(t + v)`,
/// which is tame even where `G` is astronomically large.
fn solve_edge(t: f64) -> f64 {
    if t <= -1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = ((-t).max(0.0), 1.0);
    let mut v = if t > 1.0 {
        1.0 / (t.ln() + 2.0)
    } else {
        0.5 * (lo + hi)
    };
    if !(v > lo && v < hi) {
        v = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let q = 1.0 - v;
        let phi = 1.0 / v - 1.0 / q - (t + v).ln();
        if phi == 0.0 {
            return v;
        }
        if phi > 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let dphi = -1.0 / (v * v) - 1.0 / (q * q) - 1.0 / (t + v);
        let mut next = v - phi / dphi;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-17 || hi - lo <= 1e-17 {
            return next;
        }
        v = next;
    }
    v
}

struct Frame {
    s: f64,
    perp: Vector,
    rho: f64,
}

impl TranslationField {
    pub fn new(from: &Vector, to: &Vector, inner: f64, outer: f64) -> Result<TranslationField> {
        if from.dim() != to.dim() || !from.is_finite() || !to.is_finite() {
            return Err(Error::Parameter(
                "translation endpoints must be finite and agree in dimension".into(),
            ));
        }
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::Parameter(format!(
                "translation tube radii need 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(TranslationField {
            from: from.clone(),
            to: to.clone(),
            inner,
            outer,
        })
    }

    pub fn length(&self) -> f64 {
        self.from.distance(&self.to)
    }

    fn axis(&self) -> Option<(Vector, f64)> {
        let d = &self.to - &self.from;
        let len = d.norm();
        (len > 0.0).then(|| (d.scale(1.0 / len), len))
    }

    fn width(&self) -> f64 {
        self.outer - self.inner
    }

    fn cutoff(&self) -> Cutoff {
        Cutoff {
            inner: self.inner,
            outer: self.outer,
        }
    }

    fn frame(&self, x: &Vector, u: &Vector) -> Frame {
        let z = x - &self.from;
        let s = z.dot(u);
        let perp = z.axpy(-s, u);
        let rho = perp.norm();
        Frame { s, perp, rho }
    }

    /// Whether `x` lies in the closed support of the field.
    pub fn in_support(&self, x: &Vector) -> bool {
        let Some((u, len)) = self.axis() else {
            return false;
        };
        let f = self.frame(x, &u);
        f.rho < self.outer && f.s > -self.outer && f.s < len + self.outer
    }

    /// σ, σ' and σ'' at `s`.
    fn clock(&self, s: f64, len: f64) -> (f64, f64, f64) {
        let w = self.width();
        if s < -self.inner {
            let (g, g1, g2) = edge((s + self.outer) / w);
            (s - w * g, 1.0 - g1, -g2 / w)
        } else if s > len + self.inner {
            let (g, g1, g2) = edge((len + self.outer - s) / w);
            (s + w * g, 1.0 - g1, g2 / w)
        } else {
            (s, 1.0, 0.0)
        }
    }

    /// Solve `σ(s) = target`.
    fn clock_inverse(&self, target: f64, len: f64) -> f64 {
        if (-self.inner..=len + self.inner).contains(&target) {
            return target;
        }
        let w = self.width();
        if target < -self.inner {
            -self.outer + w * solve_edge((-self.outer - target) / w)
        } else {
            len + self.outer - w * solve_edge((target - len - self.outer) / w)
        }
    }

    /// Field value.
    pub fn value(&self, x: &Vector) -> Vector {
        let n = x.dim();
        let Some((u, len)) = self.axis() else {
            return Vector::zeros(n);
        };
        if !self.in_support(x) {
            return Vector::zeros(n);
        }
        let f = self.frame(x, &u);
        let (_, d1, _) = self.clock(f.s, len);
        u.scale(len * self.cutoff().value(f.rho) / d1)
    }

    /// Field value and its Jacobian.
    pub fn value_jac(&self, x: &Vector) -> (Vector, Matrix) {
        let n = x.dim();
        let Some((u, len)) = self.axis() else {
            return (Vector::zeros(n), Matrix::zeros(n));
        };
        if !self.in_support(x) {
            return (Vector::zeros(n), Matrix::zeros(n));
        }
        let f = self.frame(x, &u);
        let (_, d1, d2) = self.clock(f.s, len);
        let cut = self.cutoff();
        let k = cut.value(f.rho);
        let g = len * k / d1;
        let gs = if d2 == 0.0 {
            0.0
        } else {
            -len * k * d2 / (d1 * d1)
        };
        let gr = len * cut.deriv(f.rho) / d1;
        let mut grad = u.scale(gs);
        if gr != 0.0 && f.rho > 0.0 {
            grad = grad.axpy(gr / f.rho, &f.perp);
        }
        (u.scale(g), u.outer(&grad))
    }

    /// Time-`t` flow in closed form. Points outside the support and points
    /// whose clock does not move are returned bitwise.
    pub fn flow(&self, x: &Vector, t: f64) -> Result<Vector> {
        Ok(self.flow_impl(x, t, false)?.0)
    }

    pub fn flow_jac(&self, x: &Vector, t: f64) -> Result<(Vector, Matrix)> {
        let (y, j) = self.flow_impl(x, t, true)?;
        Ok((y, j.expect("jacobian requested")))
    }

    fn flow_impl(&self, x: &Vector, t: f64, want_jac: bool) -> Result<(Vector, Option<Matrix>)> {
        let n = x.dim();
        let ident = |x: &Vector| Ok((x.clone(), want_jac.then(|| Matrix::identity(n))));
        let Some((u, len)) = self.axis() else {
            return ident(x);
        };
        if !self.in_support(x) {
            return ident(x);
        }
        let f = self.frame(x, &u);
        let cut = self.cutoff();
        let k = cut.value(f.rho);
        if k == 0.0 {
            return ident(x);
        }
        let plateau = -self.inner..=len + self.inner;
        let advance = len * k * t;
        let (sig0, d10, _) = self.clock(f.s, len);
        if !sig0.is_finite() {
            return ident(x);
        }
        let target = sig0 + advance;
        if target == sig0 {
            return ident(x);
        }
        if k == 1.0 && plateau.contains(&f.s) && plateau.contains(&target) {
            // rigid translation by t·(p − q)
            let y = x + &(&self.to - &self.from).scale(t);
            return Ok((y, want_jac.then(|| Matrix::identity(n))));
        }
        let s1 = self.clock_inverse(target, len);
        let y = x.axpy(s1 - f.s, &u);
        if !y.is_finite() {
            return Err(Error::Numeric(format!(
                "translation flow diverged at {x:?}"
            )));
        }
        if !want_jac {
            return Ok((y, None));
        }
        let (_, d11, _) = self.clock(s1, len);
        let ds_ds = d10 / d11;
        let ds_drho = len * t * cut.deriv(f.rho) / d11;
        let mut row = u.scale(ds_ds - 1.0);
        if ds_drho != 0.0 && f.rho > 0.0 {
            row = row.axpy(ds_drho / f.rho, &f.perp);
        }
        let mut jac = Matrix::identity(n);
        jac += &u.outer(&row);
        Ok((y, Some(jac)))
    }
}
