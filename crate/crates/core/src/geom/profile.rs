//! Scalar C^∞ step functions and the monotone transition profile φ.
//!
//! Every cutoff in the crate is built from the exponential smoothstep
//! `s(t) = f(t) / (f(t) + f(1 − t))` with `f(t) = exp(−1/t)` for `t > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
fn flat_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, strictly increasing between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = flat_exp(t);
    let b = flat_exp(1.0 - t);
    a / (a + b)
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = flat_exp(t);
    let b = flat_exp(1.0 - t);
    let da = a / (t * t);
    let u = 1.0 - t;
    let db = -b / (u * u);
    let den = a + b;
    (da * b - a * db) / (den * den)
}

/// Smooth cutoff equal to 1 on `[0, inner]` and 0 on `[outer, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::Parameter(format!(
                "cutoff requires 0 <= inner < outer, got inner={inner}, outer={outer}"
            )));
        }
        Ok(Cutoff { inner, outer })
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            1.0 - smooth_step((r - self.inner) / (self.outer - self.inner))
        }
    }

    #[inline]
    pub fn deriv(&self, r: f64) -> f64 {
        if r <= self.inner || r >= self.outer {
            0.0
        } else {
            let w = self.outer - self.inner;
            -smooth_step_deriv((r - self.inner) / w) / w
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    ExpSmoothstep,
}

/// Non-decreasing C^∞ profile with plateaus `c0` on `t ≤ a` and `c1` on `t ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionProfile {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
    #[serde(default = "default_kind")]
    pub kind: ProfileKind,
}

fn default_kind() -> ProfileKind {
    ProfileKind::ExpSmoothstep
}

/// Validated constructor for φ.
pub fn transition_profile(a: f64, b: f64, c0: f64, c1: f64) -> Result<TransitionProfile> {
    let finite = [a, b, c0, c1].iter().all(|v| v.is_finite());
    if !finite || !(a >= 0.0 && a < b) {
        return Err(Error::Parameter(format!(
            "profile knots need 0 <= a < b, got a={a}, b={b}"
        )));
    }
    if !(c0 > 0.0 && c0 <= c1) {
        return Err(Error::Parameter(format!(
            "profile plateaus need 0 < c0 <= c1, got c0={c0}, c1={c1}"
        )));
    }
    Ok(TransitionProfile {
        a,
        b,
        c0,
        c1,
        kind: ProfileKind::ExpSmoothstep,
    })
}

impl TransitionProfile {
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.a {
            self.c0
        } else if t >= self.b {
            self.c1
        } else {
            self.c0 + (self.c1 - self.c0) * smooth_step((t - self.a) / (self.b - self.a))
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        if t <= self.a || t >= self.b {
            0.0
        } else {
            let w = self.b - self.a;
            (self.c1 - self.c0) * smooth_step_deriv((t - self.a) / w) / w
        }
    }

    /// g(r) = φ(r)·r, the radial action of the squeeze.
    pub fn radial(&self, r: f64) -> f64 {
        self.value(r) * r
    }

    /// g'(r) = φ(r) + φ'(r)·r.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        self.value(r) + self.deriv(r) * r
    }
}

/// Solve `φ(r)·r = y` for `r ≥ 0`.
///
/// The plateaus are linear and solved in closed form; the transition band
/// uses Newton steps kept inside a shrinking bracket.
pub fn invert_radial_profile(phi: &TransitionProfile, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y <= phi.c0 * phi.a {
        return y / phi.c0;
    }
    if y >= phi.c1 * phi.b {
        return y / phi.c1;
    }
    let (mut lo, mut hi) = (phi.a, phi.b);
    // secant guess between the bracket ends
    let (glo, ghi) = (phi.radial(lo), phi.radial(hi));
    let mut r = lo + (y - glo) * (hi - lo) / (ghi - glo);
    let tol = f64::EPSILON * y;
    for _ in 0..200 {
        let g = phi.radial(r) - y;
        if g.abs() <= tol {
            return r;
        }
        if g < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let d = phi.radial_deriv(r);
        let next = r - g / d;
        r = if d > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_plateaus_and_midpoint() {
        assert_eq!(smooth_step(-3.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert_eq!(smooth_step(0.5), 0.5);
        assert_eq!(smooth_step_deriv(0.0), 0.0);
    }

    #[test]
    fn smooth_step_derivative_matches_differences() {
        for &t in &[0.05, 0.2, 0.5, 0.77, 0.95] {
            let h = 1e-6;
            let fd = (smooth_step(t + h) - smooth_step(t - h)) / (2.0 * h);
            assert!((fd - smooth_step_deriv(t)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn profile_plateaus() {
        let phi = transition_profile(1.1, 1.2, 0.05, 1.0).unwrap();
        assert_eq!(phi.value(1.0), 0.05);
        assert_eq!(phi.value(1.3), 1.0);
        assert_eq!(phi.value(1.1), 0.05);
        assert_eq!(phi.value(1.2), 1.0);
        // s(1/2) = 1/2 by symmetry, so the midpoint is the plateau average.
        let mid = phi.value(1.15);
        assert!((mid - 0.525).abs() < 1e-13);
    }

    #[test]
    fn profile_rejects_bad_parameters() {
        assert!(transition_profile(1.2, 1.1, 0.05, 1.0).is_err());
        assert!(transition_profile(1.0, 1.0, 0.05, 1.0).is_err());
        assert!(transition_profile(1.0, 1.2, 0.0, 1.0).is_err());
        assert!(transition_profile(1.0, 1.2, 2.0, 1.0).is_err());
        assert!(transition_profile(-0.1, 1.2, 0.5, 1.0).is_err());
    }

    #[test]
    fn radial_inverse_examples() {
        let phi = transition_profile(1.1, 1.2, 0.05, 1.0).unwrap();
        assert_eq!(invert_radial_profile(&phi, 0.05 * 1.0), 1.0);
        assert_eq!(invert_radial_profile(&phi, 1.3), 1.3);
        // bisection oracle on g
        let target = phi.radial(1.15);
        let (mut lo, mut hi) = (1.1_f64, 1.2_f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if phi.radial(m) < target {
                lo = m
            } else {
                hi = m
            }
        }
        let r = invert_radial_profile(&phi, target);
        assert!((r - 1.15).abs() <= 1e-12);
        assert!((r - 0.5 * (lo + hi)).abs() <= 1e-12);
    }

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::new(1.0, 2.0).unwrap();
        assert_eq!(c.value(0.5), 1.0);
        assert_eq!(c.value(2.5), 0.0);
        assert_eq!(c.value(1.5), 0.5);
        assert!(Cutoff::new(2.0, 1.0).is_err());
    }
}
