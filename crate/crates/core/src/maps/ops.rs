//! Affine maps, the radial squeeze, composition and identity extension.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builtin::lattice_in_box;
use super::{Composite, Eval, Node, Orientation, Region, Regularity, SmoothMap};
use crate::error::{Error, Result};
use crate::geom::{invert_radial_profile, Matrix, TransitionProfile, Vector};

/// `x ↦ A x + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Affine {
    pub matrix: Matrix,
    pub offset: Vector,
}

impl Affine {
    /// Affine map with the given linear part that fixes `center`.
    pub fn about(matrix: Matrix, center: &Vector) -> Affine {
        let offset = center - &matrix.mul_vec(center);
        Affine { matrix, offset }
    }

    pub fn into_map(self) -> Result<SmoothMap> {
        let n = self.offset.dim();
        if self.matrix.dim() != n {
            return Err(Error::Parameter(
                "affine matrix and offset disagree in dimension".into(),
            ));
        }
        let det = self.matrix.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NotDiffeomorphism(format!(
                "affine determinant {det}"
            )));
        }
        let o = if det > 0.0 {
            Orientation::Preserving
        } else {
            Orientation::Reversing
        };
        Ok(SmoothMap::new(n, Node::Affine(self))
            .with_orientation(o)
            .with_label("affine"))
    }
}

impl Eval for Affine {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        Ok(self.matrix.mul_vec(x) + &self.offset)
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        Ok((self.eval(x)?, self.matrix.clone()))
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.matrix
            .solve(&(y - &self.offset))
            .ok_or_else(|| Error::NotDiffeomorphism("singular affine matrix".into()))
    }
}

/// `Φ(x) = c + φ(|x − c|)(x − c)`, identity wherever `φ = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialSqueeze {
    pub profile: TransitionProfile,
    pub center: Vector,
}

impl Eval for RadialSqueeze {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        let z = x - &self.center;
        let r = z.norm();
        if r >= self.profile.b {
            return Ok(x.clone());
        }
        Ok(&self.center + &z.scale(self.profile.value(r)))
    }

    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        let n = x.dim();
        let z = x - &self.center;
        let r = z.norm();
        if r >= self.profile.b {
            return Ok((x.clone(), Matrix::identity(n)));
        }
        let phi = self.profile.value(r);
        let mut jac = Matrix::identity(n).scale(phi);
        let dphi = self.profile.deriv(r);
        if dphi != 0.0 && r > 0.0 {
            jac += &z.outer(&z.scale(dphi / r));
        }
        Ok((&self.center + &z.scale(phi), jac))
    }

    fn inverse(&self, y: &Vector) -> Result<Vector> {
        let z = y - &self.center;
        let rho = z.norm();
        if rho >= self.profile.b {
            return Ok(y.clone());
        }
        if rho == 0.0 {
            return Ok(self.center.clone());
        }
        if rho <= self.profile.c0 * self.profile.a {
            return Ok(&self.center + &z.scale(1.0 / self.profile.c0));
        }
        let r = invert_radial_profile(&self.profile, rho);
        Ok(&self.center + &z.scale(r / rho))
    }

    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        let n = y.dim();
        let z = y - &self.center;
        let rho = z.norm();
        if rho >= self.profile.b {
            return Ok((y.clone(), Matrix::identity(n)));
        }
        if rho <= self.profile.c0 * self.profile.a {
            let s = 1.0 / self.profile.c0;
            return Ok((&self.center + &z.scale(s), Matrix::identity(n).scale(s)));
        }
        let x = self.inverse(y)?;
        let (_, j) = self.eval_jac(&x)?;
        let ji = j
            .inverse()
            .ok_or_else(|| Error::NotDiffeomorphism("singular squeeze".into()))?;
        Ok((x, ji))
    }
}

/// Φ with exact inverse. The profile must reach 1 so that Φ is the identity
/// far away.
pub fn radial_squeeze(profile: TransitionProfile, center: Vector) -> Result<SmoothMap> {
    crate::geom::transition_profile(profile.a, profile.b, profile.c0, profile.c1)?;
    if profile.c1 != 1.0 {
        return Err(Error::Parameter(format!(
            "radial squeeze needs an outer plateau of 1, got {}",
            profile.c1
        )));
    }
    if !center.is_finite() {
        return Err(Error::Parameter(
            "radial squeeze center must be finite".into(),
        ));
    }
    let n = center.dim();
    Ok(
        SmoothMap::new(n, Node::RadialSqueeze(RadialSqueeze { profile, center }))
            .with_label("radial_squeeze"),
    )
}

/// Points of a bounded region on a lattice, at most `per_axis^n` of them.
pub(crate) fn region_lattice(region: &Region, per_axis: usize) -> Vec<Vector> {
    let Some((lo, hi)) = region.bounding_box() else {
        return Vec::new();
    };
    lattice_in_box(&lo, &hi, per_axis)
        .into_iter()
        .filter(|p| region.contains(p))
        .collect()
}

fn lattice_size(n: usize) -> usize {
    match n {
        2 => 9,
        3 => 5,
        _ => 3,
    }
}

/// Composite `maps[0] ∘ … ∘ maps[k−1]`. Each intermediate image is checked
/// against the next domain on lattice samples of the innermost domain.
pub fn compose(maps: Vec<Arc<SmoothMap>>) -> Result<SmoothMap> {
    let Some(last) = maps.last() else {
        return Err(Error::Composition("empty composition".into()));
    };
    let n = last.dim;
    if let Some(m) = maps.iter().find(|m| m.dim != n) {
        return Err(Error::Composition(format!(
            "dimension {} among maps of dimension {n}",
            m.dim
        )));
    }
    let domain = last.domain.clone();
    let mut pts = region_lattice(&domain, lattice_size(n));
    for (k, m) in maps.iter().enumerate().rev() {
        for p in pts.iter_mut() {
            if !m.domain.contains(p) && m.domain.distance(p).is_none_or(|d| d > 1e-9) {
                return Err(Error::Composition(format!(
                    "stage {k} ({}) receives {p:?} outside its domain",
                    m.label.as_deref().unwrap_or("map")
                )));
            }
            *p = m.eval(p).map_err(|e| e.at(format!("compose stage {k}")))?;
        }
    }
    let maps: Vec<Arc<SmoothMap>> = maps.into_iter().filter(|m| !m.is_identity()).collect();
    let orientation = maps
        .iter()
        .fold(Orientation::Preserving, |o, m| o.then(m.orientation));
    let regularity = maps
        .iter()
        .fold(Regularity::Infinite, |r, m| r.min(m.regularity));
    let mut out = match maps.len() {
        0 => SmoothMap::identity(n),
        1 => (*maps[0]).clone(),
        _ => SmoothMap::new(n, Node::Composite(Composite { maps })),
    };
    out.domain = domain;
    out.orientation = orientation;
    out.regularity = regularity;
    Ok(out)
}

/// `outer ∘ core ∘ outer⁻¹` on `outer(domain)`, the identity elsewhere.
///
/// Points whose preimage under `outer` falls in `core_fixed` (where `core`
/// is the identity) or outside `domain` are returned unchanged, bitwise.
/// `image_bound` is a cheap superset of `outer(domain)` that short-circuits
/// far-away queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendByIdentity {
    pub outer: Arc<SmoothMap>,
    pub core: Arc<SmoothMap>,
    pub domain: Region,
    pub core_fixed: Region,
    pub image_bound: Region,
}

enum Route {
    Fixed,
    Core(Vector),
}

impl ExtendByIdentity {
    fn route(&self, y: &Vector) -> Route {
        if !self.image_bound.contains(y) {
            return Route::Fixed;
        }
        let x = match self.outer.inverse(y) {
            Ok(x) if x.is_finite() => x,
            _ => return Route::Fixed,
        };
        if !self.domain.contains(&x) || self.core_fixed.contains(&x) {
            return Route::Fixed;
        }
        Route::Core(x)
    }

    fn apply(&self, y: &Vector, forward: bool, jac: bool) -> Result<(Vector, Option<Matrix>)> {
        let x = match self.route(y) {
            Route::Fixed => return Ok((y.clone(), jac.then(|| Matrix::identity(y.dim())))),
            Route::Core(x) => x,
        };
        if !jac {
            let c = if forward {
                self.core.eval(&x)?
            } else {
                self.core.inverse(&x)?
            };
            return Ok((self.outer.eval(&c)?, None));
        }
        let (c, jc) = if forward {
            self.core.eval_jac(&x)?
        } else {
            self.core.inverse_jac(&x)?
        };
        let (out, jo) = self.outer.eval_jac(&c)?;
        let (_, jo_x) = self.outer.eval_jac(&x)?;
        let jo_inv = jo_x
            .inverse()
            .ok_or_else(|| Error::NotDiffeomorphism(format!("singular outer Jacobian at {x:?}")))?;
        Ok((out, Some(&(&jo * &jc) * &jo_inv)))
    }
}

impl Eval for ExtendByIdentity {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        Ok(self.apply(x, true, false)?.0)
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        let (y, j) = self.apply(x, true, true)?;
        Ok((y, j.expect("jacobian requested")))
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        Ok(self.apply(y, false, false)?.0)
    }
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        let (x, j) = self.apply(y, false, true)?;
        Ok((x, j.expect("jacobian requested")))
    }
}

const SHELL_TOL: f64 = 1e-10;

fn check_identity_on(map: &SmoothMap, shell: &Region) -> Result<()> {
    let n = map.dim;
    for p in region_lattice(shell, lattice_size(n) * 2) {
        let d = map.eval(&p)?.distance(&p);
        if d > SHELL_TOL {
            return Err(Error::Construction(format!(
                "map moves the safe shell point {p:?} by {d:.3e}"
            )));
        }
    }
    Ok(())
}

/// Extend `inner` (a map of `inner_region` into itself) to ℝⁿ by the
/// identity. `inner` must already be the identity on `safe_shell`, so
/// misrouting a point near the region's edge is harmless.
pub fn extend_by_identity(
    inner: Arc<SmoothMap>,
    inner_region: Region,
    safe_shell: Region,
) -> Result<SmoothMap> {
    extend_conjugate(
        Arc::new(SmoothMap::identity(inner.dim)),
        inner,
        inner_region.clone(),
        safe_shell,
        inner_region,
    )
}

/// Identity extension of `outer ∘ core ∘ outer⁻¹`, where `core` is the
/// identity on `core_fixed`. The shell `domain ∩ core_fixed` is sampled to
/// confirm the precondition.
pub fn extend_conjugate(
    outer: Arc<SmoothMap>,
    core: Arc<SmoothMap>,
    domain: Region,
    core_fixed: Region,
    image_bound: Region,
) -> Result<SmoothMap> {
    if outer.dim != core.dim {
        return Err(Error::Construction(
            "outer and core dimensions differ".into(),
        ));
    }
    domain.validate()?;
    let shell = Region::Intersection {
        parts: vec![domain.clone(), core_fixed.clone()],
    };
    check_identity_on(&core, &shell)?;
    let n = core.dim;
    let orientation = core.orientation;
    let regularity = core.regularity.min(outer.regularity);
    let mut m = SmoothMap::new(
        n,
        Node::ExtendByIdentity(ExtendByIdentity {
            outer,
            core,
            domain,
            core_fixed,
            image_bound,
        }),
    );
    m.orientation = orientation;
    m.regularity = regularity;
    Ok(m.with_label("extend_by_identity"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::transition_profile;
    use crate::maps::{construct_builtin, Builtin};
    use std::f64::consts::PI;

    fn rot(angle: f64) -> Arc<SmoothMap> {
        construct_builtin(
            2,
            Builtin::Rotation {
                angle,
                center: Vector::zeros(2),
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap()
        .shared()
    }

    #[test]
    fn composition_with_identity_is_transparent() {
        let f = rot(0.4);
        let c = compose(vec![Arc::new(SmoothMap::identity(2)), f.clone()]).unwrap();
        let x = Vector::from([0.3, -1.1]);
        assert_eq!(c.eval(&x).unwrap(), f.eval(&x).unwrap());
    }

    #[test]
    fn rotations_compose_additively() {
        let c = compose(vec![rot(0.3), rot(0.9)]).unwrap();
        let r = rot(1.2);
        for k in 0..1000 {
            let t = k as f64 * 0.0123;
            let x = Vector::from([t.cos() * (1.0 + t), (3.0 * t).sin()]);
            assert!(c.eval(&x).unwrap().distance(&r.eval(&x).unwrap()) <= 1e-13);
        }
    }

    #[test]
    fn composition_rejects_domain_escape() {
        let shift = construct_builtin(
            2,
            Builtin::Affine {
                matrix: Matrix::identity(2),
                offset: Vector::from([5.0, 0.0]),
            },
            Region::ball(Vector::zeros(2), 1.0),
        )
        .unwrap()
        .shared();
        let local = construct_builtin(2, Builtin::Identity, Region::ball(Vector::zeros(2), 1.0))
            .unwrap()
            .with_domain(Region::ball(Vector::zeros(2), 1.0))
            .shared();
        assert!(matches!(
            compose(vec![local, shift]),
            Err(Error::Composition(_))
        ));
    }

    #[test]
    fn squeeze_plateaus_and_inverse() {
        let phi = transition_profile(1.1, 1.2, 0.05, 1.0).unwrap();
        let c = Vector::from([0.5, -0.5]);
        let s = radial_squeeze(phi, c.clone()).unwrap();
        let x = &c + &Vector::from([0.6, 0.8]);
        assert_eq!(
            s.eval(&x).unwrap(),
            &c + &Vector::from([0.6, 0.8]).scale(0.05)
        );
        let far = &c + &Vector::from([1.2, 0.1]);
        assert_eq!(s.eval(&far).unwrap(), far);
        for k in 0..1000 {
            let t = k as f64 / 1000.0;
            let v = Vector::from([(7.0 * t).cos(), (7.0 * t).sin()]).scale(1.4 * t);
            let x = &c + &v;
            assert!(s.inverse(&s.eval(&x).unwrap()).unwrap().distance(&x) <= 1e-11);
        }
    }

    #[test]
    fn squeeze_needs_unit_outer_plateau() {
        let phi = transition_profile(1.0, 2.0, 0.5, 0.9).unwrap();
        assert!(radial_squeeze(phi, Vector::zeros(2)).is_err());
    }

    #[test]
    fn extension_of_identity_is_identity() {
        let id = Arc::new(SmoothMap::identity(2));
        let e = extend_by_identity(
            id,
            Region::ball(Vector::zeros(2), 1.0),
            Region::annulus(Vector::zeros(2), 0.8, 1.0),
        )
        .unwrap();
        for p in [[0.1, 0.2], [0.9, 0.0], [3.0, -4.0]] {
            let x = Vector::from(p);
            assert_eq!(e.eval(&x).unwrap(), x);
        }
    }

    #[test]
    fn extension_checks_the_shell() {
        let twist = construct_builtin(
            2,
            Builtin::Twist {
                angle: PI / 4.0,
                center: Vector::zeros(2),
                inner: 0.3,
                outer: 0.9,
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap()
        .shared();
        let ok = extend_by_identity(
            twist.clone(),
            Region::ball(Vector::zeros(2), 1.0),
            Region::annulus(Vector::zeros(2), 0.9, 1.0),
        );
        assert!(ok.is_ok());
        let bad = extend_by_identity(
            twist,
            Region::ball(Vector::zeros(2), 1.0),
            Region::annulus(Vector::zeros(2), 0.5, 1.0),
        );
        assert!(matches!(bad, Err(Error::Construction(_))));
    }

    #[test]
    fn conjugated_extension_agrees_on_the_shell() {
        // outer = shear, core = twist supported in B(0, 0.9); on the image
        // of the annulus 0.9..1.0 both branches are the identity
        let shear = construct_builtin(
            2,
            Builtin::Shear {
                amount: 0.5,
                center: Vector::zeros(2),
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap()
        .shared();
        let twist = construct_builtin(
            2,
            Builtin::Twist {
                angle: 1.0,
                center: Vector::zeros(2),
                inner: 0.3,
                outer: 0.9,
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap()
        .shared();
        let e = extend_conjugate(
            shear.clone(),
            twist.clone(),
            Region::ball(Vector::zeros(2), 1.0),
            Region::complement(Region::ball(Vector::zeros(2), 0.9)),
            Region::All,
        )
        .unwrap();
        for k in 0..100 {
            let t = 2.0 * PI * k as f64 / 100.0;
            let x = Vector::from([t.cos(), t.sin()]).scale(0.9 + 0.1 * (k % 7) as f64 / 7.0);
            let y = shear.eval(&x).unwrap();
            let inner_branch = shear.eval(&twist.eval(&x).unwrap()).unwrap();
            assert!(inner_branch.distance(&y) <= 1e-10);
            assert_eq!(e.eval(&y).unwrap(), y);
        }
        let x = Vector::from([0.2, 0.1]);
        let y = shear.eval(&x).unwrap();
        let expect = shear.eval(&twist.eval(&x).unwrap()).unwrap();
        assert!(e.eval(&y).unwrap().distance(&expect) < 1e-15);
        assert!(e.inverse(&expect).unwrap().distance(&y) < 1e-14);
    }
}
