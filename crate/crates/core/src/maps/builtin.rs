//! Built-in diffeomorphism families with closed-form Jacobians and inverses.

use serde::{Deserialize, Serialize};

use super::{Eval, Node, Orientation, Region, SmoothMap};
use crate::error::{Error, Result};
use crate::flows::TranslationField;
use crate::geom::{invert_radial_profile, Cutoff, Matrix, TransitionProfile, Vector};

fn default_plane() -> [usize; 2] {
    [0, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Builtin {
    Identity,
    Affine {
        matrix: Matrix,
        offset: Vector,
    },
    /// Rigid rotation by `angle` in the coordinate plane `plane` about `center`.
    Rotation {
        angle: f64,
        center: Vector,
        #[serde(default = "default_plane")]
        plane: [usize; 2],
    },
    /// `x_i += amount · (x_j − c_j)` for `plane = [i, j]`.
    Shear {
        amount: f64,
        center: Vector,
        #[serde(default = "default_plane")]
        plane: [usize; 2],
    },
    /// Rotation by an angle that decays smoothly from `angle` (for
    /// `|x − c| ≤ inner`) to 0 (for `|x − c| ≥ outer`).
    Twist {
        angle: f64,
        center: Vector,
        inner: f64,
        outer: f64,
        #[serde(default = "default_plane")]
        plane: [usize; 2],
    },
    /// `x ↦ c + φ(|x − c|)(x − c)`.
    Radial {
        profile: TransitionProfile,
        center: Vector,
    },
    /// `x ↦ x + coef · (x_source − c_source)² · e_target`.
    PolyPerturb {
        coef: f64,
        center: Vector,
        source: usize,
        target: usize,
    },
    /// Compactly supported flow carrying `B̄(from, radius)` rigidly onto
    /// `B̄(to, radius)`.
    DampedTranslate {
        from: Vector,
        to: Vector,
        radius: f64,
    },
}

impl Builtin {
    pub fn family(&self) -> &'static str {
        match self {
            Builtin::Identity => "identity",
            Builtin::Affine { .. } => "affine",
            Builtin::Rotation { .. } => "rotation",
            Builtin::Shear { .. } => "shear",
            Builtin::Twist { .. } => "twist",
            Builtin::Radial { .. } => "radial",
            Builtin::PolyPerturb { .. } => "poly_perturb",
            Builtin::DampedTranslate { .. } => "damped_translate",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(format!("{}: {m}", self.family())));
        let check_vec = |v: &Vector, name: &str| -> Result<()> {
            if v.dim() != n || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "{}: `{name}` must be a finite {n}-vector",
                    self.family()
                )));
            }
            Ok(())
        };
        let check_plane = |p: &[usize; 2]| -> Result<()> {
            if p[0] == p[1] || p[0] >= n || p[1] >= n {
                return Err(Error::Parameter(format!(
                    "{}: plane {:?} must name two distinct axes below {n}",
                    self.family(),
                    p
                )));
            }
            Ok(())
        };
        match self {
            Builtin::Identity => Ok(()),
            Builtin::Affine { matrix, offset } => {
                check_vec(offset, "offset")?;
                if matrix.dim() != n || !matrix.is_finite() {
                    return bad(format!("matrix must be a finite {n}x{n} array"));
                }
                Ok(())
            }
            Builtin::Rotation {
                angle,
                center,
                plane,
            }
            | Builtin::Shear {
                amount: angle,
                center,
                plane,
            } => {
                check_vec(center, "center")?;
                check_plane(plane)?;
                if !angle.is_finite() {
                    return bad("parameter must be finite".into());
                }
                Ok(())
            }
            Builtin::Twist {
                angle,
                center,
                inner,
                outer,
                plane,
            } => {
                check_vec(center, "center")?;
                check_plane(plane)?;
                Cutoff::new(*inner, *outer)?;
                if !angle.is_finite() {
                    return bad("angle must be finite".into());
                }
                Ok(())
            }
            Builtin::Radial { profile, center } => {
                check_vec(center, "center")?;
                crate::geom::transition_profile(profile.a, profile.b, profile.c0, profile.c1)?;
                Ok(())
            }
            Builtin::PolyPerturb {
                coef,
                center,
                source,
                target,
            } => {
                check_vec(center, "center")?;
                if *source >= n || *target >= n || !coef.is_finite() {
                    return bad(format!("axes must be below {n} and coef finite"));
                }
                Ok(())
            }
            Builtin::DampedTranslate { from, to, radius } => {
                check_vec(from, "from")?;
                check_vec(to, "to")?;
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                Ok(())
            }
        }
    }

    fn translation_field(from: &Vector, to: &Vector, radius: f64) -> Result<TranslationField> {
        TranslationField::new(from, to, radius * 1.125, radius * 1.25)
    }

    /// A box where the family's nontrivial behavior lives, for grid checks on
    /// unbounded domains.
    fn feature_box(&self, n: usize) -> (Vector, Vector) {
        let around = |c: &Vector, r: f64| -> (Vector, Vector) {
            (
                c.iter().map(|v| v - r).collect(),
                c.iter().map(|v| v + r).collect(),
            )
        };
        match self {
            Builtin::Twist { center, outer, .. } => around(center, outer * 1.1),
            Builtin::Radial { profile, center } => around(center, profile.b * 1.1),
            Builtin::Rotation { center, .. }
            | Builtin::Shear { center, .. }
            | Builtin::PolyPerturb { center, .. } => around(center, 1.0),
            Builtin::DampedTranslate { from, to, radius } => {
                let mid = (from + to).scale(0.5);
                around(&mid, 0.5 * from.distance(to) + 2.0 * radius)
            }
            _ => around(&Vector::zeros(n), 1.0),
        }
    }
}

fn plane_rotation_deriv(n: usize, [i, j]: [usize; 2], angle: f64) -> Matrix {
    let mut m = Matrix::zeros(n);
    let (s, c) = angle.sin_cos();
    m[(i, i)] = -s;
    m[(j, j)] = -s;
    m[(i, j)] = -c;
    m[(j, i)] = c;
    m
}

fn rotate_in_plane(z: &Vector, [i, j]: [usize; 2], angle: f64) -> Vector {
    let (s, c) = angle.sin_cos();
    let mut out = z.clone();
    out[i] = c * z[i] - s * z[j];
    out[j] = s * z[i] + c * z[j];
    out
}

impl Eval for Builtin {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        let n = x.dim();
        Ok(match self {
            Builtin::Identity => x.clone(),
            Builtin::Affine { matrix, offset } => matrix.mul_vec(x) + offset,
            Builtin::Rotation {
                angle,
                center,
                plane,
            } => center + &rotate_in_plane(&(x - center), *plane, *angle),
            Builtin::Shear {
                amount,
                center,
                plane: [i, j],
            } => {
                let mut y = x.clone();
                y[*i] += amount * (x[*j] - center[*j]);
                y
            }
            Builtin::Twist {
                angle,
                center,
                inner,
                outer,
                plane,
            } => {
                let z = x - center;
                let r = z.norm();
                if r >= *outer {
                    return Ok(x.clone());
                }
                let theta = angle
                    * Cutoff {
                        inner: *inner,
                        outer: *outer,
                    }
                    .value(r);
                center + &rotate_in_plane(&z, *plane, theta)
            }
            Builtin::Radial { profile, center } => {
                let z = x - center;
                let r = z.norm();
                if r >= profile.b && profile.c1 == 1.0 {
                    return Ok(x.clone());
                }
                center + &z.scale(profile.value(r))
            }
            Builtin::PolyPerturb {
                coef,
                center,
                source,
                target,
            } => {
                let d = x[*source] - center[*source];
                let mut y = x.clone();
                y[*target] += coef * d * d;
                y
            }
            Builtin::DampedTranslate { from, to, radius } => {
                let _ = n;
                Self::translation_field(from, to, *radius)?.flow(x, 1.0)?
            }
        })
    }

    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        let n = x.dim();
        Ok(match self {
            Builtin::Identity => (x.clone(), Matrix::identity(n)),
            Builtin::Affine { matrix, .. } => (self.eval(x)?, matrix.clone()),
            Builtin::Rotation { angle, plane, .. } => (
                self.eval(x)?,
                Matrix::plane_rotation(n, plane[0], plane[1], *angle),
            ),
            Builtin::Shear {
                amount,
                plane: [i, j],
                ..
            } => {
                let mut m = Matrix::identity(n);
                m[(*i, *j)] += amount;
                (self.eval(x)?, m)
            }
            Builtin::Twist {
                angle,
                center,
                inner,
                outer,
                plane,
            } => {
                let z = x - center;
                let r = z.norm();
                if r >= *outer {
                    return Ok((x.clone(), Matrix::identity(n)));
                }
                let cut = Cutoff {
                    inner: *inner,
                    outer: *outer,
                };
                let theta = angle * cut.value(r);
                let rot = Matrix::plane_rotation(n, plane[0], plane[1], theta);
                let y = center + &rot.mul_vec(&z);
                let mut jac = rot;
                let dtheta = angle * cut.deriv(r);
                if dtheta != 0.0 && r > 0.0 {
                    let dr = plane_rotation_deriv(n, *plane, theta).mul_vec(&z);
                    jac += &dr.outer(&z.scale(dtheta / r));
                }
                (y, jac)
            }
            Builtin::Radial { profile, center } => {
                let z = x - center;
                let r = z.norm();
                if r >= profile.b && profile.c1 == 1.0 {
                    return Ok((x.clone(), Matrix::identity(n)));
                }
                let phi = profile.value(r);
                let mut jac = Matrix::identity(n).scale(phi);
                let dphi = profile.deriv(r);
                if dphi != 0.0 && r > 0.0 {
                    jac += &z.outer(&z.scale(dphi / r));
                }
                (center + &z.scale(phi), jac)
            }
            Builtin::PolyPerturb {
                coef,
                center,
                source,
                target,
            } => {
                let d = x[*source] - center[*source];
                let mut m = Matrix::identity(n);
                m[(*target, *source)] += 2.0 * coef * d;
                (self.eval(x)?, m)
            }
            Builtin::DampedTranslate { from, to, radius } => {
                Self::translation_field(from, to, *radius)?.flow_jac(x, 1.0)?
            }
        })
    }

    fn inverse(&self, y: &Vector) -> Result<Vector> {
        Ok(match self {
            Builtin::Identity => y.clone(),
            Builtin::Affine { matrix, offset } => matrix
                .solve(&(y - offset))
                .ok_or_else(|| Error::NotDiffeomorphism("singular affine matrix".into()))?,
            Builtin::Rotation {
                angle,
                center,
                plane,
            } => center + &rotate_in_plane(&(y - center), *plane, -angle),
            Builtin::Shear {
                amount,
                center,
                plane: [i, j],
            } => {
                let mut x = y.clone();
                x[*i] -= amount * (y[*j] - center[*j]);
                x
            }
            Builtin::Twist {
                angle,
                center,
                inner,
                outer,
                plane,
            } => {
                let z = y - center;
                let r = z.norm();
                if r >= *outer {
                    return Ok(y.clone());
                }
                let theta = angle
                    * Cutoff {
                        inner: *inner,
                        outer: *outer,
                    }
                    .value(r);
                center + &rotate_in_plane(&z, *plane, -theta)
            }
            Builtin::Radial { profile, center } => {
                let z = y - center;
                let rho = z.norm();
                if rho >= profile.b * profile.c1 && profile.c1 == 1.0 {
                    return Ok(y.clone());
                }
                if rho == 0.0 {
                    return Ok(center.clone());
                }
                let r = invert_radial_profile(profile, rho);
                center + &z.scale(r / rho)
            }
            Builtin::PolyPerturb {
                coef,
                center,
                source,
                target,
            } => {
                if source != target {
                    let d = y[*source] - center[*source];
                    let mut x = y.clone();
                    x[*target] -= coef * d * d;
                    x
                } else {
                    // w = z + coef z², on the branch where 1 + 2 coef z > 0
                    let w = y[*target] - center[*target];
                    let disc = 1.0 + 4.0 * coef * w;
                    if disc < 0.0 {
                        return Err(Error::NotDiffeomorphism(format!(
                            "poly_perturb: {y:?} is outside the image"
                        )));
                    }
                    let mut x = y.clone();
                    x[*target] = center[*target] + 2.0 * w / (1.0 + disc.sqrt());
                    x
                }
            }
            Builtin::DampedTranslate { from, to, radius } => {
                Self::translation_field(from, to, *radius)?.flow(y, -1.0)?
            }
        })
    }

    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        match self {
            Builtin::DampedTranslate { from, to, radius } => {
                Self::translation_field(from, to, *radius)?.flow_jac(y, -1.0)
            }
            _ => {
                let x = self.inverse(y)?;
                let (_, j) = self.eval_jac(&x)?;
                let ji = j.inverse().ok_or_else(|| {
                    Error::NotDiffeomorphism(format!("singular Jacobian at {x:?}"))
                })?;
                Ok((x, ji))
            }
        }
    }
}

const GRID_PER_AXIS_2D: usize = 41;
const GRID_PER_AXIS_3D: usize = 15;

pub fn lattice_in_box(lo: &Vector, hi: &Vector, per_axis: usize) -> Vec<Vector> {
    let n = lo.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            (0..n)
                .map(|i| {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Build and validate a built-in family. The Jacobian determinant must keep
/// one sign over a lattice covering the declared domain.
pub fn construct_builtin(dim: usize, family: Builtin, domain: Region) -> Result<SmoothMap> {
    if dim < 2 {
        return Err(Error::Parameter(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    family.validate(dim)?;
    domain.validate()?;
    let (lo, hi) = match domain.bounding_box() {
        Some(b) => b,
        None => family.feature_box(dim),
    };
    let per_axis = match dim {
        2 => GRID_PER_AXIS_2D,
        3 => GRID_PER_AXIS_3D,
        _ => 5,
    };
    let mut sign = 0.0;
    for p in lattice_in_box(&lo, &hi, per_axis) {
        if !domain.contains(&p) {
            continue;
        }
        let det = family.eval_jac(&p)?.1.determinant();
        if !(det.is_finite() && det != 0.0) || (sign != 0.0 && det.signum() != sign) {
            return Err(Error::NotDiffeomorphism(format!(
                "{}: Jacobian determinant {det:.3e} at {p:?} breaks the sign pattern",
                family.family()
            )));
        }
        sign = det.signum();
    }
    let orientation = if sign < 0.0 {
        Orientation::Reversing
    } else {
        Orientation::Preserving
    };
    let label = family.family().to_string();
    Ok(SmoothMap::new(dim, Node::Builtin(family))
        .with_domain(domain)
        .with_orientation(orientation)
        .with_label(label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fd_jacobian(m: &SmoothMap, x: &Vector, h: f64) -> Matrix {
        let n = x.dim();
        let mut j = Matrix::zeros(n);
        for k in 0..n {
            let e = Vector::basis(n, k);
            let fp = m.eval(&x.axpy(h, &e)).unwrap();
            let fm = m.eval(&x.axpy(-h, &e)).unwrap();
            let col = (fp - fm).scale(0.5 / h);
            for i in 0..n {
                j[(i, k)] = col[i];
            }
        }
        j
    }

    #[test]
    fn identity_has_unit_jacobian() {
        let id = construct_builtin(3, Builtin::Identity, Region::All).unwrap();
        let x = Vector::from([0.1, 0.2, 0.3]);
        assert_eq!(id.jacobian(&x).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn rotation_quarter_turn() {
        let r = construct_builtin(
            2,
            Builtin::Rotation {
                angle: PI / 4.0,
                center: Vector::zeros(2),
                plane: [0, 1],
            },
            Region::All,
        )
        .unwrap();
        let y = r.eval(&Vector::from([1.0, 0.0])).unwrap();
        let h = 0.5 * 2f64.sqrt();
        assert!((y[0] - h).abs() < 1e-15 && (y[1] - h).abs() < 1e-15);
    }

    #[test]
    fn poly_perturb_is_unimodular() {
        let m = construct_builtin(
            2,
            Builtin::PolyPerturb {
                coef: 0.1,
                center: Vector::zeros(2),
                source: 0,
                target: 1,
            },
            Region::ball(Vector::zeros(2), 1.5),
        )
        .unwrap();
        for p in [[0.3, 0.4], [-1.2, 0.5], [1.0, -1.0]] {
            // triangular Jacobian [[1, 0], [0.2 x₁, 1]] has det 1
            assert!((m.jacobian(&Vector::from(p)).unwrap().determinant() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn folding_perturbation_is_rejected() {
        // det J = 1 + 2·coef·x₁ vanishes at x₁ = −1 inside the unit ball
        let err = construct_builtin(
            2,
            Builtin::PolyPerturb {
                coef: 0.5,
                center: Vector::zeros(2),
                source: 0,
                target: 0,
            },
            Region::ball(Vector::zeros(2), 1.5),
        );
        assert!(matches!(err, Err(Error::NotDiffeomorphism(_))));
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let fams = vec![
            Builtin::Twist {
                angle: 1.0,
                center: Vector::from([0.1, 0.0]),
                inner: 0.2,
                outer: 1.0,
                plane: [0, 1],
            },
            Builtin::Radial {
                profile: crate::geom::transition_profile(0.3, 0.8, 0.4, 1.0).unwrap(),
                center: Vector::zeros(2),
            },
            Builtin::Shear {
                amount: 0.7,
                center: Vector::zeros(2),
                plane: [1, 0],
            },
            Builtin::PolyPerturb {
                coef: 0.2,
                center: Vector::zeros(2),
                source: 1,
                target: 1,
            },
            Builtin::DampedTranslate {
                from: Vector::zeros(2),
                to: Vector::from([1.0, 0.5]),
                radius: 0.2,
            },
        ];
        for fam in fams {
            let name = fam.family();
            let m = construct_builtin(2, fam, Region::ball(Vector::zeros(2), 1.0)).unwrap();
            for p in [[0.35, 0.1], [-0.2, 0.55], [0.6, -0.3], [0.05, 0.02]] {
                let x = Vector::from(p);
                let a = m.jacobian(&x).unwrap();
                let f = fd_jacobian(&m, &x, 1e-6);
                let err = (&a - &f).frobenius_norm() / a.frobenius_norm();
                assert!(err < 1e-6, "{name} at {p:?}: {err}");
            }
        }
    }

    #[test]
    fn structural_inverses_roundtrip() {
        let fams = vec![
            Builtin::Rotation {
                angle: 0.3,
                center: Vector::from([1.0, 0.0, 0.0]),
                plane: [0, 2],
            },
            Builtin::Twist {
                angle: PI / 3.0,
                center: Vector::zeros(3),
                inner: 0.1,
                outer: 1.5,
                plane: [1, 2],
            },
            Builtin::PolyPerturb {
                coef: -0.3,
                center: Vector::zeros(3),
                source: 2,
                target: 0,
            },
            Builtin::Radial {
                profile: crate::geom::transition_profile(0.3, 0.8, 0.4, 1.0).unwrap(),
                center: Vector::zeros(3),
            },
        ];
        for fam in fams {
            let m = construct_builtin(3, fam, Region::All).unwrap();
            for p in [[0.3, -0.2, 0.5], [1.0, 1.0, -0.4], [0.01, 0.0, 0.02]] {
                let x = Vector::from(p);
                let back = m.inverse(&m.eval(&x).unwrap()).unwrap();
                assert!(back.distance(&x) < 1e-13);
            }
        }
    }
}
