//! Logarithmic factorization of GL⁺(n): A = exp(K)·exp(Y) with K skew and
//! Y symmetric.
//!
//! The polar factors come from an SVD. The rotation log is read off the real
//! Schur form on the principal branch; the symmetric log from the singular
//! values directly.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLogFactors {
    /// Skew-symmetric generator of the rotation factor.
    pub skew: Matrix,
    /// Symmetric generator of the positive-definite factor.
    pub sym: Matrix,
}

impl LinearLogFactors {
    pub fn rotation(&self) -> Matrix {
        expm(&self.skew)
    }

    pub fn stretch(&self) -> Matrix {
        expm(&self.sym)
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.rotation() * &self.stretch()
    }

    /// Largest eigenvalue of the symmetric generator.
    pub fn max_stretch_rate(&self) -> f64 {
        self.sym.to_nalgebra().symmetric_eigen().eigenvalues.max()
    }

    /// Spectral norm of the symmetric generator.
    pub fn sym_norm(&self) -> f64 {
        self.sym.to_nalgebra().symmetric_eigen().eigenvalues.amax()
    }
}

/// Matrix exponential (scaling and squaring with Padé, via nalgebra).
pub fn expm(m: &Matrix) -> Matrix {
    Matrix::from_nalgebra(&m.to_nalgebra().exp())
}

pub fn linear_factorize(a: &Matrix) -> Result<LinearLogFactors> {
    let n = a.dim();
    if !a.is_finite() {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    let det = a.determinant();
    if det <= 0.0 {
        return Err(Error::Orientation(format!(
            "det(A) = {det:.3e} is not positive"
        )));
    }
    let svd = a.to_nalgebra().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numeric("SVD did not converge".into())),
    };
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(Error::Conditioning(format!(
            "condition number {:.3e} exceeds {MAX_CONDITION:.0e}",
            smax / smin
        )));
    }
    let v = v_t.transpose();
    let log_sv = DMatrix::from_diagonal(&sv.map(f64::ln));
    let mut sym = &v * log_sv * &v_t;
    sym = (&sym + sym.transpose()) * 0.5;
    let rot = &u * &v_t;
    let skew = rotation_log(&rot)?;
    let out = LinearLogFactors {
        skew: Matrix::from_nalgebra(&skew),
        sym: Matrix::from_nalgebra(&sym),
    };
    debug_assert_eq!(out.skew.dim(), n);
    Ok(out)
}

/// Principal skew-symmetric logarithm of a rotation matrix.
fn rotation_log(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = r.nrows();
    if (r - DMatrix::identity(n, n)).amax() == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let schur = Schur::try_new(r.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut log_t = DMatrix::<f64>::zeros(n, n);
    let mut flipped: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let is_block = i + 1 < n && t[(i + 1, i)] != 0.0;
        if is_block {
            // normal 2×2 block [[c, -s], [s, c]] up to rounding
            let c = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let s = 0.5 * (t[(i + 1, i)] - t[(i, i + 1)]);
            let theta = s.atan2(c);
            log_t[(i + 1, i)] = theta;
            log_t[(i, i + 1)] = -theta;
            i += 2;
        } else {
            if t[(i, i)] < 0.0 {
                flipped.push(i);
            }
            i += 1;
        }
    }
    if flipped.len() % 2 == 1 {
        return Err(Error::Numeric(
            "rotation has an odd number of -1 eigenvalues".into(),
        ));
    }
    // -1 eigenvalues pair up into half-turns
    for pair in flipped.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        log_t[(b, a)] = std::f64::consts::PI;
        log_t[(a, b)] = -std::f64::consts::PI;
    }
    let k = &q * log_t * q.transpose();
    Ok((&k - k.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel_err(f: &LinearLogFactors, a: &Matrix) -> f64 {
        (&f.reconstruct() - a).frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn identity_has_zero_logs() {
        let f = linear_factorize(&Matrix::identity(3)).unwrap();
        assert!(f.skew.max_abs() < 1e-15);
        assert!(f.sym.max_abs() < 1e-15);
    }

    #[test]
    fn planar_rotation_log() {
        let theta = PI / 3.0;
        let a = Matrix::plane_rotation(2, 0, 1, theta);
        let f = linear_factorize(&a).unwrap();
        assert!((f.skew[(1, 0)] - theta).abs() < 1e-14);
        assert!((f.skew[(0, 1)] + theta).abs() < 1e-14);
        assert!(f.sym.max_abs() < 1e-14);
    }

    #[test]
    fn positive_diagonal_log() {
        let a = Matrix::from_diagonal(&[2.0, 0.5]);
        let f = linear_factorize(&a).unwrap();
        assert!(f.skew.max_abs() < 1e-14);
        assert!((f.sym[(0, 0)] - 2f64.ln()).abs() < 1e-14);
        assert!((f.sym[(1, 1)] + 2f64.ln()).abs() < 1e-14);
        assert!(rel_err(&f, &a) < 1e-12);
    }

    #[test]
    fn half_turn_is_on_principal_branch() {
        let a = Matrix::from_diagonal(&[-1.0, -1.0, 1.0]);
        let f = linear_factorize(&a).unwrap();
        assert!(rel_err(&f, &a) < 1e-12);
        assert!((f.skew.spectral_norm() - PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_reflections_and_singular() {
        let refl = Matrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            linear_factorize(&refl),
            Err(Error::Orientation(_))
        ));
        let near = Matrix::from_diagonal(&[1.0, 1e-13]);
        assert!(matches!(
            linear_factorize(&near),
            Err(Error::Conditioning(_))
        ));
    }
}
