//! Diffeomorphisms given on a closed ball with a margin of extra definition.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{sphere_points, Orientation, Region, SmoothMap};
use crate::error::{Error, Result};
use crate::geom::{Matrix, Vector};

/// A map of `B̄(center, radius)` known to be a diffeomorphism on the larger
/// ball `B(center, radius·(1 + margin))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallDiffeo {
    pub map: Arc<SmoothMap>,
    pub center: Vector,
    pub radius: f64,
    pub margin: f64,
}

const ROUNDTRIP_TOL: f64 = 1e-9;

impl BallDiffeo {
    /// Validate and wrap. Samples of the extended ball must have positive
    /// Jacobian determinant and invert back to themselves.
    pub fn new(
        map: Arc<SmoothMap>,
        center: Vector,
        radius: f64,
        margin: f64,
    ) -> Result<BallDiffeo> {
        let b = BallDiffeo::unchecked(map, center, radius, margin)?;
        b.check()?;
        Ok(b)
    }

    /// Wrap after checking parameters only; for maps that are
    /// diffeomorphisms by construction.
    pub fn unchecked(
        map: Arc<SmoothMap>,
        center: Vector,
        radius: f64,
        margin: f64,
    ) -> Result<BallDiffeo> {
        if center.dim() != map.dim || !center.is_finite() {
            return Err(Error::Parameter(format!(
                "ball center must be a finite {}-vector",
                map.dim
            )));
        }
        if map.dim < 2 {
            return Err(Error::Parameter("dimension must be at least 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::Parameter(format!(
                "ball margin must be positive, got {margin}"
            )));
        }
        Ok(BallDiffeo {
            map,
            center,
            radius,
            margin,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim
    }

    pub fn extended_radius(&self) -> f64 {
        self.radius * (1.0 + self.margin)
    }

    pub fn ball(&self) -> Region {
        Region::ball(self.center.clone(), self.radius)
    }

    /// Points on `count` directions at the given fractions of the extended
    /// radius, plus the center.
    pub fn probe_points(&self, fractions: &[f64], count: usize) -> Vec<Vector> {
        let dirs = sphere_points(self.dim(), count);
        let mut pts = vec![self.center.clone()];
        for &f in fractions {
            for w in &dirs {
                pts.push(self.center.axpy(f * self.extended_radius(), w));
            }
        }
        pts
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        let count = if n == 2 { 48 } else { 96 };
        let mut sign = 0.0;
        for x in self.probe_points(&[0.25, 0.5, 0.75, 1.0 / (1.0 + self.margin), 0.99], count) {
            let (y, j) = self.map.eval_jac(&x)?;
            let det = j.determinant();
            if !(det.is_finite() && det != 0.0) || (sign != 0.0 && det.signum() != sign) {
                return Err(Error::NotDiffeomorphism(format!(
                    "Jacobian determinant {det:.3e} at {x:?}"
                )));
            }
            sign = det.signum();
            let back = self.map.inverse(&y)?;
            let err = back.distance(&x);
            if err > ROUNDTRIP_TOL * (1.0 + x.norm()) {
                return Err(Error::NotDiffeomorphism(format!(
                    "roundtrip error {err:.3e} at {x:?}"
                )));
            }
        }
        if sign < 0.0 {
            return Err(Error::Orientation(
                "map reverses orientation on its ball".into(),
            ));
        }
        Ok(())
    }

    pub fn orientation(&self) -> Orientation {
        self.map.orientation
    }

    pub fn jacobian_at_center(&self) -> Result<Matrix> {
        self.map.jacobian(&self.center)
    }

    /// Same map with the ball shrunk or grown, keeping the extended ball.
    pub fn with_radius(&self, radius: f64) -> Result<BallDiffeo> {
        let ext = self.extended_radius();
        if !(radius > 0.0 && radius < ext) {
            return Err(Error::Margin(format!(
                "radius {radius} leaves no margin inside the extended radius {ext}"
            )));
        }
        BallDiffeo::unchecked(
            self.map.clone(),
            self.center.clone(),
            radius,
            ext / radius - 1.0,
        )
    }
}
