//! The map algebra.
//!
//! A [`SmoothMap`] is a serializable composition tree. Every node knows how to
//! evaluate itself, its analytic Jacobian, and (structurally, or by Newton
//! where no closed form exists) its inverse.

mod ball;
mod builtin;
mod newton;
mod ops;
mod piecewise;
mod region;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ball::BallDiffeo;
pub use builtin::{construct_builtin, lattice_in_box, Builtin};
pub use newton::{default_seeds, newton_invert, newton_solve, NewtonOutcome};
pub use ops::{
    compose, extend_by_identity, extend_conjugate, radial_squeeze, Affine, ExtendByIdentity,
    RadialSqueeze,
};
pub use piecewise::{glue_piecewise, Piece, Piecewise, SeamEvidence};
pub use region::{sphere_points, Bounds, Region};

use crate::error::{Error, Result};
use crate::flows::FlowMap;
use crate::geom::{Matrix, Vector};
use crate::linearize::Blend;

/// Differentiability class: `k` continuous derivatives, or C^∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Finite(u32),
    #[default]
    Infinite,
}

impl Regularity {
    pub fn min(self, other: Regularity) -> Regularity {
        match (self, other) {
            (Regularity::Infinite, r) | (r, Regularity::Infinite) => r,
            (Regularity::Finite(a), Regularity::Finite(b)) => Regularity::Finite(a.min(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Preserving,
    Reversing,
    #[default]
    Unknown,
}

impl Orientation {
    pub fn then(self, other: Orientation) -> Orientation {
        use Orientation::*;
        match (self, other) {
            (Unknown, _) | (_, Unknown) => Unknown,
            (a, b) if a == b => Preserving,
            _ => Reversing,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Identity,
    Affine(Affine),
    Builtin(Builtin),
    RadialSqueeze(RadialSqueeze),
    Flow(FlowMap),
    Blend(Blend),
    Composite(Composite),
    Piecewise(Piecewise),
    Inverse(Inverse),
    ExtendByIdentity(ExtendByIdentity),
}

/// Evaluation contract shared by every node payload.
pub(crate) trait Eval {
    fn eval(&self, x: &Vector) -> Result<Vector>;

    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)>;

    fn inverse(&self, y: &Vector) -> Result<Vector>;

    /// Inverse point and the Jacobian of the inverse there.
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        let x = self.inverse(y)?;
        let (_, j) = self.eval_jac(&x)?;
        let ji = j
            .inverse()
            .ok_or_else(|| Error::NotDiffeomorphism(format!("singular Jacobian at {x:?}")))?;
        Ok((x, ji))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothMap {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub node: Node,
    #[serde(default = "Region::all_default")]
    pub domain: Region,
    #[serde(default)]
    pub regularity: Regularity,
    #[serde(default)]
    pub orientation: Orientation,
}

impl Region {
    fn all_default() -> Region {
        Region::All
    }
}

impl SmoothMap {
    pub fn new(dim: usize, node: Node) -> SmoothMap {
        SmoothMap {
            dim,
            label: None,
            node,
            domain: Region::All,
            regularity: Regularity::Infinite,
            orientation: Orientation::Preserving,
        }
    }

    pub fn identity(dim: usize) -> SmoothMap {
        SmoothMap::new(dim, Node::Identity)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> SmoothMap {
        self.label = Some(label.into());
        self
    }

    pub fn with_domain(mut self, domain: Region) -> SmoothMap {
        self.domain = domain;
        self
    }

    pub fn with_orientation(mut self, o: Orientation) -> SmoothMap {
        self.orientation = o;
        self
    }

    pub fn shared(self) -> Arc<SmoothMap> {
        Arc::new(self)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.node, Node::Identity)
    }

    /// The structural inverse as a map of its own.
    pub fn inverted(self: &Arc<Self>) -> SmoothMap {
        if let Node::Inverse(Inverse { map }) = &self.node {
            return (**map).clone();
        }
        let mut inv = SmoothMap::new(self.dim, Node::Inverse(Inverse { map: self.clone() }));
        inv.regularity = self.regularity;
        inv.orientation = self.orientation;
        inv.label = self.label.as_ref().map(|l| format!("inverse({l})"));
        inv
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::Parameter(format!(
                "point has dimension {}, map expects {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    fn payload(&self) -> &dyn Eval {
        match &self.node {
            Node::Identity => &IdentityEval,
            Node::Affine(a) => a,
            Node::Builtin(b) => b,
            Node::RadialSqueeze(r) => r,
            Node::Flow(f) => f,
            Node::Blend(b) => b,
            Node::Composite(c) => c,
            Node::Piecewise(p) => p,
            Node::Inverse(i) => i,
            Node::ExtendByIdentity(e) => e,
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        self.payload().eval(x)
    }

    pub fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        self.check_dim(x)?;
        self.payload().eval_jac(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.eval_jac(x)?.1)
    }

    pub fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.check_dim(y)?;
        self.payload().inverse(y)
    }

    pub fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        self.check_dim(y)?;
        self.payload().inverse_jac(y)
    }

    /// Whether inversion is available without a generic search.
    pub fn has_structural_inverse(&self) -> bool {
        match &self.node {
            Node::Blend(_) => false,
            Node::Composite(c) => c.maps.iter().all(|m| m.has_structural_inverse()),
            Node::Inverse(_) => true,
            Node::Piecewise(p) => p.pieces.iter().all(|pc| pc.map.has_structural_inverse()),
            Node::ExtendByIdentity(e) => e.outer.has_structural_inverse(),
            _ => true,
        }
    }

    /// Copy with the step count of every numerically integrated flow
    /// multiplied by `factor`. Closed-form nodes are unchanged.
    pub fn refined(&self, factor: usize) -> SmoothMap {
        let sub = |m: &Arc<SmoothMap>| Arc::new(m.refined(factor));
        let node = match &self.node {
            Node::Flow(f) => Node::Flow(FlowMap {
                steps: f.steps * factor,
                ..f.clone()
            }),
            Node::Composite(c) => Node::Composite(Composite {
                maps: c.maps.iter().map(sub).collect(),
            }),
            Node::Piecewise(p) => Node::Piecewise(Piecewise {
                pieces: p
                    .pieces
                    .iter()
                    .map(|pc| Piece::new(pc.region.clone(), sub(&pc.map)))
                    .collect(),
                ..p.clone()
            }),
            Node::Inverse(i) => Node::Inverse(Inverse { map: sub(&i.map) }),
            Node::Blend(b) => Node::Blend(Blend {
                map: sub(&b.map),
                ..b.clone()
            }),
            Node::ExtendByIdentity(e) => Node::ExtendByIdentity(ExtendByIdentity {
                outer: sub(&e.outer),
                core: sub(&e.core),
                ..e.clone()
            }),
            other => other.clone(),
        };
        SmoothMap {
            node,
            ..self.clone()
        }
    }

    /// Number of nodes in the tree (shared children counted per use).
    pub fn node_count(&self) -> usize {
        1 + match &self.node {
            Node::Composite(c) => c.maps.iter().map(|m| m.node_count()).sum(),
            Node::Piecewise(p) => p.pieces.iter().map(|pc| pc.map.node_count()).sum(),
            Node::Inverse(i) => i.map.node_count(),
            Node::Blend(b) => b.map.node_count(),
            Node::ExtendByIdentity(e) => e.outer.node_count() + e.core.node_count(),
            _ => 0,
        }
    }
}

struct IdentityEval;

impl Eval for IdentityEval {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        Ok(x.clone())
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        Ok((x.clone(), Matrix::identity(x.dim())))
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        Ok(y.clone())
    }
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        Ok((y.clone(), Matrix::identity(y.dim())))
    }
}

/// `maps[0] ∘ maps[1] ∘ … ∘ maps[k−1]`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Composite {
    pub maps: Vec<Arc<SmoothMap>>,
}

impl Eval for Composite {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        let mut y = x.clone();
        for m in self.maps.iter().rev() {
            y = m.eval(&y)?;
        }
        Ok(y)
    }

    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        let mut y = x.clone();
        let mut j = Matrix::identity(x.dim());
        for m in self.maps.iter().rev() {
            let (ny, jm) = m.eval_jac(&y)?;
            j = &jm * &j;
            y = ny;
        }
        Ok((y, j))
    }

    fn inverse(&self, y: &Vector) -> Result<Vector> {
        let mut x = y.clone();
        for m in self.maps.iter() {
            x = m.inverse(&x)?;
        }
        Ok(x)
    }

    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        let mut x = y.clone();
        let mut j = Matrix::identity(y.dim());
        for m in self.maps.iter() {
            let (nx, jm) = m.inverse_jac(&x)?;
            j = &jm * &j;
            x = nx;
        }
        Ok((x, j))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inverse {
    pub map: Arc<SmoothMap>,
}

impl Eval for Inverse {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        self.map.inverse(x)
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        self.map.inverse_jac(x)
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.map.eval(y)
    }
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        self.map.eval_jac(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_roundtrip() {
        let id = SmoothMap::identity(3);
        let x = Vector::from([1.0, -2.0, 0.5]);
        assert_eq!(id.eval(&x).unwrap(), x);
        assert_eq!(id.inverse(&x).unwrap(), x);
        assert_eq!(id.jacobian(&x).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let id = SmoothMap::identity(2);
        assert!(id.eval(&Vector::from([1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn serde_roundtrip_identity() {
        let id = SmoothMap::identity(2).with_label("id");
        let s = serde_json::to_string(&id).unwrap();
        let back: SmoothMap = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
