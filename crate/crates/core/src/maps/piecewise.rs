//! Region-routed gluing of maps that agree on their overlaps.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::builtin::lattice_in_box;
use super::region::union_bounds;
use super::{Eval, Node, Orientation, Region, Regularity, SmoothMap};
use crate::error::{Error, Result};
use crate::geom::{Matrix, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Piece {
    pub region: Region,
    pub map: Arc<SmoothMap>,
}

impl Piece {
    pub fn new(region: Region, map: Arc<SmoothMap>) -> Piece {
        Piece { region, map }
    }
}

/// What the overlap sampling saw when the pieces were glued.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeamEvidence {
    pub overlap_points: usize,
    pub worst: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vector>,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Piecewise {
    pub pieces: Vec<Piece>,
    /// Order in which pieces are tried when inverting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_order: Option<Vec<usize>>,
    #[serde(default)]
    pub evidence: SeamEvidence,
}

impl Piecewise {
    /// Index of the first piece whose region contains `x`.
    pub fn route(&self, x: &Vector) -> Option<usize> {
        self.pieces.iter().position(|p| p.region.contains(x))
    }

    fn piece_at(&self, x: &Vector) -> Result<&Piece> {
        self.route(x)
            .map(|i| &self.pieces[i])
            .ok_or_else(|| Error::Coverage(x.clone()))
    }

    fn invert_with<T>(
        &self,
        y: &Vector,
        f: impl Fn(&SmoothMap, &Vector) -> Result<T>,
        point: impl Fn(&T) -> &Vector,
    ) -> Result<T> {
        let default: Vec<usize> = (0..self.pieces.len()).collect();
        let order = self.inverse_order.as_ref().unwrap_or(&default);
        for &i in order {
            let piece = &self.pieces[i];
            if let Ok(out) = f(&piece.map, y) {
                if piece.region.contains(point(&out)) {
                    return Ok(out);
                }
            }
        }
        Err(Error::NotDiffeomorphism(format!("no piece inverts {y:?}")))
    }
}

impl Eval for Piecewise {
    fn eval(&self, x: &Vector) -> Result<Vector> {
        self.piece_at(x)?.map.eval(x)
    }
    fn eval_jac(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        self.piece_at(x)?.map.eval_jac(x)
    }
    fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.invert_with(y, |m, y| m.inverse(y), |x| x)
    }
    fn inverse_jac(&self, y: &Vector) -> Result<(Vector, Matrix)> {
        self.invert_with(y, |m, y| m.inverse_jac(y), |(x, _)| x)
    }
}

fn coverage_lattice_size(n: usize) -> usize {
    match n {
        2 => 41,
        3 => 13,
        _ => 5,
    }
}

/// Glue `(region, map)` pieces into one map routed by first match.
///
/// If some region is unbounded the result is meant to be global and the
/// pieces must cover all of ℝⁿ; otherwise its domain is the union of the
/// regions. Coverage is checked on a lattice around the regions' features,
/// agreement on `overlap_samples` seeded points lying in two or more regions.
pub fn glue_piecewise(pieces: Vec<Piece>, overlap_samples: usize, tol: f64) -> Result<SmoothMap> {
    let Some(first) = pieces.first() else {
        return Err(Error::Construction("no pieces to glue".into()));
    };
    let n = first.map.dim;
    if let Some(p) = pieces.iter().find(|p| p.map.dim != n) {
        return Err(Error::Construction(format!(
            "piece of dimension {} among dimension {n}",
            p.map.dim
        )));
    }
    for p in &pieces {
        p.region.validate()?;
    }
    let global = pieces.iter().any(|p| p.region.bounding_box().is_none());
    let features = pieces
        .iter()
        .filter_map(|p| p.region.feature_box())
        .reduce(|a, b| union_bounds(&a, &b));

    if let (Some((lo, hi)), true) = (&features, global) {
        let pad: f64 = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max) * 0.25;
        let lo: Vector = lo.iter().map(|v| v - pad).collect();
        let hi: Vector = hi.iter().map(|v| v + pad).collect();
        for x in lattice_in_box(&lo, &hi, coverage_lattice_size(n)) {
            if !pieces.iter().any(|p| p.region.contains(&x)) {
                return Err(Error::Coverage(x));
            }
        }
    }

    let mut evidence = SeamEvidence {
        tol,
        ..Default::default()
    };
    if let (Some((lo, hi)), true) = (&features, pieces.len() > 1) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_5ea3);
        let budget = overlap_samples.saturating_mul(200).max(1000);
        for _ in 0..budget {
            if evidence.overlap_points >= overlap_samples {
                break;
            }
            let x: Vector = (0..n)
                .map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>())
                .collect();
            let owners: Vec<&Piece> = pieces.iter().filter(|p| p.region.contains(&x)).collect();
            if owners.len() < 2 {
                continue;
            }
            evidence.overlap_points += 1;
            let y0 = owners[0].map.eval(&x)?;
            for other in &owners[1..] {
                let d = other.map.eval(&x)?.distance(&y0);
                if d > evidence.worst {
                    evidence.worst = d;
                    evidence.worst_point = Some(x.clone());
                }
            }
        }
        if evidence.worst > tol {
            return Err(Error::Gluing {
                worst: evidence.worst,
                point: evidence
                    .worst_point
                    .clone()
                    .unwrap_or_else(|| Vector::zeros(n)),
                tol,
            });
        }
    }

    let domain = if global {
        Region::All
    } else {
        Region::Union {
            parts: pieces.iter().map(|p| p.region.clone()).collect(),
        }
    };
    let orientation = pieces
        .iter()
        .skip(1)
        .fold(pieces[0].map.orientation, |o, p| {
            if o == p.map.orientation {
                o
            } else {
                Orientation::Unknown
            }
        });
    let regularity = pieces
        .iter()
        .fold(Regularity::Infinite, |r, p| r.min(p.map.regularity));
    let mut m = SmoothMap::new(
        n,
        Node::Piecewise(Piecewise {
            pieces,
            inverse_order: None,
            evidence,
        }),
    );
    m.domain = domain;
    m.orientation = orientation;
    m.regularity = regularity;
    Ok(m.with_label("piecewise"))
}

impl SmoothMap {
    /// Set the order in which a piecewise map tries its pieces when inverting.
    pub fn with_inverse_order(mut self, order: Vec<usize>) -> Result<SmoothMap> {
        let Node::Piecewise(p) = &mut self.node else {
            return Err(Error::Construction(
                "inverse order applies to piecewise maps".into(),
            ));
        };
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..p.pieces.len()).collect::<Vec<_>>() {
            return Err(Error::Construction(format!(
                "{order:?} is not a permutation of the pieces"
            )));
        }
        p.inverse_order = Some(order);
        Ok(self)
    }

    pub fn seam_evidence(&self) -> Option<&SeamEvidence> {
        match &self.node {
            Node::Piecewise(p) => Some(&p.evidence),
            _ => None,
        }
    }
}
