//! Damped Newton inversion of vector maps with multistart seeding.

use super::{Region, SmoothMap};
use crate::error::Result;
use crate::geom::{Matrix, Vector};

const MAX_ITERS: usize = 60;

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vector,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `f(x) = y` from one seed by Newton steps with residual backtracking.
pub fn newton_solve<F>(f: F, y: &Vector, seed: &Vector, tol: f64) -> NewtonOutcome
where
    F: Fn(&Vector) -> Result<(Vector, Matrix)>,
{
    let mut x = seed.clone();
    let (mut fx, mut jx) = match f(&x) {
        Ok(v) => v,
        Err(_) => {
            return NewtonOutcome {
                x,
                converged: false,
                residual: f64::INFINITY,
                iterations: 0,
            }
        }
    };
    let mut res = fx.distance(y);
    let mut iters = 0;
    while iters < MAX_ITERS {
        if res <= tol {
            return NewtonOutcome {
                x,
                converged: true,
                residual: res,
                iterations: iters,
            };
        }
        iters += 1;
        let Some(step) = jx.solve(&(&fx - y)) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-6 {
            let cand = x.axpy(-alpha, &step);
            if let Ok((fc, jc)) = f(&cand) {
                let rc = fc.distance(y);
                if rc < res || rc <= tol {
                    x = cand;
                    fx = fc;
                    jx = jc;
                    res = rc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonOutcome {
        converged: res <= tol,
        x,
        residual: res,
        iterations: iters,
    }
}

/// Invert `map` at `y`, trying each seed in turn and accepting the first
/// converged solve. Returns the best attempt when none converges.
pub fn newton_invert(map: &SmoothMap, y: &Vector, seeds: &[Vector], tol: f64) -> (Vector, bool) {
    let out = newton_multistart(|x| map.eval_jac(x), y, seeds, tol);
    (out.x, out.converged)
}

pub(crate) fn newton_multistart<F>(f: F, y: &Vector, seeds: &[Vector], tol: f64) -> NewtonOutcome
where
    F: Fn(&Vector) -> Result<(Vector, Matrix)>,
{
    let mut best: Option<NewtonOutcome> = None;
    for s in seeds {
        let out = newton_solve(&f, y, s, tol);
        if out.converged {
            return out;
        }
        if best.as_ref().is_none_or(|b| out.residual < b.residual) {
            best = Some(out);
        }
    }
    best.unwrap_or(NewtonOutcome {
        x: y.clone(),
        converged: false,
        residual: f64::INFINITY,
        iterations: 0,
    })
}

/// Seeds: the target itself, then cell centers of a two-level grid over the
/// domain's bounding box.
pub fn default_seeds(domain: &Region, y: &Vector) -> Vec<Vector> {
    let mut seeds = vec![y.clone()];
    let Some((lo, hi)) = domain.bounding_box() else {
        return seeds;
    };
    let n = y.dim();
    for level in [1usize, 3] {
        let cells = level.pow(n as u32);
        for idx in 0..cells {
            let mut rem = idx;
            let c: Vector = (0..n)
                .map(|i| {
                    let k = rem % level;
                    rem /= level;
                    lo[i] + (hi[i] - lo[i]) * (k as f64 + 0.5) / level as f64
                })
                .collect();
            if domain.contains(&c) {
                seeds.push(c);
            }
        }
    }
    seeds
}
