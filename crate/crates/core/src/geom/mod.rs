//! Dimension-generic numerical kernels shared by every construction.

mod factor;
mod linalg;
mod profile;

pub use factor::{expm, linear_factorize, LinearLogFactors};
pub use linalg::{Matrix, Vector};
pub use profile::{
    invert_radial_profile, smooth_step, smooth_step_deriv, transition_profile, Cutoff, ProfileKind,
    TransitionProfile,
};
