use thiserror::Error;

use crate::geom::Vector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("orientation: {0}")]
    Orientation(String),

    #[error("ill-conditioned input: {0}")]
    Conditioning(String),

    #[error("not a diffeomorphism: {0}")]
    NotDiffeomorphism(String),

    #[error("composition: {0}")]
    Composition(String),

    #[error("gluing: overlap disagreement {worst:.3e} at {point:?} exceeds {tol:.1e}")]
    Gluing { worst: f64, point: Vector, tol: f64 },

    #[error("coverage: point {0:?} is not covered by any piece")]
    Coverage(Vector),

    #[error("construction: {0}")]
    Construction(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("margin: {0}")]
    Margin(String),

    #[error("linearization failed: {0}")]
    Linearization(String),

    #[error("blend failed: minimum det J {min_det:.3e} at {point:?}")]
    BlendFailure { min_det: f64, point: Vector },

    #[error("not a ball automorphism: {0}")]
    Automorphism(String),

    #[error("containment: {0}")]
    Containment(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap with a pipeline stage tag.
    pub fn at(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Stage tags from outermost to innermost.
    pub fn stages(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut e = self;
        while let Error::Stage { stage, source } = e {
            out.push(stage.as_str());
            e = source;
        }
        out
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
