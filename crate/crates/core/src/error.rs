use std::fmt;

/// Pipeline stage identifiers, used to tag errors raised while orchestrating a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BlackBox,
    Auxiliary,
    Baseline,
    Estimator,
    Inference,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::BlackBox => "0 (black-box training)",
            Stage::Auxiliary => "1 (auxiliary dataset construction)",
            Stage::Baseline => "2 (interpretable baseline training)",
            Stage::Estimator => "3 (weight estimator training)",
            Stage::Inference => "4 (interpretable inference)",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Training produced a non-finite loss or gradient. `checkpoint` carries the
    /// last parameters that were still finite, when the trainer keeps one.
    #[error("diverged: {message}")]
    Diverged {
        message: String,
        checkpoint: Option<Box<crate::blackbox::BlackBoxModel>>,
    },

    #[error("undefined R²: black-box predictions have zero variance")]
    UndefinedR2,

    #[error("undefined APR: no positive labels")]
    UndefinedApr,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("load error at row {row}, column `{column}`: {message}")]
    Load {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn diverged(msg: impl Into<String>) -> Self {
        Error::Diverged {
            message: msg.into(),
            checkpoint: None,
        }
    }

    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_same_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}
