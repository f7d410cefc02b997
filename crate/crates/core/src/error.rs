use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the explanation pipeline.
///
/// The variants are grouped by how a caller should react: bad input or
/// parameters, a transport failure talking to a remote classifier, or a
/// protocol/numeric violation that makes a result untrustworthy.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("remote classifier returned HTTP {status}: {body}")]
    Remote { status: u16, body: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("fitness evaluation failed at {} individual {individual}: {source}", generation_label(*.generation))]
    Fitness {
        generation: Option<usize>,
        individual: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario {scenario}, seed {seed}: {source}")]
    Run {
        scenario: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn generation_label(generation: Option<usize>) -> String {
    match generation {
        Some(g) => format!("generation {g}"),
        None => "initial population".to_string(),
    }
}

/// Coarse error class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Transport,
    Protocol,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Input(_)
            | Error::Param(_)
            | Error::Refused(_)
            | Error::Image(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Input,
            Error::Transport(_) => ErrorClass::Transport,
            Error::Remote { .. } | Error::Protocol(_) | Error::Numeric(_) => ErrorClass::Protocol,
            Error::Fitness { source, .. } | Error::Run { source, .. } => source.class(),
        }
    }
}
