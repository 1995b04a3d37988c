use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Parsing errors carry a line number where one exists so that corpus-scale
/// failures can be located without re-running.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV: {0}")]
    Wav(String),

    #[error("unsupported {0}")]
    UnsupportedAudio(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("tier {wanted:?} not found; available tiers: {available:?}")]
    MissingTier {
        wanted: String,
        available: Vec<String>,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("span outside audio: {0}")]
    SpanOutsideAudio(String),

    #[error("utterance {utterance}: stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        utterance: String,
        #[source]
        source: Box<Error>,
    },

    #[error("optimizer diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wrap an error with the pipeline stage and utterance it came from.
    pub fn in_stage(self, stage: &'static str, utterance: &str) -> Self {
        Error::Stage {
            stage,
            utterance: utterance.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
