use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage, carried by errors raised inside [`crate::pipeline::estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Input,
    Stft,
    Onset,
    Dereverb,
    MidBand,
    HighBand,
    Baseline,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Input => "input",
            Stage::Stft => "stft",
            Stage::Onset => "onset",
            Stage::Dereverb => "dereverb",
            Stage::MidBand => "mid-band",
            Stage::HighBand => "high-band",
            Stage::Baseline => "baseline",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("room too small for requested T60 ({t60} s needs reflection coefficient {beta:.4})")]
    RoomTooSmall { t60: f64, beta: f64 },

    #[error("position {0:?} is not strictly inside the room")]
    OutsideRoom([f64; 3]),

    #[error("source and microphone coincide")]
    Coincident,

    #[error("cannot scale zero-power signal")]
    ZeroPower,

    #[error("channel-count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("sample-rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("signal too short for onset statistics ({frames} frames, need more than {n_t})")]
    TooShortForOnset { frames: usize, n_t: usize },

    #[error("no direct-path bins found")]
    NoDirectPathBins,

    #[error("bin too early for WPE context (frame {frame}, need at least {needed})")]
    NoWpeContext { frame: usize, needed: usize },

    #[error("singular WPE normal matrix at bin {bin}, channel {channel}")]
    SingularSystem { bin: usize, channel: usize },

    #[error("silent bin")]
    SilentBin,

    #[error("no middle-band bins")]
    NoMidBandBins,

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("{stage} stage failed: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::InStage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            other => other,
        }
    }
}
