pub mod config;
pub mod doa;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod onset;
pub mod pipeline;
pub mod room;
pub mod speech;
pub mod stft;
pub mod wpe;

pub use error::{Error, Result};
