//! Multichannel WAV input and output.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

/// Loads a PCM or float WAV as one vector per channel with samples in
/// `[-1, 1]`. No resampling is done: a rate other than `sample_rate`, or a
/// channel count other than `channels`, is an error.
pub fn load_audio(path: &Path, channels: usize, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_rate != sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            got: spec.sample_rate,
        });
    }
    if spec.channels as usize != channels {
        return Err(Error::ChannelMismatch {
            expected: channels,
            got: spec.channels as usize,
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, bits @ 8..=32) => {
            let full = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<std::result::Result<_, _>>()?
        }
        (format, bits) => {
            return Err(Error::UnsupportedAudio(format!("{format:?} with {bits} bits")))
        }
    };
    let mut out = vec![Vec::with_capacity(interleaved.len() / channels); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, v) in out.iter_mut().zip(frame) {
            ch.push(*v);
        }
    }
    Ok(out)
}

/// Writes channels as a 32-bit float WAV.
pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::TooShort("no channels to write".into()));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::Config("channels differ in length".into()));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for n in 0..len {
        for ch in channels {
            writer.write_sample(ch[n] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}
