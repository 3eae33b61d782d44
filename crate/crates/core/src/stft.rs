//! Multichannel STFT and the log cross-power envelope.
//!
//! The forward DFT is unnormalized, `X(k) = Σ_m w(m) x(m) e^{-j2πkm/N}`, so
//! for a frame `Σ_k |X(k)|²` over all N bins equals `N Σ_m (w(m) x(m))²`.
//! Downstream statistics are ratios or ranks and do not depend on this
//! scaling.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => dsp::hann(len),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    #[serde(rename = "window_width")]
    pub window_len: usize,
    pub frameshift: usize,
    pub sample_rate: f64,
    #[serde(default)]
    pub window_kind: WindowKind,
    /// Regularizer added to the cross-power before the log.
    pub xi: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 512,
            frameshift: 8,
            sample_rate: 16000.0,
            window_kind: WindowKind::Hann,
            xi: 1e-3,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 4 || !self.window_len.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "window length must be a positive multiple of 4, got {}",
                self.window_len
            )));
        }
        if self.frameshift == 0 || self.frameshift > self.window_len {
            return Err(Error::Config("frameshift must lie in [1, window length]".into()));
        }
        if !(self.window_len / 4).is_multiple_of(self.frameshift) {
            return Err(Error::Config(format!(
                "frameshift {} must divide a quarter window ({})",
                self.frameshift,
                self.window_len / 4
            )));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Config("xi must be positive".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.window_len as f64
    }

    /// Number of full frames that fit in `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.frameshift + 1
        }
    }
}

/// Complex STFT values `x_i(n, k)` for every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    data: Vec<Complex64>,
    num_channels: usize,
    num_frames: usize,
    num_bins: usize,
    bin_hz: f64,
}

impl MultichannelSpectrogram {
    /// Builds a spectrogram from `[channel][frame][bin]` values.
    pub fn from_fn(
        num_channels: usize,
        num_frames: usize,
        num_bins: usize,
        bin_hz: f64,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(num_channels * num_frames * num_bins);
        for i in 0..num_channels {
            for n in 0..num_frames {
                for k in 0..num_bins {
                    data.push(f(i, n, k));
                }
            }
        }
        MultichannelSpectrogram {
            data,
            num_channels,
            num_frames,
            num_bins,
            bin_hz,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    #[inline]
    pub fn get(&self, channel: usize, frame: usize, bin: usize) -> Complex64 {
        self.data[(channel * self.num_frames + frame) * self.num_bins + bin]
    }

    /// The spectrum of one channel at one frame.
    pub fn frame(&self, channel: usize, frame: usize) -> &[Complex64] {
        let start = (channel * self.num_frames + frame) * self.num_bins;
        &self.data[start..start + self.num_bins]
    }

    /// `[x_1(n,k), …, x_I(n,k)]`.
    pub fn snapshot(&self, frame: usize, bin: usize) -> Vec<Complex64> {
        (0..self.num_channels)
            .map(|i| self.get(i, frame, bin))
            .collect()
    }

    /// Multiplies every value by `a`.
    pub fn scaled(&self, a: Complex64) -> Self {
        MultichannelSpectrogram {
            data: self.data.iter().map(|z| z * a).collect(),
            ..self.clone()
        }
    }
}

/// Short-time Fourier transform of each channel. Frame `n` covers samples
/// `[n * frameshift, n * frameshift + window_len)`; only full frames are
/// emitted and the one-sided spectrum is kept.
pub fn stft(signal: &[Vec<f64>], cfg: &StftConfig) -> Result<MultichannelSpectrogram> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(Error::TooShort("no channels".into()));
    }
    let len = signal[0].len();
    if signal.iter().any(|ch| ch.len() != len) {
        return Err(Error::Config("channels differ in length".into()));
    }
    if len < cfg.window_len {
        return Err(Error::TooShort(format!(
            "{len} samples is shorter than one {}-sample window",
            cfg.window_len
        )));
    }
    let n_win = cfg.window_len;
    let num_frames = cfg.num_frames(len);
    let num_bins = cfg.num_bins();
    let window = cfg.window_kind.coefficients(n_win);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_win);

    let mut data = Vec::with_capacity(signal.len() * num_frames * num_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_win];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for ch in signal {
        for n in 0..num_frames {
            let start = n * cfg.frameshift;
            for (b, (x, w)) in buf
                .iter_mut()
                .zip(ch[start..start + n_win].iter().zip(&window))
            {
                *b = Complex64::new(x * w, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..num_bins]);
        }
    }
    Ok(MultichannelSpectrogram {
        data,
        num_channels: signal.len(),
        num_frames,
        num_bins,
        bin_hz: cfg.bin_hz(),
    })
}

/// A real value per (frame, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct TfMap {
    values: Vec<f64>,
    num_frames: usize,
    num_bins: usize,
}

impl TfMap {
    pub fn from_fn(num_frames: usize, num_bins: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_frames * num_bins);
        for n in 0..num_frames {
            for k in 0..num_bins {
                values.push(f(n, k));
            }
        }
        TfMap {
            values,
            num_frames,
            num_bins,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    #[inline]
    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.num_bins + bin]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.num_bins..(frame + 1) * self.num_bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TfMap {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }
}

/// Log-compressed cross-power `P(n,k) = log10(C(n,k) + ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerEnvelope(pub TfMap);

impl std::ops::Deref for PowerEnvelope {
    type Target = TfMap;

    fn deref(&self) -> &TfMap {
        &self.0
    }
}

/// Mean cross-power magnitude over all channel pairs,
/// `C(n,k) = (1/I²) Σ_{i1,i2} |x_{i1} x*_{i2}|`.
///
/// Each term factors as `|x_{i1}| |x_{i2}|`, so the double sum collapses to
/// `(Σ_i |x_i| / I)²`.
pub fn cross_power_envelope(spec: &MultichannelSpectrogram) -> TfMap {
    let inv = 1.0 / spec.num_channels() as f64;
    let mut mean_mag = vec![0.0; spec.num_frames() * spec.num_bins()];
    for i in 0..spec.num_channels() {
        for n in 0..spec.num_frames() {
            let row = &mut mean_mag[n * spec.num_bins()..(n + 1) * spec.num_bins()];
            for (acc, x) in row.iter_mut().zip(spec.frame(i, n)) {
                *acc += x.norm() * inv;
            }
        }
    }
    TfMap {
        values: mean_mag.into_iter().map(|m| m * m).collect(),
        num_frames: spec.num_frames(),
        num_bins: spec.num_bins(),
    }
}

pub fn log_compress(c: &TfMap, xi: f64) -> PowerEnvelope {
    PowerEnvelope(c.map(|v| (v + xi).log10()))
}
