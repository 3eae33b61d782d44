//! Seeded speech-like test signals and clicks.
//!
//! The generator strings together voiced syllables: a glottal harmonic series
//! with a drifting pitch, shaped by three formant resonances, with a sharp
//! attack and a softer release. Unvoiced fricative bursts and pauses are
//! interleaved, and the utterance is padded with silence at both ends.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechParams {
    pub sample_rate: f64,
    /// Voiced/unvoiced material between the blanks, seconds.
    pub active_seconds: f64,
    /// Leading and trailing silence drawn from this range, seconds.
    pub blank_range: [f64; 2],
    pub f0_range: [f64; 2],
    pub fricatives: bool,
    /// Peak amplitude of the result.
    pub peak: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        SpeechParams {
            sample_rate: 16000.0,
            active_seconds: 1.2,
            blank_range: [0.2, 0.5],
            f0_range: [100.0, 220.0],
            fricatives: true,
            peak: 0.5,
        }
    }
}

fn formant_gain(f: f64, formants: &[(f64, f64)]) -> f64 {
    formants
        .iter()
        .map(|&(fc, bw)| {
            let x = (f - fc) / (bw / 2.0);
            1.0 / (1.0 + x * x)
        })
        .sum::<f64>()
        + 0.02
}

fn envelope(i: usize, len: usize, attack: usize, release: usize) -> f64 {
    if i < attack {
        let x = i as f64 / attack as f64;
        x * x
    } else if i + release >= len {
        let x = (len - i) as f64 / release as f64;
        x * x
    } else {
        1.0
    }
}

fn push_syllable(out: &mut Vec<f64>, rng: &mut ChaCha8Rng, p: &SpeechParams) {
    let fs = p.sample_rate;
    let len = (rng.random_range(0.08..0.2) * fs) as usize;
    let attack = (rng.random_range(0.008..0.02) * fs) as usize;
    let release = (0.04 * fs) as usize;
    let f0_start = rng.random_range(p.f0_range[0]..p.f0_range[1]);
    let f0_end = f0_start * rng.random_range(0.85..1.15);
    let formants = [
        (rng.random_range(300.0..900.0), 120.0),
        (rng.random_range(900.0..2500.0), 180.0),
        (rng.random_range(2300.0..3500.0), 260.0),
        (rng.random_range(3600.0..4700.0), 400.0),
    ];
    let nyq = (fs / 2.0).min(5500.0);
    let harmonics = (nyq / f0_start.max(f0_end)) as usize;
    let gains: Vec<f64> = (1..=harmonics)
        .map(|h| formant_gain(h as f64 * f0_start, &formants) / (h as f64).sqrt())
        .collect();
    let phases: Vec<f64> = (0..harmonics)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let mut phase0 = 0.0;
    let start = out.len();
    out.resize(start + len, 0.0);
    for i in 0..len {
        let t = i as f64 / len as f64;
        let f0 = f0_start + (f0_end - f0_start) * t;
        phase0 += std::f64::consts::TAU * f0 / fs;
        let mut s = 0.0;
        for (h, (&g, &ph)) in gains.iter().zip(&phases).enumerate() {
            s += g * ((h + 1) as f64 * phase0 + ph).sin();
        }
        out[start + i] = s * envelope(i, len, attack, release);
    }
}

fn push_fricative(out: &mut Vec<f64>, rng: &mut ChaCha8Rng, p: &SpeechParams, level: f64) {
    let fs = p.sample_rate;
    let len = (rng.random_range(0.04..0.1) * fs) as usize;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let attack = (0.01 * fs) as usize;
    let release = (0.02 * fs) as usize;
    let mut prev = 0.0;
    for i in 0..len {
        let w: f64 = noise.sample(rng);
        // First difference tilts the noise toward high frequencies.
        out.push(level * (w - prev) * envelope(i, len, attack, release));
        prev = w;
    }
}

/// A speech-like utterance; identical seeds give identical samples.
pub fn synth_utterance(params: &SpeechParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = params.sample_rate;
    let blank = |rng: &mut ChaCha8Rng| {
        (rng.random_range(params.blank_range[0]..=params.blank_range[1]) * fs) as usize
    };
    let mut out = vec![0.0; blank(&mut rng)];
    let active_end = out.len() + (params.active_seconds * fs) as usize;
    while out.len() < active_end {
        if params.fricatives && rng.random_bool(0.25) {
            push_fricative(&mut out, &mut rng, params, 0.3);
        }
        push_syllable(&mut out, &mut rng, params);
        let gap = (rng.random_range(0.03..0.12) * fs) as usize;
        out.resize(out.len() + gap, 0.0);
    }
    let tail = blank(&mut rng);
    out.resize(out.len() + tail, 0.0);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = params.peak / peak;
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

/// A click: a single-sided exponentially decaying noise burst of
/// `duration` seconds starting at sample `at`, in a buffer of `len` samples.
pub fn click(len: usize, at: usize, sample_rate: f64, duration: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    let n = ((duration * sample_rate) as usize).max(1);
    let tau = n as f64 / 5.0;
    for i in 0..n {
        if at + i >= len {
            break;
        }
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        out[at + i] = amplitude * sign * (-(i as f64) / tau).exp();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_padded() {
        let p = SpeechParams::default();
        let a = synth_utterance(&p, 7);
        let b = synth_utterance(&p, 7);
        let c = synth_utterance(&p, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let lead = a.iter().position(|v| *v != 0.0).unwrap();
        assert!((3200..=8000).contains(&lead), "{lead}");
        let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        assert!(a.len() as f64 >= 16000.0 * 1.6);
    }

    #[test]
    fn click_is_short() {
        let c = click(1000, 100, 16000.0, 0.002, 0.9, 1);
        assert!(c[..100].iter().all(|v| *v == 0.0));
        assert!(c[132..].iter().all(|v| *v == 0.0));
        assert_eq!(c[100].abs(), 0.9);
    }
}
