//! Onset-based direct-path bin selection with transient rejection.
//!
//! A bin passes when its log envelope rises sharply over the average of the
//! preceding `n_t` frames. Frames around short, loud bursts (clicks,
//! knocks) are removed from candidacy first: such a burst is a local maximum
//! of the frame-total envelope whose rise and fall are both steep.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{PowerEnvelope, TfMap};

/// Half-open `[lo, hi)` frequency range in Hz; `hi = None` means "up to the
/// spatial Nyquist frequency of the array".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandHz {
    pub lo: f64,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsetConfig {
    /// History length N_t in frames.
    pub n_t: usize,
    /// Number of bins kept; `None` keeps as many bins as there are frames.
    #[serde(default)]
    pub k_select: Option<usize>,
    /// Uphill slope threshold.
    pub v1: f64,
    /// Downhill slope threshold.
    pub v2: f64,
    /// Width of the local interval around a transient, in frames.
    pub delta_n: usize,
    pub band_mid: [f64; 2],
    /// Upper edge defaults to the spatial Nyquist frequency.
    pub band_high: BandHz,
    #[serde(default = "enabled")]
    pub transient_elimination: bool,
}

fn enabled() -> bool {
    true
}

impl Default for OnsetConfig {
    fn default() -> Self {
        OnsetConfig {
            n_t: 40,
            k_select: None,
            v1: 3.0,
            v2: 2.0,
            delta_n: 72,
            band_mid: [1000.0, 2000.0],
            band_high: BandHz {
                lo: 2000.0,
                hi: None,
            },
            transient_elimination: true,
        }
    }
}

impl OnsetConfig {
    /// Upper edge of the high band for an array with the given spatial
    /// Nyquist frequency.
    pub fn high_max(&self, spatial_nyquist: f64) -> f64 {
        self.band_high.hi.unwrap_or(spatial_nyquist)
    }

    pub fn validate(&self, spatial_nyquist: f64) -> Result<()> {
        if self.n_t == 0 {
            return Err(Error::Config("n_t must be at least 1".into()));
        }
        if self.k_select == Some(0) {
            return Err(Error::Config("k_select must be at least 1".into()));
        }
        if self.delta_n < 2 || !self.delta_n.is_multiple_of(2) {
            return Err(Error::Config("delta_n must be even and at least 2".into()));
        }
        let [mid_lo, mid_hi] = self.band_mid;
        let high_max = self.high_max(spatial_nyquist);
        if !(mid_lo < mid_hi) || !(self.band_high.lo < high_max) {
            return Err(Error::Config("empty frequency band".into()));
        }
        if mid_hi != self.band_high.lo {
            return Err(Error::Config(
                "middle band must end where the high band starts".into(),
            ));
        }
        if high_max > spatial_nyquist + 1e-9 {
            return Err(Error::Config(format!(
                "high band edge {high_max} Hz exceeds spatial Nyquist {spatial_nyquist:.1} Hz"
            )));
        }
        Ok(())
    }
}

/// ΔP(n,k), defined from frame `n_t` onward.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRate {
    first_frame: usize,
    values: TfMap,
}

impl PowerRate {
    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    /// Total frames of the underlying envelope.
    pub fn num_frames(&self) -> usize {
        self.first_frame + self.values.num_frames()
    }

    pub fn num_bins(&self) -> usize {
        self.values.num_bins()
    }

    /// `None` for frames without full history.
    pub fn get(&self, frame: usize, bin: usize) -> Option<f64> {
        (frame >= self.first_frame).then(|| self.values.get(frame - self.first_frame, bin))
    }
}

/// `ΔP(n,k) = P(n,k) − (1/N_t) Σ_{t=1..N_t} P(n−t,k)` for `n ≥ N_t`.
pub fn power_rate(p: &PowerEnvelope, n_t: usize) -> Result<PowerRate> {
    let frames = p.num_frames();
    if n_t == 0 || frames < n_t + 1 {
        return Err(Error::TooShortForOnset { frames, n_t });
    }
    let bins = p.num_bins();
    let inv = 1.0 / n_t as f64;
    let mut hist: Vec<f64> = vec![0.0; bins];
    for n in 0..n_t {
        for (h, v) in hist.iter_mut().zip(p.row(n)) {
            *h += v;
        }
    }
    let mut out = Vec::with_capacity((frames - n_t) * bins);
    for n in n_t..frames {
        let row = p.row(n);
        out.extend(row.iter().zip(&hist).map(|(v, h)| v - h * inv));
        let old = p.row(n - n_t);
        for ((h, add), sub) in hist.iter_mut().zip(row).zip(old) {
            *h += add - sub;
        }
    }
    let mut it = out.into_iter();
    Ok(PowerRate {
        first_frame: n_t,
        values: TfMap::from_fn(frames - n_t, bins, |_, _| it.next().unwrap()),
    })
}

/// `P_t(n) = Σ_k P(n,k)`.
pub fn total_power(p: &PowerEnvelope) -> Vec<f64> {
    (0..p.num_frames()).map(|n| p.row(n).iter().sum()).collect()
}

fn max_slope(pt: &[f64], n: usize, half: usize, forward: bool) -> Option<f64> {
    (1..=half)
        .filter_map(|dn| {
            let other = if forward {
                pt.get(n + dn)
            } else {
                n.checked_sub(dn).map(|m| &pt[m])
            }?;
            Some((pt[n] - other) / dn as f64)
        })
        .max_by(f64::total_cmp)
}

/// Frames that are local maxima of `P_t` with a steep rise (> v1) within
/// `delta_n / 2` frames before and a steep fall (> v2) within `delta_n / 2`
/// frames after. Slope windows are clipped at the signal edges.
pub fn detect_transients(pt: &[f64], cfg: &OnsetConfig) -> Vec<usize> {
    let half = cfg.delta_n / 2;
    (1..pt.len().saturating_sub(1))
        .filter(|&n| pt[n + 1] - pt[n] < 0.0 && pt[n] - pt[n - 1] > 0.0)
        .filter(|&n| {
            max_slope(pt, n, half, false).is_some_and(|s| s > cfg.v1)
                && max_slope(pt, n, half, true).is_some_and(|s| s > cfg.v2)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedBin {
    pub frame: usize,
    pub bin: usize,
    pub score: f64,
    pub band: Band,
}

/// Bins that passed the onset test, ordered by descending ΔP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinSet {
    pub bins: Vec<SelectedBin>,
}

impl BinSet {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn band(&self, band: Band) -> impl Iterator<Item = &SelectedBin> {
        self.bins.iter().filter(move |b| b.band == band)
    }

    pub fn mid(&self) -> impl Iterator<Item = &SelectedBin> {
        self.band(Band::Mid)
    }

    pub fn high(&self) -> impl Iterator<Item = &SelectedBin> {
        self.band(Band::High)
    }
}

/// Ranking: larger ΔP first, then earlier frame, then lower bin.
fn rank(a: &SelectedBin, b: &SelectedBin) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.frame.cmp(&b.frame))
        .then(a.bin.cmp(&b.bin))
}

/// Frames within `delta_n / 2` of any transient.
pub fn transient_mask(num_frames: usize, transients: &[usize], delta_n: usize) -> Vec<bool> {
    let half = delta_n / 2;
    let mut masked = vec![false; num_frames];
    for &t in transients {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(num_frames.saturating_sub(1));
        for m in masked.iter_mut().take(hi + 1).skip(lo) {
            *m = true;
        }
    }
    masked
}

/// Keeps the `k_select` largest ΔP among in-band bins outside transient
/// neighbourhoods and labels each as middle or high band. Masked frames are
/// excluded outright rather than zeroed, so they can never outrank a bin
/// with negative ΔP.
pub fn select_bins(
    rate: &PowerRate,
    transients: &[usize],
    cfg: &OnsetConfig,
    bin_hz: f64,
    spatial_nyquist: f64,
) -> Result<BinSet> {
    let frames = rate.num_frames();
    let lo_hz = cfg.band_mid[0];
    let split_hz = cfg.band_high.lo;
    let hi_hz = cfg.high_max(spatial_nyquist);
    let bands: Vec<(usize, Band)> = (0..rate.num_bins())
        .filter_map(|k| {
            let f = k as f64 * bin_hz;
            if f < lo_hz || f > hi_hz {
                None
            } else if f < split_hz {
                Some((k, Band::Mid))
            } else {
                Some((k, Band::High))
            }
        })
        .collect();
    let masked = if cfg.transient_elimination {
        transient_mask(frames, transients, cfg.delta_n)
    } else {
        vec![false; frames]
    };

    let mut candidates = Vec::with_capacity(frames.saturating_sub(rate.first_frame()) * bands.len());
    for n in rate.first_frame()..frames {
        if masked[n] {
            continue;
        }
        for &(k, band) in &bands {
            if let Some(score) = rate.get(n, k) {
                candidates.push(SelectedBin {
                    frame: n,
                    bin: k,
                    score,
                    band,
                });
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoDirectPathBins);
    }
    let keep = cfg.k_select.unwrap_or(frames).min(candidates.len());
    if keep < candidates.len() {
        candidates.select_nth_unstable_by(keep - 1, rank);
        candidates.truncate(keep);
    }
    candidates.sort_by(rank);
    Ok(BinSet { bins: candidates })
}
