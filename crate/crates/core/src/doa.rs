//! Per-bin steered response power, TDOA voting and the weighted high-band
//! refinement, plus a plain SRP-PHAT baseline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::onset::Band;
use crate::stft::MultichannelSpectrogram;
use crate::wpe::DesiredBin;

/// Steering vector for bin `k`: `exp(−j ω_k u_i sinθ / c)` with `u_i`
/// measured from the array centre.
pub fn steering_vector(
    k: usize,
    theta_deg: f64,
    geometry: &ArrayGeometry,
    sample_rate: f64,
    window_len: usize,
) -> Vec<Complex64> {
    let omega = 2.0 * std::f64::consts::PI * k as f64 * sample_rate / window_len as f64;
    let s = theta_deg.to_radians().sin() / geometry.sound_speed();
    geometry
        .axis_positions()
        .iter()
        .map(|u| Complex64::from_polar(1.0, -omega * u * s))
        .collect()
}

/// Adjacent-microphone TDOA for a direction.
pub fn theta_to_tdoa(theta_deg: f64, geometry: &ArrayGeometry) -> f64 {
    geometry.spacing() * theta_deg.to_radians().sin() / geometry.sound_speed()
}

/// Inverse of [`theta_to_tdoa`], clamping to the physical range.
pub fn tdoa_to_theta(tau: f64, geometry: &ArrayGeometry) -> f64 {
    (tau * geometry.sound_speed() / geometry.spacing())
        .clamp(-1.0, 1.0)
        .asin()
        .to_degrees()
}

/// Candidate directions and their steering vectors for every STFT bin.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    angles: Vec<f64>,
    taus: Vec<f64>,
    num_bins: usize,
    num_mics: usize,
    vectors: Vec<Complex64>,
}

impl SteeringGrid {
    pub fn new(
        geometry: &ArrayGeometry,
        sample_rate: f64,
        window_len: usize,
        resolution_deg: f64,
    ) -> Result<Self> {
        let steps = 180.0 / resolution_deg;
        if !(resolution_deg > 0.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "grid resolution {resolution_deg} must divide 180 degrees"
            )));
        }
        let steps = steps.round() as usize;
        let angles: Vec<f64> = (0..=steps)
            .map(|i| -90.0 + i as f64 * resolution_deg)
            .collect();
        let taus = angles.iter().map(|&a| theta_to_tdoa(a, geometry)).collect();
        let num_bins = window_len / 2 + 1;
        let num_mics = geometry.num_mics();
        let mut vectors = Vec::with_capacity(angles.len() * num_bins * num_mics);
        for &a in &angles {
            for k in 0..num_bins {
                vectors.extend(steering_vector(k, a, geometry, sample_rate, window_len));
            }
        }
        Ok(SteeringGrid {
            angles,
            taus,
            num_bins,
            num_mics,
            vectors,
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// TDOA image of each grid angle, ascending.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn vector(&self, angle: usize, k: usize) -> &[Complex64] {
        let start = (angle * self.num_bins + k) * self.num_mics;
        &self.vectors[start..start + self.num_mics]
    }

    /// `|gᴴ d|²` at one grid angle.
    pub fn response(&self, angle: usize, k: usize, d: &[Complex64]) -> f64 {
        self.vector(angle, k)
            .iter()
            .zip(d)
            .map(|(g, x)| g.conj() * x)
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// Index of the maximum, ties toward the smaller `|key|`.
fn argmax_by(values: &[f64], key: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] || (values[i] == values[best] && key[i].abs() < key[best].abs())
        {
            best = i;
        }
    }
    best
}

/// SRP estimate for one snapshot; returns the grid index of the peak.
pub fn srp_bin(d: &[Complex64], k: usize, grid: &SteeringGrid) -> Result<usize> {
    if d.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::SilentBin);
    }
    let obj: Vec<f64> = (0..grid.len()).map(|a| grid.response(a, k, d)).collect();
    Ok(argmax_by(&obj, grid.angles()))
}

/// How `k` in the neighbourhood width `α/k` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodScale {
    #[default]
    BinIndex,
    Hertz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdoaNeighborhoodConfig {
    pub alpha: f64,
    #[serde(default)]
    pub k_units: NeighborhoodScale,
}

impl Default for TdoaNeighborhoodConfig {
    fn default() -> Self {
        TdoaNeighborhoodConfig {
            alpha: 8.0,
            k_units: NeighborhoodScale::BinIndex,
        }
    }
}

impl TdoaNeighborhoodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("alpha must be positive".into()))
        }
    }

    fn scale(&self, k: usize, bin_hz: f64) -> f64 {
        match self.k_units {
            NeighborhoodScale::BinIndex => self.alpha / k as f64,
            NeighborhoodScale::Hertz => self.alpha / (k as f64 * bin_hz),
        }
    }
}

/// `[τ − a (u0/c + τ), τ + a (u0/c − τ)]` with `a = α/k`. The interval leans
/// toward broadside.
pub fn tdoa_neighborhood(
    tau: f64,
    k: usize,
    bin_hz: f64,
    cfg: &TdoaNeighborhoodConfig,
    geometry: &ArrayGeometry,
) -> (f64, f64) {
    let a = cfg.scale(k, bin_hz);
    let t = geometry.max_tdoa();
    (tau - a * (t + tau), tau + a * (t - tau))
}

/// One per-bin estimate entering the middle-band vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdoaVote {
    pub tau: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidBandFusion {
    pub tau: f64,
    pub index: usize,
    /// Votes per candidate, aligned with the candidate list.
    pub counts: Vec<u32>,
}

/// Quasi-histogram vote: each candidate τ counts the estimates lying in its
/// neighbourhood `Θ(τ, k)`. Candidates must be ascending. Ties go to the
/// smaller `|τ|`, then to the earlier candidate.
pub fn fuse_mid_band(
    votes: &[TdoaVote],
    candidates: &[f64],
    bin_hz: f64,
    cfg: &TdoaNeighborhoodConfig,
    geometry: &ArrayGeometry,
) -> Result<MidBandFusion> {
    if votes.is_empty() {
        return Err(Error::NoMidBandBins);
    }
    cfg.validate()?;
    let t = geometry.max_tdoa();
    let n = candidates.len();
    let covers = |c: usize, v: &TdoaVote| {
        let (lo, hi) = tdoa_neighborhood(candidates[c], v.k, bin_hz, cfg, geometry);
        lo <= v.tau && v.tau <= hi
    };
    // Θ(τ,k) is [τ(1−a) − aT, τ(1−a) + aT]; for a < 1 both ends rise with τ, so
    // the covering candidates form a run found by bisection and confirmed
    // with the exact test at its edges.
    let mut diff = vec![0i64; n + 1];
    for v in votes {
        let a = cfg.scale(v.k, bin_hz);
        if a >= 1.0 {
            for c in 0..n {
                if covers(c, v) {
                    diff[c] += 1;
                    diff[c + 1] -= 1;
                }
            }
            continue;
        }
        let lo_tau = (v.tau - a * t) / (1.0 - a);
        let hi_tau = (v.tau + a * t) / (1.0 - a);
        let mut start = candidates.partition_point(|&c| c < lo_tau).saturating_sub(2);
        while start < n && !covers(start, v) && candidates[start] <= hi_tau {
            start += 1;
        }
        if start >= n || !covers(start, v) {
            continue;
        }
        let mut end = start + 1;
        while end < n && covers(end, v) {
            end += 1;
        }
        diff[start] += 1;
        diff[end] -= 1;
    }
    let mut counts = Vec::with_capacity(n);
    let mut run = 0i64;
    for d in &diff[..n] {
        run += d;
        counts.push(run as u32);
    }
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let index = argmax_by(&as_f, candidates);
    Ok(MidBandFusion {
        tau: candidates[index],
        index,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub sigma: f64,
    /// Cutoff in units of sigma.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    3.0
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            sigma: 1.0 / 15.0,
            cutoff: 3.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.cutoff > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("sigma and cutoff must be positive".into()))
        }
    }
}

/// Gaussian agreement weight between a high-band TDOA and the fused
/// middle-band TDOA, in the scaled offset `z = Δτ·c/(2u0)`.
pub fn gaussian_weight(tau_h: f64, tau_m: f64, cfg: &RefineConfig, geometry: &ArrayGeometry) -> f64 {
    let z = (tau_h - tau_m) / (2.0 * geometry.max_tdoa());
    if z.abs() > cfg.cutoff * cfg.sigma {
        return 0.0;
    }
    (-z * z / (2.0 * cfg.sigma * cfg.sigma)).exp() / (2.0 * std::f64::consts::PI * cfg.sigma)
}

/// Per-bin SRP result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    pub frame: usize,
    pub bin: usize,
    pub band: Band,
    pub theta: f64,
    pub tau: f64,
}

/// Runs [`srp_bin`] over desired vectors, skipping silent ones. Returns the
/// estimates and the number skipped.
pub fn estimate_bins(
    bins: &[DesiredBin],
    band: Band,
    grid: &SteeringGrid,
) -> (Vec<BinEstimate>, usize) {
    let mut out = Vec::with_capacity(bins.len());
    let mut silent = 0;
    for b in bins {
        match srp_bin(&b.d, b.bin, grid) {
            Ok(i) => out.push(BinEstimate {
                frame: b.frame,
                bin: b.bin,
                band,
                theta: grid.angles()[i],
                tau: grid.taus()[i],
            }),
            Err(_) => silent += 1,
        }
    }
    (out, silent)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighBandRefinement {
    pub theta: f64,
    /// True when no high-band bin carried weight and the middle-band angle
    /// was returned instead.
    pub fallback: bool,
    pub weighted_bins: usize,
    pub objective: Vec<f64>,
}

/// Weighted SRP-PHAT over the high band:
/// `argmax_θ Σ W(n,k) |g(k,θ)ᴴ D|² / ‖D‖²`.
pub fn refine_high_band(
    bins: &[DesiredBin],
    tau_m: f64,
    grid: &SteeringGrid,
    cfg: &RefineConfig,
    geometry: &ArrayGeometry,
) -> Result<HighBandRefinement> {
    cfg.validate()?;
    let mut objective = vec![0.0; grid.len()];
    let mut weighted = 0;
    for b in bins {
        let energy: f64 = b.d.iter().map(|z| z.norm_sqr()).sum();
        if energy == 0.0 {
            continue;
        }
        let Ok(idx) = srp_bin(&b.d, b.bin, grid) else {
            continue;
        };
        let w = gaussian_weight(grid.taus()[idx], tau_m, cfg, geometry);
        if w == 0.0 {
            continue;
        }
        weighted += 1;
        for (a, o) in objective.iter_mut().enumerate() {
            *o += w * grid.response(a, b.bin, &b.d) / energy;
        }
    }
    if weighted == 0 {
        return Ok(HighBandRefinement {
            theta: tdoa_to_theta(tau_m, geometry),
            fallback: true,
            weighted_bins: 0,
            objective,
        });
    }
    let best = argmax_by(&objective, grid.angles());
    Ok(HighBandRefinement {
        theta: grid.angles()[best],
        fallback: false,
        weighted_bins: weighted,
        objective,
    })
}

/// Full-band SRP-PHAT over every frame: `argmax_θ Σ_{n,k} |gᴴx|² / xᴴx` for
/// bins in `[band.0, band.1]` Hz.
pub fn srp_phat_baseline(
    spec: &MultichannelSpectrogram,
    grid: &SteeringGrid,
    band: (f64, f64),
) -> Result<(f64, Vec<f64>)> {
    let bin_hz = spec.bin_hz();
    let lo = (band.0 / bin_hz).ceil().max(0.0) as usize;
    let hi = ((band.1 / bin_hz).floor() as usize).min(spec.num_bins().saturating_sub(1));
    if !(band.0 < band.1) || lo > hi {
        return Err(Error::Config(format!(
            "empty baseline band [{}, {}] Hz",
            band.0, band.1
        )));
    }
    let m = spec.num_channels();
    let mut objective = vec![0.0; grid.len()];
    let mut r = vec![Complex64::new(0.0, 0.0); m * m];
    for k in lo..=hi {
        r.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for n in 0..spec.num_frames() {
            let x = spec.snapshot(n, k);
            let e: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            if e == 0.0 {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    r[i * m + j] += x[i] * x[j].conj() / e;
                }
            }
        }
        for (a, o) in objective.iter_mut().enumerate() {
            let g = grid.vector(a, k);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..m {
                for j in 0..m {
                    acc += g[i].conj() * r[i * m + j] * g[j];
                }
            }
            *o += acc.re;
        }
    }
    let best = argmax_by(&objective, grid.angles());
    Ok((grid.angles()[best], objective))
}
