//! Bin-selective weighted prediction error (WPE) dereverberation.
//!
//! Late reverberation in `x_i(n,k)` is predicted from a delayed stack of all
//! channels and subtracted:
//!
//! ```text
//! d_i(n,k) = x_i(n,k) − w_i(k)ᴴ x(n−D, k)
//! x(n,k)   = [x_1(n), …, x_I(n), x_1(n−p), …, x_I(n−p), …, x_I(n−(L−1)p)]
//! ```
//!
//! The STFT runs at a short frameshift, so taps are spaced `p` frames apart
//! to span the same time as an ordinary coarse-shift predictor of order L.
//! Filters minimise `J = Σ_n |d_i|² / ε_i²` with alternating variance
//! updates.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onset::BinSet;
use crate::stft::MultichannelSpectrogram;

/// How ε_i²(n,k) is refreshed after each filter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceUpdate {
    /// `max(|d|², floor_eps)`.
    #[default]
    Floor,
    /// `max(|d|², J)` with J the current scalar cost.
    CostFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WpeConfig {
    /// Tap spacing in frames (coarse shift / fine shift).
    pub p: usize,
    /// Taps per channel.
    pub order_l: usize,
    /// Prediction delay in fine-shift frames.
    pub delay_d: usize,
    #[serde(rename = "eps")]
    pub floor_eps: f64,
    pub max_iters: usize,
    /// Tikhonov weight relative to the mean diagonal of the normal matrix.
    pub reg: f64,
    pub converge_tol: f64,
    #[serde(default)]
    pub variance_update: VarianceUpdate,
}

impl Default for WpeConfig {
    fn default() -> Self {
        WpeConfig {
            p: 32,
            order_l: 8,
            delay_d: 64,
            floor_eps: 1e-4,
            max_iters: 3,
            reg: 1e-8,
            converge_tol: 1e-4,
            variance_update: VarianceUpdate::Floor,
        }
    }
}

impl WpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.order_l == 0 || self.max_iters == 0 {
            return Err(Error::Config("p, order_l and max_iters must be >= 1".into()));
        }
        if self.delay_d < self.p {
            return Err(Error::Config("delay_d must be at least p".into()));
        }
        if !(self.floor_eps > 0.0) || !(self.reg >= 0.0) {
            return Err(Error::Config("eps must be positive and reg non-negative".into()));
        }
        Ok(())
    }

    /// Oldest lag of the stacked vector, `(L−1) p`.
    pub fn span(&self) -> usize {
        (self.order_l - 1) * self.p
    }

    /// First frame whose delayed stack `x(n−D)` exists.
    pub fn first_frame(&self) -> usize {
        self.delay_d + self.span()
    }
}

/// `x(n,k)`: I channels at each of the lags `0, p, …, (L−1)p`, channel-major
/// within a lag block.
pub fn stack_predictor(
    spec: &MultichannelSpectrogram,
    n: usize,
    k: usize,
    cfg: &WpeConfig,
) -> Result<Vec<Complex64>> {
    if n < cfg.span() || n >= spec.num_frames() {
        return Err(Error::NoWpeContext {
            frame: n,
            needed: cfg.span(),
        });
    }
    let mut v = Vec::with_capacity(spec.num_channels() * cfg.order_l);
    for l in 0..cfg.order_l {
        for i in 0..spec.num_channels() {
            v.push(spec.get(i, n - l * cfg.p, k));
        }
    }
    Ok(v)
}

/// Cost of one filter update, both evaluated with the variances that were
/// used to compute the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStep {
    pub before: f64,
    pub after: f64,
}

/// Result of running WPE for one channel at one bin.
#[derive(Debug, Clone, PartialEq)]
pub struct WpeState {
    pub bin: usize,
    pub channel: usize,
    /// Length I·L.
    pub filter: Vec<Complex64>,
    /// First frame with prediction context; earlier frames are untouched.
    pub first_frame: usize,
    /// `d_i(n,k)` for every frame of the spectrogram.
    pub desired: Vec<Complex64>,
    /// ε_i²(n,k) used in the last filter update, from `first_frame` on.
    pub variances: Vec<f64>,
    pub cost_trace: Vec<CostStep>,
}

impl WpeState {
    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().map_or(0.0, |s| s.after)
    }
}

/// Delayed stacks `x(n−D,k)` for every frame with context, split into real
/// and imaginary parts; component `r` of frame `j` sits at `r * frames + j`.
struct DelayedStack {
    re: Vec<f64>,
    im: Vec<f64>,
    dim: usize,
    frames: usize,
    first_frame: usize,
}

impl DelayedStack {
    fn build(spec: &MultichannelSpectrogram, k: usize, cfg: &WpeConfig) -> Self {
        let dim = spec.num_channels() * cfg.order_l;
        let first_frame = cfg.first_frame();
        let frames = spec.num_frames().saturating_sub(first_frame);
        let mut re = vec![0.0; dim * frames];
        let mut im = vec![0.0; dim * frames];
        for l in 0..cfg.order_l {
            for i in 0..spec.num_channels() {
                let r = l * spec.num_channels() + i;
                for j in 0..frames {
                    let z = spec.get(i, first_frame + j - cfg.delay_d - l * cfg.p, k);
                    re[r * frames + j] = z.re;
                    im[r * frames + j] = z.im;
                }
            }
        }
        DelayedStack {
            re,
            im,
            dim,
            frames,
            first_frame,
        }
    }

    /// `w(k)ᴴ x(n−D,k)` for every frame.
    fn predict(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = self.frames;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (r, wr) in w.iter().enumerate() {
            let a = &self.re[r * n..(r + 1) * n];
            let b = &self.im[r * n..(r + 1) * n];
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                o.re += wr.re * x + wr.im * y;
                o.im += wr.re * y - wr.im * x;
            }
        }
        out
    }

    /// Weighted normal equations `A = Σ x xᴴ / ε²`, `b = Σ x y* / ε²`.
    fn normal_equations(
        &self,
        target: &[Complex64],
        var: &[f64],
    ) -> (DMatrix<Complex64>, DVector<Complex64>) {
        let (dim, n) = (self.dim, self.frames);
        let scale: Vec<f64> = var.iter().map(|v| 1.0 / v.sqrt()).collect();
        // Row r of `s` is [Re x_r · s, Im x_r · s].
        let mut s = vec![0.0; dim * 2 * n];
        for r in 0..dim {
            let row = &mut s[r * 2 * n..(r + 1) * 2 * n];
            for j in 0..n {
                row[j] = self.re[r * n + j] * scale[j];
                row[n + j] = self.im[r * n + j] * scale[j];
            }
        }
        let mut re_a = vec![0.0; dim * dim];
        let mut cross = vec![0.0; dim * dim];
        let (rs, cs) = (2 * n as isize, 1isize);
        // SAFETY: every pointer/stride pair addresses inside `s`, `re_a` or
        // `cross`, whose lengths match the stated shapes.
        unsafe {
            matrixmultiply::dgemm(
                dim, 2 * n, dim, 1.0,
                s.as_ptr(), rs, cs,
                s.as_ptr(), cs, rs,
                0.0, re_a.as_mut_ptr(), dim as isize, 1,
            );
            matrixmultiply::dgemm(
                dim, n, dim, 1.0,
                s.as_ptr().add(n), rs, cs,
                s.as_ptr(), cs, rs,
                0.0, cross.as_mut_ptr(), dim as isize, 1,
            );
        }
        let a = DMatrix::from_fn(dim, dim, |r, c| {
            Complex64::new(re_a[r * dim + c], cross[r * dim + c] - cross[c * dim + r])
        });
        let b = DVector::from_fn(dim, |r, _| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, y) in target.iter().enumerate() {
                let w = scale[j];
                let x = Complex64::new(s[r * 2 * n + j], s[r * 2 * n + n + j]);
                acc += x * y.conj() * w;
            }
            acc
        });
        (a, b)
    }
}

fn cost(target: &[Complex64], pred: &[Complex64], var: &[f64]) -> f64 {
    target
        .iter()
        .zip(pred)
        .zip(var)
        .map(|((y, p), v)| (y - p).norm_sqr() / v)
        .sum()
}

/// Solves `(A + λ I) w = b` with `λ = reg · tr(A) / dim`; falls back to an
/// SVD pseudo-inverse when the regularized matrix is not positive definite.
fn solve_normal(
    a: DMatrix<Complex64>,
    b: DVector<Complex64>,
    reg: f64,
    bin: usize,
    channel: usize,
) -> Result<Vec<Complex64>> {
    let dim = a.nrows();
    let trace: f64 = (0..dim).map(|i| a[(i, i)].re).sum();
    if trace <= 0.0 || !trace.is_finite() {
        return Ok(vec![Complex64::new(0.0, 0.0); dim]);
    }
    let lambda = reg * trace / dim as f64;
    let mut reg_a = a;
    for i in 0..dim {
        reg_a[(i, i)] += lambda;
    }
    if let Some(chol) = reg_a.clone().cholesky() {
        return Ok(chol.solve(&b).iter().copied().collect());
    }
    let pinv = reg_a
        .pseudo_inverse(1e-12 * trace)
        .map_err(|_| Error::SingularSystem { bin, channel })?;
    let w = pinv * b;
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularSystem { bin, channel });
    }
    Ok(w.iter().copied().collect())
}

fn run_channel(
    spec: &MultichannelSpectrogram,
    stack: &DelayedStack,
    channel: usize,
    bin: usize,
    cfg: &WpeConfig,
) -> Result<WpeState> {
    let first = stack.first_frame;
    let target: Vec<Complex64> = (first..spec.num_frames())
        .map(|n| spec.get(channel, n, bin))
        .collect();
    let mut var: Vec<f64> = target
        .iter()
        .map(|x| x.norm_sqr().max(cfg.floor_eps))
        .collect();
    let mut w = vec![Complex64::new(0.0, 0.0); stack.dim];
    let mut pred = vec![Complex64::new(0.0, 0.0); stack.frames];
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut desired = target.clone();

    for it in 0..cfg.max_iters {
        let (a, b) = stack.normal_equations(&target, &var);
        let before = cost(&target, &pred, &var);
        w = solve_normal(a, b, cfg.reg, bin, channel)?;
        pred = stack.predict(&w);
        let after = cost(&target, &pred, &var);
        for ((d, y), p) in desired.iter_mut().zip(&target).zip(&pred) {
            *d = y - p;
        }
        let converged = trace
            .last()
            .is_some_and(|prev: &CostStep| {
                (prev.after - after).abs() <= cfg.converge_tol * prev.after.abs()
            });
        trace.push(CostStep { before, after });
        if converged || it + 1 == cfg.max_iters {
            break;
        }
        let floor = match cfg.variance_update {
            VarianceUpdate::Floor => cfg.floor_eps,
            VarianceUpdate::CostFloor => after.max(cfg.floor_eps),
        };
        for (v, d) in var.iter_mut().zip(&desired) {
            *v = d.norm_sqr().max(floor);
        }
    }

    let mut full: Vec<Complex64> = (0..first.min(spec.num_frames()))
        .map(|n| spec.get(channel, n, bin))
        .collect();
    full.extend(desired);
    Ok(WpeState {
        bin,
        channel,
        filter: w,
        first_frame: first,
        desired: full,
        variances: var,
        cost_trace: trace,
    })
}

/// Runs WPE for channel `channel` at bin `bin` over every frame with
/// context and returns `d_i(n,k)` at the requested frames along with the
/// solver state.
pub fn wpe_iterate(
    spec: &MultichannelSpectrogram,
    channel: usize,
    bin: usize,
    frames: &[usize],
    cfg: &WpeConfig,
) -> Result<(Vec<Complex64>, WpeState)> {
    cfg.validate()?;
    if let Some(&bad) = frames
        .iter()
        .find(|&&n| n < cfg.first_frame() || n >= spec.num_frames())
    {
        return Err(Error::NoWpeContext {
            frame: bad,
            needed: cfg.first_frame(),
        });
    }
    let stack = DelayedStack::build(spec, bin, cfg);
    let state = run_channel(spec, &stack, channel, bin, cfg)?;
    let picked = frames.iter().map(|&n| state.desired[n]).collect();
    Ok((picked, state))
}

/// Desired-signal vector `D(n,k) = [d_1, …, d_I]` for one selected bin.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredBin {
    pub frame: usize,
    pub bin: usize,
    pub d: Vec<Complex64>,
    /// True when the frame had no prediction context and `d = x`.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Dereverberated {
    /// One entry per selected bin, in `BinSet` order.
    pub bins: Vec<DesiredBin>,
    /// Number of distinct frequencies solved.
    pub solves: usize,
    /// Solver states keyed by (bin, channel).
    pub states: BTreeMap<(usize, usize), WpeState>,
}

/// Dereverberates only the frequencies present in `bins`. Each distinct
/// frequency is solved once over the whole utterance; the selected frames
/// are then read out of that solution.
pub fn dereverberate_bins(
    spec: &MultichannelSpectrogram,
    bins: &BinSet,
    cfg: &WpeConfig,
) -> Result<Dereverberated> {
    cfg.validate()?;
    let mut freqs: Vec<usize> = bins.bins.iter().map(|b| b.bin).collect();
    freqs.sort_unstable();
    freqs.dedup();
    let solved: Vec<Vec<WpeState>> = freqs
        .par_iter()
        .map(|&k| {
            let stack = DelayedStack::build(spec, k, cfg);
            (0..spec.num_channels())
                .map(|i| run_channel(spec, &stack, i, k, cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let states: BTreeMap<(usize, usize), WpeState> = solved
        .into_iter()
        .flatten()
        .map(|s| ((s.bin, s.channel), s))
        .collect();
    let first = cfg.first_frame();
    let out = bins
        .bins
        .iter()
        .map(|b| {
            let fallback = b.frame < first;
            let d = (0..spec.num_channels())
                .map(|i| states[&(b.bin, i)].desired[b.frame])
                .collect();
            DesiredBin {
                frame: b.frame,
                bin: b.bin,
                d,
                fallback,
            }
        })
        .collect();
    Ok(Dereverberated {
        bins: out,
        solves: freqs.len(),
        states,
    })
}

/// Raw `x(n,k)` vectors for the selected bins, for pipelines that skip WPE.
pub fn passthrough_bins(spec: &MultichannelSpectrogram, bins: &BinSet) -> Vec<DesiredBin> {
    bins.bins
        .iter()
        .map(|b| DesiredBin {
            frame: b.frame,
            bin: b.bin,
            d: spec.snapshot(b.frame, b.bin),
            fallback: true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onset::{Band, SelectedBin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn predict(w: &[Complex64], x: &[Complex64]) -> Complex64 {
        w.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
    }

    fn white(frames: usize, channels: usize, seed: u64) -> MultichannelSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let vals: Vec<Complex64> = (0..frames * channels)
            .map(|_| Complex64::new(g.sample(&mut rng), g.sample(&mut rng)))
            .collect();
        MultichannelSpectrogram::from_fn(channels, frames, 1, 1.0, |i, n, _| vals[i * frames + n])
    }

    #[test]
    fn stack_layout() {
        let spec = MultichannelSpectrogram::from_fn(2, 100, 1, 1.0, |i, n, _| {
            Complex64::new(n as f64, i as f64)
        });
        let cfg = WpeConfig {
            order_l: 2,
            ..WpeConfig::default()
        };
        let v = stack_predictor(&spec, 40, 0, &cfg).unwrap();
        let expect = [(40.0, 0.0), (40.0, 1.0), (8.0, 0.0), (8.0, 1.0)];
        assert_eq!(v.len(), 4);
        for (z, (re, im)) in v.iter().zip(expect) {
            assert_eq!(*z, Complex64::new(re, im));
        }
        let l1 = WpeConfig {
            order_l: 1,
            ..WpeConfig::default()
        };
        assert_eq!(stack_predictor(&spec, 0, 0, &l1).unwrap().len(), 2);
        assert!(matches!(
            stack_predictor(&spec, 31, 0, &cfg),
            Err(Error::NoWpeContext { .. })
        ));
        let zero = MultichannelSpectrogram::from_fn(2, 100, 1, 1.0, |_, _, _| Complex64::new(0.0, 0.0));
        assert!(stack_predictor(&zero, 50, 0, &cfg).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_input_stays_zero() {
        let spec = MultichannelSpectrogram::from_fn(2, 400, 1, 1.0, |_, _, _| Complex64::new(0.0, 0.0));
        let cfg = WpeConfig::default();
        let frames: Vec<usize> = (cfg.first_frame()..400).collect();
        let (d, state) = wpe_iterate(&spec, 0, 0, &frames, &cfg).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
        assert!(state.filter.iter().all(|z| z.norm() == 0.0));
        assert_eq!(state.final_cost(), 0.0);
    }

    #[test]
    fn independent_input_is_left_alone() {
        let spec = white(1500, 2, 11);
        let cfg = WpeConfig {
            order_l: 2,
            ..WpeConfig::default()
        };
        let frames: Vec<usize> = (cfg.first_frame()..1500).collect();
        let (d, state) = wpe_iterate(&spec, 0, 0, &frames, &cfg).unwrap();
        let num: f64 = frames
            .iter()
            .zip(&d)
            .map(|(&n, z)| (z - spec.get(0, n, 0)).norm_sqr())
            .sum();
        let den: f64 = frames.iter().map(|&n| spec.get(0, n, 0).norm_sqr()).sum();
        assert!((num / den).sqrt() < 0.1, "{}", (num / den).sqrt());
        let norm: f64 = state.filter.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 0.2);
    }

    #[test]
    fn identity_reconstructs_input() {
        let spec = white(600, 2, 3);
        let cfg = WpeConfig {
            order_l: 3,
            ..WpeConfig::default()
        };
        let frames: Vec<usize> = (cfg.first_frame()..600).collect();
        let (d, state) = wpe_iterate(&spec, 1, 0, &frames, &cfg).unwrap();
        for (&n, dn) in frames.iter().zip(&d) {
            let x = stack_predictor(&spec, n - cfg.delay_d, 0, &cfg).unwrap();
            let back = dn + predict(&state.filter, &x);
            assert!((back - spec.get(1, n, 0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_frames_without_context() {
        let spec = white(600, 1, 1);
        let cfg = WpeConfig::default();
        let err = wpe_iterate(&spec, 0, 0, &[10], &cfg);
        assert!(matches!(err, Err(Error::NoWpeContext { frame: 10, .. })));
    }

    #[test]
    fn shared_frequency_is_solved_once() {
        let spec = white(500, 2, 5);
        let cfg = WpeConfig {
            order_l: 2,
            ..WpeConfig::default()
        };
        let bins = BinSet {
            bins: vec![
                SelectedBin { frame: 300, bin: 0, score: 2.0, band: Band::Mid },
                SelectedBin { frame: 450, bin: 0, score: 1.0, band: Band::Mid },
                SelectedBin { frame: 10, bin: 0, score: 0.5, band: Band::Mid },
            ],
        };
        let out = dereverberate_bins(&spec, &bins, &cfg).unwrap();
        assert_eq!(out.solves, 1);
        assert_eq!(out.bins.len(), 3);
        assert!(!out.bins[0].fallback && !out.bins[1].fallback);
        assert!(out.bins[2].fallback);
        assert_eq!(out.bins[2].d, spec.snapshot(10, 0));
        assert!(dereverberate_bins(&spec, &BinSet::default(), &cfg).unwrap().bins.is_empty());
    }

    #[test]
    fn cost_floor_variant_runs() {
        let spec = white(500, 2, 8);
        let cfg = WpeConfig {
            order_l: 2,
            max_iters: 2,
            variance_update: VarianceUpdate::CostFloor,
            ..WpeConfig::default()
        };
        let frames: Vec<usize> = (cfg.first_frame()..500).collect();
        let (_, state) = wpe_iterate(&spec, 0, 0, &frames, &cfg).unwrap();
        assert_eq!(state.cost_trace.len(), 2);
        let j = state.cost_trace[0].after;
        assert!(state.variances.iter().all(|&v| v >= j));
    }
}
