//! End-to-end estimator: STFT, onset bin selection with transient
//! rejection, bin-selective WPE, middle-band TDOA vote and weighted
//! high-band refinement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::doa::{
    self, BinEstimate, RefineConfig, SteeringGrid, TdoaNeighborhoodConfig, TdoaVote,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::ArrayGeometry;
use crate::onset::{self, Band, BinSet, OnsetConfig, SelectedBin};
use crate::stft::{self, MultichannelSpectrogram, StftConfig};
use crate::wpe::{self, DesiredBin, WpeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub onset: OnsetConfig,
    #[serde(default)]
    pub wpe: WpeConfig,
    #[serde(default)]
    pub neighborhood: TdoaNeighborhoodConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default = "default_grid")]
    pub grid_deg: f64,
    #[serde(default = "default_true")]
    pub high_band_wpe: bool,
    /// Band of the SRP-PHAT baseline, Hz; defaults to
    /// `[band_mid.lo, spatial Nyquist]`.
    #[serde(default)]
    pub baseline_band: Option<[f64; 2]>,
}

fn default_grid() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl PipelineConfig {
    pub fn new(geometry: ArrayGeometry) -> Self {
        PipelineConfig {
            geometry,
            stft: StftConfig::default(),
            onset: OnsetConfig::default(),
            wpe: WpeConfig::default(),
            neighborhood: TdoaNeighborhoodConfig::default(),
            refine: RefineConfig::default(),
            grid_deg: 1.0,
            high_band_wpe: true,
            baseline_band: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.onset.validate(self.geometry.spatial_nyquist())?;
        self.wpe.validate()?;
        self.neighborhood.validate()?;
        self.refine.validate()?;
        if self.onset.band_high.lo >= self.onset.high_max(self.geometry.spatial_nyquist()) {
            return Err(Error::Config("high band is empty".into()));
        }
        if let Some([lo, hi]) = self.baseline_band {
            if !(lo < hi) {
                return Err(Error::Config(format!("empty baseline band [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn baseline_band(&self) -> (f64, f64) {
        match self.baseline_band {
            Some([lo, hi]) => (lo, hi),
            None => (self.onset.band_mid[0], self.geometry.spatial_nyquist()),
        }
    }

    /// Samples needed for at least one ΔP frame.
    pub fn min_samples(&self) -> usize {
        self.stft.window_len + self.onset.n_t * self.stft.frameshift
    }

    pub fn grid(&self) -> Result<SteeringGrid> {
        SteeringGrid::new(
            &self.geometry,
            self.stft.sample_rate,
            self.stft.window_len,
            self.grid_deg,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    /// Final direction, degrees.
    pub theta: f64,
    /// Fused middle-band TDOA, seconds.
    pub tau_m: Option<f64>,
    pub num_selected: usize,
    pub num_mid: usize,
    pub num_high: usize,
    pub transients: Vec<usize>,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub selected: Vec<SelectedBin>,
    #[serde(skip)]
    pub bin_estimates: Vec<BinEstimate>,
    /// Candidate TDOAs and their vote counts.
    #[serde(skip)]
    pub histogram: Vec<(f64, u32)>,
    #[serde(skip)]
    pub objective: Vec<f64>,
}

impl EstimateReport {
    fn empty(method: Method) -> Self {
        EstimateReport {
            method,
            theta: 0.0,
            tau_m: None,
            num_selected: 0,
            num_mid: 0,
            num_high: 0,
            transients: Vec::new(),
            timings: Vec::new(),
            warnings: Vec::new(),
            selected: Vec::new(),
            bin_estimates: Vec::new(),
            histogram: Vec::new(),
            objective: Vec::new(),
        }
    }

    /// Same estimate, ignoring wall-clock timings.
    pub fn same_result(&self, other: &EstimateReport) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.timings.clear();
        b.timings.clear();
        a == b
    }
}

fn timed<T>(report: &mut EstimateReport, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    report.timings.push(StageTiming {
        stage,
        seconds: start.elapsed().as_secs_f64(),
    });
    out
}

fn check_input(audio: &[Vec<f64>], cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    if audio.len() != cfg.geometry.num_mics() {
        return Err(Error::ChannelMismatch {
            expected: cfg.geometry.num_mics(),
            got: audio.len(),
        });
    }
    let len = audio[0].len();
    if audio.iter().any(|ch| ch.len() != len) {
        return Err(Error::Config("channels differ in length".into()));
    }
    if len < cfg.min_samples() {
        return Err(Error::TooShort(format!(
            "{len} samples; need at least {}",
            cfg.min_samples()
        )));
    }
    Ok(())
}

fn subset(bins: &BinSet, keep: impl Fn(&SelectedBin) -> bool) -> BinSet {
    BinSet {
        bins: bins.bins.iter().filter(|b| keep(b)).copied().collect(),
    }
}

/// Estimates the direction of the dominant source in `audio` (one vector
/// per microphone, in geometry order).
pub fn estimate(audio: &[Vec<f64>], cfg: &PipelineConfig) -> Result<EstimateReport> {
    check_input(audio, cfg).map_err(|e| e.in_stage(Stage::Input))?;
    let mut report = EstimateReport::empty(Method::Proposed);
    let grid = cfg.grid().map_err(|e| e.in_stage(Stage::Input))?;
    let spec = timed(&mut report, Stage::Stft, || stft::stft(audio, &cfg.stft))?;

    let (bins, transients) = timed(&mut report, Stage::Onset, || select(&spec, cfg))?;
    report.transients = transients;
    report.selected = bins.bins.clone();
    report.num_selected = bins.len();
    report.num_mid = bins.mid().count();
    report.num_high = bins.high().count();

    let (mid, high, warnings) = timed(&mut report, Stage::Dereverb, || dereverb(&spec, &bins, cfg))?;
    report.warnings.extend(warnings);

    let fusion = timed(&mut report, Stage::MidBand, || {
        let (est, silent) = doa::estimate_bins(&mid, Band::Mid, &grid);
        let votes: Vec<TdoaVote> = est.iter().map(|e| TdoaVote { tau: e.tau, k: e.bin }).collect();
        let fusion = doa::fuse_mid_band(
            &votes,
            grid.taus(),
            spec.bin_hz(),
            &cfg.neighborhood,
            &cfg.geometry,
        )?;
        Ok((fusion, est, silent))
    })?;
    let (fusion, mid_est, silent) = fusion;
    if silent > 0 {
        report.warnings.push(format!("{silent} silent middle-band bins skipped"));
    }
    report.tau_m = Some(fusion.tau);
    report.histogram = grid.taus().iter().copied().zip(fusion.counts.iter().copied()).collect();

    let refined = timed(&mut report, Stage::HighBand, || {
        doa::refine_high_band(&high, fusion.tau, &grid, &cfg.refine, &cfg.geometry)
    })?;
    if refined.fallback {
        report
            .warnings
            .push("no weighted high-band bins; using the middle-band direction".into());
    }
    let (high_est, _) = doa::estimate_bins(&high, Band::High, &grid);
    report.bin_estimates = mid_est;
    report.bin_estimates.extend(high_est);
    report.theta = refined.theta;
    report.objective = refined.objective;
    Ok(report)
}

fn select(spec: &MultichannelSpectrogram, cfg: &PipelineConfig) -> Result<(BinSet, Vec<usize>)> {
    let c = stft::cross_power_envelope(spec);
    let p = stft::log_compress(&c, cfg.stft.xi);
    let rate = onset::power_rate(&p, cfg.onset.n_t)?;
    let transients = if cfg.onset.transient_elimination {
        onset::detect_transients(&onset::total_power(&p), &cfg.onset)
    } else {
        Vec::new()
    };
    let bins = onset::select_bins(
        &rate,
        &transients,
        &cfg.onset,
        spec.bin_hz(),
        cfg.geometry.spatial_nyquist(),
    )?;
    Ok((bins, transients))
}

type Dereverbed = (Vec<DesiredBin>, Vec<DesiredBin>, Vec<String>);

fn dereverb(spec: &MultichannelSpectrogram, bins: &BinSet, cfg: &PipelineConfig) -> Result<Dereverbed> {
    let mid = subset(bins, |b| b.band == Band::Mid);
    let high = subset(bins, |b| b.band == Band::High);
    if spec.num_frames() <= cfg.wpe.first_frame() {
        return Ok((
            wpe::passthrough_bins(spec, &mid),
            wpe::passthrough_bins(spec, &high),
            vec!["signal too short for WPE history; using raw bins".into()],
        ));
    }
    let mid = wpe::dereverberate_bins(spec, &mid, &cfg.wpe)?.bins;
    let high = if cfg.high_band_wpe {
        wpe::dereverberate_bins(spec, &high, &cfg.wpe)?.bins
    } else {
        wpe::passthrough_bins(spec, &high)
    };
    Ok((mid, high, Vec::new()))
}

/// Full-band SRP-PHAT over every frame, for comparison.
pub fn estimate_baseline(audio: &[Vec<f64>], cfg: &PipelineConfig) -> Result<EstimateReport> {
    check_input(audio, cfg).map_err(|e| e.in_stage(Stage::Input))?;
    let mut report = EstimateReport::empty(Method::Baseline);
    let grid = cfg.grid().map_err(|e| e.in_stage(Stage::Input))?;
    let spec = timed(&mut report, Stage::Stft, || stft::stft(audio, &cfg.stft))?;
    let (theta, objective) = timed(&mut report, Stage::Baseline, || {
        doa::srp_phat_baseline(&spec, &grid, cfg.baseline_band())
    })?;
    report.theta = theta;
    report.objective = objective;
    Ok(report)
}
