//! TOML configuration files.
//!
//! Every key is optional and overrides the default of the corresponding
//! pipeline parameter:
//!
//! ```toml
//! [array]
//! num_mics = 4
//! spacing = 0.035
//! center = [3.5, 2.2, 1.5]
//! axis = [1.0, 0.0, 0.0]
//! sound_speed = 344.0
//!
//! [stft]
//! window_width = 512
//! frameshift = 8
//! xi = 1e-3
//!
//! [onset]
//! n_t = 40
//! v1 = 3.0
//! v2 = 2.0
//! delta_n = 72
//! band_mid = [1000.0, 2000.0]
//! band_high = [2000.0, 4914.0]
//!
//! [wpe]
//! p = 32
//! eps = 1e-4
//!
//! [doa]
//! alpha = 8.0
//! sigma = 0.0666667
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doa::NeighborhoodScale;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Vec3};
use crate::onset::BandHz;
use crate::pipeline::PipelineConfig;
use crate::stft::WindowKind;
use crate::wpe::VarianceUpdate;

/// Either explicit microphone positions or a uniform layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    #[serde(default)]
    pub mic_positions: Option<Vec<Vec3>>,
    #[serde(default = "default_mics")]
    pub num_mics: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_center")]
    pub center: Vec3,
    #[serde(default = "default_axis")]
    pub axis: Vec3,
    #[serde(default = "default_c")]
    pub sound_speed: f64,
}

fn default_mics() -> usize {
    4
}
fn default_spacing() -> f64 {
    0.035
}
fn default_center() -> Vec3 {
    [3.5, 2.2, 1.5]
}
fn default_axis() -> Vec3 {
    [1.0, 0.0, 0.0]
}
fn default_c() -> f64 {
    344.0
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            mic_positions: None,
            num_mics: default_mics(),
            spacing: default_spacing(),
            center: default_center(),
            axis: default_axis(),
            sound_speed: default_c(),
        }
    }
}

impl ArraySection {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.mic_positions {
            Some(p) => ArrayGeometry::new(p.clone(), self.sound_speed),
            None => ArrayGeometry::uniform(
                self.center,
                self.axis,
                self.num_mics,
                self.spacing,
                self.sound_speed,
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftSection {
    pub window_width: Option<usize>,
    pub frameshift: Option<usize>,
    pub sample_rate: Option<f64>,
    pub window: Option<WindowKind>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsetSection {
    pub n_t: Option<usize>,
    pub k_select: Option<usize>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub delta_n: Option<usize>,
    pub band_mid: Option<[f64; 2]>,
    /// `[lo]` or `[lo, hi]`; a missing upper edge means the spatial Nyquist
    /// frequency.
    pub band_high: Option<Vec<f64>>,
    pub transient_elimination: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WpeSection {
    pub p: Option<usize>,
    pub order_l: Option<usize>,
    pub delay_d: Option<usize>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub reg: Option<f64>,
    pub converge_tol: Option<f64>,
    pub variance_update: Option<VarianceUpdate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaSection {
    pub alpha: Option<f64>,
    pub k_units: Option<NeighborhoodScale>,
    pub sigma: Option<f64>,
    pub cutoff: Option<f64>,
    pub grid_deg: Option<f64>,
    pub high_band_wpe: Option<bool>,
    pub baseline_band: Option<[f64; 2]>,
}

/// On-disk form of [`PipelineConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub stft: StftSection,
    #[serde(default)]
    pub onset: OnsetSection,
    #[serde(default)]
    pub wpe: WpeSection,
    #[serde(default)]
    pub doa: DoaSection,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(self.array.geometry()?);
        let s = &self.stft;
        set!(cfg.stft.window_len, s.window_width);
        set!(cfg.stft.frameshift, s.frameshift);
        set!(cfg.stft.sample_rate, s.sample_rate);
        set!(cfg.stft.window_kind, s.window);
        set!(cfg.stft.xi, s.xi);

        let o = &self.onset;
        set!(cfg.onset.n_t, o.n_t);
        cfg.onset.k_select = o.k_select.or(cfg.onset.k_select);
        set!(cfg.onset.v1, o.v1);
        set!(cfg.onset.v2, o.v2);
        set!(cfg.onset.delta_n, o.delta_n);
        set!(cfg.onset.band_mid, o.band_mid);
        if let Some(b) = &o.band_high {
            cfg.onset.band_high = match b.as_slice() {
                [lo] => BandHz { lo: *lo, hi: None },
                [lo, hi] => BandHz {
                    lo: *lo,
                    hi: Some(*hi),
                },
                _ => return Err(Error::Config("band_high takes one or two values".into())),
            };
        }
        set!(cfg.onset.transient_elimination, o.transient_elimination);

        let w = &self.wpe;
        set!(cfg.wpe.p, w.p);
        set!(cfg.wpe.order_l, w.order_l);
        set!(cfg.wpe.delay_d, w.delay_d);
        set!(cfg.wpe.floor_eps, w.eps);
        set!(cfg.wpe.max_iters, w.max_iters);
        set!(cfg.wpe.reg, w.reg);
        set!(cfg.wpe.converge_tol, w.converge_tol);
        set!(cfg.wpe.variance_update, w.variance_update);

        let d = &self.doa;
        set!(cfg.neighborhood.alpha, d.alpha);
        set!(cfg.neighborhood.k_units, d.k_units);
        set!(cfg.refine.sigma, d.sigma);
        set!(cfg.refine.cutoff, d.cutoff);
        set!(cfg.grid_deg, d.grid_deg);
        set!(cfg.high_band_wpe, d.high_band_wpe);
        cfg.baseline_band = d.baseline_band.or(cfg.baseline_band);

        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a pipeline configuration from a TOML file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)?;
    let file = ConfigFile::parse(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.pipeline()
}
