//! Trial descriptions, scene rendering and the suite runner.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::audio::load_audio;
use crate::eval::metrics::{MetricsTable, TrialRecord};
use crate::geometry::{ArrayGeometry, Vec3};
use crate::pipeline::{estimate, estimate_baseline, EstimateReport, Method, PipelineConfig};
use crate::room::{apply_rirs, array_rirs, mix_at_sir, RoomSpec, SourcePlacement};
use crate::speech::{click, synth_utterance, SpeechParams};

/// Minimum angular separation between target and interferer.
pub const MIN_INTERFERER_SEPARATION: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceKind {
    /// Pink-tilted Gaussian noise for the whole capture.
    #[default]
    Noise,
    /// A second, continuous talker.
    Speech,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub angle: f64,
    pub sir_db: f64,
    pub kind: InterferenceKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickSpec {
    pub angle: f64,
    /// Onset time, seconds from the start of the capture.
    pub time: f64,
    pub amplitude: f64,
    pub duration: f64,
    pub seed: u64,
}

/// A simulated capture: one talker, optionally an interferer and a click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: RoomSpec,
    pub geometry: ArrayGeometry,
    pub distance: f64,
    pub speech: SpeechParams,
    pub utterance_seed: u64,
    pub click: Option<ClickSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialSource {
    Simulated(Scene),
    Wav(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub id: String,
    pub condition: String,
    pub target_angle: f64,
    pub interference: Option<InterferenceSpec>,
    pub source: TrialSource,
    pub method: Method,
    /// Overrides the pipeline's transient elimination switch.
    pub transient_elimination: Option<bool>,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        let in_range = |a: f64| (-90.0..=90.0).contains(&a);
        if !in_range(self.target_angle) {
            return Err(Error::Config(format!(
                "{}: target angle {} outside [-90, 90]",
                self.id, self.target_angle
            )));
        }
        if let Some(i) = &self.interference {
            if !in_range(i.angle) {
                return Err(Error::Config(format!(
                    "{}: interferer angle {} outside [-90, 90]",
                    self.id, i.angle
                )));
            }
            if (i.angle - self.target_angle).abs() <= MIN_INTERFERER_SEPARATION {
                return Err(Error::Config(format!(
                    "{}: interferer must be more than {MIN_INTERFERER_SEPARATION} degrees from the target",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Key shared by trials that hear the same audio.
    fn audio_key(&self) -> String {
        format!("{:?}|{}|{:?}", self.source, self.target_angle, self.interference)
    }
}

fn position_key(room: &RoomSpec, geometry: &ArrayGeometry, pos: Vec3) -> String {
    format!("{room:?}|{geometry:?}|{pos:?}")
}

/// Noise with a gentle high-frequency roll-off.
fn interference_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    let mut state = 0.0;
    (0..len)
        .map(|_| {
            let w: f64 = g.sample(&mut rng);
            state = 0.6 * state + w;
            state
        })
        .collect()
}

fn interference_dry(kind: InterferenceKind, len: usize, fs: f64, seed: u64) -> Vec<f64> {
    match kind {
        InterferenceKind::Noise => interference_noise(len, seed),
        InterferenceKind::Speech => {
            let params = SpeechParams {
                sample_rate: fs,
                active_seconds: len as f64 / fs,
                blank_range: [0.0, 0.0],
                f0_range: [90.0, 260.0],
                fricatives: true,
                peak: 0.5,
            };
            let mut s = synth_utterance(&params, seed);
            s.resize(len, 0.0);
            s
        }
    }
}

type RirSet = Arc<Vec<Vec<f64>>>;

struct Renderer {
    rirs: HashMap<String, RirSet>,
}

impl Renderer {
    /// Every source position a set of trials needs, with its room.
    fn positions(specs: &[TrialSpec]) -> Result<Vec<(String, RoomSpec, ArrayGeometry, Vec3)>> {
        let mut out = BTreeMap::new();
        for t in specs {
            let TrialSource::Simulated(scene) = &t.source else {
                continue;
            };
            let mut angles = vec![t.target_angle];
            if let Some(i) = &t.interference {
                angles.push(i.angle);
            }
            if let Some(c) = &scene.click {
                angles.push(c.angle);
            }
            for a in angles {
                let pos = SourcePlacement::at_angle(&scene.geometry, a, scene.distance)?.position;
                let key = position_key(&scene.room, &scene.geometry, pos);
                out.entry(key)
                    .or_insert((scene.room.clone(), scene.geometry.clone(), pos));
            }
        }
        Ok(out.into_iter().map(|(k, (r, g, p))| (k, r, g, p)).collect())
    }

    fn new(specs: &[TrialSpec]) -> Result<Self> {
        let rirs = Self::positions(specs)?
            .into_par_iter()
            .map(|(key, room, geometry, pos)| {
                Ok((key, Arc::new(array_rirs(&room, &geometry, pos)?)))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Renderer { rirs })
    }

    fn capture(&self, scene: &Scene, angle: f64, dry: &[f64]) -> Result<Vec<Vec<f64>>> {
        let pos = SourcePlacement::at_angle(&scene.geometry, angle, scene.distance)?.position;
        let rirs = &self.rirs[&position_key(&scene.room, &scene.geometry, pos)];
        apply_rirs(dry, rirs)
    }

    fn render(&self, trial: &TrialSpec, scene: &Scene) -> Result<Vec<Vec<f64>>> {
        let fs = scene.room.sample_rate;
        let dry = synth_utterance(&scene.speech, scene.utterance_seed);
        let mut x = self.capture(scene, trial.target_angle, &dry)?;
        let len = x[0].len();
        if let Some(i) = &trial.interference {
            let idry = interference_dry(i.kind, dry.len(), fs, i.seed);
            let ix = self.capture(scene, i.angle, &idry)?;
            x = mix_at_sir(&x, &ix, i.sir_db)?;
        }
        if let Some(c) = &scene.click {
            let at = (c.time * fs).round() as usize;
            let cdry = click(dry.len(), at, fs, c.duration, c.amplitude, c.seed);
            let cx = self.capture(scene, c.angle, &cdry)?;
            for (ch, add) in x.iter_mut().zip(&cx) {
                for (v, a) in ch.iter_mut().zip(add.iter().take(len)) {
                    *v += a;
                }
            }
        }
        Ok(x)
    }
}

/// Renders the microphone signals of one simulated trial.
pub fn render_trial(trial: &TrialSpec) -> Result<Vec<Vec<f64>>> {
    let TrialSource::Simulated(scene) = &trial.source else {
        return Err(Error::Config(format!("{} is not a simulated trial", trial.id)));
    };
    trial.validate()?;
    Renderer::new(std::slice::from_ref(trial))?.render(trial, scene)
}

fn run_one(
    trial: &TrialSpec,
    audio: &Result<Arc<Vec<Vec<f64>>>, String>,
    cfg: &PipelineConfig,
) -> (TrialRecord, Option<EstimateReport>) {
    let mut cfg = cfg.clone();
    if let Some(t) = trial.transient_elimination {
        cfg.onset.transient_elimination = t;
    }
    let result = audio.clone().and_then(|x| {
        match trial.method {
            Method::Proposed => estimate(&x, &cfg),
            Method::Baseline => estimate_baseline(&x, &cfg),
        }
        .map_err(|e| e.to_string())
    });
    let interferer = trial.interference.as_ref().map(|i| i.angle);
    match result {
        Ok(report) => (
            TrialRecord::new(trial, interferer, Some(report.theta), None),
            Some(report),
        ),
        Err(e) => (TrialRecord::new(trial, interferer, None, Some(e)), None),
    }
}

/// Outcome of a suite: the metrics and, per trial id and method, the full
/// estimator report.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub table: MetricsTable,
    pub reports: BTreeMap<(String, Method), EstimateReport>,
}

/// Runs every trial, `workers` at a time (0 uses all cores). Per-trial
/// failures are recorded in the table rather than aborting the suite.
pub fn run_suite(specs: &[TrialSpec], cfg: &PipelineConfig, workers: usize) -> Result<SuiteOutcome> {
    if specs.is_empty() {
        return Err(Error::Config("suite has no trials".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(specs, cfg))
}

fn run_inner(specs: &[TrialSpec], cfg: &PipelineConfig) -> Result<SuiteOutcome> {
    let valid: Vec<&TrialSpec> = specs.iter().filter(|t| t.validate().is_ok()).collect();
    let owned: Vec<TrialSpec> = valid.iter().map(|t| (*t).clone()).collect();
    let renderer = Renderer::new(&owned)?;

    let mut unique: BTreeMap<String, &TrialSpec> = BTreeMap::new();
    for t in &valid {
        unique.entry(t.audio_key()).or_insert(t);
    }
    let channels = cfg.geometry.num_mics();
    let rate = cfg.stft.sample_rate.round() as u32;
    let audio: HashMap<String, Result<Arc<Vec<Vec<f64>>>, String>> = unique
        .into_par_iter()
        .map(|(key, t)| {
            let x = match &t.source {
                TrialSource::Simulated(scene) => renderer.render(t, scene),
                TrialSource::Wav(path) => load_audio(path, channels, rate),
            };
            (key, x.map(Arc::new).map_err(|e| e.to_string()))
        })
        .collect();

    let results: Vec<(TrialRecord, Option<EstimateReport>)> = specs
        .par_iter()
        .map(|t| match t.validate() {
            Err(e) => (
                TrialRecord::new(t, t.interference.as_ref().map(|i| i.angle), None, Some(e.to_string())),
                None,
            ),
            Ok(()) => run_one(t, &audio[&t.audio_key()], cfg),
        })
        .collect();

    let mut reports = BTreeMap::new();
    let mut records = Vec::with_capacity(results.len());
    for (rec, rep) in results {
        if let Some(r) = rep {
            reports.insert((rec.id.clone(), rec.method), r);
        }
        records.push(rec);
    }
    Ok(SuiteOutcome {
        table: MetricsTable::from_records(records),
        reports,
    })
}
