//! Simulation recipes: a single TOML file describing rooms, directions,
//! utterances and disturbances.
//!
//! ```toml
//! seed = 1
//! estimators = ["proposed", "baseline"]
//!
//! [pipeline.array]
//! center = [3.5, 2.2, 1.5]
//!
//! [[conditions]]
//! name = "room1"
//! t60 = 0.4
//! angles = [-60.0, -36.0, 0.0, 36.0, 60.0]
//! utterances = 3
//!
//! [[conditions]]
//! name = "room2-interf"
//! t60 = 1.0
//! angles = [-60.0, 60.0]
//! interference = { angles = [70.0, -70.0], sir_db = 5.0 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::eval::suite::{
    ClickSpec, InterferenceKind, InterferenceSpec, Scene, TrialSource, TrialSpec,
};
use crate::geometry::Vec3;
use crate::pipeline::{Method, PipelineConfig};
use crate::room::{DecayModel, RoomSpec};
use crate::speech::SpeechParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceRecipe {
    /// One interferer direction per target angle.
    pub angles: Vec<f64>,
    #[serde(default = "default_sir")]
    pub sir_db: f64,
    #[serde(default)]
    pub kind: InterferenceKind,
}

fn default_sir() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickRecipe {
    pub angle: f64,
    /// Seconds from the start of the capture.
    pub time: f64,
    #[serde(default = "default_click_amp")]
    pub amplitude: f64,
    #[serde(default = "default_click_len")]
    pub duration: f64,
}

fn default_click_amp() -> f64 {
    1.0
}

fn default_click_len() -> f64 {
    0.002
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRecipe {
    pub name: String,
    #[serde(default)]
    pub t60: f64,
    pub angles: Vec<f64>,
    #[serde(default = "one")]
    pub utterances: usize,
    #[serde(default)]
    pub interference: Option<InterferenceRecipe>,
    #[serde(default)]
    pub click: Option<ClickRecipe>,
    #[serde(default)]
    pub transient_elimination: Option<bool>,
}

fn one() -> usize {
    1
}

/// A recorded capture with known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRecipe {
    pub path: PathBuf,
    pub condition: String,
    pub target: f64,
    #[serde(default)]
    pub interferer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechRecipe {
    #[serde(default = "default_active")]
    pub active_seconds: f64,
    #[serde(default = "default_blank")]
    pub blank_range: [f64; 2],
    #[serde(default = "default_f0")]
    pub f0_range: [f64; 2],
    #[serde(default = "yes")]
    pub fricatives: bool,
}

fn default_active() -> f64 {
    1.2
}
fn default_blank() -> [f64; 2] {
    [0.2, 0.5]
}
fn default_f0() -> [f64; 2] {
    [100.0, 220.0]
}
fn yes() -> bool {
    true
}

impl Default for SpeechRecipe {
    fn default() -> Self {
        SpeechRecipe {
            active_seconds: default_active(),
            blank_range: default_blank(),
            f0_range: default_f0(),
            fricatives: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default)]
    pub seed: u64,
    /// Concurrent trials; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "both")]
    pub estimators: Vec<Method>,
    #[serde(default = "default_distance")]
    pub source_distance: f64,
    #[serde(default = "default_dims")]
    pub room_dimensions: Vec3,
    #[serde(default)]
    pub decay_model: DecayModel,
    #[serde(default)]
    pub speech: SpeechRecipe,
    #[serde(default)]
    pub pipeline: ConfigFile,
    #[serde(default)]
    pub conditions: Vec<ConditionRecipe>,
    #[serde(default)]
    pub files: Vec<FileRecipe>,
}

fn both() -> Vec<Method> {
    vec![Method::Proposed, Method::Baseline]
}
fn default_distance() -> f64 {
    2.0
}
fn default_dims() -> Vec3 {
    [7.0, 5.0, 3.0]
}

impl Recipe {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut recipe = Self::parse(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // Relative WAV paths are relative to the recipe.
        if let Some(dir) = path.parent() {
            for f in &mut recipe.files {
                if f.path.is_relative() {
                    f.path = dir.join(&f.path);
                }
            }
        }
        Ok(recipe)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        self.pipeline.pipeline()
    }

    fn room(&self, t60: f64, cfg: &PipelineConfig) -> Result<RoomSpec> {
        let mut room = RoomSpec::with_t60_model(
            self.room_dimensions,
            t60,
            cfg.stft.sample_rate,
            self.decay_model,
        )?;
        room.sound_speed = cfg.geometry.sound_speed();
        Ok(room)
    }

    /// Expands conditions into trials: for each condition, angle and
    /// utterance, one trial per estimator. Utterance `u` uses the same dry
    /// signal in every direction and condition.
    pub fn trials(&self) -> Result<Vec<TrialSpec>> {
        let cfg = self.pipeline()?;
        if self.estimators.is_empty() {
            return Err(Error::Config("recipe lists no estimators".into()));
        }
        let speech = SpeechParams {
            sample_rate: cfg.stft.sample_rate,
            active_seconds: self.speech.active_seconds,
            blank_range: self.speech.blank_range,
            f0_range: self.speech.f0_range,
            fricatives: self.speech.fricatives,
            peak: 0.5,
        };
        let mut out = Vec::new();
        for (ci, cond) in self.conditions.iter().enumerate() {
            let room = self.room(cond.t60, &cfg)?;
            if let Some(i) = &cond.interference {
                if i.angles.len() != cond.angles.len() {
                    return Err(Error::Config(format!(
                        "{}: need one interferer angle per target angle",
                        cond.name
                    )));
                }
            }
            for (ai, &angle) in cond.angles.iter().enumerate() {
                for u in 0..cond.utterances {
                    let trial_seed = self
                        .seed
                        .wrapping_mul(1_000_003)
                        .wrapping_add((ci * 10_007 + ai * 101 + u) as u64);
                    let scene = Scene {
                        room: room.clone(),
                        geometry: cfg.geometry.clone(),
                        distance: self.source_distance,
                        speech: speech.clone(),
                        utterance_seed: self.seed.wrapping_add(u as u64),
                        click: cond.click.as_ref().map(|c| ClickSpec {
                            angle: c.angle,
                            time: c.time,
                            amplitude: c.amplitude,
                            duration: c.duration,
                            seed: trial_seed ^ 0x5eed,
                        }),
                    };
                    let interference = cond.interference.as_ref().map(|i| InterferenceSpec {
                        angle: i.angles[ai],
                        sir_db: i.sir_db,
                        kind: i.kind,
                        seed: trial_seed,
                    });
                    for &method in &self.estimators {
                        out.push(TrialSpec {
                            id: format!("{}_{}_u{}", cond.name, angle, u),
                            condition: cond.name.clone(),
                            target_angle: angle,
                            interference: interference.clone(),
                            source: TrialSource::Simulated(scene.clone()),
                            method,
                            transient_elimination: cond.transient_elimination,
                        });
                    }
                }
            }
        }
        for (fi, f) in self.files.iter().enumerate() {
            for &method in &self.estimators {
                out.push(TrialSpec {
                    id: format!("{}-file{fi}", f.condition),
                    condition: f.condition.clone(),
                    target_angle: f.target,
                    interference: f.interferer.map(|a| InterferenceSpec {
                        angle: a,
                        sir_db: f64::NAN,
                        kind: InterferenceKind::Noise,
                        seed: 0,
                    }),
                    source: TrialSource::Wav(f.path.clone()),
                    method,
                    transient_elimination: None,
                });
            }
        }
        if out.is_empty() {
            return Err(Error::Config("recipe defines no trials".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
        seed = 3
        [[conditions]]
        name = "a"
        t60 = 0.4
        angles = [-60.0, 60.0]
        utterances = 2
        interference = { angles = [70.0, -70.0] }

        [[conditions]]
        name = "b"
        angles = [0.0]
        click = { angle = -45.0, time = 0.1 }
    "#;

    #[test]
    fn expands_conditions() {
        let r = Recipe::parse(TEXT).unwrap();
        let t = r.trials().unwrap();
        assert_eq!(t.len(), 2 * 2 * 2 + 2);
        assert_eq!(t[0].id, "a_-60_u0");
        assert_eq!(t[0].method, Method::Proposed);
        assert_eq!(t[1].method, Method::Baseline);
        assert_eq!(t[0].interference.as_ref().unwrap().angle, 70.0);
        assert_eq!(t[0].interference.as_ref().unwrap().sir_db, 5.0);
        assert!(t.iter().all(|x| x.validate().is_ok()));
        let TrialSource::Simulated(s) = &t[8].source else { panic!() };
        assert_eq!(s.room.t60, 0.0);
        assert!(s.click.is_some());
    }

    #[test]
    fn same_utterance_across_directions() {
        let t = Recipe::parse(TEXT).unwrap().trials().unwrap();
        let seed = |i: usize| match &t[i].source {
            TrialSource::Simulated(s) => s.utterance_seed,
            _ => unreachable!(),
        };
        assert_eq!(seed(0), seed(4));
        assert_ne!(seed(0), seed(2));
    }

    #[test]
    fn interferer_count_must_match() {
        let text = r#"
            [[conditions]]
            name = "x"
            angles = [0.0, 10.0]
            interference = { angles = [95.0] }
        "#;
        assert!(Recipe::parse(text).unwrap().trials().is_err());
        assert!(Recipe::parse("bogus = 1").is_err());
        assert!(Recipe::parse("").unwrap().trials().is_err());
    }
}
