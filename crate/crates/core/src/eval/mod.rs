//! Batch evaluation: simulated or recorded trials, metrics and reports.

pub mod audio;
pub mod metrics;
pub mod recipe;
pub mod report;
pub mod suite;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::Result;
pub use audio::{load_audio, write_wav};
pub use metrics::{ConditionMetrics, MetricsTable, TrialRecord};
pub use recipe::Recipe;
pub use report::{emit_report, parse_csv, write_report, ReportFormat};
pub use suite::{render_trial, run_suite, SuiteOutcome, TrialSource, TrialSpec};

/// Renders every simulated capture of a recipe into `out` as
/// `<trial id>.wav`, plus `manifest.csv` with the ground truth. Returns the
/// written WAV paths.
pub fn simulate_to_dir(recipe: &Recipe, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let cfg = recipe.pipeline()?;
    let rate = cfg.stft.sample_rate.round() as u32;
    let mut seen = BTreeSet::new();
    let trials: Vec<TrialSpec> = recipe
        .trials()?
        .into_iter()
        .filter(|t| matches!(t.source, TrialSource::Simulated(_)) && seen.insert(t.id.clone()))
        .collect();
    let paths = trials
        .par_iter()
        .map(|t| {
            let x = render_trial(t)?;
            let path = out.join(format!("{}.wav", t.id));
            write_wav(&path, &x, rate)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(out.join("manifest.csv"))?;
    w.write_record(["file", "condition", "target_deg", "interferer_deg", "sir_db"])?;
    for (t, p) in trials.iter().zip(&paths) {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let (ia, sir) = t
            .interference
            .as_ref()
            .map(|i| (i.angle.to_string(), i.sir_db.to_string()))
            .unwrap_or_default();
        w.write_record([name, t.condition.clone(), t.target_angle.to_string(), ia, sir])?;
    }
    w.flush()?;
    Ok(paths)
}
