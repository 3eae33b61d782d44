//! Runs a recipe file and prints the text, CSV and JSON reports.
//!
//! cargo run --release --example suite_report -- configs/demo_recipe.toml

use std::path::PathBuf;

use onset_doa::eval::{emit_report, run_suite, Recipe, ReportFormat};

fn main() -> onset_doa::Result<()> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/demo_recipe.toml"));
    let recipe = Recipe::load(&path)?;
    let outcome = run_suite(&recipe.trials()?, &recipe.pipeline()?, recipe.workers)?;
    print!("{}", emit_report(&outcome.table, ReportFormat::Text)?);
    println!();
    print!("{}", emit_report(&outcome.table, ReportFormat::Csv)?);
    let json = emit_report(&outcome.table, ReportFormat::Json)?;
    println!("\n{} bytes of JSON", json.len());
    Ok(())
}
