//! Onset-selected estimator against full-band SRP-PHAT in a strongly
//! reverberant room.
//!
//! cargo run --release --example baseline_comparison

use onset_doa::eval::{run_suite, Recipe};
use onset_doa::pipeline::Method;

fn main() -> onset_doa::Result<()> {
    let recipe = Recipe::parse(
        r#"
        seed = 3
        [[conditions]]
        name = "t60-1.0"
        t60 = 1.0
        angles = [-60.0, -36.0, 0.0, 36.0, 60.0]
        "#,
    )
    .map_err(|e| onset_doa::Error::Config(e.to_string()))?;
    let outcome = run_suite(&recipe.trials()?, &recipe.pipeline()?, 0)?;
    println!("truth  proposed  baseline");
    for angle in [-60, -36, 0, 36, 60] {
        let id = format!("t60-1.0_{angle}_u0");
        let get = |m| outcome.reports[&(id.clone(), m)].theta;
        println!("{angle:5}  {:8.1}  {:8.1}", get(Method::Proposed), get(Method::Baseline));
    }
    for m in [Method::Proposed, Method::Baseline] {
        let c = outcome.table.get("t60-1.0", m).expect("condition present");
        println!("{m:?} RMSE {:.2} deg", c.rmse.unwrap_or(f64::NAN));
    }
    Ok(())
}
