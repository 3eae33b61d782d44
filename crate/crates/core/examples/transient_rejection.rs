//! A click from another direction precedes the talker. Transient detection
//! masks it; without the mask the click's onset can win the bin selection.
//!
//! cargo run --release --example transient_rejection

use onset_doa::eval::{run_suite, Recipe};

fn main() -> onset_doa::Result<()> {
    let recipe = Recipe::parse(
        r#"
        seed = 11
        estimators = ["proposed"]

        [[conditions]]
        name = "on"
        t60 = 0.4
        angles = [-40.0, 0.0, 30.0]
        click = { angle = 75.0, time = 0.1, amplitude = 1.0 }

        [[conditions]]
        name = "off"
        t60 = 0.4
        angles = [-40.0, 0.0, 30.0]
        click = { angle = 75.0, time = 0.1, amplitude = 1.0 }
        transient_elimination = false
        "#,
    )
    .map_err(|e| onset_doa::Error::Config(e.to_string()))?;
    let cfg = recipe.pipeline()?;
    let outcome = run_suite(&recipe.trials()?, &cfg, 0)?;
    let hop = cfg.stft.frameshift as f64 / cfg.stft.sample_rate;

    println!("click at 0.100 s from 75 deg");
    println!("truth  with mask  without  transient frames");
    for a in [-40, 0, 30] {
        let on = &outcome.reports[&(format!("on_{a}_u0"), onset_doa::pipeline::Method::Proposed)];
        let off = &outcome.reports[&(format!("off_{a}_u0"), onset_doa::pipeline::Method::Proposed)];
        let at: Vec<String> = on.transients.iter().map(|&n| format!("{:.3} s", n as f64 * hop)).collect();
        println!("{a:5}  {:9.1}  {:7.1}  {}", on.theta, off.theta, at.join(", "));
    }
    Ok(())
}
