//! Simulates a talker in a free field and estimates its direction.
//!
//! cargo run --release --example anechoic_estimate -- 36

use onset_doa::geometry::ArrayGeometry;
use onset_doa::pipeline::{estimate, PipelineConfig};
use onset_doa::room::{simulate_capture, RoomSpec, SourcePlacement};
use onset_doa::speech::{synth_utterance, SpeechParams};

fn main() -> onset_doa::Result<()> {
    let angle: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(36.0);
    let geometry = ArrayGeometry::uniform([3.5, 2.2, 1.5], [1.0, 0.0, 0.0], 4, 0.035, 344.0)?;
    let room = RoomSpec::anechoic([7.0, 5.0, 3.0], 16000.0)?;
    let place = SourcePlacement::at_angle(&geometry, angle, 2.0)?;
    let dry = synth_utterance(&SpeechParams::default(), 1);
    let x = simulate_capture(&dry, &room, &geometry, &place)?;

    let cfg = PipelineConfig::new(geometry);
    let report = estimate(&x, &cfg)?;
    println!("true {angle:.1} deg, estimated {:.1} deg", report.theta);
    println!(
        "{} onset bins ({} middle band, {} high band), fused TDOA {:.2} us",
        report.num_selected,
        report.num_mid,
        report.num_high,
        report.tau_m.unwrap_or(0.0) * 1e6
    );
    for t in &report.timings {
        println!("  {:<9} {:.3} s", t.stage.to_string(), t.seconds);
    }
    Ok(())
}
