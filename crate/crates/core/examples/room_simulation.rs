//! Generates image-method impulse responses, checks the reverberation time
//! with a Schroeder decay fit and writes a four-channel capture.
//!
//! cargo run --release --example room_simulation -- out.wav

use onset_doa::eval::write_wav;
use onset_doa::geometry::ArrayGeometry;
use onset_doa::room::{array_rirs, apply_rirs, measure_t60, RoomSpec, SourcePlacement};
use onset_doa::speech::{synth_utterance, SpeechParams};

fn main() -> onset_doa::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "room_capture.wav".into());
    let geometry = ArrayGeometry::uniform([3.5, 2.2, 1.5], [1.0, 0.0, 0.0], 4, 0.035, 344.0)?;
    let place = SourcePlacement::at_angle(&geometry, -36.0, 2.0)?;

    for t60 in [0.2, 0.4, 0.7, 1.0] {
        let room = RoomSpec::with_t60([7.0, 5.0, 3.0], t60, 16000.0)?;
        let rirs = array_rirs(&room, &geometry, place.position)?;
        let measured = measure_t60(&rirs[0], 16000.0).unwrap_or(f64::NAN);
        let peak = (0..rirs[0].len())
            .max_by(|&a, &b| rirs[0][a].abs().total_cmp(&rirs[0][b].abs()))
            .unwrap_or(0);
        println!(
            "T60 {t60:.1} s: beta {:.3}, {} taps, direct peak at {peak}, measured T60 {measured:.3} s",
            room.reflection_coeffs[0],
            rirs[0].len()
        );
    }

    let room = RoomSpec::with_t60([7.0, 5.0, 3.0], 0.4, 16000.0)?;
    let rirs = array_rirs(&room, &geometry, place.position)?;
    let x = apply_rirs(&synth_utterance(&SpeechParams::default(), 3), &rirs)?;
    let peak = x.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let x: Vec<Vec<f64>> = x.iter().map(|c| c.iter().map(|v| 0.9 * v / peak).collect()).collect();
    write_wav(out.as_ref(), &x, 16000)?;
    println!("wrote {out}");
    Ok(())
}
