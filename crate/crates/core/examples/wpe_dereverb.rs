//! Runs bin-selective WPE on a reverberant capture and compares the energy
//! of the late tail before and after dereverberation, using the reverberant
//! and direct-plus-early captures of the same utterance.
//!
//! cargo run --release --example wpe_dereverb

use onset_doa::geometry::ArrayGeometry;
use onset_doa::onset::{Band, BinSet, SelectedBin};
use onset_doa::room::{apply_rirs, array_rirs, RoomSpec, SourcePlacement};
use onset_doa::speech::{synth_utterance, SpeechParams};
use onset_doa::stft::{stft, StftConfig};
use onset_doa::wpe::{dereverberate_bins, WpeConfig};

fn main() -> onset_doa::Result<()> {
    let geometry = ArrayGeometry::uniform([3.5, 2.2, 1.5], [1.0, 0.0, 0.0], 4, 0.035, 344.0)?;
    let room = RoomSpec::with_t60([7.0, 5.0, 3.0], 1.0, 16000.0)?;
    let place = SourcePlacement::at_angle(&geometry, 20.0, 2.0)?;
    let rirs = array_rirs(&room, &geometry, place.position)?;
    // Reference: the first 32 ms of each response.
    let early: Vec<Vec<f64>> = rirs
        .iter()
        .map(|h| h.iter().enumerate().map(|(n, v)| if n < 93 + 512 { *v } else { 0.0 }).collect())
        .collect();
    let dry = synth_utterance(&SpeechParams::default(), 4);
    let x = apply_rirs(&dry, &rirs)?;
    let r = apply_rirs(&dry, &early)?;

    let cfg = StftConfig::default();
    let sx = stft(&x, &cfg)?;
    let sr = stft(&r, &cfg)?;
    let bins: Vec<usize> = (32..158).step_by(9).collect();
    let set = BinSet {
        bins: bins
            .iter()
            .map(|&bin| SelectedBin { frame: 0, bin, score: 0.0, band: Band::Mid })
            .collect(),
    };
    let out = dereverberate_bins(&sx, &set, &WpeConfig::default())?;

    println!(" bin    Hz   error x (dB)   error d (dB)   iterations");
    for &k in &bins {
        let st = &out.states[&(k, 0)];
        let (mut ex, mut ed, mut er) = (0.0, 0.0, 0.0);
        for n in st.first_frame..sx.num_frames() {
            let want = sr.get(0, n, k);
            ex += (sx.get(0, n, k) - want).norm_sqr();
            ed += (st.desired[n] - want).norm_sqr();
            er += want.norm_sqr();
        }
        println!(
            "{k:4} {:5.0} {:14.2} {:14.2}   {}",
            sx.bin_freq(k),
            10.0 * (ex / er).log10(),
            10.0 * (ed / er).log10(),
            st.cost_trace.len()
        );
    }
    Ok(())
}
