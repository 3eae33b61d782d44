//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use onset_doa::doa::{
    fuse_mid_band, gaussian_weight, steering_vector, tdoa_neighborhood, RefineConfig, TdoaVote,
};
use onset_doa::eval::{render_trial, run_suite, Recipe, SuiteOutcome, TrialSpec};
use onset_doa::geometry::{ArrayGeometry, Vec3};
use onset_doa::onset::{Band, BinSet, SelectedBin};
use onset_doa::pipeline::{estimate, EstimateReport, Method, PipelineConfig};
use onset_doa::room::{generate_rir, measure_t60, DelayInterp, RoomSpec};
use onset_doa::stft::{cross_power_envelope, stft, MultichannelSpectrogram};
use onset_doa::wpe::{dereverberate_bins, wpe_iterate, VarianceUpdate, WpeConfig, WpeState};

const ANGLES: &str = "[-60.0, -36.0, 0.0, 36.0, 60.0]";

struct Ledger {
    lines: Vec<(usize, bool, String)>,
}

impl Ledger {
    fn record(&mut self, n: usize, ok: bool, detail: String) {
        println!("criterion {n}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((n, ok, detail));
    }
}

fn paper_geometry() -> ArrayGeometry {
    ArrayGeometry::uniform([3.5, 2.2, 1.5], [1.0, 0.0, 0.0], 4, 0.035, 344.0).unwrap()
}

fn recipe(conditions: &str) -> Recipe {
    Recipe::parse(&format!("seed = 2024\nworkers = 0\n{conditions}")).unwrap()
}

fn run(recipe: &Recipe, keep: impl Fn(&TrialSpec) -> bool) -> (SuiteOutcome, PipelineConfig) {
    let cfg = recipe.pipeline().unwrap();
    let trials: Vec<TrialSpec> = recipe.trials().unwrap().into_iter().filter(keep).collect();
    (run_suite(&trials, &cfg, 0).unwrap(), cfg)
}

fn theta(out: &SuiteOutcome, id: &str, method: Method) -> f64 {
    out.reports[&(id.to_string(), method)].theta
}

fn anechoic(ledger: &mut Ledger, cfg: &PipelineConfig) -> Vec<EstimateReport> {
    let r = recipe(&format!(
        "estimators = [\"proposed\"]\n[[conditions]]\nname = \"free\"\nt60 = 0.0\nangles = {ANGLES}\n"
    ));
    let mut worst_err: f64 = 0.0;
    let mut worst_time: f64 = 0.0;
    let mut reports = Vec::new();
    for t in r.trials().unwrap() {
        let x = render_trial(&t).unwrap();
        let start = Instant::now();
        let rep = estimate(&x, cfg).unwrap();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        worst_err = worst_err.max((rep.theta - t.target_angle).abs());
        reports.push(rep);
    }
    ledger.record(
        1,
        worst_err <= 1.0 && worst_time < 10.0,
        format!("anechoic max error {worst_err:.2} deg (<= 1), slowest trial {worst_time:.2} s (< 10)"),
    );
    reports
}

fn reverberant(ledger: &mut Ledger) -> Vec<EstimateReport> {
    let r = recipe(&format!(
        r#"
        [[conditions]]
        name = "room1"
        t60 = 0.4
        angles = {ANGLES}
        utterances = 3

        [[conditions]]
        name = "room2"
        t60 = 1.0
        angles = {ANGLES}
        utterances = 3

        [[conditions]]
        name = "room2-interf"
        t60 = 1.0
        angles = [-60.0, -36.0, 36.0, 60.0]
        interference = {{ angles = [70.0, 88.0, -88.0, -70.0], sir_db = 5.0 }}

        [[conditions]]
        name = "click"
        t60 = 0.4
        angles = {ANGLES}
        click = {{ angle = 75.0, time = 0.1, amplitude = 1.0 }}

        [[conditions]]
        name = "click-off"
        t60 = 0.4
        angles = {ANGLES}
        click = {{ angle = 75.0, time = 0.1, amplitude = 1.0 }}
        transient_elimination = false
        "#
    ));
    let (out, _) = run(&r, |t| t.method == Method::Proposed || t.condition.starts_with("room2"));
    let m = |c: &str, method| out.table.get(c, method).unwrap().clone();

    let room1 = m("room1", Method::Proposed);
    let r1 = room1.rmse.unwrap_or(f64::INFINITY);
    ledger.record(
        2,
        room1.failures == 0 && r1 <= 5.0,
        format!("T60 0.4 s, {} trials: RMSE {r1:.2} deg (<= 5)", room1.trials),
    );

    let (p, b) = (m("room2", Method::Proposed), m("room2", Method::Baseline));
    let (pr, br) = (p.rmse.unwrap_or(f64::INFINITY), b.rmse.unwrap_or(0.0));
    let (pi, bi) = (m("room2-interf", Method::Proposed), m("room2-interf", Method::Baseline));
    ledger.record(
        3,
        p.failures + b.failures + pi.failures + bi.failures == 0 && pr < br && pi.p_s <= bi.p_s,
        format!(
            "T60 1.0 s RMSE proposed {pr:.2} < baseline {br:.2}; 5 dB SIR P_s proposed {:.1}% <= baseline {:.1}%",
            pi.p_s, bi.p_s
        ),
    );

    let mut shift: f64 = 0.0;
    let mut degrade: f64 = 0.0;
    let mut detected = true;
    for a in ["-60", "-36", "0", "36", "60"] {
        let clean = theta(&out, &format!("room1_{a}_u0"), Method::Proposed);
        let on = &out.reports[&(format!("click_{a}_u0"), Method::Proposed)];
        let off = theta(&out, &format!("click-off_{a}_u0"), Method::Proposed);
        detected &= !on.transients.is_empty();
        shift = shift.max((on.theta - clean).abs());
        degrade = degrade.max((off - clean).abs());
    }
    ledger.record(
        4,
        detected && shift <= 1.0 && degrade > 2.0,
        format!(
            "click detected in every trial: {detected}; max shift with elimination {shift:.1} deg (<= 1), \
             without {degrade:.1} deg (> 2)"
        ),
    );
    out.reports.into_values().collect()
}

fn monotone(state: &WpeState) -> bool {
    state
        .cost_trace
        .iter()
        .all(|s| s.after <= s.before + 1e-9 * s.before.abs())
}

fn white(rng: &mut ChaCha8Rng, channels: usize, frames: usize) -> Vec<Vec<Complex64>> {
    let g = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    (0..channels)
        .map(|_| {
            (0..frames)
                .map(|_| Complex64::new(g.sample(rng), g.sample(rng)))
                .collect()
        })
        .collect()
}

fn wpe_oracle(ledger: &mut Ledger) {
    // Autoregressive echo x(n) = s(n) + 0.8 x(n - D): a single delayed tap of
    // 0.8 is the exact inverse, so WPE run to convergence must find it.
    let cfg = WpeConfig {
        order_l: 1,
        max_iters: 200,
        converge_tol: 1e-12,
        ..WpeConfig::default()
    };
    let frames = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = white(&mut rng, 1, frames).remove(0);
    let mut x = s.clone();
    for n in cfg.delay_d..frames {
        x[n] = s[n] + 0.8 * x[n - cfg.delay_d];
    }
    let spec = MultichannelSpectrogram::from_fn(1, frames, 1, 1.0, |_, n, _| x[n]);
    let used: Vec<usize> = (cfg.first_frame()..frames).collect();
    let (_, state) = wpe_iterate(&spec, 0, 0, &used, &cfg).unwrap();
    let w0 = state.filter[0];
    let iters = state.cost_trace.len();
    let coeff_ok = (w0 - Complex64::new(0.8, 0.0)).norm() <= 0.05;

    // Cost traces: the echo run, random multichannel runs under both
    // variance rules, and every solve in a reverberant capture.
    let mut traces = vec![state];
    for (seed, rule) in [(1, VarianceUpdate::Floor), (2, VarianceUpdate::CostFloor)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = white(&mut rng, 3, 1200);
        let spec = MultichannelSpectrogram::from_fn(3, 1200, 1, 1.0, |i, n, _| {
            ch[i][n] + if n >= 70 { 0.5 * ch[(i + 1) % 3][n - 70] } else { Complex64::default() }
        });
        let c = WpeConfig {
            order_l: 4,
            max_iters: 6,
            variance_update: rule,
            ..WpeConfig::default()
        };
        let used: Vec<usize> = (c.first_frame()..1200).collect();
        for i in 0..3 {
            traces.push(wpe_iterate(&spec, i, 0, &used, &c).unwrap().1);
        }
    }
    let r = recipe("[[conditions]]\nname = \"w\"\nt60 = 1.0\nangles = [20.0]\n");
    let x = render_trial(&r.trials().unwrap()[0]).unwrap();
    let pcfg = r.pipeline().unwrap();
    let spec = stft(&x, &pcfg.stft).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bins = BinSet {
        bins: (0..24)
            .map(|_| SelectedBin {
                frame: rng.random_range(0..spec.num_frames()),
                bin: rng.random_range(32..158),
                score: 0.0,
                band: Band::Mid,
            })
            .collect(),
    };
    let cfg5 = WpeConfig {
        max_iters: 5,
        ..WpeConfig::default()
    };
    traces.extend(dereverberate_bins(&spec, &bins, &cfg5).unwrap().states.into_values());
    let steps: usize = traces.iter().map(|t| t.cost_trace.len()).sum();
    let mono = traces.iter().all(monotone);
    ledger.record(
        5,
        coeff_ok && mono,
        format!(
            "echo coefficient {:.4}{:+.4}j after {iters} iterations (0.8 +- 0.05); \
             cost non-increasing over {steps} updates: {mono}",
            w0.re, w0.im
        ),
    );
}

/// Vote counts by checking every (candidate, estimate) pair.
fn brute_force(
    votes: &[TdoaVote],
    cands: &[f64],
    bin_hz: f64,
    cfg: &onset_doa::doa::TdoaNeighborhoodConfig,
    g: &ArrayGeometry,
) -> (usize, Vec<u32>) {
    let counts: Vec<u32> = cands
        .iter()
        .map(|&c| {
            votes
                .iter()
                .filter(|v| {
                    let (lo, hi) = tdoa_neighborhood(c, v.k, bin_hz, cfg, g);
                    lo <= v.tau && v.tau <= hi
                })
                .count() as u32
        })
        .collect();
    let mut best = 0;
    for i in 1..cands.len() {
        let better = counts[i] > counts[best]
            || (counts[i] == counts[best] && cands[i].abs() < cands[best].abs());
        if better {
            best = i;
        }
    }
    (best, counts)
}

fn fusion_oracle(ledger: &mut Ledger, cfg: &PipelineConfig) {
    let grid = cfg.grid().unwrap();
    let cands = grid.taus();
    let g = &cfg.geometry;
    let t = g.max_tdoa();
    let bin_hz = cfg.stft.bin_hz();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let votes: Vec<TdoaVote> = (0..n)
            .map(|_| TdoaVote {
                // Half the estimates sit exactly on grid TDOAs, as real per-bin
                // SRP results do.
                tau: if rng.random_bool(0.5) {
                    cands[rng.random_range(0..cands.len())]
                } else {
                    rng.random_range(-t..=t)
                },
                k: rng.random_range(32..64),
            })
            .collect();
        let fused = fuse_mid_band(&votes, cands, bin_hz, &cfg.neighborhood, g).unwrap();
        let (best, counts) = brute_force(&votes, cands, bin_hz, &cfg.neighborhood, g);
        if fused.index != best || fused.counts != counts || fused.tau != cands[best] {
            mismatches += 1;
        }
    }
    ledger.record(
        6,
        mismatches == 0,
        format!("fused vote vs exhaustive count on 100 random instances: {mismatches} mismatches"),
    );
}

fn invariants(ledger: &mut Ledger, cfg: &PipelineConfig, reports: &[EstimateReport]) {
    let g = &cfg.geometry;
    let mut fails = Vec::new();

    let mut unit = true;
    for k in 0..cfg.stft.num_bins() {
        for th in [-90.0, -37.5, 0.0, 12.0, 90.0] {
            let v = steering_vector(k, th, g, cfg.stft.sample_rate, cfg.stft.window_len);
            unit &= v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12);
            if th == 0.0 {
                unit &= v.iter().all(|z| *z == Complex64::new(1.0, 0.0));
            }
        }
    }
    if !unit {
        fails.push("steering vectors");
    }

    let bound = g.max_tdoa() * (1.0 + 1e-12);
    let in_range = reports.iter().all(|r| {
        r.tau_m.is_none_or(|t| t.abs() <= bound) && r.bin_estimates.iter().all(|b| b.tau.abs() <= bound)
    });
    if !in_range {
        fails.push("|tau| bound");
    }

    let nyq = g.spatial_nyquist();
    if (nyq - 4914.29).abs() > 0.01 || (nyq - 4914.0).abs() > 1.0 {
        fails.push("spatial Nyquist");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ch = white(&mut rng, 4, 30);
    let spec = MultichannelSpectrogram::from_fn(4, 6, 5, 31.25, |i, n, k| ch[i][n * 5 + k]);
    let c = cross_power_envelope(&spec);
    let identity = (0..6).all(|n| {
        (0..5).all(|k| {
            let mean: f64 = (0..4).map(|i| ch[i][n * 5 + k].norm()).sum::<f64>() / 4.0;
            (c.get(n, k) - mean * mean).abs() <= 1e-12 * mean * mean
        })
    });
    if !identity {
        fails.push("cross-power identity");
    }

    let peak = gaussian_weight(1e-5, 1e-5, &RefineConfig::default(), g);
    if (peak - 15.0 / (2.0 * std::f64::consts::PI)).abs() > 1e-12 {
        fails.push("weight peak");
    }

    // Decisions are gain invariant once every bin sits well above the ξ and
    // ε floors, so the capture is raised and given a sensor-noise floor
    // about 47 dB above ξ before the 10x comparison.
    let r = recipe("[[conditions]]\nname = \"d\"\nt60 = 0.4\nangles = [-36.0]\n");
    let g = Normal::new(0.0, 0.5).unwrap();
    let x: Vec<Vec<f64>> = render_trial(&r.trials().unwrap()[0])
        .unwrap()
        .iter()
        .map(|c| c.iter().map(|v| 100.0 * v + g.sample(&mut rng)).collect())
        .collect();
    let a = estimate(&x, cfg).unwrap();
    let b = estimate(&x, cfg).unwrap();
    if !a.same_result(&b) {
        fails.push("determinism");
    }
    let y: Vec<Vec<f64>> = x.iter().map(|c| c.iter().map(|v| v * 10.0).collect()).collect();
    let scaled = estimate(&y, cfg).unwrap().theta;
    if scaled != a.theta {
        fails.push("gain invariance");
    }

    ledger.record(
        7,
        fails.is_empty(),
        if fails.is_empty() {
            format!("steering, TDOA bound, Nyquist {nyq:.2} Hz, cross-power, weight peak {peak:.6}, determinism, gain")
        } else {
            format!("violated: {}", fails.join(", "))
        },
    );
}

fn random_point(rng: &mut ChaCha8Rng, dims: Vec3) -> Vec3 {
    [0, 1, 2].map(|i| rng.random_range(0.3..dims[i] - 0.3))
}

fn rir_validity(ledger: &mut Ledger) {
    let dims = [7.0, 5.0, 3.0];
    let fs = 16000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut measured = BTreeMap::new();
    for t60 in [0.4, 1.0] {
        let room = RoomSpec::with_t60(dims, t60, fs).unwrap();
        for _ in 0..3 {
            let (s, m) = (random_point(&mut rng, dims), random_point(&mut rng, dims));
            let h = generate_rir(&room, s, m, room.default_max_order() as i64).unwrap();
            let got = measure_t60(&h, fs).unwrap_or(f64::NAN);
            let rel = (got - t60).abs() / t60;
            worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
            measured.entry(format!("{t60}")).or_insert_with(Vec::new).push(format!("{got:.3}"));
        }
    }

    let mut recip: f64 = 0.0;
    let mut causal = true;
    for i in 0..12 {
        let t60 = [0.2, 0.5][i % 2];
        let dims = [rng.random_range(3.0..8.0), rng.random_range(3.0..6.0), rng.random_range(2.5..4.0)];
        let interp = if i % 3 == 0 {
            DelayInterp::Nearest
        } else {
            DelayInterp::Sinc { half_width: 32 }
        };
        let room = RoomSpec::with_t60(dims, t60, fs).unwrap().with_interp(interp);
        let (s, m) = (random_point(&mut rng, dims), random_point(&mut rng, dims));
        let order = 12;
        let h1 = generate_rir(&room, s, m, order).unwrap();
        let h2 = generate_rir(&room, m, s, order).unwrap();
        recip = recip.max(h1.iter().zip(&h2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let d: f64 = (0..3).map(|j| (s[j] - m[j]).powi(2)).sum::<f64>().sqrt();
        let direct = (d / room.sound_speed * fs).round() as usize;
        let hw = match interp {
            DelayInterp::Nearest => 0,
            DelayInterp::Sinc { half_width } => half_width,
        };
        causal &= h1[..direct.saturating_sub(hw)].iter().all(|&v| v == 0.0);
        causal &= h1[direct] != 0.0;
    }
    ledger.record(
        8,
        worst <= 0.15 && recip <= 1e-12 && causal,
        format!(
            "Schroeder T60 {measured:?}, worst deviation {:.1}% (<= 15%); reciprocity max diff {recip:.1e}; causal: {causal}",
            100.0 * worst
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger { lines: Vec::new() };
    let cfg = PipelineConfig::new(paper_geometry());
    let mut reports = anechoic(&mut ledger, &cfg);
    reports.extend(reverberant(&mut ledger));
    wpe_oracle(&mut ledger);
    fusion_oracle(&mut ledger, &cfg);
    invariants(&mut ledger, &cfg, &reports);
    rir_validity(&mut ledger);

    ledger.lines.sort_by_key(|l| l.0);
    println!("\nsummary:");
    for (n, ok, _) in &ledger.lines {
        println!("  {n}: {}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed: Vec<usize> = ledger.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
