//! Shoebox room simulation with the image-source method.
//!
//! Every image contributes `Π β_wall^hits / r` at delay `r / c` seconds.
//! Delays are placed either at the nearest sample or through a Hann-windowed
//! sinc kernel; the latter keeps sub-sample inter-microphone delays intact,
//! which a 3.5 cm array needs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{norm, sub, ArrayGeometry, Vec3};

/// How image delays are realised on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DelayInterp {
    Nearest,
    /// Hann-windowed sinc spanning `2 * half_width + 1` taps.
    Sinc { half_width: usize },
}

impl Default for DelayInterp {
    fn default() -> Self {
        DelayInterp::Sinc { half_width: 32 }
    }
}

/// Wall order: x = 0, x = Lx, y = 0, y = Ly, z = 0, z = Lz.
pub type WallCoeffs = [f64; 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: Vec3,
    pub t60: f64,
    pub reflection_coeffs: WallCoeffs,
    pub sample_rate: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(default)]
    pub delay_interp: DelayInterp,
    /// Caps the total number of wall hits per image. `None` keeps every image
    /// that arrives within the impulse-response length.
    #[serde(default)]
    pub max_order: Option<u32>,
    /// Allen–Berkley 100 Hz high-pass on reverberant responses. Without it
    /// the all-positive image taps pile up at DC and stretch the decay.
    #[serde(default = "default_true")]
    pub highpass: bool,
}

fn default_true() -> bool {
    true
}

fn default_sound_speed() -> f64 {
    344.0
}

/// 24 ln(10) / c: Sabine's constant for sound speed `c`.
fn sabine_constant(c: f64) -> f64 {
    24.0 * std::f64::consts::LN_10 / c
}

fn volume_and_surface(d: Vec3) -> (f64, f64) {
    let v = d[0] * d[1] * d[2];
    let s = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
    (v, s)
}

fn check_dimensions(d: Vec3) -> Result<()> {
    if d.iter().all(|&x| x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("room dimensions must be positive: {d:?}")))
    }
}

/// Uniform wall reflection coefficient giving reverberation time `t60` under
/// Sabine's formula (absorption α = 1 − β²).
pub fn t60_to_reflection(dimensions: Vec3, t60: f64, sound_speed: f64) -> Result<WallCoeffs> {
    check_dimensions(dimensions)?;
    if !(t60 >= 0.0) || !t60.is_finite() {
        return Err(Error::Config(format!("t60 must be non-negative, got {t60}")));
    }
    if t60 == 0.0 {
        return Ok([0.0; 6]);
    }
    let (v, s) = volume_and_surface(dimensions);
    let alpha = sabine_constant(sound_speed) * v / (s * t60);
    if alpha > 1.0 {
        return Err(Error::RoomTooSmall {
            t60,
            beta: (1.0 - alpha).max(0.0).sqrt(),
        });
    }
    Ok([(1.0 - alpha).sqrt(); 6])
}

/// How a target T60 is turned into a uniform wall coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// Sabine's formula, α = 1 − β² = 24 ln10 V / (c S T60).
    Sabine,
    /// Matches the Schroeder T20 of the image lattice's own energy decay.
    /// A specular shoebox decays slower than Sabine predicts (grazing paths
    /// along the long axis hit few walls), so this is what generated
    /// responses actually measure.
    #[default]
    ImageDecay,
}

/// Uniform wall reflection coefficient for `t60` under `model`.
pub fn t60_to_reflection_with(
    dimensions: Vec3,
    t60: f64,
    sound_speed: f64,
    model: DecayModel,
) -> Result<WallCoeffs> {
    match model {
        DecayModel::Sabine => t60_to_reflection(dimensions, t60, sound_speed),
        DecayModel::ImageDecay => {
            check_dimensions(dimensions)?;
            if !(t60 >= 0.0) || !t60.is_finite() {
                return Err(Error::Config(format!("t60 must be non-negative, got {t60}")));
            }
            if t60 == 0.0 {
                return Ok([0.0; 6]);
            }
            let len_s = t60 + norm(dimensions) / sound_speed;
            let decay = LatticeDecay::new(dimensions, sound_speed, len_s);
            let (mut lo, mut hi) = (1e-6f64, 1.0 - 1e-9);
            if decay.t60(lo) > t60 {
                return Err(Error::RoomTooSmall { t60, beta: lo });
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if decay.t60(mid) < t60 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok([0.5 * (lo + hi); 6])
        }
    }
}

/// Incoherent energy histogram of the image lattice for a canonical
/// source/microphone pair, indexed by arrival time and wall-hit count.
struct LatticeDecay {
    /// hist[t * stride + hits] = Σ 1/r²
    hist: Vec<f64>,
    stride: usize,
    bins: usize,
}

impl LatticeDecay {
    const DT: f64 = 1e-3;

    fn new(dims: Vec3, c: f64, len_s: f64) -> Self {
        let src = [0.31 * dims[0], 0.63 * dims[1], 0.42 * dims[2]];
        let mic = [0.52 * dims[0], 0.44 * dims[1], 0.5 * dims[2]];
        let reach = c * len_s;
        let axes: Vec<Vec<(f64, f64, u32)>> = (0..3)
            .map(|a| axis_images(src[a], mic[a], dims[a], reach, 1.0, 1.0, false))
            .collect();
        let bins = (len_s / Self::DT).ceil() as usize + 1;
        let stride = axes
            .iter()
            .map(|v| v.iter().map(|e| e.2).max().unwrap_or(0) as usize)
            .sum::<usize>()
            + 1;
        let mut hist = vec![0.0; bins * stride];
        let reach2 = reach * reach;
        for &(dx2, _, ox) in &axes[0] {
            if dx2 > reach2 {
                break;
            }
            for &(dy2, _, oy) in &axes[1] {
                if dx2 + dy2 > reach2 {
                    break;
                }
                for &(dz2, _, oz) in &axes[2] {
                    let d2 = dx2 + dy2 + dz2;
                    if d2 > reach2 {
                        break;
                    }
                    let t = (d2.sqrt() / c / Self::DT) as usize;
                    if t < bins {
                        hist[t * stride + (ox + oy + oz) as usize] += 1.0 / d2;
                    }
                }
            }
        }
        LatticeDecay { hist, stride, bins }
    }

    /// Schroeder T20 of the lattice response for reflection coefficient `beta`.
    fn t60(&self, beta: f64) -> f64 {
        let b2 = beta * beta;
        let powers: Vec<f64> = std::iter::successors(Some(1.0), |p| Some(p * b2))
            .take(self.stride)
            .collect();
        let energy: Vec<f64> = (0..self.bins)
            .map(|t| {
                self.hist[t * self.stride..(t + 1) * self.stride]
                    .iter()
                    .zip(&powers)
                    .map(|(h, p)| h * p)
                    .sum()
            })
            .collect();
        let mut acc = 0.0;
        let mut edc: Vec<f64> = energy
            .iter()
            .rev()
            .map(|e| {
                acc += e;
                acc
            })
            .collect();
        edc.reverse();
        let total = edc[0];
        let pts: Vec<(f64, f64)> = edc
            .iter()
            .enumerate()
            .map(|(n, e)| (n as f64 * Self::DT, 10.0 * (e / total).log10()))
            .filter(|(_, db)| (-25.0..=-5.0).contains(db))
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        slope_t60(&pts).unwrap_or(f64::INFINITY)
    }
}

fn slope_t60(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let md = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - md)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = cov / var;
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Sabine prediction for arbitrary wall coefficients.
pub fn sabine_t60(dimensions: Vec3, coeffs: &WallCoeffs, sound_speed: f64) -> f64 {
    let [lx, ly, lz] = dimensions;
    let areas = [ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly];
    let absorption: f64 = areas
        .iter()
        .zip(coeffs)
        .map(|(a, b)| a * (1.0 - b * b))
        .sum();
    if absorption <= 0.0 {
        return f64::INFINITY;
    }
    sabine_constant(sound_speed) * dimensions.iter().product::<f64>() / absorption
}

impl RoomSpec {
    /// Room with uniform walls reaching `t60` under the default
    /// [`DecayModel`].
    pub fn with_t60(dimensions: Vec3, t60: f64, sample_rate: f64) -> Result<Self> {
        Self::with_t60_model(dimensions, t60, sample_rate, DecayModel::default())
    }

    pub fn with_t60_model(
        dimensions: Vec3,
        t60: f64,
        sample_rate: f64,
        model: DecayModel,
    ) -> Result<Self> {
        let c = default_sound_speed();
        let reflection_coeffs = t60_to_reflection_with(dimensions, t60, c, model)?;
        let room = RoomSpec {
            dimensions,
            t60,
            reflection_coeffs,
            sample_rate,
            sound_speed: c,
            delay_interp: DelayInterp::default(),
            max_order: None,
            highpass: true,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn anechoic(dimensions: Vec3, sample_rate: f64) -> Result<Self> {
        Self::with_t60(dimensions, 0.0, sample_rate)
    }

    /// Room with explicit wall coefficients; `t60` is set to the Sabine
    /// prediction so the impulse-response length follows the walls.
    pub fn with_coeffs(dimensions: Vec3, coeffs: WallCoeffs, sample_rate: f64) -> Result<Self> {
        check_dimensions(dimensions)?;
        let c = default_sound_speed();
        let t60 = if coeffs.iter().all(|&b| b == 0.0) {
            0.0
        } else {
            sabine_t60(dimensions, &coeffs, c)
        };
        let room = RoomSpec {
            dimensions,
            t60,
            reflection_coeffs: coeffs,
            sample_rate,
            sound_speed: c,
            delay_interp: DelayInterp::default(),
            max_order: None,
            highpass: true,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn with_interp(mut self, interp: DelayInterp) -> Self {
        self.delay_interp = interp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dimensions(self.dimensions)?;
        if !(self.t60 >= 0.0) || !self.t60.is_finite() {
            return Err(Error::Config("t60 must be finite and non-negative".into()));
        }
        if self
            .reflection_coeffs
            .iter()
            .any(|&b| !(0.0..1.0).contains(&b))
        {
            return Err(Error::Config("reflection coefficients must lie in [0, 1)".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if !(self.sound_speed > 0.0) {
            return Err(Error::Config("sound speed must be positive".into()));
        }
        Ok(())
    }

    /// True when `p` is strictly inside the room.
    pub fn contains(&self, p: Vec3) -> bool {
        p.iter()
            .zip(self.dimensions)
            .all(|(&x, l)| x > 0.0 && x < l)
    }

    fn is_anechoic(&self) -> bool {
        self.reflection_coeffs.iter().all(|&b| b == 0.0)
    }

    fn interp_half_width(&self) -> usize {
        match self.delay_interp {
            DelayInterp::Nearest => 0,
            DelayInterp::Sinc { half_width } => half_width,
        }
    }

    /// Impulse-response length in samples; depends only on the room so
    /// every source/microphone pair yields the same length.
    pub fn rir_len(&self) -> usize {
        let diag = norm(self.dimensions);
        let direct = (diag / self.sound_speed * self.sample_rate).ceil() as usize;
        let tail = if self.is_anechoic() {
            0
        } else {
            (self.t60 * self.sample_rate).ceil() as usize
        };
        direct + tail + 2 * self.interp_half_width() + 1
    }

    /// Reflection order needed for every image inside the RIR length.
    pub fn default_max_order(&self) -> u32 {
        if self.is_anechoic() {
            return 0;
        }
        let reach = self.rir_len() as f64 / self.sample_rate * self.sound_speed;
        let per_axis: f64 = self.dimensions.iter().map(|l| reach / l).sum();
        per_axis.ceil() as u32 + 3
    }
}

/// Per-axis image contributions: squared offset, wall gain and hit count.
fn axis_images(
    src: f64,
    mic: f64,
    len: f64,
    reach: f64,
    lo: f64,
    hi: f64,
    anechoic: bool,
) -> Vec<(f64, f64, u32)> {
    let m_max = if anechoic {
        0
    } else {
        (reach / (2.0 * len)).ceil() as i64 + 1
    };
    let mut out = Vec::new();
    for q in 0..=1i64 {
        for m in -m_max..=m_max {
            let img = (1 - 2 * q) as f64 * src + 2.0 * m as f64 * len;
            let d = img - mic;
            if d.abs() > reach && !(m == 0 && q == 0) {
                continue;
            }
            let hits_lo = (m - q).unsigned_abs() as u32;
            let hits_hi = m.unsigned_abs() as u32;
            let gain = lo.powi(hits_lo as i32) * hi.powi(hits_hi as i32);
            if gain == 0.0 && hits_lo + hits_hi > 0 {
                continue;
            }
            out.push((d * d, gain, hits_lo + hits_hi));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    out
}

/// Hann-windowed sinc sampled on a fine grid, linearly interpolated.
struct SincTable {
    half_width: usize,
    values: Vec<f64>,
}

impl SincTable {
    const OVERSAMPLE: usize = 512;

    fn new(half_width: usize) -> Self {
        let span = half_width as f64 + 1.0;
        let n = 2 * (half_width + 1) * Self::OVERSAMPLE + 2;
        let values = (0..n)
            .map(|i| {
                let x = i as f64 / Self::OVERSAMPLE as f64 - span;
                if x.abs() >= span {
                    return 0.0;
                }
                let sinc = if x.abs() < 1e-12 {
                    1.0
                } else {
                    let px = std::f64::consts::PI * x;
                    px.sin() / px
                };
                sinc * 0.5 * (1.0 + (std::f64::consts::PI * x / span).cos())
            })
            .collect();
        SincTable { half_width, values }
    }

    fn at(&self, x: f64) -> f64 {
        let pos = (x + self.half_width as f64 + 1.0) * Self::OVERSAMPLE as f64;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

fn add_tap(rir: &mut [f64], delay: f64, amp: f64, sinc: Option<&SincTable>) {
    match sinc {
        None => {
            let n = delay.round() as usize;
            if n < rir.len() {
                rir[n] += amp;
            }
        }
        Some(table) => {
            let center = delay.round() as i64;
            let hw = table.half_width as i64;
            let lo = (center - hw).max(0);
            let hi = (center + hw).min(rir.len() as i64 - 1);
            for n in lo..=hi {
                rir[n as usize] += amp * table.at(n as f64 - delay);
            }
        }
    }
}

/// Image-method impulse response from `source` to `mic`, truncated to
/// [`RoomSpec::rir_len`] samples and at most `max_order` wall hits.
pub fn generate_rir(room: &RoomSpec, source: Vec3, mic: Vec3, max_order: i64) -> Result<Vec<f64>> {
    if max_order < 0 {
        return Err(Error::Config(format!("max_order must be >= 0, got {max_order}")));
    }
    room.validate()?;
    for p in [source, mic] {
        if !room.contains(p) {
            return Err(Error::OutsideRoom(p));
        }
    }
    if norm(sub(source, mic)) < 1e-9 {
        return Err(Error::Coincident);
    }
    let max_order = max_order.min(u32::MAX as i64) as u32;
    let len = room.rir_len();
    let fs = room.sample_rate;
    let c = room.sound_speed;
    let reach = len as f64 / fs * c;
    let reach2 = reach * reach;
    let anechoic = room.is_anechoic() || max_order == 0;
    let b = &room.reflection_coeffs;
    let xs = axis_images(source[0], mic[0], room.dimensions[0], reach, b[0], b[1], anechoic);
    let ys = axis_images(source[1], mic[1], room.dimensions[1], reach, b[2], b[3], anechoic);
    let zs = axis_images(source[2], mic[2], room.dimensions[2], reach, b[4], b[5], anechoic);

    let sinc = match room.delay_interp {
        DelayInterp::Nearest => None,
        DelayInterp::Sinc { half_width } => Some(SincTable::new(half_width)),
    };
    let mut rir = vec![0.0; len];
    for &(dx2, gx, ox) in &xs {
        if dx2 > reach2 {
            break;
        }
        if ox > max_order {
            continue;
        }
        for &(dy2, gy, oy) in &ys {
            let dxy2 = dx2 + dy2;
            if dxy2 > reach2 {
                break;
            }
            if ox + oy > max_order {
                continue;
            }
            for &(dz2, gz, oz) in &zs {
                let d2 = dxy2 + dz2;
                if d2 > reach2 {
                    break;
                }
                if ox + oy + oz > max_order {
                    continue;
                }
                let r = d2.sqrt();
                add_tap(&mut rir, r / c * fs, gx * gy * gz / r, sinc.as_ref());
            }
        }
    }
    if room.highpass && !anechoic {
        allen_berkley_highpass(&mut rir, fs);
    }
    Ok(rir)
}

/// Second-order 100 Hz high-pass from the original image-method paper.
fn allen_berkley_highpass(x: &mut [f64], fs: f64) {
    let w = 2.0 * std::f64::consts::PI * 100.0 / fs;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let mut y = [0.0; 3];
    for v in x.iter_mut() {
        y[2] = y[1];
        y[1] = y[0];
        y[0] = b1 * y[1] + b2 * y[2] + *v;
        *v = y[0] + a1 * y[1] + r1 * y[2];
    }
}

/// A source location with its nominal direction seen from the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePlacement {
    pub position: Vec3,
    pub nominal_angle: f64,
}

impl SourcePlacement {
    /// Source at `distance` meters from the array centre, toward `angle_deg`.
    pub fn at_angle(geometry: &ArrayGeometry, angle_deg: f64, distance: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&angle_deg) {
            return Err(Error::Config(format!(
                "nominal angle {angle_deg} outside [-90, 90]"
            )));
        }
        Ok(SourcePlacement {
            position: geometry.point_at(angle_deg, distance),
            nominal_angle: angle_deg,
        })
    }
}

/// Impulse responses from one source position to every microphone.
pub fn array_rirs(room: &RoomSpec, geometry: &ArrayGeometry, source: Vec3) -> Result<Vec<Vec<f64>>> {
    if !room.contains(source) {
        return Err(Error::OutsideRoom(source));
    }
    let order = room.max_order.unwrap_or_else(|| room.default_max_order()) as i64;
    geometry
        .mic_positions()
        .par_iter()
        .map(|&mic| generate_rir(room, source, mic, order))
        .collect()
}

/// Convolves `dry` with precomputed per-microphone responses.
pub fn apply_rirs(dry: &[f64], rirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if dry.is_empty() {
        return Err(Error::TooShort("dry signal is empty".into()));
    }
    Ok(rirs.par_iter().map(|h| dsp::convolve(dry, h)).collect())
}

/// One reverberant channel per microphone, each `dry.len() + rir_len - 1` long.
pub fn simulate_capture(
    dry: &[f64],
    room: &RoomSpec,
    geometry: &ArrayGeometry,
    placement: &SourcePlacement,
) -> Result<Vec<Vec<f64>>> {
    if dry.is_empty() {
        return Err(Error::TooShort("dry signal is empty".into()));
    }
    let rirs = array_rirs(room, geometry, placement.position)?;
    apply_rirs(dry, &rirs)
}

/// Scale applied to the interference so the mixture reaches `sir_db`.
pub fn sir_scale(target: &[f64], interference: &[f64], sir_db: f64) -> Result<f64> {
    let pt = dsp::power(target);
    let pi = dsp::power(interference);
    if pi == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok((pt / (pi * 10f64.powf(sir_db / 10.0))).sqrt())
}

/// Adds interference to target at the requested signal-to-interference
/// ratio, measured on channel 1 over the target's duration. Interference is
/// zero-padded or truncated to the target length.
pub fn mix_at_sir(
    target: &[Vec<f64>],
    interference: &[Vec<f64>],
    sir_db: f64,
) -> Result<Vec<Vec<f64>>> {
    if target.len() != interference.len() {
        return Err(Error::ChannelMismatch {
            expected: target.len(),
            got: interference.len(),
        });
    }
    if target.is_empty() {
        return Ok(Vec::new());
    }
    let len = target[0].len();
    let fitted: Vec<Vec<f64>> = interference
        .iter()
        .map(|ch| {
            let mut v: Vec<f64> = ch.iter().copied().take(len).collect();
            v.resize(len, 0.0);
            v
        })
        .collect();
    let scale = sir_scale(&target[0], &fitted[0], sir_db)?;
    Ok(target
        .iter()
        .zip(&fitted)
        .map(|(t, i)| t.iter().zip(i).map(|(a, b)| a + scale * b).collect())
        .collect())
}

/// Schroeder backward-integrated energy decay curve in dB (0 dB at t = 0).
pub fn energy_decay_curve(rir: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = rir
        .iter()
        .rev()
        .map(|x| {
            acc += x * x;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| {
            if total > 0.0 && e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Reverberation time from the Schroeder curve: least-squares slope between
/// -5 dB and -25 dB, extrapolated to 60 dB of decay.
pub fn measure_t60(rir: &[f64], sample_rate: f64) -> Option<f64> {
    let edc = energy_decay_curve(rir);
    let pts: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .filter(|(_, &db)| (-25.0..=-5.0).contains(&db))
        .map(|(n, &db)| (n as f64 / sample_rate, db))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    slope_t60(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMS: Vec3 = [7.0, 5.0, 3.0];

    fn nearest(room: RoomSpec) -> RoomSpec {
        room.with_interp(DelayInterp::Nearest)
    }

    #[test]
    fn zero_t60_is_anechoic() {
        assert_eq!(t60_to_reflection(DIMS, 0.0, 344.0).unwrap(), [0.0; 6]);
        let tiny = t60_to_reflection(DIMS, 1e-9, 344.0);
        // absorption would exceed 1 for such a short decay
        assert!(matches!(tiny, Err(Error::RoomTooSmall { .. })));
    }

    #[test]
    fn sabine_inversion_roundtrips() {
        for t60 in [0.3, 0.4, 1.0, 2.5] {
            let b = t60_to_reflection(DIMS, t60, 344.0).unwrap();
            let back = sabine_t60(DIMS, &b, 344.0);
            assert!((back - t60).abs() / t60 < 0.05, "{t60} -> {back}");
        }
    }

    #[test]
    fn larger_room_needs_more_absorption() {
        let small = t60_to_reflection(DIMS, 0.6, 344.0).unwrap()[0];
        let big = t60_to_reflection([14.0, 10.0, 6.0], 0.6, 344.0).unwrap()[0];
        assert!(big < small);
    }

    #[test]
    fn anechoic_rir_is_single_tap() {
        let room = nearest(RoomSpec::anechoic(DIMS, 16000.0).unwrap());
        let src = [3.5, 4.2, 1.5];
        let mic = [3.5, 2.2, 1.5];
        let h = generate_rir(&room, src, mic, 10).unwrap();
        let nz: Vec<usize> = (0..h.len()).filter(|&i| h[i] != 0.0).collect();
        assert_eq!(nz, vec![93]);
        assert!((h[93] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_tap_at_direct_delay() {
        let room = nearest(RoomSpec::with_t60(DIMS, 0.4, 16000.0).unwrap());
        let h = generate_rir(&room, [3.1, 4.2, 1.3], [3.1, 2.2, 1.3], 20).unwrap();
        let first = h.iter().position(|&x| x != 0.0).unwrap();
        assert_eq!(first, 93);
        let peak = (0..h.len())
            .max_by(|&a, &b| h[a].abs().total_cmp(&h[b].abs()))
            .unwrap();
        assert_eq!(peak, 93);
    }

    #[test]
    fn negative_order_rejected() {
        let room = RoomSpec::anechoic(DIMS, 16000.0).unwrap();
        assert!(generate_rir(&room, [1.0; 3], [2.0; 3], -1).is_err());
        assert!(matches!(
            generate_rir(&room, [1.0; 3], [1.0; 3], 1),
            Err(Error::Coincident)
        ));
        assert!(matches!(
            generate_rir(&room, [8.0, 1.0, 1.0], [2.0; 3], 1),
            Err(Error::OutsideRoom(_))
        ));
    }

    #[test]
    fn impulse_capture_equals_rirs() {
        let room = RoomSpec::with_t60(DIMS, 0.3, 16000.0).unwrap();
        let g = ArrayGeometry::uniform([3.5, 2.2, 1.5], [1.0, 0.0, 0.0], 4, 0.035, 344.0).unwrap();
        let place = SourcePlacement::at_angle(&g, 20.0, 2.0).unwrap();
        let out = simulate_capture(&[1.0], &room, &g, &place).unwrap();
        let rirs = array_rirs(&room, &g, place.position).unwrap();
        assert_eq!(out.len(), 4);
        for (o, h) in out.iter().zip(&rirs) {
            assert_eq!(o.len(), h.len());
            for (a, b) in o.iter().zip(h) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mix_reaches_requested_sir() {
        let t = vec![vec![1.0, -1.0, 1.0, -1.0]];
        let i = vec![vec![0.5, 0.5, -0.5, -0.5, 9.0]];
        let mixed = mix_at_sir(&t, &i, 5.0).unwrap();
        let resid: Vec<f64> = mixed[0].iter().zip(&t[0]).map(|(m, t)| m - t).collect();
        let sir = 10.0 * (dsp::power(&t[0]) / dsp::power(&resid)).log10();
        assert!((sir - 5.0).abs() < 0.01);
        let expected = (1.0 / (0.25 * 10f64.powf(0.5))).sqrt();
        assert!((sir_scale(&t[0], &i[0][..4], 5.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mix_edge_cases() {
        let t = vec![vec![1.0, 2.0, 3.0]];
        let eq = vec![vec![1.0, 2.0, 3.0]];
        assert!((sir_scale(&t[0], &eq[0], 0.0).unwrap() - 1.0).abs() < 1e-15);
        let clean = mix_at_sir(&t, &eq, f64::INFINITY).unwrap();
        assert_eq!(clean, t);
        let silent = vec![vec![0.0; 3]];
        assert!(matches!(mix_at_sir(&t, &silent, 5.0), Err(Error::ZeroPower)));
    }
}
