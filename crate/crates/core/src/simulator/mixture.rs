//! Two-microphone test signals with known ground truth: a plane wave in an
//! isotropic noise field at a prescribed CDR, and reverberant signals with
//! separately convolved early and late components.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::delay::delay_signal;
use super::field::{synthesize_isotropic, FieldKind, DEFAULT_SOURCES};
use super::room::{split_rir, ImpulseResponse};
use crate::coherence::tdoa_from_doa;
use crate::error::{config_err, input_err, Result};

/// CDR target of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdrTarget {
    /// One ratio over the whole band, dB. `±∞` selects a single component.
    Broadband(f64),
    /// Ratio per one-third-octave band, dB, listed by band centre frequency.
    PerBand(Vec<(f64, f64)>),
}

/// Parameters of [`make_mixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    /// Direction of arrival, radians from broadside.
    pub doa: f64,
    pub target: CdrTarget,
    pub mic_distance: f64,
    pub sound_speed: f64,
    pub sample_rate: f64,
    pub field: FieldKind,
    pub num_sources: usize,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            doa: 0.0,
            target: CdrTarget::Broadband(0.0),
            mic_distance: 0.08,
            sound_speed: crate::coherence::DEFAULT_SOUND_SPEED,
            sample_rate: 16000.0,
            field: FieldKind::Spherical,
            num_sources: DEFAULT_SOURCES,
            seed: 0,
        }
    }
}

/// Band-wise power ratio between two signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRatio {
    pub center_hz: f64,
    pub db: f64,
}

/// A plane-wave-plus-noise mixture and its components.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub x: [Vec<f64>; 2],
    pub direct: [Vec<f64>; 2],
    pub noise: [Vec<f64>; 2],
    /// TDOA of the direct component, seconds (arrival at mic 2 minus mic 1).
    pub tdoa: f64,
    /// Realized broadband direct-to-noise power ratio, dB.
    pub realized_cdr_db: f64,
    /// Realized ratio per one-third-octave band.
    pub realized_bands: Vec<BandRatio>,
}

/// One-third-octave band centres from 25 Hz up to the band containing
/// `max_hz`, with lower and upper edges.
pub fn third_octave_bands(max_hz: f64) -> Vec<(f64, f64, f64)> {
    (-16..=20)
        .map(|k| 1000.0 * 2f64.powf(k as f64 / 3.0))
        .map(|c| (c, c * 2f64.powf(-1.0 / 6.0), c * 2f64.powf(1.0 / 6.0)))
        .filter(|&(_, lo, _)| lo < max_hz)
        .map(|(c, lo, hi)| (c, lo, hi.min(max_hz)))
        .collect()
}

fn spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

/// Power of `x` in each band of `bands`, from a full-length FFT.
fn band_powers(x: &[f64], bands: &[(f64, f64, f64)], sample_rate: f64) -> Vec<f64> {
    let spec = spectrum(x);
    let n = x.len();
    let df = sample_rate / n as f64;
    bands
        .iter()
        .map(|&(_, lo, hi)| {
            (0..=n / 2)
                .filter(|&k| {
                    let f = k as f64 * df;
                    f >= lo && f < hi
                })
                .map(|k| spec[k].norm_sqr())
                .sum()
        })
        .collect()
}

/// Scales each band of `x` by `gains[band]`, leaving other frequencies at zero.
fn shape_bands(x: &[f64], bands: &[(f64, f64, f64)], gains: &[f64], sample_rate: f64) -> Vec<f64> {
    let mut spec = spectrum(x);
    let n = x.len();
    let df = sample_rate / n as f64;
    for k in 0..n {
        let f = k.min(n - k) as f64 * df;
        let g = bands
            .iter()
            .position(|&(_, lo, hi)| f >= lo && f < hi)
            .map_or(0.0, |b| gains[b]);
        spec[k] *= g;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|v| v.re / n as f64).collect()
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

fn pair_power(x: &[Vec<f64>; 2]) -> f64 {
    0.5 * (power(&x[0]) + power(&x[1]))
}

fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Renders `clean` as a plane wave from `spec.doa` on a microphone pair
/// spaced `spec.mic_distance` apart, and adds isotropic noise scaled so the
/// long-run direct-to-noise power ratio matches the target.
pub fn make_mixture(clean: &[f64], spec: &MixtureSpec) -> Result<Mixture> {
    if clean.is_empty() {
        return input_err("clean signal is empty");
    }
    if !(spec.mic_distance > 0.0 && spec.sample_rate > 0.0 && spec.sound_speed > 0.0) {
        return config_err("mic distance, sample rate and sound speed must be positive");
    }
    let tdoa = tdoa_from_doa(spec.doa, spec.mic_distance, spec.sound_speed);
    let half = 0.5 * tdoa * spec.sample_rate;
    let direct = [delay_signal(clean, -half), delay_signal(clean, half)];
    let d = spec.mic_distance;
    let mics = [[-d / 2.0, 0.0, 0.0], [d / 2.0, 0.0, 0.0]];
    let duration = clean.len() as f64 / spec.sample_rate;
    let raw = synthesize_isotropic(
        spec.field,
        spec.num_sources,
        &mics,
        duration,
        spec.sample_rate,
        spec.sound_speed,
        spec.seed,
    )?;
    let raw = [raw[0].clone(), raw[1].clone()];
    let bands = third_octave_bands(spec.sample_rate / 2.0);
    let ps = pair_power(&direct);

    let (direct, noise) = match &spec.target {
        CdrTarget::Broadband(t) if t.is_nan() => return config_err("CDR target is NaN"),
        CdrTarget::Broadband(t) if *t == f64::INFINITY => {
            (direct, [vec![0.0; clean.len()], vec![0.0; clean.len()]])
        }
        CdrTarget::Broadband(t) => {
            // A target of −∞ keeps the noise at the clean signal's power.
            let pn_target = if *t == f64::NEG_INFINITY { power(clean) } else { ps / 10f64.powf(t / 10.0) };
            let g = (pn_target / pair_power(&raw)).sqrt();
            let noise = raw.map(|c| c.iter().map(|v| v * g).collect::<Vec<_>>());
            let direct = if *t == f64::NEG_INFINITY {
                [vec![0.0; clean.len()], vec![0.0; clean.len()]]
            } else {
                direct
            };
            (direct, noise)
        }
        CdrTarget::PerBand(targets) => {
            if targets.iter().any(|(_, t)| !t.is_finite()) {
                return config_err("per-band CDR targets must be finite");
            }
            let s_bands: Vec<f64> = {
                let a = band_powers(&direct[0], &bands, spec.sample_rate);
                let b = band_powers(&direct[1], &bands, spec.sample_rate);
                a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
            };
            let n_bands: Vec<f64> = {
                let a = band_powers(&raw[0], &bands, spec.sample_rate);
                let b = band_powers(&raw[1], &bands, spec.sample_rate);
                a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
            };
            let gains: Vec<f64> = bands
                .iter()
                .enumerate()
                .map(|(i, &(c, _, _))| {
                    let t = targets
                        .iter()
                        .min_by(|a, b| (a.0 / c).ln().abs().total_cmp(&(b.0 / c).ln().abs()))
                        .map_or(0.0, |t| t.1);
                    if n_bands[i] > 0.0 && s_bands[i] > 0.0 {
                        (s_bands[i] / (n_bands[i] * 10f64.powf(t / 10.0))).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect();
            let noise = raw.map(|c| shape_bands(&c, &bands, &gains, spec.sample_rate));
            (direct, noise)
        }
    };

    let x = [
        direct[0].iter().zip(&noise[0]).map(|(a, b)| a + b).collect(),
        direct[1].iter().zip(&noise[1]).map(|(a, b)| a + b).collect(),
    ];
    let realized_cdr_db = db(pair_power(&direct) / pair_power(&noise));
    let sb = band_powers(&direct[0], &bands, spec.sample_rate);
    let nb = band_powers(&noise[0], &bands, spec.sample_rate);
    let realized_bands = bands
        .iter()
        .zip(sb.iter().zip(&nb))
        .map(|(&(c, _, _), (s, n))| BandRatio {
            center_hz: c,
            db: db(s / n),
        })
        .collect();
    Ok(Mixture {
        x,
        direct,
        noise,
        tdoa,
        realized_cdr_db,
        realized_bands,
    })
}

/// Linear convolution of `x` with `h`, truncated to the length of `x`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for (d, s) in b.iter_mut().zip(v) {
            d.re = *s;
        }
        b
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    a[..x.len()].iter().map(|v| v.re / n as f64).collect()
}

/// A reverberant two-channel signal with its early and late components.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverberantMixture {
    /// Microphone signals, exactly `early + late` per channel.
    pub x: [Vec<f64>; 2],
    pub early: [Vec<f64>; 2],
    pub late: [Vec<f64>; 2],
}

/// Convolves `clean` with the early and late parts of each RIR (split
/// `te` seconds after the onset). All outputs have the length of `clean`.
pub fn reverberant_mixture(clean: &[f64], rirs: [&ImpulseResponse; 2], te: f64) -> Result<ReverberantMixture> {
    if clean.is_empty() {
        return input_err("clean signal is empty");
    }
    let mut early: [Vec<f64>; 2] = Default::default();
    let mut late: [Vec<f64>; 2] = Default::default();
    for (i, rir) in rirs.iter().enumerate() {
        let (e, l) = split_rir(rir, te)?;
        early[i] = convolve(clean, &e.samples);
        late[i] = convolve(clean, &l.samples);
    }
    let x = [0, 1].map(|i| early[i].iter().zip(&late[i]).map(|(a, b)| a + b).collect());
    Ok(ReverberantMixture { x, early, late })
}
