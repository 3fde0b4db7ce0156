//! Evaluation measures: early-to-late power ratio, diffuseness mean squared
//! error, frequency-weighted segmental SNR and reverberation time from the
//! energy decay curve.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coherence::check_lambda;
use crate::error::{config_err, input_err, Error, Result};
use crate::estimators::diffuseness;
use crate::grid::TfGrid;
use crate::simulator::ImpulseResponse;

/// A bin is usable when the late power is at least this fraction of the
/// total power.
pub const LATE_FLOOR: f64 = 1e-10;

/// Per-bin early-to-late ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ElrField {
    /// Ratio per bin, linear power scale.
    pub ratio: TfGrid<f64>,
    pub valid: TfGrid<bool>,
}

impl ElrField {
    pub fn db(&self, l: usize, k: usize) -> f64 {
        10.0 * self.ratio[(l, k)].log10()
    }
}

fn check_shapes<A, B>(a: &TfGrid<A>, b: &TfGrid<B>) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        input_err(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.frames(),
            a.bins(),
            b.frames(),
            b.bins()
        ))
    }
}

/// Squared magnitudes of a complex grid.
pub fn power_grid(x: &TfGrid<Complex64>) -> TfGrid<f64> {
    x.map(|v| v.norm_sqr())
}

/// Per-bin ELR from early and late power grids, both smoothed with the
/// recursive average of forgetting factor `lambda`. Bins whose late power is
/// below [`LATE_FLOOR`] of the total, or whose total power is below
/// [`LATE_FLOOR`] of the mean total power, are flagged invalid.
pub fn elr_field(early: &TfGrid<f64>, late: &TfGrid<f64>, lambda: f64) -> Result<ElrField> {
    check_shapes(early, late)?;
    check_lambda(lambda)?;
    let (frames, bins) = (early.frames(), early.bins());
    let mut pe = vec![0.0; bins];
    let mut pl = vec![0.0; bins];
    let mut smoothed_e = TfGrid::filled(frames, bins, 0.0);
    let mut smoothed_l = TfGrid::filled(frames, bins, 0.0);
    for l in 0..frames {
        for k in 0..bins {
            pe[k] = lambda * pe[k] + (1.0 - lambda) * early[(l, k)];
            pl[k] = lambda * pl[k] + (1.0 - lambda) * late[(l, k)];
        }
        smoothed_e.frame_mut(l).copy_from_slice(&pe);
        smoothed_l.frame_mut(l).copy_from_slice(&pl);
    }
    let n = (frames * bins).max(1) as f64;
    let mean_total = smoothed_e
        .as_slice()
        .iter()
        .zip(smoothed_l.as_slice())
        .map(|(e, l)| e + l)
        .sum::<f64>()
        / n;
    let mut ratio = TfGrid::filled(frames, bins, f64::INFINITY);
    let mut valid = TfGrid::filled(frames, bins, false);
    for l in 0..frames {
        for k in 0..bins {
            let (e, lt) = (smoothed_e[(l, k)], smoothed_l[(l, k)]);
            let total = e + lt;
            if total > 0.0 && lt >= LATE_FLOOR * total && total >= LATE_FLOOR * mean_total {
                ratio[(l, k)] = e / lt;
                valid[(l, k)] = true;
            }
        }
    }
    Ok(ElrField { ratio, valid })
}

/// Time-averaged ELR per frequency bin and its mean over frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElrSummary {
    /// `10·log10(Σ_l early / Σ_l late)` per bin; `None` where the late power vanishes.
    pub per_bin_db: Vec<Option<f64>>,
    /// Mean of the finite per-bin values, dB.
    pub mean_db: f64,
}

/// Time- and frequency-averaged ELR over bins `bins` (use `..` for all).
pub fn elr_time_averaged(
    early: &TfGrid<f64>,
    late: &TfGrid<f64>,
    bins: impl std::ops::RangeBounds<usize>,
) -> Result<ElrSummary> {
    check_shapes(early, late)?;
    let nb = early.bins();
    let mut se = vec![0.0; nb];
    let mut sl = vec![0.0; nb];
    for (re, rl) in early.rows().zip(late.rows()) {
        for k in 0..nb {
            se[k] += re[k];
            sl[k] += rl[k];
        }
    }
    let total: f64 = se.iter().chain(&sl).sum();
    let per_bin_db: Vec<Option<f64>> = (0..nb)
        .map(|k| {
            let t = se[k] + sl[k];
            (sl[k] > 0.0 && sl[k] >= LATE_FLOOR * t && t >= LATE_FLOOR * total / nb as f64)
                .then(|| 10.0 * (se[k] / sl[k]).log10())
        })
        .collect();
    let used: Vec<f64> = per_bin_db
        .iter()
        .enumerate()
        .filter(|(k, _)| bins.contains(k))
        .filter_map(|(_, v)| *v)
        .collect();
    if used.is_empty() {
        return Err(Error::Measurement("no bin has usable late power".into()));
    }
    Ok(ElrSummary {
        mean_db: used.iter().sum::<f64>() / used.len() as f64,
        per_bin_db,
    })
}

/// Mean squared difference of the diffuseness `1/(CDR+1)` of two CDR
/// fields over bins valid in both.
pub fn diffuseness_mse(
    true_cdr: &TfGrid<f64>,
    true_valid: &TfGrid<bool>,
    est_cdr: &TfGrid<f64>,
    est_valid: &TfGrid<bool>,
) -> Result<f64> {
    check_shapes(true_cdr, est_cdr)?;
    check_shapes(true_cdr, true_valid)?;
    check_shapes(true_cdr, est_valid)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..true_cdr.as_slice().len() {
        if true_valid.as_slice()[i] && est_valid.as_slice()[i] {
            let d = diffuseness(true_cdr.as_slice()[i]) - diffuseness(est_cdr.as_slice()[i]);
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Measurement("no bin is valid in both fields".into()));
    }
    Ok(sum / n as f64)
}

/// Parameters of the frequency-weighted segmental SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FwSegSnrConfig {
    pub sample_rate: f64,
    pub segment_s: f64,
    pub hop_s: f64,
    pub fft_size: usize,
    pub bands: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    /// Band weight is the reference band magnitude raised to this power.
    pub weight_exponent: f64,
    pub clip_lo_db: f64,
    pub clip_hi_db: f64,
    /// Segments this far below the loudest reference segment are skipped, dB.
    pub silence_db: f64,
}

impl Default for FwSegSnrConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000.0,
            segment_s: 0.025,
            hop_s: 0.010,
            fft_size: 512,
            bands: 23,
            f_lo: 125.0,
            f_hi: 8000.0,
            weight_exponent: 0.2,
            clip_lo_db: -10.0,
            clip_hi_db: 35.0,
            silence_db: 60.0,
        }
    }
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided spectrum of `cfg.fft_size`.
fn mel_filters(cfg: &FwSegSnrConfig) -> Vec<Vec<f64>> {
    let nb = cfg.fft_size / 2 + 1;
    let df = cfg.sample_rate / cfg.fft_size as f64;
    let (m_lo, m_hi) = (mel(cfg.f_lo), mel(cfg.f_hi));
    let edges: Vec<f64> = (0..cfg.bands + 2)
        .map(|i| mel_inv(m_lo + (m_hi - m_lo) * i as f64 / (cfg.bands + 1) as f64))
        .collect();
    (0..cfg.bands)
        .map(|b| {
            let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..nb)
                .map(|k| {
                    let f = k as f64 * df;
                    if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Frequency-weighted segmental SNR of `test` against `reference`, dB.
///
/// Per segment and mel band, the SNR is `10·log10(R²/(R − T)²)` on band
/// magnitudes, clipped to the configured range, and averaged with weights
/// `R^weight_exponent`; segment values are averaged with equal weight.
pub fn fwsegsnr_with(reference: &[f64], test: &[f64], cfg: &FwSegSnrConfig) -> Result<f64> {
    if reference.len() != test.len() {
        return input_err(format!("lengths differ: {} vs {}", reference.len(), test.len()));
    }
    let seg = (cfg.segment_s * cfg.sample_rate).round() as usize;
    let hop = (cfg.hop_s * cfg.sample_rate).round() as usize;
    if seg == 0 || hop == 0 || seg > cfg.fft_size || cfg.bands == 0 || cfg.clip_lo_db >= cfg.clip_hi_db {
        return config_err("invalid segment, FFT or band configuration");
    }
    if reference.len() < seg {
        return input_err("signal shorter than one segment");
    }
    let window: Vec<f64> = (0..seg)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / seg as f64).cos())
        .collect();
    let filters = mel_filters(cfg);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
    let nb = cfg.fft_size / 2 + 1;
    let spectrum = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        for (b, (v, w)) in buf.iter_mut().zip(x.iter().zip(&window)) {
            b.re = v * w;
        }
        fft.process(&mut buf);
        buf[..nb].iter().map(|v| v.norm()).collect::<Vec<f64>>()
    };
    let starts: Vec<usize> = (0..=(reference.len() - seg) / hop).map(|i| i * hop).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| reference[s..s + seg].iter().map(|v| v * v).sum())
        .collect();
    let loudest = energies.iter().cloned().fold(0.0, f64::max);
    if loudest == 0.0 {
        return Err(Error::Measurement("reference is silent".into()));
    }
    let threshold = loudest * 10f64.powf(-cfg.silence_db / 10.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for (&s, &e) in starts.iter().zip(&energies) {
        if e < threshold {
            continue;
        }
        let r = spectrum(&reference[s..s + seg]);
        let t = spectrum(&test[s..s + seg]);
        let mut num = 0.0;
        let mut den = 0.0;
        for f in &filters {
            let rb: f64 = f.iter().zip(&r).map(|(w, v)| w * v).sum();
            let tb: f64 = f.iter().zip(&t).map(|(w, v)| w * v).sum();
            let w = rb.powf(cfg.weight_exponent);
            let err = (rb - tb) * (rb - tb);
            let snr = if err == 0.0 {
                cfg.clip_hi_db
            } else if rb == 0.0 {
                cfg.clip_lo_db
            } else {
                (10.0 * (rb * rb / err).log10()).clamp(cfg.clip_lo_db, cfg.clip_hi_db)
            };
            num += w * snr;
            den += w;
        }
        if den > 0.0 {
            total += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Measurement("no active segment".into()));
    }
    Ok(total / count as f64)
}

/// [`fwsegsnr_with`] using the default configuration.
pub fn fwsegsnr(reference: &[f64], test: &[f64]) -> Result<f64> {
    fwsegsnr_with(reference, test, &FwSegSnrConfig::default())
}

/// Schroeder backward-integrated energy decay curve, dB relative to total.
pub fn energy_decay_curve(samples: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = samples
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter().map(|e| 10.0 * (e / total).log10()).collect()
}

/// Reverberation time from a least-squares line through the energy decay
/// curve between −5 and −25 dB, extrapolated to −60 dB.
pub fn t60_from_edc(rir: &ImpulseResponse) -> Result<f64> {
    if rir.energy() == 0.0 {
        return Err(Error::Measurement("impulse response has no energy".into()));
    }
    let edc = energy_decay_curve(&rir.samples);
    if !edc.iter().any(|v| v.is_finite() && *v <= -30.0) {
        return Err(Error::Measurement("energy decay curve spans less than 30 dB".into()));
    }
    let pts: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .filter(|(_, v)| (-25.0..=-5.0).contains(*v))
        .map(|(i, v)| (i as f64 / rir.sample_rate, *v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Measurement("too few samples in the -5..-25 dB range".into()));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::Measurement("energy decay curve does not decay".into()));
    }
    Ok(-60.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn grid(frames: usize, bins: usize, f: impl Fn(usize, usize) -> f64) -> TfGrid<f64> {
        let mut g = TfGrid::filled(frames, bins, 0.0);
        for l in 0..frames {
            for k in 0..bins {
                g[(l, k)] = f(l, k);
            }
        }
        g
    }

    #[test]
    fn elr_examples() {
        let late = grid(20, 4, |l, k| 1.0 + (l * k) as f64);
        let early = late.map(|v| 10.0 * v);
        let field = elr_field(&early, &late, 0.68).unwrap();
        for l in 0..20 {
            for k in 0..4 {
                assert!(field.valid[(l, k)]);
                assert!((field.db(l, k) - 10.0).abs() < 1e-9);
            }
        }
        let s = elr_time_averaged(&early, &late, ..).unwrap();
        assert!((s.mean_db - 10.0).abs() < 1e-9);

        let zero = grid(20, 4, |_, _| 0.0);
        let field = elr_field(&early, &zero, 0.68).unwrap();
        assert!(field.valid.as_slice().iter().all(|v| !v));
        assert!(elr_time_averaged(&early, &zero, ..).is_err());
        assert!(elr_field(&early, &grid(3, 4, |_, _| 1.0), 0.68).is_err());
    }

    #[test]
    fn elr_is_scale_invariant() {
        let early = grid(30, 5, |l, k| ((l + 1) * (k + 2)) as f64);
        let late = grid(30, 5, |l, k| ((l + 3) as f64).sqrt() + k as f64);
        let a = elr_time_averaged(&early, &late, ..).unwrap();
        let b = elr_time_averaged(&early.map(|v| v * 7.0), &late.map(|v| v * 7.0), ..).unwrap();
        assert!((a.mean_db - b.mean_db).abs() < 1e-12);
        let fa = elr_field(&early, &late, 0.5).unwrap();
        let fb = elr_field(&early.map(|v| v * 3.0), &late.map(|v| v * 3.0), 0.5).unwrap();
        for (x, y) in fa.ratio.as_slice().iter().zip(fb.ratio.as_slice()) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn mse_examples() {
        let t = grid(3, 3, |l, k| (l + k) as f64);
        let v = TfGrid::filled(3, 3, true);
        assert_eq!(diffuseness_mse(&t, &v, &t, &v).unwrap(), 0.0);
        let zero = grid(3, 3, |_, _| 0.0);
        let inf = grid(3, 3, |_, _| f64::INFINITY);
        assert_eq!(diffuseness_mse(&zero, &v, &inf, &v).unwrap(), 1.0);
        let none = TfGrid::filled(3, 3, false);
        assert!(diffuseness_mse(&zero, &v, &inf, &none).is_err());
    }

    #[test]
    fn fwsegsnr_identity_hits_ceiling() {
        let x = white(1, 16000);
        assert_eq!(fwsegsnr(&x, &x).unwrap(), 35.0);
    }

    #[test]
    fn fwsegsnr_decreases_with_noise() {
        let x = white(2, 16000);
        let n = white(3, 16000);
        let values: Vec<f64> = [0.1, 0.5, 1.0]
            .iter()
            .map(|g| {
                let y: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a + g * b).collect();
                fwsegsnr(&x, &y).unwrap()
            })
            .collect();
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
        assert!(values[2] > -10.0 && values[2] < 35.0);
    }

    #[test]
    fn fwsegsnr_skips_silence_and_checks_lengths() {
        let mut x = white(4, 8000);
        x.extend(vec![0.0; 8000]);
        let mut y = x.clone();
        for v in &mut y[8400..] {
            *v = 1.0;
        }
        assert_eq!(fwsegsnr(&x, &y).unwrap(), 35.0);
        assert!(fwsegsnr(&x, &y[..100]).is_err());
        assert!(fwsegsnr(&[0.0; 1000], &[0.0; 1000]).is_err());
    }

    #[test]
    fn mel_filters_cover_band() {
        let f = mel_filters(&FwSegSnrConfig::default());
        assert_eq!(f.len(), 23);
        assert!(f.iter().all(|b| b.iter().any(|w| *w > 0.0)));
    }

    #[test]
    fn t60_of_exponential_decay() {
        let fs = 16000.0;
        let t60 = 0.5;
        // Amplitude envelope exp(-6.91 t / T60) gives 60 dB energy decay at T60.
        let n = white(5, (1.2 * fs) as usize);
        let h: Vec<f64> = n
            .iter()
            .enumerate()
            .map(|(i, v)| v * (-3.0 * 10f64.ln() * i as f64 / fs / t60).exp())
            .collect();
        let est = t60_from_edc(&ImpulseResponse::new(h, fs)).unwrap();
        assert!((est - t60).abs() < 0.05 * t60, "{est}");
    }

    #[test]
    fn t60_of_impulse_is_an_error() {
        let mut h = vec![0.0; 1000];
        h[10] = 1.0;
        assert!(matches!(t60_from_edc(&ImpulseResponse::new(h, 16000.0)), Err(Error::Measurement(_))));
        assert!(t60_from_edc(&ImpulseResponse::new(vec![0.0; 10], 16000.0)).is_err());
    }

    #[test]
    fn t60_of_simulated_room_matches_eyring() {
        use crate::simulator::{simulate_rir, RoomSpec};
        let room = RoomSpec {
            dims: [4.0, 3.0, 2.5],
            beta: [0.9; 6],
            source: [2.9, 2.2, 1.4],
            mics: vec![[1.96, 1.5, 1.2]],
            sample_rate: 16000.0,
            sound_speed: 343.0,
        };
        let rir = simulate_rir(&room, 0, 60.0).unwrap();
        let est = t60_from_edc(&rir).unwrap();
        let eyring = room.eyring_t60();
        assert!((est - eyring).abs() <= 0.2 * eyring, "{est} vs {eyring}");
    }

    #[test]
    fn edc_starts_at_zero_db_and_decreases() {
        let e = energy_decay_curve(&white(6, 500));
        assert_eq!(e[0], 0.0);
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
    }
}
