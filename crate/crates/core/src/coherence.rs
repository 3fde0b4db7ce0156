//! Recursive cross-spectral estimation, short-time coherence and the
//! closed-form coherence models of plane-wave, diffuse and cylindrically
//! isotropic sound fields.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Error, Result};
use crate::filterbank::Spectrogram;
use crate::grid::TfGrid;

/// Speed of sound used when none is given, m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 343.0;

/// Auto-spectra below this level mark a bin as not yet carrying signal.
pub const PSD_FLOOR: f64 = 1e-12;

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        config_err(format!("forgetting factor must lie in (0, 1), got {lambda}"))
    }
}

/// Recursively averaged auto- and cross-power spectra of a microphone pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectra {
    pub phi11: Vec<f64>,
    pub phi22: Vec<f64>,
    pub phi12: Vec<Complex64>,
    pub lambda: f64,
}

impl CrossSpectra {
    /// Zero-initialized spectra for `bins` frequency bins.
    pub fn new(bins: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            phi11: vec![0.0; bins],
            phi22: vec![0.0; bins],
            phi12: vec![Complex64::new(0.0, 0.0); bins],
            lambda,
        })
    }

    pub fn bins(&self) -> usize {
        self.phi11.len()
    }

    /// Advances the recursion by one frame in place.
    pub fn update(&mut self, x1: &[Complex64], x2: &[Complex64]) -> Result<()> {
        if x1.len() != self.bins() || x2.len() != self.bins() {
            return input_err(format!(
                "frame lengths {}/{} do not match {} bins",
                x1.len(),
                x2.len(),
                self.bins()
            ));
        }
        let a = self.lambda;
        let b = 1.0 - a;
        for k in 0..self.bins() {
            self.phi11[k] = a * self.phi11[k] + b * x1[k].norm_sqr();
            self.phi22[k] = a * self.phi22[k] + b * x2[k].norm_sqr();
            self.phi12[k] = self.phi12[k] * a + x1[k] * x2[k].conj() * b;
        }
        Ok(())
    }
}

/// One step of the recursive average, returning the spectra at frame `l`
/// from those at `l - 1`.
pub fn update_psd(
    prev: &CrossSpectra,
    x1: &[Complex64],
    x2: &[Complex64],
    lambda: f64,
) -> Result<CrossSpectra> {
    check_lambda(lambda)?;
    let mut next = CrossSpectra {
        lambda,
        ..prev.clone()
    };
    next.update(x1, x2)?;
    Ok(next)
}

/// Short-time complex coherence per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceField {
    pub gamma: Vec<Complex64>,
    /// False where an auto-spectrum is still below [`PSD_FLOOR`]; `gamma` is 0 there.
    pub valid: Vec<bool>,
}

/// Normalizes the cross-spectrum by the auto-spectra, clamping |Γ| to 1.
pub fn coherence_from_spectra(phi11: f64, phi22: f64, phi12: Complex64) -> Option<Complex64> {
    if !(phi11 > PSD_FLOOR && phi22 > PSD_FLOOR) {
        return None;
    }
    let g = phi12 / (phi11 * phi22).sqrt();
    let mag = g.norm();
    Some(if mag > 1.0 { g / mag } else { g })
}

pub fn estimate_coherence(cs: &CrossSpectra) -> CoherenceField {
    let (gamma, valid) = (0..cs.bins())
        .map(|k| match coherence_from_spectra(cs.phi11[k], cs.phi22[k], cs.phi12[k]) {
            Some(g) => (g, true),
            None => (Complex64::new(0.0, 0.0), false),
        })
        .unzip();
    CoherenceField { gamma, valid }
}

/// Short-time coherence over all frames of a spectrogram pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTrack {
    pub gamma: TfGrid<Complex64>,
    pub valid: TfGrid<bool>,
}

/// Runs the recursive spectral average over every frame and records the
/// coherence after each update.
pub fn track_coherence(x1: &Spectrogram, x2: &Spectrogram, lambda: f64) -> Result<CoherenceTrack> {
    if !x1.data.same_shape(&x2.data) {
        return input_err("spectrogram shapes differ");
    }
    let (frames, bins) = (x1.frames(), x1.bins());
    let mut cs = CrossSpectra::new(bins, lambda)?;
    let mut gamma = TfGrid::filled(frames, bins, Complex64::new(0.0, 0.0));
    let mut valid = TfGrid::filled(frames, bins, false);
    for l in 0..frames {
        cs.update(x1.frame(l), x2.frame(l))?;
        let field = estimate_coherence(&cs);
        gamma.frame_mut(l).copy_from_slice(&field.gamma);
        valid.frame_mut(l).copy_from_slice(&field.valid);
    }
    Ok(CoherenceTrack { gamma, valid })
}

/// Coherence from spectra averaged uniformly over every frame of two
/// spectrograms (long-term estimate, as opposed to the recursive one).
pub fn average_coherence(x1: &Spectrogram, x2: &Spectrogram) -> Result<Vec<Complex64>> {
    if !x1.data.same_shape(&x2.data) {
        return input_err("spectrogram shapes differ");
    }
    let bins = x1.bins();
    let mut p11 = vec![0.0; bins];
    let mut p22 = vec![0.0; bins];
    let mut p12 = vec![Complex64::new(0.0, 0.0); bins];
    for (r1, r2) in x1.data.rows().zip(x2.data.rows()) {
        for k in 0..bins {
            p11[k] += r1[k].norm_sqr();
            p22[k] += r2[k].norm_sqr();
            p12[k] += r1[k] * r2[k].conj();
        }
    }
    let frames = x1.frames().max(1) as f64;
    Ok((0..bins)
        .map(|k| {
            coherence_from_spectra(p11[k] / frames, p22[k] / frames, p12[k] / frames)
                .unwrap_or(Complex64::new(0.0, 0.0))
        })
        .collect())
}

/// Time difference of arrival `d·sin(θ)/c` of a plane wave from DOA `theta`
/// (radians, 0 = broadside).
pub fn tdoa_from_doa(theta: f64, d: f64, c: f64) -> f64 {
    d * theta.sin() / c
}

/// Coherence of a plane wave with TDOA `dt`: `exp(j·2π·f·dt)` per frequency.
pub fn model_plane_wave(dt: f64, freqs: &[f64]) -> Vec<Complex64> {
    freqs
        .iter()
        .map(|&f| Complex64::from_polar(1.0, 2.0 * PI * f * dt))
        .collect()
}

/// Spherically isotropic (diffuse) field coherence `sin(kd)/(kd)`.
pub fn model_diffuse(d: f64, freqs: &[f64], c: f64) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| {
            let kd = 2.0 * PI * f * d / c;
            if kd == 0.0 {
                1.0
            } else {
                kd.sin() / kd
            }
        })
        .collect()
}

/// Cylindrically isotropic field coherence `J0(kd)`.
pub fn model_2d_isotropic(d: f64, freqs: &[f64], c: f64) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| bessel_j0(2.0 * PI * f * d / c))
        .collect()
}

/// Bessel function of the first kind, order zero.
///
/// Power series below |x| = 12, Hankel asymptotic expansion above; absolute
/// error below 1e-11 everywhere.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = -x * x / 4.0;
        let mut term = 1.0f64;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term.abs() > 1e-18 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        // Hankel P and Q series, truncated at the smallest term.
        let z = 8.0 * x;
        let mut p = 1.0;
        let mut q = 0.0;
        let mut a = 1.0f64;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            let next = a * odd * odd / (k as f64 * z);
            if next >= a {
                break;
            }
            a = next;
            match k % 4 {
                0 => p += a,
                1 => q -= a,
                2 => p -= a,
                _ => q += a,
            }
        }
        let chi = x - FRAC_PI_4;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Mixed-field coherence for a given CDR: `Γs + (Γn − Γs)/(CDR + 1)`.
/// `cdr = ∞` yields `Γs`.
pub fn mix_coherence(cdr: f64, gamma_s: Complex64, gamma_n: f64) -> Complex64 {
    let diffuseness = if cdr.is_infinite() { 0.0 } else { 1.0 / (cdr + 1.0) };
    gamma_s + (Complex64::new(gamma_n, 0.0) - gamma_s) * diffuseness
}

/// Coherence model assumed for the undesired (reverberant) component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Spherically isotropic, `sin(kd)/(kd)`.
    #[default]
    #[serde(rename = "diffuse")]
    Diffuse,
    /// Cylindrically isotropic, `J0(kd)`.
    #[serde(rename = "2d-iso")]
    Isotropic2d,
}

impl NoiseModel {
    pub fn evaluate(self, d: f64, freqs: &[f64], c: f64) -> Vec<f64> {
        match self {
            NoiseModel::Diffuse => model_diffuse(d, freqs, c),
            NoiseModel::Isotropic2d => model_2d_isotropic(d, freqs, c),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseModel::Diffuse => "diffuse",
            NoiseModel::Isotropic2d => "2d-iso",
        })
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffuse" => Ok(NoiseModel::Diffuse),
            "2d-iso" => Ok(NoiseModel::Isotropic2d),
            other => config_err(format!("unknown noise model '{other}' (expected diffuse or 2d-iso)")),
        }
    }
}

/// Per-bin direct-path and noise coherence models for one microphone pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceModels {
    pub freqs: Vec<f64>,
    /// Plane-wave model; absent when the TDOA is unknown.
    pub gamma_s: Option<Vec<Complex64>>,
    pub gamma_n: Vec<f64>,
    pub mic_distance: f64,
    pub sound_speed: f64,
    pub tdoa: Option<f64>,
}

impl CoherenceModels {
    pub fn new(
        freqs: &[f64],
        mic_distance: f64,
        sound_speed: f64,
        tdoa: Option<f64>,
        noise: NoiseModel,
    ) -> Result<Self> {
        if !(mic_distance > 0.0 && mic_distance.is_finite()) {
            return config_err(format!("microphone distance must be positive, got {mic_distance}"));
        }
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return config_err(format!("sound speed must be positive, got {sound_speed}"));
        }
        if let Some(dt) = tdoa {
            if !dt.is_finite() {
                return config_err("TDOA must be finite");
            }
        }
        Ok(Self {
            freqs: freqs.to_vec(),
            gamma_s: tdoa.map(|dt| model_plane_wave(dt, freqs)),
            gamma_n: noise.evaluate(mic_distance, freqs, sound_speed),
            mic_distance,
            sound_speed,
            tdoa,
        })
    }

    /// Direct-path model at bin `k`; 1 (broadside) when the TDOA is unknown.
    pub fn direct(&self, k: usize) -> Complex64 {
        self.gamma_s
            .as_ref()
            .map_or(Complex64::new(1.0, 0.0), |g| g[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent J0 oracle: trapezoidal rule on (1/π)∫₀^π cos(x sin t) dt,
    /// which converges geometrically for this periodic integrand.
    fn j0_quadrature(x: f64) -> f64 {
        let n = 4000;
        let h = PI / n as f64;
        let mut s = 0.5 * (1.0 + 1.0);
        for i in 1..n {
            s += (x * (i as f64 * h).sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn one_step_recursion() {
        let prev = CrossSpectra::new(1, 0.68).unwrap();
        let next = update_psd(&prev, &[c(1.0, 0.0)], &[c(1.0, 0.0)], 0.68).unwrap();
        assert!((next.phi11[0] - 0.32).abs() < 1e-15);
        assert!((next.phi22[0] - 0.32).abs() < 1e-15);
        assert!((next.phi12[0] - c(0.32, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn silence_decays_geometrically() {
        let mut cs = CrossSpectra::new(2, 0.5).unwrap();
        cs.update(&[c(2.0, 0.0), c(0.0, 1.0)], &[c(1.0, 1.0), c(3.0, 0.0)]).unwrap();
        let start = cs.clone();
        let zeros = [c(0.0, 0.0); 2];
        for step in 1..=5 {
            cs.update(&zeros, &zeros).unwrap();
            let f = 0.5f64.powi(step);
            for k in 0..2 {
                assert!((cs.phi11[k] - start.phi11[k] * f).abs() < 1e-15);
                assert!((cs.phi12[k] - start.phi12[k] * f).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn stationary_phase_shift_converges_to_phase_factor() {
        let lambda = 0.9;
        let phase = c(0.6, 0.8);
        let mut cs = CrossSpectra::new(1, lambda).unwrap();
        for _ in 0..400 {
            cs.update(&[c(1.0, 0.0)], &[phase.conj()]).unwrap();
        }
        // Geometric series: phi12 = (1 - λ^n)·phase → phase.
        assert!((cs.phi12[0] - phase).norm() < 1e-12);
        assert!((estimate_coherence(&cs).gamma[0] - phase).norm() < 1e-12);
    }

    #[test]
    fn lambda_outside_unit_interval_is_rejected() {
        for bad in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(CrossSpectra::new(4, bad), Err(Error::Config(_))));
        }
        let cs = CrossSpectra::new(1, 0.5).unwrap();
        assert!(update_psd(&cs, &[c(1.0, 0.0)], &[c(1.0, 0.0)], 1.0).is_err());
    }

    #[test]
    fn coherence_examples() {
        let cs = CrossSpectra {
            phi11: vec![1.0, 4.0, 0.0],
            phi22: vec![1.0, 1.0, 1.0],
            phi12: vec![c(0.5, 0.5), c(2.0, 0.0), c(0.0, 0.0)],
            lambda: 0.5,
        };
        let field = estimate_coherence(&cs);
        assert_eq!(field.gamma[0], c(0.5, 0.5));
        assert!((field.gamma[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(field.valid, vec![true, true, false]);
        assert_eq!(field.gamma[2], c(0.0, 0.0));
    }

    #[test]
    fn identical_channels_have_unit_coherence() {
        let mut cs = CrossSpectra::new(3, 0.68).unwrap();
        let x = [c(0.3, -1.2), c(1e-3, 2e-3), c(5.0, 5.0)];
        for _ in 0..10 {
            cs.update(&x, &x).unwrap();
        }
        for g in estimate_coherence(&cs).gamma {
            assert!((g - c(1.0, 0.0)).norm() < 1e-15);
            assert!(g.norm() <= 1.0);
        }
    }

    #[test]
    fn tdoa_examples() {
        assert_eq!(tdoa_from_doa(0.0, 0.08, 343.0), 0.0);
        let end = tdoa_from_doa(PI / 2.0, 0.08, 343.0);
        assert!((end - 2.3324e-4).abs() < 1e-8);
        assert_eq!(tdoa_from_doa(-PI / 2.0, 0.08, 343.0), -end);
    }

    #[test]
    fn plane_wave_examples() {
        let freqs = [0.0, 250.0, 1000.0, 7999.0];
        assert!(model_plane_wave(0.0, &freqs).iter().all(|g| *g == c(1.0, 0.0)));
        let g = model_plane_wave(1.0 / 5000.0, &[1000.0])[0];
        assert!((g.arg() - 2.0 * PI / 5.0).abs() < 1e-12);
        let pos = model_plane_wave(1.3e-4, &freqs);
        let neg = model_plane_wave(-1.3e-4, &freqs);
        for (p, n) in pos.iter().zip(&neg) {
            assert!((p.conj() - n).norm() < 1e-15);
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diffuse_examples() {
        let d = 0.08;
        let m = model_diffuse(d, &[0.0, 1e-9, 343.0 / (2.0 * d), 1000.0], 343.0);
        assert_eq!(m[0], 1.0);
        assert!((m[1] - 1.0).abs() < 1e-12);
        assert!(m[2].abs() < 1e-15);
        assert!((m[3] - 0.6785).abs() < 1e-4);
    }

    #[test]
    fn j0_matches_quadrature_oracle() {
        let mut x = 0.0;
        while x < 30.0 {
            assert!((bessel_j0(x) - j0_quadrature(x)).abs() < 1e-9, "x = {x}");
            x += 0.173;
        }
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.404825557695773).abs() < 1e-6);
        assert_eq!(bessel_j0(-3.1), bessel_j0(3.1));
    }

    #[test]
    fn isotropic_models_are_even_and_unit_at_dc() {
        let freqs: Vec<f64> = (0..50).map(|i| i as f64 * 160.0).collect();
        let neg: Vec<f64> = freqs.iter().map(|f| -f).collect();
        for model in [NoiseModel::Diffuse, NoiseModel::Isotropic2d] {
            let a = model.evaluate(0.08, &freqs, 343.0);
            let b = model.evaluate(0.08, &neg, 343.0);
            assert_eq!(a[0], 1.0);
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-15));
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
        let small = [1.0];
        assert!((model_diffuse(0.08, &small, 343.0)[0] - 1.0).abs() < 1e-6);
        assert!((model_2d_isotropic(0.08, &small, 343.0)[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mix_examples() {
        let gs = c(0.3, 0.9);
        assert_eq!(mix_coherence(0.0, gs, 0.4), c(0.4, 0.0));
        assert_eq!(mix_coherence(f64::INFINITY, gs, 0.4), gs);
        assert_eq!(mix_coherence(1.0, c(1.0, 0.0), 0.0), c(0.5, 0.0));
    }

    #[test]
    fn noise_model_names_round_trip() {
        for m in [NoiseModel::Diffuse, NoiseModel::Isotropic2d] {
            assert_eq!(m.to_string().parse::<NoiseModel>().unwrap(), m);
        }
        assert!("spherical".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn models_reject_bad_geometry() {
        assert!(CoherenceModels::new(&[100.0], 0.0, 343.0, None, NoiseModel::Diffuse).is_err());
        assert!(CoherenceModels::new(&[100.0], 0.08, -1.0, None, NoiseModel::Diffuse).is_err());
        let m = CoherenceModels::new(&[0.0, 100.0], 0.08, 343.0, None, NoiseModel::Diffuse).unwrap();
        assert_eq!(m.direct(1), c(1.0, 0.0));
    }

    #[test]
    fn recursive_estimate_converges_in_mean() {
        // x1 = s + n1, x2 = s + n2 with unit-power white components: Γ = 0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let len = 160_000;
        let s: Vec<f64> = (0..len).map(|_| draw()).collect();
        let x1: Vec<f64> = s.iter().map(|v| v + draw()).collect();
        let x2: Vec<f64> = s.iter().map(|v| v + draw()).collect();
        let fb = crate::Filterbank::new(Default::default()).unwrap();
        let s1 = fb.analyze(&x1).unwrap();
        let s2 = fb.analyze(&x2).unwrap();
        let mut cs = CrossSpectra::new(fb.bins(), 0.95).unwrap();
        let mut acc = vec![Complex64::new(0.0, 0.0); fb.bins()];
        let mut n = 0.0;
        for l in 0..s1.frames() {
            cs.update(s1.frame(l), s2.frame(l)).unwrap();
            if l >= 50 {
                for (a, g) in acc.iter_mut().zip(estimate_coherence(&cs).gamma) {
                    *a += g;
                }
                n += 1.0;
            }
        }
        let errors: Vec<f64> = acc[1..256].iter().map(|a| (a / n - c(0.5, 0.0)).norm()).collect();
        let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
        assert!(rms < 0.05, "rms deviation {rms}");
        let grand: Complex64 = acc[1..256].iter().sum::<Complex64>() / (255.0 * n);
        assert!((grand - c(0.5, 0.0)).norm() < 0.05, "{grand}");
        let long = average_coherence(&s1, &s2).unwrap();
        let long_rms = (long[1..256].iter().map(|g| (g - c(0.5, 0.0)).norm_sqr()).sum::<f64>() / 255.0).sqrt();
        assert!(long_rms < 0.05, "long-term rms deviation {long_rms}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn complex() -> impl Strategy<Value = Complex64> {
            (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| Complex64::new(a, b))
        }

        proptest! {
            #[test]
            fn coherence_magnitude_never_exceeds_one(
                frames in prop::collection::vec((complex(), complex()), 1..30),
                lambda in 0.01f64..0.99,
            ) {
                let mut cs = CrossSpectra::new(1, lambda).unwrap();
                for (a, b) in frames {
                    cs.update(&[a], &[b]).unwrap();
                    prop_assert!(cs.phi11[0] >= 0.0 && cs.phi22[0] >= 0.0);
                    prop_assert!(cs.phi12[0].norm_sqr() <= cs.phi11[0] * cs.phi22[0] * (1.0 + 1e-12));
                    prop_assert!(estimate_coherence(&cs).gamma[0].norm() <= 1.0 + 1e-12);
                }
            }

            #[test]
            fn mix_lies_on_segment_with_diffuseness_coordinate(
                cdr in 0.0f64..1e4,
                phase in -PI..PI,
                gn in -0.3f64..1.0,
            ) {
                let gs = Complex64::from_polar(1.0, phase);
                let gx = mix_coherence(cdr, gs, gn);
                let d = 1.0 / (cdr + 1.0);
                let expected = gs * (1.0 - d) + Complex64::new(gn, 0.0) * d;
                prop_assert!((gx - expected).norm() < 1e-12);
                // Collinearity: (Γx − Γs) is a real multiple of (Γn − Γs).
                let ratio = (gx - gs) / (Complex64::new(gn, 0.0) - gs);
                prop_assert!(ratio.im.abs() < 1e-9);
                prop_assert!((ratio.re - d).abs() < 1e-9);
            }
        }
    }
}
