//! Isotropic noise fields rendered as sums of uncorrelated white-noise plane
//! waves.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};

/// Minimum number of plane waves for an isotropic field.
pub const MIN_SOURCES: usize = 16;

/// Default number of plane waves.
pub const DEFAULT_SOURCES: usize = 360;

/// Spatial distribution of the plane-wave directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Uniform over the sphere; coherence `sin(kd)/(kd)`.
    Spherical,
    /// Uniform over the horizontal circle; coherence `J0(kd)`.
    Cylindrical,
}

/// Unit vectors pointing towards the plane-wave sources.
pub fn directions(kind: FieldKind, count: usize) -> Vec<[f64; 3]> {
    match kind {
        FieldKind::Spherical => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    [r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        FieldKind::Cylindrical => (0..count)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / count as f64;
                [phi.cos(), phi.sin(), 0.0]
            })
            .collect(),
    }
}

/// Renders independent white Gaussian noise plane waves arriving from the
/// given directions at each microphone. Delays are applied exactly in the
/// frequency domain (circularly over the signal length). Each channel has
/// unit expected power.
pub fn render_plane_waves(
    dirs: &[[f64; 3]],
    mics: &[[f64; 3]],
    len: usize,
    sample_rate: f64,
    sound_speed: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if dirs.is_empty() || mics.is_empty() {
        return input_err("need at least one direction and one microphone");
    }
    if len < 2 {
        return input_err("signal length must be at least 2 samples");
    }
    let half = len / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); half + 1]; mics.len()];
    // A unit-variance white sequence of length n has E|X_k|² = n.
    let gain = (len as f64 / dirs.len() as f64).sqrt();
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    for dir in dirs {
        let lead: Vec<f64> = mics
            .iter()
            .map(|p| (p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2]) / sound_speed)
            .collect();
        for k in 0..=half {
            let real_bin = k == 0 || (len.is_multiple_of(2) && k == half);
            let s = if real_bin {
                Complex64::new(draw() * gain, 0.0)
            } else {
                Complex64::new(draw(), draw()) * (gain * std::f64::consts::FRAC_1_SQRT_2)
            };
            let w = 2.0 * PI * k as f64 * sample_rate / len as f64;
            for (spec, &tau) in spectra.iter_mut().zip(&lead) {
                // A microphone displaced towards the source receives the wave earlier.
                spec[k] += if real_bin {
                    s * (w * tau).cos()
                } else {
                    s * Complex64::from_polar(1.0, w * tau)
                };
            }
        }
    }
    let ifft = FftPlanner::new().plan_fft_inverse(len);
    Ok(spectra
        .into_iter()
        .map(|spec| {
            let mut full = vec![Complex64::new(0.0, 0.0); len];
            full[..=half].copy_from_slice(&spec);
            for k in 1..len - half {
                full[len - k] = spec[k].conj();
            }
            ifft.process(&mut full);
            full.iter().map(|v| v.re / len as f64).collect()
        })
        .collect())
}

/// Spherically or cylindrically isotropic noise at the microphones.
pub fn synthesize_isotropic(
    kind: FieldKind,
    num_sources: usize,
    mics: &[[f64; 3]],
    duration: f64,
    sample_rate: f64,
    sound_speed: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if num_sources < MIN_SOURCES {
        return input_err(format!(
            "an isotropic field needs at least {MIN_SOURCES} sources, got {num_sources}"
        ));
    }
    if !(duration > 0.0 && sample_rate > 0.0) {
        return config_err("duration and sample rate must be positive");
    }
    let len = (duration * sample_rate).round() as usize;
    render_plane_waves(&directions(kind, num_sources), mics, len, sample_rate, sound_speed, seed)
}
