//! A seeded speech-like test signal: voiced syllables built from a jittered
//! glottal pulse train shaped by formant resonators, fricative noise bursts,
//! and pauses between words.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config_err, Result};

/// Second-order resonator with centre `f` and bandwidth `bw`, Hz.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(f: f64, bw: f64, fs: f64) -> Self {
        let r = (-PI * bw / fs).exp();
        let a1 = 2.0 * r * (2.0 * PI * f / fs).cos();
        let a2 = -r * r;
        Self {
            a1,
            a2,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn envelope(n: usize, len: usize) -> f64 {
    let ramp = (len / 5).max(1);
    if n < ramp {
        0.5 * (1.0 - (PI * n as f64 / ramp as f64).cos())
    } else if n + ramp > len {
        0.5 * (1.0 - (PI * (len - n) as f64 / ramp as f64).cos())
    } else {
        1.0
    }
}

/// Generates `duration` seconds of speech-like signal with RMS 0.1.
pub fn synthetic_speech(duration: f64, sample_rate: f64, seed: u64) -> Result<Vec<f64>> {
    if !(duration > 0.0 && sample_rate >= 8000.0) {
        return config_err("duration must be positive and the sample rate at least 8 kHz");
    }
    let total = (duration * sample_rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    let secs = |s: f64| (s * sample_rate) as usize;
    while out.len() < total {
        let syllables = rng.random_range(2..=5);
        let base_f0 = rng.random_range(95.0..210.0);
        for _ in 0..syllables {
            let len = secs(rng.random_range(0.12..0.32));
            if rng.random_bool(0.78) {
                let formants = [
                    (rng.random_range(300.0..850.0), 80.0),
                    (rng.random_range(850.0..2300.0), 120.0),
                    (rng.random_range(2300.0..3300.0), 180.0),
                ];
                let mut res: Vec<Resonator> = formants.iter().map(|&(f, b)| Resonator::new(f, b, sample_rate)).collect();
                let glide = rng.random_range(-0.25..0.25);
                let mut phase = 0.0;
                for n in 0..len {
                    let f0 = base_f0 * (1.0 + glide * n as f64 / len as f64);
                    phase += f0 / sample_rate;
                    let pulse = if phase >= 1.0 {
                        phase -= 1.0 + rng.random_range(-0.01..0.01);
                        1.0
                    } else {
                        0.0
                    };
                    let breath: f64 = StandardNormal.sample(&mut rng);
                    let src = pulse + 0.02 * breath;
                    let y: f64 = res.iter_mut().map(|r| r.step(src)).sum();
                    out.push(y * envelope(n, len));
                }
            } else {
                let mut res = Resonator::new(rng.random_range(3500.0..6500.0), 1500.0, sample_rate);
                let level = rng.random_range(0.1..0.3);
                for n in 0..len {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    out.push(level * res.step(w) * envelope(n, len));
                }
            }
        }
        let pause = secs(rng.random_range(0.08..0.4));
        out.extend(std::iter::repeat_n(0.0, pause));
    }
    out.truncate(total);
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / total as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.1 / rms);
    }
    Ok(out)
}
