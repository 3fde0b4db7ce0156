//! Image-source room impulse responses for rectangular rooms and the
//! early/late split of an impulse response.

use serde::{Deserialize, Serialize};

use super::delay::{add_impulse, HALF_TAPS};
use crate::coherence::DEFAULT_SOUND_SPEED;
use crate::error::{config_err, input_err, Result};

/// Default early/late split time, seconds.
pub const DEFAULT_TE: f64 = 0.05;

/// Default dynamic range of the image summation, dB below the direct path.
pub const DEFAULT_STOP_THRESHOLD_DB: f64 = 60.0;

/// Rectangular room with frequency-independent surface reflectivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Room size along x, y, z, meters.
    pub dims: [f64; 3],
    /// Reflection coefficients of the surfaces x=0, x=Lx, y=0, y=Ly, z=0 (floor), z=Lz (ceiling).
    pub beta: [f64; 6],
    pub source: [f64; 3],
    pub mics: Vec<[f64; 3]>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

fn default_sample_rate() -> f64 {
    16000.0
}

fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

impl RoomSpec {
    /// Reflectivities for walls (x and y surfaces) and floor/ceiling.
    pub fn walls_floor_ceiling(walls: f64, floor_ceiling: f64) -> [f64; 6] {
        [walls, walls, walls, walls, floor_ceiling, floor_ceiling]
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return config_err(format!("room dimensions must be positive, got {:?}", self.dims));
        }
        if self.beta.iter().any(|b| !(0.0..1.0).contains(b)) {
            return config_err(format!("reflection coefficients must lie in [0, 1), got {:?}", self.beta));
        }
        if !(self.sample_rate > 0.0 && self.sound_speed > 0.0) {
            return config_err("sample rate and sound speed must be positive");
        }
        if self.mics.is_empty() {
            return config_err("room needs at least one microphone");
        }
        let inside = |p: &[f64; 3]| p.iter().zip(&self.dims).all(|(x, d)| *x > 0.0 && x < d);
        if !inside(&self.source) {
            return input_err(format!("source {:?} is not inside the room", self.source));
        }
        if let Some(m) = self.mics.iter().find(|m| !inside(m)) {
            return input_err(format!("microphone {m:?} is not inside the room"));
        }
        Ok(())
    }

    /// Eyring reverberation time with the mean absorption `1 − β²`.
    pub fn eyring_t60(&self) -> f64 {
        let [lx, ly, lz] = self.dims;
        let areas = [ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly];
        let total: f64 = areas.iter().sum();
        let alpha = areas
            .iter()
            .zip(&self.beta)
            .map(|(s, b)| s * (1.0 - b * b))
            .sum::<f64>()
            / total;
        0.161 * lx * ly * lz / (-total * (1.0 - alpha).ln())
    }
}

/// A sampled impulse response with its early/late split time.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Split time after the direct-path onset, seconds.
    pub te: f64,
}

impl ImpulseResponse {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
            te: DEFAULT_TE,
        }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    /// Index of the largest-magnitude sample, taken as the direct-path onset.
    pub fn onset(&self) -> usize {
        self.samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i)
    }
}

/// One axis of the image lattice: offset from the microphone and the
/// product of reflection coefficients along that axis.
fn axis_images(src: f64, mic: f64, len: f64, b0: f64, b1: f64, floor: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for u in [0i64, 1] {
        let sign = (1 - 2 * u) as f64;
        for dir in [1i64, -1] {
            let mut n = if dir == 1 { 0 } else { -1 };
            loop {
                let d = sign * src + 2.0 * n as f64 * len - mic;
                let refl0 = (n - u).unsigned_abs() as i32;
                let refl1 = n.unsigned_abs() as i32;
                let amp = b0.powi(refl0) * b1.powi(refl1);
                // The axis offset bounds the distance from below and the other
                // axes contribute a factor of at most one.
                if amp / d.abs().max(1e-9) < floor || (amp == 0.0 && refl0 + refl1 > 0) {
                    break;
                }
                out.push((d, amp));
                n += dir;
            }
        }
    }
    out
}

/// Image-method impulse response from the room source to microphone
/// `mic_index`. Images more than `stop_threshold_db` below the direct path
/// are omitted; the response ends after the last retained image plus the
/// interpolation kernel and an early/late split margin.
pub fn simulate_rir(room: &RoomSpec, mic_index: usize, stop_threshold_db: f64) -> Result<ImpulseResponse> {
    room.validate()?;
    let mic = *room
        .mics
        .get(mic_index)
        .ok_or_else(|| crate::Error::Input(format!("no microphone with index {mic_index}")))?;
    if !(stop_threshold_db > 0.0) {
        return config_err("stop threshold must be positive");
    }
    let src = room.source;
    let direct: f64 = src.iter().zip(&mic).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    // Amplitudes are compared without the common 1/(4π) factor.
    let floor = 10f64.powf(-stop_threshold_db / 20.0) / direct.max(1e-9);
    let ax = axis_images(src[0], mic[0], room.dims[0], room.beta[0], room.beta[1], floor);
    let ay = axis_images(src[1], mic[1], room.dims[1], room.beta[2], room.beta[3], floor);
    let az = axis_images(src[2], mic[2], room.dims[2], room.beta[4], room.beta[5], floor);

    let scale = room.sample_rate / room.sound_speed;
    let mut images = Vec::new();
    for &(dx, bx) in &ax {
        for &(dy, by) in &ay {
            let bxy = bx * by;
            if bxy / dx.abs().max(dy.abs()).max(1e-9) < floor {
                continue;
            }
            for &(dz, bz) in &az {
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                let amp = bxy * bz / r;
                if amp >= floor {
                    images.push((r * scale, amp / (4.0 * std::f64::consts::PI)));
                }
            }
        }
    }
    images.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let last = images.last().map_or(0.0, |i| i.0);
    let len = last.ceil() as usize + HALF_TAPS as usize + 1 + (DEFAULT_TE * room.sample_rate).round() as usize;
    let mut samples = vec![0.0; len];
    for (delay, amp) in images {
        add_impulse(&mut samples, delay, amp);
    }
    Ok(ImpulseResponse::new(samples, room.sample_rate))
}

/// Impulse responses for every microphone of the room.
pub fn simulate_rirs(room: &RoomSpec, stop_threshold_db: f64) -> Result<Vec<ImpulseResponse>> {
    (0..room.mics.len()).map(|m| simulate_rir(room, m, stop_threshold_db)).collect()
}

/// Splits at `round(te·fs)` samples after the onset. The early part holds
/// the onset sample and everything before the split; both parts keep the
/// full length, so `early + late` reproduces the input exactly.
pub fn split_rir(rir: &ImpulseResponse, te: f64) -> Result<(ImpulseResponse, ImpulseResponse)> {
    if !(te >= 0.0 && te.is_finite()) {
        return config_err(format!("split time must be >= 0, got {te}"));
    }
    let split = (rir.onset() + (te * rir.sample_rate).round() as usize + 1).min(rir.samples.len());
    let mut early = rir.samples.clone();
    let mut late = vec![0.0; rir.samples.len()];
    late[split..].copy_from_slice(&rir.samples[split..]);
    early[split..].iter_mut().for_each(|v| *v = 0.0);
    let make = |samples| ImpulseResponse {
        samples,
        sample_rate: rir.sample_rate,
        te,
    };
    Ok((make(early), make(late)))
}
