//! Ground-truth generation: image-method room impulse responses, isotropic
//! noise fields, plane-wave mixtures at a known CDR, reverberant mixtures
//! with separate early/late components, and a speech-like test signal.

pub mod delay;
pub mod field;
pub mod mixture;
pub mod room;
pub mod speech;

pub use field::{directions, render_plane_waves, synthesize_isotropic, FieldKind};
pub use mixture::{
    convolve, make_mixture, reverberant_mixture, third_octave_bands, BandRatio, CdrTarget, Mixture, MixtureSpec,
    ReverberantMixture,
};
pub use room::{simulate_rir, simulate_rirs, split_rir, ImpulseResponse, RoomSpec, DEFAULT_TE};
pub use speech::synthetic_speech;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Unit-variance white Gaussian noise, deterministic given `seed`.
pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `count` microphones on a line parallel to the x axis with spacing `d`,
/// centred at `center`.
pub fn linear_array(center: [f64; 3], count: usize, d: f64) -> Vec<[f64; 3]> {
    let offset = 0.5 * (count as f64 - 1.0) * d;
    (0..count)
        .map(|i| [center[0] - offset + i as f64 * d, center[1], center[2]])
        .collect()
}
