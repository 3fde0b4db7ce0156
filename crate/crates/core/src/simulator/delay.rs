//! Fractional-delay interpolation with a Hann-windowed sinc kernel.

use std::f64::consts::PI;

/// Number of taps on each side of the kernel centre.
pub const HALF_TAPS: i64 = 40;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kernel value at offset `t` samples from the (fractional) impulse position.
pub fn kernel(t: f64) -> f64 {
    let width = (HALF_TAPS + 1) as f64;
    if t.abs() >= width {
        0.0
    } else {
        0.5 * (1.0 + (PI * t / width).cos()) * sinc(t)
    }
}

/// Adds `amplitude · δ(n − delay)` to `out`, band-limited by the kernel.
/// Taps falling outside `out` are dropped.
pub fn add_impulse(out: &mut [f64], delay: f64, amplitude: f64) {
    let centre = delay.round() as i64;
    let lo = (centre - HALF_TAPS).max(0);
    let hi = (centre + HALF_TAPS).min(out.len() as i64 - 1);
    for n in lo..=hi {
        out[n as usize] += amplitude * kernel(n as f64 - delay);
    }
}

/// The 81-tap FIR for a fractional delay `frac ∈ [-0.5, 0.5]`, taps at
/// offsets `-HALF_TAPS..=HALF_TAPS`.
pub fn fir(frac: f64) -> Vec<f64> {
    (-HALF_TAPS..=HALF_TAPS).map(|n| kernel(n as f64 - frac)).collect()
}

/// Delays `x` by `delay` samples (may be negative or fractional); the output
/// has the input length, with zeros shifted in at the edges.
pub fn delay_signal(x: &[f64], delay: f64) -> Vec<f64> {
    let whole = delay.round();
    let taps = fir(delay - whole);
    let shift = whole as i64;
    let len = x.len() as i64;
    (0..len)
        .map(|n| {
            let mut acc = 0.0;
            for (i, h) in taps.iter().enumerate() {
                let m = n - shift - (i as i64 - HALF_TAPS);
                if (0..len).contains(&m) {
                    acc += h * x[m as usize];
                }
            }
            acc
        })
        .collect()
}
