//! DFT-based uniform analysis/synthesis filterbank.
//!
//! Analysis windows a block of `window_len` samples with a lowpass prototype,
//! time-aliases it down to `fft_size` samples and takes a DFT, advancing by
//! `hop` samples per frame. Synthesis inverts each frame, periodically extends
//! it back to `window_len`, applies the same prototype and overlap-adds.
//!
//! The prototype is a Kaiser-windowed sinc whose polyphase components are
//! orthogonalized, so the analysis operator is a tight frame: synthesis is its
//! exact adjoint and inverse. The signal is zero-padded by `window_len - hop`
//! samples at the front and up to the end of the last frame at the tail, so
//! every input sample is fully covered and `synthesize(analyze(x)) == x` with
//! no offline delay. A causal streaming realization of the same pair incurs
//! [`Filterbank::latency_samples`] of delay.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::grid::TfGrid;

/// Lowpass prototype family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrototypeKind {
    /// Kaiser-windowed sinc. `cutoff` is the half-bandwidth in units of the
    /// channel spacing `sample_rate / fft_size`.
    KaiserSinc { beta: f64, cutoff: f64 },
    /// Constant window; with `window_len == fft_size` this is a plain DFT.
    Rectangular,
}

impl Default for PrototypeKind {
    fn default() -> Self {
        PrototypeKind::KaiserSinc {
            beta: 7.75,
            cutoff: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterbankConfig {
    pub sample_rate: f64,
    pub window_len: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub prototype: PrototypeKind,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000.0,
            window_len: 1024,
            fft_size: 512,
            hop: 128,
            prototype: PrototypeKind::default(),
        }
    }
}

impl FilterbankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return config_err(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if self.fft_size < 2 || !self.fft_size.is_multiple_of(2) {
            return config_err(format!("fft size must be even and >= 2, got {}", self.fft_size));
        }
        if self.window_len == 0 || !self.window_len.is_multiple_of(self.fft_size) {
            return config_err(format!(
                "window length {} is not a multiple of fft size {}",
                self.window_len, self.fft_size
            ));
        }
        if self.hop == 0 || !self.fft_size.is_multiple_of(self.hop) {
            return config_err(format!(
                "hop {} does not divide fft size {}",
                self.hop, self.fft_size
            ));
        }
        if let PrototypeKind::KaiserSinc { beta, cutoff } = self.prototype {
            if !(beta.is_finite() && beta >= 0.0 && cutoff.is_finite() && cutoff > 0.0) {
                return config_err("kaiser prototype needs finite beta >= 0 and cutoff > 0");
            }
        }
        Ok(())
    }

    /// Number of one-sided bins, `fft_size / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.fft_size as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.bin_frequency(k)).collect()
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        (len - 1 + self.front_pad()) / self.hop + 1
    }

    fn front_pad(&self) -> usize {
        self.window_len - self.hop
    }
}

/// Zeroth-order modified Bessel function of the first kind (Kaiser window).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kaiser(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let half = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|n| {
            let r = (n as f64 - half) / half;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Solves the small dense system `a · x = b` in place by Gaussian elimination.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Enforces the perfect-reconstruction conditions on one polyphase component.
///
/// `p` holds every `hop`-th prototype tap; the alias terms are its
/// autocorrelations at multiples of `stride = fft_size / hop`. They are driven
/// to zero with minimum-norm Gauss-Newton steps, then the energy is fixed to
/// `1 / fft_size`.
fn orthogonalize_phase(p: &mut [f64], stride: usize, fft_size: usize) {
    let lags: Vec<usize> = (1..)
        .map(|m| m * stride)
        .take_while(|&lag| lag < p.len())
        .collect();
    let corr = |p: &[f64], lag: usize| -> f64 { (0..p.len() - lag).map(|i| p[i] * p[i + lag]).sum() };
    for _ in 0..50 {
        let energy: f64 = p.iter().map(|v| v * v).sum();
        let residual: Vec<f64> = lags.iter().map(|&lag| corr(p, lag)).collect();
        if residual.iter().all(|r| r.abs() <= 1e-16 * energy) {
            break;
        }
        let grads: Vec<Vec<f64>> = lags
            .iter()
            .map(|&lag| {
                (0..p.len())
                    .map(|i| {
                        let fwd = if i + lag < p.len() { p[i + lag] } else { 0.0 };
                        let back = if i >= lag { p[i - lag] } else { 0.0 };
                        fwd + back
                    })
                    .collect()
            })
            .collect();
        let gram: Vec<Vec<f64>> = grads
            .iter()
            .map(|gi| grads.iter().map(|gj| gi.iter().zip(gj).map(|(a, b)| a * b).sum()).collect())
            .collect();
        let Some(coef) = solve_dense(gram, residual) else {
            break;
        };
        for (g, c) in grads.iter().zip(&coef) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= c * gi;
            }
        }
    }
    let energy: f64 = p.iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let scale = (1.0 / (fft_size as f64 * energy)).sqrt();
        p.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Designs the analysis/synthesis prototype for `config`.
pub fn design_prototype(config: &FilterbankConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let len = config.window_len;
    let mut h = match config.prototype {
        PrototypeKind::Rectangular => vec![1.0; len],
        PrototypeKind::KaiserSinc { beta, cutoff } => {
            let w = kaiser(len, beta);
            let center = (len - 1) as f64 / 2.0;
            let scale = 2.0 * cutoff / config.fft_size as f64;
            w.iter()
                .enumerate()
                .map(|(n, wn)| wn * sinc((n as f64 - center) * scale))
                .collect()
        }
    };
    let stride = config.fft_size / config.hop;
    for phase in 0..config.hop {
        let mut p: Vec<f64> = h.iter().skip(phase).step_by(config.hop).copied().collect();
        orthogonalize_phase(&mut p, stride, config.fft_size);
        for (i, v) in p.into_iter().enumerate() {
            h[phase + i * config.hop] = v;
        }
    }
    Ok(h)
}

/// One-sided STFT-domain representation of a real signal.
#[derive(Clone, PartialEq)]
pub struct Spectrogram {
    pub config: FilterbankConfig,
    /// Length of the time-domain signal this spectrogram was computed from.
    pub signal_len: usize,
    pub data: TfGrid<Complex64>,
}

impl fmt::Debug for Spectrogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrogram")
            .field("frames", &self.frames())
            .field("bins", &self.bins())
            .field("signal_len", &self.signal_len)
            .finish()
    }
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.data.frames()
    }

    pub fn bins(&self) -> usize {
        self.data.bins()
    }

    pub fn frame(&self, l: usize) -> &[Complex64] {
        self.data.frame(l)
    }

    /// A spectrogram of the same shape with every bin set to zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            signal_len: self.signal_len,
            data: TfGrid::filled(self.frames(), self.bins(), Complex64::new(0.0, 0.0)),
        }
    }

    /// Energy summed over frames with one-sided bin weighting (interior bins
    /// count twice). Equals the time-domain energy for the default prototype.
    pub fn energy(&self) -> f64 {
        let last = self.bins() - 1;
        self.data
            .rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, v)| if k == 0 || k == last { v.norm_sqr() } else { 2.0 * v.norm_sqr() })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Analysis/synthesis filterbank with a precomputed prototype and FFT plans.
#[derive(Clone)]
pub struct Filterbank {
    config: FilterbankConfig,
    prototype: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Filterbank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Filterbank").field("config", &self.config).finish()
    }
}

impl Filterbank {
    pub fn new(config: FilterbankConfig) -> Result<Self> {
        let prototype = design_prototype(&config)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
            config,
            prototype,
        })
    }

    pub fn config(&self) -> &FilterbankConfig {
        &self.config
    }

    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.config.frequencies()
    }

    /// Delay of a causal frame-by-frame realization: the prototype group
    /// delay of analysis plus synthesis.
    pub fn latency_samples(&self) -> usize {
        self.config.window_len - 1
    }

    pub fn analyze(&self, signal: &[f64]) -> Result<Spectrogram> {
        if signal.is_empty() {
            return input_err("cannot analyze an empty signal");
        }
        if signal.iter().any(|v| !v.is_finite()) {
            return input_err("signal contains non-finite samples");
        }
        let cfg = &self.config;
        let (n, len, hop) = (cfg.fft_size, cfg.window_len, cfg.hop);
        let pad = cfg.front_pad();
        let frames = cfg.frame_count(signal.len());
        let bins = cfg.bins();
        let sample = |t: usize| -> f64 {
            t.checked_sub(pad)
                .and_then(|i| signal.get(i))
                .copied()
                .unwrap_or(0.0)
        };

        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for l in 0..frames {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let start = l * hop;
            for (i, h) in self.prototype.iter().enumerate().take(len) {
                buf[i % n].re += h * sample(start + i);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(Spectrogram {
            config: *cfg,
            signal_len: signal.len(),
            data: TfGrid::from_vec(frames, bins, data),
        })
    }

    pub fn synthesize(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        let cfg = &self.config;
        if spec.config != *cfg {
            return input_err("spectrogram was produced with a different filterbank configuration");
        }
        if spec.bins() != cfg.bins() || spec.frames() != cfg.frame_count(spec.signal_len) {
            return input_err("spectrogram shape does not match its signal length");
        }
        let (n, len, hop) = (cfg.fft_size, cfg.window_len, cfg.hop);
        let pad = cfg.front_pad();
        let mut out = vec![0.0; spec.frames() * hop + len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let half = n / 2;
        for l in 0..spec.frames() {
            let row = spec.frame(l);
            buf[0] = Complex64::new(row[0].re, 0.0);
            buf[half] = Complex64::new(row[half].re, 0.0);
            for k in 1..half {
                buf[k] = row[k];
                buf[n - k] = row[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = l * hop;
            for (i, h) in self.prototype.iter().enumerate() {
                out[start + i] += h * buf[i % n].re;
            }
        }
        Ok(out.into_iter().skip(pad).take(spec.signal_len).collect())
    }
}

/// Convenience wrapper building a [`Filterbank`] for a single analysis.
pub fn analyze(signal: &[f64], config: &FilterbankConfig) -> Result<Spectrogram> {
    Filterbank::new(*config)?.analyze(signal)
}

/// Convenience wrapper building a [`Filterbank`] for a single synthesis.
pub fn synthesize(spec: &Spectrogram, config: &FilterbankConfig) -> Result<Vec<f64>> {
    Filterbank::new(*config)?.synthesize(spec)
}
