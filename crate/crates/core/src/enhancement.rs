//! Two-channel dereverberation: magnitude-averaging preprocessor followed by
//! a CDR-driven spectral magnitude subtraction postfilter.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherence::{
    check_lambda, estimate_coherence, CoherenceModels, CrossSpectra, NoiseModel, DEFAULT_SOUND_SPEED,
};
use crate::error::{config_err, input_err, Result};
use crate::estimators::{cdr_to_db, diffuseness, CdrEstimate, CdrMethod, DEFAULT_CDR_CAP_DB};
use crate::filterbank::{Filterbank, FilterbankConfig};
use crate::grid::TfGrid;
use crate::report::format_sig;

/// Default microphone spacing, meters.
pub const DEFAULT_MIC_DISTANCE: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostfilterConfig {
    /// Oversubtraction factor.
    pub mu: f64,
    /// Gain floor.
    pub g_min: f64,
    /// Forgetting factor of the spectral averages.
    pub lambda: f64,
    pub method: CdrMethod,
    pub noise_model: NoiseModel,
    pub mic_distance: f64,
    pub sound_speed: f64,
}

impl Default for PostfilterConfig {
    fn default() -> Self {
        Self {
            mu: 1.3,
            g_min: 0.1,
            lambda: 0.68,
            method: CdrMethod::Prop3,
            noise_model: NoiseModel::Diffuse,
            mic_distance: DEFAULT_MIC_DISTANCE,
            sound_speed: DEFAULT_SOUND_SPEED,
        }
    }
}

impl PostfilterConfig {
    pub fn with_method(method: CdrMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return config_err(format!("mu must be a finite value >= 0, got {}", self.mu));
        }
        if !(self.g_min > 0.0 && self.g_min <= 1.0) {
            return config_err(format!("g_min must lie in (0, 1], got {}", self.g_min));
        }
        check_lambda(self.lambda)?;
        if !(self.mic_distance > 0.0 && self.mic_distance.is_finite()) {
            return config_err(format!("mic distance must be positive, got {}", self.mic_distance));
        }
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite()) {
            return config_err(format!("sound speed must be positive, got {}", self.sound_speed));
        }
        Ok(())
    }

    pub fn gain(&self, cdr: f64) -> f64 {
        gain(cdr, self.mu, self.g_min)
    }

    /// Coherence models on the given frequency grid.
    pub fn models(&self, freqs: &[f64]) -> Result<CoherenceModels> {
        CoherenceModels::new(
            freqs,
            self.mic_distance,
            self.sound_speed,
            self.method.tdoa(),
            self.noise_model,
        )
    }
}

/// Magnitude average of both channels with the phase of channel 1:
/// `½·sqrt(|X1|² + |X2|²)·exp(j·arg X1)`.
pub fn preprocess(x1: &[Complex64], x2: &[Complex64]) -> Result<Vec<Complex64>> {
    if x1.len() != x2.len() {
        return input_err(format!("bin counts differ: {} vs {}", x1.len(), x2.len()));
    }
    Ok(x1.iter().zip(x2).map(|(&a, &b)| preprocess_bin(a, b)).collect())
}

fn preprocess_bin(a: Complex64, b: Complex64) -> Complex64 {
    let mag = 0.5 * (a.norm_sqr() + b.norm_sqr()).sqrt();
    Complex64::from_polar(mag, a.arg())
}

/// Spectral magnitude subtraction gain `max(g_min, 1 − sqrt(mu/(cdr + 1)))`.
pub fn gain(cdr: f64, mu: f64, g_min: f64) -> f64 {
    if cdr.is_infinite() {
        return 1.0;
    }
    (1.0 - (mu / (cdr + 1.0)).sqrt()).max(g_min)
}

/// Frame-by-frame postfilter state for one microphone pair.
#[derive(Debug, Clone)]
pub struct Postfilter {
    cfg: PostfilterConfig,
    models: CoherenceModels,
    spectra: CrossSpectra,
}

/// Per-bin outputs of one postfilter frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub output: Vec<Complex64>,
    pub cdr: Vec<f64>,
    pub gain: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Postfilter {
    pub fn new(cfg: PostfilterConfig, freqs: &[f64]) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            models: cfg.models(freqs)?,
            spectra: CrossSpectra::new(freqs.len(), cfg.lambda)?,
            cfg,
        })
    }

    pub fn config(&self) -> &PostfilterConfig {
        &self.cfg
    }

    pub fn models(&self) -> &CoherenceModels {
        &self.models
    }

    /// Consumes one frame of both channels and returns the enhanced frame.
    /// Bins without a usable CDR estimate receive the gain floor.
    pub fn process_frame(&mut self, x1: &[Complex64], x2: &[Complex64]) -> Result<FrameOutput> {
        self.spectra.update(x1, x2)?;
        let field = estimate_coherence(&self.spectra);
        let estimator = self.cfg.method.estimator();
        let bins = x1.len();
        let mut out = FrameOutput {
            output: Vec::with_capacity(bins),
            cdr: Vec::with_capacity(bins),
            gain: Vec::with_capacity(bins),
            valid: Vec::with_capacity(bins),
        };
        for k in 0..bins {
            let cdr = if field.valid[k] {
                estimator.evaluate(field.gamma[k], self.models.direct(k), self.models.gamma_n[k])
            } else {
                None
            };
            let g = cdr.map_or(self.cfg.g_min, |c| self.cfg.gain(c));
            out.output.push(preprocess_bin(x1[k], x2[k]) * g);
            out.cdr.push(cdr.unwrap_or(0.0));
            out.gain.push(g);
            out.valid.push(cdr.is_some());
        }
        Ok(out)
    }
}

/// Result of offline dereverberation.
#[derive(Debug, Clone)]
pub struct Dereverberated {
    /// Enhanced signal, same length and alignment as the inputs.
    pub output: Vec<f64>,
    pub estimate: CdrEstimate,
    pub gain: TfGrid<f64>,
    pub freqs: Vec<f64>,
    /// Streaming delay of the filterbank, samples.
    pub latency_samples: usize,
}

impl Dereverberated {
    pub fn mean_gain(&self) -> f64 {
        let g = self.gain.as_slice();
        if g.is_empty() {
            0.0
        } else {
            g.iter().sum::<f64>() / g.len() as f64
        }
    }

    /// Writes per-bin telemetry as CSV with columns
    /// `frame,bin,freq_hz,cdr_db,diffuseness,gain`. Infinite CDRs are capped
    /// at `±cap_db`.
    pub fn write_telemetry<W: Write>(&self, mut w: W, cap_db: f64) -> std::io::Result<()> {
        writeln!(w, "frame,bin,freq_hz,cdr_db,diffuseness,gain")?;
        for l in 0..self.gain.frames() {
            for (k, f) in self.freqs.iter().enumerate() {
                let cdr = self.estimate.cdr[(l, k)];
                writeln!(
                    w,
                    "{l},{k},{},{},{},{}",
                    format_sig(*f),
                    format_sig(cdr_to_db(cdr, cap_db)),
                    format_sig(diffuseness(cdr)),
                    format_sig(self.gain[(l, k)])
                )?;
            }
        }
        Ok(())
    }

    pub fn write_telemetry_default<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_telemetry(w, DEFAULT_CDR_CAP_DB)
    }
}

/// Enhances a two-channel recording. The output has the input length.
pub fn dereverberate(
    x1: &[f64],
    x2: &[f64],
    cfg: &PostfilterConfig,
    fb_cfg: &FilterbankConfig,
) -> Result<Dereverberated> {
    if x1.len() != x2.len() {
        return input_err(format!("channel lengths differ: {} vs {}", x1.len(), x2.len()));
    }
    let fb = Filterbank::new(*fb_cfg)?;
    let freqs = fb.frequencies();
    let mut pf = Postfilter::new(*cfg, &freqs)?;
    let s1 = fb.analyze(x1)?;
    let s2 = fb.analyze(x2)?;
    let (frames, bins) = (s1.frames(), s1.bins());
    let mut z = s1.zeros_like();
    let mut cdr = TfGrid::filled(frames, bins, 0.0);
    let mut valid = TfGrid::filled(frames, bins, false);
    let mut gains = TfGrid::filled(frames, bins, 0.0);
    for l in 0..frames {
        let out = pf.process_frame(s1.frame(l), s2.frame(l))?;
        z.data.frame_mut(l).copy_from_slice(&out.output);
        cdr.frame_mut(l).copy_from_slice(&out.cdr);
        valid.frame_mut(l).copy_from_slice(&out.valid);
        gains.frame_mut(l).copy_from_slice(&out.gain);
    }
    Ok(Dereverberated {
        output: fb.synthesize(&z)?,
        estimate: CdrEstimate {
            cdr,
            method: cfg.method.estimator(),
            valid,
        },
        gain: gains,
        freqs,
        latency_samples: fb.latency_samples(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Estimator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noise(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn preprocess_examples() {
        let y = preprocess(&[c(2.0, 0.0)], &[c(2.0, 0.0)]).unwrap()[0];
        assert!((y - c(8f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
        assert_eq!(preprocess(&[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap()[0], c(0.0, 0.0));
        let y = preprocess(&[c(1.0, 0.0)], &[c(0.0, 1.0)]).unwrap()[0];
        assert!((y.norm() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(y.arg(), 0.0);
        let y = preprocess(&[c(0.0, -3.0)], &[c(4.0, 0.0)]).unwrap()[0];
        assert!((y.arg() + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(preprocess(&[c(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(f64::INFINITY, 1.3, 0.1), 1.0);
        assert_eq!(gain(0.0, 1.3, 0.1), 0.1);
        assert!((gain(12.0, 1.3, 0.1) - (1.0 - 0.1f64.sqrt())).abs() < 1e-15);
        assert!((gain(12.0, 1.3, 0.1) - 0.6838).abs() < 1e-4);
        assert_eq!(gain(5.0, 0.0, 0.1), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(PostfilterConfig::default().validate().is_ok());
        let bad = [
            PostfilterConfig { mu: -1.0, ..Default::default() },
            PostfilterConfig { g_min: 0.0, ..Default::default() },
            PostfilterConfig { g_min: 1.5, ..Default::default() },
            PostfilterConfig { lambda: 1.0, ..Default::default() },
            PostfilterConfig { mic_distance: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn config_json_carries_tdoa_only_when_needed() {
        let blind = serde_json::to_value(PostfilterConfig::default()).unwrap();
        assert_eq!(blind["method"], serde_json::json!({"estimator": "prop3"}));
        let informed = PostfilterConfig::with_method(CdrMethod::new(Estimator::Prop2, Some(1e-4)).unwrap());
        let v = serde_json::to_value(informed).unwrap();
        assert_eq!(v["method"]["tdoa"], 1e-4);
        let err = serde_json::from_value::<CdrMethod>(serde_json::json!({"estimator": "prop3", "tdoa": 0.0}));
        assert!(err.is_err());
        let err = serde_json::from_value::<CdrMethod>(serde_json::json!({"estimator": "prop1"}));
        assert!(err.is_err());
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let x = vec![0.0; 4000];
        let out = dereverberate(&x, &x, &PostfilterConfig::default(), &FilterbankConfig::default()).unwrap();
        assert_eq!(out.output.len(), 4000);
        assert!(out.output.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_channels_pass_with_unit_gain() {
        // Bin-centred sinusoids away from DC, where the direct and diffuse
        // models coincide and every bin is floored.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phases: Vec<f64> = (0..256).map(|_| rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU)).collect();
        let x: Vec<f64> = (0..32000)
            .map(|t| {
                (3..=254)
                    .map(|k| (2.0 * std::f64::consts::PI * (k * t) as f64 / 512.0 + phases[k]).cos())
                    .sum::<f64>()
            })
            .collect();
        let cfg = PostfilterConfig::with_method(CdrMethod::new(Estimator::Prop1, Some(0.0)).unwrap());
        let out = dereverberate(&x, &x, &cfg, &FilterbankConfig::default()).unwrap();
        assert!(out.gain.rows().all(|g| g[0] == 0.1));
        for l in 0..out.gain.frames() {
            let (k, g) = out.gain.frame(l)[1..].iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            assert!(*g > 1.0 - 1e-6, "frame {l} bin {} gain {g}", k + 1);
        }
        // Y = X1/sqrt(2) for identical channels.
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let err: f64 = x.iter().zip(&out.output).map(|(a, b)| (a * scale - b).powi(2)).sum();
        let energy: f64 = x.iter().map(|a| (a * scale).powi(2)).sum();
        assert!(err / energy < 1e-6, "{}", err / energy);
    }

    #[test]
    fn scaling_leaves_gain_unchanged() {
        let x1 = noise(7, 8000);
        let x2: Vec<f64> = x1.iter().zip(noise(8, 8000)).map(|(a, b)| a + 0.5 * b).collect();
        let cfg = PostfilterConfig::with_method(CdrMethod::new(Estimator::Prop2, Some(1e-4)).unwrap());
        let fb = FilterbankConfig::default();
        let a = dereverberate(&x1, &x2, &cfg, &fb).unwrap();
        let y1: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y2: Vec<f64> = x2.iter().map(|v| 2.0 * v).collect();
        let b = dereverberate(&y1, &y2, &cfg, &fb).unwrap();
        for (ga, gb) in a.gain.as_slice().iter().zip(b.gain.as_slice()) {
            assert!((ga - gb).abs() < 1e-9);
        }
        for (za, zb) in a.output.iter().zip(&b.output) {
            assert!((2.0 * za - zb).abs() < 1e-9);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let cfg = PostfilterConfig::default();
        assert!(dereverberate(&[0.0; 2000], &[0.0; 1999], &cfg, &FilterbankConfig::default()).is_err());
    }

    #[test]
    fn diffuse_field_is_suppressed() {
        use crate::simulator::{synthesize_isotropic, FieldKind};
        let mics = [[-0.04, 0.0, 0.0], [0.04, 0.0, 0.0]];
        let x = synthesize_isotropic(FieldKind::Spherical, 360, &mics, 4.0, 16000.0, 343.0, 3).unwrap();
        let cfg = PostfilterConfig::with_method(CdrMethod::new(Estimator::Prop1, Some(0.0)).unwrap());
        let out = dereverberate(&x[0], &x[1], &cfg, &FilterbankConfig::default()).unwrap();
        let mut steady: Vec<f64> = out.gain.rows().skip(50).flat_map(|r| r[1..].to_vec()).collect();
        steady.sort_by(f64::total_cmp);
        let median = steady[steady.len() / 2];
        assert!(median <= 0.2, "{median}");
    }

    #[test]
    fn telemetry_csv_layout() {
        let x1 = noise(9, 3000);
        let x2 = noise(10, 3000);
        let out = dereverberate(&x1, &x2, &PostfilterConfig::default(), &FilterbankConfig::default()).unwrap();
        let mut buf = Vec::new();
        out.write_telemetry_default(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("frame,bin,freq_hz,cdr_db,diffuseness,gain"));
        assert_eq!(lines.count(), out.gain.frames() * out.gain.bins());
        assert!(out.latency_samples == 1023);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gain_is_bounded_and_monotone(
                a in 0.0f64..1e6,
                b in 0.0f64..1e6,
                mu in 0.0f64..4.0,
                g_min in 0.01f64..=1.0,
            ) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let (glo, ghi) = (gain(lo, mu, g_min), gain(hi, mu, g_min));
                prop_assert!(glo <= ghi);
                for g in [glo, ghi, gain(f64::INFINITY, mu, g_min)] {
                    prop_assert!((g_min..=1.0).contains(&g));
                }
            }

            #[test]
            fn pipeline_gains_stay_in_bounds(seed in 0u64..1000, est in 0usize..8) {
                let e = Estimator::ALL[est];
                let x1 = noise(seed, 2500);
                let x2: Vec<f64> = x1.iter().zip(noise(seed + 1, 2500)).map(|(a, b)| a + 0.3 * b).collect();
                let cfg = PostfilterConfig::with_method(CdrMethod::new(e, Some(1e-4)).unwrap());
                let out = dereverberate(&x1, &x2, &cfg, &FilterbankConfig::default()).unwrap();
                prop_assert!(out.gain.as_slice().iter().all(|g| (0.1..=1.0).contains(g)));
                prop_assert!(out.estimate.cdr.as_slice().iter().all(|c| *c >= 0.0));
            }
        }
    }
}
