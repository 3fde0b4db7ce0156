//! CDR estimators operating on a short-time coherence estimate and the
//! direct-path and noise coherence models of one frequency bin.
//!
//! Every estimator maps the closed unit disk into `[0, ∞]`. Where a
//! denominator vanishes the limiting value is returned: `+∞` when the raw
//! ratio diverges towards positive values and `0` when it would be clipped.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceModels, CoherenceTrack};
use crate::error::{config_err, input_err, Error, Result};
use crate::grid::TfGrid;

/// Below this |Im Γs| the imaginary-part estimator has no usable geometry.
pub const PROP4_MIN_IMAG: f64 = 1e-6;

/// Default magnitude of the dB cap applied when exporting infinite CDRs.
pub const DEFAULT_CDR_CAP_DB: f64 = 100.0;

/// Ratio `num / den` for a denominator that is mathematically `≤ 0`, clipped
/// at zero from below.
fn clipped_ratio_nonpos_den(num: f64, den: f64) -> f64 {
    let den = den.min(0.0);
    if den == 0.0 {
        if num < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (num / den).max(0.0)
    }
}

/// The exact complex solution `(Γn − Γx)/(Γx − Γs)` of the mixing line.
pub fn cdr_ideal(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> Complex64 {
    (Complex64::new(gamma_n, 0.0) - gamma_x) / (gamma_x - gamma_s)
}

/// Real-part projection onto the direct-path model, without phase correction
/// of the noise model.
pub fn cdr_jeub(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> f64 {
    let a = (gamma_s.conj() * gamma_x).re;
    clipped_ratio_nonpos_den(gamma_n - a, a - 1.0)
}

/// Real part of the ideal complex solution.
pub fn cdr_thiergart1(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> f64 {
    let den = gamma_x - gamma_s;
    let num = Complex64::new(gamma_n, 0.0) - gamma_x;
    if den.norm_sqr() == 0.0 {
        return if num.norm_sqr() == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).re.max(0.0)
}

/// Unbiased variant of [`cdr_jeub`] with a phase-corrected noise model.
pub fn cdr_prop1(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> f64 {
    let a = (gamma_s.conj() * gamma_x).re;
    let num = (gamma_s.conj() * (Complex64::new(gamma_n, 0.0) - gamma_x)).re;
    clipped_ratio_nonpos_den(num, a - 1.0)
}

/// Magnitude form of [`cdr_prop1`] before bias compensation.
pub fn cdr_prop2_uncompensated(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> f64 {
    let num = (gamma_s.conj() * (Complex64::new(gamma_n, 0.0) - gamma_x)).norm();
    let den = ((gamma_s.conj() * gamma_x).re - 1.0).abs();
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Bias factor `(1 − Γn·cos(arg Γs)) / |Γn − Γs|` of the magnitude estimator.
///
/// Both terms vanish together only when `Γn = Γs`; the factor is 1 there.
pub fn compensation_factor(gamma_s: Complex64, gamma_n: f64) -> f64 {
    let num = 1.0 - gamma_n * gamma_s.arg().cos();
    let den = (Complex64::new(gamma_n, 0.0) - gamma_s).norm();
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Bias-compensated magnitude estimator.
pub fn cdr_prop2(gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> f64 {
    compensation_factor(gamma_s, gamma_n) * cdr_prop2_uncompensated(gamma_x, gamma_s, gamma_n)
}

/// Estimator using the instantaneous phase of Γx as direct-path model.
/// Uses only the noise model.
pub fn cdr_thiergart2(gamma_x: Complex64, gamma_n: f64) -> f64 {
    let mag = gamma_x.norm();
    let num = gamma_n * gamma_x.arg().cos() - mag;
    let den = mag - 1.0;
    if den >= 0.0 {
        return f64::INFINITY;
    }
    (num / den).max(0.0)
}

/// DOA-independent estimator: the positive intersection of the unit circle
/// with the line through Γn and Γx. Uses only the noise model.
pub fn cdr_prop3(gamma_x: Complex64, gamma_n: f64) -> f64 {
    let re = gamma_x.re;
    let m2 = gamma_x.norm_sqr();
    if m2 >= 1.0 {
        return f64::INFINITY;
    }
    let im = gamma_x.im;
    let dist2 = (gamma_n - re).powi(2) + im * im;
    let disc = ((gamma_n - re).powi(2) + im * im * (1.0 - gamma_n) * (1.0 + gamma_n)).max(0.0);
    let b = gamma_n * re - m2;
    let cdr = if b > 0.0 {
        dist2 / (disc.sqrt() + b)
    } else {
        (disc.sqrt() - b) / (1.0 - m2)
    };
    cdr.max(0.0)
}

/// Noise-model-free estimator built from imaginary parts only.
/// Returns `None` where |Im Γs| is too small to be usable.
pub fn cdr_prop4(gamma_x: Complex64, gamma_s: Complex64) -> Option<f64> {
    let is = gamma_s.im;
    if is.abs() < PROP4_MIN_IMAG {
        return None;
    }
    let ix = gamma_x.im;
    let r = ix / is;
    Some(if r >= 1.0 {
        f64::INFINITY
    } else if r > 0.0 {
        ix / (is - ix)
    } else {
        0.0
    })
}

/// Diffuseness `1/(CDR + 1)`, with `∞ ↦ 0`.
pub fn diffuseness(cdr: f64) -> f64 {
    if cdr.is_infinite() {
        0.0
    } else {
        1.0 / (cdr + 1.0)
    }
}

/// CDR in dB clamped to `[-cap_db, cap_db]`, for bounded file output.
pub fn cdr_to_db(cdr: f64, cap_db: f64) -> f64 {
    (10.0 * cdr.log10()).clamp(-cap_db, cap_db)
}

/// Estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Jeub,
    Thiergart1,
    Thiergart2,
    Prop1,
    Prop2,
    Prop2u,
    Prop3,
    Prop4,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::Jeub,
        Estimator::Thiergart1,
        Estimator::Thiergart2,
        Estimator::Prop1,
        Estimator::Prop2,
        Estimator::Prop2u,
        Estimator::Prop3,
        Estimator::Prop4,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimator::Jeub => "jeub",
            Estimator::Thiergart1 => "thiergart1",
            Estimator::Thiergart2 => "thiergart2",
            Estimator::Prop1 => "prop1",
            Estimator::Prop2 => "prop2",
            Estimator::Prop2u => "prop2u",
            Estimator::Prop3 => "prop3",
            Estimator::Prop4 => "prop4",
        }
    }

    /// Whether the estimator needs the direct-path model (and hence a TDOA).
    pub fn requires_tdoa(self) -> bool {
        !matches!(self, Estimator::Thiergart2 | Estimator::Prop3)
    }

    /// Whether the estimator reads the noise coherence model.
    pub fn uses_noise_model(self) -> bool {
        self != Estimator::Prop4
    }

    /// Evaluates the estimator at one bin. `None` marks an unusable bin.
    pub fn evaluate(self, gamma_x: Complex64, gamma_s: Complex64, gamma_n: f64) -> Option<f64> {
        match self {
            Estimator::Jeub => Some(cdr_jeub(gamma_x, gamma_s, gamma_n)),
            Estimator::Thiergart1 => Some(cdr_thiergart1(gamma_x, gamma_s, gamma_n)),
            Estimator::Thiergart2 => Some(cdr_thiergart2(gamma_x, gamma_n)),
            Estimator::Prop1 => Some(cdr_prop1(gamma_x, gamma_s, gamma_n)),
            Estimator::Prop2 => Some(cdr_prop2(gamma_x, gamma_s, gamma_n)),
            Estimator::Prop2u => Some(cdr_prop2_uncompensated(gamma_x, gamma_s, gamma_n)),
            Estimator::Prop3 => Some(cdr_prop3(gamma_x, gamma_n)),
            Estimator::Prop4 => cdr_prop4(gamma_x, gamma_s),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .map_or_else(
                || {
                    let ids: Vec<_> = Estimator::ALL.iter().map(|e| e.id()).collect();
                    config_err(format!("unknown estimator '{s}' (expected one of {})", ids.join(", ")))
                },
                Ok,
            )
    }
}

/// An estimator together with the direct-path information it needs.
///
/// DOA-independent estimators carry no TDOA, so a pipeline built on them
/// cannot consume one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MethodSpec", into = "MethodSpec")]
pub enum CdrMethod {
    Jeub { tdoa: f64 },
    Thiergart1 { tdoa: f64 },
    Thiergart2,
    Prop1 { tdoa: f64 },
    Prop2 { tdoa: f64 },
    Prop2u { tdoa: f64 },
    Prop3,
    Prop4 { tdoa: f64 },
}

impl CdrMethod {
    /// Builds a method, requiring a TDOA exactly for the estimators that use
    /// one. A TDOA given to a DOA-independent estimator is discarded.
    pub fn new(estimator: Estimator, tdoa: Option<f64>) -> Result<Self> {
        if estimator.requires_tdoa() && tdoa.is_none() {
            return config_err(format!("estimator '{estimator}' requires a TDOA or DOA"));
        }
        if let Some(t) = tdoa {
            if !t.is_finite() {
                return config_err("TDOA must be finite");
            }
        }
        let t = tdoa.unwrap_or(0.0);
        Ok(match estimator {
            Estimator::Jeub => CdrMethod::Jeub { tdoa: t },
            Estimator::Thiergart1 => CdrMethod::Thiergart1 { tdoa: t },
            Estimator::Thiergart2 => CdrMethod::Thiergart2,
            Estimator::Prop1 => CdrMethod::Prop1 { tdoa: t },
            Estimator::Prop2 => CdrMethod::Prop2 { tdoa: t },
            Estimator::Prop2u => CdrMethod::Prop2u { tdoa: t },
            Estimator::Prop3 => CdrMethod::Prop3,
            Estimator::Prop4 => CdrMethod::Prop4 { tdoa: t },
        })
    }

    pub fn estimator(self) -> Estimator {
        match self {
            CdrMethod::Jeub { .. } => Estimator::Jeub,
            CdrMethod::Thiergart1 { .. } => Estimator::Thiergart1,
            CdrMethod::Thiergart2 => Estimator::Thiergart2,
            CdrMethod::Prop1 { .. } => Estimator::Prop1,
            CdrMethod::Prop2 { .. } => Estimator::Prop2,
            CdrMethod::Prop2u { .. } => Estimator::Prop2u,
            CdrMethod::Prop3 => Estimator::Prop3,
            CdrMethod::Prop4 { .. } => Estimator::Prop4,
        }
    }

    pub fn tdoa(self) -> Option<f64> {
        match self {
            CdrMethod::Jeub { tdoa }
            | CdrMethod::Thiergart1 { tdoa }
            | CdrMethod::Prop1 { tdoa }
            | CdrMethod::Prop2 { tdoa }
            | CdrMethod::Prop2u { tdoa }
            | CdrMethod::Prop4 { tdoa } => Some(tdoa),
            CdrMethod::Thiergart2 | CdrMethod::Prop3 => None,
        }
    }
}

/// Serialized form of [`CdrMethod`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodSpec {
    estimator: Estimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tdoa: Option<f64>,
}

impl TryFrom<MethodSpec> for CdrMethod {
    type Error = Error;

    fn try_from(spec: MethodSpec) -> Result<Self> {
        if !spec.estimator.requires_tdoa() && spec.tdoa.is_some() {
            return config_err(format!("estimator '{}' takes no TDOA", spec.estimator));
        }
        CdrMethod::new(spec.estimator, spec.tdoa)
    }
}

impl From<CdrMethod> for MethodSpec {
    fn from(m: CdrMethod) -> Self {
        MethodSpec {
            estimator: m.estimator(),
            tdoa: m.tdoa(),
        }
    }
}

/// CDR per time-frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrEstimate {
    pub cdr: TfGrid<f64>,
    pub method: Estimator,
    pub valid: TfGrid<bool>,
}

impl CdrEstimate {
    pub fn diffuseness(&self) -> TfGrid<f64> {
        self.cdr.map(|&c| diffuseness(c))
    }
}

/// Applies an estimator to every bin of a coherence track. Bins where the
/// coherence is invalid or the estimator is unusable get CDR 0 and are
/// flagged invalid.
pub fn estimate_cdr(
    track: &CoherenceTrack,
    models: &CoherenceModels,
    estimator: Estimator,
) -> Result<CdrEstimate> {
    let bins = track.gamma.bins();
    if models.freqs.len() != bins {
        return input_err(format!(
            "coherence has {bins} bins but models have {}",
            models.freqs.len()
        ));
    }
    if estimator.requires_tdoa() && models.gamma_s.is_none() {
        return config_err(format!("estimator '{estimator}' requires a TDOA or DOA"));
    }
    let frames = track.gamma.frames();
    let mut cdr = TfGrid::filled(frames, bins, 0.0);
    let mut valid = TfGrid::filled(frames, bins, false);
    for l in 0..frames {
        for k in 0..bins {
            if !track.valid[(l, k)] {
                continue;
            }
            if let Some(v) = estimator.evaluate(track.gamma[(l, k)], models.direct(k), models.gamma_n[k]) {
                cdr[(l, k)] = v;
                valid[(l, k)] = true;
            }
        }
    }
    Ok(CdrEstimate {
        cdr,
        method: estimator,
        valid,
    })
}
