//! Versioned JSON scenario documents and the sidecars written next to
//! simulated signals.
//!
//! A scenario describes either an image-method room (`room`) or a plane
//! wave in an isotropic noise field (`mixture`), plus an optional
//! excitation signal, coherence analysis and postfilter run. Unknown keys
//! anywhere in the document are rejected with their full paths.

use std::path::{Path, PathBuf};

use cdr_core::analysis::{centred_array_room, ArrayPlacement};
use cdr_core::simulator::{FieldKind, DEFAULT_TE};
use cdr_core::{Estimator, FilterbankConfig, NoiseModel, RoomSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{schema, CliError, Result};

pub const SCENARIO_VERSION: u32 = 1;
pub const SIDECAR_VERSION: u32 = 1;

/// Seed used when a scenario does not set one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub room: Option<RoomSection>,
    #[serde(default)]
    pub mixture: Option<MixtureSection>,
    #[serde(default)]
    pub excitation: Option<Excitation>,
    #[serde(default)]
    pub coherence: Option<CoherenceSection>,
    #[serde(default)]
    pub postfilter: Option<PostfilterSection>,
    #[serde(default)]
    pub filterbank: FilterbankConfig,
    /// Output directory, relative to the scenario file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A rectangular room given either by explicit positions (`source` and
/// `mics`) or by a centred linear array (`placement`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSection {
    pub dims: [f64; 3],
    pub beta: [f64; 6],
    #[serde(default)]
    pub source: Option<[f64; 3]>,
    #[serde(default)]
    pub mics: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub placement: Option<ArrayPlacement>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(default = "default_stop_threshold")]
    pub stop_threshold_db: f64,
    /// Early/late split after the direct-path onset, seconds.
    #[serde(default = "default_te")]
    pub te: f64,
}

/// A two-microphone plane wave in isotropic noise at a broadband CDR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSection {
    #[serde(default)]
    pub doa_deg: f64,
    pub cdr_db: f64,
    #[serde(default = "default_mic_distance")]
    pub mic_distance: f64,
    #[serde(default = "default_field")]
    pub field: FieldKind,
    #[serde(default = "default_sources")]
    pub num_sources: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    /// Seeded speech-like test signal.
    Speech,
    /// Seeded white Gaussian noise.
    Noise,
    /// Mono WAV file given by `path`.
    Wav,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub kind: ExcitationKind,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// Pair-averaged coherence of the reverberation tails of a room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSection {
    /// Number of adjacent microphone pairs; all pairs when absent.
    #[serde(default)]
    pub pairs: Option<usize>,
}

/// Postfilter settings applied to microphones 1 and 2 of the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostfilterSection {
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// TDOA in seconds; the geometric or rendered TDOA when absent.
    #[serde(default)]
    pub tdoa: Option<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_g_min")]
    pub g_min: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub noise_model: NoiseModel,
}

fn default_sample_rate() -> f64 {
    16000.0
}
fn default_sound_speed() -> f64 {
    cdr_core::coherence::DEFAULT_SOUND_SPEED
}
fn default_stop_threshold() -> f64 {
    60.0
}
fn default_te() -> f64 {
    DEFAULT_TE
}
fn default_mic_distance() -> f64 {
    cdr_core::enhancement::DEFAULT_MIC_DISTANCE
}
fn default_field() -> FieldKind {
    FieldKind::Spherical
}
fn default_sources() -> usize {
    cdr_core::simulator::field::DEFAULT_SOURCES
}
fn default_duration() -> f64 {
    10.0
}
fn default_estimator() -> Estimator {
    Estimator::Prop3
}
fn default_mu() -> f64 {
    1.3
}
fn default_g_min() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    0.68
}

impl RoomSection {
    pub fn to_room(&self) -> Result<RoomSpec> {
        let mut room = match (&self.placement, &self.source, &self.mics) {
            (Some(p), None, None) => centred_array_room(self.dims, self.beta, p),
            (None, Some(source), Some(mics)) => RoomSpec {
                dims: self.dims,
                beta: self.beta,
                source: *source,
                mics: mics.clone(),
                sample_rate: self.sample_rate,
                sound_speed: self.sound_speed,
            },
            _ => return schema("room: give either 'placement' or both 'source' and 'mics'"),
        };
        room.sample_rate = self.sample_rate;
        room.sound_speed = self.sound_speed;
        room.validate().map_err(|e| CliError::Schema(format!("room: {e}")))?;
        Ok(room)
    }
}

impl ScenarioConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return schema(format!(
                "unsupported scenario version {} (this tool reads version {SCENARIO_VERSION})",
                self.version
            ));
        }
        match (&self.room, &self.mixture) {
            (Some(_), Some(_)) | (None, None) => return schema("give exactly one of 'room' or 'mixture'"),
            (None, Some(_)) if self.excitation.is_none() => {
                return schema("a 'mixture' scenario needs an 'excitation'")
            }
            (None, Some(_)) if self.coherence.is_some() => {
                return schema("'coherence' applies to 'room' scenarios only")
            }
            _ => {}
        }
        if let Some(e) = &self.excitation {
            match (e.kind, &e.path) {
                (ExcitationKind::Wav, None) => return schema("excitation: kind 'wav' needs a 'path'"),
                (ExcitationKind::Speech | ExcitationKind::Noise, Some(_)) => {
                    return schema("excitation: 'path' applies to kind 'wav' only")
                }
                _ => {}
            }
            if !(e.duration_s > 0.0) {
                return schema("excitation: 'duration_s' must be positive");
            }
        }
        if self.postfilter.is_some() && self.excitation.is_none() {
            return schema("'postfilter' needs an 'excitation' to process");
        }
        let rate = self
            .room
            .as_ref()
            .map(|r| r.sample_rate)
            .or(self.mixture.as_ref().map(|m| m.sample_rate));
        if rate.is_some_and(|r| r != self.filterbank.sample_rate) {
            return schema("filterbank.sample_rate must equal the scenario sample rate");
        }
        Ok(())
    }
}

/// Parses JSON, rejecting unknown keys with their paths.
pub fn parse_strict<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_ignored::deserialize(&mut de, |path| {
        let segments: Vec<String> = path.to_string().split('.').filter(|s| *s != "?").map(String::from).collect();
        unknown.push(segments.join("."));
    })
        .map_err(|e| CliError::Schema(format!("{what}: {e}")))?;
    de.end().map_err(|e| CliError::Schema(format!("{what}: {e}")))?;
    if !unknown.is_empty() {
        return schema(format!("{what}: unknown keys: {}", unknown.join(", ")));
    }
    Ok(value)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
    parse_strict(&text, &path.display().to_string())
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let scenario: ScenarioConfig = read_json(path)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Sidecar of a simulated two-microphone signal set. File names are
/// relative to the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSidecar {
    pub version: u32,
    pub seed: u64,
    pub sample_rate: f64,
    pub mic_distance: f64,
    pub sound_speed: f64,
    /// Direct-path TDOA between microphones 1 and 2, seconds.
    pub tdoa_s: f64,
    pub clean: PathBuf,
    pub mixture: PathBuf,
    /// Desired and undesired components: early/late reverberation for
    /// rooms, direct/noise for plane-wave mixtures.
    pub desired: PathBuf,
    pub undesired: PathBuf,
    pub truth: GroundTruth,
}

/// Realized ratio between the desired and undesired components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Time-averaged ratio at microphone 1, mean over bins, dB.
    pub mean_db: f64,
    pub bins: Vec<BinTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTruth {
    pub freq_hz: f64,
    pub ratio_db: Option<f64>,
}

/// Sidecar of a multichannel impulse response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirSidecar {
    pub version: u32,
    pub sample_rate: f64,
    pub sound_speed: f64,
    pub dims: [f64; 3],
    pub beta: [f64; 6],
    pub source: [f64; 3],
    pub positions: Vec<[f64; 3]>,
    pub te: f64,
    pub onsets: Vec<usize>,
    pub eyring_t60_s: f64,
    /// Reverberation time from each impulse response, where measurable.
    pub t60_s: Vec<Option<f64>>,
}

impl MixtureSidecar {
    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: MixtureSidecar = read_json(path)?;
        if sidecar.version != SIDECAR_VERSION {
            return schema(format!("{}: unsupported sidecar version {}", path.display(), sidecar.version));
        }
        Ok(sidecar)
    }
}
