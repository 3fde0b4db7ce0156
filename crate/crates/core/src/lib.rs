//! Coherent-to-diffuse power ratio (CDR) estimation from two omnidirectional
//! microphones, a CDR-driven spectral subtraction postfilter for blind
//! dereverberation, and the room/sound-field simulation and metrics used to
//! verify the estimators.

pub mod analysis;
pub mod coherence;
pub mod enhancement;
pub mod error;
pub mod estimators;
pub mod filterbank;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod simulator;

pub use coherence::{CoherenceModels, CoherenceTrack, CrossSpectra, NoiseModel};
pub use enhancement::{dereverberate, Dereverberated, Postfilter, PostfilterConfig};
pub use error::{Error, Result};
pub use estimators::{CdrEstimate, CdrMethod, Estimator};
pub use filterbank::{Filterbank, FilterbankConfig, PrototypeKind, Spectrogram};
pub use grid::TfGrid;
pub use metrics::{ElrField, FwSegSnrConfig};
pub use num_complex::Complex64;
pub use simulator::{ImpulseResponse, RoomSpec};
