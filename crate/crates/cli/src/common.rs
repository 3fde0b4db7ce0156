//! Flag groups and output helpers shared by several subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cdr_core::coherence::{tdoa_from_doa, DEFAULT_SOUND_SPEED};
use cdr_core::enhancement::DEFAULT_MIC_DISTANCE;
use cdr_core::{CdrMethod, Estimator, NoiseModel, PostfilterConfig};
use clap::Args;

use crate::error::{usage, CliError, Result};

/// Postfilter and coherence-model flags.
#[derive(Debug, Clone, Args)]
pub struct PostfilterArgs {
    /// CDR estimator: jeub, thiergart1, thiergart2, prop1, prop2, prop2u, prop3, prop4.
    #[arg(long, default_value = "prop3")]
    pub estimator: Estimator,
    /// Noise coherence model: diffuse or 2d-iso.
    #[arg(long, default_value = "diffuse")]
    pub noise_model: NoiseModel,
    /// Source direction from broadside, degrees.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "tdoa")]
    pub doa: Option<f64>,
    /// Direct-path TDOA, arrival at microphone 2 minus microphone 1, seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub tdoa: Option<f64>,
    /// Microphone spacing, meters.
    #[arg(long, default_value_t = DEFAULT_MIC_DISTANCE)]
    pub mic_distance: f64,
    /// Speed of sound, m/s.
    #[arg(long, default_value_t = DEFAULT_SOUND_SPEED)]
    pub sound_speed: f64,
    /// Oversubtraction factor.
    #[arg(long, default_value_t = 1.3)]
    pub mu: f64,
    /// Gain floor.
    #[arg(long, default_value_t = 0.1)]
    pub gmin: f64,
    /// Forgetting factor of the spectral averages.
    #[arg(long, default_value_t = 0.68)]
    pub lambda: f64,
}

impl PostfilterArgs {
    /// TDOA from `--tdoa` or `--doa`.
    pub fn tdoa(&self) -> Option<f64> {
        self.tdoa.or_else(|| {
            self.doa
                .map(|deg| tdoa_from_doa(deg.to_radians(), self.mic_distance, self.sound_speed))
        })
    }

    /// Postfilter configuration for `estimator`, with `fallback_tdoa` used
    /// when neither `--tdoa` nor `--doa` is given.
    pub fn config_for(&self, estimator: Estimator, fallback_tdoa: Option<f64>) -> Result<PostfilterConfig> {
        let tdoa = self.tdoa().or(fallback_tdoa);
        if estimator.requires_tdoa() && tdoa.is_none() {
            return usage(format!("estimator '{estimator}' requires --tdoa or --doa"));
        }
        let cfg = PostfilterConfig {
            mu: self.mu,
            g_min: self.gmin,
            lambda: self.lambda,
            method: CdrMethod::new(estimator, tdoa)?,
            noise_model: self.noise_model,
            mic_distance: self.mic_distance,
            sound_speed: self.sound_speed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn config(&self, fallback_tdoa: Option<f64>) -> Result<PostfilterConfig> {
        self.config_for(self.estimator, fallback_tdoa)
    }
}

/// Buffered writer to `path`, or to standard output when `path` is `None`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::writing(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Runs `body` against the output and flushes it, attributing failures to
/// the destination.
pub fn write_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut w = output(path)?;
    let dest = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::writing(&dest, e))
}

/// Writes a value as pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    write_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        writeln!(w)
    })
}

/// Resolves `p` against the directory of `base` unless it is absolute.
pub fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}
