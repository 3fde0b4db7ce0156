//! `cdr dereverb`: CDR-based postfiltering of a two-channel recording.

use std::path::PathBuf;

use cdr_core::{dereverberate, FilterbankConfig};
use clap::Args;

use crate::common::{write_output, PostfilterArgs};
use crate::error::Result;
use crate::wav;

/// Sample rate the processing chain is configured for.
pub const SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Args)]
pub struct DereverbArgs {
    /// Two-channel input WAV at 16 kHz (16/24-bit PCM or 32-bit float).
    pub input: PathBuf,
    /// Mono output WAV, written at the input's sample format.
    pub output: PathBuf,
    #[command(flatten)]
    pub postfilter: PostfilterArgs,
    /// Per-bin CSV telemetry: frame, bin, freq_hz, cdr_db, diffuseness, gain.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
}

pub fn run(args: &DereverbArgs) -> Result<()> {
    let cfg = args.postfilter.config(None)?;
    let audio = wav::read(&args.input)?;
    audio.expect_layout(&args.input, 2, SAMPLE_RATE)?;
    let fb_cfg = FilterbankConfig::default();
    let out = dereverberate(&audio.channels[0], &audio.channels[1], &cfg, &fb_cfg)?;
    wav::write(&args.output, &[&out.output], audio.sample_rate, audio.encoding)?;
    if let Some(path) = &args.telemetry {
        write_output(Some(path), |w| out.write_telemetry_default(w))?;
    }
    println!(
        "estimator={} frames={} latency_samples={} latency_ms={} mean_gain={}",
        cfg.method.estimator(),
        out.gain.frames(),
        out.latency_samples,
        cdr_core::report::format_sig(1000.0 * out.latency_samples as f64 / fb_cfg.sample_rate),
        cdr_core::report::format_sig(out.mean_gain())
    );
    Ok(())
}
