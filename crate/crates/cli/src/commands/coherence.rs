//! `cdr analyze-coherence`: long-run spatial coherence of recordings or of
//! reverberation tails, with model curves and ELR-based classification.

use std::io::Write;
use std::path::{Path, PathBuf};

use cdr_core::analysis::{
    analyze_mixture, bins_in_range, classify_by_elr, pair_averaged_coherence, tail_coherence, CoherenceCurve,
};
use cdr_core::coherence::DEFAULT_SOUND_SPEED;
use cdr_core::enhancement::DEFAULT_MIC_DISTANCE;
use cdr_core::report::format_sig;
use cdr_core::simulator::{white_noise, ImpulseResponse, DEFAULT_TE};
use cdr_core::{CoherenceModels, Filterbank, FilterbankConfig, NoiseModel};
use clap::Args;

use crate::commands::load_mixture;
use crate::common::write_output;
use crate::error::{usage, Result};
use crate::wav;

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    /// Multichannel WAV whose adjacent channel pairs are analysed.
    #[arg(required_unless_present_any = ["rir", "classify_elr"], conflicts_with = "rir")]
    pub input: Option<PathBuf>,
    /// Multichannel impulse response WAV; the coherence of its late parts is analysed.
    #[arg(long)]
    pub rir: Option<PathBuf>,
    /// Mono excitation convolved with the impulse responses [default: 10 s of seeded white noise].
    #[arg(long, requires = "rir")]
    pub excitation: Option<PathBuf>,
    /// Early/late split after the direct-path onset, seconds.
    #[arg(long, default_value_t = DEFAULT_TE)]
    pub te: f64,
    /// Number of adjacent pairs to average [default: all].
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Adjacent microphone spacing, meters.
    #[arg(long, default_value_t = DEFAULT_MIC_DISTANCE)]
    pub mic_distance: f64,
    /// Speed of sound, m/s.
    #[arg(long, default_value_t = DEFAULT_SOUND_SPEED)]
    pub sound_speed: f64,
    /// Seed of the default excitation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coherence CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Classify time-frequency bins of a simulated mixture by their ELR.
    #[arg(long, requires = "truth")]
    pub classify_elr: bool,
    /// Mixture sidecar written by `cdr simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Lower bound of the high-ELR class, dB.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub high_db: f64,
    /// Upper bound of the low-ELR class, dB.
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub low_db: f64,
    /// Frequency range of the classified bins, Hz.
    #[arg(long, default_value_t = 100.0)]
    pub min_freq: f64,
    #[arg(long, default_value_t = 8000.0)]
    pub max_freq: f64,
    /// Forgetting factor of the recursive coherence estimate used for classification.
    #[arg(long, default_value_t = 0.68)]
    pub lambda: f64,
    /// Histogram CSV of the classified coherence samples.
    #[arg(long, requires = "classify_elr")]
    pub histogram: Option<PathBuf>,
    /// Histogram cells per axis over [−1, 1].
    #[arg(long, default_value_t = 40)]
    pub cells: usize,
}

fn write_curve(path: Option<&Path>, curve: &CoherenceCurve) -> Result<()> {
    write_output(path, |w: &mut dyn Write| {
        writeln!(w, "freq_hz,re,im,sinc,j0")?;
        for k in 0..curve.freqs.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                format_sig(curve.freqs[k]),
                format_sig(curve.gamma[k].re),
                format_sig(curve.gamma[k].im),
                format_sig(curve.sinc[k]),
                format_sig(curve.j0[k])
            )?;
        }
        Ok(())
    })
}

fn pairs_for(requested: Option<usize>, channels: usize) -> Result<usize> {
    let pairs = requested.unwrap_or(channels.saturating_sub(1));
    if pairs == 0 || pairs >= channels {
        return usage(format!("{pairs} adjacent pairs need {} channels, found {channels}", pairs + 1));
    }
    Ok(pairs)
}

fn curve(args: &CoherenceArgs, fb: &Filterbank) -> Result<Option<CoherenceCurve>> {
    let rate = fb.config().sample_rate as u32;
    if let Some(path) = &args.input {
        let audio = wav::read(path)?;
        let pairs = pairs_for(args.pairs, audio.channels.len())?;
        audio.expect_layout(path, audio.channels.len(), rate)?;
        return Ok(Some(pair_averaged_coherence(
            &audio.channels,
            pairs,
            args.mic_distance,
            args.sound_speed,
            fb,
        )?));
    }
    let Some(path) = &args.rir else {
        return Ok(None);
    };
    let audio = wav::read(path)?;
    let pairs = pairs_for(args.pairs, audio.channels.len())?;
    audio.expect_layout(path, audio.channels.len(), rate)?;
    let excitation = match &args.excitation {
        Some(p) => {
            let e = wav::read(p)?;
            e.expect_layout(p, 1, rate)?;
            e.channels.into_iter().next().expect("one channel")
        }
        None => white_noise(10 * rate as usize, args.seed),
    };
    let rirs: Vec<ImpulseResponse> = audio
        .channels
        .into_iter()
        .map(|s| ImpulseResponse::new(s, f64::from(rate)))
        .collect();
    Ok(Some(tail_coherence(
        &rirs,
        &excitation,
        args.te,
        pairs,
        args.mic_distance,
        args.sound_speed,
        fb,
    )?))
}

fn classify(args: &CoherenceArgs, truth: &Path, fb: &Filterbank) -> Result<()> {
    let (sidecar, mix) = load_mixture(truth)?;
    if sidecar.sample_rate != fb.config().sample_rate {
        return usage("the mixture sample rate differs from the filterbank's");
    }
    let analysis = analyze_mixture(&mix, args.lambda, fb)?;
    let bins = bins_in_range(&analysis.freqs, args.min_freq, args.max_freq);
    let classes = classify_by_elr(&analysis, &bins, args.high_db, args.low_db)?;
    let models = CoherenceModels::new(
        &analysis.freqs,
        sidecar.mic_distance,
        sidecar.sound_speed,
        Some(sidecar.tdoa_s),
        NoiseModel::Diffuse,
    )?;
    for (name, high) in [("high", true), ("low", false)] {
        match classes.centroid_distances(&models, high) {
            Ok(c) => eprintln!(
                "{name}-ELR class: {} samples, mean distance to direct model {}, to diffuse model {}",
                c.count,
                format_sig(c.to_direct),
                format_sig(c.to_noise)
            ),
            Err(e) => eprintln!("{name}-ELR class: {e}"),
        }
    }
    if let Some(path) = &args.histogram {
        if args.cells == 0 {
            return usage("--cells must be positive");
        }
        let centre = |i: usize| -1.0 + (i as f64 + 0.5) * 2.0 / args.cells as f64;
        write_output(Some(path), |w: &mut dyn Write| {
            writeln!(w, "class,re,im,count")?;
            for (name, high) in [("high", true), ("low", false)] {
                for (iy, row) in classes.histogram(high, args.cells).iter().enumerate() {
                    for (ix, count) in row.iter().enumerate() {
                        writeln!(w, "{name},{},{},{count}", format_sig(centre(ix)), format_sig(centre(iy)))?;
                    }
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn run(args: &CoherenceArgs) -> Result<()> {
    let fb = Filterbank::new(FilterbankConfig::default())?;
    if let Some(c) = curve(args, &fb)? {
        eprintln!(
            "{} pair(s): MSE vs sinc {}, MSE vs J0 {}",
            c.pairs,
            format_sig(c.mse_sinc()),
            format_sig(c.mse_j0())
        );
        write_curve(args.out.as_deref(), &c)?;
    }
    if args.classify_elr {
        classify(args, args.truth.as_deref().expect("required by clap"), &fb)?;
    }
    Ok(())
}
