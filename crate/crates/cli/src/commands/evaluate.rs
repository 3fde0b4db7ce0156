//! `cdr evaluate`: ELR, fwSegSDR and diffuseness MSE report for a signal
//! set with known early and late components.

use std::path::PathBuf;

use cdr_core::analysis::{
    analyze_mixture, estimator_mse, evaluate_dereverb, evaluate_processed, DereverbEvaluation, ProcessedEvaluation,
};
use cdr_core::simulator::{reverberant_mixture, ImpulseResponse, ReverberantMixture, DEFAULT_TE};
use cdr_core::{Estimator, Filterbank, FilterbankConfig};
use clap::Args;
use serde::Serialize;

use crate::commands::dereverb::SAMPLE_RATE;
use crate::commands::load_mixture;
use crate::common::{write_json, PostfilterArgs};
use crate::error::{input_format, Result};
use crate::wav;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Mixture sidecar written by `cdr simulate`.
    #[arg(long, required_unless_present = "rir", conflicts_with_all = ["rir", "clean"])]
    pub truth: Option<PathBuf>,
    /// Mono clean signal, convolved with the first two channels of --rir.
    #[arg(long, requires = "rir")]
    pub clean: Option<PathBuf>,
    /// Multichannel impulse response WAV.
    #[arg(long, requires = "clean")]
    pub rir: Option<PathBuf>,
    /// Early/late split of --rir after the direct-path onset, seconds.
    #[arg(long, default_value_t = DEFAULT_TE)]
    pub te: f64,
    /// Mono output of any processing of the mixture, measured against microphone 1.
    #[arg(long)]
    pub processed: Option<PathBuf>,
    #[command(flatten)]
    pub postfilter: PostfilterArgs,
    /// Report the diffuseness MSE of every estimator instead of the selected one.
    #[arg(long)]
    pub all_estimators: bool,
    /// Bins below this frequency are left out of the ELR averages, Hz.
    #[arg(long, default_value_t = 0.0)]
    pub min_freq: f64,
    /// Report JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct MseEntry {
    estimator: Estimator,
    /// `None` when the estimator needs a TDOA and none is known.
    mse: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report {
    estimator: Estimator,
    tdoa_s: Option<f64>,
    /// The postfilter with the selected estimator, run on the mixture.
    postfilter: DereverbEvaluation,
    /// The file given by --processed.
    processed: Option<ProcessedEvaluation>,
    diffuseness_mse: Vec<MseEntry>,
}

fn from_rir(args: &EvaluateArgs) -> Result<ReverberantMixture> {
    let (clean_path, rir_path) = (args.clean.as_ref().expect("clap"), args.rir.as_ref().expect("clap"));
    let clean = wav::read(clean_path)?;
    clean.expect_layout(clean_path, 1, SAMPLE_RATE)?;
    let rir = wav::read(rir_path)?;
    if rir.channels.len() < 2 {
        return input_format(format!("{}: need at least two channels", rir_path.display()));
    }
    rir.expect_layout(rir_path, rir.channels.len(), SAMPLE_RATE)?;
    let h: Vec<ImpulseResponse> = rir.channels[..2]
        .iter()
        .map(|s| ImpulseResponse::new(s.clone(), f64::from(SAMPLE_RATE)))
        .collect();
    Ok(reverberant_mixture(&clean.channels[0], [&h[0], &h[1]], args.te)?)
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let (mix, known_tdoa) = match &args.truth {
        Some(path) => {
            let (sidecar, mix) = load_mixture(path)?;
            if sidecar.sample_rate != f64::from(SAMPLE_RATE) {
                return input_format(format!(
                    "{}: expected a sample rate of {SAMPLE_RATE} Hz, found {} Hz",
                    path.display(),
                    sidecar.sample_rate
                ));
            }
            (mix, Some(sidecar.tdoa_s))
        }
        None => (from_rir(args)?, None),
    };
    let tdoa = args.postfilter.tdoa().or(known_tdoa);
    let cfg = args.postfilter.config(tdoa)?;
    let fb_cfg = FilterbankConfig::default();
    let postfilter = evaluate_dereverb(&mix, &cfg, &fb_cfg, args.min_freq)?;

    let processed = match &args.processed {
        Some(path) => {
            let audio = wav::read(path)?;
            audio.expect_layout(path, 1, SAMPLE_RATE)?;
            if audio.len() != mix.x[0].len() {
                return input_format(format!(
                    "{}: {} samples, the mixture has {}",
                    path.display(),
                    audio.len(),
                    mix.x[0].len()
                ));
            }
            Some(evaluate_processed(&mix, &audio.channels[0], &fb_cfg, args.min_freq)?)
        }
        None => None,
    };

    let estimators: Vec<Estimator> = if args.all_estimators {
        Estimator::ALL.to_vec()
    } else {
        vec![args.postfilter.estimator]
    };
    let usable: Vec<Estimator> = estimators
        .iter()
        .copied()
        .filter(|e| tdoa.is_some() || !e.requires_tdoa())
        .collect();
    let analysis = analyze_mixture(&mix, cfg.lambda, &Filterbank::new(fb_cfg)?)?;
    let mse = estimator_mse(
        &analysis,
        &usable,
        tdoa,
        cfg.mic_distance,
        cfg.sound_speed,
        cfg.noise_model,
    )?;
    let diffuseness_mse = estimators
        .iter()
        .map(|&e| MseEntry {
            estimator: e,
            mse: mse.iter().find(|(u, _)| *u == e).map(|(_, v)| *v),
        })
        .collect();
    write_json(
        args.out.as_deref(),
        &Report {
            estimator: cfg.method.estimator(),
            tdoa_s: cfg.method.tdoa(),
            postfilter,
            processed,
            diffuseness_mse,
        },
    )
}
