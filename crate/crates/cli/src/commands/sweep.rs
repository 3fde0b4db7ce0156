//! `cdr sweep-bias`: estimator output on the ideal coherence line, with
//! optional model errors.

use std::io::Write;
use std::path::PathBuf;

use cdr_core::analysis::{bias_sweep, model_error_sweep, ModelError, SweepGrid, TdoaPolicy};
use cdr_core::coherence::DEFAULT_SOUND_SPEED;
use cdr_core::enhancement::DEFAULT_MIC_DISTANCE;
use cdr_core::estimators::{cdr_to_db, DEFAULT_CDR_CAP_DB};
use cdr_core::report::format_sig;
use cdr_core::Estimator;
use clap::{Args, ValueEnum};

use crate::common::write_output;
use crate::error::{usage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorKind {
    /// Offset of the noise coherence model, Γ̃n − Γn.
    Noise,
    /// Rotation of the direct coherence model, arg Γ̃s − arg Γs, radians.
    Phase,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated estimators.
    #[arg(long, value_delimiter = ',', default_value = "jeub,thiergart1,thiergart2,prop1,prop2,prop2u,prop3,prop4")]
    pub estimators: Vec<Estimator>,
    /// Microphone spacing, meters.
    #[arg(long, default_value_t = DEFAULT_MIC_DISTANCE)]
    pub mic_distance: f64,
    /// Speed of sound, m/s.
    #[arg(long, default_value_t = DEFAULT_SOUND_SPEED)]
    pub sound_speed: f64,
    /// Comma-separated frequencies, Hz.
    #[arg(long, value_delimiter = ',', default_value = "125,250,500,1000,2000,4000,8000")]
    pub freqs: Vec<f64>,
    /// TDOA per frequency: zero, fifth-period (1/(5f)), endfire (d/c), or seconds.
    #[arg(long, default_value = "fifth-period", allow_hyphen_values = true)]
    pub tdoa_policy: TdoaPolicy,
    /// Comma-separated true CDRs, dB [default: −30..30 in 1 dB steps, or −10,10 with --model-error].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cdr_db: Option<Vec<f64>>,
    /// Sweep a model error instead of the bias.
    #[arg(long)]
    pub model_error: Option<ErrorKind>,
    /// Comma-separated model errors [default: −0.3..0.3 in steps of 0.05].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub errors: Option<Vec<f64>>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn db(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |c| format_sig(cdr_to_db(c, DEFAULT_CDR_CAP_DB)))
}

pub fn run(args: &SweepArgs) -> Result<()> {
    if args.estimators.is_empty() || args.freqs.is_empty() {
        return usage("at least one estimator and one frequency are required");
    }
    if args.freqs.iter().any(|f| !(*f > 0.0)) {
        return usage("frequencies must be positive");
    }
    if args.errors.is_some() && args.model_error.is_none() {
        return usage("--errors requires --model-error");
    }
    let mut grid = SweepGrid {
        mic_distance: args.mic_distance,
        sound_speed: args.sound_speed,
        ..SweepGrid::standard(args.freqs.clone(), args.tdoa_policy)
    };
    match args.model_error {
        None => {
            if let Some(c) = &args.cdr_db {
                grid.cdr_db = c.clone();
            }
            let points = bias_sweep(&args.estimators, &grid);
            write_output(args.out.as_deref(), |w: &mut dyn Write| {
                writeln!(w, "freq_hz,tdoa_s,cdr_true_db,estimator,cdr_est_db")?;
                for p in &points {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        format_sig(p.freq_hz),
                        format_sig(p.tdoa),
                        format_sig(p.cdr_true_db),
                        p.estimator,
                        db(p.cdr_est)
                    )?;
                }
                Ok(())
            })
        }
        Some(kind) => {
            grid.cdr_db = args.cdr_db.clone().unwrap_or_else(|| vec![-10.0, 10.0]);
            let errors = args
                .errors
                .clone()
                .unwrap_or_else(|| (-6..=6).map(|i| f64::from(i) * 0.05).collect());
            let kind = match kind {
                ErrorKind::Noise => ModelError::NoiseCoherence,
                ErrorKind::Phase => ModelError::DirectPhase,
            };
            let points = model_error_sweep(&args.estimators, &grid, kind, &errors);
            write_output(args.out.as_deref(), |w: &mut dyn Write| {
                writeln!(w, "model_error,error,freq_hz,cdr_true_db,estimator,cdr_est_db,diffuseness_error")?;
                for p in &points {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        p.kind.id(),
                        format_sig(p.error),
                        format_sig(p.freq_hz),
                        format_sig(p.cdr_true_db),
                        p.estimator,
                        db(p.cdr_est),
                        p.diffuseness_error.map_or_else(|| "nan".into(), format_sig)
                    )?;
                }
                Ok(())
            })
        }
    }
}
