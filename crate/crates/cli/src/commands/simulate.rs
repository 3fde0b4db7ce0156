//! `cdr simulate`: renders a scenario into WAV files with JSON sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use cdr_core::analysis::{evaluate_dereverb, geometric_tdoa, tail_coherence, DereverbEvaluation};
use cdr_core::coherence::tdoa_from_doa;
use cdr_core::metrics::{elr_time_averaged, power_grid, t60_from_edc};
use cdr_core::report::format_sig;
use cdr_core::simulator::{
    make_mixture, reverberant_mixture, simulate_rirs, synthetic_speech, white_noise, CdrTarget, MixtureSpec,
    ReverberantMixture,
};
use cdr_core::{dereverberate, CdrMethod, Filterbank, FilterbankConfig, PostfilterConfig};
use clap::Args;
use serde::Serialize;

use crate::common::{relative_to, write_json, write_output};
use crate::error::{input_format, schema, CliError, Result};
use crate::scenario::{
    load_scenario, BinTruth, Excitation, ExcitationKind, GroundTruth, MixtureSidecar, PostfilterSection, RirSidecar,
    ScenarioConfig, SIDECAR_VERSION,
};
use crate::wav::{self, Encoding};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    /// Output directory [default: the scenario's output_dir, else the current directory].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Metrics of the postfilter run of a scenario.
#[derive(Debug, Serialize)]
struct DereverbReport {
    estimator: String,
    tdoa_s: Option<f64>,
    #[serde(flatten)]
    evaluation: DereverbEvaluation,
}

struct Ctx<'a> {
    scenario: &'a ScenarioConfig,
    scenario_path: &'a Path,
    dir: PathBuf,
    seed: u64,
    rate: u32,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_wav(&self, name: &str, channels: &[&[f64]]) -> Result<()> {
        wav::write(&self.path(name), channels, self.rate, Encoding::Float32)?;
        println!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        write_json(Some(&self.path(name)), value)?;
        println!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn excitation(&self, e: &Excitation) -> Result<Vec<f64>> {
        let fs = f64::from(self.rate);
        match e.kind {
            ExcitationKind::Speech => Ok(synthetic_speech(e.duration_s, fs, self.seed)?),
            ExcitationKind::Noise => Ok(white_noise((e.duration_s * fs).round() as usize, self.seed)),
            ExcitationKind::Wav => {
                let path = relative_to(self.scenario_path, e.path.as_deref().expect("validated"));
                let audio = wav::read(&path)?;
                audio.expect_layout(&path, 1, self.rate)?;
                Ok(audio.channels.into_iter().next().expect("one channel"))
            }
        }
    }

    /// Ground truth of microphone 1 from its desired and undesired parts.
    fn truth(&self, desired: &[f64], undesired: &[f64]) -> Result<GroundTruth> {
        let fb = Filterbank::new(self.scenario.filterbank)?;
        let e = fb.analyze(desired)?;
        let l = fb.analyze(undesired)?;
        let s = elr_time_averaged(&power_grid(&e.data), &power_grid(&l.data), ..)?;
        Ok(GroundTruth {
            mean_db: s.mean_db,
            bins: fb
                .frequencies()
                .into_iter()
                .zip(s.per_bin_db)
                .map(|(freq_hz, ratio_db)| BinTruth { freq_hz, ratio_db })
                .collect(),
        })
    }

    /// Writes the clean, mixture and component files plus the sidecar, and
    /// runs the postfilter when configured.
    fn write_signal_set(
        &self,
        clean: &[f64],
        mix: &ReverberantMixture,
        names: [&str; 2],
        mic_distance: f64,
        sound_speed: f64,
        tdoa: f64,
    ) -> Result<()> {
        self.write_wav("clean.wav", &[clean])?;
        self.write_wav("mixture.wav", &[&mix.x[0], &mix.x[1]])?;
        self.write_wav(names[0], &[&mix.early[0], &mix.early[1]])?;
        self.write_wav(names[1], &[&mix.late[0], &mix.late[1]])?;
        let sidecar = MixtureSidecar {
            version: SIDECAR_VERSION,
            seed: self.seed,
            sample_rate: f64::from(self.rate),
            mic_distance,
            sound_speed,
            tdoa_s: tdoa,
            clean: "clean.wav".into(),
            mixture: "mixture.wav".into(),
            desired: names[0].into(),
            undesired: names[1].into(),
            truth: self.truth(&mix.early[0], &mix.late[0])?,
        };
        println!("ground truth at microphone 1: {} dB", format_sig(sidecar.truth.mean_db));
        self.write_json("mixture.json", &sidecar)?;
        if let Some(pf) = &self.scenario.postfilter {
            let cfg = postfilter_config(pf, mic_distance, sound_speed, tdoa)?;
            let fb_cfg: FilterbankConfig = self.scenario.filterbank;
            let out = dereverberate(&mix.x[0], &mix.x[1], &cfg, &fb_cfg)?;
            self.write_wav("processed.wav", &[&out.output])?;
            let report = DereverbReport {
                estimator: cfg.method.estimator().to_string(),
                tdoa_s: cfg.method.tdoa(),
                evaluation: evaluate_dereverb(mix, &cfg, &fb_cfg, 0.0)?,
            };
            println!(
                "postfilter {}: ELR improvement {} dB, fwSegSDR {} dB",
                report.estimator,
                format_sig(report.evaluation.elr_improvement_db),
                format_sig(report.evaluation.fwsegsdr_db)
            );
            self.write_json("dereverb.json", &report)?;
        }
        Ok(())
    }
}

fn postfilter_config(pf: &PostfilterSection, mic_distance: f64, sound_speed: f64, tdoa: f64) -> Result<PostfilterConfig> {
    let tdoa = pf.estimator.requires_tdoa().then_some(pf.tdoa.unwrap_or(tdoa));
    let cfg = PostfilterConfig {
        mu: pf.mu,
        g_min: pf.g_min,
        lambda: pf.lambda,
        method: CdrMethod::new(pf.estimator, tdoa)?,
        noise_model: pf.noise_model,
        mic_distance,
        sound_speed,
    };
    cfg.validate().map_err(|e| CliError::Schema(format!("postfilter: {e}")))?;
    Ok(cfg)
}

fn run_room(ctx: &Ctx) -> Result<()> {
    let section = ctx.scenario.room.as_ref().expect("validated");
    let room = section.to_room()?;
    let rirs = simulate_rirs(&room, section.stop_threshold_db)?;
    let len = rirs.iter().map(|h| h.samples.len()).max().unwrap_or(0);
    let padded: Vec<Vec<f64>> = rirs
        .iter()
        .map(|h| {
            let mut s = h.samples.clone();
            s.resize(len, 0.0);
            s
        })
        .collect();
    let refs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    ctx.write_wav("rir.wav", &refs)?;
    let sidecar = RirSidecar {
        version: SIDECAR_VERSION,
        sample_rate: room.sample_rate,
        sound_speed: room.sound_speed,
        dims: room.dims,
        beta: room.beta,
        source: room.source,
        positions: room.mics.clone(),
        te: section.te,
        onsets: rirs.iter().map(|h| h.onset()).collect(),
        eyring_t60_s: room.eyring_t60(),
        t60_s: rirs.iter().map(|h| t60_from_edc(h).ok()).collect(),
    };
    ctx.write_json("rir.json", &sidecar)?;

    let clean = ctx.scenario.excitation.as_ref().map(|e| ctx.excitation(e)).transpose()?;
    if let Some(coh) = &ctx.scenario.coherence {
        let pairs = coh.pairs.unwrap_or(room.mics.len().saturating_sub(1));
        if pairs == 0 || pairs >= room.mics.len() {
            return schema(format!("coherence: {pairs} pairs need {} microphones", pairs + 1));
        }
        let d = mic_spacing(&room.mics[0], &room.mics[1]);
        let excitation = clean
            .clone()
            .unwrap_or_else(|| white_noise(10 * ctx.rate as usize, ctx.seed));
        let fb = Filterbank::new(ctx.scenario.filterbank)?;
        let curve = tail_coherence(&rirs, &excitation, section.te, pairs, d, room.sound_speed, &fb)?;
        let path = ctx.path("coherence.csv");
        write_output(Some(&path), |w: &mut dyn Write| {
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
        })?;
        println!("wrote {}", path.display());
        println!(
            "tail coherence over {pairs} pairs: MSE vs sinc {}, MSE vs J0 {}, mean excess over sinc 0.5-4 kHz {}",
            format_sig(curve.mse_sinc()),
            format_sig(curve.mse_j0()),
            format_sig(curve.mean_excess_over_sinc(500.0, 4000.0))
        );
    }
    if let Some(clean) = clean {
        if rirs.len() < 2 {
            return schema("a room excitation needs at least two microphones");
        }
        let mix = reverberant_mixture(&clean, [&rirs[0], &rirs[1]], section.te)?;
        let d = mic_spacing(&room.mics[0], &room.mics[1]);
        let tdoa = geometric_tdoa(&room, 0, 1);
        ctx.write_signal_set(&clean, &mix, ["early.wav", "late.wav"], d, room.sound_speed, tdoa)?;
    }
    Ok(())
}

fn run_mixture(ctx: &Ctx) -> Result<()> {
    let m = ctx.scenario.mixture.as_ref().expect("validated");
    let clean = ctx.excitation(ctx.scenario.excitation.as_ref().expect("validated"))?;
    let spec = MixtureSpec {
        doa: m.doa_deg.to_radians(),
        target: CdrTarget::Broadband(m.cdr_db),
        mic_distance: m.mic_distance,
        sound_speed: m.sound_speed,
        sample_rate: m.sample_rate,
        field: m.field,
        num_sources: m.num_sources,
        seed: ctx.seed,
    };
    let mix = make_mixture(&clean, &spec)?;
    println!("realized broadband CDR: {} dB", format_sig(mix.realized_cdr_db));
    let tdoa = tdoa_from_doa(spec.doa, m.mic_distance, m.sound_speed);
    let set = ReverberantMixture {
        x: mix.x,
        early: mix.direct,
        late: mix.noise,
    };
    ctx.write_signal_set(&clean, &set, ["direct.wav", "noise.wav"], m.mic_distance, m.sound_speed, tdoa)
}

fn mic_spacing(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let rate = scenario
        .room
        .as_ref()
        .map(|r| r.sample_rate)
        .or(scenario.mixture.as_ref().map(|m| m.sample_rate))
        .expect("validated");
    if rate.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&rate) {
        return input_format(format!("sample rate {rate} cannot be stored in a WAV file"));
    }
    let dir = match (&args.out_dir, &scenario.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => relative_to(&args.scenario, d),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::writing(&dir, e))?;
    let ctx = Ctx {
        scenario: &scenario,
        scenario_path: &args.scenario,
        dir,
        seed: args.seed.unwrap_or(scenario.seed()),
        rate: rate as u32,
    };
    if scenario.room.is_some() {
        run_room(&ctx)
    } else {
        run_mixture(&ctx)
    }
}
