//! Experiments built from the other modules: pair-averaged coherence of
//! reverberation tails, ELR-classified coherence statistics, estimator bias
//! and model-error sweeps, and end-to-end evaluation on reverberant speech.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherence::{
    average_coherence, mix_coherence, model_2d_isotropic, model_diffuse, model_plane_wave, track_coherence,
    CoherenceModels, CoherenceTrack, NoiseModel,
};
use crate::enhancement::{dereverberate, preprocess, PostfilterConfig};
use crate::error::{config_err, input_err, Error, Result};
use crate::estimators::{diffuseness, estimate_cdr, Estimator};
use crate::filterbank::{Filterbank, FilterbankConfig, Spectrogram};
use crate::grid::TfGrid;
use crate::metrics::{diffuseness_mse, elr_field, elr_time_averaged, fwsegsnr, power_grid, ElrField};
use crate::simulator::{convolve, linear_array, split_rir, ImpulseResponse, ReverberantMixture, RoomSpec};

/// Dimensions of the small simulated room, meters.
pub const SMALL_ROOM: [f64; 3] = [4.0, 3.0, 2.5];

/// Dimensions of the large simulated room, meters.
pub const LARGE_ROOM: [f64; 3] = [15.0, 18.0, 10.0];

/// Surface reflectivity configurations of the simulated rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reflectivity {
    /// All surfaces 0.9.
    Uniform,
    /// Walls 0.9, floor and ceiling 0.1.
    AbsorbingFloorCeiling,
    /// Walls 0.5, floor and ceiling 0.9.
    AbsorbingWalls,
}

impl Reflectivity {
    pub const ALL: [Reflectivity; 3] = [
        Reflectivity::Uniform,
        Reflectivity::AbsorbingFloorCeiling,
        Reflectivity::AbsorbingWalls,
    ];

    pub fn beta(self) -> [f64; 6] {
        match self {
            Reflectivity::Uniform => [0.9; 6],
            Reflectivity::AbsorbingFloorCeiling => RoomSpec::walls_floor_ceiling(0.9, 0.1),
            Reflectivity::AbsorbingWalls => RoomSpec::walls_floor_ceiling(0.5, 0.9),
        }
    }
}

/// Placement of a uniform linear array at the room centre, parallel to the
/// x axis, with the source in the horizontal plane of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayPlacement {
    pub mic_count: usize,
    pub mic_distance: f64,
    /// Source distance from the array centre, meters.
    pub source_distance: f64,
    /// Source direction from broadside, degrees. Positive angles turn
    /// towards −x, the side of the first microphone, matching the sign of
    /// the TDOA `d·sin(θ)/c` between microphones 1 and 2.
    pub source_doa_deg: f64,
}

impl Default for ArrayPlacement {
    fn default() -> Self {
        Self {
            mic_count: 8,
            mic_distance: 0.08,
            source_distance: 1.2,
            source_doa_deg: 30.0,
        }
    }
}

/// A room with the array at its centre.
pub fn centred_array_room(dims: [f64; 3], beta: [f64; 6], placement: &ArrayPlacement) -> RoomSpec {
    let centre = [dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0];
    let theta = placement.source_doa_deg.to_radians();
    let source = [
        centre[0] - placement.source_distance * theta.sin(),
        centre[1] + placement.source_distance * theta.cos(),
        centre[2],
    ];
    RoomSpec {
        dims,
        beta,
        source,
        mics: linear_array(centre, placement.mic_count, placement.mic_distance),
        sample_rate: 16000.0,
        sound_speed: crate::coherence::DEFAULT_SOUND_SPEED,
    }
}

/// Direct-path arrival difference, microphone `b` minus microphone `a`, s.
pub fn geometric_tdoa(room: &RoomSpec, a: usize, b: usize) -> f64 {
    let dist = |m: &[f64; 3]| m.iter().zip(&room.source).map(|(p, s)| (p - s).powi(2)).sum::<f64>().sqrt();
    (dist(&room.mics[b]) - dist(&room.mics[a])) / room.sound_speed
}

/// Pair-averaged long-run coherence and the two isotropic models.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub freqs: Vec<f64>,
    pub gamma: Vec<Complex64>,
    pub sinc: Vec<f64>,
    pub j0: Vec<f64>,
    pub pairs: usize,
}

impl CoherenceCurve {
    /// Mean squared difference between Re Γ and `model` over bins with
    /// frequency in `[lo, hi]`.
    pub fn mse(&self, model: &[f64], lo: f64, hi: f64) -> f64 {
        let (sum, n) = self
            .freqs
            .iter()
            .zip(&self.gamma)
            .zip(model)
            .filter(|((f, _), _)| (lo..=hi).contains(*f))
            .fold((0.0, 0usize), |(s, n), ((_, g), m)| (s + (g.re - m).powi(2), n + 1));
        sum / n.max(1) as f64
    }

    pub fn mse_sinc(&self) -> f64 {
        self.mse(&self.sinc, 0.0, f64::INFINITY)
    }

    pub fn mse_j0(&self) -> f64 {
        self.mse(&self.j0, 0.0, f64::INFINITY)
    }

    /// Mean of `Re Γ − sinc` over `[lo, hi]`.
    pub fn mean_excess_over_sinc(&self, lo: f64, hi: f64) -> f64 {
        let (sum, n) = self
            .freqs
            .iter()
            .zip(&self.gamma)
            .zip(&self.sinc)
            .filter(|((f, _), _)| (lo..=hi).contains(*f))
            .fold((0.0, 0usize), |(s, n), ((_, g), m)| (s + g.re - m, n + 1));
        sum / n.max(1) as f64
    }
}

/// Long-run coherence of adjacent microphone pairs `(i, i+1)` for
/// `i < pairs`, averaged over pairs. `channels` are time signals at the
/// microphones; `mic_distance` is the adjacent spacing used for the models.
pub fn pair_averaged_coherence(
    channels: &[Vec<f64>],
    pairs: usize,
    mic_distance: f64,
    sound_speed: f64,
    fb: &Filterbank,
) -> Result<CoherenceCurve> {
    if pairs == 0 || pairs + 1 > channels.len() {
        return input_err(format!(
            "{pairs} adjacent pairs need {} channels, got {}",
            pairs + 1,
            channels.len()
        ));
    }
    let spectra: Vec<Spectrogram> = channels[..=pairs].iter().map(|c| fb.analyze(c)).collect::<Result<_>>()?;
    let freqs = fb.frequencies();
    let mut gamma = vec![Complex64::new(0.0, 0.0); freqs.len()];
    for p in 0..pairs {
        let g = average_coherence(&spectra[p], &spectra[p + 1])?;
        for (acc, v) in gamma.iter_mut().zip(g) {
            *acc += v / pairs as f64;
        }
    }
    Ok(CoherenceCurve {
        sinc: model_diffuse(mic_distance, &freqs, sound_speed),
        j0: model_2d_isotropic(mic_distance, &freqs, sound_speed),
        freqs,
        gamma,
        pairs,
    })
}

/// Coherence of the reverberation tails: each RIR is split at `te` after
/// its onset, the late parts are convolved with `excitation`, and adjacent
/// pair coherences are averaged.
pub fn tail_coherence(
    rirs: &[ImpulseResponse],
    excitation: &[f64],
    te: f64,
    pairs: usize,
    mic_distance: f64,
    sound_speed: f64,
    fb: &Filterbank,
) -> Result<CoherenceCurve> {
    let channels: Vec<Vec<f64>> = rirs
        .iter()
        .take(pairs + 1)
        .map(|h| split_rir(h, te).map(|(_, late)| convolve(excitation, &late.samples)))
        .collect::<Result<_>>()?;
    pair_averaged_coherence(&channels, pairs, mic_distance, sound_speed, fb)
}

/// Ground-truth and observed quantities of a two-channel reverberant
/// mixture in the filterbank domain.
#[derive(Debug, Clone)]
pub struct MixtureAnalysis {
    pub freqs: Vec<f64>,
    pub track: CoherenceTrack,
    /// Per-bin ELR of the channel-averaged early and late powers.
    pub elr: ElrField,
}

/// Channel-averaged power of two spectrograms.
fn mean_power(a: &Spectrogram, b: &Spectrogram) -> TfGrid<f64> {
    let pa = power_grid(&a.data);
    let pb = power_grid(&b.data);
    let mut out = pa.clone();
    for (o, v) in out.as_mut_slice().iter_mut().zip(pb.as_slice()) {
        *o = 0.5 * (*o + v);
    }
    out
}

/// Recursive coherence of the mixture and ELR ground truth, both smoothed
/// with the same forgetting factor.
pub fn analyze_mixture(mix: &ReverberantMixture, lambda: f64, fb: &Filterbank) -> Result<MixtureAnalysis> {
    let an = |x: &Vec<f64>| fb.analyze(x);
    let (x1, x2) = (an(&mix.x[0])?, an(&mix.x[1])?);
    let (e1, e2) = (an(&mix.early[0])?, an(&mix.early[1])?);
    let (l1, l2) = (an(&mix.late[0])?, an(&mix.late[1])?);
    Ok(MixtureAnalysis {
        freqs: fb.frequencies(),
        track: track_coherence(&x1, &x2, lambda)?,
        elr: elr_field(&mean_power(&e1, &e2), &mean_power(&l1, &l2), lambda)?,
    })
}

/// Coherence samples of bins classified by ELR.
#[derive(Debug, Clone, PartialEq)]
pub struct ElrClasses {
    pub high_db: f64,
    pub low_db: f64,
    /// Bins used for the classification.
    pub bins: Vec<usize>,
    /// Coherence of bins with ELR above `high_db`, with their bin index.
    pub high: Vec<(usize, Complex64)>,
    /// Coherence of bins with ELR below `low_db`, with their bin index.
    pub low: Vec<(usize, Complex64)>,
}

/// Mean distances of a class's samples to the direct and noise models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidDistances {
    pub count: usize,
    /// Distance from the class centroid to the plane-wave model.
    pub to_direct: f64,
    /// Distance from the class centroid to the diffuse model.
    pub to_noise: f64,
}

impl ElrClasses {
    /// Per-bin centroid distances averaged over bins, weighted by the
    /// number of samples in each bin.
    pub fn centroid_distances(&self, models: &CoherenceModels, high: bool) -> Result<CentroidDistances> {
        let samples = if high { &self.high } else { &self.low };
        let mut to_direct = 0.0;
        let mut to_noise = 0.0;
        let mut count = 0;
        for &k in &self.bins {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut n = 0usize;
            for (_, g) in samples.iter().filter(|(b, _)| *b == k) {
                sum += g;
                n += 1;
            }
            if n == 0 {
                continue;
            }
            let c = sum / n as f64;
            to_direct += n as f64 * (c - models.direct(k)).norm();
            to_noise += n as f64 * (c - models.gamma_n[k]).norm();
            count += n;
        }
        if count == 0 {
            return Err(Error::Measurement("class is empty".into()));
        }
        Ok(CentroidDistances {
            count,
            to_direct: to_direct / count as f64,
            to_noise: to_noise / count as f64,
        })
    }

    /// 2-D histogram of the complex coherence of one class over
    /// `[-1, 1] × [-1, 1]` with `cells` cells per axis, row-major in Im.
    pub fn histogram(&self, high: bool, cells: usize) -> Vec<Vec<usize>> {
        let samples = if high { &self.high } else { &self.low };
        let mut h = vec![vec![0usize; cells]; cells];
        let cell = |v: f64| (((v + 1.0) / 2.0 * cells as f64).floor() as isize).clamp(0, cells as isize - 1) as usize;
        for (_, g) in samples {
            h[cell(g.im)][cell(g.re)] += 1;
        }
        h
    }
}

/// Splits the valid bins of `bins` into high-ELR (above `high_db`) and
/// low-ELR (below `low_db`) classes.
pub fn classify_by_elr(analysis: &MixtureAnalysis, bins: &[usize], high_db: f64, low_db: f64) -> Result<ElrClasses> {
    if !(low_db <= high_db) {
        return config_err("low threshold must not exceed the high threshold");
    }
    let nb = analysis.freqs.len();
    if let Some(&k) = bins.iter().find(|&&k| k >= nb) {
        return input_err(format!("bin {k} out of range"));
    }
    let mut high = Vec::new();
    let mut low = Vec::new();
    for l in 0..analysis.track.gamma.frames() {
        for &k in bins {
            if !(analysis.track.valid[(l, k)] && analysis.elr.valid[(l, k)]) {
                continue;
            }
            let db = analysis.elr.db(l, k);
            let g = analysis.track.gamma[(l, k)];
            if db > high_db {
                high.push((k, g));
            } else if db < low_db {
                low.push((k, g));
            }
        }
    }
    Ok(ElrClasses {
        high_db,
        low_db,
        bins: bins.to_vec(),
        high,
        low,
    })
}

/// Bins whose centre frequency lies in `[lo, hi]`.
pub fn bins_in_range(freqs: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    freqs
        .iter()
        .enumerate()
        .filter(|(_, f)| (lo..=hi).contains(*f))
        .map(|(k, _)| k)
        .collect()
}

/// Per-estimator diffuseness MSE against the ELR ground truth of a
/// mixture analysis, with the direct model from `tdoa` and the noise model
/// `noise`.
pub fn estimator_mse(
    analysis: &MixtureAnalysis,
    estimators: &[Estimator],
    tdoa: Option<f64>,
    mic_distance: f64,
    sound_speed: f64,
    noise: NoiseModel,
) -> Result<Vec<(Estimator, f64)>> {
    let models = CoherenceModels::new(&analysis.freqs, mic_distance, sound_speed, tdoa, noise)?;
    estimators
        .iter()
        .map(|&e| {
            let est = estimate_cdr(&analysis.track, &models, e)?;
            let mse = diffuseness_mse(&analysis.elr.ratio, &analysis.elr.valid, &est.cdr, &est.valid)?;
            Ok((e, mse))
        })
        .collect()
}

/// Outcome of dereverberating a reverberant mixture whose early and late
/// components are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DereverbEvaluation {
    /// Time-averaged ELR of the spatially averaged input, mean over bins, dB.
    pub elr_input_db: f64,
    /// Time-averaged ELR of microphone 1, mean over bins, dB.
    pub elr_mic_db: f64,
    /// Time-averaged ELR after the postfilter, mean over bins, dB.
    pub elr_output_db: f64,
    /// Output ELR minus input ELR.
    pub elr_improvement_db: f64,
    /// Signal-to-distortion ratio of the processed early component.
    pub fwsegsdr_db: f64,
    pub mean_gain: f64,
}

/// Runs the postfilter on `mix.x` and applies the resulting gains to the
/// early and late components separately to measure the ELR before and after
/// processing. Bins below `min_freq` are excluded from the frequency average.
pub fn evaluate_dereverb(
    mix: &ReverberantMixture,
    cfg: &PostfilterConfig,
    fb_cfg: &FilterbankConfig,
    min_freq: f64,
) -> Result<DereverbEvaluation> {
    let fb = Filterbank::new(*fb_cfg)?;
    let out = dereverberate(&mix.x[0], &mix.x[1], cfg, fb_cfg)?;
    let an = |x: &Vec<f64>| fb.analyze(x);
    let (e1, e2) = (an(&mix.early[0])?, an(&mix.early[1])?);
    let (l1, l2) = (an(&mix.late[0])?, an(&mix.late[1])?);
    let combine = |a: &Spectrogram, b: &Spectrogram| -> Result<Spectrogram> {
        let mut y = a.zeros_like();
        for l in 0..a.frames() {
            y.data.frame_mut(l).copy_from_slice(&preprocess(a.frame(l), b.frame(l))?);
        }
        Ok(y)
    };
    let ye = combine(&e1, &e2)?;
    let yl = combine(&l1, &l2)?;
    let apply = |y: &Spectrogram| {
        let mut z = y.clone();
        for (v, g) in z.data.as_mut_slice().iter_mut().zip(out.gain.as_slice()) {
            *v *= g;
        }
        z
    };
    let (ze, zl) = (apply(&ye), apply(&yl));
    let first = out.freqs.iter().position(|f| *f >= min_freq).unwrap_or(0);
    let elr = |e: &Spectrogram, l: &Spectrogram| {
        elr_time_averaged(&power_grid(&e.data), &power_grid(&l.data), first..).map(|s| s.mean_db)
    };
    let elr_input_db = elr(&ye, &yl)?;
    let elr_output_db = elr(&ze, &zl)?;
    let elr_mic_db = elr(&e1, &l1)?;
    let fwsegsdr_db = fwsegsnr(&fb.synthesize(&ye)?, &fb.synthesize(&ze)?)?;
    Ok(DereverbEvaluation {
        elr_input_db,
        elr_mic_db,
        elr_output_db,
        elr_improvement_db: elr_output_db - elr_input_db,
        fwsegsdr_db,
        mean_gain: out.mean_gain(),
    })
}

/// Outcome of measuring an externally processed signal against the early
/// and late components of microphone 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedEvaluation {
    /// Time-averaged ELR of microphone 1, mean over bins, dB.
    pub elr_before_db: f64,
    /// Time-averaged ELR after applying the observed gains, dB.
    pub elr_after_db: f64,
    pub elr_improvement_db: f64,
    /// Signal-to-distortion ratio of the early component under the observed gains.
    pub fwsegsdr_db: f64,
    /// Energy of the processed signal relative to microphone 1, dB.
    pub energy_ratio_db: f64,
}

/// Regularization of [`observed_gains`] relative to the mean bin power.
pub const OBSERVED_GAIN_FLOOR: f64 = 1e-10;

/// Per-bin gain that maps microphone 1 onto a processed signal,
/// `max(0, Re{Z·X1*}/max(|X1|², ε))` with `ε` a small fraction of the mean
/// power of `x1`.
pub fn observed_gains(x1: &Spectrogram, processed: &Spectrogram) -> Result<TfGrid<f64>> {
    if !x1.data.same_shape(&processed.data) {
        return input_err("processed and reference spectrograms differ in shape");
    }
    let xs = x1.data.as_slice();
    let eps = OBSERVED_GAIN_FLOOR * xs.iter().map(|v| v.norm_sqr()).sum::<f64>() / xs.len().max(1) as f64;
    let mut g = TfGrid::filled(x1.frames(), x1.bins(), 1.0);
    for ((out, x), z) in g.as_mut_slice().iter_mut().zip(xs).zip(processed.data.as_slice()) {
        let p = x.norm_sqr().max(eps);
        if p > 0.0 {
            *out = ((z * x.conj()).re / p).max(0.0);
        }
    }
    Ok(g)
}

/// Measures a processed single-channel signal of the mixture's length. The
/// gains observed relative to microphone 1 are applied to its early and late
/// components to obtain the ELR after processing.
pub fn evaluate_processed(
    mix: &ReverberantMixture,
    processed: &[f64],
    fb_cfg: &FilterbankConfig,
    min_freq: f64,
) -> Result<ProcessedEvaluation> {
    if processed.len() != mix.x[0].len() {
        return input_err(format!(
            "processed signal has {} samples, the mixture has {}",
            processed.len(),
            mix.x[0].len()
        ));
    }
    let fb = Filterbank::new(*fb_cfg)?;
    let gains = observed_gains(&fb.analyze(&mix.x[0])?, &fb.analyze(processed)?)?;
    let e1 = fb.analyze(&mix.early[0])?;
    let l1 = fb.analyze(&mix.late[0])?;
    let apply = |y: &Spectrogram| {
        let mut z = y.clone();
        for (v, g) in z.data.as_mut_slice().iter_mut().zip(gains.as_slice()) {
            *v *= g;
        }
        z
    };
    let (ze, zl) = (apply(&e1), apply(&l1));
    let first = fb.frequencies().iter().position(|f| *f >= min_freq).unwrap_or(0);
    let elr = |e: &Spectrogram, l: &Spectrogram| {
        elr_time_averaged(&power_grid(&e.data), &power_grid(&l.data), first..).map(|s| s.mean_db)
    };
    let elr_before_db = elr(&e1, &l1)?;
    let elr_after_db = elr(&ze, &zl)?;
    let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    Ok(ProcessedEvaluation {
        elr_before_db,
        elr_after_db,
        elr_improvement_db: elr_after_db - elr_before_db,
        fwsegsdr_db: fwsegsnr(&fb.synthesize(&e1)?, &fb.synthesize(&ze)?)?,
        energy_ratio_db: 10.0 * (energy(processed) / energy(&mix.x[0])).log10(),
    })
}

/// How the TDOA of a bias sweep depends on frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdoaPolicy {
    /// Broadside source, Δt = 0.
    Zero,
    /// Δt = 1/(5f): the direct phase is 0.4π at every frequency.
    FifthPeriod,
    /// Endfire source, Δt = d/c.
    Endfire,
    /// A fixed TDOA in seconds.
    Fixed(f64),
}

impl TdoaPolicy {
    pub fn tdoa(self, freq: f64, d: f64, c: f64) -> f64 {
        match self {
            TdoaPolicy::Zero => 0.0,
            TdoaPolicy::FifthPeriod => {
                if freq > 0.0 {
                    1.0 / (5.0 * freq)
                } else {
                    0.0
                }
            }
            TdoaPolicy::Endfire => d / c,
            TdoaPolicy::Fixed(t) => t,
        }
    }

    pub fn id(self) -> String {
        match self {
            TdoaPolicy::Zero => "zero".into(),
            TdoaPolicy::FifthPeriod => "fifth-period".into(),
            TdoaPolicy::Endfire => "endfire".into(),
            TdoaPolicy::Fixed(t) => format!("{t}"),
        }
    }
}

impl std::str::FromStr for TdoaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(TdoaPolicy::Zero),
            "fifth-period" => Ok(TdoaPolicy::FifthPeriod),
            "endfire" => Ok(TdoaPolicy::Endfire),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .map(TdoaPolicy::Fixed)
                .ok_or_else(|| Error::Config(format!("unknown TDOA policy '{other}'"))),
        }
    }
}

/// Geometry and grid of a model-based sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub mic_distance: f64,
    pub sound_speed: f64,
    pub freqs: Vec<f64>,
    pub cdr_db: Vec<f64>,
    pub tdoa: TdoaPolicy,
}

impl SweepGrid {
    /// CDR from −30 to 30 dB in 1 dB steps at the given frequencies.
    pub fn standard(freqs: Vec<f64>, tdoa: TdoaPolicy) -> Self {
        Self {
            mic_distance: 0.08,
            sound_speed: crate::coherence::DEFAULT_SOUND_SPEED,
            freqs,
            cdr_db: (-30..=30).map(f64::from).collect(),
            tdoa,
        }
    }
}

/// One point of a bias sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub freq_hz: f64,
    pub tdoa: f64,
    pub cdr_true_db: f64,
    pub estimator: Estimator,
    /// `None` where the estimator is undefined.
    pub cdr_est: Option<f64>,
}

/// Evaluates each estimator on coherence mixed exactly from the models.
pub fn bias_sweep(estimators: &[Estimator], grid: &SweepGrid) -> Vec<BiasPoint> {
    let mut out = Vec::new();
    for &f in &grid.freqs {
        let gn = model_diffuse(grid.mic_distance, &[f], grid.sound_speed)[0];
        let dt = grid.tdoa.tdoa(f, grid.mic_distance, grid.sound_speed);
        let gs = model_plane_wave(dt, &[f])[0];
        for &db in &grid.cdr_db {
            let gx = mix_coherence(10f64.powf(db / 10.0), gs, gn);
            for &e in estimators {
                out.push(BiasPoint {
                    freq_hz: f,
                    tdoa: dt,
                    cdr_true_db: db,
                    estimator: e,
                    cdr_est: e.evaluate(gx, gs, gn),
                });
            }
        }
    }
    out
}

/// Which model the estimators receive with an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelError {
    /// The noise coherence model is offset: `Γ̃n = Γn + error`.
    NoiseCoherence,
    /// The direct coherence model is rotated: `arg Γ̃s = arg Γs + error`.
    DirectPhase,
}

impl ModelError {
    pub fn id(self) -> &'static str {
        match self {
            ModelError::NoiseCoherence => "noise-coherence",
            ModelError::DirectPhase => "direct-phase",
        }
    }
}

/// One point of a model-error sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelErrorPoint {
    pub kind: ModelError,
    pub error: f64,
    pub freq_hz: f64,
    pub cdr_true_db: f64,
    pub estimator: Estimator,
    pub cdr_est: Option<f64>,
    /// Estimated minus true diffuseness.
    pub diffuseness_error: Option<f64>,
}

/// Evaluates each estimator with erroneous models: the observed coherence is
/// mixed from the true models and the estimator receives the perturbed one.
pub fn model_error_sweep(estimators: &[Estimator], grid: &SweepGrid, kind: ModelError, errors: &[f64]) -> Vec<ModelErrorPoint> {
    let mut out = Vec::new();
    for &f in &grid.freqs {
        let gn = model_diffuse(grid.mic_distance, &[f], grid.sound_speed)[0];
        let dt = grid.tdoa.tdoa(f, grid.mic_distance, grid.sound_speed);
        let gs = model_plane_wave(dt, &[f])[0];
        for &db in &grid.cdr_db {
            let cdr = 10f64.powf(db / 10.0);
            let gx = mix_coherence(cdr, gs, gn);
            for &err in errors {
                let (gs_m, gn_m) = match kind {
                    ModelError::NoiseCoherence => (gs, gn + err),
                    ModelError::DirectPhase => (gs * Complex64::from_polar(1.0, err), gn),
                };
                for &e in estimators {
                    let est = e.evaluate(gx, gs_m, gn_m);
                    out.push(ModelErrorPoint {
                        kind,
                        error: err,
                        freq_hz: f,
                        cdr_true_db: db,
                        estimator: e,
                        cdr_est: est,
                        diffuseness_error: est.map(|v| diffuseness(v) - diffuseness(cdr)),
                    });
                }
            }
        }
    }
    out
}
