//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::time::{Duration, Instant};

use cdr_core::analysis::{
    bias_sweep, centred_array_room, estimator_mse, evaluate_dereverb, geometric_tdoa, model_error_sweep,
    analyze_mixture, tail_coherence, ArrayPlacement, ModelError, Reflectivity, SweepGrid, TdoaPolicy, SMALL_ROOM,
};
use cdr_core::coherence::{
    average_coherence, mix_coherence, model_2d_isotropic, model_diffuse, model_plane_wave, DEFAULT_SOUND_SPEED,
};
use cdr_core::enhancement::gain;
use cdr_core::estimators::{
    cdr_jeub, cdr_prop2, cdr_prop2_uncompensated, compensation_factor, diffuseness, PROP4_MIN_IMAG,
};
use cdr_core::simulator::{
    reverberant_mixture, simulate_rirs, synthesize_isotropic, synthetic_speech, FieldKind,
};
use cdr_core::{CdrMethod, Complex64, Estimator, Filterbank, FilterbankConfig, NoiseModel, PostfilterConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const D: f64 = 0.08;
const C: f64 = DEFAULT_SOUND_SPEED;
const FREQS: [f64; 7] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_disk(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn unbiasedness_grid() -> Outcome {
    let start = Instant::now();
    let policies = [TdoaPolicy::Zero, TdoaPolicy::FifthPeriod, TdoaPolicy::Endfire];
    let estimators = [
        Estimator::Thiergart1,
        Estimator::Prop1,
        Estimator::Prop2,
        Estimator::Prop3,
        Estimator::Prop4,
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut missing = 0usize;
    for policy in policies {
        let grid = SweepGrid {
            mic_distance: D,
            sound_speed: C,
            ..SweepGrid::standard(FREQS.to_vec(), policy)
        };
        for p in bias_sweep(&estimators, &grid) {
            let gs = model_plane_wave(p.tdoa, &[p.freq_hz])[0];
            if p.estimator == Estimator::Prop4 && gs.im.abs() < PROP4_MIN_IMAG {
                continue;
            }
            let truth = 10f64.powf(p.cdr_true_db / 10.0);
            match p.cdr_est {
                Some(v) => {
                    worst = worst.max((v - truth).abs() / truth);
                    checked += 1;
                }
                None => missing += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && missing == 0 && within(elapsed, 1.0),
        format!("{checked} points, max relative error {worst:.2e}, undefined {missing}, {elapsed:.2?}"),
    )
}

fn bias_reproduction() -> Outcome {
    let start = Instant::now();
    let grid = SweepGrid {
        mic_distance: D,
        sound_speed: C,
        ..SweepGrid::standard(FREQS.to_vec(), TdoaPolicy::FifthPeriod)
    };
    let mut t2_violations = 0usize;
    let mut t2_points = 0usize;
    let mut jeub_max_dev: f64 = 0.0;
    for p in bias_sweep(&[Estimator::Thiergart2, Estimator::Jeub], &grid) {
        let truth = 10f64.powf(p.cdr_true_db / 10.0);
        let est = p.cdr_est.unwrap_or(f64::NAN);
        match p.estimator {
            Estimator::Thiergart2 if p.cdr_true_db > -20.0 => {
                t2_points += 1;
                if !(est < truth) {
                    t2_violations += 1;
                }
            }
            Estimator::Jeub => jeub_max_dev = jeub_max_dev.max((est - truth).abs() / truth),
            _ => {}
        }
    }
    let broadside = SweepGrid {
        mic_distance: D,
        sound_speed: C,
        ..SweepGrid::standard(FREQS.to_vec(), TdoaPolicy::Zero)
    };
    let jeub_broadside: f64 = bias_sweep(&[Estimator::Jeub], &broadside)
        .iter()
        .map(|p| {
            let truth = 10f64.powf(p.cdr_true_db / 10.0);
            (p.cdr_est.unwrap_or(f64::NAN) - truth).abs() / truth
        })
        .fold(0.0, f64::max);
    let f = 1000.0;
    let gn = model_diffuse(D, &[f], C)[0];
    let gs = model_plane_wave(1.0 / (5.0 * f), &[f])[0];
    let anchor = cdr_jeub(mix_coherence(1.0, gs, gn), gs, gn);
    let elapsed = start.elapsed();
    outcome(
        t2_violations == 0
            && jeub_broadside <= 1e-9
            && jeub_max_dev > 1e-3
            && anchor == 0.0
            && within(elapsed, 1.0),
        format!(
            "thiergart2 below truth at {}/{t2_points} points; jeub broadside max rel err {jeub_broadside:.1e}, \
             at 1/(5f) max rel deviation {jeub_max_dev:.3}; anchor (0 dB, 1 kHz) jeub = {anchor}; {elapsed:.2?}",
            t2_points - t2_violations
        ),
    )
}

fn compensation_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0usize;
    let samples = 100_000;
    for _ in 0..samples {
        let gx = random_disk(&mut rng);
        let f = rng.random_range(50.0..8000.0);
        let dt = rng.random_range(-D / C..D / C);
        let gs = model_plane_wave(dt, &[f])[0];
        let gn = model_diffuse(D, &[f], C)[0];
        let lhs = cdr_prop2(gx, gs, gn);
        let rhs = compensation_factor(gs, gn) * cdr_prop2_uncompensated(gx, gs, gn);
        if lhs.to_bits() != rhs.to_bits() {
            mismatches += 1;
        }
    }
    let broadside_factors: Vec<f64> = FREQS
        .iter()
        .map(|&f| compensation_factor(Complex64::new(1.0, 0.0), model_diffuse(D, &[f], C)[0]))
        .collect();
    let unit = broadside_factors.iter().all(|&v| v == 1.0);
    outcome(
        mismatches == 0 && unit,
        format!("{mismatches}/{samples} bitwise mismatches; factor at Δt=0: {broadside_factors:?}"),
    )
}

fn robustness_ordering() -> Outcome {
    let grid = SweepGrid {
        cdr_db: vec![10.0],
        mic_distance: D,
        sound_speed: C,
        ..SweepGrid::standard(vec![1000.0], TdoaPolicy::FifthPeriod)
    };
    let points = model_error_sweep(
        &[Estimator::Thiergart1, Estimator::Prop1, Estimator::Prop2],
        &grid,
        ModelError::DirectPhase,
        &[-0.1, 0.1],
    );
    let err = |e: Estimator, sign: f64| {
        points
            .iter()
            .find(|p| p.estimator == e && p.error * sign > 0.0)
            .and_then(|p| p.diffuseness_error)
            .map_or(f64::NAN, f64::abs)
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for sign in [-1.0, 1.0] {
        let (t1, p1, p2) = (err(Estimator::Thiergart1, sign), err(Estimator::Prop1, sign), err(Estimator::Prop2, sign));
        pass &= t1 > p1 && t1 > p2;
        detail.push(format!("error {:+.1} rad: |ΔD| thiergart1 {t1:.4}, prop1 {p1:.4}, prop2 {p2:.4}", 0.1 * sign));
    }
    outcome(pass, detail.join("; "))
}

fn white(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn filterbank_reconstruction() -> Outcome {
    let x = white(11, 160_000);
    let start = Instant::now();
    let fb = Filterbank::new(FilterbankConfig::default()).unwrap();
    let y = fb.synthesize(&fb.analyze(&x).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
    let energy: f64 = x.iter().map(|a| a * a).sum();
    let ratio = err / energy;
    outcome(
        ratio <= 1e-6 && y.len() == x.len() && within(elapsed, 5.0),
        format!("error energy ratio {ratio:.2e} ({:.1} dB), {elapsed:.2?}", 10.0 * ratio.log10()),
    )
}

fn isotropic_fidelity() -> Outcome {
    let start = Instant::now();
    let fb = Filterbank::new(FilterbankConfig::default()).unwrap();
    let freqs = fb.frequencies();
    let mics = [[-D / 2.0, 0.0, 0.0], [D / 2.0, 0.0, 0.0]];
    let mut detail = Vec::new();
    let mut pass = true;
    for (kind, model) in [
        (FieldKind::Spherical, model_diffuse(D, &freqs, C)),
        (FieldKind::Cylindrical, model_2d_isotropic(D, &freqs, C)),
    ] {
        let x = synthesize_isotropic(kind, 360, &mics, 10.0, 16000.0, C, 0).unwrap();
        let g = average_coherence(&fb.analyze(&x[0]).unwrap(), &fb.analyze(&x[1]).unwrap()).unwrap();
        let mse = g.iter().zip(&model).map(|(a, m)| (a.re - m).powi(2)).sum::<f64>() / g.len() as f64;
        pass &= mse < 0.01;
        detail.push(format!("{kind:?} MSE {mse:.2e}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 30.0);
    detail.push(format!("{elapsed:.2?}"));
    outcome(pass, detail.join(", "))
}

fn image_method_coherence() -> Outcome {
    let fb = Filterbank::new(FilterbankConfig::default()).unwrap();
    let speech = synthetic_speech(10.0, 16000.0, 0).unwrap();
    let placement = ArrayPlacement::default();
    let mut curves = Vec::new();
    let mut slowest: f64 = 0.0;
    for case in Reflectivity::ALL {
        let start = Instant::now();
        let room = centred_array_room(SMALL_ROOM, case.beta(), &placement);
        let rirs = simulate_rirs(&room, 60.0).unwrap();
        let curve = tail_coherence(&rirs, &speech, 0.05, 7, D, C, &fb).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        curves.push(curve);
    }
    let a = curves[0].mse_sinc();
    let (b_j0, b_sinc) = (curves[1].mse_j0(), curves[1].mse_sinc());
    let c = curves[2].mean_excess_over_sinc(500.0, 4000.0);
    let (pa, pb, pc) = (a < 0.02, b_j0 < b_sinc, c > 0.0);
    outcome(
        pa && pb && pc && slowest < 300.0,
        format!(
            "(a) uniform 0.9: sinc MSE {a:.4} [{}]; (b) absorbing floor/ceiling: J0 MSE {b_j0:.4} vs sinc MSE {b_sinc:.4} [{}]; \
             (c) absorbing walls: mean Re Γ − sinc over 0.5–4 kHz {c:+.3} [{}]; slowest room {slowest:.1} s",
            if pa { "pass" } else { "FAIL" },
            if pb { "pass" } else { "FAIL" },
            if pc { "pass" } else { "FAIL" },
        ),
    )
}

struct ReverbRun {
    mse: Vec<(Estimator, f64)>,
    prop2: cdr_core::analysis::DereverbEvaluation,
    prop3: cdr_core::analysis::DereverbEvaluation,
}

fn reverberant_runs() -> Vec<ReverbRun> {
    let fb_cfg = FilterbankConfig::default();
    let fb = Filterbank::new(fb_cfg).unwrap();
    let placement = ArrayPlacement {
        mic_count: 2,
        ..ArrayPlacement::default()
    };
    let room = centred_array_room(SMALL_ROOM, [0.9; 6], &placement);
    let rirs = simulate_rirs(&room, 60.0).unwrap();
    let tdoa = geometric_tdoa(&room, 0, 1);
    (0..3)
        .map(|seed| {
            let speech = synthetic_speech(30.0, 16000.0, seed).unwrap();
            let mix = reverberant_mixture(&speech, [&rirs[0], &rirs[1]], 0.05).unwrap();
            let analysis = analyze_mixture(&mix, 0.68, &fb).unwrap();
            let mse = estimator_mse(&analysis, &Estimator::ALL, Some(tdoa), D, C, NoiseModel::Diffuse).unwrap();
            let run = |method| evaluate_dereverb(&mix, &PostfilterConfig::with_method(method), &fb_cfg, 0.0).unwrap();
            ReverbRun {
                mse,
                prop2: run(CdrMethod::new(Estimator::Prop2, Some(tdoa)).unwrap()),
                prop3: run(CdrMethod::Prop3),
            }
        })
        .collect()
}

fn mse_ordering(runs: &[ReverbRun]) -> Outcome {
    let get = |r: &ReverbRun, e: Estimator| r.mse.iter().find(|(x, _)| *x == e).map_or(f64::NAN, |(_, v)| *v);
    let mut pass = true;
    let mut margins = [0.0f64; 3];
    let mut min_margins = [f64::INFINITY; 3];
    for r in runs {
        let m = [
            get(r, Estimator::Prop1) - get(r, Estimator::Prop2),
            get(r, Estimator::Jeub) - get(r, Estimator::Prop1),
            get(r, Estimator::Thiergart2) - get(r, Estimator::Prop3),
        ];
        for i in 0..3 {
            pass &= m[i] >= 0.0;
            margins[i] += m[i] / runs.len() as f64;
            min_margins[i] = min_margins[i].min(m[i]);
        }
    }
    let r0 = &runs[0];
    outcome(
        pass && runs.len() >= 3,
        format!(
            "{} seeds; seed 0 MSE jeub {:.4} prop1 {:.4} prop2 {:.4} thiergart2 {:.4} prop3 {:.4}; \
             mean margins (prop1−prop2, jeub−prop1, thiergart2−prop3) {:.4} {:.4} {:.4}, minimum {:.4} {:.4} {:.4}",
            runs.len(),
            get(r0, Estimator::Jeub),
            get(r0, Estimator::Prop1),
            get(r0, Estimator::Prop2),
            get(r0, Estimator::Thiergart2),
            get(r0, Estimator::Prop3),
            margins[0],
            margins[1],
            margins[2],
            min_margins[0],
            min_margins[1],
            min_margins[2],
        ),
    )
}

fn end_to_end(runs: &[ReverbRun]) -> Outcome {
    let n = runs.len() as f64;
    let p2_elr = runs.iter().map(|r| r.prop2.elr_improvement_db).sum::<f64>() / n;
    let p2_sdr = runs.iter().map(|r| r.prop2.fwsegsdr_db).sum::<f64>() / n;
    let p3_elr = runs.iter().map(|r| r.prop3.elr_improvement_db).sum::<f64>() / n;
    let p3_sdr = runs.iter().map(|r| r.prop3.fwsegsdr_db).sum::<f64>() / n;
    let (a, b, c) = (p2_elr >= 3.0, p2_sdr >= 5.0, p3_elr >= 2.0);
    outcome(
        a && b && c,
        format!(
            "input ELR {:.2} dB; prop2 ΔELR {p2_elr:.2} dB [{}], fwSegSDR {p2_sdr:.2} dB [{}]; prop3 ΔELR {p3_elr:.2} dB [{}] (fwSegSDR {p3_sdr:.2} dB); mean over {} seeds",
            runs[0].prop2.elr_input_db,
            if a { "pass" } else { "FAIL" },
            if b { "pass" } else { "FAIL" },
            if c { "pass" } else { "FAIL" },
            runs.len(),
        ),
    )
}

fn range_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = PostfilterConfig::default();
    let mut bad = 0usize;
    let n = 100_000;
    for _ in 0..n {
        let gx = random_disk(&mut rng);
        let gs = Complex64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let gn = rng.random_range(-0.2173..=1.0);
        for e in Estimator::ALL {
            match e.evaluate(gx, gs, gn) {
                Some(v) => {
                    let g = gain(v, cfg.mu, cfg.g_min);
                    let d = diffuseness(v);
                    if !(v >= 0.0 && (cfg.g_min..=1.0).contains(&g) && (0.0..=1.0).contains(&d)) {
                        bad += 1;
                    }
                }
                None => {
                    if !(e == Estimator::Prop4 && gs.im.abs() < PROP4_MIN_IMAG) {
                        bad += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        bad == 0 && within(elapsed, 1.0),
        format!("{n} points × 8 estimators, {bad} out of range, {elapsed:.2?}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        println!("criterion {id:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "unbiasedness grid", unbiasedness_grid());
    report(2, "bias reproduction", bias_reproduction());
    report(3, "compensation identity", compensation_identity());
    report(4, "robustness ordering", robustness_ordering());
    report(5, "filterbank reconstruction", filterbank_reconstruction());
    report(6, "isotropic synthesis fidelity", isotropic_fidelity());
    report(7, "image-method coherence", image_method_coherence());
    let runs = reverberant_runs();
    report(8, "estimator MSE ordering", mse_ordering(&runs));
    report(9, "end-to-end dereverberation", end_to_end(&runs));
    report(10, "gain/range invariants", range_invariants());
    println!("acceptance: {} of 10 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
