//! Acceptance criteria 1-12. Runs as a plain binary (`harness = false`) so
//! that one PASS/FAIL line per criterion is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use shadow_track::geometry::{
    range_bearing_inverse_jacobian, range_bearing_jacobian, range_bearing_to_position, two_bearing_jacobian,
    two_bearings_to_position, two_ranges_to_position, CorrelationMode, RawPositionEstimate, DEFAULT_DROP_THRESHOLD,
};
use shadow_track::grid::TimeGrid;
use shadow_track::matrices::build_filter_matrices;
use shadow_track::oracle::solve_kkt_oracle;
use shadow_track::scenario::{
    apply_missing, gen_range_bearing, gen_scalar_rednoise, gen_two_sensor_bearings, AccurateChannel, MissingMode,
    SonarScenario, SONAR_BEARING_SD,
};
use shadow_track::solver::{
    solve_per_component, solve_scalar, solve_scalar_with, solve_vector, ScalarObservationSeries, ShadowingTrajectory,
    SolveOptions, VectorObservationSeries,
};
use shadow_track::tracker::{MissingPolicy, TrackInput, Tracker, TrackerConfig};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn random_times(r: &mut ChaCha8Rng, points: usize) -> Vec<f64> {
    let mut t = vec![r.random_range(-5.0..5.0)];
    for _ in 1..points {
        let last = *t.last().unwrap();
        t.push(last + r.random_range(0.1..3.0));
    }
    t
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. D L = I and E M = J exactly; B annihilates affine data.
fn matrix_identities() -> Outcome {
    let mut r = rng(1);
    let mut worst_b: f64 = 0.0;
    let mut worst_id: f64 = 0.0;
    let mut cases = 0;
    for n in 3..=20 {
        for _ in 0..50 {
            let times = random_times(&mut r, n + 1);
            let grid = TimeGrid::new(times.clone()).unwrap();
            let (c, m) = (gaussian(&mut r) * 10.0, gaussian(&mut r) * 10.0);
            let p = DMatrix::from_iterator(n + 1, 1, times.iter().map(|t| c + m * t));
            for reversed in [false, true] {
                let fm = build_filter_matrices(&grid, reversed);
                let rep = fm.verify_identities();
                worst_id = worst_id.max(rep.dl_minus_identity).max(rep.em_minus_j);
                let bp = &fm.b * &p;
                let scale = fm.b.abs().max() * p.abs().max();
                worst_b = worst_b.max(bp.abs().max() / scale);
                cases += 1;
            }
        }
    }
    check(
        worst_id == 0.0 && worst_b <= 1e-12,
        format!("{cases} builds, max |DL-I|,|EM-J| = {worst_id:e}, max relative |Bp| = {worst_b:.2e}"),
    )
}

/// 2. Noiseless affine data is reproduced with zero accelerations.
fn affine_exactness() -> Outcome {
    let mut r = rng(2);
    let mut worst_p: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(3..40);
        let times = random_times(&mut r, n + 1);
        let (c, m) = (gaussian(&mut r) * 10.0, gaussian(&mut r) * 3.0);
        let values: Vec<f64> = times.iter().map(|t| c + m * t).collect();
        let weights: Vec<f64> = (0..=n).map(|_| r.random_range(0.2..5.0)).collect();
        let obs = ScalarObservationSeries::new(TimeGrid::new(times).unwrap(), values.clone(), weights).unwrap();
        for eta in [0.1, 1.0, 1e3] {
            let traj = solve_scalar(&obs, eta).unwrap();
            worst_p = worst_p.max(max_diff(&traj.scalar_positions(), &values) / inf_norm(&values));
            worst_a = worst_a.max(inf_norm(&traj.scalar_accelerations()) / inf_norm(&values));
        }
    }
    check(
        worst_p <= 1e-9 && worst_a <= 1e-9,
        format!("max relative position error {worst_p:.2e}, max relative |a| {worst_a:.2e}"),
    )
}

/// 3. Interior positions agree with the full stationarity-system solve.
fn oracle_agreement() -> Outcome {
    let mut r = rng(3);
    let n = 10;
    let mut worst: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for _ in 0..20 {
        let times: Vec<f64> = (0..=n).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.0 + 0.5 * t + 0.1 * t * t + gaussian(&mut r)).collect();
        let obs = ScalarObservationSeries::unweighted(&times, &values).unwrap();
        let ours = solve_scalar(&obs, 1.0).unwrap().scalar_positions();
        let oracle = solve_kkt_oracle(&obs, 1.0).unwrap();
        let reference = oracle.scalar_positions();
        worst = worst.max(max_diff(&ours[3..], &reference[3..]) / inf_norm(&reference[3..]));
        worst_res = worst_res.max(oracle.relative_residual);
    }
    check(
        worst <= 1e-3 && worst_res <= 1e-9,
        format!("max relative interior difference {worst:.2e}, max oracle residual {worst_res:.2e}"),
    )
}

/// 4. Very large eta gives the weighted least-squares line.
fn eta_limit() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = r.random_range(5..40);
        let times = random_times(&mut r, n + 1);
        let values: Vec<f64> = times.iter().map(|t| 1.0 - 0.7 * t + 0.05 * t * t + gaussian(&mut r)).collect();
        let weights: Vec<f64> = (0..=n).map(|_| r.random_range(0.2..5.0)).collect();
        let (sw, swt, swtt, swp, swtp) =
            times.iter().zip(&values).zip(&weights).fold((0.0, 0.0, 0.0, 0.0, 0.0), |(a, b, c, d, e), ((t, p), w)| {
                (a + w, b + w * t, c + w * t * t, d + w * p, e + w * t * p)
            });
        let slope = (sw * swtp - swt * swp) / (sw * swtt - swt * swt);
        let intercept = (swp - slope * swt) / sw;
        let fit: Vec<f64> = times.iter().map(|t| intercept + slope * t).collect();
        let obs = ScalarObservationSeries::new(TimeGrid::new(times).unwrap(), values, weights).unwrap();
        let traj = solve_scalar(&obs, 1e8).unwrap();
        worst = worst.max(max_diff(&traj.scalar_positions(), &fit) / inf_norm(&fit));
    }
    check(worst <= 1e-3, format!("max relative difference from the line fit {worst:.2e}"))
}

/// 5. Reversed-matrix solve equals reverse . solve . reverse.
fn time_reversal() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let forward = SolveOptions { reversed: false, ..SolveOptions::default() };
    let backward = SolveOptions { reversed: true, ..SolveOptions::default() };
    for _ in 0..20 {
        let n = r.random_range(4..30);
        let times = random_times(&mut r, n + 1);
        let values: Vec<f64> = times.iter().map(|t| (0.4 * t).sin() * 5.0 + gaussian(&mut r)).collect();
        let weights: Vec<f64> = (0..=n).map(|_| r.random_range(0.2..5.0)).collect();
        let obs = ScalarObservationSeries::new(TimeGrid::new(times).unwrap(), values, weights).unwrap();
        let eta = 10f64.powf(r.random_range(-1.0..3.0));
        let direct = solve_scalar_with(&obs, eta, &backward).unwrap().scalar_positions();
        let mut conj = solve_scalar_with(&obs.reversed(), eta, &forward).unwrap().scalar_positions();
        conj.reverse();
        worst = worst.max(max_diff(&direct, &conj) / inf_norm(&direct));
    }
    check(worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

/// 6. Larger eta: residual up, rms acceleration down.
fn monotone_smoothing() -> Outcome {
    let etas = [1e-2, 1.0, 1e2, 1e4];
    let mut lines = Vec::new();
    let mut good = true;
    for seed in 0..5 {
        let obs = gen_scalar_rednoise(seed).observations;
        let trajs: Vec<ShadowingTrajectory> = etas.iter().map(|&e| solve_scalar(&obs, e).unwrap()).collect();
        let err: Vec<f64> = trajs.iter().map(|t| t.weighted_square_error(&obs)).collect();
        let xi: Vec<f64> = trajs.iter().map(|t| t.rms_acceleration()).collect();
        good &= err.windows(2).all(|w| w[1] >= w[0]) && xi.windows(2).all(|w| w[1] <= w[0]);
        if seed == 0 {
            lines.push(format!(
                "seed 0: error {}; xi {}",
                err.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" <= "),
                xi.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" >= ")
            ));
        }
    }
    check(good, format!("5 seeds ordered; {}", lines.join("")))
}

/// 7. Block solve with equal diagonal information equals per-component solves.
fn vector_scalar_consistency() -> Outcome {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = r.random_range(4..40);
        let d = r.random_range(2..4);
        let times = random_times(&mut r, n + 1);
        let weights: Vec<f64> = (0..=n).map(|_| r.random_range(0.2..5.0)).collect();
        let values =
            DMatrix::from_fn(n + 1, d, |i, k| (times[i] * (k + 1) as f64 * 0.3).cos() * 4.0 + gaussian(&mut r));
        let info = weights.iter().map(|w| DMatrix::identity(d, d) * *w).collect();
        let grid = TimeGrid::new(times.clone()).unwrap();
        let obs = VectorObservationSeries::new(grid.clone(), values.clone(), info).unwrap();
        let eta = 10f64.powf(r.random_range(-1.0..3.0));
        let block = solve_vector(&obs, eta).unwrap();
        for k in 0..d {
            let column: Vec<f64> = values.column(k).iter().copied().collect();
            let scalar = ScalarObservationSeries::new(grid.clone(), column, weights.clone()).unwrap();
            let single = solve_scalar(&scalar, eta).unwrap().scalar_positions();
            let from_block: Vec<f64> = block.positions.column(k).iter().copied().collect();
            worst = worst.max(max_diff(&from_block, &single) / inf_norm(&single));
        }
        let per = solve_per_component(&obs, eta, &SolveOptions::default()).unwrap();
        worst = worst.max((&per.positions - &block.positions).abs().max() / block.positions.abs().max());
    }
    check(worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

/// 8. Jacobian identities, finite differences and symmetric fixtures.
fn geometry() -> Outcome {
    let mut worst_jk: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let range = 0.5 + 5.0 * i as f64;
            let bearing = -3.0 + 0.6 * j as f64;
            let jk = range_bearing_jacobian(range, bearing) * range_bearing_inverse_jacobian(range, bearing);
            worst_jk = worst_jk.max((jk - Matrix2::identity()).abs().max());
        }
    }
    let mut r = rng(8);
    let mut worst_fd: f64 = 0.0;
    let angles =
        |p: [f64; 2], a: [f64; 2], b: [f64; 2]| [(p[1] - a[1]).atan2(p[0] - a[0]), (p[1] - b[1]).atan2(p[0] - b[0])];
    for _ in 0..100 {
        let a: [f64; 2] = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        let b: [f64; 2] = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        let p: [f64; 2] = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        if (p[0] - a[0]).hypot(p[1] - a[1]) < 0.5 || (p[0] - b[0]).hypot(p[1] - b[1]) < 0.5 {
            continue;
        }
        let k = two_bearing_jacobian(p, a, b);
        let h = 1e-6;
        for col in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[col] += h;
            lo[col] -= h;
            let (fh, fl) = (angles(hi, a, b), angles(lo, a, b));
            for row in 0..2 {
                worst_fd = worst_fd.max(((fh[row] - fl[row]) / (2.0 * h) - k[(row, col)]).abs());
            }
        }
    }
    let q = std::f64::consts::FRAC_PI_4;
    let tri = two_bearings_to_position(
        [0.0, 0.0],
        [1.0, 0.0],
        q,
        3.0 * q,
        [1e-4, 1e-4],
        CorrelationMode::Propagate,
        DEFAULT_DROP_THRESHOLD,
    )
    .unwrap();
    let s2 = 2f64.sqrt();
    let tril = two_ranges_to_position(
        [0.0, 0.0],
        [2.0, 0.0],
        s2,
        s2,
        [1e-2, 1e-2],
        [1.0, 1.0],
        CorrelationMode::Propagate,
        DEFAULT_DROP_THRESHOLD,
    )
    .unwrap();
    let fix_err = max_diff(&tri.position, &[0.5, 0.5]).max(max_diff(&tril.position, &[1.0, 1.0]));
    check(
        worst_jk <= 1e-12 && worst_fd <= 1e-6 && fix_err <= 1e-12,
        format!("max |JK-I| {worst_jk:.2e}, max finite-difference gap {worst_fd:.2e}, fixture error {fix_err:.2e}"),
    )
}

fn rms_2d(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sum();
    (s / a.len() as f64).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn run_tracker(times: &[f64], raws: &[RawPositionEstimate], config: TrackerConfig) -> (Vec<Option<[f64; 2]>>, Tracker) {
    let mut tracker = Tracker::new(config).unwrap();
    let est = times
        .iter()
        .zip(raws)
        .map(|(t, raw)| tracker.step(TrackInput::from_raw(*t, raw)).ok().map(|e| [e.position[0], e.position[1]]))
        .collect();
    (est, tracker)
}

/// 9. Ignoring raw-estimate correlation tracks at least as well as propagating it.
fn correlation_robustness() -> Outcome {
    let (eta, window) = (10.0, 20);
    let mut ignore = Vec::new();
    let mut propagate = Vec::new();
    for seed in 0..20 {
        let s = gen_range_bearing(seed, AccurateChannel::Range);
        for (mode, sink) in
            [(CorrelationMode::IgnoreCorrelation, &mut ignore), (CorrelationMode::Propagate, &mut propagate)]
        {
            let raws: Vec<_> = s.readings.iter().map(|o| range_bearing_to_position(s.site, o, mode).unwrap()).collect();
            let mut config = TrackerConfig::new(window, eta);
            config.correlation = mode;
            let (est, _) = run_tracker(&s.times, &raws, config);
            let (e, t): (Vec<_>, Vec<_>) = est.iter().zip(&s.truth).filter_map(|(e, t)| e.map(|e| (e, *t))).unzip();
            sink.push(rms_2d(&e, &t));
        }
    }
    let (mi, mp) = (median(ignore), median(propagate));
    check(mi <= mp, format!("median sequential RMS: ignore {mi:.3}, propagate {mp:.3} (eta {eta}, window {window})"))
}

fn sonar_raw(s: &SonarScenario) -> Vec<RawPositionEstimate> {
    let v = s.bearing_sd * s.bearing_sd;
    s.times
        .iter()
        .zip(&s.bearings)
        .map(|(&t, b)| {
            two_bearings_to_position(
                s.sensor_a.position_at(t),
                s.sensor_b.position_at(t),
                b[0],
                b[1],
                [v, v],
                CorrelationMode::IgnoreCorrelation,
                DEFAULT_DROP_THRESHOLD,
            )
            .unwrap()
        })
        .collect()
}

/// Times when the target is between the 4 and 5 o'clock positions.
fn collinear_stretch(t: f64) -> bool {
    let clock = (t / 25.0).to_degrees() / 30.0;
    (4.0..=5.0).contains(&clock)
}

/// 10. The two-sensor bearing run survives the singular geometry.
fn singularity_survival() -> Outcome {
    let s = gen_two_sensor_bearings(1, SONAR_BEARING_SD).unwrap();
    let raws = sonar_raw(&s);
    let config = TrackerConfig::new(s.times.len(), 1000.0).with_policy(MissingPolicy::ForecastInsert);
    let (est, tracker) = run_tracker(&s.times, &raws, config);
    let all_finite = est[2..].iter().all(|e| e.is_some_and(|p| p[0].is_finite() && p[1].is_finite()));
    let mut argmins = Vec::new();
    for seed in 1..=5 {
        let raws = sonar_raw(&gen_two_sensor_bearings(seed, SONAR_BEARING_SD).unwrap());
        let (i, _) = raws.iter().enumerate().min_by(|a, b| a.1.weight.total_cmp(&b.1.weight)).unwrap();
        argmins.push(s.times[i]);
    }
    let in_stretch = argmins.iter().all(|t| collinear_stretch(*t));
    let traj = tracker.trajectory().unwrap();
    let smoothed: Vec<[f64; 2]> = s
        .times
        .iter()
        .map(|&t| {
            let p = traj.evaluate(t).unwrap().position;
            [p[0], p[1]]
        })
        .collect();
    let final_rms = rms_2d(&smoothed, &s.truth);
    let (raw_p, raw_t): (Vec<_>, Vec<_>) =
        raws.iter().zip(&s.truth).filter(|(r, _)| r.is_usable()).map(|(r, t)| (r.position, *t)).unzip();
    let raw_rms = rms_2d(&raw_p, &raw_t);
    check(
        all_finite && in_stretch && final_rms < raw_rms,
        format!(
            "finite estimates at steps 3..={}: {all_finite}; weight minima at t = {argmins:?}; final RMS {final_rms:.4} vs raw {raw_rms:.4}",
            s.times.len()
        ),
    )
}

/// 11. Tracking with 75% of the observations missing.
fn missing_data() -> Outcome {
    let mut detail = Vec::new();
    let mut good = true;
    for eta in [100.0, 1000.0] {
        let (mut se_full, mut se_part, mut count) = (0.0, 0.0, 0usize);
        let mut worst_ratio: f64 = 0.0;
        let mut worst_acc: f64 = 0.0;
        let mut finite = true;
        for seed in 0..10 {
            let s = gen_scalar_rednoise(seed);
            let part_obs = apply_missing(&s.observations, 0.75, seed, MissingMode::Remove).unwrap();
            let full = solve_scalar(&s.observations, eta).unwrap();
            let part = solve_scalar(&part_obs, eta).unwrap();
            let times = s.observations.grid().times();
            let se = |tr: &ShadowingTrajectory| -> f64 {
                times.iter().zip(&s.truth).map(|(t, x)| (tr.evaluate(*t).unwrap().position[0] - x).powi(2)).sum()
            };
            let (a, b) = (se(&full), se(&part));
            se_full += a;
            se_part += b;
            count += times.len();
            worst_ratio = worst_ratio.max((b / a).sqrt());
            finite &= part.accelerations.iter().all(|v| v.is_finite());
            worst_acc = worst_acc.max(part.accelerations.abs().max() / full.accelerations.abs().max());
        }
        let (rf, rp) = ((se_full / count as f64).sqrt(), (se_part / count as f64).sqrt());
        good &= rp <= 2.0 * rf && finite && worst_acc <= 3.0;
        detail.push(format!(
            "eta {eta}: RMS {rp:.3} vs full {rf:.3} (ratio {:.2}, worst seed {worst_ratio:.2}), max|a| ratio {worst_acc:.2}",
            rp / rf
        ));
    }
    check(good, detail.join("; "))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_shadow-track")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir);
    files.sort();
    files.into_iter().map(|p| (p.display().to_string(), std::fs::read(&p).unwrap())).collect()
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

/// 12. Every command re-run with the same manifest gives byte-identical files.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |s: &str| dir.path().join(s).display().to_string();
    let commands: Vec<Vec<String>> = vec![
        vec!["generate".into(), "rednoise".into(), "--seed".into(), "7".into(), "--out".into(), d("rn")],
        vec!["generate".into(), "rednoise-missing".into(), "--seed".into(), "7".into(), "--out".into(), d("rm")],
        vec!["generate".into(), "planar".into(), "--seed".into(), "7".into(), "--out".into(), d("pl")],
        vec!["generate".into(), "range-bearing-b".into(), "--seed".into(), "7".into(), "--out".into(), d("rb")],
        vec!["generate".into(), "sonar".into(), "--seed".into(), "7".into(), "--out".into(), d("so")],
        vec!["filter".into(), d("rn/observations.csv"), "--eta".into(), "100".into(), "--out".into(), d("f1.csv")],
        vec![
            "filter".into(),
            d("rn/observations.csv"),
            "--xi".into(),
            "0.05".into(),
            "--bracket".into(),
            "1e-2,1e6".into(),
            "--out".into(),
            d("f2.csv"),
        ],
        vec![
            "filter".into(),
            d("pl/observations.csv"),
            "--eta".into(),
            "1000".into(),
            "--vector".into(),
            "--out".into(),
            d("f3.csv"),
        ],
        vec![
            "transform".into(),
            d("rb/readings.csv"),
            "--geometry".into(),
            d("rb/geometry.json"),
            "--out".into(),
            d("rb_raw.csv"),
        ],
        vec![
            "transform".into(),
            d("so/readings.csv"),
            "--geometry".into(),
            d("so/geometry.json"),
            "--ignore-correlation".into(),
            "--out".into(),
            d("so_raw.csv"),
        ],
        vec!["track".into(), d("rm/observations.csv"), "--eta".into(), "100".into(), "--out".into(), d("t1.csv")],
        vec![
            "track".into(),
            d("rb_raw.csv"),
            "--eta".into(),
            "10".into(),
            "--window".into(),
            "20".into(),
            "--out".into(),
            d("t2.csv"),
        ],
        vec![
            "track".into(),
            d("so_raw.csv"),
            "--eta".into(),
            "1000".into(),
            "--window".into(),
            "30".into(),
            "--out".into(),
            d("t3.csv"),
        ],
    ];
    let run_all = || -> Result<Vec<(String, Vec<u8>)>, String> {
        for c in &commands {
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            cli(&args)?;
        }
        Ok(snapshot(dir.path()))
    };
    let first = run_all()?;
    let second = run_all()?;
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(a, b)| a != b).map(|(a, _)| a.0.as_str()).collect();
    check(
        first.len() == second.len() && differing.is_empty(),
        format!(
            "{} commands, {} files compared, {} differ {differing:?}",
            commands.len(),
            first.len(),
            differing.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("matrix identities", matrix_identities),
        ("affine exactness", affine_exactness),
        ("oracle agreement", oracle_agreement),
        ("large-eta line fit", eta_limit),
        ("time reversal", time_reversal),
        ("monotone smoothing", monotone_smoothing),
        ("vector/scalar consistency", vector_scalar_consistency),
        ("geometry", geometry),
        ("correlation robustness", correlation_robustness),
        ("singularity survival", singularity_survival),
        ("missing data", missing_data),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
