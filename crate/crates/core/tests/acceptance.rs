//! End-to-end acceptance checks. Runs each criterion in turn and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fail.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seltrain::channel::{channel_trajectory, init_channel, sample_cn};
use seltrain::config::{SystemConfig, UserDrop};
use seltrain::csi::{
    advance_csi, build_pilot_matrix, initial_csi, matched_filter, mmse_estimate, simulate_training,
    CsiStats, GaussianNoise,
};
use seltrain::experiment::{drop_for, mean, std_error, sweep_density, sweep_tau, SweepResult, SweepSpec};
use seltrain::rate::{fixed_point_map, solve_fixed_point, DetEqProblem};
use seltrain::selection::{brute_force_oracle, has_negative_pick, score_users, select_dus, Policy, SelectionScore};

/// One-sided 95% normal quantile.
const Z95: f64 = 1.645;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (mean(&d), std_error(&d))
}

fn selection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut checked, mut negative, mut mismatches) = (0, 0, 0);
    let c = 0.9881;
    for _ in 0..200 {
        let k = rng.random_range(3..=12usize);
        let tau = rng.random_range(1..k);
        let v: Vec<f64> = (0..k).map(|_| 16.0 * (1.0 - rng.random::<f64>())).collect();
        let drop = UserDrop::from_variances(v.clone());
        // random staleness: obtained variance anywhere between 0 and v
        let mut prev = CsiStats::fully_trained(&drop, tau);
        for u in 0..k {
            let obtained = v[u] * rng.random::<f64>();
            prev.v_hat[u] = obtained;
            prev.v_tilde[u] = v[u] - obtained;
        }
        let score = score_users(&prev, &drop, c, tau);
        let dus = select_dus(&score, tau, k);
        if has_negative_pick(&score, &dus) {
            negative += 1;
            continue;
        }
        checked += 1;
        let (_, best) = brute_force_oracle(&score, tau, k).expect("oracle");
        if score.objective(&dus.trained) != best {
            mismatches += 1;
        }
    }
    // the negative-delta fill is checked against its own rule
    let score = SelectionScore::from_parts(vec![0.5, 0.5, 0.5], vec![0.1, 0.6, 0.2]);
    let fill = select_dus(&score, 2, 3);
    let neg_ok = fill.trained == vec![1, 2] && has_negative_pick(&score, &fill);
    outcome(
        mismatches == 0 && checked > 0 && neg_ok,
        format!("{checked} instances at the exact minimum, {mismatches} mismatches, {negative} negative-delta cases reported separately"),
    )
}

fn conservation() -> Outcome {
    let config = SystemConfig {
        n_antennas: 32,
        n_users: 16,
        block_length: 60,
        n_blocks: 11,
        temporal_corr: 0.9881,
        ..SystemConfig::default()
    };
    let (k, n, c, tau) = (16, 32, config.temporal_corr, 6);
    let drop = drop_for(&config, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let traj = channel_trajectory(&drop, n, config.n_blocks, c, &mut rng);
    let all: Vec<usize> = (0..k).collect();
    let warm = build_pilot_matrix(k, k).unwrap();
    let obs = simulate_training(&traj[0], &all, &warm, &mut GaussianNoise(&mut rng)).unwrap();
    let mut csi = initial_csi(&obs, &warm, &drop).unwrap();
    let mut worst = csi.stats.conservation_error(&drop);
    let pilots = build_pilot_matrix(tau, tau).unwrap();
    for ch in &traj[1..] {
        let sel = select_dus(&score_users(&csi.stats, &drop, c, tau), tau, k);
        let obs = simulate_training(ch, &sel.trained, &pilots, &mut GaussianNoise(&mut rng)).unwrap();
        csi = advance_csi(&csi, &sel.trained, &obs, &pilots, &drop, c, tau).unwrap();
        worst = worst.max(csi.stats.conservation_error(&drop));
    }
    outcome(worst <= 1e-12, format!("max |v_hat + v_tilde - v| = {worst:e} over {} blocks", config.n_blocks))
}

fn deteq_accuracy() -> Outcome {
    let spec = SweepSpec {
        config: SystemConfig {
            n_antennas: 64,
            n_users: 24,
            ..SystemConfig::default()
        },
        policies: vec![Policy::Ft],
        taus: vec![24, 32, 40, 48],
        k_list: Vec::new(),
        n_drops: 1,
        n_realizations: 2000,
        threads: None,
    };
    let result = sweep_tau(&spec).expect("sweep");
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for row in &result.rows {
        let rel = (row.mc_rate_mean - row.deteq_rate_mean).abs() / row.deteq_rate_mean;
        worst = worst.max(rel);
        parts.push(format!("tau={} {:.3}%", row.tau, 100.0 * rel));
    }
    outcome(result.rows.len() == 4 && worst <= 0.05, parts.join(", "))
}

/// Fixed point of `T = ((1/K) sum_k D_k / (1 + tr(D_k T)/K) + I/K)^-1` with
/// full `N x N` matrices.
fn matrix_fixed_point(d: &[DMatrix<f64>], n: usize, tol: f64) -> DMatrix<f64> {
    let k = d.len() as f64;
    let mut t = DMatrix::<f64>::identity(n, n);
    for _ in 0..100_000 {
        let mut m = DMatrix::<f64>::identity(n, n) / k;
        for dk in d {
            m += dk / (k * (1.0 + (dk * &t).trace() / k));
        }
        let next = m.try_inverse().expect("positive definite");
        let diff = (&next - &t).amax();
        t = next;
        if diff <= tol {
            break;
        }
    }
    t
}

fn fixed_point_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_iter = 0;
    let mut failures = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=80usize);
        let n = rng.random_range(1..=256usize);
        let v_bar: Vec<f64> = (0..k)
            .map(|_| if rng.random::<f64>() < 0.05 { 0.0 } else { 10f64.powf(rng.random_range(-3.0..3.0)) })
            .collect();
        let p = DetEqProblem {
            v_bar,
            n_antennas: n,
            tau: 0,
            block_length: 60,
        };
        match solve_fixed_point(&p, 1e-10, 1000) {
            Ok(fp) => worst_iter = worst_iter.max(fp.iterations),
            Err(_) => failures += 1,
        }
    }
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..=16usize);
        let n = rng.random_range(1..=24usize);
        let v_bar: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..5.0)).collect();
        let d: Vec<DMatrix<f64>> = v_bar.iter().map(|&v| DMatrix::identity(n, n) * v).collect();
        let p = DetEqProblem {
            v_bar,
            n_antennas: n,
            tau: 0,
            block_length: 60,
        };
        let fp = solve_fixed_point(&p, 1e-10, 1000).expect("converges");
        let t = matrix_fixed_point(&d, n, 1e-12);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { fp.t } else { 0.0 };
                worst_gap = worst_gap.max((t[(i, j)] - want).abs());
            }
        }
        debug_assert!((fixed_point_map(&p, fp.t) - fp.t).abs() < 1e-9);
    }
    outcome(
        failures == 0 && worst_gap <= 1e-8,
        format!("10000 solves, {failures} failures, worst {worst_iter} iterations; matrix oracle gap {worst_gap:e}"),
    )
}

fn values(result: &SweepResult, p: Policy, taus: impl IntoIterator<Item = usize>) -> Vec<(usize, f64, f64, Vec<f64>)> {
    taus.into_iter()
        .filter_map(|t| result.row(p, t).map(|r| (t, r.mc_rate_mean, r.mc_rate_stderr, r.episode_means.clone())))
        .collect()
}

fn tau_sweep() -> Outcome {
    let mut taus: Vec<usize> = (5..=35).step_by(5).collect();
    taus.extend(40..=60);
    let spec = SweepSpec {
        config: SystemConfig::default(),
        policies: Policy::ALL.to_vec(),
        taus: taus.clone(),
        k_list: Vec::new(),
        n_drops: 1,
        n_realizations: 500,
        threads: None,
    };
    let result = sweep_tau(&spec).expect("sweep");

    let ft = values(&result, Policy::Ft, 40..=60);
    let a = ft.windows(2).all(|w| {
        let (diff, se) = paired(&w[1].3, &w[0].3);
        diff <= se
    });

    let best = |p: Policy| {
        result
            .rows_for(p)
            .max_by(|x, y| x.mc_rate_mean.total_cmp(&y.mc_rate_mean))
            .expect("rows")
    };
    let (dus, ftb) = (best(Policy::Dus), best(Policy::Ft));
    let (gap, gap_se) = paired(&dus.episode_means, &ftb.episode_means);
    let b = gap - Z95 * gap_se > 0.0;

    let mut c = true;
    let mut worst_c = f64::INFINITY;
    for t in (5..=35).step_by(5) {
        let (d, se) = paired(
            &result.row(Policy::Dus, t).unwrap().episode_means,
            &result.row(Policy::Rus, t).unwrap().episode_means,
        );
        worst_c = worst_c.min(d - Z95 * se);
        c &= d - Z95 * se > 0.0;
    }

    let mut d = true;
    for t in 40..=60 {
        let reference = result.row(Policy::Ft, t).unwrap();
        for p in Policy::ALL {
            let r = result.row(p, t).unwrap();
            let se = r.mc_rate_stderr.max(reference.mc_rate_stderr);
            d &= (r.mc_rate_mean - reference.mc_rate_mean).abs() <= 2.0 * se;
        }
    }
    outcome(
        a && b && c && d,
        format!(
            "(a) {a} (b) {b}: DUS {:.4} at tau={} vs FT {:.4} at tau={}, gap lower bound {:.4} (c) {c}: worst lower bound {worst_c:.4} (d) {d} [nats]",
            dus.mc_rate_mean,
            dus.tau,
            ftb.mc_rate_mean,
            ftb.tau,
            gap - Z95 * gap_se
        ),
    )
}

fn density_sweep() -> Outcome {
    let ks = vec![8, 16, 24, 32, 40];
    let spec = SweepSpec {
        config: SystemConfig {
            n_antennas: 64,
            ..SystemConfig::default()
        },
        policies: vec![Policy::Dus, Policy::Ft],
        taus: (0..=60).collect(),
        k_list: ks.clone(),
        n_drops: 10,
        n_realizations: 200,
        threads: None,
    };
    let result = sweep_density(&spec).expect("sweep");
    let row = |p: Policy, k: usize| {
        result
            .rows
            .iter()
            .find(|r| r.policy == p && r.k_users == k)
            .expect("row")
    };
    let ft: Vec<f64> = ks.iter().map(|&k| row(Policy::Ft, k).mc_rate_mean).collect();
    let decreasing = ft.windows(2).all(|w| w[1] < w[0]);
    let gap = |k: usize| -> Vec<f64> {
        row(Policy::Dus, k)
            .episode_means
            .iter()
            .zip(&row(Policy::Ft, k).episode_means)
            .map(|(a, b)| a - b)
            .collect()
    };
    let (diff, se) = paired(&gap(40), &gap(8));
    let widening = diff - Z95 * se > 0.0;
    let ft_text: Vec<String> = ft.iter().map(|x| format!("{x:.3}")).collect();
    outcome(
        decreasing && widening,
        format!(
            "FT by K [{}] decreasing={decreasing}; gap(40) - gap(8) = {diff:.4} +/- {se:.4} widening={widening} [nats]",
            ft_text.join(", ")
        ),
    )
}

fn calibration() -> Outcome {
    let trials = 100_000;
    let drop = UserDrop::from_variances(vec![1.0]);
    let pilots = build_pilot_matrix(1, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut errs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let ch = init_channel(&drop, 1, &mut rng);
        let obs = simulate_training(&ch, &[0], &pilots, &mut GaussianNoise(&mut rng)).unwrap();
        let r = matched_filter(&obs, &pilots.row(0), 4).unwrap();
        let est = mmse_estimate(&r, 1.0, 4);
        errs.push((est.h_hat[0] - ch.h[(0, 0)]).norm_sqr());
    }
    let (var, se) = (mean(&errs), std_error(&errs));
    let var_ok = (var - 0.2).abs() <= 3.0 * se;

    let c = 0.9881;
    let (mut cross, mut power) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
    for _ in 0..trials {
        let h0 = sample_cn(&mut rng, 1.0);
        let h1 = h0 * c + sample_cn(&mut rng, 1.0 - c * c);
        cross.push((h1 * h0.conj()).re);
        power.push(h0.norm_sqr());
    }
    let lag1 = mean(&cross) / mean(&power);
    // the same statistic through the channel model itself
    let big = UserDrop::from_variances(vec![1.0; 100]);
    let traj = channel_trajectory(&big, 1000, 2, c, &mut rng);
    let model_lag1 = traj[1].h.iter().zip(traj[0].h.iter()).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
        / traj[0].h.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let corr_ok = (lag1 - c).abs() <= 0.005 && (model_lag1 - c).abs() <= 0.005;
    outcome(
        var_ok && corr_ok,
        format!("error variance {var:.5} (se {se:.5}); lag-1 correlation {lag1:.5}, channel model {model_lag1:.5}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |threads: &str| {
        let out = dir.path().join(format!("sweep-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_seltrain"))
            .args([
                "sweep-tau",
                "--realizations",
                "6",
                "--tau-min",
                "0",
                "--tau-step",
                "6",
                "--seed",
                "2024",
                "--threads",
                threads,
                "--out",
            ])
            .arg(&out)
            .status()
            .expect("run seltrain");
        assert!(status.success());
        std::fs::read(out).expect("csv")
    };
    let serial = run("1");
    let parallel = run("4");
    outcome(
        !serial.is_empty() && serial == parallel,
        format!("{} bytes, identical={}", serial.len(), serial == parallel),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("1 selection oracle", selection_oracle, Some(Duration::from_secs(10))),
        ("2 variance conservation", conservation, None),
        ("3 deterministic-equivalent accuracy", deteq_accuracy, Some(Duration::from_secs(300))),
        ("4 fixed-point solver", fixed_point_solver, None),
        ("5 training-length sweep", tau_sweep, Some(Duration::from_secs(900))),
        ("6 user-density sweep", density_sweep, Some(Duration::from_secs(1800))),
        ("7 estimator calibration", calibration, None),
        ("8 determinism", determinism, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                result.pass = false;
                result.detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
            }
        }
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} ({:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
