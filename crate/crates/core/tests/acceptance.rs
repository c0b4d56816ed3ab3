//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process exits nonzero if any fails.

use std::time::Instant;

use flingopt::bandit::{expected_improvement, run_mab, select_action, std_normal_cdf, MabOptions};
use flingopt::baselines::sample_uniform;
use flingopt::belief::{BeliefBank, GaussianBelief, PriorMode};
use flingopt::cem::{run_cem, CemOptions};
use flingopt::exec_stop::{
    bootstrap_stop_analysis, rule3_estimate, ExecPosterior, RuleKind, RuleSpec,
};
use flingopt::harness::pipeline::Setup;
use flingopt::harness::{
    build_prior_bank, emit_report, run_pipeline_with_bank, ExperimentConfig, Method,
};
use flingopt::param_space::{ActionGrid, FlingParams, ParamBounds};
use flingopt::seed::rng_from;
use flingopt::sim_env::Category;
use flingopt::trajectory::{build_waypoints, generate_profile, TrajectoryConfig};
use flingopt::trial::{Phase, TrialLog};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + h * i as f64);
    }
    s * h
}

fn c1_ei_vs_monte_carlo() -> Outcome {
    let mut rng = rng_from(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mu: f64 = rng.random_range(0.0..1.0);
        let sigma: f64 = rng.random_range(0.01..0.5);
        let mu_star: f64 = rng.random_range(0.0..1.0);
        let n = 1_000_000;
        let mut total = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            total += (mu + sigma * z - mu_star).max(0.0);
        }
        let mc = total / n as f64;
        worst = worst.max((mc - expected_improvement(mu, sigma, mu_star).unwrap()).abs());
    }
    check(
        worst < 1e-3,
        format!("max |closed - MC| = {worst:.2e} over 50 triples"),
    )
}

fn c2_conjugate_vs_quadrature() -> Outcome {
    let mut rng = rng_from(102);
    let (mut dmu, mut dsig) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let m0: f64 = rng.random_range(0.0..1.0);
        let s0: f64 = rng.random_range(0.02..1.0);
        let noise: f64 = rng.random_range(0.02..0.3);
        let obs: Vec<f64> = (0..rng.random_range(1..20))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let mut b = GaussianBelief::new(m0, s0);
        for &r in &obs {
            b = b.update(r, noise).unwrap();
        }
        let lp = |mu: f64| {
            -0.5 * ((mu - m0) / s0).powi(2)
                - obs
                    .iter()
                    .map(|r| 0.5 * ((r - mu) / noise).powi(2))
                    .sum::<f64>()
        };
        let (lo, hi) = (-4.0, 5.0);
        let peak = (0..9001)
            .map(|i| lp(lo + i as f64 * 1e-3))
            .fold(f64::MIN, f64::max);
        let w = |mu: f64| (lp(mu) - peak).exp();
        let n = 400_000;
        let z = integrate(w, lo, hi, n);
        let mean = integrate(|m| m * w(m), lo, hi, n) / z;
        let sd = (integrate(|m| (m - mean).powi(2) * w(m), lo, hi, n) / z).sqrt();
        dmu = dmu.max((b.mu - mean).abs());
        dsig = dsig.max((b.sigma - sd).abs());
    }
    check(
        dmu < 1e-4 && dsig < 1e-4,
        format!("max |dmu| = {dmu:.2e}, max |dsigma| = {dsig:.2e} over 20 sets"),
    )
}

fn c3_best_arm_identification() -> Outcome {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = rng_from(1000 + seed);
        let mut means: Vec<f64> = (0..16).map(|k| 0.1 + 0.05 * k as f64).collect();
        means.shuffle(&mut rng);
        let best = (0..16)
            .max_by(|&a, &b| means[a].total_cmp(&means[b]))
            .unwrap();
        let mut bank = BeliefBank::uninformed(16, 0.05).unwrap();
        for _ in 0..200 {
            let k = select_action(&bank, &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            bank.observe(k, means[k] + 0.05 * z).unwrap();
        }
        if bank.best_arm() == best {
            hits += 1;
        }
    }
    check(
        hits >= 90,
        format!("{hits}/100 seeds identify the best arm"),
    )
}

/// Long protocol: bandit for its full 50 iterations, then 10 CEM iterations.
fn long_protocol_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = seed;
    cfg.garment.category = Category::TShirt;
    cfg.budgets.ei_threshold = 0.0;
    cfg.budgets.cem_iterations = 10;
    cfg
}

fn c4_mab_cem_vs_random() -> Outcome {
    let (mut ours, mut random, mut gaps) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let cfg = long_protocol_config(seed);
        let setup = Setup::new(&cfg).unwrap();
        let spec = setup
            .garment(&cfg, cfg.garment.category, cfg.garment.index)
            .unwrap();
        assert_eq!(spec.noise.base, 0.06);
        let report = run_pipeline_with_bank(&cfg, None).unwrap();
        ours.push(report.summary.true_mean);
        gaps.push(report.summary.oracle_value - report.summary.true_mean);
        let mut rng = rng_from(5000 + seed);
        let mut draws: Vec<f64> = (0..2001)
            .map(|_| {
                spec.mean_coverage(&sample_uniform(&setup.bounds, &mut rng))
                    .unwrap()
            })
            .collect();
        random.push(median(&mut draws));
    }
    let (m_ours, m_rand, m_gap) = (median(&mut ours), median(&mut random), median(&mut gaps));
    check(
        m_ours - m_rand >= 0.05 && m_gap <= 0.03,
        format!(
            "median true mean {m_ours:.3} vs random {m_rand:.3}; median gap to oracle {m_gap:.4}"
        ),
    )
}

fn c5_prior_transfer() -> Outcome {
    let (mut uninformed, mut category) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.training.categories = vec![Category::TShirt];
        cfg.training.garments_per_category = 5;
        let bank = build_prior_bank(&cfg).unwrap().bank;
        assert_eq!(bank.0.len(), 5);
        let r = run_pipeline_with_bank(&cfg, None).unwrap();
        uninformed.push(r.summary.mab_trials as f64);
        cfg.prior.mode = PriorMode::Category;
        let r = run_pipeline_with_bank(&cfg, Some(&bank)).unwrap();
        category.push(r.summary.mab_trials as f64);
    }
    let (mu, mc) = (median(&mut uninformed), median(&mut category));
    let reduction = 1.0 - mc / mu;
    check(
        reduction >= 0.5,
        format!(
            "median trials-to-stop {mu} uninformed vs {mc} category ({:.0}% fewer)",
            100.0 * reduction
        ),
    )
}

fn c6_cem_refinement() -> Outcome {
    let grid = ActionGrid::new(&ParamBounds::default_7d(), &[0, 1, 2, 3], 2).unwrap();
    let k = 6;
    let bounds = grid.bounds().clone();
    let cell = grid.cell(k).unwrap();
    // in-cell optimum away from the center along every varied dimension
    let mut u_opt = bounds.normalize(&FlingParams(cell.center.clone()));
    for (i, shift) in [0.09, -0.07, 0.11, -0.05].into_iter().enumerate() {
        u_opt[i] += shift;
    }
    assert!(cell.contains(&bounds.denormalize(&u_opt)));
    let opts = CemOptions {
        batch: 50,
        elites: 10,
        reps: 1,
        ..CemOptions::default()
    };
    let mut within = 0;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let b = bounds.clone();
        let target = u_opt.clone();
        let mut env = move |p: &FlingParams| {
            let u = b.normalize(p);
            Ok(0.9
                - 0.5
                    * u.iter()
                        .zip(&target)
                        .map(|(a, t)| (a - t).powi(2))
                        .sum::<f64>())
        };
        let mut log = TrialLog::new();
        let out = run_cem(
            &grid,
            k,
            &mut env,
            20,
            &opts,
            &mut rng_from(seed),
            seed,
            &mut log,
        )
        .unwrap();
        let u = bounds.normalize(&out.state.mean);
        let d = u
            .iter()
            .zip(&u_opt)
            .map(|(a, t)| (a - t).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
        if d < 1e-2 {
            within += 1;
        }
    }
    check(
        within >= 19,
        format!("{within}/20 seeds within 1e-2 (worst {worst:.2e}), batch 50 / elites 10"),
    )
}

fn c7_execution_stopping() -> Outcome {
    let mut rng = rng_from(107);
    let observed: Vec<f64> = (0..100_000)
        .map(|_| 0.5 + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let n = observed.len() as f64;
    let mu = observed.iter().sum::<f64>() / n;
    let sd = (observed.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    let post = ExecPosterior::new(mu, sd).unwrap();
    let expected = 1.0 / (1.0 - std_normal_cdf(1.0));
    let rows = bootstrap_stop_analysis(
        &observed,
        &post,
        &RuleSpec::z_score(1.0),
        &[1.0],
        200,
        10_000,
        &mut rng,
    )
    .unwrap();
    let mean = rows[0].mean_stops;
    let rel = (mean - expected).abs() / expected;

    let small: Vec<f64> = observed[..300].to_vec();
    let mut monotone = true;
    let grids: [(RuleKind, Vec<f64>); 3] = [
        (RuleKind::ZScore, vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5]),
        (
            RuleKind::OneStepEi,
            vec![0.001, 0.0025, 0.005, 0.01, 0.02, 0.04],
        ),
        (
            RuleKind::BudgetEi,
            vec![0.001, 0.0025, 0.005, 0.01, 0.02, 0.04],
        ),
    ];
    for (kind, thresholds) in grids {
        let rule = RuleSpec {
            samples: 500,
            ..RuleSpec::new(kind, thresholds[0])
        };
        let rows =
            bootstrap_stop_analysis(&small, &post, &rule, &thresholds, 10, 1000, &mut rng).unwrap();
        let ok = rows.windows(2).all(|w| match kind {
            // a higher z is harder to reach, so stops come later
            RuleKind::ZScore => w[1].mean_stops >= w[0].mean_stops,
            _ => w[1].mean_stops <= w[0].mean_stops,
        });
        monotone &= ok;
    }
    check(
        rel < 0.05 && monotone,
        format!(
            "rule-1 mean stop {mean:.3} vs {expected:.3} ({:.2}% off); curves monotone: {monotone}",
            100.0 * rel
        ),
    )
}

fn c8_rule3_vs_rule2() -> Outcome {
    let mut rng = rng_from(108);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let post =
            ExecPosterior::new(rng.random_range(0.4..0.9), rng.random_range(0.01..0.15)).unwrap();
        let r: f64 = rng.random_range(0.4..0.9);
        let est = rule3_estimate(&post, r, 1, 1_000_000, &mut rng).unwrap();
        worst = worst.max((est - expected_improvement(post.mu, post.sigma, r).unwrap()).abs());
    }
    check(
        worst < 2e-3,
        format!("max |rule3 - rule2| = {worst:.2e} over 10 posteriors"),
    )
}

fn c9_trajectory_limits() -> Outcome {
    let cfg = TrajectoryConfig::default();
    let mut rng = rng_from(109);
    let (mut pos_err, mut speed_over, mut theta_err, mut gap_excess) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for bounds in [ParamBounds::default_7d(), ParamBounds::default_9d()] {
        for _ in 0..1000 {
            let p = sample_uniform(&bounds, &mut rng);
            let plan = build_waypoints(&bounds, &p, &cfg).unwrap();
            let prof = generate_profile(&plan, cfg.sample_rate).unwrap();
            let t3 = prof.p3_time();
            let at3 = prof
                .samples
                .iter()
                .find(|s| s.t == t3)
                .expect("sample at P3");
            let last = prof.samples.last().unwrap();
            for (got, want) in [
                (at3.position, plan.waypoints[2].position),
                (last.position, plan.waypoints[3].position),
            ] {
                let e = (0..3)
                    .map(|i| (got[i] - want[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                pos_err = pos_err.max(e);
            }
            // the interpolated path arrives at the waypoints: the last
            // regular sample before each lies within one step of travel
            for (e_t, wp) in [(t3, 2), (prof.duration(), 3)] {
                let before = prof.samples.iter().rev().find(|s| s.t < e_t).unwrap();
                let w = plan.waypoints[wp].position;
                let d = (0..3)
                    .map(|i| (before.position[i] - w[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let allowed = plan.segments[wp - 1].v_max * (e_t - before.t);
                gap_excess = gap_excess.max(d - allowed);
            }
            for s in &prof.samples {
                speed_over = speed_over.max(s.speed - plan.segments[s.segment].v_max);
            }
            theta_err = theta_err.max((at3.theta - p[4]).abs());
        }
    }
    check(
        pos_err <= 1e-9 && gap_excess <= 1e-9 && speed_over <= 1e-6 && theta_err <= 1e-6,
        format!(
            "2000 draws: waypoint error {pos_err:.1e} m, approach excess {gap_excess:.1e} m, \
             speed over cap {speed_over:.1e}, theta error {theta_err:.1e} deg"
        ),
    )
}

fn c10_budget_accounting() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    macro_rules! expect {
        ($name:expr, $got:expr, $want:expr) => {{
            let (got, want): (usize, usize) = ($got, $want);
            ok &= got == want;
            notes.push(format!("{} {got}/{want}", $name));
        }};
    }

    let mut cfg = ExperimentConfig::default();
    cfg.budgets.ei_threshold = 0.0;
    let r = run_pipeline_with_bank(&cfg, None).unwrap();
    let mab = r.rows.iter().filter(|x| x.phase == Phase::Mab).count();
    let cem = r.rows.iter().filter(|x| x.phase == Phase::Cem).count();
    expect!("mab", mab, 50);
    expect!("cem", cem, 2 * 5 * 3);

    let r = run_pipeline_with_bank(&ExperimentConfig::default(), None).unwrap();
    let train = r.rows.iter().filter(|x| x.phase != Phase::Exec).count();
    ok &= train <= 50 + 30 && r.summary.cem_trials == 30;
    notes.push(format!("mab_cem {train}<=80"));

    for (method, iterations, reps, want) in [
        (Method::Cem, 14, 3, 14 * 5 * 3),
        (Method::Cem, 42, 1, 210),
        (Method::Bo, 70, 3, 210),
        (Method::Bo, 210, 1, 210),
    ] {
        let mut cfg = ExperimentConfig::default();
        cfg.method = method;
        if method == Method::Cem {
            cfg.budgets.cem_full_iterations = iterations;
            cfg.budgets.cem_reps = reps;
        } else {
            cfg.budgets.bo_iterations = iterations;
            cfg.budgets.bo_reps = reps;
            // the candidate count does not change the trial count
            cfg.budgets.bo_candidates = 256;
        }
        let r = run_pipeline_with_bank(&cfg, None).unwrap();
        expect!(
            &format!("{}({iterations}x{reps})", method.as_str()),
            r.rows.len(),
            want
        );
    }

    let mut cfg = ExperimentConfig::default();
    cfg.method = Method::Random;
    expect!(
        "random",
        run_pipeline_with_bank(&cfg, None).unwrap().rows.len(),
        210
    );
    expect!(
        "prior-bank",
        build_prior_bank(&ExperimentConfig::default())
            .unwrap()
            .log
            .len(),
        6 * 5 * 50
    );

    let grid = ActionGrid::new(&ParamBounds::default_7d(), &[0, 1, 2, 3], 2).unwrap();
    let mut flat = |_: &FlingParams| Ok(0.5);
    let mut log = TrialLog::new();
    let opts = MabOptions {
        threshold: 0.0,
        ..MabOptions::default()
    };
    run_mab(
        &mut flat,
        &grid,
        BeliefBank::uninformed(16, 0.1).unwrap(),
        &opts,
        &mut rng_from(0),
        0,
        &mut log,
    )
    .unwrap();
    expect!("run_mab", log.len(), 50);

    check(ok, notes.join(", "))
}

fn c11_determinism() -> Outcome {
    let bank_cfg = ExperimentConfig {
        seed: 11,
        ..ExperimentConfig::default()
    };
    let bank = build_prior_bank(&bank_cfg).unwrap().bank;
    let mut compared = 0;
    for method in [Method::MabCem, Method::Cem, Method::Bo, Method::Random] {
        let mut cfg = bank_cfg.clone();
        cfg.method = method;
        cfg.prior.mode = if method == Method::MabCem {
            PriorMode::Category
        } else {
            PriorMode::Uninformed
        };
        cfg.budgets.bo_candidates = 256;
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let paths: Vec<_> = dirs
            .iter()
            .map(|d| {
                emit_report(
                    &run_pipeline_with_bank(&cfg, Some(&bank)).unwrap(),
                    d.path(),
                )
                .unwrap()
            })
            .collect();
        for (a, b) in [
            (&paths[0].trials, &paths[1].trials),
            (&paths[0].summary, &paths[1].summary),
        ] {
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                return Err(format!("{} differs between runs", a.display()));
            }
            compared += 1;
        }
    }
    check(
        true,
        format!("{compared} file pairs byte-identical across repeated runs"),
    )
}

fn main() {
    // libtest-style flags (e.g. --nocapture, a filter) are accepted and ignored
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("EI closed form vs Monte Carlo", c1_ei_vs_monte_carlo),
        (
            "conjugate update vs quadrature Bayes",
            c2_conjugate_vs_quadrature,
        ),
        ("best-arm identification", c3_best_arm_identification),
        ("MAB+CEM vs random, gap to oracle", c4_mab_cem_vs_random),
        ("prior transfer trials-to-stop", c5_prior_transfer),
        ("CEM in-cell refinement", c6_cem_refinement),
        ("execution stopping bootstrap", c7_execution_stopping),
        ("rule 3 vs rule 2 at one remaining fling", c8_rule3_vs_rule2),
        ("trajectory limits", c9_trajectory_limits),
        ("budget accounting", c10_budget_accounting),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {:>2} ({name}): {detail} [{secs:.1}s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {:>2} ({name}): {detail} [{secs:.1}s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
