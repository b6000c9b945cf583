//! Acceptance suite.
//!
//! Each criterion runs in isolation and prints one line:
//!
//! ```text
//! [PASS] 1 constant clipping bias: ...
//! [FAIL] 3 noise calibration: ...
//! ```
//!
//! Tolerances are fixed constants next to each check. The process exits with
//! a nonzero status when any criterion fails, so `cargo test` reports the
//! target as failed. Pass a substring as the first argument to run only the
//! criteria whose label contains it.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dicesgd::accountant::{
    calibrate_dicesgd, dicesgd_bound_epsilon, dicesgd_composed_epsilon, gaussian_rdp, rdp_to_dp,
    subsampled_gaussian_rdp, CalibrationInputs, ConstraintMode, EpsilonVariant, PrivacyBudget,
};
use dicesgd::optim::{convergence_rate_bound, run, RunSeeds, StepSize};
use dicesgd::oracle::{
    build_counterexample, clipped_fixed_point, dicesgd_fixed_point_check,
    small_instance_equivalence, Fault,
};
use dicesgd::{
    clip_residual, Algorithm, ClipConfig, FiniteSum, HyperParams, Logistic, NoiseSource, Quadratic,
    SamplingMode, Vector,
};
use dicesgd_harness::{
    run_experiment, weighted_grad_summary, CalibrationOptions, ExperimentConfig, GPrimeSource,
    InitialPoint, ProblemSpec,
};

/// Outcome of one criterion: pass flag and a one-line detail.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

// 1. Clipped SGD stalls at the biased fixed point of the counterexample.
fn constant_bias() -> Verdict {
    const ORACLE_TOL: f64 = 1e-3;
    const MIN_BIAS: f64 = 0.4;
    const LIMIT: Duration = Duration::from_secs(1);

    let start = Instant::now();
    let problem = build_counterexample(1.0).unwrap();
    let oracle = clipped_fixed_point(&problem, 1.0).unwrap();
    let Some(x_oracle) = oracle.x_star else {
        return Verdict::new(false, "scan oracle found no fixed point");
    };
    let hp = HyperParams::constant(0.01, 0.0, ClipConfig::single(1.0).unwrap(), 10_000);
    let trace = run(
        Algorithm::DpsgdGc,
        &problem,
        &hp,
        SamplingMode::Uniform {
            batch: problem.len(),
        },
        RunSeeds::from_seed(0),
        Vector::scalar(1.0),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let x = trace.final_state.x[0];
    let pass = (x - x_oracle).abs() <= ORACLE_TOL && x.abs() >= MIN_BIAS && within(elapsed, LIMIT);
    Verdict::new(
        pass,
        format!(
            "x_final = {x:.6}, oracle = {x_oracle:.6}, |gap| = {:.2e} (tol {ORACLE_TOL}), |x_final| >= {MIN_BIAS}, {elapsed:.2?}",
            (x - x_oracle).abs()
        ),
    )
}

// 2. DiceSGD reaches the true stationary point on the same problem.
fn bias_elimination() -> Verdict {
    const TOL: f64 = 1e-3;
    const LIMIT: Duration = Duration::from_secs(1);

    let start = Instant::now();
    let problem = build_counterexample(1.0).unwrap();
    let clip = ClipConfig::single(1.0).unwrap();
    let hp = HyperParams::constant(0.01, 0.0, clip, 10_000);
    let trace = run(
        Algorithm::DiceSgd,
        &problem,
        &hp,
        SamplingMode::Uniform {
            batch: problem.len(),
        },
        RunSeeds::from_seed(0),
        Vector::scalar(1.0),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let s = &trace.final_state;
    let r = dicesgd_fixed_point_check(&problem, &clip, &s.x, &s.e).unwrap();
    let x = s.x[0];
    let pass = x.abs() <= TOL && r.balance <= TOL && r.gradient <= TOL && within(elapsed, LIMIT);
    Verdict::new(
        pass,
        format!(
            "|x_final| = {:.2e}, balance residual = {:.2e}, gradient residual = {:.2e} (tol {TOL}), {elapsed:.2?}",
            x.abs(),
            r.balance,
            r.gradient
        ),
    )
}

// 3. Closed-form noise, and the composed per-iteration cost at that noise.
fn noise_calibration() -> Verdict {
    const EXPECTED: f64 = 0.136061;
    const SIGMA_TOL: f64 = 1e-5;

    let inputs = CalibrationInputs {
        horizon: 100,
        n: 1000,
        batch: 1,
        clip: ClipConfig::new(0.1, 0.1).unwrap(),
        c: 1.0,
        g_prime: None,
        constraints: ConstraintMode::Enforce,
    };
    let budget = PrivacyBudget::new(2.0, 1e-5).unwrap();
    let sigma = calibrate_dicesgd(&inputs, &budget).unwrap();
    // Second code path: the closed form written out directly.
    let g_tilde = 0.1f64.powi(2) + 2.0;
    let direct = (32.0 * 100.0 * g_tilde * (1e5f64).ln() / (1000.0f64.powi(2) * 4.0)).sqrt();
    let sigma_ok = (sigma - EXPECTED).abs() <= SIGMA_TOL && (sigma - direct).abs() <= 1e-15;

    let composed =
        dicesgd_composed_epsilon(&inputs, sigma, budget.delta, EpsilonVariant::Plain).unwrap();
    let bound = dicesgd_bound_epsilon(&inputs, sigma, budget.delta).unwrap();
    let composed_ok = matches!(composed, Some((eps, _)) if eps <= budget.epsilon);
    let fmt = |v: Option<(f64, f64)>| match v {
        Some((eps, a)) => format!("{eps:.4} at alpha {a}"),
        None => "no finite order".to_string(),
    };
    Verdict::new(
        sigma_ok && composed_ok,
        format!(
            "sigma1 = {sigma:.7} (target {EXPECTED} +- {SIGMA_TOL}: {}); composed per-iteration eps = {} (target <= {}); closed-form RDP bound converts to {}",
            if sigma_ok { "ok" } else { "off" },
            fmt(composed),
            budget.epsilon,
            fmt(bound)
        ),
    )
}

// 4. The clipping residual is non-expansive and does not increase variance.
fn residual_properties() -> Verdict {
    const PAIRS: usize = 10_000;
    const REL: f64 = 1e-12;
    const VAR_REL: f64 = 1e-6;

    let mut noise = NoiseSource::new(2024, 11);
    let mut violations = 0usize;
    let mut checked = 0usize;
    for d in [1usize, 2, 50] {
        for k in 0..PAIRS {
            let scale = [0.1, 1.0, 10.0][k % 3];
            let c = 0.05 + (k % 7) as f64 * 0.5;
            let a = noise.gaussian_vector(d, scale).unwrap();
            let b = noise.gaussian_vector(d, scale).unwrap();
            let lhs = clip_residual(&a, c)
                .unwrap()
                .distance(&clip_residual(&b, c).unwrap())
                .unwrap();
            if lhs > a.distance(&b).unwrap() * (1.0 + REL) {
                violations += 1;
            }
            checked += 1;
        }
    }

    let mut var_failures = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for d in [1usize, 2, 50] {
        for c in [0.5, 2.0, 5.0] {
            let xs: Vec<Vector> = (0..PAIRS)
                .map(|_| {
                    let z = noise.gaussian_vector(d, 2.0).unwrap();
                    Vector::new(z.as_slice().iter().map(|v| v + 1.0).collect()).unwrap()
                })
                .collect();
            let rs: Vec<Vector> = xs.iter().map(|x| clip_residual(x, c).unwrap()).collect();
            let (vx, vr) = (trace_variance(&xs), trace_variance(&rs));
            worst_ratio = worst_ratio.max(vr / vx);
            if vr > vx * (1.0 + VAR_REL) {
                var_failures += 1;
            }
        }
    }
    Verdict::new(
        violations == 0 && var_failures == 0,
        format!(
            "{violations} non-expansiveness violations in {checked} pairs; {var_failures} variance failures, worst var ratio {worst_ratio:.4}"
        ),
    )
}

/// Sum over coordinates of the sample variance.
fn trace_variance(xs: &[Vector]) -> f64 {
    let n = xs.len() as f64;
    let d = xs[0].dim();
    (0..d)
        .map(|j| {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
            xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

// 5. Weighted gradient statistic against the convergence bound on a quadratic.
fn convergence_rate() -> Verdict {
    const SEEDS: u64 = 5;
    const RATIO_MAX: f64 = 0.6;
    const SIGMA1: f64 = 0.01;
    const BATCH: usize = 100;
    const LIMIT: Duration = Duration::from_secs(30);

    let start = Instant::now();
    let spec = ProblemSpec::Quadratic {
        dim: 20,
        n: 1000,
        condition: 4.0,
        spread: 0.1,
        center: 0.0,
        seed: 7,
    };
    let problem = spec.build().unwrap();
    let hints = problem.hints();
    let (l, fstar, dev) = (
        hints.lipschitz.unwrap(),
        hints.min_value.unwrap(),
        hints.variance.unwrap(),
    );
    // The data are centred at the origin; start half a unit away in every
    // coordinate.
    let x0 = Vector::filled(20, 0.5);
    let c1 = 1.0;
    let clip = ClipConfig::new(c1, 3.0 * c1 + dev / BATCH as f64).unwrap();
    let gap = problem.loss(&x0).unwrap() - fstar;

    let mut medians = Vec::new();
    let mut bound_ok = true;
    let mut parts = Vec::new();
    for horizon in [100usize, 400, 1600] {
        let cfg = ExperimentConfig {
            name: format!("rate_{horizon}"),
            algorithm: Algorithm::DiceSgd,
            problem: spec.clone(),
            sampling: SamplingMode::Poisson { batch: BATCH },
            horizon,
            step_size: StepSize::Constant { eta: 0.0 },
            use_convergence_stepsize: true,
            sigma1: Some(SIGMA1),
            clip,
            adam: None,
            budget: None,
            calibration: CalibrationOptions::default(),
            seeds: (0..SEEDS).collect(),
            x0: InitialPoint::Values {
                values: x0.as_slice().to_vec(),
            },
            output_dir: None,
            sweep: None,
        };
        let traces = run_experiment(&cfg).unwrap();
        let rhs = convergence_rate_bound(gap, l, horizon, &clip, 20, SIGMA1).unwrap();
        let stats: Vec<f64> = traces
            .iter()
            .map(|t| weighted_grad_summary(t).unwrap().weighted_mean_sq_grad)
            .collect();
        bound_ok &= traces[0].metadata.threshold_check;
        bound_ok &= stats.iter().all(|&s| s <= rhs);
        let m = median(stats);
        parts.push(format!("T={horizon}: median {m:.3e} <= {rhs:.3e}"));
        medians.push(m);
    }
    let ratio = medians[2] / medians[1];
    let elapsed = start.elapsed();
    Verdict::new(
        bound_ok && ratio <= RATIO_MAX && within(elapsed, LIMIT),
        format!(
            "{}; T=1600/T=400 ratio {ratio:.3} (max {RATIO_MAX}), {elapsed:.2?}",
            parts.join(", ")
        ),
    )
}

// 6. Optimizer and straight-line transcription agree on small instances.
fn transcription_oracle() -> Verdict {
    const TOL: f64 = 1e-12;
    const HORIZON: usize = 50;

    let ce = build_counterexample(1.0).unwrap();
    let quad = Quadratic::synthetic(4, 8, 3.0, 1.0, 0.5, 2).unwrap();
    let logi = Logistic::two_gaussians(3, 10, 1.0, 5).unwrap();
    let cases: Vec<(&dyn FiniteSum, Vector)> = vec![
        (&ce, Vector::scalar(1.0)),
        (&quad, Vector::filled(4, -1.0)),
        (&logi, Vector::filled(3, 0.2)),
    ];
    let mut worst: f64 = 0.0;
    let mut faults_caught = true;
    for (problem, x0) in &cases {
        // Thresholds that clip on every step, and ones no norm reaches.
        for clip in [
            ClipConfig::new(0.05, 0.1).unwrap(),
            ClipConfig::single(1e6).unwrap(),
        ] {
            let rep = small_instance_equivalence(*problem, &clip, 0.05, x0, HORIZON, Fault::None)
                .unwrap();
            worst = worst.max(rep.max_deviation());
        }
        let active = ClipConfig::new(0.05, 0.1).unwrap();
        let faulty =
            small_instance_equivalence(*problem, &active, 0.05, x0, HORIZON, Fault::StaleErrorClip)
                .unwrap();
        faults_caught &= faulty.max_deviation() > TOL;
    }
    Verdict::new(
        worst <= TOL && faults_caught,
        format!("max deviation {worst:.2e} (tol {TOL}) over 3 problems x 2 regimes; injected fault detected: {faults_caught}"),
    )
}

// 7. Accountant arithmetic identities and validity gating.
fn accountant_identities() -> Verdict {
    const DRAWS: usize = 100;
    const REL: f64 = 1e-12;

    let mut u = NoiseSource::new(77, 5);
    let mut uniform = |lo: f64, hi: f64| {
        let z = u.standard_normal();
        // Map a normal draw to (0, 1) through the logistic function.
        lo + (hi - lo) / (1.0 + (-z).exp())
    };
    let close = |a: f64, b: f64| (a - b).abs() <= REL * a.abs().max(b.abs()).max(1e-300);
    let mut failures = 0usize;
    for _ in 0..DRAWS {
        let dist = uniform(0.0, 5.0);
        let sigma = uniform(0.1, 10.0);
        let alpha = uniform(1.01, 256.0);
        let k = uniform(0.1, 10.0);
        let base = gaussian_rdp(dist, sigma, alpha).unwrap();
        if !close(gaussian_rdp(k * dist, sigma, alpha).unwrap(), k * k * base) {
            failures += 1;
        }
        if !close(base, alpha * dist * dist / (2.0 * sigma * sigma)) {
            failures += 1;
        }
        let eps = uniform(0.0, 3.0);
        let delta = uniform(1e-9, 0.5);
        if !close(
            rdp_to_dp(alpha, eps, delta).unwrap(),
            eps + (1.0 / delta).ln() / (alpha - 1.0),
        ) {
            failures += 1;
        }
    }

    let c = 1.0;
    let gate = [
        (
            "p = 0.2 - 1e-9",
            subsampled_gaussian_rdp(0.2 - 1e-9, c, 10.0, 2.0)
                .value()
                .is_some(),
        ),
        (
            "p = 0.2 + 1e-9",
            subsampled_gaussian_rdp(0.2 + 1e-9, c, 10.0, 2.0)
                .value()
                .is_none(),
        ),
        (
            "sigma = 4C + 1e-9",
            subsampled_gaussian_rdp(0.01, c, 4.0 + 1e-9, 2.0)
                .value()
                .is_some(),
        ),
        (
            "sigma = 4C - 1e-9",
            subsampled_gaussian_rdp(0.01, c, 4.0 - 1e-9, 2.0)
                .value()
                .is_none(),
        ),
    ];
    let gate_fail: Vec<&str> = gate.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    Verdict::new(
        failures == 0 && gate_fail.is_empty(),
        format!(
            "{failures} identity failures in {} checks (rel tol {REL}); gating failures: {:?}",
            3 * DRAWS,
            gate_fail
        ),
    )
}

// 8. DiceSGD is no worse than DPSGD-GC at a matched budget.
fn directional_utility() -> Verdict {
    const SEEDS: u64 = 7;
    const SLACK: f64 = 1.01;
    const LIMIT: Duration = Duration::from_secs(120);

    let start = Instant::now();
    let base = |algorithm: Algorithm| ExperimentConfig {
        name: format!("utility_{algorithm}"),
        algorithm,
        problem: ProblemSpec::LogisticSynthetic {
            dim: 20,
            n: 5000,
            separation: 0.5,
            seed: 42,
        },
        sampling: SamplingMode::Poisson { batch: 1000 },
        horizon: 200,
        step_size: StepSize::Constant { eta: 1.0 },
        use_convergence_stepsize: false,
        sigma1: None,
        clip: ClipConfig::single(0.1).unwrap(),
        adam: None,
        budget: Some(PrivacyBudget::new(2.0, 1e-5).unwrap()),
        calibration: CalibrationOptions {
            c: Some(0.1),
            g_prime: GPrimeSource::Infinite,
            constraints: ConstraintMode::ReportOnly,
        },
        seeds: (0..SEEDS).collect(),
        x0: InitialPoint::Zeros,
        output_dir: None,
        sweep: None,
    };
    let mut out = Vec::new();
    for algorithm in [Algorithm::DiceSgd, Algorithm::DpsgdGc] {
        let traces = run_experiment(&base(algorithm)).unwrap();
        let sigma = traces[0].metadata.sigma1;
        let m = median(traces.iter().map(|t| t.metadata.final_loss).collect());
        out.push((m, sigma));
    }
    let elapsed = start.elapsed();
    let ((dice, s_dice), (gc, s_gc)) = (out[0], out[1]);
    Verdict::new(
        dice <= gc * SLACK && within(elapsed, LIMIT),
        format!(
            "median final loss DiceSGD {dice:.5} (sigma1 {s_dice:.4}) vs DPSGD-GC {gc:.5} (sigma1 {s_gc:.4}), slack {SLACK}, {elapsed:.2?}"
        ),
    )
}

// 9. The CLI writes byte-identical traces for repeated runs.
fn determinism() -> Verdict {
    let exe = Path::new(env!("CARGO_BIN_EXE_dicesgd"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "name": "det",
        "algorithm": "dicesgd",
        "problem": {"kind": "logistic_synthetic", "dim": 5, "n": 400, "separation": 1.0, "seed": 3},
        "sampling": {"mode": "poisson", "batch": 40},
        "horizon": 60,
        "step_size": {"kind": "warmup_linear", "eta": 0.5, "warmup": 10},
        "clip": {"c1": 0.5, "c2": 1.0},
        "sigma1": 0.05,
        "seeds": [11, 12]
    }"#;
    let cfg_path = dir.path().join("det.json");
    std::fs::write(&cfg_path, cfg).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(exe)
            .arg("run")
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return Verdict::new(
                false,
                format!("run failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        let files: Vec<Vec<u8>> = ["det_seed11.csv", "det_seed12.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    let identical = outputs[0] == outputs[1];
    let seeds_differ = outputs[0][0] != outputs[0][1];
    Verdict::new(
        identical && seeds_differ,
        format!(
            "two invocations byte-identical: {identical} ({} + {} bytes); distinct seeds give distinct traces: {seeds_differ}",
            outputs[0][0].len(),
            outputs[0][1].len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 constant clipping bias", constant_bias),
        ("2 bias elimination", bias_elimination),
        ("3 noise calibration", noise_calibration),
        ("4 residual properties", residual_properties),
        ("5 convergence rate", convergence_rate),
        ("6 transcription oracle", transcription_oracle),
        ("7 accountant identities", accountant_identities),
        ("8 directional utility", directional_utility),
        ("9 determinism", determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = Vec::new();
    for (label, check) in criteria {
        if filter.as_deref().is_some_and(|f| !label.contains(f)) {
            continue;
        }
        let verdict = match std::panic::catch_unwind(check) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::new(false, format!("panicked: {msg}"))
            }
        };
        println!(
            "[{}] {label}: {}",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail
        );
        if !verdict.pass {
            failed.push(label);
        }
    }
    if !failed.is_empty() {
        println!("{} criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
