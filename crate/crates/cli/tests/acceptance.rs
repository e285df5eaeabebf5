//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured margin. Run with `cargo test -p hardlabel-cli --test
//! acceptance` (add `-- --nocapture` to see the lines on success).

use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hardlabel::dataset::DatasetRecord;
use hardlabel::distance::{
    binary_search_bracket, AdversarialPredicate, Direction, DistanceError, DistanceEval,
    DistanceEvaluator, DistanceObjective, DistanceStatus, SearchParams,
};
use hardlabel::harness::{assign_target, run_experiment, AttackMode, ExperimentConfig};
use hardlabel::oracle::{FeatureVector, Label, LinearModel, Model, ModelSpec, Oracle};
use hardlabel::rgf::{estimate_gradient, rgf_attack, RgfConfig, RgfOptimizer};
use hardlabel::vecmath;
use hardlabel::verify::{
    analytic_distance, brute_force_min_distortion, finite_difference_gradient,
};

const SQRT_04: f64 = 0.6324555320336759; // √0.4

fn untargeted(original: usize) -> AdversarialPredicate {
    AdversarialPredicate::Untargeted {
        original: Label(original),
    }
}

fn record(label: usize, features: Vec<f64>) -> DatasetRecord {
    DatasetRecord {
        features: FeatureVector::new(features).unwrap(),
        label: Label(label),
    }
}

fn halfspace_candidates(dim: usize) -> Vec<DatasetRecord> {
    let mut out = Vec::new();
    for k in 0..4 {
        let mut x = vec![0.0; dim];
        x[0] = 0.8 + 0.2 * k as f64;
        for (j, v) in x.iter_mut().enumerate().skip(1) {
            *v = 0.5 * ((k + j) % 3) as f64 - 0.4;
        }
        out.push(record(1, x));
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Direction {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if vecmath::norm(&v) > 1e-3 {
            return Direction::normalize(v).unwrap();
        }
    }
}

/// Criterion 1: warm-started distance evaluations agree with closed forms to
/// the configured tolerance on radial and linear models, 1000 random cases,
/// under ten seconds.
#[test]
fn analytic_distance_agreement() {
    let started = Instant::now();
    let tolerance = 1e-6;
    let params = SearchParams {
        tolerance,
        ..SearchParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15_7A6);
    let mut max_err: f64 = 0.0;

    let radial = Oracle::unbounded(Model::Radial(
        hardlabel::oracle::RadialModel::new(0.4, 2).unwrap(),
    ));
    for _ in 0..500 {
        // Inside points stay well clear of the boundary radius.
        let radius = 0.55 * rng.random_range(0.0f64..1.0).sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let x0 = FeatureVector::new(vec![radius * angle.cos(), radius * angle.sin()]).unwrap();
        let theta = random_unit(&mut rng, 2);
        let truth = analytic_distance(radial.model(), &x0, &theta)
            .unwrap()
            .expect("interior points always cross");
        let v_prev = truth * rng.random_range(0.5..2.0);
        let evaluator =
            DistanceEvaluator::new(&radial, &x0, untargeted(0), params.clone()).unwrap();
        let value = evaluator
            .eval_local(&theta, v_prev)
            .unwrap()
            .value()
            .unwrap();
        max_err = max_err.max((value - truth).abs());
    }

    for _ in 0..500 {
        let w = {
            let v: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            if vecmath::norm(&v) < 0.1 {
                vec![1.0, 0.0]
            } else {
                v
            }
        };
        let b = rng.random_range(0.2..0.8);
        let oracle = Oracle::unbounded(Model::Linear(LinearModel::new(w.clone(), b).unwrap()));
        // x0 strictly inside the original half-space.
        let x0 = loop {
            let v: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            if vecmath::dot(&w, &v) < b - 0.05 {
                break FeatureVector::new(v).unwrap();
            }
        };
        // Directions pointing decently toward the boundary, away from the
        // tangent where no crossing exists.
        let theta = loop {
            let t = random_unit(&mut rng, 2);
            if vecmath::dot(&w, t.as_slice()) > 0.05 {
                break t;
            }
        };
        let truth = analytic_distance(oracle.model(), &x0, &theta)
            .unwrap()
            .expect("construction guarantees a crossing");
        let v_prev = truth * rng.random_range(0.5..2.0);
        let evaluator =
            DistanceEvaluator::new(&oracle, &x0, untargeted(0), params.clone()).unwrap();
        let value = evaluator
            .eval_local(&theta, v_prev)
            .unwrap()
            .value()
            .unwrap();
        max_err = max_err.max((value - truth).abs());
    }

    let elapsed = started.elapsed();
    assert!(
        max_err <= tolerance,
        "FAIL analytic distance agreement: max error {max_err:e} above {tolerance:e}"
    );
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "FAIL analytic distance agreement: took {elapsed:?}"
    );
    println!(
        "acceptance: analytic distance agreement PASS (1000 cases, max err {max_err:.2e}, {:.2}s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: the attack recovers the half-space margin 0.5 within 1e-2 in
/// at most 20,000 queries for d in {2, 10}, ten seeds out of ten.
#[test]
fn half_space_optimum() {
    let config = RgfConfig::default();
    assert_eq!(config.beta, 0.005);
    assert_eq!(config.q, 20);
    for d in [2usize, 10] {
        let oracle = ModelSpec::linear_halfspace(d).into_oracle().unwrap();
        let x0 = FeatureVector::new(vec![0.0; d]).unwrap();
        let candidates = halfspace_candidates(d);
        let mut worst_gap: f64 = 0.0;
        let mut worst_queries = 0;
        for seed in 0..10u64 {
            let config = RgfConfig {
                query_budget: 20_000,
                seed,
                ..RgfConfig::default()
            };
            let result =
                rgf_attack(&oracle.fork(), &x0, untargeted(0), &candidates, &config).unwrap();
            let gap = (result.distortion - 0.5).abs();
            assert!(
                gap <= 1e-2,
                "FAIL half-space optimum: d={d} seed={seed} distortion {} (gap {gap:.2e})",
                result.distortion
            );
            assert!(
                result.total_queries <= 20_000,
                "FAIL half-space optimum: d={d} seed={seed} used {} queries",
                result.total_queries
            );
            assert!(result.adversarial);
            worst_gap = worst_gap.max(gap);
            worst_queries = worst_queries.max(result.total_queries);
        }
        println!(
            "acceptance: half-space optimum d={d} PASS (10/10 seeds, worst gap {worst_gap:.2e}, worst queries {worst_queries})"
        );
    }
}

/// Criterion 3: offset-sphere distortion within 1e-2 of √0.4 - ‖x0‖ in at
/// most 10,000 queries, at least nine seeds of ten.
#[test]
fn offset_sphere_optimum() {
    let oracle = ModelSpec::radial(2).into_oracle().unwrap();
    let x0 = FeatureVector::new(vec![0.1, 0.1]).unwrap();
    let expected = SQRT_04 - vecmath::norm(x0.as_slice());
    let candidates = vec![
        record(1, vec![0.9, 0.0]),
        record(1, vec![0.0, 0.9]),
        record(1, vec![-0.7, -0.4]),
    ];
    let mut passes = 0;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..10u64 {
        let config = RgfConfig {
            query_budget: 10_000,
            seed,
            ..RgfConfig::default()
        };
        let result = rgf_attack(&oracle.fork(), &x0, untargeted(0), &candidates, &config).unwrap();
        let gap = (result.distortion - expected).abs();
        if gap <= 1e-2 && result.total_queries <= 10_000 && result.adversarial {
            passes += 1;
        }
        worst_gap = worst_gap.max(gap);
    }
    assert!(
        passes >= 9,
        "FAIL offset sphere: only {passes}/10 seeds within 1e-2 of {expected}"
    );
    println!(
        "acceptance: offset sphere PASS ({passes}/10 seeds, worst gap {worst_gap:.2e}, optimum {expected:.4})"
    );
}

/// Criterion 4: on the hand-built two-stump ensemble, attacks land within
/// 10% of the brute-force ground truth (itself re-verified by a dense grid)
/// inside 30,000 queries, at least eight seeds of ten.
#[test]
fn gbdt_corner_attack() {
    let oracle = ModelSpec::corner_stumps().into_oracle().unwrap();
    let x0 = FeatureVector::new(vec![0.5, 0.5]).unwrap();
    let predicate = untargeted(0);

    let truth =
        brute_force_min_distortion(&oracle, &x0, predicate, 720, &SearchParams::default()).unwrap();

    // Re-verify the brute-force value by dense grid classification before
    // trusting it: scan [0, 1]² at step 1e-3 for the nearest adversarial
    // grid point.
    let probe = oracle.fork();
    let mut grid_min = f64::INFINITY;
    let step = 1e-3;
    let steps = 1001;
    for i in 0..steps {
        for j in 0..steps {
            let p = [i as f64 * step, j as f64 * step];
            if probe.classify_raw(&p).unwrap() == Label(1) {
                grid_min = grid_min.min(vecmath::distance(&p, x0.as_slice()));
            }
        }
    }
    assert!(
        (truth.min_distortion - grid_min).abs() <= 3e-3,
        "FAIL gbdt corner: brute force {} disagrees with grid {}",
        truth.min_distortion,
        grid_min
    );
    let expected = 0.02f64.sqrt();
    assert!(
        (truth.min_distortion - expected).abs() <= 2e-3,
        "FAIL gbdt corner: ground truth {} far from corner geometry {expected}",
        truth.min_distortion
    );

    let candidates = vec![record(1, vec![0.95, 0.7]), record(1, vec![0.7, 0.95])];
    let mut passes = 0;
    let mut worst_rel: f64 = 0.0;
    for seed in 0..10u64 {
        let config = RgfConfig {
            query_budget: 30_000,
            seed,
            ..RgfConfig::default()
        };
        let result = rgf_attack(&oracle.fork(), &x0, predicate, &candidates, &config).unwrap();
        let rel = (result.distortion - truth.min_distortion).abs() / truth.min_distortion;
        if rel <= 0.10 && result.total_queries <= 30_000 && result.adversarial {
            passes += 1;
        }
        worst_rel = worst_rel.max(rel);
    }
    assert!(
        passes >= 8,
        "FAIL gbdt corner: only {passes}/10 seeds within 10% of {}",
        truth.min_distortion
    );
    println!(
        "acceptance: gbdt corner attack PASS ({passes}/10 seeds, ground truth {:.4} grid-checked, worst rel gap {worst_rel:.3})",
        truth.min_distortion
    );
}

/// Exact quadratic objective `g(θ) = ‖θ - a‖²`; the estimator's independent
/// reference, bypassing any oracle.
struct Quadratic {
    center: Vec<f64>,
}

impl DistanceObjective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn tolerance(&self) -> f64 {
        0.0
    }
    fn eval_local(
        &self,
        theta: &[f64],
        _v_prev: f64,
        _cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError> {
        let value = vecmath::norm_sq(&vecmath::sub(theta, &self.center));
        Ok(DistanceEval {
            status: DistanceStatus::Found(value),
            queries_used: 0,
        })
    }
}

/// Criterion 5: averaged finite-difference estimates align with the analytic
/// quadratic gradient (cosine at least 0.9) for at least 18 of 20 seeds at
/// q = 2000, d = 5.
#[test]
fn estimator_validity() {
    let center = vec![0.3, -0.2, 0.5, 0.1, -0.4];
    let objective = Quadratic {
        center: center.clone(),
    };
    let theta = Direction::normalize(vec![1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    let g0 = vecmath::norm_sq(&vecmath::sub(theta.as_slice(), &center));
    let analytic: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(&center)
        .map(|(t, c)| 2.0 * (t - c))
        .collect();
    let config = RgfConfig {
        q: 2000,
        ..RgfConfig::default()
    };
    assert_eq!(config.beta, 0.005);

    let mut passes = 0;
    let mut worst: f64 = 1.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grad = estimate_gradient(&objective, &theta, g0, &config, &mut rng, None).unwrap();
        let cos = vecmath::cosine(&grad.vector, &analytic);
        if cos >= 0.9 {
            passes += 1;
        }
        worst = worst.min(cos);
    }
    assert!(
        passes >= 18,
        "FAIL estimator validity: only {passes}/20 seeds reached cosine 0.9 (worst {worst:.3})"
    );
    println!("acceptance: estimator validity PASS ({passes}/20 seeds, worst cosine {worst:.3})");
}

/// Criterion 6: on offset spheres, the finite-difference gradient norm falls
/// below δ = 0.05 within c·d/δ² iterations (c calibrated at d = 2), and the
/// accepted objective values never increase.
#[test]
fn convergence_diagnostic() {
    const DELTA: f64 = 0.05;
    // Headroom over the d = 2 calibration; the bound stays far below the
    // d/δ² envelope it is checking.
    const CALIBRATION_SLACK: f64 = 4.0;

    let iterations_to_small_gradient = |d: usize| -> u32 {
        let oracle = ModelSpec::radial(d).into_oracle().unwrap();
        let mut x0v = vec![0.0; d];
        x0v[0] = 0.1;
        x0v[1] = 0.1;
        let x0 = FeatureVector::new(x0v).unwrap();
        let predicate = untargeted(0);
        // A deliberately misaligned seed direction.
        let mut cand = vec![0.0; d];
        cand[0] = -0.2;
        cand[d - 1] = 0.9;
        let candidates = vec![record(1, cand)];
        let config = RgfConfig {
            seed: 42,
            ..RgfConfig::default()
        };

        let counted = oracle.fork();
        let evaluator =
            DistanceEvaluator::new(&counted, &x0, predicate, config.distance_params.clone())
                .unwrap()
                .with_relative_tolerance(config.iter_tolerance_rel);
        let (theta0, eval0) = evaluator
            .initialize_direction(&candidates, config.init_tries, None)
            .unwrap();
        let mut optimizer =
            RgfOptimizer::new(&evaluator, theta0, eval0.value().unwrap(), config).unwrap();

        // Uncounted fine evaluator for the diagnostic probes.
        let probe = oracle.fork();
        let fine = DistanceEvaluator::new(&probe, &x0, predicate, SearchParams::default()).unwrap();

        let mut last_g = f64::INFINITY;
        for iteration in 0..500u32 {
            let state = optimizer.state();
            assert!(
                state.g_value <= last_g,
                "FAIL convergence diagnostic: accepted g increased at iteration {iteration}"
            );
            last_g = state.g_value;
            let grad =
                finite_difference_gradient(&fine, &state.theta, state.g_value, 1e-3).unwrap();
            if vecmath::norm(&grad) < DELTA {
                return iteration;
            }
            optimizer.step(None).unwrap();
        }
        panic!("FAIL convergence diagnostic: d={d} never reached |grad| < {DELTA}");
    };

    let at_d2 = iterations_to_small_gradient(2);
    // c·d/δ² with c calibrated from the d = 2 run.
    let c = CALIBRATION_SLACK * at_d2.max(1) as f64 * DELTA * DELTA / 2.0;
    let mut measured = vec![(2, at_d2)];
    for d in [5usize, 10] {
        let needed = iterations_to_small_gradient(d);
        let allowed = (c * d as f64 / (DELTA * DELTA)).ceil() as u32;
        assert!(
            needed <= allowed,
            "FAIL convergence diagnostic: d={d} took {needed} iterations, bound {allowed}"
        );
        measured.push((d, needed));
    }

    // Monotone non-increase holds exactly in complete attack runs too.
    let oracle = ModelSpec::radial(2).into_oracle().unwrap();
    let x0 = FeatureVector::new(vec![0.1, 0.1]).unwrap();
    let candidates = vec![record(1, vec![0.9, 0.0])];
    for seed in 0..5u64 {
        let config = RgfConfig {
            query_budget: 10_000,
            seed,
            ..RgfConfig::default()
        };
        let result = rgf_attack(&oracle.fork(), &x0, untargeted(0), &candidates, &config).unwrap();
        for pair in result.trace.windows(2) {
            assert!(
                pair[1].1 < pair[0].1,
                "FAIL convergence diagnostic: trace increased ({pair:?})"
            );
        }
    }
    println!(
        "acceptance: convergence diagnostic PASS (iterations to |grad|<{DELTA}: {measured:?}, c={c:.2e})"
    );
}

/// Criterion 7: the bracket bisection spends exactly
/// ⌈log2(width / tolerance)⌉ oracle queries, 100 randomized brackets.
#[test]
fn binary_search_query_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB15EC7);
    for case in 0..100 {
        let b = rng.random_range(0.3..0.9);
        let oracle = Oracle::unbounded(Model::Linear(LinearModel::new(vec![1.0, 0.0], b).unwrap()));
        let x0 = FeatureVector::new(vec![0.0, 0.0]).unwrap();
        let theta = Direction::from_unit(vec![1.0, 0.0]).unwrap();
        let v_left = rng.random_range(0.01..b - 0.01);
        let v_right = rng.random_range(b + 0.01..2.0 * b);
        let tolerance = 10f64.powf(rng.random_range(-5.0..-2.0));

        let expected = {
            let mut width = v_right - v_left;
            let mut steps = 0u64;
            while width > tolerance {
                width *= 0.5;
                steps += 1;
            }
            steps
        };
        let before = oracle.query_count();
        let value = binary_search_bracket(
            &oracle,
            &x0,
            untargeted(0),
            &theta,
            v_left,
            v_right,
            tolerance,
        )
        .unwrap();
        let used = oracle.query_count() - before;
        assert_eq!(
            used, expected,
            "FAIL binary search exactness: case {case} (bracket [{v_left}, {v_right}], tol {tolerance}) used {used}, expected {expected}"
        );
        assert!(value > b && value <= b + tolerance.max(1e-12) + (v_right - b));
    }
    println!("acceptance: binary search query exactness PASS (100/100 brackets)");
}

/// Criterion 8: two `attack` invocations with identical configuration and
/// seed produce byte-identical record files, including across worker counts.
#[test]
fn cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bin = env!("CARGO_BIN_EXE_hardlabel");

    let status = Command::new(bin)
        .args(["gen-model", "--kind", "linear", "--d", "2", "--out"])
        .arg(d.join("model.json"))
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::write(
        d.join("data.csv"),
        "0,0.1,0.0\n0,0.2,0.1\n1,0.9,0.0\n1,0.8,0.3\n1,1.0,-0.2\n0,0.05,-0.1\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for (name, workers) in [("run-a", "1"), ("run-b", "1"), ("run-c", "4")] {
        let status = Command::new(bin)
            .current_dir(d)
            .env_remove("HARDLABEL_REPORT_DIR")
            .args([
                "attack",
                "--model",
                "model.json",
                "--dataset",
                "data.csv",
                "--n",
                "4",
                "--budget",
                "4000",
                "--seed",
                "9",
                "--workers",
                workers,
                "--out",
                name,
            ])
            .status()
            .unwrap();
        assert!(status.success(), "attack into {name} failed");
        outputs.push(std::fs::read(d.join(name).join("records.jsonl")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "FAIL determinism: reruns differ");
    assert_eq!(
        outputs[0], outputs[2],
        "FAIL determinism: workers 1 vs 4 differ"
    );
    println!(
        "acceptance: determinism PASS (byte-identical records across reruns and workers 1 vs 4, {} bytes)",
        outputs[0].len()
    );
}

/// Criterion 9: targeted-next assignment follows t = (y0 + 1) mod K and
/// every converged result classifies as its target.
#[test]
fn targeted_mode() {
    // The assignment rule itself, including the wrap-around.
    let probe = |y0: usize, k: usize| {
        assign_target(&record(y0, vec![0.0, 0.0]), AttackMode::TargetedNext, k)
            .unwrap()
            .unwrap()
            .0
    };
    assert_eq!(probe(9, 10), 0);
    assert_eq!(probe(3, 10), 4);
    assert_eq!(probe(2, 3), 0);

    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("sectors.json");
    std::fs::write(
        &model_path,
        serde_json::to_string(&ModelSpec::three_sector()).unwrap(),
    )
    .unwrap();
    let dataset_path = dir.path().join("data.csv");
    std::fs::write(
        &dataset_path,
        "0,1.0,0.0\n0,0.9,0.2\n1,-0.5,0.9\n1,-0.4,1.0\n2,-0.5,-0.9\n2,-0.3,-1.0\n",
    )
    .unwrap();

    let config = ExperimentConfig {
        mode: AttackMode::TargetedNext,
        n_examples: 6,
        rgf: RgfConfig {
            query_budget: 8_000,
            ..RgfConfig::default()
        },
        seed: 17,
        report_dir: dir.path().join("run"),
        ..ExperimentConfig::new(&model_path, &dataset_path)
    };
    let output = run_experiment(&config).unwrap();
    let oracle = hardlabel::oracle::load_model(&model_path).unwrap();
    let mut converged = 0;
    for rec in &output.records {
        let expected = (rec.original_label.0 + 1) % 3;
        assert_eq!(
            rec.target_label.unwrap().0,
            expected,
            "FAIL targeted mode: wrong assignment for example {}",
            rec.index
        );
        if rec.status == hardlabel::harness::RecordStatus::Converged {
            converged += 1;
            let x_star = FeatureVector::new(rec.x_star.clone().unwrap()).unwrap();
            let label = oracle.fork().classify(&x_star).unwrap();
            assert_eq!(
                label.0, expected,
                "FAIL targeted mode: example {} landed in class {label}",
                rec.index
            );
        }
    }
    assert!(converged > 0, "FAIL targeted mode: nothing converged");
    println!(
        "acceptance: targeted mode PASS ({converged}/{} converged, every target satisfied)",
        output.records.len()
    );
}
