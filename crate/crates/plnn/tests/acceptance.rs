//! Acceptance suite: the ten headline guarantees, one test per criterion,
//! each printing a single PASS line (run with `--nocapture` to see them).
//! Every criterion enforces its own runtime budget.

use std::time::Instant;

use ndarray::{array, Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plnn::data::{balance_classes, gen_synthetic, split, Normalizer, DEFAULT_MEANS, DEFAULT_SIGMA};
use plnn::{
    accuracy, boundary_cosine, exact_interpretation, flatten, logistic_fit, matrix_plot, pc_plot,
    prune_flat, prune_sweep, region_census, region_plot_2d, train_plnn, verify_theorem2,
    Configuration, FlatNetwork, FlattenOutcome, Layer, PcOptions, Plnn, PruneSchedule,
    Sense, TrainConfig,
};

fn figure_one_net() -> Plnn {
    Plnn::new(vec![
        Layer::new(array![[3.0, 2.0], [-1.0, 1.0], [1.0, 0.0]], array![2.0, -1.0, -1.0]),
        Layer::new(array![[2.0, 1.0, -5.0], [0.0, 7.0, -4.0]], array![-2.0, 1.0]),
        Layer::new(array![[1.0, -4.0]], array![-5.0]),
    ])
    .unwrap()
}

/// Random network with Gaussian-ish uniform weights, used as the test-side
/// generator (independent of any library internals).
fn sample_net(input_dim: usize, hidden: &[usize], seed: u64) -> Plnn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut fan_in = input_dim;
    for &width in hidden.iter().chain(std::iter::once(&1)) {
        let w = Array2::from_shape_fn((width, fan_in), |_| rng.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(width, |_| rng.random_range(-0.5..0.5));
        layers.push(Layer::new(w, b));
        fan_in = width;
    }
    Plnn::new(layers).unwrap()
}

fn sample_inputs(n: usize, dim: usize, range: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, dim), |_| rng.random_range(-range..range))
}

#[test]
fn criterion_01_toy_model_exactness() {
    let start = Instant::now();
    let net = figure_one_net();
    let x = array![2.0, 1.0];
    let pass = net.forward(x.view()).unwrap();
    assert_eq!(pass.preactivations[0], array![10.0, -2.0, 1.0]);
    assert_eq!(pass.preactivations[1], array![13.0, -3.0]);
    assert_eq!(pass.preactivations[2], array![8.0]);
    let config = net.configuration_of(x.view()).unwrap();
    assert_eq!(config.bits(), &[true, false, true, true, false]);
    assert!(pass.logit() >= 0.0, "class 1 expected");
    assert!(pass.probability > 0.5);
    assert!(start.elapsed().as_secs_f64() < 1.0, "over budget");
    println!("PASS: criterion 1 — toy-model exactness (Figure 1 values reproduced)");
}

#[test]
fn criterion_02_piecewise_linear_identity() {
    let start = Instant::now();
    let mut dims_rng = ChaCha8Rng::seed_from_u64(9001);
    for net_idx in 0..20u64 {
        let depth = dims_rng.random_range(1..=5usize);
        let input_dim = dims_rng.random_range(2..=6usize);
        let hidden: Vec<usize> = (0..depth).map(|_| dims_rng.random_range(2..=10usize)).collect();
        let net = sample_net(input_dim, &hidden, 1000 + net_idx);
        let x = sample_inputs(1000, input_dim, 4.0, 2000 + net_idx);
        for row in x.rows() {
            let logit = net.forward(row).unwrap().logit();
            let config = net.configuration_of(row).unwrap();
            let eq = net.linear_equation(&config).unwrap();
            let value = eq.eval(row);
            assert!(
                (logit - value).abs() < 1e-8 * (1.0 + value.abs()),
                "net {net_idx} ({hidden:?}): logit {logit} vs equation {value}"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 2 — piecewise-linear identity (20 nets x 1000 inputs, rel 1e-8)");
}

#[test]
fn criterion_03_theorem1_equivalence() {
    let start = Instant::now();
    let mut dims_rng = ChaCha8Rng::seed_from_u64(9003);
    for net_idx in 0..10u64 {
        let input_dim = dims_rng.random_range(2..=5usize);
        let width = dims_rng.random_range(1..=10usize);
        let net = sample_net(input_dim, &[width], 3000 + net_idx);
        let x = sample_inputs(2000, input_dim, 4.0, 4000 + net_idx);
        let configs = net.configurations_batch(x.view()).unwrap();
        let mut distinct: Vec<Configuration> = Vec::new();
        for c in &configs {
            if !distinct.contains(c) {
                distinct.push(c.clone());
            }
        }
        for (row, config) in x.rows().into_iter().zip(&configs) {
            // Region construction: the probe satisfies every inequality of
            // its own configuration...
            let own = net.region_inequalities(config).unwrap();
            assert_eq!(own.len(), width);
            assert!(
                own.iter().all(|iq| iq.satisfied_by(row)),
                "net {net_idx}: probe escapes its own region"
            );
            // ...and bit-by-bit, each inequality's sense encodes the bit, so
            // the configuration recovered from the inequalities alone equals
            // the forward one.
            let recovered: Vec<bool> = own.iter().map(|iq| iq.sense == Sense::Geq).collect();
            assert_eq!(recovered, config.bits(), "net {net_idx}");
            // Uniqueness: no other observed region claims the probe.
            for other in distinct.iter().filter(|c| *c != config) {
                let theirs = net.region_inequalities(other).unwrap();
                assert!(
                    !theirs.iter().all(|iq| iq.satisfied_by(row)),
                    "net {net_idx}: probe inside two regions"
                );
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 3 — Theorem 1 equivalence (10 single-layer nets x 2000 probes, 100%)");
}

#[test]
fn criterion_04_theorem2_verification() {
    let start = Instant::now();
    // Ten networks, four of them deep.
    let specs: [(&[usize], u64); 10] = [
        (&[2], 1),
        (&[3], 2),
        (&[5], 3),
        (&[8], 4),
        (&[10], 5),
        (&[4], 6),
        (&[4, 3], 7),
        (&[3, 3, 2], 8),
        (&[5, 4], 9),
        (&[2, 2, 2], 10),
    ];
    let mut deep = 0;
    for (hidden, seed) in specs {
        if hidden.len() > 1 {
            deep += 1;
        }
        let net = sample_net(2, hidden, 5000 + seed);
        let probes = sample_inputs(500, 2, 4.0, 6000 + seed);
        let report = verify_theorem2(&net, probes.view(), 1e-7).unwrap();
        assert!(
            report.passed(),
            "net {hidden:?} seed {seed}: {} violations, max residual {:.3e}",
            report.violations.len(),
            report.max_residual
        );
    }
    assert!(deep >= 3);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 4 — Theorem 2 verification (10 nets, {deep} deep, zero violations at 1e-7)");
}

#[test]
fn criterion_05_t_statistic_reproduction() {
    let start = Instant::now();
    // Synthetic 10x2 row and width-50 row, from the published summary.
    let t_10x2 = plnn::paired_t_from_summary(25, 0.93744 - 0.93416, 0.002269).unwrap();
    assert!(
        (t_10x2 - 7.227458).abs() < 1e-3,
        "10x2 summary t = {t_10x2}, expected 7.227458"
    );
    let t_50 = plnn::paired_t_from_summary(25, 0.93958 - 0.935452, 0.00317).unwrap();
    assert!(
        (t_50 - 6.511624).abs() < 1e-3,
        "width-50 summary t = {t_50}, expected 6.511624"
    );
    assert!(start.elapsed().as_secs_f64() < 1.0);
    println!("PASS: criterion 5 — paired-t summary reproduces published t-scores within 1e-3");
}

#[test]
fn criterion_06_flattening_parity() {
    let start = Instant::now();
    let mut orig_accs = Vec::new();
    let mut flat_accs = Vec::new();
    for seed in 0..5u64 {
        let data = gen_synthetic(5000, 100 + seed, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let (train, test) = split(&data, 0.6, 100 + seed).unwrap();
        assert_eq!(train.len(), 3000);
        assert_eq!(test.len(), 2000);
        let mut cfg = TrainConfig::new(vec![10, 10]);
        cfg.learning_rate = 0.02;
        cfg.batch_size = 4;
        cfg.epochs = 60;
        cfg.seed = 200 + seed;
        let net = train_plnn(&train, &cfg).unwrap();
        orig_accs.push(accuracy(&net, &test).unwrap());
        let flat = match flatten(&net, &train, 1e-3).unwrap() {
            FlattenOutcome::Flat(f) => f,
            FlattenOutcome::Original(_) => panic!("seed {seed}: all-trivial network"),
        };
        flat_accs.push(accuracy(&flat.to_plnn(), &test).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let orig_mean = mean(&orig_accs);
    let flat_mean = mean(&flat_accs);
    assert!(
        (0.91..=0.95).contains(&orig_mean),
        "original mean accuracy {orig_mean:.5} outside [0.91, 0.95] ({orig_accs:?})"
    );
    assert!(
        flat_mean >= orig_mean - 0.01,
        "flat mean {flat_mean:.5} below original mean {orig_mean:.5} - 0.01"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "over budget: {elapsed:.1}s");
    println!(
        "PASS: criterion 6 — flattening parity (orig {orig_mean:.5}, flat {flat_mean:.5}, 5 seeds)"
    );
}

#[test]
fn criterion_07_pruning_plateau() {
    let start = Instant::now();
    let data = gen_synthetic(5000, 300, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
    let (train, test) = split(&data, 0.6, 300).unwrap();
    let mut cfg = TrainConfig::new(vec![5, 5]);
    cfg.epochs = 60;
    cfg.seed = 301;
    let net = train_plnn(&train, &cfg).unwrap();
    let flat = match flatten(&net, &train, 1e-3).unwrap() {
        FlattenOutcome::Flat(f) => f,
        FlattenOutcome::Original(_) => panic!("all-trivial network"),
    };
    let points = prune_sweep(&flat, &train, &test, 1e-3, PruneSchedule::OneAtATime, None).unwrap();
    let full = points[0].accuracy;
    let plateau = points
        .iter()
        .filter(|p| p.width <= 10)
        .map(|p| p.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        plateau >= full - 0.01,
        "no width <= 10 within 0.01 of full accuracy {full:.4} (best {plateau:.4})"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "over budget: {elapsed:.1}s");
    println!(
        "PASS: criterion 7 — pruning plateau (full {full:.4}, best width<=10 {plateau:.4}, start width {})",
        points[0].width
    );
}

#[test]
fn criterion_08_cosine_limit() {
    let start = Instant::now();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let k = rng.random_range(3..=6usize);
        let d = rng.random_range(2..=4usize);
        let m = Array2::from_shape_fn((k, d), |_| rng.random_range(-1.0..1.0));
        let v = Array1::from_shape_fn(k, |_| rng.random_range(-0.5..0.5));
        let w = Array1::from_shape_fn(k, |_| {
            let mag: f64 = rng.random_range(0.5..1.5);
            if rng.random_range(0..2) == 0 {
                mag
            } else {
                -mag
            }
        });
        let neuron = rng.random_range(0..k);
        let mut last = f64::NEG_INFINITY;
        let mut cosine = f64::NAN;
        for scale in [1.0, 1e-1, 1e-2, 1e-3] {
            let mut scaled = w.clone();
            scaled[neuron] *= scale;
            let flat = FlatNetwork {
                m: m.clone(),
                v: v.clone(),
                w: scaled,
                b: 0.0,
                provenance: vec![Vec::new(); k],
            };
            cosine = boundary_cosine(&flat, neuron).unwrap();
            assert!(
                cosine > last,
                "seed {seed}: cosine not strictly increasing ({cosine} after {last})"
            );
            last = cosine;
        }
        assert!(cosine > 0.9999, "seed {seed}: final cosine {cosine}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 8 — cosine limit (5 nets, strictly increasing to > 0.9999)");
}

#[test]
fn criterion_09_logistic_solver_soundness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    for problem in 0..20 {
        let n = rng.random_range(80..200usize);
        let d = rng.random_range(2..=6usize);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let planted = Array1::from_shape_fn(d, |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |i| {
            let z = x.row(i).dot(&planted) + rng.random_range(-1.0..1.0);
            f64::from(u8::from(z >= 0.0))
        });
        let l2 = [1e-3, 1e-2, 0.1, 1.0][problem % 4];
        let fit = logistic_fit(x.view(), y.view(), l2).unwrap();
        assert!(
            fit.grad_norm < 1e-6,
            "problem {problem}: gradient norm {:.3e}",
            fit.grad_norm
        );

        // Independent oracle: central finite differences of the objective
        // (mean BCE + (l2/2)·|w|^2) at the solution must vanish too.
        let objective = |w: &Array1<f64>, b: f64| -> f64 {
            let mut total = 0.0;
            for i in 0..n {
                let z: f64 = x.row(i).dot(w) + b;
                // log(1 + e^z) - y z, computed stably.
                let softplus = if z > 30.0 { z } else { (1.0 + z.exp()).ln() };
                total += softplus - y[i] * z;
            }
            total / n as f64 + 0.5 * l2 * w.dot(w)
        };
        let h = 1e-6;
        for j in 0..d {
            let mut up = fit.w.clone();
            up[j] += h;
            let mut dn = fit.w.clone();
            dn[j] -= h;
            let fd = (objective(&up, fit.b) - objective(&dn, fit.b)) / (2.0 * h);
            assert!(fd.abs() < 1e-5, "problem {problem}, coord {j}: FD {fd:.3e}");
        }
        let fd_b = (objective(&fit.w, fit.b + h) - objective(&fit.w, fit.b - h)) / (2.0 * h);
        assert!(fd_b.abs() < 1e-5, "problem {problem}, bias: FD {fd_b:.3e}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 9 — logistic solver soundness (20 problems, grad < 1e-6, FD < 1e-5)");
}

#[test]
fn criterion_10_interpretation_pipeline() {
    let start = Instant::now();
    // Balance -> normalize -> train [10,10,10] -> flatten -> sweep ->
    // reports, on synthetic data standing in for the proprietary workflow.
    // A separable component layout (class-1 blobs right, class-0 left) gives
    // the two-neuron endpoint its textbook form: one hyperplane carries the
    // boundary while the other stays active across the whole cloud.
    let means = [[3.0, 1.5], [-3.0, 1.5], [3.0, -1.5], [-3.0, -1.5]];
    let raw = gen_synthetic(3000, 421, &means, DEFAULT_SIGMA).unwrap();
    let balanced = balance_classes(&raw, 421).unwrap();
    let normalizer = Normalizer::fit(&balanced).unwrap();
    let normalized = normalizer.apply(&balanced).unwrap();
    let (train, test) = split(&normalized, 0.6, 422).unwrap();

    let mut cfg = TrainConfig::new(vec![10, 10, 10]);
    cfg.epochs = 50;
    cfg.seed = 423;
    let net = train_plnn(&train, &cfg).unwrap();
    let flat = match flatten(&net, &train, 1e-3).unwrap() {
        FlattenOutcome::Flat(f) => f,
        FlattenOutcome::Original(_) => panic!("all-trivial network"),
    };
    let sweep = prune_sweep(&flat, &train, &test, 1e-3, PruneSchedule::OneAtATime, None).unwrap();
    assert_eq!(sweep.last().unwrap().width, 1);

    // Reports render at full width...
    let census = region_census(&flat.to_plnn(), &train).unwrap();
    let pc = pc_plot(&census, &train.feature_names, &PcOptions::default()).unwrap();
    assert!(pc.svg.contains("<polyline"));
    let matrix = matrix_plot(&flat.to_plnn(), &train, &train.feature_names).unwrap();
    assert!(matrix.csv.lines().count() > 1);
    let region = region_plot_2d(&flat.to_plnn(), &train).unwrap();
    assert!(region.contains("<svg"));

    // ...and the width-2 endpoint yields the Appendix-B shape: exactly two
    // active configurations, two inequalities each.
    let two = prune_flat(&flat, &train, 2, 1e-3).unwrap();
    let census2 = region_census(&two.to_plnn(), &train).unwrap();
    assert_eq!(
        census2.len(),
        2,
        "width-2 model shows {} active configurations",
        census2.len()
    );
    for region in &census2 {
        assert_eq!(region.inequalities.len(), 2);
    }
    let text = exact_interpretation(&two, &census2);
    assert!(text.starts_with("Exact Interpretation of 2-Neuron Network"));
    assert_eq!(text.matches("Configuration '").count(), 4); // 2 configs x 2 sections

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "over budget: {elapsed:.1}s");
    println!("PASS: criterion 10 — interpretation pipeline (flatten width {}, 2-config exact report)", flat.width());
}
