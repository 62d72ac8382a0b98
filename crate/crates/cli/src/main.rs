//! `plnn` — train, flatten, prune, verify, and interpret small piecewise-
//! linear classifiers from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plnn::data::{gen_synthetic, load_csv, save_csv, split, DEFAULT_MEANS, DEFAULT_SIGMA};
use plnn::{
    accuracy, exact_interpretation, flatten, matrix_plot, paired_t, pc_plot, prune_flat,
    prune_sweep, region_census, region_plot_2d, train_plnn, verify_theorem2, Dataset, FlatNetwork,
    FlattenOutcome, PcOptions, Plnn, PruneSchedule, TrainConfig,
};

#[derive(Parser)]
#[command(name = "plnn", version, about = "Piecewise-linear network toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the four-Gaussian synthetic dataset as CSV.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a ReLU network on a CSV dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Hidden widths as a comma list, e.g. "10,10".
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 0.02)]
        lr: f64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flatten a trained network into a single-hidden-layer network.
    Flatten {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune a flat network down to k neurons and refit.
    Prune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune a flat network stepwise to width 1, recording test metrics.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long, value_enum, default_value_t = Schedule::OneAtATime)]
        schedule: Schedule,
        /// Halving floor when --schedule halve.
        #[arg(long, default_value_t = 20)]
        halve_threshold: usize,
        /// Stop once test accuracy falls below this value.
        #[arg(long)]
        stop_below: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an interpretation artifact.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Comma list restricting the predictors shown.
        #[arg(long)]
        predictors: Option<String>,
        /// pc only: keep regions holding both classes.
        #[arg(long)]
        mixed_only: bool,
        /// pc only: keep the k most-populated regions.
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the model's piecewise-linear structure numerically.
    Verify {
        #[arg(long)]
        model: PathBuf,
        /// Comma list from identity, theorem1, theorem2.
        #[arg(long, default_value = "identity,theorem1,theorem2")]
        checks: String,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        /// Probe box half-width.
        #[arg(long, default_value_t = 4.0)]
        range: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train/flatten an architecture suite and emit a paired t-test table.
    ExperimentFlatten {
        /// Semicolon-separated architecture suite, e.g. "2;5;10,10".
        #[arg(long)]
        arches: String,
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0.6)]
        train_fraction: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        lr: f64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train/flatten/sweep an architecture suite and emit pruning curves.
    ExperimentPrune {
        #[arg(long)]
        arches: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0.6)]
        train_fraction: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        lr: f64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long, value_enum, default_value_t = Schedule::Halve)]
        schedule: Schedule,
        #[arg(long, default_value_t = 20)]
        halve_threshold: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Schedule {
    OneAtATime,
    Halve,
}

impl Schedule {
    fn to_plan(self, halve_threshold: usize) -> PruneSchedule {
        match self {
            Schedule::OneAtATime => PruneSchedule::OneAtATime,
            Schedule::Halve => PruneSchedule::HalveThenStep {
                threshold: halve_threshold,
            },
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Pc,
    Matrix,
    Region2d,
    Exact,
}

/// A failed command, carrying the exit code contract.
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<plnn::Error> for Failure {
    fn from(err: plnn::Error) -> Failure {
        use plnn::Error as E;
        let text = err.to_string();
        match err {
            E::InvalidParameter(_) | E::PruneWidth { .. } | E::UnknownPredictor(_) => {
                Failure::Usage(text)
            }
            E::NonFinite(_) | E::ZeroVariance | E::UndefinedSimilarity => Failure::Numeric(text),
            _ => Failure::Data(text),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = run(cli.command) {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.code());
    }
}

/// The invocation echoed into CSV outputs, e.g. "# cmd: plnn gen-data ...",
/// re-quoted so the echoed line can be pasted back into a shell.
fn cmd_echo() -> String {
    let args: Vec<String> = std::env::args().skip(1).map(|a| shell_quote(&a)).collect();
    format!("cmd: plnn {}", args.join(" "))
}

fn shell_quote(arg: &str) -> String {
    let plain = |c: char| c.is_ascii_alphanumeric() || "_-./,=:+".contains(c);
    if !arg.is_empty() && arg.chars().all(plain) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

fn parse_arch(s: &str) -> Result<Vec<usize>, Failure> {
    let widths: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match widths {
        Ok(w) if !w.is_empty() && w.iter().all(|&v| v > 0) => Ok(w),
        _ => Err(Failure::Usage(format!(
            "bad architecture {s:?}: expected a comma list of positive widths, e.g. \"10,10\""
        ))),
    }
}

fn parse_suite(s: &str) -> Result<Vec<Vec<usize>>, Failure> {
    let arches: Result<Vec<Vec<usize>>, Failure> =
        s.split(';').filter(|t| !t.trim().is_empty()).map(parse_arch).collect();
    let arches = arches?;
    if arches.is_empty() {
        return Err(Failure::Usage("empty architecture suite".into()));
    }
    Ok(arches)
}

fn parse_predictor_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

/// Paper-style structure label: "10" for [10], "10x2" for [10, 10].
fn arch_label(widths: &[usize]) -> String {
    if widths.len() == 1 {
        widths[0].to_string()
    } else if widths.iter().all(|&w| w == widths[0]) {
        format!("{}x{}", widths[0], widths.len())
    } else {
        widths.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenData { n, seed, sigma, out } => {
            let data = gen_synthetic(n, seed, &DEFAULT_MEANS, sigma)?;
            save_csv(&data, &out, Some(&cmd_echo()))?;
            println!("wrote {} rows to {}", data.len(), out.display());
            Ok(())
        }
        Command::Train { data, arch, lr, batch, epochs, seed, out } => {
            let widths = parse_arch(&arch)?;
            let dataset = load_csv(&data)?;
            let mut cfg = TrainConfig::new(widths);
            cfg.learning_rate = lr;
            cfg.batch_size = batch;
            cfg.epochs = epochs;
            cfg.seed = seed;
            let net = train_plnn(&dataset, &cfg)?;
            net.save(&out)?;
            let acc = accuracy(&net, &dataset)?;
            println!("trained {} — train accuracy {acc:.4}, saved {}", arch_label(&cfg.architecture), out.display());
            Ok(())
        }
        Command::Flatten { model, data, l2, out } => {
            let net = Plnn::load(&model)?;
            let dataset = load_csv(&data)?;
            match flatten(&net, &dataset, l2)? {
                FlattenOutcome::Flat(flat) => {
                    flat.save(&out)?;
                    println!("flattened to width {} — saved {}", flat.width(), out.display());
                    Ok(())
                }
                FlattenOutcome::Original(_) => Err(Failure::Numeric(
                    "flattening not possible: no nonzero-weight regions observed".into(),
                )),
            }
        }
        Command::Prune { model, data, k, l2, out } => {
            let flat = FlatNetwork::load(&model)?;
            let dataset = load_csv(&data)?;
            let pruned = prune_flat(&flat, &dataset, k, l2)?;
            pruned.save(&out)?;
            println!("pruned {} -> {} neurons — saved {}", flat.width(), pruned.width(), out.display());
            Ok(())
        }
        Command::Sweep { model, data, test, l2, schedule, halve_threshold, stop_below, out } => {
            let flat = FlatNetwork::load(&model)?;
            let train_set = load_csv(&data)?;
            let test_set = load_csv(&test)?;
            let points = prune_sweep(
                &flat,
                &train_set,
                &test_set,
                l2,
                schedule.to_plan(halve_threshold),
                stop_below,
            )?;
            let mut csv = format!("# {}\nwidth,accuracy,auc\n", cmd_echo());
            for p in &points {
                writeln!(csv, "{},{},{}", p.width, p.accuracy, p.auc).unwrap();
            }
            write_file(&out, &csv)?;
            println!("swept {} widths — saved {}", points.len(), out.display());
            Ok(())
        }
        Command::Report { model, data, kind, predictors, mixed_only, top_k, out } => {
            report(model, data, kind, predictors, mixed_only, top_k, out)
        }
        Command::Verify { model, checks, tol, probes, range, seed } => {
            verify(model, &checks, tol, probes, range, seed)
        }
        Command::ExperimentFlatten {
            arches, trials, n, train_fraction, sigma, seed, lr, batch, epochs, l2, out,
        } => experiment_flatten(
            &arches, trials, n, train_fraction, sigma, seed, lr, batch, epochs, l2, &out,
        ),
        Command::ExperimentPrune {
            arches, trials, n, train_fraction, sigma, seed, lr, batch, epochs, l2,
            schedule, halve_threshold, out,
        } => experiment_prune(
            &arches, trials, n, train_fraction, sigma, seed, lr, batch, epochs, l2,
            schedule.to_plan(halve_threshold), &out,
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    model: PathBuf,
    data: PathBuf,
    kind: ReportKind,
    predictors: Option<String>,
    mixed_only: bool,
    top_k: Option<usize>,
    out: PathBuf,
) -> Result<(), Failure> {
    let dataset = load_csv(&data)?;
    match kind {
        ReportKind::Pc => {
            let net = Plnn::load(&model)?;
            let census = region_census(&net, &dataset)?;
            let options = PcOptions {
                predictors: predictors.as_deref().map(parse_predictor_list),
                mixed_only,
                top_k,
            };
            let plot = pc_plot(&census, &dataset.feature_names, &options)?;
            write_file(&out, &plot.svg)?;
            let csv_path = out.with_extension("csv");
            write_file(&csv_path, &plot.csv)?;
            println!("wrote {} and {}", out.display(), csv_path.display());
        }
        ReportKind::Matrix => {
            let net = Plnn::load(&model)?;
            let names = predictors
                .as_deref()
                .map(parse_predictor_list)
                .unwrap_or_else(|| dataset.feature_names.clone());
            let plot = matrix_plot(&net, &dataset, &names)?;
            write_file(&out, &plot.svg)?;
            let csv_path = out.with_extension("csv");
            write_file(&csv_path, &plot.csv)?;
            println!("wrote {} and {}", out.display(), csv_path.display());
        }
        ReportKind::Region2d => {
            let net = Plnn::load(&model)?;
            let svg = region_plot_2d(&net, &dataset)?;
            write_file(&out, &svg)?;
            println!("wrote {}", out.display());
        }
        ReportKind::Exact => {
            let flat = FlatNetwork::load(&model)?;
            let census = region_census(&flat.to_plnn(), &dataset)?;
            let text = exact_interpretation(&flat, &census);
            write_file(&out, &text)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn verify(
    model: PathBuf,
    checks: &str,
    tol: f64,
    probes: usize,
    range: f64,
    seed: u64,
) -> Result<(), Failure> {
    let net = Plnn::load(&model)?;
    let mut selected = Vec::new();
    for name in checks.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match name {
            "identity" | "theorem1" | "theorem2" => selected.push(name.to_string()),
            other => {
                return Err(Failure::Usage(format!(
                    "unknown check {other:?}: expected identity, theorem1, theorem2"
                )))
            }
        }
    }
    if selected.is_empty() {
        return Err(Failure::Usage("no checks selected".into()));
    }
    if probes == 0 || !(range > 0.0) {
        return Err(Failure::Usage("--probes must be ≥ 1 and --range > 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((probes, net.input_dim()), |_| rng.random_range(-range..range));
    let mut failed = Vec::new();

    for check in &selected {
        match check.as_str() {
            "identity" => {
                let mut max_rel = 0.0f64;
                for row in x.rows() {
                    let logit = net.forward(row)?.logit();
                    let config = net.configuration_of(row)?;
                    let value = net.linear_equation(&config)?.eval(row);
                    let rel = (logit - value).abs() / (1.0 + value.abs());
                    max_rel = max_rel.max(rel);
                }
                if max_rel < tol {
                    println!("identity: ok ({probes} probes, max relative residual {max_rel:.3e})");
                } else {
                    println!("identity: FAILED (max relative residual {max_rel:.3e} ≥ {tol:.1e})");
                    failed.push("identity");
                }
            }
            "theorem1" => {
                let mut own_violations = 0usize;
                let mut cross_hits = 0usize;
                let mut distinct: Vec<plnn::Configuration> = Vec::new();
                let configs = net.configurations_batch(x.view())?;
                for c in &configs {
                    if !distinct.contains(c) {
                        distinct.push(c.clone());
                    }
                }
                for (row, config) in x.rows().into_iter().zip(&configs) {
                    let own = net.region_inequalities(config)?;
                    if !own.iter().all(|iq| iq.satisfied_by(row)) {
                        own_violations += 1;
                    }
                    for other in distinct.iter().filter(|c| *c != config).take(5) {
                        let theirs = net.region_inequalities(other)?;
                        if theirs.iter().all(|iq| iq.satisfied_by(row)) {
                            cross_hits += 1;
                        }
                    }
                }
                if own_violations == 0 && cross_hits == 0 {
                    println!(
                        "theorem1: ok ({probes} probes, {} regions, inequalities match forward passes)",
                        distinct.len()
                    );
                } else {
                    println!(
                        "theorem1: FAILED ({own_violations} probes outside their own region, {cross_hits} inside another's)"
                    );
                    failed.push("theorem1");
                }
            }
            "theorem2" => {
                let report = verify_theorem2(&net, x.view(), tol)?;
                if report.passed() {
                    println!(
                        "theorem2: ok ({} adjacent pairs, {} identical-equation, max residual {:.3e})",
                        report.pairs_checked, report.identical_equation_pairs, report.max_residual
                    );
                } else {
                    println!(
                        "theorem2: FAILED ({} violations, max residual {:.3e})",
                        report.violations.len(),
                        report.max_residual
                    );
                    failed.push("theorem2");
                }
            }
            _ => unreachable!(),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("checks failed: {}", failed.join(", "))))
    }
}

/// One trained trial: original accuracy and the flat network's, if any.
struct Trial {
    original: f64,
    flattened: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    widths: &[usize],
    trial: usize,
    n: usize,
    train_fraction: f64,
    sigma: f64,
    seed: u64,
    lr: f64,
    batch: usize,
    epochs: usize,
    l2: f64,
) -> Result<(Trial, Option<FlatNetwork>, Dataset, Dataset), Failure> {
    let stream = seed + trial as u64;
    let data = gen_synthetic(n, stream, &DEFAULT_MEANS, sigma)?;
    let (train_set, test_set) = split(&data, train_fraction, stream)?;
    let mut cfg = TrainConfig::new(widths.to_vec());
    cfg.learning_rate = lr;
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.seed = stream;
    let net = train_plnn(&train_set, &cfg)?;
    let original = accuracy(&net, &test_set)?;
    match flatten(&net, &train_set, l2)? {
        FlattenOutcome::Flat(flat) => {
            let flattened = accuracy(&flat.to_plnn(), &test_set)?;
            Ok((
                Trial {
                    original,
                    flattened: Some(flattened),
                },
                Some(flat),
                train_set,
                test_set,
            ))
        }
        FlattenOutcome::Original(_) => Ok((
            Trial {
                original,
                flattened: None,
            },
            None,
            train_set,
            test_set,
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn experiment_flatten(
    arches: &str,
    trials: usize,
    n: usize,
    train_fraction: f64,
    sigma: f64,
    seed: u64,
    lr: f64,
    batch: usize,
    epochs: usize,
    l2: f64,
    out: &Path,
) -> Result<(), Failure> {
    let suite = parse_suite(arches)?;
    if trials == 0 {
        return Err(Failure::Usage("--trials must be ≥ 1".into()));
    }
    let mut csv = format!(
        "# {}\nstructure,trials,discarded,original_mean,flattened_mean,sd_diff,t\n",
        cmd_echo()
    );
    for widths in &suite {
        let label = arch_label(widths);
        let mut original = Vec::new();
        let mut flattened = Vec::new();
        let mut discarded = 0usize;
        for trial in 0..trials {
            let (result, _, _, _) = run_trial(
                widths, trial, n, train_fraction, sigma, seed, lr, batch, epochs, l2,
            )?;
            match result.flattened {
                Some(f) => {
                    original.push(result.original);
                    flattened.push(f);
                }
                None => discarded += 1, // all-trivial network: no flat model
            }
        }
        let stats = paired_t(&original, &flattened)?;
        writeln!(
            csv,
            "{label},{},{discarded},{},{},{},{}",
            stats.n, stats.mean_orig, stats.mean_new, stats.sd_diff, stats.t
        )
        .unwrap();
        println!(
            "{label}: orig {:.5} flat {:.5} t {:.4} ({} kept, {discarded} discarded)",
            stats.mean_orig, stats.mean_new, stats.t, stats.n
        );
    }
    write_file(out, &csv)?;
    println!("saved {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment_prune(
    arches: &str,
    trials: usize,
    n: usize,
    train_fraction: f64,
    sigma: f64,
    seed: u64,
    lr: f64,
    batch: usize,
    epochs: usize,
    l2: f64,
    schedule: PruneSchedule,
    out: &Path,
) -> Result<(), Failure> {
    let suite = parse_suite(arches)?;
    if trials == 0 {
        return Err(Failure::Usage("--trials must be ≥ 1".into()));
    }
    let mut csv = format!("# {}\nstructure,trial,width,accuracy,auc\n", cmd_echo());
    for widths in &suite {
        let label = arch_label(widths);
        for trial in 0..trials {
            let (_, flat, train_set, test_set) = run_trial(
                widths, trial, n, train_fraction, sigma, seed, lr, batch, epochs, l2,
            )?;
            let Some(flat) = flat else {
                println!("{label} trial {trial}: discarded (all-trivial network)");
                continue;
            };
            let points = prune_sweep(&flat, &train_set, &test_set, l2, schedule, None)?;
            for p in &points {
                writeln!(csv, "{label},{trial},{},{},{}", p.width, p.accuracy, p.auc).unwrap();
            }
            println!(
                "{label} trial {trial}: width {} -> 1, full-width accuracy {:.4}",
                points[0].width, points[0].accuracy
            );
        }
    }
    write_file(out, &csv)?;
    println!("saved {}", out.display());
    Ok(())
}
