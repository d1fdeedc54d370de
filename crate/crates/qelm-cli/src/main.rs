//! Command-line front end: scenario simulation, staged training/evaluation,
//! sweeps, diagnostics, the estimator benchmark, and the throughput estimate.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O error. Set QELM_WORKERS to bound the worker pool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qelm_core::error::Error;
use qelm_core::harness::{self, ExperimentConfig, LossModel};
use qelm_core::observables;
use qelm_core::readout::{self, DataMatrix, InputForm, Targets};
use qelm_core::sampling::{self, build_matrices, Shots};
use qelm_core::states;

#[derive(Parser)]
#[command(name = "qelm", about = "Quantum-walk reservoir witness estimation toolkit", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the number of repeated splits.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scenario: prepare, evolve, sample, train, evaluate.
    Simulate,
    /// Train a readout from a dataset plus counts (or exact statistics).
    Train(TrainArgs),
    /// Apply a stored readout to a dataset plus counts (or exact statistics).
    Evaluate(EvaluateArgs),
    /// Sweep the per-state statistics and report the test MSE curve.
    SweepN(SweepNArgs),
    /// Sweep the mixing parameter of the noise study.
    SweepNoise(SweepNoiseArgs),
    /// Optimize the reservoir angles for the frame-superoperator objective.
    OptimizeReservoir(OptimizeArgs),
    /// Singular values of the training statistics at several shot counts.
    SvdReport(SvdArgs),
    /// Compare the trained readout against the dual-frame estimator.
    Benchmark,
    /// Coincidence-rate estimate from a transmission budget.
    Throughput(ThroughputArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file (JSON lines) carrying the training states and truths.
    #[arg(long)]
    dataset: PathBuf,
    /// Counts file; omit to train on exact probabilities via the reservoir.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Output readout file.
    #[arg(long, default_value = "readout.tsv")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Stored readout file.
    #[arg(long)]
    readout: PathBuf,
    /// Dataset file with truths for scoring.
    #[arg(long)]
    dataset: PathBuf,
    /// Counts file; omit to evaluate on exact probabilities via the reservoir.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Output report file.
    #[arg(long, default_value = "evaluation.tsv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepNArgs {
    /// Comma-separated per-state statistics, e.g. 10000,30000,100000.
    #[arg(long)]
    n_list: String,
}

#[derive(Args)]
struct SweepNoiseArgs {
    /// Comma-separated mixing parameters in [0, 1].
    #[arg(long)]
    p_list: String,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Total objective-evaluation budget across restarts.
    #[arg(long, default_value_t = 60_000)]
    budget: usize,
    /// Output reservoir file.
    #[arg(long, default_value = "optimized_reservoir.toml")]
    out: PathBuf,
}

#[derive(Args)]
struct SvdArgs {
    /// Comma-separated per-state statistics.
    #[arg(long)]
    n_list: String,
}

#[derive(Args)]
struct ThroughputArgs {
    /// Loss-model TOML; defaults to the measured apparatus budget.
    #[arg(long)]
    loss_model: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(workers) = std::env::var("QELM_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => 1,
                Error::Numerical(_) | Error::Contract(_) => 2,
                Error::Io { .. } => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("this subcommand requires --config"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(repeats) = cli.repeats {
        if repeats == 0 {
            return Err(Error::config("--repeats must be positive"));
        }
        cfg.repeats = repeats;
    }
    Ok(cfg)
}

fn ensure_out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::config(format!("bad {what} entry: {t}"))))
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let artifacts = harness::run_scenario(&cfg, &cli.out_dir)?;
            // stage the split-0 data for the train/evaluate workflow
            let povm = qelm_core::reservoir::effective_povm(&cfg.reservoir)?;
            let train_seed = sampling::derive_seed(cfg.seed, 0x7261, 0);
            let test_seed = sampling::derive_seed(cfg.seed, 0x7465, 0);
            let train_set = harness::scenario::generate_train_dataset(&cfg, train_seed)?;
            let test_set = harness::scenario::generate_test_dataset(&cfg, test_seed)?;
            states::save_dataset(&cli.out_dir.join("train_split0.jsonl"), &train_set)?;
            states::save_dataset(&cli.out_dir.join("test_split0.jsonl"), &test_set)?;
            if let Shots::PerState(_) = cfg.shots {
                let (_, train_counts) = build_matrices(
                    &train_set,
                    &povm,
                    cfg.shots,
                    sampling::derive_seed(train_seed, 1, 0),
                    &cfg.sampler,
                )?;
                let (_, test_counts) = build_matrices(
                    &test_set,
                    &povm,
                    cfg.shots,
                    sampling::derive_seed(test_seed, 2, 0),
                    &cfg.sampler,
                )?;
                sampling::save_counts(&cli.out_dir.join("train_split0_counts.tsv"), &train_counts.unwrap())?;
                sampling::save_counts(&cli.out_dir.join("test_split0_counts.tsv"), &test_counts.unwrap())?;
            }
            let m = &artifacts.metrics;
            println!("splits: {}", m.repeats);
            for (j, name) in m.observable_names.iter().enumerate() {
                println!(
                    "{name}: mse_train = {:.6} +- {:.6}, mse_test = {:.6} +- {:.6}",
                    m.mse_train_mean[j], m.mse_train_std[j], m.mse_test_mean[j], m.mse_test_std[j]
                );
            }
            for (name, w) in &m.witnesses {
                println!(
                    "{name}: accuracy = {:.4} +- {:.4}, certified(3 sigma) = {:.4} +- {:.4}",
                    w.accuracy_mean, w.accuracy_std, w.certified_mean, w.certified_std
                );
            }
            println!("artifacts: {}", artifacts.out_dir.display());
            Ok(())
        }
        Command::Train(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let dataset = states::load_dataset(&args.dataset)?;
            let targets = Targets::new(
                cfg.target_names.clone(),
                observables::truth_matrix(&cfg.target_names, &dataset)?,
            )?;
            let (readout_matrix, report) = match &args.counts {
                Some(path) => {
                    let counts = sampling::load_counts(path)?;
                    readout::train(&DataMatrix::Counts(&counts), &targets, &cfg.train_options)?
                }
                None => {
                    let povm = qelm_core::reservoir::effective_povm(&cfg.reservoir)?;
                    let (probabilities, _) =
                        build_matrices(&dataset, &povm, Shots::Exact, 0, &cfg.sampler)?;
                    let options = cfg.train_options;
                    if options.input_form == InputForm::RawCounts {
                        return Err(Error::config(
                            "raw-counts training requires a counts file",
                        ));
                    }
                    readout::train(&DataMatrix::Probabilities(&probabilities), &targets, &options.clone())?
                }
            };
            let out = cli.out_dir.join(&args.out);
            readout::save_readout(&out, &readout_matrix)?;
            println!("effective rank: {}", report.effective_rank);
            for (name, mse) in report.observable_names.iter().zip(&report.mse_train) {
                println!("{name}: mse_train = {mse:.6}");
            }
            println!("readout: {}", out.display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let readout_matrix = readout::load_readout(&args.readout)?;
            let dataset = states::load_dataset(&args.dataset)?;
            let names = readout_matrix.observable_names().to_vec();
            let truths = observables::truth_matrix(&names, &dataset)?;
            let predictions: Vec<Vec<f64>> = match &args.counts {
                Some(path) => {
                    let counts = sampling::load_counts(path)?;
                    if counts.num_states() != dataset.states().len() {
                        return Err(Error::config(format!(
                            "counts file has {} states but the dataset has {}",
                            counts.num_states(),
                            dataset.states().len()
                        )));
                    }
                    counts
                        .columns()
                        .iter()
                        .map(|c| readout_matrix.predict_counts(c))
                        .collect::<Result<_, _>>()?
                }
                None => {
                    let povm = qelm_core::reservoir::effective_povm(&cfg.reservoir)?;
                    let (probabilities, _) =
                        build_matrices(&dataset, &povm, Shots::Exact, 0, &cfg.sampler)?;
                    probabilities
                        .columns()
                        .iter()
                        .map(|p| readout_matrix.predict_probabilities(p))
                        .collect::<Result<_, _>>()?
                }
            };
            let mut out = String::from("observable\tmse_test\n");
            for (j, name) in names.iter().enumerate() {
                let preds: Vec<f64> = predictions.iter().map(|p| p[j]).collect();
                let mse = readout::mse(&preds, truths.row(j))?;
                out.push_str(&format!("{name}\t{mse}\n"));
                println!("{name}: mse_test = {mse:.6}");
            }
            let path = cli.out_dir.join(&args.out);
            std::fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
            println!("report: {}", path.display());
            Ok(())
        }
        Command::SweepN(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let n_list: Vec<u64> = parse_list(&args.n_list, "n-list")?;
            let report = harness::sweep_statistics(&cfg, &n_list)?;
            let path = cli.out_dir.join("sweep_n.tsv");
            harness::sweeps::save_sweep(&path, &report)?;
            for row in &report.rows {
                println!("N = {}: mse = {:.6e} +- {:.6e}", row.shots, row.mse_mean, row.mse_std);
            }
            println!("last-decade slope: {:.4}", report.last_decade_slope);
            println!("table: {}", path.display());
            Ok(())
        }
        Command::SweepNoise(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let p_list: Vec<f64> = parse_list(&args.p_list, "p-list")?;
            let report = harness::noise_sweep(&cfg, &p_list)?;
            let path = cli.out_dir.join("sweep_noise.tsv");
            harness::sweeps::save_noise(&path, &report)?;
            for row in &report.rows {
                println!(
                    "p = {:.3}: mse = {:.6} +- {:.6}, accuracy = {:.4} +- {:.4}",
                    row.p, row.mse_mean, row.mse_std, row.accuracy_mean, row.accuracy_std
                );
            }
            println!("table: {}", path.display());
            Ok(())
        }
        Command::OptimizeReservoir(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let outcome = harness::optimize_reservoir(&cfg.reservoir, args.budget, cfg.seed)?;
            let path = cli.out_dir.join(&args.out);
            qelm_core::reservoir::save_reservoir(&path, &outcome.config)?;
            println!(
                "objective: {:.6e} after {} evaluations over {} restarts",
                outcome.objective, outcome.evaluations, outcome.restarts
            );
            println!("reservoir: {}", path.display());
            Ok(())
        }
        Command::SvdReport(args) => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let n_list: Vec<u64> = parse_list(&args.n_list, "n-list")?;
            let report = harness::singular_value_report(&cfg, &n_list)?;
            let path = cli.out_dir.join("svd_report.tsv");
            harness::reports::save_svd_report(&path, &report)?;
            println!("exact spectrum: {} values above {}", report.exact_above_floor, report.floor);
            for s in &report.sampled {
                println!("N = {}: {} values above {}", s.shots, s.above_floor, report.floor);
            }
            println!("table: {}", path.display());
            Ok(())
        }
        Command::Benchmark => {
            let cfg = load_config(&cli)?;
            ensure_out_dir(&cli.out_dir)?;
            let report = harness::benchmark_shadow_vs_qelm(&cfg)?;
            let path = cli.out_dir.join("benchmark.tsv");
            harness::reports::save_benchmark(&path, &report)?;
            if !report.shadow_curve.is_empty() {
                let curve_path = cli.out_dir.join("shadow_mse_curve.tsv");
                harness::reports::save_shadow_curve(&curve_path, &report)?;
                println!("curve: {}", curve_path.display());
            }
            println!("witness: {}", report.witness);
            for row in &report.rows {
                println!(
                    "{}: mse(separable) = {:.6}, mse(entangled) = {:.6}",
                    row.method, row.mse_separable, row.mse_entangled
                );
            }
            println!("note: {}", report.caveat);
            println!("table: {}", path.display());
            Ok(())
        }
        Command::Throughput(args) => {
            let loss = match &args.loss_model {
                Some(path) => LossModel::load(path)?,
                None => LossModel::experimental(),
            };
            let t = harness::throughput_estimate(&loss)?;
            println!("total coincidence rate: {:.4} Hz", t.total_hz);
            println!("per-outcome coincidence rate: {:.4} Hz", t.per_outcome_hz);
            Ok(())
        }
    }
}
