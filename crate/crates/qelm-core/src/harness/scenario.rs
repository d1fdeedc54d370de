//! End-to-end scenario execution: prepare -> evolve -> sample -> train ->
//! evaluate, repeated over independent splits and aggregated.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::observables;
use crate::readout::{
    self, ConfusionReport, DataMatrix, ReadoutMatrix, Targets, TrainReport,
};
use crate::reservoir::EffectivePovm;
use crate::sampling::{build_matrices, derive_seed, CountsMatrix, ProbabilityMatrix};
use crate::states::{self, Dataset, ReferenceState, StateLabel};

use super::artifacts::{FileEntry, Manifest, RunArtifacts};
use super::config::{Composition, ExperimentConfig};

/// Everything produced by one train/test split.
#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub mse_train: Vec<f64>,
    pub mse_test: Vec<f64>,
    pub predictions: RealMatrix,
    pub truths: RealMatrix,
    pub test_labels: Vec<StateLabel>,
    pub confusions: Vec<(String, ConfusionReport)>,
    pub train_report: TrainReport,
    pub readout: ReadoutMatrix,
}

/// Draws the train dataset of one split according to the configured
/// composition. Sizes are taken from the config; the composition decides
/// which parts are drawn.
pub fn generate_train_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let sep = ReferenceState::named(cfg.reference_separable)?;
    let ent = ReferenceState::named(cfg.reference_entangled)?;
    let (n_sep, n_ent) = match cfg.train_composition {
        Composition::Mixed => (cfg.sizes.n_sep_train, cfg.sizes.n_ent_train),
        Composition::SeparableOnly => (cfg.sizes.n_sep_train, 0),
        Composition::EntangledOnly => (0, cfg.sizes.n_ent_train),
        Composition::SeparablePlusK(k) => (cfg.sizes.n_sep_train, k),
    };
    let mut dataset = states::generate_dataset(
        &sep,
        &ent,
        n_sep,
        n_ent,
        cfg.prep_mode,
        seed,
        &cfg.observables,
    )?;
    if cfg.mislabel_partials {
        dataset.mislabel_partials_as_maximal(&cfg.observables)?;
    }
    Ok(dataset)
}

pub fn generate_test_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let sep = ReferenceState::named(cfg.reference_separable)?;
    let ent = ReferenceState::named(cfg.reference_entangled)?;
    let (n_sep, n_ent) = match cfg.test_composition {
        Composition::Mixed => (cfg.sizes.n_sep_test, cfg.sizes.n_ent_test),
        Composition::SeparableOnly => (cfg.sizes.n_sep_test, 0),
        Composition::EntangledOnly => (0, cfg.sizes.n_ent_test),
        Composition::SeparablePlusK(k) => (cfg.sizes.n_sep_test, k),
    };
    states::generate_dataset(&sep, &ent, n_sep, n_ent, cfg.prep_mode, seed, &cfg.observables)
}

/// Trains a readout on a dataset's statistics under the configured options.
pub fn train_on_dataset(
    cfg: &ExperimentConfig,
    povm: &EffectivePovm,
    dataset: &Dataset,
    seed: u64,
) -> Result<(ReadoutMatrix, TrainReport, ProbabilityMatrix, Option<CountsMatrix>)> {
    let (probabilities, counts) = build_matrices(dataset, povm, cfg.shots, seed, &cfg.sampler)?;
    let targets = Targets::new(
        cfg.target_names.clone(),
        observables::truth_matrix(&cfg.target_names, dataset)?,
    )?;
    let data = match &counts {
        Some(c) => DataMatrix::Counts(c),
        None => DataMatrix::Probabilities(&probabilities),
    };
    let (readout, report) = readout::train(&data, &targets, &cfg.train_options)?;
    Ok((readout, report, probabilities, counts))
}

/// Applies a trained readout to a test dataset, sampling fresh counts when
/// the configured statistics are finite.
pub fn evaluate_on_dataset(
    cfg: &ExperimentConfig,
    povm: &EffectivePovm,
    readout: &ReadoutMatrix,
    train_report: &TrainReport,
    dataset: &Dataset,
    seed: u64,
) -> Result<SplitEvaluation> {
    let (probabilities, counts) = build_matrices(dataset, povm, cfg.shots, seed, &cfg.sampler)?;
    let n_obs = cfg.target_names.len();
    let n_states = dataset.states().len();
    let truths = observables::truth_matrix(&cfg.target_names, dataset)?;
    let mut predictions = RealMatrix::zeros(n_obs, n_states);
    for k in 0..n_states {
        let pred = match &counts {
            Some(c) => readout.predict_counts(&c.columns()[k])?,
            None => readout.predict_probabilities(&probabilities.columns()[k])?,
        };
        for j in 0..n_obs {
            predictions[(j, k)] = pred[j];
        }
    }
    let mut mse_test = Vec::with_capacity(n_obs);
    for j in 0..n_obs {
        mse_test.push(readout::mse(predictions.row(j), truths.row(j))?);
    }
    let mut confusions = Vec::new();
    for (j, name) in cfg.target_names.iter().enumerate() {
        if name.starts_with("W_") {
            let report = readout::witness_confusion(
                predictions.row(j),
                truths.row(j),
                0.0,
                train_report.mse_train[j],
            )?;
            confusions.push((name.clone(), report));
        }
    }
    Ok(SplitEvaluation {
        mse_train: train_report.mse_train.clone(),
        mse_test,
        predictions,
        truths,
        test_labels: dataset.states().iter().map(|s| s.label()).collect(),
        confusions,
        train_report: train_report.clone(),
        readout: readout.clone(),
    })
}

/// Runs one split: generate, sample, train, evaluate.
pub fn run_split(cfg: &ExperimentConfig, povm: &EffectivePovm, split: usize) -> Result<SplitEvaluation> {
    let train_seed = derive_seed(cfg.seed, 0x7261, split as u64);
    let test_seed = derive_seed(cfg.seed, 0x7465, split as u64);
    let train_set = generate_train_dataset(cfg, train_seed)?;
    let test_set = generate_test_dataset(cfg, test_seed)?;
    let (readout, report, _, _) = train_on_dataset(cfg, povm, &train_set, derive_seed(train_seed, 1, 0))?;
    evaluate_on_dataset(cfg, povm, &readout, &report, &test_set, derive_seed(test_seed, 2, 0))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-witness aggregate over repeats.
#[derive(Debug, Clone)]
pub struct WitnessAggregate {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub negative_recall_mean: f64,
    pub negative_recall_std: f64,
    pub certified_mean: f64,
    pub certified_std: f64,
    pub confusion_total: [[u64; 2]; 2],
}

/// Aggregate scenario metrics (mean and standard deviation over repeats).
#[derive(Debug, Clone)]
pub struct ScenarioMetrics {
    pub observable_names: Vec<String>,
    pub mse_train_mean: Vec<f64>,
    pub mse_train_std: Vec<f64>,
    pub mse_test_mean: Vec<f64>,
    pub mse_test_std: Vec<f64>,
    pub witnesses: BTreeMap<String, WitnessAggregate>,
    pub repeats: usize,
}

pub fn aggregate_metrics(cfg: &ExperimentConfig, splits: &[SplitEvaluation]) -> ScenarioMetrics {
    let n_obs = cfg.target_names.len();
    let collect = |f: &dyn Fn(&SplitEvaluation) -> &[f64], j: usize| -> Vec<f64> {
        splits.iter().map(|s| f(s)[j]).collect()
    };
    let mut mse_train_mean = Vec::new();
    let mut mse_train_std = Vec::new();
    let mut mse_test_mean = Vec::new();
    let mut mse_test_std = Vec::new();
    for j in 0..n_obs {
        let (m, s) = mean_std(&collect(&|e| &e.mse_train, j));
        mse_train_mean.push(m);
        mse_train_std.push(s);
        let (m, s) = mean_std(&collect(&|e| &e.mse_test, j));
        mse_test_mean.push(m);
        mse_test_std.push(s);
    }
    let mut witnesses = BTreeMap::new();
    if let Some(first) = splits.first() {
        for (name, _) in &first.confusions {
            let acc: Vec<f64> = splits
                .iter()
                .filter_map(|s| s.confusions.iter().find(|(n, _)| n == name))
                .map(|(_, r)| r.accuracy)
                .collect();
            let recall: Vec<f64> = splits
                .iter()
                .filter_map(|s| s.confusions.iter().find(|(n, _)| n == name))
                .map(|(_, r)| r.negative_recall)
                .filter(|v| v.is_finite())
                .collect();
            let cert: Vec<f64> = splits
                .iter()
                .filter_map(|s| s.confusions.iter().find(|(n, _)| n == name))
                .map(|(_, r)| r.certified_fraction_3sigma)
                .filter(|v| v.is_finite())
                .collect();
            let mut confusion_total = [[0u64; 2]; 2];
            for split in splits {
                if let Some((_, r)) = split.confusions.iter().find(|(n, _)| n == name) {
                    for i in 0..2 {
                        for j in 0..2 {
                            confusion_total[i][j] += r.confusion[i][j];
                        }
                    }
                }
            }
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let (negative_recall_mean, negative_recall_std) =
                if recall.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&recall) };
            let (certified_mean, certified_std) =
                if cert.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&cert) };
            witnesses.insert(
                name.clone(),
                WitnessAggregate {
                    accuracy_mean,
                    accuracy_std,
                    negative_recall_mean,
                    negative_recall_std,
                    certified_mean,
                    certified_std,
                    confusion_total,
                },
            );
        }
    }
    ScenarioMetrics {
        observable_names: cfg.target_names.clone(),
        mse_train_mean,
        mse_train_std,
        mse_test_mean,
        mse_test_std,
        witnesses,
        repeats: splits.len(),
    }
}

/// Full scenario: R independent splits in a parallel pool (results merged in
/// split order), aggregate metrics, and a plot-ready artifact directory.
pub fn run_scenario(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let povm = crate::reservoir::effective_povm(&cfg.reservoir)?;
    let splits: Vec<SplitEvaluation> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_split(cfg, &povm, r))
        .collect::<Result<_>>()?;
    let metrics = aggregate_metrics(cfg, &splits);

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut files: Vec<FileEntry> = Vec::new();

    // summary table
    let mut summary = String::from(
        "observable\tmse_train_mean\tmse_train_std\tmse_test_mean\tmse_test_std\n",
    );
    for (j, name) in metrics.observable_names.iter().enumerate() {
        summary.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\n",
            metrics.mse_train_mean[j],
            metrics.mse_train_std[j],
            metrics.mse_test_mean[j],
            metrics.mse_test_std[j]
        ));
    }
    write_artifact(out_dir, "summary.tsv", &summary, "summary", None, &mut files)?;

    // witness aggregates
    if !metrics.witnesses.is_empty() {
        let mut witness = String::from(
            "witness\taccuracy_mean\taccuracy_std\tnegative_recall_mean\tnegative_recall_std\tcertified_3sigma_mean\tcertified_3sigma_std\ttt\ttn\tnt\tnn\n",
        );
        for (name, agg) in &metrics.witnesses {
            witness.push_str(&format!(
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                agg.accuracy_mean,
                agg.accuracy_std,
                agg.negative_recall_mean,
                agg.negative_recall_std,
                agg.certified_mean,
                agg.certified_std,
                agg.confusion_total[0][0],
                agg.confusion_total[0][1],
                agg.confusion_total[1][0],
                agg.confusion_total[1][1]
            ));
        }
        write_artifact(out_dir, "witness_summary.tsv", &witness, "witness-summary", None, &mut files)?;
    }

    // per-split scatter data (true vs predicted) for every observable
    let scatter_dir = out_dir.join("scatter");
    std::fs::create_dir_all(&scatter_dir).map_err(|e| Error::io(scatter_dir.display().to_string(), e))?;
    for (r, split) in splits.iter().enumerate() {
        for (j, name) in metrics.observable_names.iter().enumerate() {
            let mut text = String::from("state\tlabel\ttruth\tprediction\n");
            for k in 0..split.predictions.cols() {
                text.push_str(&format!(
                    "{k}\t{:?}\t{}\t{}\n",
                    split.test_labels[k],
                    split.truths[(j, k)],
                    split.predictions[(j, k)]
                ));
            }
            let file = format!("scatter/{}_split{r}.tsv", sanitize(name));
            write_artifact(out_dir, &file, &text, "scatter", Some(r), &mut files)?;
        }
    }

    // singular spectra of the training design matrices
    for (r, split) in splits.iter().enumerate() {
        let mut text = String::from("index\tsingular_value\n");
        for (i, s) in split.train_report.singular_spectrum.iter().enumerate() {
            text.push_str(&format!("{i}\t{s}\n"));
        }
        let file = format!("svd_split{r}.tsv");
        write_artifact(out_dir, &file, &text, "singular-values", Some(r), &mut files)?;
    }

    // the split-0 readout for staged reuse
    let readout_path = out_dir.join("readout_split0.tsv");
    readout::save_readout(&readout_path, &splits[0].readout)?;
    files.push(FileEntry { path: "readout_split0.tsv".into(), kind: "readout".into(), split: Some(0) });

    let manifest = Manifest::new(cfg, files);
    manifest.save(out_dir)?;
    Ok(RunArtifacts { out_dir: out_dir.to_path_buf(), metrics, manifest })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '+' => 'p',
            '-' => 'm',
            c if c.is_ascii_alphanumeric() || c == '_' => c,
            _ => '_',
        })
        .collect()
}

fn write_artifact(
    out_dir: &Path,
    rel: &str,
    text: &str,
    kind: &str,
    split: Option<usize>,
    files: &mut Vec<FileEntry>,
) -> Result<()> {
    let path = out_dir.join(rel);
    std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    files.push(FileEntry { path: rel.into(), kind: kind.into(), split });
    Ok(())
}
