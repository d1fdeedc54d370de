//! Linear readout: train W against known expectation values, predict on new
//! measurement statistics, and score predictions (MSE, sign confusion,
//! three-sigma certification).

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RealMatrix};
use crate::reservoir::NUM_OUTCOMES;
use crate::sampling::{normalize_counts, CountsMatrix, CountsVector, ProbabilityMatrix, ProbabilityVector};

/// Form of the statistics vector fed to the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputForm {
    /// counts / shots (requires the injected total, including lost copies);
    /// exact probabilities are the infinite-statistics limit of this form.
    Frequencies,
    /// raw counts. The learned weights absorb a 1/N scale, so applying the
    /// readout at a different shot count biases predictions by N'/N.
    RawCounts,
    /// counts / sum(counts): usable without knowing the injected total, at the
    /// price of a nonlinearity when the detection probability varies by state.
    NormalizedCounts,
}

/// Training method: pseudoinverse with relative cutoff, or ridge regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainMethod {
    Pinv { rcond: f64 },
    Ridge { lambda: f64 },
}

impl Default for TrainMethod {
    fn default() -> Self {
        TrainMethod::Pinv { rcond: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub method: TrainMethod,
    pub input_form: InputForm,
    /// Appends a constant-one row to the statistics (affine readout).
    pub affine_offset: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            method: TrainMethod::default(),
            input_form: InputForm::NormalizedCounts,
            affine_offset: false,
        }
    }
}

/// Training data: exact probabilities or sampled counts.
#[derive(Debug, Clone)]
pub enum DataMatrix<'a> {
    Probabilities(&'a ProbabilityMatrix),
    Counts(&'a CountsMatrix),
}

impl<'a> DataMatrix<'a> {
    pub fn num_states(&self) -> usize {
        match self {
            DataMatrix::Probabilities(p) => p.num_states(),
            DataMatrix::Counts(c) => c.num_states(),
        }
    }

    /// 25 x K design matrix in the requested input form.
    fn design(&self, form: InputForm) -> Result<RealMatrix> {
        let k = self.num_states();
        let mut d = RealMatrix::zeros(NUM_OUTCOMES, k);
        for col in 0..k {
            let stats = match self {
                DataMatrix::Probabilities(p) => statistics_from_probabilities(&p.columns()[col], form)?,
                DataMatrix::Counts(c) => statistics_from_counts(&c.columns()[col], form)?,
            };
            for b in 0..NUM_OUTCOMES {
                d[(b, col)] = stats[b];
            }
        }
        Ok(d)
    }
}

/// Statistics vector of one counts column in the given form.
pub fn statistics_from_counts(counts: &CountsVector, form: InputForm) -> Result<Vec<f64>> {
    match form {
        InputForm::Frequencies => Ok(counts.frequencies()),
        InputForm::RawCounts => Ok(counts.counts().iter().map(|&x| x as f64).collect()),
        InputForm::NormalizedCounts => normalize_counts(counts),
    }
}

/// Statistics vector of an exact probability column in the given form.
pub fn statistics_from_probabilities(p: &ProbabilityVector, form: InputForm) -> Result<Vec<f64>> {
    match form {
        InputForm::Frequencies => Ok(p.probs().to_vec()),
        InputForm::RawCounts => Err(Error::contract(
            "raw-counts readouts cannot be applied to exact probabilities",
        )),
        InputForm::NormalizedCounts => {
            let total: f64 = p.probs().iter().sum();
            if total <= 0.0 {
                return Err(Error::numerical("cannot normalize an all-zero distribution"));
            }
            Ok(p.probs().iter().map(|x| x / total).collect())
        }
    }
}

/// Named target rows for the trainer.
#[derive(Debug, Clone)]
pub struct Targets {
    pub names: Vec<String>,
    pub matrix: RealMatrix,
}

impl Targets {
    pub fn new(names: Vec<String>, matrix: RealMatrix) -> Result<Self> {
        if names.len() != matrix.rows() {
            return Err(Error::contract("target names and rows must match"));
        }
        Ok(Self { names, matrix })
    }
}

/// Trained readout weights plus the metadata needed to apply them correctly.
#[derive(Debug, Clone)]
pub struct ReadoutMatrix {
    weights: RealMatrix,
    observable_names: Vec<String>,
    trained_on: InputForm,
    rcond: f64,
    ridge_lambda: Option<f64>,
    affine_offset: bool,
}

impl ReadoutMatrix {
    pub fn weights(&self) -> &RealMatrix {
        &self.weights
    }

    pub fn observable_names(&self) -> &[String] {
        &self.observable_names
    }

    pub fn trained_on(&self) -> InputForm {
        self.trained_on
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn ridge_lambda(&self) -> Option<f64> {
        self.ridge_lambda
    }

    pub fn affine_offset(&self) -> bool {
        self.affine_offset
    }

    /// W * stats (plus the affine column when enabled).
    pub fn apply(&self, stats: &[f64]) -> Result<Vec<f64>> {
        let expected = NUM_OUTCOMES + usize::from(self.affine_offset);
        let stats_vec: Vec<f64>;
        let stats = if self.affine_offset && stats.len() == NUM_OUTCOMES {
            stats_vec = stats.iter().copied().chain(std::iter::once(1.0)).collect();
            &stats_vec
        } else {
            stats
        };
        if stats.len() != expected {
            return Err(Error::contract(format!(
                "expected {expected} statistics entries, got {}",
                stats.len()
            )));
        }
        Ok(self.weights.mul_vec(stats))
    }

    /// Prediction from sampled counts, applying the trained input form.
    pub fn predict_counts(&self, counts: &CountsVector) -> Result<Vec<f64>> {
        self.apply(&statistics_from_counts(counts, self.trained_on)?)
    }

    /// Prediction from exact probabilities. Errors on raw-counts readouts:
    /// that form has no infinite-statistics counterpart.
    pub fn predict_probabilities(&self, p: &ProbabilityVector) -> Result<Vec<f64>> {
        self.apply(&statistics_from_probabilities(p, self.trained_on)?)
    }
}

/// Diagnostics of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub mse_train: Vec<f64>,
    pub observable_names: Vec<String>,
    /// Singular values of the design matrix, descending.
    pub singular_spectrum: Vec<f64>,
    /// Singular values above rcond * sigma_max.
    pub effective_rank: usize,
}

/// Solves W * D = M for the readout. Pseudoinverse route:
/// W = M D^T (D D^T)^+; ridge route: W = M D^T (D D^T + lambda I)^{-1}.
pub fn train(data: &DataMatrix, targets: &Targets, options: &TrainOptions) -> Result<(ReadoutMatrix, TrainReport)> {
    if data.num_states() == 0 {
        return Err(Error::contract("training needs at least one state"));
    }
    if targets.matrix.cols() != data.num_states() {
        return Err(Error::contract(format!(
            "targets have {} columns but the data has {} states",
            targets.matrix.cols(),
            data.num_states()
        )));
    }
    let mut design = data.design(options.input_form)?;
    if design.data().iter().all(|&x| x == 0.0) {
        return Err(Error::numerical("degenerate training data: all statistics are zero"));
    }
    if options.affine_offset {
        let mut augmented = RealMatrix::zeros(NUM_OUTCOMES + 1, design.cols());
        for i in 0..NUM_OUTCOMES {
            for j in 0..design.cols() {
                augmented[(i, j)] = design[(i, j)];
            }
        }
        for j in 0..design.cols() {
            augmented[(NUM_OUTCOMES, j)] = 1.0;
        }
        design = augmented;
    }

    let spectrum = linalg::singular_values_real(&design);
    let (weights, rcond, lambda) = match options.method {
        TrainMethod::Pinv { rcond } => {
            let pinv = linalg::pseudoinverse_real(&design, rcond)?;
            (targets.matrix.mul(&pinv), rcond, None)
        }
        TrainMethod::Ridge { lambda } => {
            if lambda <= 0.0 {
                return Err(Error::contract("ridge lambda must be positive"));
            }
            // (D D^T + lambda I)^{-1} through the pseudoinverse of the shifted
            // Gram matrix, which is positive definite
            let gram = design.mul(&design.transpose());
            let mut shifted = gram;
            for i in 0..shifted.rows() {
                shifted[(i, i)] += lambda;
            }
            let inv = linalg::pseudoinverse_real(&shifted, 1e-15)?;
            (targets.matrix.mul(&design.transpose()).mul(&inv), 1e-15, Some(lambda))
        }
    };

    let sigma_max = spectrum.first().copied().unwrap_or(0.0);
    let effective_rank = spectrum.iter().filter(|&&s| s > rcond * sigma_max).count();

    let readout = ReadoutMatrix {
        weights,
        observable_names: targets.names.clone(),
        trained_on: options.input_form,
        rcond,
        ridge_lambda: lambda,
        affine_offset: options.affine_offset,
    };

    // training MSE per observable on the same split
    let mut sq = vec![0.0f64; targets.names.len()];
    for col in 0..design.cols() {
        let pred = readout.weights.mul_vec(&design.column(col));
        for (j, err) in sq.iter_mut().enumerate() {
            let diff = pred[j] - targets.matrix[(j, col)];
            *err += diff * diff;
        }
    }
    let k = design.cols() as f64;
    let report = TrainReport {
        mse_train: sq.into_iter().map(|x| x / k).collect(),
        observable_names: targets.names.clone(),
        singular_spectrum: spectrum,
        effective_rank,
    };
    Ok((readout, report))
}

/// Mean squared prediction error.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::contract("prediction and truth lengths differ"));
    }
    if predictions.is_empty() {
        return Err(Error::contract("mse of an empty set"));
    }
    Ok(predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Sign-classification summary for a witness observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// counts[truth][prediction], index 0 = negative, 1 = non-negative.
    pub confusion: [[u64; 2]; 2],
    /// Fraction of states whose predicted sign matches the true sign.
    pub accuracy: f64,
    /// Among truly negative states, fraction predicted negative.
    pub negative_recall: f64,
    /// Among truly negative states, fraction with prediction below
    /// -3 sqrt(mse_train).
    pub certified_fraction_3sigma: f64,
}

/// Sign confusion at `threshold` (0 for the plain witness test) plus the
/// three-sigma certified fraction derived from the training MSE.
pub fn witness_confusion(
    predictions: &[f64],
    truths: &[f64],
    threshold: f64,
    mse_train: f64,
) -> Result<ConfusionReport> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::contract("confusion needs matching nonempty predictions and truths"));
    }
    let mut confusion = [[0u64; 2]; 2];
    let mut certified = 0u64;
    let sigma3 = 3.0 * mse_train.max(0.0).sqrt();
    for (&p, &t) in predictions.iter().zip(truths) {
        let ti = usize::from(t >= threshold);
        let pi = usize::from(p >= threshold);
        confusion[ti][pi] += 1;
        if ti == 0 && p < -sigma3 {
            certified += 1;
        }
    }
    let total = predictions.len() as u64;
    let negatives = confusion[0][0] + confusion[0][1];
    Ok(ConfusionReport {
        confusion,
        accuracy: (confusion[0][0] + confusion[1][1]) as f64 / total as f64,
        negative_recall: if negatives > 0 {
            confusion[0][0] as f64 / negatives as f64
        } else {
            f64::NAN
        },
        certified_fraction_3sigma: if negatives > 0 {
            certified as f64 / negatives as f64
        } else {
            f64::NAN
        },
    })
}

const READOUT_VERSION: &str = "1";

/// Readout file: '#'-prefixed metadata header followed by one tab-separated
/// row per observable (name then the weight entries).
pub fn save_readout(path: &Path, readout: &ReadoutMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# readout v{READOUT_VERSION}\n"));
    out.push_str(&format!(
        "# trained_on={}\n",
        serde_json::to_string(&readout.trained_on).unwrap().trim_matches('"')
    ));
    out.push_str(&format!("# rcond={}\n", readout.rcond));
    out.push_str(&format!(
        "# lambda={}\n",
        readout.ridge_lambda.map_or("none".to_string(), |l| l.to_string())
    ));
    out.push_str(&format!("# affine_offset={}\n", readout.affine_offset));
    for (j, name) in readout.observable_names.iter().enumerate() {
        out.push_str(name);
        for w in readout.weights.row(j) {
            out.push_str(&format!("\t{w}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_readout(path: &Path) -> Result<ReadoutMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut names = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        names.push(fields.next().unwrap_or_default().to_string());
        let weights: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|e| Error::config(format!("{}: bad weight: {e}", path.display()))))
            .collect::<Result<_>>()?;
        rows.push(weights);
    }
    if rows.is_empty() {
        return Err(Error::config(format!("{}: readout has no weight rows", path.display())));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::config(format!("{}: ragged weight rows", path.display())));
    }
    let trained_on: InputForm = serde_json::from_str(&format!(
        "\"{}\"",
        meta.get("trained_on").cloned().unwrap_or_default()
    ))
    .map_err(|_| Error::config(format!("{}: missing or bad trained_on header", path.display())))?;
    let affine_offset = meta.get("affine_offset").map(|v| v == "true").unwrap_or(false);
    let expected_cols = NUM_OUTCOMES + usize::from(affine_offset);
    if cols != expected_cols {
        return Err(Error::config(format!(
            "{}: expected {expected_cols} weights per row, found {cols}",
            path.display()
        )));
    }
    let rcond: f64 = meta
        .get("rcond")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::config(format!("{}: missing rcond header", path.display())))?;
    let ridge_lambda = match meta.get("lambda").map(String::as_str) {
        None | Some("none") => None,
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| Error::config(format!("{}: bad lambda header", path.display())))?,
        ),
    };
    let weights = RealMatrix::from_rows(rows.len(), cols, rows.concat())?;
    Ok(ReadoutMatrix { weights, observable_names: names, trained_on, rcond, ridge_lambda, affine_offset })
}
