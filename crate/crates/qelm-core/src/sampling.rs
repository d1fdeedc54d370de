//! Measurement statistics: exact outcome probabilities, finite-statistics
//! counts with post-selection loss, normalized frequencies, and noise-mixed
//! distributions.
//!
//! Loss is a 26th multinomial category: of N injected copies only the
//! detected ones land in the 25 observed outcomes. Reported counts cover the
//! 25 outcomes, as in the experiment.

use std::io::BufRead;
use std::path::Path;

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, RealMatrix};
use crate::reservoir::{EffectivePovm, NUM_OUTCOMES};
use crate::states::Dataset;

/// Exact outcome distribution of one state: 25 probabilities plus the
/// post-selection loss, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
    loss: f64,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>, loss: f64) -> Result<Self> {
        if probs.len() != NUM_OUTCOMES {
            return Err(Error::contract("probability vector must have 25 outcomes"));
        }
        let mut clamped = probs;
        for p in &mut clamped {
            if *p < -1e-12 {
                return Err(Error::numerical(format!("negative outcome probability {p}")));
            }
            *p = p.max(0.0);
        }
        let total: f64 = clamped.iter().sum::<f64>() + loss;
        if loss < -1e-10 || (total - 1.0).abs() > 1e-10 {
            return Err(Error::numerical(format!(
                "probabilities plus loss must sum to 1, got {total}"
            )));
        }
        Ok(Self { probs: clamped, loss: loss.max(0.0) })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn detection_probability(&self) -> f64 {
        1.0 - self.loss
    }
}

/// Tr(mu_b rho) for each outcome; loss is the undetected remainder.
pub fn outcome_probabilities(rho: &DensityMatrix, povm: &EffectivePovm) -> Result<ProbabilityVector> {
    let mut probs = Vec::with_capacity(NUM_OUTCOMES);
    for effect in povm.effects() {
        probs.push(crate::linalg::expectation_value(effect, rho)?);
    }
    let total: f64 = probs.iter().sum();
    if total > 1.0 + 1e-10 {
        return Err(Error::numerical(format!("outcome probabilities sum to {total} > 1")));
    }
    ProbabilityVector::new(probs, 1.0 - total.min(1.0))
}

/// Observed counts for one state: 25 outcome counts out of `shots` injected
/// copies (lost copies included in `shots` but not in any count).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsVector {
    counts: Vec<u64>,
    shots: u64,
}

impl CountsVector {
    pub fn new(counts: Vec<u64>, shots: u64) -> Result<Self> {
        if counts.len() != NUM_OUTCOMES {
            return Err(Error::contract("counts vector must have 25 outcomes"));
        }
        if counts.iter().sum::<u64>() > shots {
            return Err(Error::contract("counts exceed the number of injected copies"));
        }
        Ok(Self { counts, shots })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn total_detected(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// counts / shots, the estimate of the sub-normalized probabilities.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.shots.max(1) as f64;
        self.counts.iter().map(|&k| k as f64 / n).collect()
    }
}

/// counts_b / sum_b counts_b. Fails on all-zero counts.
pub fn normalize_counts(counts: &CountsVector) -> Result<Vec<f64>> {
    let total = counts.total_detected();
    if total == 0 {
        return Err(Error::numerical("cannot normalize all-zero counts"));
    }
    Ok(counts.counts().iter().map(|&k| k as f64 / total as f64).collect())
}

/// (1-p) * ent + p * sep, componentwise including the loss.
pub fn mix_distributions(
    p_ent: &ProbabilityVector,
    p_sep: &ProbabilityVector,
    p: f64,
) -> Result<ProbabilityVector> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::contract("mixing parameter must be in [0, 1]"));
    }
    let probs = p_ent
        .probs()
        .iter()
        .zip(p_sep.probs())
        .map(|(a, b)| (1.0 - p) * a + p * b)
        .collect();
    ProbabilityVector::new(probs, (1.0 - p) * p_ent.loss() + p * p_sep.loss())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// One multinomial draw over the 25 outcomes plus the loss category.
    Multinomial,
    /// 25 independent Poisson variates with means N * p_b.
    Poisson,
}

/// Finite-statistics sampler. `eta_extra` uniformly scales all outcome
/// probabilities, modeling state-independent transmission on top of the
/// post-selection.
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    pub mode: SampleMode,
    pub eta_extra: f64,
}

impl Default for Sampler {
    fn default() -> Self {
        Self { mode: SampleMode::Multinomial, eta_extra: 1.0 }
    }
}

impl Sampler {
    pub fn new(mode: SampleMode, eta_extra: f64) -> Result<Self> {
        if !(eta_extra > 0.0 && eta_extra <= 1.0) {
            return Err(Error::contract("eta_extra must be in (0, 1]"));
        }
        Ok(Self { mode, eta_extra })
    }

    /// Draws counts for `shots` injected copies of a state with outcome
    /// distribution `p`. Deterministic given the RNG state.
    pub fn sample(&self, p: &ProbabilityVector, shots: u64, rng: &mut ChaCha8Rng) -> Result<CountsVector> {
        let scaled: Vec<f64> = p.probs().iter().map(|x| x * self.eta_extra).collect();
        match self.mode {
            SampleMode::Multinomial => {
                // sequential binomial decomposition of the multinomial draw;
                // the implicit final category is the loss
                let mut counts = vec![0u64; NUM_OUTCOMES];
                let mut remaining = shots;
                let mut prob_left = 1.0f64;
                for (b, &pb) in scaled.iter().enumerate() {
                    if remaining == 0 || prob_left <= 0.0 {
                        break;
                    }
                    let q = (pb / prob_left).clamp(0.0, 1.0);
                    let draw = if q >= 1.0 {
                        remaining
                    } else if q <= 0.0 {
                        0
                    } else {
                        Binomial::new(remaining, q)
                            .map_err(|e| Error::numerical(e.to_string()))?
                            .sample(rng)
                    };
                    counts[b] = draw;
                    remaining -= draw;
                    prob_left -= pb;
                }
                CountsVector::new(counts, shots)
            }
            SampleMode::Poisson => {
                let mut counts = vec![0u64; NUM_OUTCOMES];
                for (b, &pb) in scaled.iter().enumerate() {
                    let mean = pb * shots as f64;
                    if mean > 0.0 {
                        counts[b] = Poisson::new(mean)
                            .map_err(|e| Error::numerical(e.to_string()))?
                            .sample(rng) as u64;
                    }
                }
                // Poisson totals may exceed the nominal shot count; record the
                // larger value so the counts stay consistent.
                let total: u64 = counts.iter().sum();
                CountsVector::new(counts, shots.max(total))
            }
        }
    }
}

/// Splitmix-style derivation of per-task seeds so parallel sampling is
/// deterministic regardless of scheduling.
pub fn derive_seed(root: u64, tag: u64, index: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9e3779b97f4a7c15) ^ index.wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Exact probabilities of every dataset state, one column per state.
#[derive(Debug, Clone)]
pub struct ProbabilityMatrix {
    columns: Vec<ProbabilityVector>,
}

impl ProbabilityMatrix {
    pub fn columns(&self) -> &[ProbabilityVector] {
        &self.columns
    }

    pub fn num_states(&self) -> usize {
        self.columns.len()
    }

    /// 25 x N_states matrix of the raw probabilities.
    pub fn to_real_matrix(&self) -> RealMatrix {
        RealMatrix::from_fn(NUM_OUTCOMES, self.columns.len(), |b, k| self.columns[k].probs()[b])
    }
}

/// Sampled counts of every dataset state, one column per state.
#[derive(Debug, Clone)]
pub struct CountsMatrix {
    columns: Vec<CountsVector>,
}

impl CountsMatrix {
    pub fn from_columns(columns: Vec<CountsVector>) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &[CountsVector] {
        &self.columns
    }

    pub fn num_states(&self) -> usize {
        self.columns.len()
    }
}

/// Shots per state: exact (no sampling) or a fixed finite budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    PerState(u64),
}

/// Exact probability matrix of a dataset, and sampled counts when `shots` is
/// finite. Sampling is parallel over states with per-column derived seeds.
pub fn build_matrices(
    dataset: &Dataset,
    povm: &EffectivePovm,
    shots: Shots,
    seed: u64,
    sampler: &Sampler,
) -> Result<(ProbabilityMatrix, Option<CountsMatrix>)> {
    let probabilities: Vec<ProbabilityVector> = dataset
        .states()
        .par_iter()
        .map(|state| outcome_probabilities(state.rho(), povm))
        .collect::<Result<_>>()?;
    let prob_matrix = ProbabilityMatrix { columns: probabilities };
    let counts = match shots {
        Shots::Exact => None,
        Shots::PerState(n) => {
            let columns: Vec<CountsVector> = prob_matrix
                .columns
                .par_iter()
                .enumerate()
                .map(|(k, p)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5a3c, k as u64));
                    sampler.sample(p, n, &mut rng)
                })
                .collect::<Result<_>>()?;
            Some(CountsMatrix::from_columns(columns))
        }
    };
    Ok((prob_matrix, counts))
}

/// Counts file: one row per state with id, shots, and the 25 outcome counts,
/// tab-separated, ordered by b = 5(n1+2) + (n2+2).
pub fn save_counts(path: &Path, counts: &CountsMatrix) -> Result<()> {
    let mut out = String::from("state_id\tshots");
    for n1 in -2i64..=2 {
        for n2 in -2i64..=2 {
            out.push_str(&format!("\tc_{n1}_{n2}"));
        }
    }
    out.push('\n');
    for (k, column) in counts.columns().iter().enumerate() {
        out.push_str(&format!("{k}\t{}", column.shots()));
        for c in column.counts() {
            out.push_str(&format!("\t{c}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a counts file, verifying the header schema; mismatches are reported
/// with the expected and found column lists.
pub fn load_counts(path: &Path) -> Result<CountsMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(format!("{}: empty counts file", path.display())))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut expected = String::from("state_id\tshots");
    for n1 in -2i64..=2 {
        for n2 in -2i64..=2 {
            expected.push_str(&format!("\tc_{n1}_{n2}"));
        }
    }
    if header != expected {
        return Err(Error::config(format!(
            "{}: counts schema mismatch\n  expected: {expected}\n  found:    {header}",
            path.display()
        )));
    }
    let mut columns = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 + NUM_OUTCOMES {
            return Err(Error::config(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 2,
                2 + NUM_OUTCOMES,
                fields.len()
            )));
        }
        let shots: u64 = fields[1]
            .parse()
            .map_err(|e| Error::config(format!("{}:{}: bad shots: {e}", path.display(), lineno + 2)))?;
        let counts: Vec<u64> = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<u64>()
                    .map_err(|e| Error::config(format!("{}:{}: bad count: {e}", path.display(), lineno + 2)))
            })
            .collect::<Result<_>>()?;
        columns.push(CountsVector::new(counts, shots)?);
    }
    Ok(CountsMatrix::from_columns(columns))
}
