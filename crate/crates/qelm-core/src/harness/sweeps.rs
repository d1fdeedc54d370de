//! Statistics and noise sweeps.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::readout;
use crate::sampling::{self, build_matrices, derive_seed, Shots};
use crate::states::{self, ReferenceState};

use super::config::ExperimentConfig;
use super::scenario;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub shots: u64,
    pub mse_mean: f64,
    pub mse_std: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub local_slopes: Vec<f64>,
    pub last_decade_slope: f64,
    pub observable_names: Vec<String>,
    pub repeats: usize,
}

/// Log-log slopes between consecutive sweep points.
pub fn local_slopes(shots: &[u64], mse: &[f64]) -> Vec<f64> {
    shots
        .windows(2)
        .zip(mse.windows(2))
        .map(|(n, m)| (m[1] / m[0]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect()
}

/// Least-squares log-log slope over the points in the last decade of shots.
pub fn fit_last_decade_slope(shots: &[u64], mse: &[f64]) -> f64 {
    let max = *shots.last().expect("nonempty sweep") as f64;
    let xs: Vec<f64> = shots
        .iter()
        .zip(mse)
        .filter(|(&n, _)| n as f64 >= max / 10.0 - 0.5)
        .map(|(&n, _)| (n as f64).log10())
        .collect();
    let ys: Vec<f64> = shots
        .iter()
        .zip(mse)
        .filter(|(&n, _)| n as f64 >= max / 10.0 - 0.5)
        .map(|(_, &m)| m.log10())
        .collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    cov / var
}

/// Average test MSE (over the registered targets and the test states) as a
/// function of the per-state statistics; training and test statistics are
/// swept together. Mean and standard deviation over the configured repeats.
pub fn sweep_statistics(cfg: &ExperimentConfig, n_list: &[u64]) -> Result<SweepReport> {
    if n_list.is_empty() {
        return Err(Error::contract("sweep needs a nonempty statistics list"));
    }
    let povm = crate::reservoir::effective_povm(&cfg.reservoir)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let mut cfg_n = cfg.clone();
        cfg_n.shots = Shots::PerState(n);
        cfg_n.seed = derive_seed(cfg.seed, 0x7377, i as u64);
        let per_repeat: Vec<f64> = (0..cfg.repeats)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let eval = scenario::run_split(&cfg_n, &povm, r)?;
                // average over observables and states
                let mut total = 0.0;
                let mut count = 0usize;
                for j in 0..eval.predictions.rows() {
                    for k in 0..eval.predictions.cols() {
                        let diff = eval.predictions[(j, k)] - eval.truths[(j, k)];
                        total += diff * diff;
                        count += 1;
                    }
                }
                Ok(total / count as f64)
            })
            .collect::<Result<_>>()?;
        let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
        let std = if per_repeat.len() > 1 {
            (per_repeat.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (per_repeat.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(SweepRow { shots: n, mse_mean: mean, mse_std: std });
    }
    let mses: Vec<f64> = rows.iter().map(|r| r.mse_mean).collect();
    Ok(SweepReport {
        local_slopes: local_slopes(n_list, &mses),
        last_decade_slope: fit_last_decade_slope(n_list, &mses),
        rows,
        observable_names: cfg.target_names.clone(),
        repeats: cfg.repeats,
    })
}

pub fn save_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# observables averaged: {}\n", report.observable_names.join(",")));
    out.push_str(&format!("# repeats: {}\n", report.repeats));
    out.push_str(&format!("# last_decade_slope: {}\n", report.last_decade_slope));
    out.push_str(&format!(
        "# local_slopes: {}\n",
        report.local_slopes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    ));
    out.push_str("shots\tmse_mean\tmse_std\n");
    for row in &report.rows {
        out.push_str(&format!("{}\t{}\t{}\n", row.shots, row.mse_mean, row.mse_std));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Clone)]
pub struct NoiseRow {
    pub p: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone)]
pub struct NoiseReport {
    pub rows: Vec<NoiseRow>,
    pub witness: String,
    pub repeats: usize,
}

/// Noise study: the entangled test distributions are replaced by pairwise
/// mixtures (1-p) p_ent + p p_sep of states sharing preparation angles, while
/// the labels stay at the entangled-reference truth. Metrics are the MSE and
/// the sign accuracy of the primary witness, per mixing parameter.
pub fn noise_sweep(cfg: &ExperimentConfig, p_list: &[f64]) -> Result<NoiseReport> {
    if p_list.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::contract("mixing parameters must lie in [0, 1]"));
    }
    let witness_index = cfg
        .primary_witness()
        .ok_or_else(|| Error::config("noise sweep needs a witness target (name starting with W_)"))?;
    let povm = crate::reservoir::effective_povm(&cfg.reservoir)?;
    let sep = ReferenceState::named(cfg.reference_separable)?;
    let ent = ReferenceState::named(cfg.reference_entangled)?;

    struct RepeatCurves {
        mse: Vec<f64>,
        accuracy: Vec<f64>,
    }

    let curves: Vec<RepeatCurves> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| -> Result<RepeatCurves> {
            let train_seed = derive_seed(cfg.seed, 0x6e74, r as u64);
            let pair_seed = derive_seed(cfg.seed, 0x6e70, r as u64);
            let train_set = scenario::generate_train_dataset(cfg, train_seed)?;
            let (readout_matrix, _report, _, _) =
                scenario::train_on_dataset(cfg, &povm, &train_set, derive_seed(train_seed, 1, 0))?;

            let (ents, seps) = states::generate_paired_dataset(
                &ent,
                &sep,
                cfg.sizes.n_ent_test,
                cfg.prep_mode,
                pair_seed,
                &cfg.observables,
            )?;
            let witness_name = &cfg.target_names[witness_index];
            let truths: Vec<f64> =
                ents.states().iter().map(|s| s.true_values()[witness_name]).collect();
            let (p_ent, _) = build_matrices(&ents, &povm, Shots::Exact, 0, &cfg.sampler)?;
            let (p_sep, _) = build_matrices(&seps, &povm, Shots::Exact, 0, &cfg.sampler)?;

            let mut mse_curve = Vec::with_capacity(p_list.len());
            let mut acc_curve = Vec::with_capacity(p_list.len());
            for (pi, &p) in p_list.iter().enumerate() {
                let mut predictions = Vec::with_capacity(truths.len());
                for k in 0..truths.len() {
                    let mixed =
                        sampling::mix_distributions(&p_ent.columns()[k], &p_sep.columns()[k], p)?;
                    let pred = match cfg.shots {
                        Shots::Exact => readout_matrix.predict_probabilities(&mixed)?,
                        Shots::PerState(n) => {
                            let mut rng = rand::SeedableRng::seed_from_u64(derive_seed(
                                pair_seed,
                                0x6d69 + pi as u64,
                                k as u64,
                            ));
                            let counts = cfg.sampler.sample(&mixed, n, &mut rng)?;
                            readout_matrix.predict_counts(&counts)?
                        }
                    };
                    predictions.push(pred[witness_index]);
                }
                mse_curve.push(readout::mse(&predictions, &truths)?);
                let hits = predictions
                    .iter()
                    .zip(&truths)
                    .filter(|(p, t)| (**p < 0.0) == (**t < 0.0))
                    .count();
                acc_curve.push(hits as f64 / truths.len() as f64);
            }
            Ok(RepeatCurves { mse: mse_curve, accuracy: acc_curve })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(p_list.len());
    for (pi, &p) in p_list.iter().enumerate() {
        let mses: Vec<f64> = curves.iter().map(|c| c.mse[pi]).collect();
        let accs: Vec<f64> = curves.iter().map(|c| c.accuracy[pi]).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let std = |v: &[f64], m: f64| {
            if v.len() > 1 {
                (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            } else {
                0.0
            }
        };
        let (mm, am) = (mean(&mses), mean(&accs));
        rows.push(NoiseRow {
            p,
            mse_mean: mm,
            mse_std: std(&mses, mm),
            accuracy_mean: am,
            accuracy_std: std(&accs, am),
        });
    }
    Ok(NoiseReport {
        rows,
        witness: cfg.target_names[witness_index].clone(),
        repeats: cfg.repeats,
    })
}

pub fn save_noise(path: &Path, report: &NoiseReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# witness: {}\n# repeats: {}\n", report.witness, report.repeats));
    out.push_str("p\tmse_mean\tmse_std\taccuracy_mean\taccuracy_std\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            row.p, row.mse_mean, row.mse_std, row.accuracy_mean, row.accuracy_std
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
