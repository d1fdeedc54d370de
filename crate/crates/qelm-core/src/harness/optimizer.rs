//! Derivative-free reservoir optimization: minimize the trace of the inverse
//! frame superoperator over the coin angles and polarization projections,
//! with a rank penalty keeping iterates informationally complete.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::reservoir::{
    self, projection_ket, projection_params, CoinAngles, ReservoirConfig, WalkConfig,
};
use crate::shadow;

/// Simplex (Nelder-Mead) minimizer; returns (best point, best value, evals used).
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    initial_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += initial_step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-12 * best.abs().max(1e-30) {
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n].0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let fc = eval(&contract, &mut evals);
            if fc < simplex[n].1 {
                simplex[n] = (contract, fc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best_x
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, xi)| b + sigma * (xi - b))
                        .collect();
                    let v = eval(&x, &mut evals);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals)
}

/// Free parameters: both coins (zeta, theta, phi) and both projections
/// (theta_p, phi_p); q-plate axes stay at the fabrication values.
pub const OPTIMIZER_DIM: usize = 10;

pub fn params_of(cfg: &ReservoirConfig) -> [f64; OPTIMIZER_DIM] {
    let (tpa, ppa) = projection_params(&cfg.projection_a);
    let (tpb, ppb) = projection_params(&cfg.projection_b);
    [
        cfg.walk_a.coin.zeta,
        cfg.walk_a.coin.theta,
        cfg.walk_a.coin.phi,
        cfg.walk_b.coin.zeta,
        cfg.walk_b.coin.theta,
        cfg.walk_b.coin.phi,
        tpa,
        ppa,
        tpb,
        ppb,
    ]
}

pub fn config_from_params(seed_cfg: &ReservoirConfig, x: &[f64]) -> ReservoirConfig {
    ReservoirConfig {
        walk_a: WalkConfig::new(
            CoinAngles { zeta: x[0], theta: x[1], phi: x[2] },
            seed_cfg.walk_a.qplate1.alpha,
            seed_cfg.walk_a.qplate2.alpha,
        ),
        walk_b: WalkConfig::new(
            CoinAngles { zeta: x[3], theta: x[4], phi: x[5] },
            seed_cfg.walk_b.qplate1.alpha,
            seed_cfg.walk_b.qplate2.alpha,
        ),
        projection_a: projection_ket(x[6], x[7]),
        projection_b: projection_ket(x[8], x[9]),
        oam_internal_halfwidth: seed_cfg.oam_internal_halfwidth,
    }
}

const RANK_PENALTY: f64 = 1e9;

/// Tr(F^+) of the configuration's effective measurement, plus a penalty per
/// missing rank when the measurement is not informationally complete.
pub fn frame_objective(cfg: &ReservoirConfig) -> Result<f64> {
    let povm = reservoir::effective_povm(cfg)?;
    let frame = shadow::frame_superoperator(&povm)?;
    let (trace_inv, rank) = frame.trace_inverse(1e-10)?;
    Ok(trace_inv + RANK_PENALTY * (16 - rank) as f64)
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub config: ReservoirConfig,
    pub objective: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

/// Random-restart simplex search over the ten free angles. The first restart
/// starts from the seed configuration; the rest draw uniform starting points.
/// `budget` caps the total number of objective evaluations.
pub fn optimize_reservoir(
    seed_cfg: &ReservoirConfig,
    budget: usize,
    seed: u64,
) -> Result<OptimizeOutcome> {
    if budget == 0 {
        return Err(crate::error::Error::contract("optimizer budget must be positive"));
    }
    let restarts = 32usize;
    let per_restart = (budget / restarts).max(50);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut total_evals = 0usize;
    let mut objective = |x: &[f64]| -> f64 {
        let cfg = config_from_params(seed_cfg, x);
        frame_objective(&cfg).unwrap_or(f64::INFINITY)
    };
    for restart in 0..restarts {
        if total_evals >= budget {
            break;
        }
        let x0: Vec<f64> = if restart == 0 {
            params_of(seed_cfg).to_vec()
        } else {
            (0..OPTIMIZER_DIM).map(|_| rng.gen::<f64>() * 2.0 * std::f64::consts::PI).collect()
        };
        let cap = per_restart.min(budget - total_evals);
        let (x, value, evals) = nelder_mead(&mut objective, &x0, 0.4, cap);
        total_evals += evals;
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((x, value));
        }
    }
    let (x, objective_value) = best.expect("at least one restart ran");
    Ok(OptimizeOutcome {
        config: config_from_params(seed_cfg, &x),
        objective: objective_value,
        evaluations: total_evals,
        restarts,
    })
}
