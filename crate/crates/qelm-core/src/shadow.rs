//! Dual-frame benchmark: frame superoperator of the effective measurement,
//! canonical dual effects, unbiased linear estimators, and the MSE-versus-
//! guessed-statistics analysis.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::observables::Observable;
use crate::reservoir::{EffectivePovm, NUM_OUTCOMES};
use crate::sampling::CountsMatrix;

/// Matrix representation (16x16, column-stacked vectorization) of
/// F(X) = sum_b Tr(mu_b X) mu_b. Hermitian and positive semidefinite.
#[derive(Debug, Clone)]
pub struct FrameSuperoperator {
    matrix: ComplexMatrix,
}

impl FrameSuperoperator {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Applies F to an operator.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != 4 || x.cols() != 4 {
            return Err(Error::contract("frame superoperator acts on 4x4 operators"));
        }
        let v = self.matrix.mul_vec(&x.vectorize());
        Ok(ComplexMatrix::from_vectorized(4, 4, &v)?)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::eigh(&self.matrix)?.0)
    }

    /// Number of eigenvalues above tol * lambda_max.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        Ok(linalg::numerical_rank(&self.matrix, tol)?)
    }

    /// Trace of the (pseudo)inverse: sum of reciprocal eigenvalues above the
    /// relative cutoff. Returns the value and the rank used.
    pub fn trace_inverse(&self, tol: f64) -> Result<(f64, usize)> {
        let eigs = self.eigenvalues()?;
        let lmax = eigs.first().copied().unwrap_or(0.0);
        if lmax <= 0.0 {
            return Err(Error::numerical("frame superoperator is zero"));
        }
        let mut trace = 0.0;
        let mut rank = 0;
        for l in &eigs {
            if *l > tol * lmax {
                trace += 1.0 / l;
                rank += 1;
            }
        }
        Ok((trace, rank))
    }
}

/// Builds the frame superoperator of an effective measurement. With the
/// column-stacked vectorization and Hermitian effects,
/// F = sum_b vec(mu_b) vec(mu_b)^dagger.
pub fn frame_superoperator(povm: &EffectivePovm) -> Result<FrameSuperoperator> {
    let mut f = ComplexMatrix::zeros(16, 16);
    for effect in povm.effects() {
        let v = effect.vectorize();
        for i in 0..16 {
            for j in 0..16 {
                f[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let scale = f.max_abs().max(1.0);
    if !f.is_hermitian(1e-10 * scale) {
        return Err(Error::numerical("frame superoperator is not Hermitian"));
    }
    let (eigs, _) = linalg::eigh(&f)?;
    if eigs.last().copied().unwrap_or(0.0) < -1e-10 * scale {
        return Err(Error::numerical("frame superoperator is not positive semidefinite"));
    }
    Ok(FrameSuperoperator { matrix: f })
}

/// Canonical dual effects mu*_b = F^+(mu_b). `pseudo_inverted` is set when F
/// is rank-deficient and the duals only reconstruct the spanned subspace.
#[derive(Debug, Clone)]
pub struct DualFrame {
    duals: Vec<ComplexMatrix>,
    pseudo_inverted: bool,
}

impl DualFrame {
    pub fn duals(&self) -> &[ComplexMatrix] {
        &self.duals
    }

    pub fn pseudo_inverted(&self) -> bool {
        self.pseudo_inverted
    }

    /// Reconstructs a state from its exact outcome probabilities:
    /// sum_b p_b mu*_b (exact on the spanned operator subspace).
    pub fn reconstruct(&self, probabilities: &[f64]) -> Result<ComplexMatrix> {
        if probabilities.len() != NUM_OUTCOMES {
            return Err(Error::contract("need 25 outcome probabilities"));
        }
        let mut out = ComplexMatrix::zeros(4, 4);
        for (p, d) in probabilities.iter().zip(&self.duals) {
            out = out.add(&d.scale(Complex64::new(*p, 0.0)));
        }
        Ok(out)
    }
}

/// Computes the canonical dual frame with relative eigenvalue cutoff `tol`.
pub fn dual_frame(f: &FrameSuperoperator, povm: &EffectivePovm, tol: f64) -> Result<DualFrame> {
    let rank = f.rank(tol)?;
    let pinv = linalg::pseudoinverse(f.matrix(), tol)?;
    let mut duals = Vec::with_capacity(NUM_OUTCOMES);
    for effect in povm.effects() {
        let v = pinv.mul_vec(&effect.vectorize());
        let dual = ComplexMatrix::from_vectorized(4, 4, &v)?.hermitian_part();
        duals.push(dual);
    }
    Ok(DualFrame { duals, pseudo_inverted: rank < 16 })
}

/// Per-outcome estimator values o(b) = Tr(O mu*_b).
pub fn shadow_estimator(obs: &Observable, duals: &DualFrame) -> Result<Vec<f64>> {
    duals
        .duals()
        .iter()
        .map(|d| {
            let tr = obs.matrix().mul(d).trace();
            if tr.im.abs() > 1e-9 {
                return Err(Error::numerical(format!(
                    "estimator value has imaginary residue {}",
                    tr.im
                )));
            }
            Ok(tr.re)
        })
        .collect()
}

/// MSE of the dual-frame estimate sum_b o(b) N_b / n_guess against the stored
/// truths, averaged over the test states.
pub fn shadow_mse(
    counts: &CountsMatrix,
    truths: &[f64],
    estimator: &[f64],
    n_guess: f64,
) -> Result<f64> {
    if n_guess <= 0.0 {
        return Err(Error::contract("n_guess must be positive"));
    }
    if counts.num_states() != truths.len() || counts.num_states() == 0 {
        return Err(Error::contract("counts and truths must match and be nonempty"));
    }
    if estimator.len() != NUM_OUTCOMES {
        return Err(Error::contract("estimator must have 25 entries"));
    }
    let mut total = 0.0;
    for (column, truth) in counts.columns().iter().zip(truths) {
        let estimate: f64 = column
            .counts()
            .iter()
            .zip(estimator)
            .map(|(&n_b, o)| o * n_b as f64)
            .sum::<f64>()
            / n_guess;
        let diff = estimate - truth;
        total += diff * diff;
    }
    Ok(total / counts.num_states() as f64)
}

/// Full scan of the guessed-statistics grid (no convexity assumed); returns
/// the minimizer and the minimum. The result is a lower bound on what the
/// estimator achieves when the true statistics are known.
pub fn min_mse_over_n(
    counts: &CountsMatrix,
    truths: &[f64],
    estimator: &[f64],
    n_grid: &[f64],
) -> Result<(f64, f64)> {
    if n_grid.is_empty() {
        return Err(Error::contract("n_grid must be nonempty"));
    }
    let mut best = (n_grid[0], f64::INFINITY);
    for &n in n_grid {
        let value = shadow_mse(counts, truths, estimator, n)?;
        if value < best.1 {
            best = (n, value);
        }
    }
    Ok(best)
}

/// 60 log-spaced grid points covering 1e2..1e8.
pub fn default_n_grid() -> Vec<f64> {
    let points = 60;
    (0..points)
        .map(|i| 10f64.powf(2.0 + 6.0 * i as f64 / (points - 1) as f64))
        .collect()
}
