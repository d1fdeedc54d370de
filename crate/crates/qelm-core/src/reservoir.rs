//! Two-photon quantum-walk reservoir: coin and controlled-shift operators on
//! the polarization (x) orbital-angular-momentum space of each photon, the
//! channel contraction onto the 25 measured OAM outcomes, and the resulting
//! sub-normalized effective POVM on the two-qubit polarization input.
//!
//! Basis conventions:
//! * circular polarization |L> = (|H> + i|V>)/sqrt(2), |R> = (|H> - i|V>)/sqrt(2);
//! * per-photon walk space ordering (polarization L/R) (x) (OAM -N..N), index
//!   pol*(2N+1) + (n+N);
//! * two-photon outcome index b = 5*(n1+2) + (n2+2) with n in [-2, 2].
//!
//! The controlled shift couples the pairs {|L,n>, |R,n+1>} in closed 2x2
//! blocks; on a finite OAM window the two unpaired edge components |R,-N> and
//! |L,+N> are left untouched so the operator stays unitary. Callers keep the
//! walk support away from the edge (two steps from n = 0 need N >= 4 for
//! margin), which the support-confinement tests assert.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, DensityMatrix, Ket};
use crate::states::{hwp, qwp};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Coin rotation angles (radians) of the three-waveplate polarization stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinAngles {
    pub zeta: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Q-plate setting: optical-axis offset alpha and tuning delta (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPlateSetting {
    pub alpha: f64,
    pub delta: f64,
}

/// One photon's two-step walk: a half-coupling q-plate, the coin, and a
/// full-coupling q-plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub qplate1: QPlateSetting,
    pub coin: CoinAngles,
    pub qplate2: QPlateSetting,
}

impl WalkConfig {
    /// The q-plate tunings are fixed by the apparatus: delta = pi/2 before the
    /// coin and delta = pi after it.
    pub fn new(coin: CoinAngles, alpha1: f64, alpha2: f64) -> Self {
        Self {
            qplate1: QPlateSetting { alpha: alpha1, delta: std::f64::consts::FRAC_PI_2 },
            coin,
            qplate2: QPlateSetting { alpha: alpha2, delta: std::f64::consts::PI },
        }
    }
}

/// Full reservoir: one walk per photon plus the polarization projections and
/// the internal OAM truncation half-width.
#[derive(Debug, Clone)]
pub struct ReservoirConfig {
    pub walk_a: WalkConfig,
    pub walk_b: WalkConfig,
    pub projection_a: Ket,
    pub projection_b: Ket,
    pub oam_internal_halfwidth: usize,
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.projection_a.dim() != 2 || self.projection_b.dim() != 2 {
            return Err(Error::contract("projections must be single-qubit kets"));
        }
        if self.oam_internal_halfwidth < 2 {
            return Err(Error::contract(
                "oam_internal_halfwidth must be at least 2 so two steps stay inside the window",
            ));
        }
        Ok(())
    }
}

/// Coin operator in the circular basis:
/// [[e^{-i(zeta-phi)} cos eta,  e^{i(zeta+phi)} sin eta],
///  [-e^{-i(zeta+phi)} sin eta, e^{i(zeta-phi)} cos eta]]
/// with eta = zeta - 2 theta + phi.
pub fn coin_operator(coin: &CoinAngles) -> ComplexMatrix {
    let eta = coin.zeta - 2.0 * coin.theta + coin.phi;
    let (se, ce) = eta.sin_cos();
    let phase = |x: f64| c(x.cos(), x.sin());
    ComplexMatrix::from_rows(
        2,
        2,
        vec![
            phase(-(coin.zeta - coin.phi)) * ce,
            phase(coin.zeta + coin.phi) * se,
            -phase(-(coin.zeta + coin.phi)) * se,
            phase(coin.zeta - coin.phi) * ce,
        ],
    )
    .unwrap()
}

fn walk_index(pol: usize, n: i64, halfwidth: usize) -> usize {
    let width = 2 * halfwidth + 1;
    pol * width + (n + halfwidth as i64) as usize
}

/// Controlled-shift operator on polarization (x) OAM(-N..N):
/// cos(delta/2) on the diagonal and i sin(delta/2) e^{+-2i alpha} coupling
/// |L,n> with |R,n+1>; the unpaired edge components |R,-N> and |L,+N> are
/// left as identity.
pub fn shift_operator(qplate: &QPlateSetting, oam_halfwidth: usize) -> Result<ComplexMatrix> {
    if oam_halfwidth < 1 {
        return Err(Error::contract("shift operator needs oam_halfwidth >= 1"));
    }
    let n_max = oam_halfwidth as i64;
    let dim = 2 * (2 * oam_halfwidth + 1);
    let mut s = ComplexMatrix::zeros(dim, dim);
    let (half_sin, half_cos) = (qplate.delta / 2.0).sin_cos();
    // i sin(delta/2) e^{2i alpha} |L,n><R,n+1| plus the conjugate-phase term
    // i sin(delta/2) e^{-2i alpha} |R,n+1><L,n| (the i stays outside the h.c.)
    let phase = c((2.0 * qplate.alpha).cos(), (2.0 * qplate.alpha).sin());
    let coupling_lr = c(0.0, half_sin) * phase;
    let coupling_rl = c(0.0, half_sin) * phase.conj();
    let idx = |pol: usize, n: i64| walk_index(pol, n, oam_halfwidth);
    s[(idx(1, -n_max), idx(1, -n_max))] = c(1.0, 0.0);
    s[(idx(0, n_max), idx(0, n_max))] = c(1.0, 0.0);
    for n in -n_max..n_max {
        let l_n = idx(0, n);
        let r_n1 = idx(1, n + 1);
        s[(l_n, l_n)] = c(half_cos, 0.0);
        s[(r_n1, r_n1)] = c(half_cos, 0.0);
        s[(l_n, r_n1)] = coupling_lr;
        s[(r_n1, l_n)] = coupling_rl;
    }
    Ok(s)
}

/// One photon's full walk unitary S(alpha2, pi) (C (x) I_OAM) S(alpha1, pi/2).
pub fn single_walk_unitary(walk: &WalkConfig, oam_halfwidth: usize) -> Result<ComplexMatrix> {
    let coin = linalg::tensor_product(
        &coin_operator(&walk.coin),
        &ComplexMatrix::identity(2 * oam_halfwidth + 1),
    );
    let s1 = shift_operator(&walk.qplate1, oam_halfwidth)?;
    let s2 = shift_operator(&walk.qplate2, oam_halfwidth)?;
    Ok(s2.mul(&coin).mul(&s1))
}

/// Conversion from H/V amplitudes to circular L/R amplitudes.
pub fn hv_to_circular() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_rows(2, 2, vec![c(s, 0.), c(0., -s), c(s, 0.), c(0., s)]).unwrap()
}

/// Number of measured OAM modes per photon (n in [-2, 2]).
pub const MEASURED_MODES: usize = 5;
/// Number of two-photon outcomes.
pub const NUM_OUTCOMES: usize = MEASURED_MODES * MEASURED_MODES;

/// Per-photon contraction (5 x 2): H/V polarization amplitudes in, amplitudes
/// of the projected walk output on the measured OAM window out.
pub fn photon_contraction(
    walk_unitary: &ComplexMatrix,
    projection: &Ket,
    oam_halfwidth: usize,
) -> Result<ComplexMatrix> {
    let width = 2 * oam_halfwidth + 1;
    if walk_unitary.rows() != 2 * width || walk_unitary.cols() != 2 * width {
        return Err(Error::contract("walk unitary size does not match the OAM half-width"));
    }
    if oam_halfwidth < 2 {
        return Err(Error::contract("need oam_halfwidth >= 2 to cover the measured window"));
    }
    let t = hv_to_circular();
    let eta_lr = t.mul_vec(projection.amplitudes());
    let mut contraction = ComplexMatrix::zeros(MEASURED_MODES, 2);
    for (col, hv) in [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(1., 0.)]].iter().enumerate() {
        let pol_lr = t.mul_vec(hv);
        // embed (pol (x) |n=0>) and evolve
        let mut input = vec![c(0.0, 0.0); 2 * width];
        input[walk_index(0, 0, oam_halfwidth)] = pol_lr[0];
        input[walk_index(1, 0, oam_halfwidth)] = pol_lr[1];
        let output = walk_unitary.mul_vec(&input);
        // project polarization onto eta and keep n in [-2, 2]
        for (row, n) in (-2i64..=2).enumerate() {
            let amp = eta_lr[0].conj() * output[walk_index(0, n, oam_halfwidth)]
                + eta_lr[1].conj() * output[walk_index(1, n, oam_halfwidth)];
            contraction[(row, col)] = amp;
        }
    }
    Ok(contraction)
}

/// Two-photon channel contraction K (25 x 4): two-qubit H/V amplitudes in,
/// post-selected two-photon OAM amplitudes out. K^dagger K <= I.
pub fn channel_contraction(cfg: &ReservoirConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    let n = cfg.oam_internal_halfwidth;
    let u_a = single_walk_unitary(&cfg.walk_a, n)?;
    let u_b = single_walk_unitary(&cfg.walk_b, n)?;
    channel_contraction_from_unitaries(&u_a, &u_b, &cfg.projection_a, &cfg.projection_b, n)
}

/// Contraction from explicit per-photon unitaries (tests drive this with toy
/// evolutions that are not two-step walks).
pub fn channel_contraction_from_unitaries(
    u_a: &ComplexMatrix,
    u_b: &ComplexMatrix,
    projection_a: &Ket,
    projection_b: &Ket,
    oam_halfwidth: usize,
) -> Result<ComplexMatrix> {
    let a = photon_contraction(u_a, projection_a, oam_halfwidth)?;
    let b = photon_contraction(u_b, projection_b, oam_halfwidth)?;
    Ok(linalg::tensor_product(&a, &b))
}

/// The 25 effective measurement operators mu_b = K^dagger |b><b| K acting on
/// the two-qubit polarization input. Sub-normalized: sum_b mu_b <= I.
#[derive(Debug, Clone)]
pub struct EffectivePovm {
    effects: Vec<ComplexMatrix>,
    outcome_labels: Vec<(i64, i64)>,
}

impl EffectivePovm {
    pub fn from_contraction(contraction: &ComplexMatrix) -> Result<Self> {
        if contraction.rows() != NUM_OUTCOMES || contraction.cols() != 4 {
            return Err(Error::contract("contraction must be 25 x 4"));
        }
        let mut effects = Vec::with_capacity(NUM_OUTCOMES);
        let mut outcome_labels = Vec::with_capacity(NUM_OUTCOMES);
        for b in 0..NUM_OUTCOMES {
            let row = contraction.row(b);
            let effect = ComplexMatrix::from_fn(4, 4, |i, j| row[i].conj() * row[j]);
            effects.push(effect);
            outcome_labels.push(((b / MEASURED_MODES) as i64 - 2, (b % MEASURED_MODES) as i64 - 2));
        }
        let povm = Self { effects, outcome_labels };
        povm.validate()?;
        Ok(povm)
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn outcome_labels(&self) -> &[(i64, i64)] {
        &self.outcome_labels
    }

    /// Positivity of each effect and sub-normalization of the sum.
    pub fn validate(&self) -> Result<()> {
        let mut sum = ComplexMatrix::zeros(4, 4);
        for effect in &self.effects {
            if !effect.is_hermitian(linalg::STRUCTURAL_TOL) {
                return Err(Error::numerical("effect is not Hermitian"));
            }
            let (eigs, _) = linalg::eigh(effect)?;
            if eigs.last().copied().unwrap_or(0.0) < -linalg::STRUCTURAL_TOL {
                return Err(Error::numerical("effect has a negative eigenvalue"));
            }
            sum = sum.add(effect);
        }
        let (eigs, _) = linalg::eigh(&sum)?;
        if eigs.first().copied().unwrap_or(0.0) > 1.0 + linalg::STRUCTURAL_TOL {
            return Err(Error::numerical("effects sum exceeds the identity"));
        }
        if eigs.last().copied().unwrap_or(0.0) < -linalg::STRUCTURAL_TOL {
            return Err(Error::numerical("effects sum is not positive semidefinite"));
        }
        Ok(())
    }

    /// Dimension of the real linear span of the effects; 16 means the
    /// measurement is informationally complete on two qubits.
    pub fn span_rank(&self, tol: f64) -> Result<usize> {
        let mut m = ComplexMatrix::zeros(NUM_OUTCOMES, 16);
        for (b, effect) in self.effects.iter().enumerate() {
            for (j, z) in effect.vectorize().into_iter().enumerate() {
                m[(b, j)] = z;
            }
        }
        Ok(linalg::numerical_rank(&m, tol)?)
    }

    pub fn is_informationally_complete(&self) -> bool {
        self.span_rank(1e-10).map(|r| r == 16).unwrap_or(false)
    }
}

/// Builds the effective POVM of a reservoir configuration.
pub fn effective_povm(cfg: &ReservoirConfig) -> Result<EffectivePovm> {
    EffectivePovm::from_contraction(&channel_contraction(cfg)?)
}

/// Probability of outcome b for input rho: Tr(mu_b rho).
pub fn outcome_probability(povm: &EffectivePovm, b: usize, rho: &DensityMatrix) -> Result<f64> {
    Ok(linalg::expectation_value(&povm.effects()[b], rho)?)
}

/// Waveplate angles (theta_proj for the QWP, phi_proj for the HWP) mapping a
/// polarization state onto |H> up to phase: QWP(theta) HWP(phi) |eta> = |H>.
///
/// Solved by a coarse grid scan refined with shrinking local perturbations;
/// two waveplates suffice for any pure polarization, so the residual must
/// reach numerical zero.
pub fn projection_waveplates(eta: &Ket) -> Result<(f64, f64)> {
    if eta.dim() != 2 {
        return Err(Error::contract("projection solver expects a single-qubit ket"));
    }
    let infidelity = |theta: f64, phi: f64| -> f64 {
        let v = qwp(theta).mul(&hwp(phi)).mul_vec(eta.amplitudes());
        1.0 - v[0].norm_sqr()
    };
    let pi = std::f64::consts::PI;
    let grid = 48;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..grid {
        for j in 0..grid {
            let theta = i as f64 * pi / grid as f64;
            let phi = j as f64 * pi / grid as f64;
            let f = infidelity(theta, phi);
            if f < best.2 {
                best = (theta, phi, f);
            }
        }
    }
    let (mut theta, mut phi, mut f) = best;
    let mut step = pi / grid as f64;
    while step > 1e-9 {
        let mut improved = false;
        for (dt, dp) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let cand = infidelity(theta + dt * step, phi + dp * step);
            if cand < f {
                theta += dt * step;
                phi += dp * step;
                f = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if f > 1e-12 {
        return Err(Error::numerical(format!(
            "projection waveplate solve left infidelity {f:e}"
        )));
    }
    Ok((theta, phi))
}

// ---------------------------------------------------------------------------
// Config file format (TOML, angles in degrees)

#[derive(Serialize, Deserialize)]
struct WalkToml {
    zeta: f64,
    theta: f64,
    phi: f64,
    alpha1: f64,
    alpha2: f64,
}

#[derive(Serialize, Deserialize)]
struct ProjectionToml {
    theta_p: f64,
    phi_p: f64,
}

#[derive(Serialize, Deserialize)]
struct ReservoirToml {
    oam_internal_halfwidth: usize,
    walk_a: WalkToml,
    walk_b: WalkToml,
    projection_a: ProjectionToml,
    projection_b: ProjectionToml,
}

fn walk_from_toml(w: &WalkToml) -> WalkConfig {
    let r = std::f64::consts::PI / 180.0;
    WalkConfig::new(
        CoinAngles { zeta: w.zeta * r, theta: w.theta * r, phi: w.phi * r },
        w.alpha1 * r,
        w.alpha2 * r,
    )
}

fn walk_to_toml(w: &WalkConfig) -> WalkToml {
    let d = 180.0 / std::f64::consts::PI;
    WalkToml {
        zeta: w.coin.zeta * d,
        theta: w.coin.theta * d,
        phi: w.coin.phi * d,
        alpha1: w.qplate1.alpha * d,
        alpha2: w.qplate2.alpha * d,
    }
}

/// Projection ket |eta> = cos(theta_p)|H> + e^{i phi_p} sin(theta_p)|V>.
pub fn projection_ket(theta_p: f64, phi_p: f64) -> Ket {
    let (s, co) = theta_p.sin_cos();
    Ket::normalized(vec![c(co, 0.0), c(phi_p.cos(), phi_p.sin()) * s]).expect("nonzero by construction")
}

/// Recovers (theta_p, phi_p) from a projection ket up to global phase.
pub fn projection_params(ket: &Ket) -> (f64, f64) {
    let a = ket.amplitudes();
    let theta_p = a[1].norm().atan2(a[0].norm());
    let phi_p = if a[1].norm() < 1e-14 || a[0].norm() < 1e-14 {
        0.0
    } else {
        (a[1] / a[0]).arg()
    };
    (theta_p, phi_p)
}

pub fn load_reservoir(path: &Path) -> Result<ReservoirConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let parsed: ReservoirToml = toml::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let r = std::f64::consts::PI / 180.0;
    let cfg = ReservoirConfig {
        walk_a: walk_from_toml(&parsed.walk_a),
        walk_b: walk_from_toml(&parsed.walk_b),
        projection_a: projection_ket(parsed.projection_a.theta_p * r, parsed.projection_a.phi_p * r),
        projection_b: projection_ket(parsed.projection_b.theta_p * r, parsed.projection_b.phi_p * r),
        oam_internal_halfwidth: parsed.oam_internal_halfwidth,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_reservoir(path: &Path, cfg: &ReservoirConfig) -> Result<()> {
    let d = 180.0 / std::f64::consts::PI;
    let (ta, pa) = projection_params(&cfg.projection_a);
    let (tb, pb) = projection_params(&cfg.projection_b);
    let toml_cfg = ReservoirToml {
        oam_internal_halfwidth: cfg.oam_internal_halfwidth,
        walk_a: walk_to_toml(&cfg.walk_a),
        walk_b: walk_to_toml(&cfg.walk_b),
        projection_a: ProjectionToml { theta_p: ta * d, phi_p: pa * d },
        projection_b: ProjectionToml { theta_p: tb * d, phi_p: pb * d },
    };
    let text = toml::to_string_pretty(&toml_cfg).expect("reservoir config serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Fixed q-plate axis offsets of the physical device (degrees 19, 77 for one
/// arm and 336, 163 for the other).
pub fn fabrication_alphas() -> [(f64, f64); 2] {
    let r = std::f64::consts::PI / 180.0;
    [(19.0 * r, 77.0 * r), (336.0 * r, 163.0 * r)]
}
