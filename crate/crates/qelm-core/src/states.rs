//! Labeled two-qubit input states: reference states transformed by random
//! waveplate preparation unitaries, plus span-rank diagnostics of datasets.
//!
//! Jones conventions (H/V basis):
//!   HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
//!   QWP(t) = R(t) diag(1, i) R(-t)
//! and the per-arm preparation unitary is U(phi, theta) = QWP(phi) HWP(theta).
//! Angles are radians internally and degrees in files.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, DensityMatrix, Ket};
use crate::observables::Observable;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Half-wave plate Jones matrix, fast axis at `theta`.
pub fn hwp(theta: f64) -> ComplexMatrix {
    let (s, co) = (2.0 * theta).sin_cos();
    ComplexMatrix::from_rows(2, 2, vec![c(co, 0.), c(s, 0.), c(s, 0.), c(-co, 0.)]).unwrap()
}

/// Quarter-wave plate Jones matrix, fast axis at `theta`.
pub fn qwp(theta: f64) -> ComplexMatrix {
    let (s, co) = theta.sin_cos();
    let cc = co * co;
    let ss = s * s;
    let sc = s * co;
    ComplexMatrix::from_rows(
        2,
        2,
        vec![c(cc, ss), c(sc, -sc), c(sc, -sc), c(ss, cc)],
    )
    .unwrap()
}

/// Per-arm preparation unitary U(phi, theta) = QWP(phi) HWP(theta).
pub fn prep_unitary(phi: f64, theta: f64) -> ComplexMatrix {
    qwp(phi).mul(&hwp(theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceTag {
    PsiPlus,
    VV,
    VH,
    HV,
    PsiPlusP1,
    PsiPlusP2,
    Custom,
}

impl ReferenceTag {
    /// The ket for a named reference; `Custom` has no canonical ket.
    pub fn ket(&self) -> Result<Ket> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            ReferenceTag::PsiPlus => vec![c(0., 0.), c(s, 0.), c(s, 0.), c(0., 0.)],
            ReferenceTag::VV => vec![c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)],
            ReferenceTag::VH => vec![c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)],
            ReferenceTag::HV => vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)],
            ReferenceTag::PsiPlusP1 => {
                vec![c(0., 0.), c(0.25f64.sqrt(), 0.), c(0.75f64.sqrt(), 0.), c(0., 0.)]
            }
            ReferenceTag::PsiPlusP2 => {
                vec![c(0., 0.), c((1.0f64 / 5.0).sqrt(), 0.), c((4.0f64 / 5.0).sqrt(), 0.), c(0., 0.)]
            }
            ReferenceTag::Custom => {
                return Err(Error::contract("custom reference tags carry their own ket"))
            }
        };
        Ok(Ket::new(amps).expect("named references are unit norm"))
    }

    pub fn label(&self) -> StateLabel {
        match self {
            ReferenceTag::PsiPlus => StateLabel::Entangled,
            ReferenceTag::PsiPlusP1 | ReferenceTag::PsiPlusP2 => StateLabel::Partial,
            ReferenceTag::VV | ReferenceTag::VH | ReferenceTag::HV => StateLabel::Separable,
            ReferenceTag::Custom => StateLabel::Separable,
        }
    }
}

impl std::str::FromStr for ReferenceTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi_plus" | "PsiPlus" => Ok(ReferenceTag::PsiPlus),
            "vv" | "VV" => Ok(ReferenceTag::VV),
            "vh" | "VH" => Ok(ReferenceTag::VH),
            "hv" | "HV" => Ok(ReferenceTag::HV),
            "psi_plus_p1" | "PsiPlusP1" => Ok(ReferenceTag::PsiPlusP1),
            "psi_plus_p2" | "PsiPlusP2" => Ok(ReferenceTag::PsiPlusP2),
            other => Err(Error::config(format!("unknown reference state: {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceState {
    pub tag: ReferenceTag,
    pub ket: Ket,
    pub entangled: bool,
}

impl ReferenceState {
    pub fn named(tag: ReferenceTag) -> Result<Self> {
        let ket = tag.ket()?;
        let entangled = !matches!(tag.label(), StateLabel::Separable);
        Ok(Self { tag, ket, entangled })
    }

    pub fn custom(ket: Ket, entangled: bool) -> Result<Self> {
        if ket.dim() != 4 {
            return Err(Error::contract("reference states are two-qubit kets"));
        }
        Ok(Self { tag: ReferenceTag::Custom, ket, entangled })
    }

    pub fn label(&self) -> StateLabel {
        match self.tag {
            ReferenceTag::Custom => {
                if self.entangled {
                    StateLabel::Entangled
                } else {
                    StateLabel::Separable
                }
            }
            t => t.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Separable,
    Entangled,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepMode {
    SameAngles,
    IndependentAngles,
}

/// Waveplate angles (radians) for the two arms. In same-angle mode the two
/// arms carry identical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationAngles {
    pub phi_a: f64,
    pub theta_a: f64,
    pub phi_b: f64,
    pub theta_b: f64,
}

impl PreparationAngles {
    pub fn same(phi: f64, theta: f64) -> Self {
        Self { phi_a: phi, theta_a: theta, phi_b: phi, theta_b: theta }
    }

    pub fn unitary(&self) -> ComplexMatrix {
        linalg::tensor_product(
            &prep_unitary(self.phi_a, self.theta_a),
            &prep_unitary(self.phi_b, self.theta_b),
        )
    }
}

#[derive(Debug, Clone)]
pub struct LabeledState {
    rho: DensityMatrix,
    label: StateLabel,
    prep: PreparationAngles,
    reference: ReferenceTag,
    true_values: BTreeMap<String, f64>,
}

impl LabeledState {
    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn label(&self) -> StateLabel {
        self.label
    }

    pub fn prep(&self) -> &PreparationAngles {
        &self.prep
    }

    pub fn reference(&self) -> ReferenceTag {
        self.reference
    }

    pub fn true_values(&self) -> &BTreeMap<String, f64> {
        &self.true_values
    }
}

/// Applies the preparation unitaries of `angles` to a reference state and
/// evaluates every registered observable on the resulting density matrix.
pub fn prepare_input(
    reference: &ReferenceState,
    angles: PreparationAngles,
    observables: &[Observable],
) -> Result<LabeledState> {
    let u = angles.unitary();
    let psi = Ket::normalized(u.mul_vec(reference.ket.amplitudes()))?;
    let rho = DensityMatrix::from_ket(&psi);
    let mut true_values = BTreeMap::new();
    for obs in observables {
        true_values.insert(obs.name().to_string(), obs.expectation(&rho)?);
    }
    Ok(LabeledState { rho, label: reference.label(), prep: angles, reference: reference.tag, true_values })
}

#[derive(Debug, Clone)]
pub struct Dataset {
    states: Vec<LabeledState>,
    seed: u64,
    mode: PrepMode,
    mislabeled_partials: bool,
}

impl Dataset {
    pub fn from_states(states: Vec<LabeledState>, seed: u64, mode: PrepMode) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::contract("datasets must be nonempty"));
        }
        Ok(Self { states, seed, mode, mislabeled_partials: false })
    }

    pub fn states(&self) -> &[LabeledState] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> PrepMode {
        self.mode
    }

    pub fn mislabeled_partials(&self) -> bool {
        self.mislabeled_partials
    }

    pub fn subset(&self, label: StateLabel) -> Vec<&LabeledState> {
        self.states.iter().filter(|s| s.label() == label).collect()
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut states = self.states.clone();
        states.extend(other.states.iter().cloned());
        Dataset::from_states(states, self.seed, self.mode)
    }

    /// Replaces the stored true values of every partial-labeled state with the
    /// values of the maximally entangled reference prepared at the same angles.
    pub fn mislabel_partials_as_maximal(&mut self, observables: &[Observable]) -> Result<()> {
        let me = ReferenceState::named(ReferenceTag::PsiPlus)?;
        for state in &mut self.states {
            if state.label == StateLabel::Partial {
                let surrogate = prepare_input(&me, state.prep, observables)?;
                state.true_values = surrogate.true_values;
            }
        }
        self.mislabeled_partials = true;
        Ok(())
    }
}

fn sample_angles(mode: PrepMode, rng: &mut ChaCha8Rng) -> PreparationAngles {
    // waveplate action has period pi
    let range = std::f64::consts::PI;
    let phi_a = rng.gen::<f64>() * range;
    let theta_a = rng.gen::<f64>() * range;
    match mode {
        PrepMode::SameAngles => PreparationAngles::same(phi_a, theta_a),
        PrepMode::IndependentAngles => PreparationAngles {
            phi_a,
            theta_a,
            phi_b: rng.gen::<f64>() * range,
            theta_b: rng.gen::<f64>() * range,
        },
    }
}

/// Draws `n_sep` separable and `n_ent` entangled states with uniformly random
/// preparation angles. Deterministic for a fixed seed; separable states come
/// first in the output ordering.
pub fn generate_dataset(
    ref_sep: &ReferenceState,
    ref_ent: &ReferenceState,
    n_sep: usize,
    n_ent: usize,
    mode: PrepMode,
    seed: u64,
    observables: &[Observable],
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n_sep + n_ent);
    for _ in 0..n_sep {
        let angles = sample_angles(mode, &mut rng);
        states.push(prepare_input(ref_sep, angles, observables)?);
    }
    for _ in 0..n_ent {
        let angles = sample_angles(mode, &mut rng);
        states.push(prepare_input(ref_ent, angles, observables)?);
    }
    Dataset::from_states(states, seed, mode)
}

/// Draws pairs of states sharing preparation angles: one from the entangled
/// reference and one from the separable reference. Used by the noise study,
/// which mixes the outcome distributions of corresponding pairs.
pub fn generate_paired_dataset(
    ref_ent: &ReferenceState,
    ref_sep: &ReferenceState,
    n: usize,
    mode: PrepMode,
    seed: u64,
    observables: &[Observable],
) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ents = Vec::with_capacity(n);
    let mut seps = Vec::with_capacity(n);
    for _ in 0..n {
        let angles = sample_angles(mode, &mut rng);
        ents.push(prepare_input(ref_ent, angles, observables)?);
        seps.push(prepare_input(ref_sep, angles, observables)?);
    }
    Ok((Dataset::from_states(ents, seed, mode)?, Dataset::from_states(seps, seed, mode)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanRanks {
    pub separable: usize,
    pub entangled: usize,
    pub all: usize,
}

fn span_rank_of(states: &[&LabeledState], tol: f64) -> Result<usize> {
    if states.is_empty() {
        return Ok(0);
    }
    let mut m = ComplexMatrix::zeros(states.len(), 16);
    for (k, state) in states.iter().enumerate() {
        for (j, z) in state.rho().vectorize().into_iter().enumerate() {
            m[(k, j)] = z;
        }
    }
    Ok(linalg::numerical_rank(&m, tol)?)
}

/// Real span dimensions of the vectorized density matrices of the separable
/// subset, the entangled subset (partial states included), and the whole
/// dataset. For Hermitian families the complex row rank equals the real one.
pub fn span_ranks(dataset: &Dataset, tol: f64) -> Result<SpanRanks> {
    let sep: Vec<&LabeledState> = dataset
        .states()
        .iter()
        .filter(|s| s.label() == StateLabel::Separable)
        .collect();
    let ent: Vec<&LabeledState> = dataset
        .states()
        .iter()
        .filter(|s| s.label() != StateLabel::Separable)
        .collect();
    let all: Vec<&LabeledState> = dataset.states().iter().collect();
    Ok(SpanRanks {
        separable: span_rank_of(&sep, tol)?,
        entangled: span_rank_of(&ent, tol)?,
        all: span_rank_of(&all, tol)?,
    })
}

/// Copy of the dataset with arm B's angles perturbed by N(0, delta_std^2)
/// draws; density matrices and true values are recomputed. The result is
/// flagged independent-angle since the arms no longer match.
pub fn angle_mismatch_dataset(
    dataset: &Dataset,
    delta_std: f64,
    seed: u64,
    observables: &[Observable],
) -> Result<Dataset> {
    if delta_std < 0.0 {
        return Err(Error::contract("delta_std must be nonnegative"));
    }
    if delta_std == 0.0 {
        return Ok(dataset.clone());
    }
    let normal = Normal::new(0.0, delta_std).map_err(|e| Error::contract(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(dataset.states().len());
    for state in dataset.states() {
        let reference = ReferenceState::named(state.reference())?;
        let mut angles = *state.prep();
        angles.phi_b += normal.sample(&mut rng);
        angles.theta_b += normal.sample(&mut rng);
        states.push(prepare_input(&reference, angles, observables)?);
    }
    Dataset::from_states(states, seed, PrepMode::IndependentAngles)
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    seed: u64,
    mode: PrepMode,
    mislabeled_partials: bool,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    label: StateLabel,
    reference: ReferenceTag,
    angles_deg: [f64; 4],
    rho: Vec<[f64; 2]>,
    true_values: BTreeMap<String, f64>,
}

/// Writes a dataset as JSON lines: a header object followed by one record per
/// state. Density matrices and true values round-trip bit-exactly; angles are
/// stored in degrees and round-trip through the unit conversion.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::new();
    let header = DatasetHeader {
        seed: dataset.seed(),
        mode: dataset.mode(),
        mislabeled_partials: dataset.mislabeled_partials(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    let to_deg = 180.0 / std::f64::consts::PI;
    for state in dataset.states() {
        let record = StateRecord {
            label: state.label(),
            reference: state.reference(),
            angles_deg: [
                state.prep().phi_a * to_deg,
                state.prep().theta_a * to_deg,
                state.prep().phi_b * to_deg,
                state.prep().theta_b * to_deg,
            ],
            rho: state
                .rho()
                .matrix()
                .data()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
            true_values: state.true_values().clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::config(format!("{}: empty dataset file", path.display())))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::config(format!("{}: bad header: {e}", path.display())))?;
    let from_deg = std::f64::consts::PI / 180.0;
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StateRecord = serde_json::from_str(&line)
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), lineno + 2)))?;
        if record.rho.len() != 16 {
            return Err(Error::config(format!(
                "{}:{}: expected 16 density matrix entries, found {}",
                path.display(),
                lineno + 2,
                record.rho.len()
            )));
        }
        let matrix = ComplexMatrix::from_rows(
            4,
            4,
            record.rho.iter().map(|[re, im]| c(*re, *im)).collect(),
        )?;
        let rho = DensityMatrix::new(matrix)
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), lineno + 2)))?;
        let [pa, ta, pb, tb] = record.angles_deg;
        states.push(LabeledState {
            rho,
            label: record.label,
            prep: PreparationAngles {
                phi_a: pa * from_deg,
                theta_a: ta * from_deg,
                phi_b: pb * from_deg,
                theta_b: tb * from_deg,
            },
            reference: record.reference,
            true_values: record.true_values,
        });
    }
    let mut dataset = Dataset::from_states(states, header.seed, header.mode)?;
    dataset.mislabeled_partials = header.mislabeled_partials;
    Ok(dataset)
}
