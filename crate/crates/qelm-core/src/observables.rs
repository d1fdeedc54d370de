//! Target observables: Pauli products, Bell-state witnesses, and general
//! pure-state witnesses with the separable-overlap bound.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, DensityMatrix, Ket, RealMatrix};
use crate::states::Dataset;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Named Hermitian 4x4 observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    name: String,
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::contract("observable matrix must be square"));
        }
        if !matrix.is_hermitian(linalg::STRUCTURAL_TOL * matrix.max_abs().max(1.0)) {
            return Err(Error::contract("observable matrix must be Hermitian"));
        }
        Ok(Self { name: name.into(), matrix })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(linalg::expectation_value(&self.matrix, rho)?)
    }
}

/// Single-qubit Pauli matrix; index 0 is the identity.
pub fn pauli(index: usize) -> ComplexMatrix {
    match index {
        0 => ComplexMatrix::identity(2),
        1 => ComplexMatrix::from_rows(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap(),
        2 => ComplexMatrix::from_rows(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap(),
        3 => ComplexMatrix::from_rows(2, 2, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).unwrap(),
        _ => panic!("Pauli index out of range: {index}"),
    }
}

const PAULI_LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// sigma_j (x) sigma_k, named by letter pair ("IZ", "XX", ...).
pub fn pauli_product(j: usize, k: usize) -> Observable {
    assert!(j < 4 && k < 4, "Pauli indices must be in 0..4");
    let name = format!("{}{}", PAULI_LETTERS[j], PAULI_LETTERS[k]);
    Observable::new(name, linalg::tensor_product(&pauli(j), &pauli(k))).unwrap()
}

/// All 16 Pauli products in row-major index order (II, IX, ..., ZZ).
pub fn all_pauli_products() -> Vec<Observable> {
    (0..4).flat_map(|j| (0..4).map(move |k| pauli_product(j, k))).collect()
}

/// The four Bell states in the order Phi+, Phi-, Psi+, Psi-.
pub fn bell_ket(index: usize) -> Ket {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match index {
        1 => vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)],
        2 => vec![c(s, 0.), c(0., 0.), c(0., 0.), c(-s, 0.)],
        3 => vec![c(0., 0.), c(s, 0.), c(s, 0.), c(0., 0.)],
        4 => vec![c(0., 0.), c(s, 0.), c(-s, 0.), c(0., 0.)],
        _ => panic!("Bell index must be 1..=4"),
    };
    Ket::new(amps).unwrap()
}

pub const BELL_WITNESS_NAMES: [&str; 4] = ["W_Phi+", "W_Phi-", "W_Psi+", "W_Psi-"];

/// Projector-based entanglement witness alpha*I - |psi><psi| together with its
/// separable-overlap bound alpha.
#[derive(Debug, Clone)]
pub struct WitnessSpec {
    pub target: Ket,
    pub alpha: f64,
    pub observable: Observable,
}

impl WitnessSpec {
    /// Witness built on the i-th Bell state (alpha = 1/2).
    pub fn bell(index: usize) -> Self {
        let target = bell_ket(index);
        let name = BELL_WITNESS_NAMES[index - 1];
        Self::from_target(target, name).expect("Bell targets are valid kets")
    }

    /// Witness for an arbitrary pure two-qubit target. alpha is the largest
    /// squared Schmidt coefficient, i.e. the squared top singular value of the
    /// 2x2 amplitude matrix.
    pub fn from_target(target: Ket, name: impl Into<String>) -> Result<Self> {
        if target.dim() != 4 {
            return Err(Error::contract("witness target must be a two-qubit ket"));
        }
        let amps = target.amplitudes();
        let amplitude_matrix = ComplexMatrix::from_rows(2, 2, amps.to_vec())?;
        let s = linalg::singular_values(&amplitude_matrix);
        let alpha = s[0] * s[0];
        let mut matrix = ComplexMatrix::identity(4).scale(c(alpha, 0.0));
        matrix = matrix.sub(&target.projector());
        Ok(Self { target, alpha, observable: Observable::new(name, matrix)? })
    }
}

pub fn bell_witness(index: usize) -> WitnessSpec {
    WitnessSpec::bell(index)
}

pub fn general_witness(target: Ket, name: impl Into<String>) -> Result<WitnessSpec> {
    WitnessSpec::from_target(target, name)
}

/// Expectation-value matrix: entry (j, k) is Tr(O_j rho_k) over a dataset.
pub fn expectation_matrix(observables: &[Observable], dataset: &Dataset) -> Result<RealMatrix> {
    let mut m = RealMatrix::zeros(observables.len(), dataset.states().len());
    for (j, obs) in observables.iter().enumerate() {
        for (k, state) in dataset.states().iter().enumerate() {
            m[(j, k)] = obs.expectation(state.rho())?;
        }
    }
    Ok(m)
}

/// Truth matrix assembled from the stored per-state true values.
pub fn truth_matrix(names: &[String], dataset: &Dataset) -> Result<RealMatrix> {
    let mut m = RealMatrix::zeros(names.len(), dataset.states().len());
    for (j, name) in names.iter().enumerate() {
        for (k, state) in dataset.states().iter().enumerate() {
            let v = state.true_values().get(name).ok_or_else(|| {
                Error::contract(format!("state {k} is missing a true value for {name}"))
            })?;
            m[(j, k)] = *v;
        }
    }
    Ok(m)
}

/// Resolves built-in observable names: Pauli letter pairs ("XX", "IZ", ...),
/// the four Bell witnesses ("W_Phi+", ...), and the partially entangled
/// reference witnesses "W_P1" / "W_P2".
pub fn resolve_builtin(name: &str) -> Option<Observable> {
    let letters: Vec<char> = name.chars().collect();
    if letters.len() == 2 {
        let a = PAULI_LETTERS.iter().position(|&l| l == letters[0]);
        let b = PAULI_LETTERS.iter().position(|&l| l == letters[1]);
        if let (Some(j), Some(k)) = (a, b) {
            return Some(pauli_product(j, k));
        }
    }
    if let Some(i) = BELL_WITNESS_NAMES.iter().position(|&n| n == name) {
        return Some(WitnessSpec::bell(i + 1).observable);
    }
    match name {
        "W_P1" => Some(
            WitnessSpec::from_target(crate::states::ReferenceTag::PsiPlusP1.ket().unwrap(), "W_P1")
                .unwrap()
                .observable,
        ),
        "W_P2" => Some(
            WitnessSpec::from_target(crate::states::ReferenceTag::PsiPlusP2.ket().unwrap(), "W_P2")
                .unwrap()
                .observable,
        ),
        _ => None,
    }
}

/// Resolves a list of names against the built-ins plus an optional registry.
pub fn resolve_names(names: &[String], registry: &BTreeMap<String, Observable>) -> Result<Vec<Observable>> {
    names
        .iter()
        .map(|n| {
            registry
                .get(n)
                .cloned()
                .or_else(|| resolve_builtin(n))
                .ok_or_else(|| Error::config(format!("unknown observable name: {n}")))
        })
        .collect()
}

/// Tab-separated registry: name followed by 32 floats (re, im pairs, row-major).
pub fn save_registry(path: &Path, observables: &[Observable]) -> Result<()> {
    let mut out = String::new();
    for obs in observables {
        out.push_str(obs.name());
        for z in obs.matrix().data() {
            out.push_str(&format!("\t{}\t{}", z.re, z.im));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_registry(path: &Path) -> Result<BTreeMap<String, Observable>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut registry = BTreeMap::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 33 {
            return Err(Error::config(format!(
                "{}:{}: expected name + 32 numbers, found {} fields",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let name = fields[0].to_string();
        let mut data = Vec::with_capacity(16);
        for pair in fields[1..].chunks(2) {
            let re: f64 = pair[0]
                .parse()
                .map_err(|e| Error::config(format!("{}:{}: bad number: {e}", path.display(), lineno + 1)))?;
            let im: f64 = pair[1]
                .parse()
                .map_err(|e| Error::config(format!("{}:{}: bad number: {e}", path.display(), lineno + 1)))?;
            data.push(c(re, im));
        }
        let matrix = ComplexMatrix::from_rows(4, 4, data)
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let obs = Observable::new(name.clone(), matrix)
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        registry.insert(name, obs);
    }
    Ok(registry)
}
