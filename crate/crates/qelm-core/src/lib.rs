//! Simulation and estimation toolkit for witnessing two-photon polarization
//! entanglement through a quantum-walk reservoir.
//!
//! The pipeline: labeled two-qubit polarization states are pushed through a
//! fixed two-photon quantum walk in polarization and orbital angular momentum,
//! post-selected on a polarization projection, and measured in the 25-outcome
//! two-photon OAM basis. A linear readout trained on known states then
//! estimates observables (Pauli products, entanglement witnesses) for unseen
//! states, and is benchmarked against the dual-frame estimator built from the
//! same effective measurement.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod observables;
pub mod reservoir;
pub mod readout;
pub mod shadow;
pub mod sampling;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, Ket, RealMatrix};
pub use observables::{Observable, WitnessSpec};
pub use reservoir::{EffectivePovm, ReservoirConfig};
pub use readout::{InputForm, ReadoutMatrix, TrainMethod, TrainOptions};
pub use shadow::{DualFrame, FrameSuperoperator};
pub use sampling::{CountsMatrix, CountsVector, ProbabilityMatrix, ProbabilityVector};
pub use states::{Dataset, LabeledState, PrepMode, ReferenceState, ReferenceTag, StateLabel};
