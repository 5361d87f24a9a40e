//! Classical simulator for trapped-ion quantum simulation of the long-range
//! antiferromagnetic transverse-field Ising model.
//!
//! The pipeline runs from the ion crystal to measured order parameters:
//! [`ion_chain`] finds equilibrium positions and transverse modes,
//! [`couplings`] turns them into Ising couplings `J_ij` (kHz),
//! [`hamiltonian`] and [`spectrum`] apply and diagonalize
//! `H = sum_{j<i} J_ij sx_i sx_j - B sum_i sy_i` matrix-free,
//! [`dynamics`] follows the ramped-field protocol, [`detection`] samples
//! bitstrings through an imperfect detector and [`observables`] reduces them.
//!
//! Everything is generic over the scalar (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod couplings;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod ion_chain;
pub mod krylov;
pub mod linalg;
pub mod num;
pub mod observables;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
pub use hamiltonian::IsingSign;
pub use num::{Complex, Real};
pub use state::{Axis, Direction};

pub type TrapParameters = ion_chain::TrapParameters<f64>;
pub type ChainGeometry = ion_chain::ChainGeometry<f64>;
pub type DriveParameters = couplings::DriveParameters<f64>;
pub type CouplingMatrix = couplings::CouplingMatrix<f64>;
pub type PowerLawFit = couplings::PowerLawFit<f64>;
pub type StateVector = state::StateVector<f64>;
pub type IsingHamiltonian = hamiltonian::IsingHamiltonian<f64>;
pub type SpectrumScan = spectrum::SpectrumScan<f64>;
pub type RampSchedule = dynamics::RampSchedule<f64>;
pub type StepControl = dynamics::StepControl<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type SampleSet = detection::SampleSet<f64>;
pub type ProbabilityDistribution = detection::ProbabilityDistribution<f64>;
pub type DetectionChannel = detection::DetectionChannel<f64>;
pub type CorrelationProfile = observables::CorrelationProfile<f64>;
pub type StructureFunction = observables::StructureFunction<f64>;
