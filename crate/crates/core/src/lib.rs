//! Dynamics of three bosonic modes coupled by the trilinear exchange
//! `H_int = ħg (a_h† a_w a_c + a_h a_w† a_c†)`, run as an absorption
//! refrigerator.
//!
//! The crate covers the exact unitary problem ([`unitary`]), two
//! incoherent exchange models ([`incoherent`]), local thermal damping on a
//! truncated Fock space ([`open_system`]) and the classical limit
//! ([`classical`]). Kernels are generic over [`Real`]; the aliases below
//! fix the scalar to `f64`. Times are in units of `1/g`, energies in `ħg`.

pub mod error;
pub mod scalar;
pub mod specfun;
pub mod summation;
pub mod fock;
pub mod tridiag;
pub mod trace;
pub mod unitary;
pub mod incoherent;
pub mod classical;
pub mod open_system;

pub use error::{Error, Result};
pub use fock::{cooling_predicate, decompose, is_stationary, Block, CoolingVerdict, Mode};
pub use scalar::Real;
pub use trace::{TraceIoError, TraceMetadata};

pub type ModeTriple = fock::ModeTriple<f64>;
pub type ThermalInit = fock::ThermalInit<f64>;
pub type BlockEnsemble = fock::BlockEnsemble<f64>;
pub type BlockPopulation = fock::BlockPopulation<f64>;
pub type EnergyTrace = trace::EnergyTrace<f64>;
pub type EigenCache = unitary::EigenCache<f64>;
pub type ClassicalPoint = classical::ClassicalPoint<f64>;
pub type ClassicalTrajectory = classical::ClassicalTrajectory<f64>;
pub type MonteCarloResult = classical::MonteCarloResult<f64>;
pub type OpenSystemOptions = open_system::OpenSystemOptions<f64>;
pub type OpenSystemRun = open_system::OpenSystemRun<f64>;
