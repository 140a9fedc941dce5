//! Fuzzy-measurement tomography of trapped-ion qubit registers.
//!
//! Readout of an ion qubit registers a number of fluorescence photons. This
//! crate models the count statistics of bright and dark ions, builds the
//! threshold and photon-count POVMs from them, simulates tomography data,
//! reconstructs states by maximum likelihood with the fuzzy operators, and
//! computes the asymptotic distribution of the fidelity loss from the Fisher
//! information of the protocol.

pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod mle;
pub mod photon_stats;
pub mod povm;
pub mod quantum;
pub mod rng;
pub mod simulator;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use photon_stats::{CountDistribution, ReadoutPhysics};
pub use povm::{BasisPovm, Label, ModelKind, Povm, ReadoutModel};
pub use quantum::{BasisUnitary, DensityMatrix, MeasurementProtocol, PureState};
pub use simulator::{Dataset, Simulator};
