//! Beamforming at a secondary transmitter that leases spectrum from a primary
//! link in exchange for protecting it against an eavesdropper.
//!
//! The crate is layered bottom-up:
//!
//! * [`numerics`]: complex vectors and the low-rank Hermitian eigensolver.
//! * [`model`]: system parameters, channel realizations and beamformers.
//! * [`rates`]: achievable and secrecy rates for both eavesdropper models.
//! * [`pgr`]: the power-gain region boundary parametrization.
//! * [`solver`]: optimal beamformers plus a brute-force reference.
//! * [`harness`]: seeded Monte Carlo sweeps.
//! * [`cli`]: configuration, CSV output and the command implementations.

pub mod cli;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod pgr;
pub mod rates;
pub mod solver;

pub use model::{Beamformer, ChannelSet, SystemParams, TrialSeed};
pub use numerics::ComplexVec;
pub use rates::Regime;
pub use solver::{Candidate, OptResult, SimplexResolution};
