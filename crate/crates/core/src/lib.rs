//! Random-coupling Ising models under Glauber–Metropolis dynamics.
//!
//! The crate covers the quenched model (couplings drawn from a conditionally
//! independent bounded array) and its annealed counterpart (couplings
//! replaced by their conditional means), together with:
//!
//! * [`disorder`]: coupling arrays for the Erdős–Rényi, inhomogeneous
//!   (Chung–Lu) and randomly diluted Hopfield families, with a
//!   platform-independent seeding scheme;
//! * [`model`]: Hamiltonians, Gibbs weights, the quenched/annealed energy
//!   gap and the exact conditional moment generating function;
//! * [`dynamics`]: event-driven simulation of the continuous-time chain and
//!   hitting/return time sampling;
//! * [`potential`]: exact potential theory on `{-1,+1}^N` (equilibrium
//!   potentials, capacities, harmonic sums, mean hitting times, variational
//!   principles, Dirichlet eigenvalues, metastability certificates);
//! * [`annealed`]: the Curie–Weiss reference model and its exact
//!   magnetization-lumped birth–death chain.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature
//! turns on rayon for the singleton scan of the metastability certificate;
//! `serde` derives serialization for the configuration types.
#![no_std]

extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

pub mod annealed;
pub mod disorder;
pub mod dynamics;
mod error;
pub mod math;
pub mod model;
pub mod potential;
pub mod rng;
pub mod spin;
pub mod stateset;

pub use error::{Error, Result};
pub use spin::SpinConfig;
pub use stateset::StateSet;

/// Default upper bound on `N` for routines that enumerate all `2^N` states.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;
