//! Quantum stochastic walks on waveguide lattices with absorbing sinks,
//! read out as an associative memory and compared against a Hopfield
//! network.
//!
//! ```
//! use qsw_memory::network::{build_hamiltonian, NetworkSpec};
//!
//! let h = build_hamiltonian(&NetworkSpec::default()).unwrap();
//! assert_eq!(h.dim(), 107);
//! ```

pub mod config;
pub mod error;
pub mod format;
pub mod harness;
pub mod hopfield;
pub mod network;
pub mod photonic;
pub mod qsw;
pub mod report;

pub use error::{Error, Result};
pub use network::{BinaryPattern, NetworkSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/walk.md")]
    mod walk {}
    #[doc = include_str!("../../../book/src/photonic.md")]
    mod photonic {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/hopfield.md")]
    mod hopfield {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
