//! Coherent transport of fermions through disordered networks described by
//! k-body embedded Gaussian random-matrix ensembles, with and without
//! centrosymmetry.
//!
//! * [`fock`]: occupation-number basis and fermionic k-body operator action.
//! * [`ensemble`]: Gaussian coefficient sampling, embedding, exchange operators.
//! * [`negf`]: wide-band leads, transmission, pole expansion and current.
//! * [`stats`]: seeded ensembles and the aggregated statistics.
//! * [`oracle`]: dense full-Fock-space reference construction.

pub mod ensemble;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod negf;
pub mod oracle;
pub mod quadrature;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
