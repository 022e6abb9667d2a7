//! Credit-risk analysis on an embedded quantum statevector simulator.
//!
//! A portfolio of defaultable assets driven by one or more Gaussian systemic
//! factors is loaded into a circuit (`uncertainty`), a comparator flags the
//! default patterns whose total loss stays under a threshold (`objective`),
//! and the resulting amplitude `P[L <= x]` is read exactly or estimated with
//! iterative amplitude estimation (`estimation`). The `risk` module turns
//! those CDF probes into Value at Risk and economic capital, and carries the
//! classical enumeration and Monte Carlo oracles the quantum pipeline is
//! checked against.

pub mod circuit;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod objective;
pub mod resources;
pub mod risk;
pub mod uncertainty;

pub use error::{Error, Result};
