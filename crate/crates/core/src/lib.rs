//! Numerical laboratory for blow-up Dirichlet regimes of the doubly degenerate
//! parabolic equation `(|u|^(q-1) u)_t = (|u_x|^(p-1) u_x)_x` on `(0, 1)`.
//!
//! The crate simulates localized blow-up regimes with an implicit scheme,
//! measures the interior energy functionals `E(t, s)` and `sup h(tau, s)`, and
//! checks the measured decay in `s` against the exponents of the a priori
//! energy and final-profile bounds.

pub mod energy;
pub mod error;
pub mod exponents;
pub mod fit;
pub mod lemmas;
pub mod regime;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
