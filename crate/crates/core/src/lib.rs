//! Conservative particle systems of product type: stationary product
//! measures, ergodicity criteria, couplings and desk-scale verification.
//!
//! The systems handled here live on a finite window of sites and move one
//! particle at a time: a particle jumps from `x` to `y` at rate
//! `p(x,y) * b(eta_x, eta_y)` where `p` is a finite-range kernel and `b` a
//! rate function on occupancies. Depending on the structure of `b`
//! (exclusion, zero range, misanthrope, ...) the product measures built
//! from the weights `a_k = prod b(1,i)/b(i+1,0)` are stationary, and their
//! ergodicity is controlled by fugacity series and coupling arguments.
//!
//! The crate provides:
//!
//! * [`model`] — occupancy ranges, rate functions, kernels, fugacity
//!   profiles, configurations and the elementary particle move;
//! * [`measures`] — product-measure weights, marginals, sampling and the
//!   move Radon–Nikodym derivative, all in log space;
//! * [`stationarity`] — the stationarity trichotomy, exact generator
//!   expectations, Dirichlet forms and orbit decompositions;
//! * [`ergodicity`] — fugacity-series criteria, the step-overlap
//!   boundedness check and Bezout certificates;
//! * [`coupling`] — exact pmf propagation, total variation decay and the
//!   Mineka / multi-phase couplings of partial-sum chains;
//! * [`dynamics`] — continuous-time (Gillespie) simulation and Monte Carlo
//!   verification of stationarity and duality;
//! * [`duality`] — the anti-particle transformation for finite occupancy;
//! * [`counterexample`] — the factorial-fugacity system whose stationary
//!   product measure follows the deterministic profile `eta_k = k^2` and is
//!   not ergodic;
//! * [`selftest`] — the acceptance suite run by `cpslab selftest` and by
//!   the `acceptance` integration test.

pub mod catalog;
pub mod counterexample;
pub mod coupling;
pub mod descriptor;
pub mod duality;
pub mod dynamics;
pub mod ergodicity;
pub mod error;
pub mod logspace;
pub mod measures;
pub mod model;
pub mod selftest;
pub mod statespace;
pub mod stationarity;

pub use error::{Error, Result};
