//! Copulas, their products and perturbations, dependence coefficients and
//! mixing diagnostics for copula-based Markov chains.

pub mod copula;
pub mod dependence;
pub mod error;
pub mod mixing;
pub mod noise;
pub mod par;
pub mod perturbations;
pub mod products;
pub mod quad;
pub mod simulator;

pub use copula::{CopulaFn, CopulaModel, GridCopula, Mixture, UnitPoint};
pub use error::{Error, Result};
pub use par::Execution;
