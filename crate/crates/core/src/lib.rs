//! Flocking analysis for Cucker-Smale (CS) and Motsch-Tadmor (MT)
//! alignment dynamics on weighted digraphs.
//!
//! The crate is organised around five building blocks:
//!
//! - [`graph`]: weighted interaction digraphs, their communication
//!   structure (closed classes, reversibility, scrambling, hierarchy,
//!   leadership) and the structural constants that enter the flocking
//!   thresholds.
//! - [`kernel`]: communication kernels `psi` and assembly of the
//!   time-dependent transition rate matrices for both models.
//! - [`dynamics`]: fixed-step RK4 integration of the alignment ODE with
//!   diameter tracking, plus asymptotic velocities in the reversible case.
//! - [`flocking`]: certificates for the four structural regimes
//!   (reversible, scrambling, hierarchical leadership, general
//!   leadership) with predicted confinement radius and decay rate.
//! - [`markov`]: the dual jump-process view of the dynamics: transition
//!   functions, Dobrushin coefficients, jump-path sampling and Monte
//!   Carlo velocity estimates.

// Dense (i, j, k) index loops mirror the matrix formulas throughout;
// iterator rewrites would obscure them.
#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod flocking;
pub mod graph;
pub mod kernel;
pub mod markov;

mod error;
mod numerics;

pub use error::{Error, Result};

/// Which normalisation the interaction rates use.
///
/// `CuckerSmale` rates are `A_ij * psi(dist)`; `MotschTadmor` rates divide
/// that by the total communication weight received by agent `i` plus its
/// offset `a_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    CuckerSmale,
    MotschTadmor,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::CuckerSmale => write!(f, "CS"),
            Model::MotschTadmor => write!(f, "MT"),
        }
    }
}
