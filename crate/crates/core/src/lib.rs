//! Riccati-based feedback synthesis for ensembles of parameter-dependent
//! linear systems.
//!
//! The crate revolves around one construction: given a family of plants
//! `(A_sigma, B)` indexed by a real parameter and a finite training ensemble
//! of parameter values, stack the plants into one block-diagonal extended
//! system, solve a single algebraic Riccati equation for it, and compress the
//! solution back to plant size to obtain one static feedback gain that is
//! deployed unchanged on every realization of the parameter.
//!
//! Modules:
//! - [`matrix`]: dense kernel (Schur form, eigenvalues, complex rank,
//!   Lyapunov solves, norms) shared by everything else.
//! - [`models`]: parameter ensembles, system families, the extended system
//!   and the built-in example families.
//! - [`analysis`]: Kalman/Hautus controllability and stabilizability tests
//!   and the structural per-parameter conditions.
//! - [`riccati`]: algebraic/differential Riccati solvers and the competing
//!   feedback laws.
//! - [`ode`]: adaptive embedded Runge-Kutta integration.
//! - [`sim`]: closed-loop simulation, cost accounting, spectral sweeps,
//!   open-loop optimal control and the finite-horizon gap study.
//! - [`certificates`]: norm-equivalence constants, decay certificates,
//!   L2-gain estimation and suboptimality bounds.

pub mod analysis;
pub mod certificates;
pub mod error;
pub mod matrix;
pub mod models;
pub mod ode;
pub mod riccati;
pub mod sim;

pub use error::{Error, Result};
pub use nalgebra::{Complex, DMatrix, DVector};
