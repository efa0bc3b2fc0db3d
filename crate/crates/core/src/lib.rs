//! Branched (multi-valued) Hamiltonians.
//!
//! Classical flows that switch branches at cusps, momentum-space spectra of the
//! supersymmetric pair `H± = −d²/dp² + p ± 1/(2√p)`, and the one-parameter
//! Riccati deformation of its superpotential. Everything is generic over the
//! scalar ([`Real`], implemented for `f32` and `f64`); the aliases below fix
//! `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod contour;
pub mod deformation;
pub mod error;
pub mod models;
pub mod ode;
pub mod quantum;
pub mod scalar;
pub mod specfun;

pub use error::{Error, Result};
pub use models::{BranchId, FamilyBranch, GaussianBranch};
pub use scalar::Real;

pub type Potential64 = models::Potential<f64>;
pub type GaussianModel64 = models::GaussianModel<f64>;
pub type FamilyModel64 = models::FamilyModel<f64>;
pub type ModelSpec64 = models::ModelSpec<f64>;
pub type PhaseState64 = classical::PhaseState<f64>;
pub type Trajectory64 = classical::Trajectory<f64>;
pub type EigenSolution64 = quantum::EigenSolution<f64>;
pub type PotentialProfile64 = quantum::PotentialProfile<f64>;
pub type BoundaryCondition64 = quantum::BoundaryCondition<f64>;
pub type DeformationProfile64 = deformation::DeformationProfile<f64>;

pub type ModelSpec32 = models::ModelSpec<f32>;
pub type EigenSolution32 = quantum::EigenSolution<f32>;
