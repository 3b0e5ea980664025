//! Stabilized hp-cloud discretization of the radial Coulomb-Dirac eigenproblem.
//!
//! The pipeline is: [`grid`] builds an exponentially graded mesh, [`cloud`]
//! turns it into moving-least-squares shape functions coupled with boundary
//! hats, [`assembly`] integrates the weak form and the Petrov-Galerkin
//! perturbation, and [`eigen`] solves and classifies the spectrum.
//! [`config::run_solve`] chains the lot.

pub mod assembly;
pub mod cloud;
pub mod config;
pub mod eigen;
pub mod enrichment;
pub mod error;
pub mod grid;
pub mod physics;

pub use assembly::{AssembledSystem, DerivativeMode, Method, QuadratureRule, WeakFormMatrices};
pub use cloud::{CloudBasis, ShapeEval};
pub use config::{run_solve, RunConfig, SolveOutcome};
pub use eigen::{classify_spectrum, convergence_rate, solve_generalized, SpectrumFlag, SpectrumReport};
pub use enrichment::{EnrichmentBasis, WeightFunction};
pub use error::{Error, Result};
pub use grid::{generate_grid, Grid, GridConfig};
pub use physics::{NucleusModel, PhysicalSystem};
