//! Hamiltonian structures for `T q̈ − Θ q̇ + V q = 0`: Lagrange and Poisson
//! brackets from first-order Lagrangians, trajectories and s-equivalence
//! checks across charts, and quantum spectra of the quadratic Hamiltonians.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brackets;
pub mod dynamics;
pub mod error;
pub mod fock_oracle;
pub mod lagrangian;
pub mod linalg;
pub mod spectra;

pub use brackets::{invert_sigma, poisson_bracket, sigma_from_oneform, AffineOneForm, LagrangeBracket, PhaseChart, PoissonMatrix, QuadraticObservable};
pub use dynamics::{conservation_audit, integrate, integrator, s_equivalence, EquivalenceReport, Integrator, Trajectory};
pub use error::{Error, Result};
pub use fock_oracle::{oracle_spectrum, OracleSpectrum};
pub use lagrangian::{build_model, build_structure_qp, build_structure_qu, build_structure_qv, chart_builder, ChartBuilder, HamiltonianStructure, Provenance, QuadraticModel};
pub use spectra::{catalog, catalog_entry, closed_form_levels, compare_spectra, h1_levels, landau_levels, normal_modes, CatalogEntry, ModeSpectrum};
