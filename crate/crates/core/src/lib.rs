//! Rare-event estimation for portfolios of defaultable obligors whose
//! hazard rates excite each other: a Markovian birth process on group
//! default counts, where each default scales every intensity by a
//! contagion factor.
//!
//! The crate provides
//! - the model itself ([`ModelSpec`]): intensities, Hamiltonian, local rate;
//! - change-of-measure policies ([`ControlPolicy`]) built from
//!   one-dimensional viscosity subsolutions of the associated
//!   Hamilton-Jacobi equation, including a majorant construction for
//!   heterogeneous groups;
//! - a batched path sampler ([`run_batches`]) with deterministic,
//!   thread-count-independent output and likelihood-ratio weighting;
//! - exact finite-state references ([`exact_hit_probability`],
//!   [`binomial_tail_reference`]) for validating the estimators;
//! - structural verifiers for the subsolution property, the gradient-field
//!   conservativity question, and the minimax saddle identity behind the
//!   performance bound.

pub mod control;
pub mod error;
pub mod estimate;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod simulate;

pub use control::{
    build_policy, conservativity_check, mane_potential_1d, rate_u0, saddle_identity_check,
    solve_energy_level, travel_time, verify_subsolution, ControlPolicy, CurlReport,
    PolicyVariant, SaddleReport, SubsolutionReport,
};
pub use error::{Error, Result};
pub use estimate::{optimality_report, run_batches, BatchStats, OptimalityReport};
pub use model::{Coupling, LatticeState, ModelSpec};
pub use oracle::{binomial_tail_reference, exact_hit_probability};
pub use simulate::{derive_stream, sample_path, RngStreamSpec, SampleResult};
