//! Simulation and analysis of sequential weak measurements of Pauli
//! observables on a qubit with qubit (polarization) pointers.
//!
//! - [`qcore`]: kets, Pauli observables, pointer settings.
//! - [`chain`]: coupled evolution, post-selection, pointer correlators, Kraus branches.
//! - [`swv`]: weak-value oracle and extraction from pointer statistics.
//! - [`sampler`]: finite-shot coincidence-count emulation with bootstrap errors.
//! - [`optic`]: lowering of a weak-measurement module to waveplates and beam displacers.

pub mod chain;
pub mod error;
pub mod optic;
pub mod qcore;
pub mod sampler;
pub mod swv;

pub use chain::{
    coupling_unitary, evolve, kraus_branch, pointer_joint_expectation, post_select, Chain, JointState, PointerState,
    WeakModule,
};
pub use error::{Error, Result};
pub use qcore::{eigenbasis, observable_matrix, sigma_phi, Ket2, PauliObservable, PointerSetting, C64};
pub use optic::{compile_module, simulate_circuit, verify_module, CircuitModule, Element};
pub use sampler::{
    estimate_joint_expectation, estimate_swv_pipeline, estimate_swv_pipeline_with, outcome_distribution,
    sample_counts, CountsTable, Estimate, MeasurementPlan, PipelineOptions, SwvEstimate,
};
pub use swv::{simulate_extraction, weak_value_oracle, Extraction, SWValue};
