//! Synthetic index-model data, ground truths, error metrics and the sweep
//! runner used to reproduce the simulation trends.

mod data;
mod links;
mod metrics;
mod sweep;
mod truth;

pub use data::{gen_mim_data, gen_sim_data, gen_spiked_data};
pub use links::LinkFunction;
pub use metrics::{cosine_distance, subspace_cosine_distance, subspace_distance};
pub use sweep::{
    read_sweep_csv, run_sweep, summarize, write_sweep_csv, CellSummary, EstimatorSection, GridSection, ModelSection,
    SweepConfig, SweepRow, TruthSection, SWEEP_HEADER,
};
pub use truth::{gen_cp_tensor_beta, gen_lowrank_beta, gen_sparse_beta, gen_sparse_subspace, GroundTruth};
