//! Block events, the oriented percolation fields they induce, and the drift
//! analysis for nearest-neighbour walks on `Z`.

mod block;
mod drift;
mod field;
mod index;

pub use block::{
    block_success_csv, estimate_block_success, tune_block, BlockProcess, BlockSuccess, TuneOptions, TunedBlock,
};
pub use drift::{
    admissible, drift_csv, drift_summary, find_drift_region, g_lambda, log_g_lambda, DriftAnalysis, DriftCell,
    DriftGrid,
};
pub use field::{
    block_field_clusters, cluster_csv, cluster_survival, depth_dominance, iid_field_clusters,
    iid_oriented_percolation, percolation_phase, same_level_indicators, sample_block_driven_field, ClusterReport,
    DominanceCheck, FieldMode, FieldOptions, FieldRule, FieldWindow, OrientedPercolationField, PhasePoint,
};
pub use index::{set_distance, BlockScheme, Blocks, Caps, IndexGraph};
