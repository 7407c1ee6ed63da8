//! Continuous-time simulation of branching random walks and their truncations.
//!
//! Every replica owns a ChaCha8 stream derived from `(seed, replica index)`,
//! so results do not depend on scheduling.

mod config;
mod coupled;
mod engine;
mod family;
mod plan;
mod survival;

pub use config::ParticleConfiguration;
pub use coupled::{coupled_run, CoupledOutcome, ETA, ETA_BAR, ETA_BAR_M, ETA_HAT, ETA_M};
pub use engine::{
    run_replica, run_replica_logged, Checkpoint, Event, ReplicaOutcome, Simulator, Suppression,
};
pub use family::{MonotoneFamily, Variant};
pub use plan::{default_checkpoints, Mode, SimulationPlan, DEFAULT_CEILING};
pub use survival::{
    coupled_replicas, estimate_family, estimate_survival, format_cap, run_replicas, scan_caps,
    scan_critical, survival_csv, CapScan, FamilyEstimate, Probe, ScanResult, SurvivalRow,
};

use crate::error::Result;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order is the index order.
pub(crate) fn parallel_map<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
