//! Perron–Frobenius eigenvalues of finite kernels, truncation ladders and the
//! expected-occupancy series.

mod ladder;
mod occupancy;
mod power;

pub use ladder::{
    ladder_csv, row_sum_ladder, truncation_ladder, LadderEntry, LadderMethod, LadderOptions,
    TruncationLadder,
};
pub use occupancy::{
    expected_count, growth_classifier, kernel_powers, occupancy_csv, occupancy_curve,
    occupancy_ode_solve, Growth, OccupancyPoint, OccupancySeries,
};
pub use power::{pf_eigenpair, pf_eigenvalue, PowerOptions, SpectralEstimate};

#[cfg(test)]
mod tests;
