//! Statistics kernel: association tests on 2×2 tables, the chi-square tail,
//! the quartile permutation test and LOESS.

use thiserror::Error;

pub mod association;
pub mod chi2;
pub mod loess;
pub mod npc;
pub mod quartile;

pub use association::{associate, g_test, g_test_williams, kendall_tau_b_2x2, AssociationResult, GTest, TauB};
pub use chi2::{chi_square_sf, chi_square_sf_df};
pub use loess::{detect_outliers_residual, loess_fit, loess_fit_excluding, LoessFit};
pub use npc::npc_test;
pub use quartile::{box_stats, quartile_split, BoxStats, QuartileGroups};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("chi-square statistic must be non-negative, got {0}")]
    NegativeStatistic(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDegreesOfFreedom(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("permutation count {0} is below the minimum of 999")]
    TooFewPermutations(usize),
    #[error("span must be in (0, 1], got {0}")]
    InvalidSpan(f64),
    #[error("local polynomial degree must be 1 or 2, got {0}")]
    InvalidDegree(u8),
}
