//! Seeded simulations: data generation, the experiment drivers and their
//! CSV results.

pub mod config;
pub mod data;
pub mod sims;
pub mod table;

pub use config::{
    Division, ExperimentConfig, ExperimentKind, KernelChoice, KernelName, LogGrid, TargetConfig,
    DESIGN_DIR_ENV,
};
pub use data::{
    add_noise, bounded_noise, derive_seed, gen_centers, rmse, spearman, target_f, target_values,
    CenterSource,
};
pub use sims::{
    find_design, load_t_design, run, run_appendix_b, run_sim1_dki, run_sim1_ki, run_sim2, run_sim3,
    run_sim4,
};
pub use table::{ResultRow, ResultTable, SummaryRow};
