//! Synthetic data, rate fits, run configurations and the sweeps behind the
//! command-line tool.

pub mod config;
pub mod data;
pub mod fit;
pub mod sweep;

pub use config::{
    load_toml, parse_model, parse_toml, ApproxSweepConfig, BnnRunConfig, ConcentrationConfig, GadgetConfig, PriorConfig,
};
pub use data::{generate_dataset, generate_dataset_with};
pub use fit::{fit_rate, RateFit};
pub use sweep::{
    grid_sup_error, run_approx_sweep, run_bnn, run_concentration_sweep, run_gadget_verify, write_chain_csv, ApproxRow,
    ApproxSweep, ChainRow, ChainSummaryRow, ConcentrationSweep, GadgetRow, GadgetSweep, MedianRow, PARAM_DRIFT_TOL,
};
