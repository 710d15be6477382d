//! Configuration, persistence and the experiment driver behind the CLI.

mod config;
pub mod io;
mod pipeline;
mod plotdata;

pub use config::*;
pub use pipeline::{
    aggregate, run_experiment, run_method, run_replicate, simulate, write_experiment, write_run_record,
    ExperimentOutput, MethodOutput, ReplicateResult, TableRow,
};
pub use plotdata::{best_so_far_rows, boxplot_rows, chain_long_rows, plotdata, BestSoFarRow, BoxplotRow, TraceLongRow};
