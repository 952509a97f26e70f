//! Monte Carlo study of bootstrap and chi-square calibration for the
//! quadratic-form statistic under the bounded uniform design.

mod config;
mod study;
mod tables;

pub use config::{derive_d, DRule, SimConfig, VSpec};
pub use study::{
    dgp_draw, log_ratio, run_figure1, run_study, write_figure_csv, write_study_csv, StudyResult,
    FIGURE1_EPS,
};
pub use tables::{run_table, Scale, Table, TableId, TABLE1_EPS, TABLE_NS};
