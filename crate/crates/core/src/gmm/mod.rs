//! GMM and generalised empirical likelihood estimation with
//! model-specification statistics and their weighted-bootstrap p-values.

mod estimate;
mod kernel;
mod model;
mod mst;
pub mod optim;

pub use estimate::{
    gel_estimate, gel_estimate_opts, gel_inner_solve, gmm_estimate, gmm_estimate_with, gmm_objective,
    resolve_weight_matrix, EstimationResult, GmmConfig, InnerSolution, WeightMatrix,
};
pub use kernel::{kernel, kernel_from_str, GelKernel, GelKind};
pub use model::{
    conditional_spline_model, moment_matrix, panel_ab_model, simulate_panel, BSplineBasis,
    ConditionalSplineModel, FnModel, MomentModel, PanelArModel, PanelDesign, Residual,
    PANEL_THETA_BOUNDS,
};
pub use mst::{mst_bootstrap_pvalue, mst_bootstrap_with, MstMethod, MstResult, MAX_FAILED_SHARE, MIN_REPS};
