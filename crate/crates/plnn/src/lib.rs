//! Exact piecewise-linear analysis of small ReLU binary classifiers.
//!
//! The crate trains sigmoid-output ReLU networks, extracts the exact linear
//! structure of every activation region (local equations, half-space
//! inequalities, decision boundaries, zero-activation hyperplanes), flattens
//! deep networks into equally-expressive single-hidden-layer ones, prunes
//! the flat networks, and renders the results as plots and text reports.

pub mod analysis;
pub mod data;
pub mod error;
pub mod flatten;
pub mod model;
pub mod optimize;
pub mod prune;
pub mod report;

pub use analysis::{accuracy, auc, paired_t, paired_t_from_summary, region_census};
pub use flatten::{active_configurations, flatten, FlatNetwork, FlattenOutcome};
pub use data::{Dataset, Normalizer};
pub use error::{Error, Result};
pub use optimize::{logistic_fit, train_plnn, LogisticFit, TrainConfig};
pub use prune::{
    boundary_cosine, neuron_criterion, prune_flat, prune_sweep, verify_theorem2, PruneSchedule,
    SweepPoint, Theorem2Report,
};
pub use report::{
    boundary_segments, exact_interpretation, matrix_plot, pc_plot, region_plot_2d, PcOptions,
    PlotBundle,
};
pub use model::{
    logit, sigmoid, Configuration, ForwardPass, Inequality, Layer, LinearEquation, Plnn, Region,
    Sense,
};
