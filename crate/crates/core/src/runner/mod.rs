//! Experiment configuration, fitted pipelines, model files, and the grid
//! runner.

pub mod config;
pub mod grid;
pub mod persist;
pub mod pipeline;

pub use config::{Classifier, CnnConfig, ExperimentConfig, GridConfig};
pub use grid::{run_config, run_grid, write_outputs, GridResult, ResultRow, RunOutput};
pub use persist::{load_model, save_model};
pub use pipeline::{Pipeline, Predictor};
