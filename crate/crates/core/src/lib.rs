//! Urdu fake-news detection: preprocessing, n-gram TF-IDF features,
//! chi-squared selection, a kernel SVM, a multichannel CNN, and the
//! experiment runner tying them together.

pub mod cnn;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod preprocess;
pub mod runner;
pub mod select;
pub mod sparse;
pub mod svm;
pub mod vectorize;

pub use corpus::{load_corpus, Corpus, Document, Label, Split};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use preprocess::{preprocess_corpus, PreprocessConfig, PreprocessedDoc, Resources};
pub use sparse::SparseMatrix;
pub use vectorize::NgramSpec;
pub use runner::{load_model, run_config, run_grid, save_model, ExperimentConfig, GridConfig, Pipeline};
