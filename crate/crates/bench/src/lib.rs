//! Fixtures shared by the benchmarks.

use ufnd_core::corpus::{generate_synthetic, SyntheticSpec};
use ufnd_core::preprocess::preprocess_corpus;
use ufnd_core::{Corpus, Label, PreprocessConfig, PreprocessedDoc, Resources};

/// A synthetic labeled corpus with `per_class` documents of each label.
pub fn corpus(per_class: usize) -> Corpus {
    generate_synthetic(&SyntheticSpec::new(42, per_class)).expect("built-in pools are disjoint")
}

/// Preprocessed documents and their labels, default settings.
pub fn prepared(per_class: usize) -> (Vec<PreprocessedDoc>, Vec<Label>) {
    let c = corpus(per_class);
    let docs = preprocess_corpus(&c, &PreprocessConfig::default(), &Resources::default());
    (docs, c.labels().expect("synthetic documents are labeled"))
}
