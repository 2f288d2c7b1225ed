//! A fitted end-to-end predictor: preprocessing resources plus either the
//! sparse-feature SVM chain or the sequence CNN.

use serde::{Deserialize, Serialize};

use crate::cnn::{self, CnnModel, IdMatrix, SequenceEncoder, TrainHistory};
use crate::corpus::{Corpus, Document, Label};
use crate::error::{Result, StageExt};
use crate::preprocess::{preprocess, preprocess_corpus, PreprocessConfig, PreprocessedDoc, Resources};
use crate::select::{apply_mask, chi2_scores, select_k_best, Chi2Scores, SelectionMask};
use crate::sparse::SparseMatrix;
use crate::svm::{train_svm, SvmModel};
use crate::vectorize::{build_vocabulary, fit_tfidf, transform, NgramSpec, TfIdfModel};

use super::config::{Classifier, CnnConfig, ExperimentConfig};
use crate::svm::SvmConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Svm {
        ngrams: NgramSpec,
        tfidf: TfIdfModel,
        mask: SelectionMask,
        model: SvmModel,
    },
    Cnn {
        encoder: SequenceEncoder,
        model: CnnModel,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub preprocess: PreprocessConfig,
    pub resources: Resources,
    pub predictor: Predictor,
}

/// Training-split artifacts shared by every K of one SVM block.
#[derive(Debug, Clone)]
pub struct SparseFeatures {
    pub ngrams: NgramSpec,
    pub tfidf: TfIdfModel,
    pub x: SparseMatrix,
    pub labels: Vec<Label>,
    pub scores: Chi2Scores,
}

impl SparseFeatures {
    /// Fits vocabulary, idf and chi-squared scores on `train` alone.
    pub fn fit(train: &[PreprocessedDoc], labels: Vec<Label>, ngrams: &NgramSpec) -> Result<Self> {
        let vocabulary = build_vocabulary(train, ngrams).stage("vectorize")?;
        let tfidf = fit_tfidf(vocabulary);
        let x = transform(train, &tfidf, ngrams);
        let scores = chi2_scores(&x, &labels).stage("select")?;
        Ok(SparseFeatures {
            ngrams: ngrams.clone(),
            tfidf,
            x,
            labels,
            scores,
        })
    }

    pub fn n_features(&self) -> usize {
        self.tfidf.n_features()
    }

    /// `k = None` keeps every feature.
    pub fn train(&self, k: Option<usize>, svm: &SvmConfig) -> Result<Predictor> {
        let mask = match k {
            Some(k) => select_k_best(&self.scores, k).stage("select")?,
            None => SelectionMask::all(self.n_features()),
        };
        let x = apply_mask(&self.x, &mask).stage("select")?;
        let model = train_svm(&x, &self.labels, svm).stage("svm")?;
        Ok(Predictor::Svm {
            ngrams: self.ngrams.clone(),
            tfidf: self.tfidf.clone(),
            mask,
            model,
        })
    }
}

pub fn fit_cnn(train: &[PreprocessedDoc], labels: &[Label], cfg: &CnnConfig, seed: u64) -> Result<(Predictor, TrainHistory)> {
    let encoder = SequenceEncoder::fit(train, cfg.unit, cfg.max_len);
    let x = encoder.encode(train);
    let arch = cfg.arch(encoder.id_space(), encoder.max_len());
    let mut model = cnn::init_cnn(arch, seed).stage("cnn")?;
    let train_cfg = cnn::TrainConfig {
        seed,
        ..cfg.train
    };
    let history = cnn::train_cnn(&mut model, &x, labels, &train_cfg).stage("cnn")?;
    Ok((
        Predictor::Cnn {
            encoder,
            model,
            threshold: cfg.threshold,
        },
        history,
    ))
}

impl Pipeline {
    /// Fits one pipeline on the training corpus. `k` applies to the SVM only.
    pub fn fit(
        train: &Corpus,
        resources: &Resources,
        config: &ExperimentConfig,
        k: Option<usize>,
        seed: u64,
    ) -> Result<(Pipeline, Option<TrainHistory>)> {
        config.validate()?;
        let labels = train.labels().stage("corpus")?;
        let docs = preprocess_corpus(train, &config.preprocess, resources);
        let (predictor, history) = match &config.classifier {
            Classifier::Svm(svm) => (SparseFeatures::fit(&docs, labels, &config.ngrams)?.train(k, svm)?, None),
            Classifier::Cnn(c) => {
                let (p, h) = fit_cnn(&docs, &labels, c, seed)?;
                (p, Some(h))
            }
        };
        Ok((
            Pipeline {
                preprocess: config.preprocess,
                resources: resources.clone(),
                predictor,
            },
            history,
        ))
    }

    pub fn preprocess_docs(&self, docs: &[Document]) -> Vec<PreprocessedDoc> {
        use rayon::prelude::*;
        docs.par_iter()
            .map(|d| preprocess(d, &self.preprocess, &self.resources))
            .collect()
    }

    /// SVM decision values, or CNN Fake probabilities.
    pub fn scores(&self, docs: &[Document]) -> Result<Vec<f64>> {
        self.predictor.scores(&self.preprocess_docs(docs))
    }

    pub fn predict(&self, docs: &[Document]) -> Result<Vec<Label>> {
        let scores = self.scores(docs)?;
        Ok(scores.into_iter().map(|s| self.predictor.label_for(s)).collect())
    }

    pub fn kind(&self) -> &'static str {
        match self.predictor {
            Predictor::Svm { .. } => "svm",
            Predictor::Cnn { .. } => "cnn",
        }
    }
}

impl Predictor {
    pub fn scores(&self, docs: &[PreprocessedDoc]) -> Result<Vec<f64>> {
        match self {
            Predictor::Svm {
                ngrams,
                tfidf,
                mask,
                model,
            } => {
                let x = apply_mask(&transform(docs, tfidf, ngrams), mask).stage("select")?;
                model.decision_values(&x).stage("svm")
            }
            Predictor::Cnn { encoder, model, .. } => {
                let x: IdMatrix = encoder.encode(docs);
                cnn::forward(model, &x).stage("cnn")
            }
        }
    }

    pub fn label_for(&self, score: f64) -> Label {
        match self {
            Predictor::Svm { .. } => Label::from_sign(score),
            Predictor::Cnn { threshold, .. } => cnn::label_for(score, *threshold),
        }
    }

    /// Vocabulary size for the SVM, embedding rows for the CNN.
    pub fn total_features(&self) -> usize {
        match self {
            Predictor::Svm { tfidf, .. } => tfidf.n_features(),
            Predictor::Cnn { encoder, .. } => encoder.id_space() - 1,
        }
    }

    pub fn selected_features(&self) -> usize {
        match self {
            Predictor::Svm { mask, .. } => mask.len(),
            Predictor::Cnn { encoder, .. } => encoder.id_space() - 1,
        }
    }
}
