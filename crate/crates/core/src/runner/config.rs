//! Experiment grid configuration, stored as TOML with one
//! `[[experiment]]` table per block.
//!
//! ```toml
//! seed = 7
//!
//! [[experiment]]
//! name = "word 1-4, char 2-6"
//! k = [20000, 10000]
//! ngrams = { word_orders = [1, 2, 3, 4], char_orders = [2, 3, 4, 5, 6] }
//! classifier = { kind = "svm", c = 1.0, degree = 1, gamma = "scale" }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn::{CnnArch, SequenceUnit, TrainConfig};
use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::svm::SvmConfig;
use crate::vectorize::NgramSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub unit: SequenceUnit,
    pub kernel_sizes: Vec<usize>,
    /// Sequence length; fitted from the training split when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    pub embed_dim: usize,
    pub filters: usize,
    pub hidden: usize,
    pub threshold: f64,
    pub train: TrainConfig,
}

impl Default for CnnConfig {
    fn default() -> Self {
        let arch = CnnArch::new(1, 1, [1, 2, 3, 4]);
        CnnConfig {
            unit: SequenceUnit::Word,
            kernel_sizes: arch.kernel_sizes,
            max_len: None,
            embed_dim: arch.embed_dim,
            filters: arch.filters,
            hidden: arch.hidden,
            threshold: 0.5,
            train: TrainConfig::default(),
        }
    }
}

impl CnnConfig {
    pub fn arch(&self, vocab_size: usize, max_len: usize) -> CnnArch {
        CnnArch {
            vocab_size,
            max_len,
            kernel_sizes: self.kernel_sizes.clone(),
            embed_dim: self.embed_dim,
            filters: self.filters,
            hidden: self.hidden,
            pool: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Svm(SvmConfig),
    Cnn(CnnConfig),
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::Svm(SvmConfig::default())
    }
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Svm(_) => "svm",
            Classifier::Cnn(_) => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Block header in rendered tables.
    pub name: String,
    pub preprocess: PreprocessConfig,
    pub ngrams: NgramSpec,
    /// K values, one result row each; empty keeps every feature. Ignored by
    /// the CNN, which always yields one row.
    pub k: Vec<usize>,
    pub classifier: Classifier,
    /// Overrides the grid seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            preprocess: PreprocessConfig::default(),
            ngrams: NgramSpec::word1_4_char2_6(),
            k: Vec::new(),
            classifier: Classifier::default(),
            seed: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.classifier {
            Classifier::Svm(svm) => {
                self.ngrams.validate()?;
                svm.validate()?;
                if self.k.contains(&0) {
                    return Err(Error::Config(format!("experiment `{}`: K must be positive", self.name)));
                }
            }
            Classifier::Cnn(cnn) => {
                cnn.train.validate()?;
                if cnn.kernel_sizes.is_empty() || cnn.kernel_sizes.contains(&0) {
                    return Err(Error::Config(format!(
                        "experiment `{}`: kernel sizes must be non-empty and positive",
                        self.name
                    )));
                }
                if !(0.0..=1.0).contains(&cnn.threshold) {
                    return Err(Error::Config("threshold must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// Header shown above this block's rows.
    pub fn block_label(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        match &self.classifier {
            Classifier::Svm(_) => self.ngrams.describe(),
            Classifier::Cnn(c) => {
                let unit = match c.unit {
                    SequenceUnit::Word => "word",
                    SequenceUnit::Char => "char",
                };
                format!("{unit} CNN, kernels {:?}", c.kernel_sizes)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
}

impl GridConfig {
    pub fn new(seed: u64, experiment: Vec<ExperimentConfig>) -> Self {
        GridConfig { seed, experiment }
    }

    pub fn parse(src: &str) -> Result<Self> {
        let grid: GridConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() {
            return Err(Error::Config("no [[experiment]] blocks".into()));
        }
        self.experiment.iter().try_for_each(ExperimentConfig::validate)
    }

    pub fn seed_for(&self, experiment: &ExperimentConfig) -> u64 {
        experiment.seed.unwrap_or(self.seed)
    }

    /// The four SVM blocks of the reference grid: nine rows in total.
    pub fn reference_svm_grid(seed: u64) -> Self {
        let pre = PreprocessConfig::default();
        let block = |name: &str, words: &[usize], chars: &[usize], k: &[usize]| ExperimentConfig {
            name: name.to_owned(),
            preprocess: pre,
            ngrams: NgramSpec::new(words.iter().copied(), chars.iter().copied())
                .expect("valid reference orders"),
            k: k.to_vec(),
            classifier: Classifier::Svm(SvmConfig::default()),
            seed: None,
        };
        GridConfig::new(
            seed,
            vec![
                block("word 1-2, char 2-6", &[1, 2], &[2, 3, 4, 5, 6], &[20_000]),
                block("word 1-3, char 2-5", &[1, 2, 3], &[2, 3, 4, 5], &[50_000, 20_000]),
                block(
                    "word 1-4, char 2-6",
                    &[1, 2, 3, 4],
                    &[2, 3, 4, 5, 6],
                    &[70_000, 50_000, 25_000, 20_000, 10_000],
                ),
                block("word 1-4, char 3-6", &[1, 2, 3, 4], &[3, 4, 5, 6], &[20_000]),
            ],
        )
    }

    /// Word- and character-level CNNs with four and six channels.
    pub fn reference_cnn_grid(seed: u64) -> Self {
        let block = |unit: SequenceUnit, channels: usize| ExperimentConfig {
            name: format!(
                "{} CNN, {channels} channels",
                if unit == SequenceUnit::Word { "word" } else { "char" }
            ),
            classifier: Classifier::Cnn(CnnConfig {
                unit,
                kernel_sizes: (1..=channels).collect(),
                ..CnnConfig::default()
            }),
            ..ExperimentConfig::default()
        };
        GridConfig::new(
            seed,
            vec![
                block(SequenceUnit::Char, 4),
                block(SequenceUnit::Word, 4),
                block(SequenceUnit::Word, 6),
                block(SequenceUnit::Char, 6),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::Gamma;

    #[test]
    fn reference_grid_has_nine_rows() {
        let g = GridConfig::reference_svm_grid(0);
        assert_eq!(g.experiment.len(), 4);
        assert_eq!(g.experiment.iter().map(|e| e.k.len()).sum::<usize>(), 9);
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let mut g = GridConfig::reference_svm_grid(11);
        g.experiment[1].seed = Some(3);
        if let Classifier::Svm(s) = &mut g.experiment[0].classifier {
            s.gamma = Gamma::Value(0.1 + 0.2);
            s.c = 1.0 / 3.0;
        }
        g.experiment.extend(GridConfig::reference_cnn_grid(0).experiment);
        if let Classifier::Cnn(c) = &mut g.experiment[5].classifier {
            c.max_len = Some(300);
            c.train.embedding_dropout = 0.25;
        }
        let text = g.to_toml().unwrap();
        assert_eq!(GridConfig::parse(&text).unwrap(), g);
    }

    #[test]
    fn minimal_block_takes_defaults() {
        let g = GridConfig::parse("[[experiment]]\nk = [5]\n").unwrap();
        let e = &g.experiment[0];
        assert_eq!(e.classifier, Classifier::Svm(SvmConfig::default()));
        assert_eq!(e.ngrams, NgramSpec::word1_4_char2_6());
        assert_eq!(g.seed_for(e), 0);
    }

    #[test]
    fn cnn_block_parses() {
        let src = r#"
seed = 4
[[experiment]]
name = "chars"
classifier = { kind = "cnn", unit = "char", kernel_sizes = [1, 2], train = { epochs = 2 } }
"#;
        let g = GridConfig::parse(src).unwrap();
        match &g.experiment[0].classifier {
            Classifier::Cnn(c) => {
                assert_eq!(c.unit, SequenceUnit::Char);
                assert_eq!(c.train.epochs, 2);
                assert_eq!(c.train.batch_size, 16);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(GridConfig::parse("seed = 1\n").is_err());
        assert!(GridConfig::parse("[[experiment]]\nk = [0]\n").is_err());
        assert!(GridConfig::parse("[[experiment]]\nclassifier = { kind = \"forest\" }\n").is_err());
        assert!(GridConfig::parse("[[experiment]]\nngrams = { word_orders = [], char_orders = [] }\n").is_err());
    }
}
