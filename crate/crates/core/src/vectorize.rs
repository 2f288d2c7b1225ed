//! Word and character n-gram bag-of-words with TF-IDF weighting.
//!
//! Terms are namespaced by unit and order (`w2:a b`, `c3:abc`) so word and
//! character features can never collide. Column indices follow the
//! lexicographic order of the namespaced terms, which makes the column layout
//! independent of document order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PreprocessedDoc;
use crate::sparse::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramSpec {
    pub word_orders: BTreeSet<usize>,
    pub char_orders: BTreeSet<usize>,
    /// Character windows run over the space-joined token stream and may
    /// cross token boundaries. When false, each token is windowed alone.
    #[serde(default = "default_true")]
    pub char_across_tokens: bool,
}

fn default_true() -> bool {
    true
}

impl NgramSpec {
    pub fn new(
        word_orders: impl IntoIterator<Item = usize>,
        char_orders: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let spec = NgramSpec {
            word_orders: word_orders.into_iter().collect(),
            char_orders: char_orders.into_iter().collect(),
            char_across_tokens: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Word 1..=4 plus char 2..=6, the best-scoring combination.
    pub fn word1_4_char2_6() -> Self {
        NgramSpec::new(1..=4, 2..=6).expect("static spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_orders.is_empty() && self.char_orders.is_empty() {
            return Err(Error::Config("n-gram spec needs at least one word or char order".into()));
        }
        if self.word_orders.contains(&0) || self.char_orders.contains(&0) {
            return Err(Error::Config("n-gram orders must be at least 1".into()));
        }
        Ok(())
    }

    /// Short human-readable description, e.g. `word 1,2 + char 2,3,4`.
    pub fn describe(&self) -> String {
        let join = |s: &BTreeSet<usize>| s.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        match (self.word_orders.is_empty(), self.char_orders.is_empty()) {
            (false, false) => format!("word {} + char {}", join(&self.word_orders), join(&self.char_orders)),
            (false, true) => format!("word {}", join(&self.word_orders)),
            _ => format!("char {}", join(&self.char_orders)),
        }
    }
}

/// All contiguous n-token windows for each order, ascending order first.
pub fn word_ngrams(tokens: &[String], orders: &BTreeSet<usize>) -> Vec<String> {
    let mut out = Vec::new();
    for &n in orders {
        if n == 0 || n > tokens.len() {
            continue;
        }
        for window in tokens.windows(n) {
            out.push(format!("w{n}:{}", window.join(" ")));
        }
    }
    out
}

/// All contiguous n-code-point windows for each order.
pub fn char_ngrams(stream: &str, orders: &BTreeSet<usize>) -> Vec<String> {
    let chars: Vec<char> = stream.chars().collect();
    let mut out = Vec::new();
    for &n in orders {
        if n == 0 || n > chars.len() {
            continue;
        }
        for window in chars.windows(n) {
            let mut term = format!("c{n}:");
            term.extend(window);
            out.push(term);
        }
    }
    out
}

/// Every namespaced term of a document, with repetitions.
pub fn doc_terms(doc: &PreprocessedDoc, spec: &NgramSpec) -> Vec<String> {
    let mut terms = word_ngrams(&doc.tokens, &spec.word_orders);
    if !spec.char_orders.is_empty() {
        if spec.char_across_tokens {
            terms.extend(char_ngrams(&doc.char_stream, &spec.char_orders));
        } else {
            for tok in &doc.tokens {
                terms.extend(char_ngrams(tok, &spec.char_orders));
            }
        }
    }
    terms
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

/// Namespaced term to column map with document frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "VocabularyRepr", try_from = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    index: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.doc_freq == other.doc_freq && self.n_docs == other.n_docs
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            doc_freq: v.doc_freq,
            n_docs: v.n_docs,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = String;

    fn try_from(r: VocabularyRepr) -> std::result::Result<Self, String> {
        if r.terms.len() != r.doc_freq.len() {
            return Err("vocabulary terms and document frequencies differ in length".into());
        }
        if r.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err("vocabulary terms are not strictly sorted".into());
        }
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            terms: r.terms,
            doc_freq: r.doc_freq,
            n_docs: r.n_docs,
            index,
        })
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| i as usize)
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }

    /// `term<TAB>index<TAB>df` lines sorted by index.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, (t, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            writeln!(out, "{t}\t{i}\t{df}")?;
        }
        Ok(())
    }
}

fn merge_counts(a: HashMap<String, u32>, b: HashMap<String, u32>) -> HashMap<String, u32> {
    let (mut large, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for (t, c) in small {
        *large.entry(t).or_default() += c;
    }
    large
}

pub fn build_vocabulary(docs: &[PreprocessedDoc], spec: &NgramSpec) -> Result<Vocabulary> {
    spec.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidInput("cannot build a vocabulary from zero documents".into()));
    }
    let df: HashMap<String, u32> = docs
        .par_iter()
        .map(|d| doc_terms(d, spec).into_iter().collect::<HashSet<String>>())
        .fold(HashMap::new, |mut acc: HashMap<String, u32>, set| {
            for t in set {
                *acc.entry(t).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts);
    if df.is_empty() {
        return Err(Error::InvalidInput(
            "vocabulary is empty: every document produced zero terms".into(),
        ));
    }
    let mut pairs: Vec<(String, u32)> = df.into_iter().collect();
    pairs.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let (terms, doc_freq): (Vec<String>, Vec<u32>) = pairs.into_iter().unzip();
    Ok(Vocabulary::try_from(VocabularyRepr {
        terms,
        doc_freq,
        n_docs: docs.len(),
    })
    .expect("terms are sorted and unique"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
}

/// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
pub fn smoothed_idf(df: u32, n_docs: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn fit_tfidf(vocabulary: Vocabulary) -> TfIdfModel {
    let idf = vocabulary
        .doc_freq
        .iter()
        .map(|&df| smoothed_idf(df, vocabulary.n_docs))
        .collect();
    TfIdfModel { vocabulary, idf }
}

impl TfIdfModel {
    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    /// Raw counts times idf, L2-normalized. Unknown terms are ignored and a
    /// document with no known terms yields an empty row.
    pub fn transform_doc(&self, doc: &PreprocessedDoc, spec: &NgramSpec) -> SparseRow {
        let terms = doc_terms(doc, spec);
        let mut counts: HashMap<u32, u32> = HashMap::with_capacity(terms.len());
        for t in &terms {
            if let Some(&j) = self.vocabulary.index.get(t.as_str()) {
                *counts.entry(j).or_default() += 1;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(j, c)| (j, c as f64 * self.idf[j as usize]))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        let (indices, values) = entries.into_iter().unzip();
        SparseRow { indices, values }
    }
}

pub fn transform(docs: &[PreprocessedDoc], model: &TfIdfModel, spec: &NgramSpec) -> SparseMatrix {
    let rows: Vec<SparseRow> = docs.par_iter().map(|d| model.transform_doc(d, spec)).collect();
    SparseMatrix::from_rows(model.n_features(), rows).expect("transformed rows satisfy CSR invariants")
}
