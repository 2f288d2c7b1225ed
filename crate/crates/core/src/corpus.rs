//! Labeled corpora: TSV ingestion, split-count validation and a deterministic
//! synthetic generator used wherever the shared-task data is unavailable.
//!
//! The on-disk format is three tab-separated columns, `id`, `label`, `text`.
//! Labels are matched case-insensitively against `fake`/`real`; the label
//! column may be empty only for [`Split::Unlabeled`] corpora. An optional
//! header line `id<TAB>label<TAB>text` is skipped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Fake, Label::Real];

    /// Fixed encoding used by the SVM: Fake is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Fake => 1.0,
            Label::Real => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Label {
        if value >= 0.0 {
            Label::Fake
        } else {
            Label::Real
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "Fake",
            Label::Real => "Real",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Fake => Label::Real,
            Label::Real => Label::Fake,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fake" => Ok(Label::Fake),
            "real" => Ok(Label::Real),
            other => Err(Error::InvalidInput(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unlabeled,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unlabeled => "unlabeled",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unlabeled" => Ok(Split::Unlabeled),
            other => Err(Error::InvalidInput(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub split: Split,
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and blank texts.
    pub fn new(split: Split, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if d.text.trim().is_empty() {
                return Err(Error::InvalidInput(format!("document `{}` has empty text", d.id)));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate document id `{}`", d.id)));
            }
        }
        Ok(Corpus { split, documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Gold labels; errors if any document is unlabeled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.documents
            .iter()
            .map(|d| {
                d.label.ok_or_else(|| {
                    Error::InvalidInput(format!("document `{}` has no label", d.id))
                })
            })
            .collect()
    }

    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
        for d in &self.documents {
            if let Some(l) = d.label {
                *counts.entry(l).or_default() += 1;
            }
        }
        counts
    }

    /// Splits off the first `per_class` documents of each label (in corpus
    /// order) as a training corpus; the remainder becomes the test corpus.
    pub fn split_per_class(&self, per_class: usize) -> (Corpus, Corpus) {
        let mut taken: BTreeMap<Label, usize> = BTreeMap::new();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for d in &self.documents {
            let slot = d.label.map(|l| taken.entry(l).or_default());
            match slot {
                Some(n) if *n < per_class => {
                    *n += 1;
                    train.push(d.clone());
                }
                _ => test.push(d.clone()),
            }
        }
        (
            Corpus {
                split: Split::Train,
                documents: train,
            },
            Corpus {
                split: Split::Test,
                documents: test,
            },
        )
    }

    /// Writes the corpus as `id<TAB>label<TAB>text`. Tabs and newlines inside
    /// text are replaced by spaces.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.documents {
            let label = d.label.map(Label::as_str).unwrap_or("");
            let text: String = d
                .text
                .chars()
                .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
                .collect();
            writeln!(out, "{}\t{}\t{}", d.id, label, text)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

pub fn load_corpus(path: impl AsRef<Path>, split: Split) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(file, path, split)
}

/// Parses TSV from any reader; `source` is only used in error messages.
pub fn parse_corpus<R: Read>(reader: R, source: impl AsRef<Path>, split: Split) -> Result<Corpus> {
    let source = source.as_ref();
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::load(source, lineno, format!("not valid UTF-8: {e}")))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::load(
                source,
                lineno,
                format!("expected 3 tab-separated columns (id, label, text), found {}", cols.len()),
            ));
        }
        if lineno == 1 && cols[0].eq_ignore_ascii_case("id") && cols[1].eq_ignore_ascii_case("label") {
            continue;
        }
        let (id, label, text) = (cols[0].trim(), cols[1].trim(), cols[2]);
        let label = if label.is_empty() {
            if split != Split::Unlabeled {
                return Err(Error::load(source, lineno, format!("missing label in {split} split")));
            }
            None
        } else {
            Some(label.parse::<Label>().map_err(|_| {
                Error::load(source, lineno, format!("unknown label `{label}` (expected Fake or Real)"))
            })?)
        };
        if text.trim().is_empty() {
            return Err(Error::load(source, lineno, "empty text"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::load(source, lineno, format!("duplicate id `{id}`")));
        }
        documents.push(Document::new(id, text, label));
    }
    Ok(Corpus { split, documents })
}

/// Expected per-label counts for a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitExpectation {
    pub total: usize,
    pub per_label: BTreeMap<Label, usize>,
}

impl SplitExpectation {
    pub fn new(fake: usize, real: usize) -> Self {
        SplitExpectation {
            total: fake + real,
            per_label: [(Label::Fake, fake), (Label::Real, real)].into_iter().collect(),
        }
    }

    /// 1300 training instances: 750 Real, 550 Fake.
    pub fn shared_task_train() -> Self {
        Self::new(550, 750)
    }

    /// 300 test instances: 200 Real, 100 Fake.
    pub fn shared_task_test() -> Self {
        Self::new(100, 200)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCount {
    pub label: Label,
    pub expected: usize,
    pub actual: usize,
}

impl LabelCount {
    pub fn delta(&self) -> i64 {
        self.actual as i64 - self.expected as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub split: Split,
    pub expected_total: usize,
    pub actual_total: usize,
    pub unlabeled: usize,
    pub per_label: Vec<LabelCount>,
    pub status: ValidationStatus,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.status == ValidationStatus::Pass
    }

    /// `key=value` lines for machine consumption.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("split={}\n", self.split));
        s.push_str(&format!(
            "status={}\n",
            if self.passed() { "pass" } else { "warn" }
        ));
        s.push_str(&format!("total.expected={}\n", self.expected_total));
        s.push_str(&format!("total.actual={}\n", self.actual_total));
        s.push_str(&format!("unlabeled={}\n", self.unlabeled));
        for c in &self.per_label {
            let l = c.label.as_str().to_ascii_lowercase();
            s.push_str(&format!("{l}.expected={}\n{l}.actual={}\n", c.expected, c.actual));
        }
        s
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "split {}: {}",
            self.split,
            if self.passed() { "PASS" } else { "WARN" }
        )?;
        writeln!(f, "{:<8} {:>9} {:>9} {:>7}", "label", "expected", "actual", "delta")?;
        for c in &self.per_label {
            writeln!(
                f,
                "{:<8} {:>9} {:>9} {:>+7}",
                c.label.as_str(),
                c.expected,
                c.actual,
                c.delta()
            )?;
        }
        writeln!(
            f,
            "{:<8} {:>9} {:>9} {:>+7}",
            "total",
            self.expected_total,
            self.actual_total,
            self.actual_total as i64 - self.expected_total as i64
        )?;
        if self.unlabeled > 0 {
            writeln!(f, "({} documents without a label)", self.unlabeled)?;
        }
        Ok(())
    }
}

/// Compares label counts against an expectation; never fails.
pub fn validate_split(corpus: &Corpus, expected: &SplitExpectation) -> ValidationReport {
    let actual = corpus.label_counts();
    let labels: BTreeSet<Label> = actual.keys().chain(expected.per_label.keys()).copied().collect();
    let per_label: Vec<LabelCount> = labels
        .into_iter()
        .map(|label| LabelCount {
            label,
            expected: expected.per_label.get(&label).copied().unwrap_or(0),
            actual: actual.get(&label).copied().unwrap_or(0),
        })
        .collect();
    let unlabeled = corpus.documents.iter().filter(|d| d.label.is_none()).count();
    let ok = corpus.len() == expected.total
        && unlabeled == 0
        && per_label.iter().all(|c| c.expected == c.actual);
    ValidationReport {
        split: corpus.split,
        expected_total: expected.total,
        actual_total: corpus.len(),
        unlabeled,
        per_label,
        status: if ok {
            ValidationStatus::Pass
        } else {
            ValidationStatus::Warn
        },
    }
}

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub per_class: usize,
    pub fake_pool: Vec<String>,
    pub real_pool: Vec<String>,
    pub noise_pool: Vec<String>,
    /// Probability that a token is drawn from the shared noise pool.
    pub noise_rate: f64,
    pub doc_len: RangeInclusive<usize>,
}

impl SyntheticSpec {
    /// Spec with the built-in Urdu-script pseudo-word pools.
    pub fn new(seed: u64, per_class: usize) -> Self {
        let (fake_pool, real_pool, noise_pool) = default_pools();
        SyntheticSpec {
            seed,
            per_class,
            fake_pool,
            real_pool,
            noise_pool,
            noise_rate: 0.2,
            doc_len: 12..=30,
        }
    }
}

const URDU_LETTERS: &[char] = &[
    'ا', 'ب', 'پ', 'ت', 'ٹ', 'ث', 'ج', 'چ', 'ح', 'خ', 'د', 'ڈ', 'ذ', 'ر', 'ڑ', 'ز', 'ژ', 'س', 'ش',
    'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف', 'ق', 'ک', 'گ', 'ل', 'م', 'ن', 'و', 'ہ', 'ھ', 'ی', 'ے',
];

/// Three mutually disjoint pools of pseudo-words (fake, real, noise), built
/// from a fixed internal seed so they never depend on the caller's seed.
pub fn default_pools() -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x55_52_44_55);
    let mut seen = HashSet::new();
    let mut pool = |n: usize| {
        let mut words = Vec::with_capacity(n);
        while words.len() < n {
            let len = rng.gen_range(2..=5);
            let w: String = (0..len)
                .map(|_| *URDU_LETTERS.choose(&mut rng).expect("letters non-empty"))
                .collect();
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        words
    };
    let fake = pool(80);
    let real = pool(80);
    let noise = pool(30);
    (fake, real, noise)
}

/// Deterministic synthetic corpus: `per_class` documents of each label,
/// interleaved Fake, Real, Fake, ... Each token comes from the document's
/// class pool, or with probability `noise_rate` from the shared noise pool.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    if spec.fake_pool.is_empty() || spec.real_pool.is_empty() {
        return Err(Error::InvalidInput("class pools must be non-empty".into()));
    }
    let fake: HashSet<&String> = spec.fake_pool.iter().collect();
    if let Some(w) = spec.real_pool.iter().find(|w| fake.contains(w)) {
        return Err(Error::InvalidInput(format!("class pools overlap on `{w}`")));
    }
    if spec.doc_len.is_empty() || *spec.doc_len.start() == 0 {
        return Err(Error::InvalidInput("doc_len must be a non-empty range of positive lengths".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) || (spec.noise_rate > 0.0 && spec.noise_pool.is_empty()) {
        return Err(Error::InvalidInput("noise_rate must be in [0,1] with a non-empty noise pool".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::with_capacity(2 * spec.per_class);
    for _ in 0..spec.per_class {
        for label in Label::ALL {
            let pool = match label {
                Label::Fake => &spec.fake_pool,
                Label::Real => &spec.real_pool,
            };
            let len = rng.gen_range(spec.doc_len.clone());
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let src = if rng.gen::<f64>() < spec.noise_rate {
                        &spec.noise_pool
                    } else {
                        pool
                    };
                    src[rng.gen_range(0..src.len())].as_str()
                })
                .collect();
            documents.push(Document::new(
                format!("syn-{:05}", documents.len()),
                words.join(" "),
                Some(label),
            ));
        }
    }
    Ok(Corpus {
        split: Split::Train,
        documents,
    })
}
