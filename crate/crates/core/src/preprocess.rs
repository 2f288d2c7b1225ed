//! Text preprocessing: diacritic removal, character normalization,
//! whitespace tokenization, stopword removal and table-driven lemmatization.
//!
//! [`preprocess`] always runs the stages in that order; each stage except
//! tokenization can be switched off through [`PreprocessConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

const DEFAULT_NORMMAP: &str = include_str!("../data/normmap.tsv");
const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub remove_diacritics: bool,
    pub normalize: bool,
    pub remove_stopwords: bool,
    pub lemmatize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            remove_diacritics: true,
            normalize: true,
            remove_stopwords: true,
            lemmatize: true,
        }
    }
}

impl PreprocessConfig {
    pub fn none() -> Self {
        PreprocessConfig {
            remove_diacritics: false,
            normalize: false,
            remove_stopwords: false,
            lemmatize: false,
        }
    }
}

/// Harakat, superscript alef and Quranic annotation marks.
pub fn is_diacritic(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E4}'
        | '\u{06E7}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}')
}

pub fn remove_diacritics(text: &str) -> String {
    text.chars().filter(|&c| !is_diacritic(c)).collect()
}

/// Single code point substitution table. No target may also be a source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormMap {
    map: BTreeMap<char, char>,
}

impl NormMap {
    pub fn new(map: BTreeMap<char, char>) -> Result<Self> {
        for (&from, &to) in &map {
            if map.contains_key(&to) {
                return Err(Error::Config(format!(
                    "normalization map is cyclic: U+{:04X} -> U+{:04X}, which is itself a source",
                    from as u32, to as u32
                )));
            }
        }
        Ok(NormMap { map })
    }

    pub fn empty() -> Self {
        NormMap {
            map: BTreeMap::new(),
        }
    }

    /// Parses `U+XXXX<TAB>U+XXXX` lines; `#` starts a comment.
    pub fn parse(src: &str, source: impl AsRef<Path>) -> Result<Self> {
        let source = source.as_ref();
        let mut map = BTreeMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::load(source, idx + 1, "expected two code points"));
            }
            let from = parse_code_point(cols[0]).ok_or_else(|| {
                Error::load(source, idx + 1, format!("bad code point `{}`", cols[0]))
            })?;
            let to = parse_code_point(cols[1]).ok_or_else(|| {
                Error::load(source, idx + 1, format!("bad code point `{}`", cols[1]))
            })?;
            map.insert(from, to);
        }
        Self::new(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, path)
    }

    pub fn get(&self, c: char) -> Option<char> {
        self.map.get(&c).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl Default for NormMap {
    fn default() -> Self {
        NormMap::parse(DEFAULT_NORMMAP, "<builtin normmap.tsv>").expect("builtin normalization map is valid")
    }
}

fn parse_code_point(s: &str) -> Option<char> {
    let hex = s
        .strip_prefix("U+")
        .or_else(|| s.strip_prefix("u+"))
        .unwrap_or(s);
    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
}

/// NFC followed by code point substitution, repeated until stable.
///
/// One round is not always enough: substitution can create a base letter
/// that NFC then composes with a following mark (e.g. heh goal + hamza).
/// Each extra round strictly shortens the text, so the loop terminates.
pub fn normalize_chars(text: &str, map: &NormMap) -> String {
    let mut current: String = text.nfc().collect();
    loop {
        let substituted: String = current
            .chars()
            .map(|c| map.get(c).unwrap_or(c))
            .collect();
        let next: String = substituted.nfc().collect();
        if next == current {
            return next;
        }
        current = next;
    }
}

/// Splits on runs of Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StopwordList {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    /// One token per line; blank lines and lines starting with `#` ignored.
    pub fn parse(src: &str) -> Self {
        Self::new(
            src.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&src))
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn map_entries(&self, f: impl Fn(&str) -> String) -> Self {
        StopwordList {
            words: self.words.iter().map(|w| f(w)).filter(|w| !w.is_empty()).collect(),
        }
    }
}

pub fn remove_stopwords(tokens: Vec<String>, list: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

/// Surface form to lemma lookup; absent forms map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaTable {
    entries: BTreeMap<String, String>,
}

impl LemmaTable {
    pub fn new(entries: BTreeMap<String, String>) -> Self {
        LemmaTable { entries }
    }

    /// `surface<TAB>lemma` per line; `#` lines ignored.
    pub fn parse(src: &str, source: impl AsRef<Path>) -> Result<Self> {
        let source = source.as_ref();
        let mut entries = BTreeMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 || cols[0].trim().is_empty() || cols[1].trim().is_empty() {
                return Err(Error::load(source, idx + 1, "expected `surface<TAB>lemma`"));
            }
            entries.insert(cols[0].trim().to_string(), cols[1].trim().to_string());
        }
        Ok(LemmaTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, path)
    }

    pub fn lookup<'a>(&'a self, token: &'a str) -> &'a str {
        self.entries.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn lemmatize(tokens: Vec<String>, table: &LemmaTable) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match table.entries.get(&t) {
            Some(lemma) => lemma.clone(),
            None => t,
        })
        .collect()
}

/// Immutable lexical resources shared by every document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    pub normmap: NormMap,
    pub stopwords: StopwordList,
    pub lemmas: LemmaTable,
}

impl Resources {
    /// Stopword and lemma entries are brought into the same canonical form
    /// as document tokens (diacritics stripped, characters normalized) so a
    /// list written with Arabic code points still matches.
    pub fn new(normmap: NormMap, stopwords: StopwordList, lemmas: LemmaTable) -> Self {
        let canon = |s: &str| normalize_chars(&remove_diacritics(s), &normmap);
        let stopwords = stopwords.map_entries(canon);
        let lemmas = LemmaTable {
            entries: lemmas
                .entries
                .iter()
                .map(|(k, v)| (canon(k), canon(v)))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .collect(),
        };
        Resources {
            normmap,
            stopwords,
            lemmas,
        }
    }

    /// Neither stopwords nor lemmas; identity normalization.
    pub fn empty() -> Self {
        Resources {
            normmap: NormMap::empty(),
            stopwords: StopwordList::default(),
            lemmas: LemmaTable::default(),
        }
    }

    pub fn load(
        stopwords: Option<&Path>,
        lemmas: Option<&Path>,
        normmap: Option<&Path>,
    ) -> Result<Self> {
        let normmap = match normmap {
            Some(p) => NormMap::load(p)?,
            None => NormMap::default(),
        };
        let stopwords = match stopwords {
            Some(p) => StopwordList::load(p)?,
            None => StopwordList::builtin(),
        };
        let lemmas = match lemmas {
            Some(p) => LemmaTable::load(p)?,
            None => LemmaTable::default(),
        };
        Ok(Resources::new(normmap, stopwords, lemmas))
    }
}

impl Default for Resources {
    fn default() -> Self {
        Resources::new(NormMap::default(), StopwordList::builtin(), LemmaTable::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessedDoc {
    pub tokens: Vec<String>,
    /// Tokens joined by single spaces.
    pub char_stream: String,
}

impl PreprocessedDoc {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let char_stream = tokens.join(" ");
        PreprocessedDoc {
            tokens,
            char_stream,
        }
    }
}

pub fn preprocess_text(text: &str, config: &PreprocessConfig, resources: &Resources) -> PreprocessedDoc {
    let mut text = if config.remove_diacritics {
        remove_diacritics(text)
    } else {
        text.to_owned()
    };
    if config.normalize {
        text = normalize_chars(&text, &resources.normmap);
    }
    let mut tokens = tokenize(&text);
    if config.remove_stopwords {
        tokens = remove_stopwords(tokens, &resources.stopwords);
    }
    if config.lemmatize {
        tokens = lemmatize(tokens, &resources.lemmas);
    }
    PreprocessedDoc::from_tokens(tokens)
}

pub fn preprocess(doc: &Document, config: &PreprocessConfig, resources: &Resources) -> PreprocessedDoc {
    preprocess_text(&doc.text, config, resources)
}

/// Preprocesses every document in parallel; output order follows the corpus.
pub fn preprocess_corpus(
    corpus: &Corpus,
    config: &PreprocessConfig,
    resources: &Resources,
) -> Vec<PreprocessedDoc> {
    corpus
        .documents
        .par_iter()
        .map(|d| preprocess(d, config, resources))
        .collect()
}
