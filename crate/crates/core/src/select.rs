//! Chi-squared feature scoring and K-best column selection.
//!
//! Scores are computed on the weighted matrix itself: for feature `j` the
//! observed mass of class `c` is the sum of `X[d, j]` over documents of that
//! class, and the expected mass is the class prior times the feature total.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// One non-negative finite score per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Scores(pub Vec<f64>);

impl Chi2Scores {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Column indices ordered by descending score, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }
}

pub fn chi2_scores(x: &SparseMatrix, y: &[Label]) -> Result<Chi2Scores> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if let Some(v) = x.values().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "chi-squared needs non-negative finite features, found {v}"
        )));
    }
    let n = y.len() as f64;
    let n_fake = y.iter().filter(|&&l| l == Label::Fake).count() as f64;
    if n_fake == 0.0 || n_fake == n {
        return Err(Error::InvalidInput(
            "chi-squared needs both classes present".into(),
        ));
    }
    let priors = [n_fake / n, (n - n_fake) / n];

    let mut observed = vec![[0.0f64; 2]; x.n_cols()];
    for (row, &label) in x.rows().zip(y) {
        let c = (label == Label::Real) as usize;
        for (j, v) in row.iter() {
            observed[j][c] += v;
        }
    }
    let scores = observed
        .iter()
        .map(|o| {
            let total = o[0] + o[1];
            if total == 0.0 {
                return 0.0;
            }
            o.iter()
                .zip(&priors)
                .map(|(&obs, &p)| {
                    let expected = p * total;
                    (obs - expected).powi(2) / expected
                })
                .sum()
        })
        .collect();
    Ok(Chi2Scores(scores))
}

/// Kept column indices, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub kept: Vec<u32>,
    /// Number of columns in the unselected matrix.
    pub n_features: usize,
    /// K as requested, before clamping to the feature count.
    pub requested: usize,
}

impl SelectionMask {
    pub fn all(n_features: usize) -> Self {
        SelectionMask {
            kept: (0..n_features as u32).collect(),
            n_features,
            requested: n_features,
        }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn clamped(&self) -> bool {
        self.requested > self.n_features
    }
}

/// Keeps the `k` best scores; `k` larger than the feature count keeps all.
pub fn select_k_best(scores: &Chi2Scores, k: usize) -> Result<SelectionMask> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    let v = scores.len();
    if k > v {
        log::warn!("K = {k} exceeds the {v} available features; keeping all");
    }
    let mut kept: Vec<u32> = scores.ranking().into_iter().take(k.min(v)).map(|j| j as u32).collect();
    kept.sort_unstable();
    Ok(SelectionMask {
        kept,
        n_features: v,
        requested: k,
    })
}

/// Column-slices `x`, re-indexing kept columns to `0..K` in ascending order.
pub fn apply_mask(x: &SparseMatrix, mask: &SelectionMask) -> Result<SparseMatrix> {
    if let Some(&bad) = mask.kept.iter().find(|&&j| j as usize >= x.n_cols()) {
        return Err(Error::InvalidInput(format!(
            "mask index {bad} out of range for {} columns",
            x.n_cols()
        )));
    }
    let mut remap = vec![u32::MAX; x.n_cols()];
    for (new, &old) in mask.kept.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let mut out = SparseMatrix::empty(mask.kept.len());
    let (mut idx, mut val) = (Vec::new(), Vec::new());
    for row in x.rows() {
        idx.clear();
        val.clear();
        for (j, v) in row.iter() {
            let new = remap[j];
            if new != u32::MAX {
                idx.push(new);
                val.push(v);
            }
        }
        out.push_row(&idx, &val)?;
    }
    Ok(out)
}
