//! Binary kernel SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! keeping the gradient `G = Q a - 1` (with `Q_ij = y_i y_j K_ij`) up to date.
//! Each step picks the maximally violating pair: `i` maximizes `-y_t G_t`
//! over the indices that may still move up, `j` is the partner with the best
//! second-order gain among those that may move down. Scans run in index
//! order and ties go to the lower index, so training is deterministic.
//! Optimization stops once the violation gap `m(a) - M(a)` drops to `tol`,
//! which bounds every KKT residual by `tol`.
//!
//! Labels use the fixed encoding Fake = +1, Real = -1.

use std::collections::VecDeque;
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::{RowView, SparseMatrix, SparseRow};

const TAU: f64 = 1e-12;

/// `K(x, z) = (gamma * <x, z> + coef0)^degree`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelParams {
    pub fn linear(gamma: f64) -> Self {
        KernelParams {
            degree: 1,
            gamma,
            coef0: 0.0,
        }
    }

    #[inline]
    pub fn apply(&self, dot: f64) -> f64 {
        let base = self.gamma * dot + self.coef0;
        if self.degree == 1 {
            base
        } else {
            base.powi(self.degree as i32)
        }
    }
}

pub fn kernel(x: RowView<'_>, z: RowView<'_>, params: &KernelParams) -> f64 {
    params.apply(x.dot(&z))
}

/// How gamma is chosen when training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (n_features * var(X))`, variance over all matrix entries.
    Scale,
    /// `1 / n_features`.
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, x: &SparseMatrix) -> f64 {
        let d = x.n_cols().max(1) as f64;
        match self {
            Gamma::Value(g) => g,
            Gamma::Auto => 1.0 / d,
            Gamma::Scale => {
                let cells = x.n_rows() as f64 * d;
                if cells == 0.0 {
                    return 1.0;
                }
                let sum: f64 = x.values().iter().sum();
                let sum_sq: f64 = x.values().iter().map(|v| v * v).sum();
                let mean = sum / cells;
                let var = sum_sq / cells - mean * mean;
                if var > 0.0 {
                    1.0 / (d * var)
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub degree: u32,
    pub gamma: Gamma,
    pub coef0: f64,
    pub tol: f64,
    /// Upper bound on optimization work, in units of `n` pair updates.
    pub max_passes: usize,
    /// Memory budget for cached kernel rows.
    pub cache_bytes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            degree: 1,
            gamma: Gamma::Scale,
            coef0: 0.0,
            tol: 1e-3,
            max_passes: 200,
            cache_bytes: 256 << 20,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.degree == 0 {
            return Err(Error::Config("kernel degree must be at least 1".into()));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bounded FIFO cache of kernel matrix rows.
struct KernelCache<'a> {
    x: &'a SparseMatrix,
    params: KernelParams,
    rows: Vec<Option<Rc<Vec<f64>>>>,
    order: VecDeque<usize>,
    capacity: usize,
    scratch: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a SparseMatrix, params: KernelParams, budget_bytes: usize) -> Self {
        let n = x.n_rows();
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        let capacity = (budget_bytes / row_bytes).clamp(2, n.max(2));
        KernelCache {
            x,
            params,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
            scratch: vec![0.0; x.n_cols()],
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        let xi = self.x.row(i);
        for (j, v) in xi.iter() {
            self.scratch[j] = v;
        }
        let dense = &self.scratch;
        let params = self.params;
        let values: Vec<f64> = (0..self.x.n_rows())
            .into_par_iter()
            .map(|t| params.apply(self.x.row(t).dot_dense(dense)))
            .collect();
        for (j, _) in xi.iter() {
            self.scratch[j] = 0.0;
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let rc = Rc::new(values);
        self.rows[i] = Some(Rc::clone(&rc));
        self.order.push_back(i);
        rc
    }
}

/// Full dual solution over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    /// Final violation gap `m(a) - M(a)`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs SMO on the dual; `y` holds +1/-1.
pub fn solve_dual(
    x: &SparseMatrix,
    y: &[f64],
    params: &KernelParams,
    c: f64,
    tol: f64,
    max_passes: usize,
    cache_bytes: usize,
) -> DualSolution {
    let n = y.len();
    let mut cache = KernelCache::new(x, *params, cache_bytes);
    let diag: Vec<f64> = (0..n).map(|i| kernel(x.row(i), x.row(i), params)).collect();
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let max_iter = max_passes.saturating_mul(n.max(1));

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut gap;
    let mut converged = false;
    loop {
        // i: max over I_up of -y_t G_t
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice over I_low; gmax2 tracks max over I_low of y_t G_t
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        let k_i = i_sel.map(|i| cache.row(i));
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if let (Some(i), Some(k_i)) = (i_sel, k_i.as_ref()) {
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let quad = diag[i] + diag[t] - 2.0 * y[i] * y[t] * k_i[t];
                    let gain = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if gain < best {
                        best = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if gap <= tol || j_sel.is_none() {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel.expect("i set when j set"), j_sel.expect("checked"));
        let k_i = k_i.expect("row fetched");
        let k_j = cache.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_i[j];

        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
        }
    }

    let bias = bias_from_gradient(&alpha, &grad, y, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} updates ({max_passes} passes) with violation gap {gap:.3e} > tol {tol:.1e}"
        );
    }
    DualSolution {
        alpha,
        bias,
        objective,
        gap,
        iterations,
        converged,
    }
}

/// Average of `-y_i G_i` over free multipliers, or the midpoint of the
/// feasible interval when every multiplier sits on a bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let at_zero = alpha[t] <= 0.0;
        let at_c = alpha[t] >= c;
        if !at_zero && !at_c {
            sum += v;
            free += 1;
        } else if (y[t] > 0.0) == at_zero {
            // y=+1 at 0 or y=-1 at C
            lower = lower.max(v);
        } else {
            upper = upper.min(v);
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    }
}

/// Dual objective `W(a)` evaluated from scratch.
pub fn dual_objective(x: &SparseMatrix, y: &[f64], alpha: &[f64], params: &KernelParams) -> f64 {
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..alpha.len() {
            if alpha[j] != 0.0 {
                quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(x.row(i), x.row(j), params);
            }
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelParams,
    pub c: f64,
    pub bias: f64,
    pub support_vectors: Vec<SparseRow>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub n_features: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn from_solution(x: &SparseMatrix, y: &[f64], sol: &DualSolution, kernel: KernelParams, c: f64) -> Self {
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(x.row(i).to_owned());
                dual_coef.push(a * y[i]);
            }
        }
        SvmModel {
            kernel,
            c,
            bias: sol.bias,
            support_vectors,
            dual_coef,
            n_features: x.n_cols(),
            converged: sol.converged,
            iterations: sol.iterations,
        }
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }

    /// `sum_i coef_i K(sv_i, x) + b`
    pub fn decision_function(&self, x: RowView<'_>) -> Result<f64> {
        if let Some(&last) = x.indices.last() {
            if last as usize >= self.n_features {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features,
                    actual: last as usize + 1,
                });
            }
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: RowView<'_>) -> f64 {
        let mut acc = self.bias;
        for (sv, &coef) in self.support_vectors.iter().zip(&self.dual_coef) {
            acc += coef * kernel(sv.view(), x, &self.kernel);
        }
        acc
    }

    pub fn decision_values(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.decision_unchecked(x.row(i)))
            .collect())
    }

    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<Label>> {
        Ok(self.decision_values(x)?.into_iter().map(Label::from_sign).collect())
    }
}

pub fn train_svm(x: &SparseMatrix, y: &[Label], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if !y.contains(&Label::Fake) || !y.contains(&Label::Real) {
        return Err(Error::InvalidInput("SVM training needs both classes".into()));
    }
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature matrix contains non-finite values".into()));
    }
    let params = KernelParams {
        degree: config.degree,
        gamma: config.gamma.resolve(x),
        coef0: config.coef0,
    };
    let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let sol = solve_dual(x, &signs, &params, config.c, config.tol, config.max_passes, config.cache_bytes);
    Ok(SvmModel::from_solution(x, &signs, &sol, params, config.c))
}

pub fn predict_svm(model: &SvmModel, x: &SparseMatrix) -> Result<Vec<Label>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(rows: &[&[f64]]) -> SparseMatrix {
        let d = rows[0].len();
        SparseMatrix::from_dense(d, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn row(v: &[f64]) -> SparseRow {
        SparseRow::from_dense(v)
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::linear(0.5);
        let x = row(&[1.0, 0.0]);
        assert_eq!(kernel(x.view(), x.view(), &p), 0.5);
        let q = KernelParams {
            degree: 3,
            gamma: 1.0,
            coef0: 2.0,
        };
        assert_eq!(kernel(row(&[1.0, 0.0]).view(), row(&[0.0, 1.0]).view(), &q), 8.0);
        let r = KernelParams {
            degree: 2,
            gamma: 1.0,
            coef0: 1.0,
        };
        assert_eq!(kernel(x.view(), x.view(), &r), 4.0);
    }

    fn two_point() -> (SparseMatrix, Vec<Label>, SvmConfig) {
        let x = dense(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let cfg = SvmConfig {
            gamma: Gamma::Value(0.5),
            ..SvmConfig::default()
        };
        (x, vec![Label::Fake, Label::Real], cfg)
    }

    #[test]
    fn analytic_two_point_instance() {
        let (x, y, cfg) = two_point();
        let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
        let sol = solve_dual(&x, &signs, &KernelParams::linear(0.5), 1.0, 1e-3, 200, 1 << 20);
        assert!((sol.alpha[0] - 1.0).abs() < 1e-9);
        assert!((sol.alpha[1] - 1.0).abs() < 1e-9);
        assert!(sol.bias.abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-12);

        let m = train_svm(&x, &y, &cfg).unwrap();
        let f = m.decision_function(row(&[2.0, 0.0]).view()).unwrap();
        assert!((f - 2.0).abs() < 1e-9);
        assert_eq!(m.decision_function(row(&[0.0, 0.0]).view()).unwrap(), m.bias);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (x, y, cfg) = two_point();
        let m = train_svm(&x, &y, &cfg).unwrap();
        assert!(m.decision_function(row(&[0.0, 0.0, 1.0]).view()).is_err());
        let wide = SparseMatrix::empty(3);
        assert!(m.decision_values(&wide).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = dense(&[&[1.0], &[2.0]]);
        assert!(train_svm(&x, &[Label::Fake, Label::Fake], &SvmConfig::default()).is_err());
    }

    #[test]
    fn tie_predicts_fake() {
        assert_eq!(Label::from_sign(0.0), Label::Fake);
        assert_eq!(Label::from_sign(2.0), Label::Fake);
        assert_eq!(Label::from_sign(-0.5), Label::Real);
    }

    fn separable(seed: u64, n: usize) -> (SparseMatrix, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { Label::Fake } else { Label::Real };
            let offset = if label == Label::Fake { 1.5 } else { -1.5 };
            rows.push(vec![offset + rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0)]);
            labels.push(label);
        }
        (SparseMatrix::from_dense(2, &rows).unwrap(), labels)
    }

    #[test]
    fn separable_toy_sets_fit_perfectly() {
        for seed in 0..5 {
            let (x, y) = separable(seed, 40);
            let cfg = SvmConfig {
                c: 10.0,
                gamma: Gamma::Value(1.0),
                ..SvmConfig::default()
            };
            let m = train_svm(&x, &y, &cfg).unwrap();
            assert!(m.converged);
            assert_eq!(m.predict(&x).unwrap(), y, "seed {seed}");
            // a training point used as a query keeps its label
            let q = x.select_rows(&[3]);
            assert_eq!(m.predict(&q).unwrap(), vec![y[3]]);
        }
    }

    #[test]
    fn flipping_labels_negates_decision() {
        let (x, y) = separable(9, 30);
        let flipped: Vec<Label> = y.iter().map(|l| l.other()).collect();
        let cfg = SvmConfig {
            c: 10.0,
            gamma: Gamma::Value(1.0),
            tol: 1e-10,
            ..SvmConfig::default()
        };
        let a = train_svm(&x, &y, &cfg).unwrap().decision_values(&x).unwrap();
        let b = train_svm(&x, &flipped, &cfg).unwrap().decision_values(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u + v).abs() < 1e-6, "{u} vs {v}");
        }
    }

    #[test]
    fn equality_constraint_and_bounds_hold() {
        let (x, y) = separable(4, 50);
        let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
        let sol = solve_dual(&x, &signs, &KernelParams::linear(1.0), 0.5, 1e-3, 200, 1 << 20);
        let s: f64 = sol.alpha.iter().zip(&signs).map(|(a, y)| a * y).sum();
        assert!(s.abs() < 1e-6);
        assert!(sol.alpha.iter().all(|&a| (0.0..=0.5).contains(&a)));
        let direct = dual_objective(&x, &signs, &sol.alpha, &KernelParams::linear(1.0));
        assert!((direct - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn tiny_cache_matches_full_cache() {
        let (x, y) = separable(11, 30);
        let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
        let p = KernelParams::linear(1.0);
        let a = solve_dual(&x, &signs, &p, 1.0, 1e-3, 200, 1 << 30);
        let b = solve_dual(&x, &signs, &p, 1.0, 1e-3, 200, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn max_passes_exhaustion_flags_non_convergence() {
        let (x, y) = separable(2, 40);
        let cfg = SvmConfig {
            c: 100.0,
            gamma: Gamma::Value(1.0),
            tol: 1e-12,
            max_passes: 1,
            ..SvmConfig::default()
        };
        // one pass is far too little at this tolerance
        let m = train_svm(&x, &y, &cfg).unwrap();
        assert!(!m.converged);
    }

    #[test]
    fn three_point_grid_oracle() {
        // Dual of 3 points with y = (+1, +1, -1): a3 = a1 + a2, so the
        // feasible set is the square 0 <= a1, a2 <= C with a1 + a2 <= C.
        let x = dense(&[&[1.0, 0.5], &[0.2, 1.0], &[-0.8, -0.3]]);
        let signs = [1.0, 1.0, -1.0];
        let p = KernelParams::linear(1.0);
        let c = 1.0;
        let sol = solve_dual(&x, &signs, &p, c, 1e-6, 1000, 1 << 20);
        let steps = 2000;
        let mut best = f64::NEG_INFINITY;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let a1 = c * a as f64 / steps as f64;
                let a2 = c * b as f64 / steps as f64;
                best = best.max(dual_objective(&x, &signs, &[a1, a2, a1 + a2], &p));
            }
        }
        assert!(sol.objective >= best - 1e-9);
        assert!(sol.objective - best < 1e-3);
    }

    #[test]
    fn scale_gamma_is_inverse_variance() {
        let x = dense(&[&[1.0, 0.0], &[0.0, 1.0]]);
        // entries 1,0,0,1: mean .5, var .25, d = 2
        assert!((Gamma::Scale.resolve(&x) - 2.0).abs() < 1e-12);
        assert_eq!(Gamma::Auto.resolve(&x), 0.5);
    }
}
