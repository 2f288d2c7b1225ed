//! Confusion counts and the per-class / macro metrics reported per run.
//!
//! Fake is the positive class. Degenerate ratios (0/0) evaluate to 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp_fake: usize,
    pub fn_fake: usize,
    pub fp_fake: usize,
    pub tn_fake: usize,
}

impl ConfusionMatrix {
    pub fn new(tp_fake: usize, fn_fake: usize, fp_fake: usize, tn_fake: usize) -> Self {
        ConfusionMatrix {
            tp_fake,
            fn_fake,
            fp_fake,
            tn_fake,
        }
    }

    pub fn total(&self) -> usize {
        self.tp_fake + self.fn_fake + self.fp_fake + self.tn_fake
    }

    /// (tp, fp, fn) counted with `class` as the positive class.
    pub fn counts_for(&self, class: Label) -> (usize, usize, usize) {
        match class {
            Label::Fake => (self.tp_fake, self.fp_fake, self.fn_fake),
            Label::Real => (self.tn_fake, self.fn_fake, self.fp_fake),
        }
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate zero predictions".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        match (g, p) {
            (Label::Fake, Label::Fake) => m.tp_fake += 1,
            (Label::Fake, Label::Real) => m.fn_fake += 1,
            (Label::Real, Label::Fake) => m.fp_fake += 1,
            (Label::Real, Label::Real) => m.tn_fake += 1,
        }
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn class_metrics(m: &ConfusionMatrix, class: Label) -> ClassMetrics {
    let (tp, fp, fneg) = m.counts_for(class);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub fake: ClassMetrics,
    pub real: ClassMetrics,
    pub f1_macro: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn class(&self, class: Label) -> &ClassMetrics {
        match class {
            Label::Fake => &self.fake,
            Label::Real => &self.real,
        }
    }

    /// The eight metric columns in table order, unrounded.
    pub fn columns(&self) -> [f64; 8] {
        [
            self.fake.precision,
            self.fake.recall,
            self.fake.f1,
            self.real.precision,
            self.real.recall,
            self.real.f1,
            self.f1_macro,
            self.accuracy,
        ]
    }

    /// `prec_f rec_f f1_f prec_r rec_r f1_r f1_macro accuracy`, tab-separated,
    /// each rounded half-to-even at 4 decimals.
    pub fn tsv_fields(&self) -> String {
        self.columns().iter().map(|&v| fmt4(v)).collect::<Vec<_>>().join("\t")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1")?;
        for (name, m) in [("Fake", &self.fake), ("Real", &self.real)] {
            writeln!(
                f,
                "{:<6} {:>9} {:>9} {:>9}",
                name,
                fmt4(m.precision),
                fmt4(m.recall),
                fmt4(m.f1)
            )?;
        }
        writeln!(f, "f1_macro {}  accuracy {}", fmt4(self.f1_macro), fmt4(self.accuracy))?;
        let c = &self.confusion;
        write!(
            f,
            "confusion (Fake positive): tp={} fn={} fp={} tn={}",
            c.tp_fake, c.fn_fake, c.fp_fake, c.tn_fake
        )
    }
}

pub fn summarize(m: &ConfusionMatrix) -> EvalReport {
    let fake = class_metrics(m, Label::Fake);
    let real = class_metrics(m, Label::Real);
    EvalReport {
        confusion: *m,
        fake,
        real,
        f1_macro: 0.5 * (fake.f1 + real.f1),
        accuracy: ratio(m.tp_fake + m.tn_fake, m.total()),
    }
}

pub fn evaluate(gold: &[Label], pred: &[Label]) -> Result<EvalReport> {
    Ok(summarize(&confusion(gold, pred)?))
}

/// Rounds to `digits` decimals, ties to even.
///
/// A value within 1e-9 (in units of the last kept digit) of a half is
/// treated as an exact tie; metric ratios with small denominators that are
/// true ties land there despite binary representation error.
pub fn round_half_even(value: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    let scaled = value * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / scale
}

/// Four-decimal rendering used by every report.
pub fn fmt4(value: f64) -> String {
    format!("{:.4}", round_half_even(value, 4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Fake, Real};

    #[test]
    fn hand_counted_confusion() {
        let m = confusion(&[Fake, Fake, Real, Real], &[Fake, Real, Real, Real]).unwrap();
        assert_eq!(m, ConfusionMatrix::new(1, 1, 0, 2));
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let gold = [Fake, Real, Real, Fake, Real];
        let m = confusion(&gold, &gold).unwrap();
        assert_eq!((m.fn_fake, m.fp_fake), (0, 0));
        let r = summarize(&m);
        assert_eq!(r.columns(), [1.0; 8]);
        let inv: Vec<Label> = gold.iter().map(|l| l.other()).collect();
        let m = confusion(&gold, &inv).unwrap();
        assert_eq!((m.tp_fake, m.tn_fake), (0, 0));
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert!(confusion(&[Fake], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn degenerate_class_is_zero() {
        // nothing predicted Fake
        let m = ConfusionMatrix::new(0, 5, 0, 5);
        let f = class_metrics(&m, Fake);
        assert_eq!((f.precision, f.recall, f.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn swapping_positive_class_swaps_triples() {
        let m = ConfusionMatrix::new(47, 53, 30, 170);
        let swapped = ConfusionMatrix::new(170, 30, 53, 47);
        let a = summarize(&m);
        let b = summarize(&swapped);
        assert_eq!(a.fake, b.real);
        assert_eq!(a.real, b.fake);
        assert_eq!(a.f1_macro, b.f1_macro);
        assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(fmt4(0.03125), "0.0312");
        assert_eq!(fmt4(0.03135), "0.0314");
        assert_eq!(fmt4(0.46), "0.4600");
        assert_eq!(fmt4(217.0 / 300.0), "0.7233");
        assert_eq!(fmt4(0.5 * (1.0 / 3.0)), "0.1667");
        assert_eq!(fmt4(1.0), "1.0000");
    }

    #[test]
    fn tsv_row_has_eight_fields() {
        let r = summarize(&ConfusionMatrix::new(47, 53, 30, 170));
        assert_eq!(r.tsv_fields().split('\t').count(), 8);
    }
}
