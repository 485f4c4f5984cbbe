//! Confusion-matrix scores with the minority class (`+1`) as positive.
//!
//! G-mean here is the geometric mean of precision and recall,
//! `sqrt(P · R)`, not of sensitivity and specificity. Any `0/0` evaluates
//! to 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::POSITIVE;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gmean: f64,
}

pub fn confusion(y_true: &[i8], y_pred: &[i8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == POSITIVE, p == POSITIVE) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// F1 and G-mean from precision and recall.
pub fn from_precision_recall(precision: f64, recall: f64) -> MetricsReport {
    MetricsReport {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
        gmean: (precision * recall).sqrt(),
    }
}

pub fn scores(cm: &ConfusionMatrix) -> MetricsReport {
    let tp = cm.tp as f64;
    from_precision_recall(
        ratio(tp, tp + cm.fp as f64),
        ratio(tp, tp + cm.fn_ as f64),
    )
}

pub fn evaluate(y_true: &[i8], y_pred: &[i8]) -> Result<MetricsReport> {
    Ok(scores(&confusion(y_true, y_pred)?))
}

/// A published benchmark row: method, imbalance ratio and its four scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub ratio: u32,
    pub method: &'static str,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gmean: f64,
}

const fn row(ratio: u32, method: &'static str, p: f64, r: f64, f1: f64, g: f64) -> ReferenceRow {
    ReferenceRow {
        ratio,
        method,
        precision: p,
        recall: r,
        f1,
        gmean: g,
    }
}

/// Credit-card fraud results at imbalance ratios 2, 4, 6, 8, 10 and 70 to 1.
pub const REFERENCE_ROWS: [ReferenceRow; 30] = [
    row(2, "SVM", 0.9998, 0.7198, 0.8370, 0.8483),
    row(2, "Class-weighted SVM", 0.8956, 0.9082, 0.9019, 0.9019),
    row(2, "RUS-SVM", 0.8986, 0.9034, 0.9010, 0.9010),
    row(2, "SMOTE-SVM", 0.9123, 0.9034, 0.9078, 0.9078),
    row(2, "MM-SMOTE", 0.8983, 0.9103, 0.9056, 0.9057),
    row(4, "SVM", 0.9833, 0.8115, 0.8893, 0.8933),
    row(4, "Class-weighted SVM", 0.9696, 0.8744, 0.9150, 0.9160),
    row(4, "RUS-SVM", 0.8930, 0.9130, 0.9029, 0.9030),
    row(4, "SMOTE-SVM", 0.9477, 0.8841, 0.9148, 0.9153),
    row(4, "MM-SMOTE", 0.9394, 0.8986, 0.9185, 0.9187),
    row(6, "SVM", 0.9950, 0.7536, 0.8577, 0.8659),
    row(6, "Class-weighted SVM", 0.9691, 0.8406, 0.9003, 0.9026),
    row(6, "RUS-SVM", 0.8992, 0.8986, 0.8989, 0.8989),
    row(6, "SMOTE-SVM", 0.9575, 0.8889, 0.9219, 0.9226),
    row(6, "MM-SMOTE", 0.9617, 0.8937, 0.9264, 0.9270),
    row(8, "SVM", 0.9994, 0.7343, 0.8466, 0.8567),
    row(8, "Class-weighted SVM", 0.9821, 0.7923, 0.8770, 0.8821),
    row(8, "RUS-SVM", 0.9374, 0.9082, 0.9226, 0.9227),
    row(8, "SMOTE-SVM", 0.9666, 0.8647, 0.9128, 0.9143),
    row(8, "MM-SMOTE", 0.9547, 0.8889, 0.9206, 0.9212),
    row(10, "SVM", 0.9995, 0.7246, 0.8402, 0.8510),
    row(10, "Class-weighted SVM", 0.9877, 0.7778, 0.8703, 0.8765),
    row(10, "RUS-SVM", 0.9278, 0.9034, 0.9154, 0.9155),
    row(10, "SMOTE-SVM", 0.9823, 0.8261, 0.8975, 0.9008),
    row(10, "MM-SMOTE", 0.9734, 0.9034, 0.9371, 0.9378),
    row(70, "SVM", 0.9999, 0.6570, 0.7929, 0.8105),
    row(70, "Class-weighted SVM", 0.9946, 0.7101, 0.8286, 0.8404),
    row(70, "RUS-SVM", 0.9141, 0.9034, 0.9087, 0.9087),
    row(70, "SMOTE-SVM", 0.9914, 0.8261, 0.9012, 0.9050),
    row(70, "MM-SMOTE", 0.9926, 0.8647, 0.9243, 0.9264),
];

/// Printed values are rounded to four decimals.
pub const REFERENCE_TOLERANCE: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCheck {
    pub row: ReferenceRow,
    pub computed: MetricsReport,
    pub consistent: bool,
}

/// Recomputes F1 and G-mean of every reference row from its precision and
/// recall.
pub fn check_reference_rows() -> Vec<RowCheck> {
    REFERENCE_ROWS
        .iter()
        .map(|&row| {
            let computed = from_precision_recall(row.precision, row.recall);
            let consistent = (computed.f1 - row.f1).abs() <= REFERENCE_TOLERANCE
                && (computed.gmean - row.gmean).abs() <= REFERENCE_TOLERANCE;
            RowCheck {
                row,
                computed,
                consistent,
            }
        })
        .collect()
}
