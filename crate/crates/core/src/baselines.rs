//! Comparison methods: plain SVM, inverse-frequency class-weighted SVM,
//! random undersampling + SVM and input-space SMOTE + SVM.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{cross_gram, gram, KernelSpec};
use crate::mmsmote::SyntheticCount;
use crate::seed;
use crate::svm::{decision_values, sign_label, train_smo, SmoParams, TrainedModel};
use crate::POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaselineSpec {
    PlainSvm,
    ClassWeightedSvm,
    /// Undersample the majority to `target_ratio` majority rows per minority row.
    RusSvm { target_ratio: f64 },
    SmoteSvm { k: usize, synthetic: SyntheticCount },
}

/// `C · n₋/n₊` for minority rows, `C` for majority rows.
pub fn class_weight_vector(labels: &[i8], c: f64) -> Vec<f64> {
    let positives = labels.iter().filter(|&&l| l == POSITIVE).count();
    let negatives = labels.len() - positives;
    let minority_c = if positives == 0 {
        c
    } else {
        c * negatives as f64 / positives as f64
    };
    labels
        .iter()
        .map(|&l| if l == POSITIVE { minority_c } else { c })
        .collect()
}

fn euclidean2(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Classic SMOTE: `s` rows `x_i + δ (x_j − x_i)` with `i` uniform over the
/// minority, `j` uniform over its `k` nearest minority neighbours (Euclidean)
/// and `δ ~ U(0, 1)`, appended with label `+1`.
pub fn smote(train: &Dataset, k: usize, s: usize, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    let minority = train.positive_indices();
    if minority.len() < 2 {
        return Err(Error::ClassTooSmall {
            label: POSITIVE,
            count: minority.len(),
        });
    }
    if s == 0 {
        return Ok(train.clone());
    }
    let x = train.features();
    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut scored: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (euclidean2(x.row(i), x.row(j)), j))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.truncate(k);
            scored.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = seed::rng(seed);
    let mut synthetic = Array2::<f64>::zeros((s, train.n_features()));
    for mut row in synthetic.outer_iter_mut() {
        let pick = rng.random_range(0..minority.len());
        let i = minority[pick];
        let j = *neighbors[pick].choose(&mut rng).expect("at least one neighbour");
        let delta: f64 = rng.random();
        row.assign(&(&x.row(i) + &((&x.row(j) - &x.row(i)) * delta)));
    }
    train.with_appended(synthetic.view(), &vec![POSITIVE; s])
}

/// Keeps every minority row and `round(minority · target_ratio)` majority
/// rows drawn without replacement. Output rows keep input order.
pub fn random_undersample(train: &Dataset, target_ratio: f64, seed: u64) -> Result<Dataset> {
    let counts = train.require_both_classes()?;
    if !(target_ratio > 0.0 && target_ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target ratio {target_ratio} must be > 0"
        )));
    }
    let target = (counts.positive as f64 * target_ratio).round() as usize;
    if target > counts.negative {
        return Err(Error::TargetExceedsAvailable {
            target,
            available: counts.negative,
        });
    }
    let majority = train.negative_indices();
    let mut keep = vec![false; train.n_samples()];
    for i in train.positive_indices() {
        keep[i] = true;
    }
    for pos in rand::seq::index::sample(&mut seed::rng(seed), majority.len(), target) {
        keep[majority[pos]] = true;
    }
    let rows: Vec<usize> = (0..train.n_samples()).filter(|&i| keep[i]).collect();
    Ok(train.select(&rows))
}

/// An SVM together with the rows and kernel needed to score new points.
#[derive(Debug, Clone)]
pub struct FittedSvm {
    pub model: TrainedModel,
    pub train_features: Array2<f64>,
    pub spec: KernelSpec,
}

impl FittedSvm {
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let rows = cross_gram(&self.spec, x, self.train_features.view())?;
        decision_values(&self.model, &rows)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<i8>> {
        Ok(self.decision(x)?.into_iter().map(sign_label).collect())
    }
}

/// Trains one SVM on `train` with a uniform or per-sample box bound.
pub fn fit_svm(
    train: &Dataset,
    spec: &KernelSpec,
    c_vector: &[f64],
    smo: &SmoParams,
) -> Result<FittedSvm> {
    train.require_both_classes()?;
    let g = gram(spec, train.features().view())?;
    let model = train_smo(&g, train.labels(), c_vector, smo)?;
    Ok(FittedSvm {
        model,
        train_features: train.features().clone(),
        spec: *spec,
    })
}

pub fn fit_baseline(
    train: &Dataset,
    spec: &KernelSpec,
    baseline: &BaselineSpec,
    c: f64,
    smo: &SmoParams,
    seed: u64,
) -> Result<FittedSvm> {
    let resampled;
    let (data, c_vector) = match *baseline {
        BaselineSpec::PlainSvm => (train, vec![c; train.n_samples()]),
        BaselineSpec::ClassWeightedSvm => (train, class_weight_vector(train.labels(), c)),
        BaselineSpec::RusSvm { target_ratio } => {
            resampled = random_undersample(train, target_ratio, seed)?;
            (&resampled, vec![c; resampled.n_samples()])
        }
        BaselineSpec::SmoteSvm { k, synthetic } => {
            let counts = train.require_both_classes()?;
            let s = synthetic.resolve(counts.positive, counts.negative);
            resampled = smote(train, k, s, seed)?;
            (&resampled, vec![c; resampled.n_samples()])
        }
    };
    fit_svm(data, spec, &c_vector, smo)
}
