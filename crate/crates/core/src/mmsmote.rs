//! Oversampling of marginal minority support vectors in kernel space.
//!
//! Pipeline:
//!
//! 1. Train a base SVM on the Gram matrix of the training set.
//! 2. Keep the minority samples with margin `≤ 1` (on the margin, inside it,
//!    or misclassified) and weight them by `exp(−L)`, normalized, where `L`
//!    is the geometric distance to the hyperplane.
//! 3. Inspect the `k` nearest neighbours of each such sample (kernel-induced
//!    distance). All-majority neighbourhoods are noise and never sampled;
//!    majority-dominated ones interpolate toward a minority partner
//!    (`δ ∈ (0,1)`), minority-dominated ones extrapolate away from it
//!    (`δ ∈ (−1,0)`).
//! 4. Extend the Gram matrix with the resulting virtual samples and retrain.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{
    augment_gram, augmented_row, gram, kernel_distance2, AugmentedKernel, KernelSpec, PlanEntry,
    SynthesisCase, SynthesisPlan,
};
use crate::seed;
use crate::svm::{
    classify_minority_svs, decision_values, sign_label, train_smo, SmoParams, SvTaxonomy,
    TaxonomyCounts, TrainedModel,
};
use crate::{NEGATIVE, POSITIVE};

/// Selection probabilities over eligible minority support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvWeights {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Normalized `exp(−|L|)` over the given distances.
pub fn sv_weights(distances: &[f64]) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::InvalidParameter(format!("distance {d} must be finite and >= 0")));
    }
    // shift by the smallest distance; the ratio is unchanged and nothing underflows to 0/0
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = distances.iter().map(|d| (-(d.abs() - min)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

impl SvWeights {
    pub fn new(indices: Vec<usize>, distances: &[f64]) -> Result<Self> {
        if indices.len() != distances.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                found: distances.len(),
            });
        }
        Ok(SvWeights {
            weights: sv_weights(distances)?,
            indices,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Noise,
    Conservative,
    Aggressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborCase {
    pub kind: CaseKind,
    /// Majority samples among the `k` nearest neighbours.
    pub majority_neighbors: usize,
    pub k: usize,
}

impl NeighborCase {
    /// `m = k` is noise; `⌈k/2⌉ ≤ m < k` conservative (the `m = k/2` tie
    /// included); anything lower aggressive.
    pub fn from_counts(majority_neighbors: usize, k: usize) -> Self {
        let kind = if majority_neighbors >= k {
            CaseKind::Noise
        } else if majority_neighbors >= k.div_ceil(2) {
            CaseKind::Conservative
        } else {
            CaseKind::Aggressive
        };
        NeighborCase {
            kind,
            majority_neighbors,
            k,
        }
    }

    pub fn synthesis_case(&self) -> Option<SynthesisCase> {
        match self.kind {
            CaseKind::Noise => None,
            CaseKind::Conservative => Some(SynthesisCase::Conservative),
            CaseKind::Aggressive => Some(SynthesisCase::Aggressive),
        }
    }
}

/// Indices of the `k` candidates closest to row `idx` in feature space,
/// excluding `idx` itself. Ties go to the smaller index.
fn nearest(
    spec: &KernelSpec,
    x: ArrayView2<'_, f64>,
    idx: usize,
    candidates: impl Iterator<Item = usize>,
    k: usize,
) -> Result<Vec<usize>> {
    let mut scored = candidates
        .filter(|&c| c != idx)
        .map(|c| Ok((kernel_distance2(spec, x.row(idx), x.row(c))?, c)))
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| neighbor_order(*a, *b);
    if scored.len() > k {
        scored.select_nth_unstable_by(k, by_distance);
        scored.truncate(k);
    }
    scored.sort_by(by_distance);
    Ok(scored.into_iter().map(|(_, c)| c).collect())
}

/// Neighbourhood case of training row `idx` from its `k` nearest neighbours
/// among all training rows, measured with the kernel-induced distance.
pub fn classify_neighborhood(
    idx: usize,
    train: &Dataset,
    spec: &KernelSpec,
    k: usize,
) -> Result<NeighborCase> {
    let n = train.n_samples();
    if idx >= n {
        return Err(Error::IndexOutOfRange { index: idx, len: n });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} needs 1 <= k < {n} training samples"
        )));
    }
    let neighbors = nearest(spec, train.features().view(), idx, 0..n, k)?;
    let m = neighbors
        .iter()
        .filter(|&&j| train.labels()[j] == NEGATIVE)
        .count();
    Ok(NeighborCase::from_counts(m, k))
}

/// A synthesis plan together with the neighbourhood case of every minority
/// support vector that was examined.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: SynthesisPlan,
    pub cases: Vec<(usize, NeighborCase)>,
    pub weights: SvWeights,
}

/// Draws `s` virtual samples. Bases come from the non-noise minority support
/// vectors with probability given by [`sv_weights`]; each partner is uniform
/// over the base's `k` nearest minority neighbours; `δ` is uniform over the
/// open interval of the base's case.
pub fn build_plan(
    train: &Dataset,
    taxonomy: &SvTaxonomy,
    spec: &KernelSpec,
    k: usize,
    s: usize,
    seed: u64,
) -> Result<SynthesisPlan> {
    Ok(build_plan_detailed(train, taxonomy, spec, k, s, seed)?.plan)
}

pub fn build_plan_detailed(
    train: &Dataset,
    taxonomy: &SvTaxonomy,
    spec: &KernelSpec,
    k: usize,
    s: usize,
    seed: u64,
) -> Result<PlanOutcome> {
    if s == 0 {
        return Err(Error::InvalidParameter("synthetic count must be >= 1".into()));
    }
    let minority = train.positive_indices();
    if minority.len() < 2 {
        return Err(Error::ClassTooSmall {
            label: POSITIVE,
            count: minority.len(),
        });
    }
    let svs: Vec<_> = taxonomy.support_vectors().copied().collect();
    let cases = svs
        .par_iter()
        .map(|p| Ok((p.index, classify_neighborhood(p.index, train, spec, k)?)))
        .collect::<Result<Vec<_>>>()?;

    let eligible: Vec<(usize, f64, SynthesisCase)> = svs
        .iter()
        .zip(&cases)
        .filter_map(|(p, (_, case))| case.synthesis_case().map(|c| (p.index, p.distance, c)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::AllNoise);
    }
    let weights = SvWeights::new(
        eligible.iter().map(|e| e.0).collect(),
        &eligible.iter().map(|e| e.1).collect::<Vec<_>>(),
    )?;

    let x = train.features().view();
    let partners = eligible
        .par_iter()
        .map(|&(i, _, _)| nearest(spec, x, i, minority.iter().copied(), k))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = seed::rng(seed);
    let chooser = WeightedIndex::new(&weights.weights)
        .map_err(|e| Error::InvalidParameter(format!("selection weights: {e}")))?;
    let mut entries = Vec::with_capacity(s);
    for _ in 0..s {
        let pick = chooser.sample(&mut rng);
        let (base, _, case) = eligible[pick];
        let partner = *partners[pick]
            .choose(&mut rng)
            .expect("minority class has at least two samples");
        let u = open_unit(&mut rng);
        let delta = match case {
            SynthesisCase::Conservative => u,
            SynthesisCase::Aggressive => -u,
        };
        entries.push(PlanEntry {
            base,
            partner,
            delta,
            case,
        });
    }
    Ok(PlanOutcome {
        plan: SynthesisPlan::new(entries)?,
        cases,
        weights,
    })
}

/// Uniform on the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticCount {
    /// Enough synthetic minority samples to balance the classes.
    Auto,
    Fixed(usize),
}

impl SyntheticCount {
    pub fn resolve(&self, positives: usize, negatives: usize) -> usize {
        match *self {
            SyntheticCount::Auto => negatives.saturating_sub(positives),
            SyntheticCount::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmParams {
    pub c: f64,
    pub k: usize,
    pub synthetic: SyntheticCount,
    pub smo: SmoParams,
    pub seed: u64,
}

impl Default for MmParams {
    fn default() -> Self {
        MmParams {
            c: 1.0,
            k: 5,
            synthetic: SyntheticCount::Auto,
            smo: SmoParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub noise: usize,
    pub conservative: usize,
    pub aggressive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub taxonomy: TaxonomyCounts,
    pub cases: CaseCounts,
    pub synthetic: usize,
    pub synthetic_conservative: usize,
    pub synthetic_aggressive: usize,
    pub seed: u64,
    pub base_converged: bool,
    pub final_converged: bool,
}

impl Diagnostics {
    pub fn report(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone)]
pub struct MmModel {
    pub base: TrainedModel,
    pub taxonomy: SvTaxonomy,
    pub augmented: AugmentedKernel,
    pub model: TrainedModel,
    pub train_features: Array2<f64>,
    pub spec: KernelSpec,
    pub diagnostics: Diagnostics,
}

impl MmModel {
    pub fn plan(&self) -> &SynthesisPlan {
        self.augmented.plan()
    }
}

pub fn fit_mm_smote(train: &Dataset, spec: &KernelSpec, params: &MmParams) -> Result<MmModel> {
    let counts = train.require_both_classes()?;
    if counts.positive < 2 {
        return Err(Error::ClassTooSmall {
            label: POSITIVE,
            count: counts.positive,
        });
    }
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {} must be > 0", params.c)));
    }
    let x = train.features().view();
    let labels = train.labels();
    let base_gram = gram(spec, x)?;
    let c_vector = vec![params.c; labels.len()];
    let base = train_smo(&base_gram, labels, &c_vector, &params.smo)?;
    let taxonomy = classify_minority_svs(&base, crate::kernel::KernelMatrix::matrix(&base_gram), labels)?;

    let s = params.synthetic.resolve(counts.positive, counts.negative);
    let (plan, cases) = if s == 0 {
        (SynthesisPlan::default(), Vec::new())
    } else {
        let outcome = build_plan_detailed(
            train,
            &taxonomy,
            spec,
            params.k,
            s,
            seed::derive(params.seed, &[1]),
        )?;
        (outcome.plan, outcome.cases)
    };

    let augmented = augment_gram(&base_gram, spec, x, labels, &plan)?;
    let aug_c = vec![params.c; augmented.labels().len()];
    let model = train_smo(&augmented, augmented.labels(), &aug_c, &params.smo)?;

    let mut case_counts = CaseCounts::default();
    for (_, c) in &cases {
        match c.kind {
            CaseKind::Noise => case_counts.noise += 1,
            CaseKind::Conservative => case_counts.conservative += 1,
            CaseKind::Aggressive => case_counts.aggressive += 1,
        }
    }
    let diagnostics = Diagnostics {
        taxonomy: taxonomy.counts(),
        cases: case_counts,
        synthetic: plan.len(),
        synthetic_conservative: plan.count(SynthesisCase::Conservative),
        synthetic_aggressive: plan.count(SynthesisCase::Aggressive),
        seed: params.seed,
        base_converged: base.converged,
        final_converged: model.converged,
    };
    Ok(MmModel {
        base,
        taxonomy,
        augmented,
        model,
        train_features: train.features().clone(),
        spec: *spec,
        diagnostics,
    })
}

/// Kernel rows of `x` against the training rows and the virtual samples.
pub fn augmented_rows(model: &MmModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let width = model.model.alpha.len();
    let rows = x
        .outer_iter()
        .into_par_iter()
        .map(|p| augmented_row(&model.spec, p, model.train_features.view(), model.plan()))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((x.nrows(), width), flat).expect("row width matches"))
}

pub fn decision_mm(model: &MmModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    decision_values(&model.model, &augmented_rows(model, x)?)
}

pub fn predict_mm(model: &MmModel, x: ArrayView2<'_, f64>) -> Result<Vec<i8>> {
    Ok(decision_mm(model, x)?.into_iter().map(sign_label).collect())
}

/// Ranks two `(distance, index)` pairs the way neighbour search does.
pub fn neighbor_order(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
