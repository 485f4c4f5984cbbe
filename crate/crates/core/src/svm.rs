//! Soft-margin SVM on a precomputed kernel.
//!
//! The dual
//!
//! ```text
//! max  Σ α_i − ½ Σ_ij α_i α_j y_i y_j K_ij
//! s.t. Σ α_i y_i = 0,  0 ≤ α_i ≤ C_i
//! ```
//!
//! is solved by SMO with first-order maximal-violating-pair selection.
//! Internally the solver minimizes `½ αᵀQα − 1ᵀα` with `Q_ij = y_i y_j K_ij`
//! and keeps the gradient `G = Qα − 1` up to date.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::seed;
use crate::{NEGATIVE, POSITIVE};

/// Floor for the curvature of a two-variable subproblem.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Stop once the maximal KKT violation `m(α) − M(α)` drops below this.
    pub tol: f64,
    /// Iteration budget in sweeps; one sweep is `n` pair updates.
    pub max_passes: usize,
    /// Orders the index scan, which decides ties between equally violating
    /// pairs.
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            tol: 1e-3,
            max_passes: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub labels: Vec<i8>,
    pub c_vector: Vec<f64>,
    /// Dual objective `Σα − ½ αᵀQα` at the returned iterate.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub kernel_fingerprint: String,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn n_support_vectors(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0.0).count()
    }
}

struct Solver<'a> {
    k: &'a Array2<f64>,
    y: Vec<f64>,
    c: &'a [f64],
    alpha: Vec<f64>,
    grad: Vec<f64>,
    order: Vec<usize>,
}

impl Solver<'_> {
    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.c[t]
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c[t]
        }
    }

    /// Maximal violating pair `(i, j)` and the gap `m − M`.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut best_up = (usize::MAX, f64::NEG_INFINITY);
        let mut best_low = (usize::MAX, f64::INFINITY);
        for &t in &self.order {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > best_up.1 {
                best_up = (t, v);
            }
            if self.in_low(t) && v < best_low.1 {
                best_low = (t, v);
            }
        }
        if best_up.0 == usize::MAX || best_low.0 == usize::MAX {
            return None;
        }
        Some((best_up.0, best_low.0, best_up.1 - best_low.1))
    }

    fn q(&self, a: usize, b: usize) -> f64 {
        self.y[a] * self.y[b] * self.k[[a, b]]
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (ci, cj) = (self.c[i], self.c[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qii = self.k[[i, i]];
        let qjj = self.k[[j, j]];
        let qij = self.q(i, j);

        if self.y[i] != self.y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        // snap round-off onto the box so bound membership tests are exact
        ai = snap(ai, ci);
        aj = snap(aj, cj);

        let (di, dj) = (ai - old_i, aj - old_j);
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (yi, yj) = (self.y[i], self.y[j]);
        let (row_i, row_j) = (self.k.row(i), self.k.row(j));
        let y = &self.y;
        self.grad
            .iter_mut()
            .enumerate()
            .for_each(|(t, g)| *g += y[t] * (yi * row_i[t] * di + yj * row_j[t] * dj));
    }

    fn bias(&self) -> f64 {
        let mut free_sum = 0.0;
        let mut n_free = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for t in 0..self.alpha.len() {
            let v = -self.y[t] * self.grad[t];
            let at_lower = self.alpha[t] <= 0.0;
            let at_upper = self.alpha[t] >= self.c[t];
            if !at_lower && !at_upper {
                free_sum += v;
                n_free += 1;
            } else if (at_lower && self.y[t] > 0.0) || (at_upper && self.y[t] < 0.0) {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        }
        if n_free > 0 {
            free_sum / n_free as f64
        } else if lower.is_finite() && upper.is_finite() {
            (lower + upper) / 2.0
        } else if lower.is_finite() {
            lower
        } else {
            upper
        }
    }
}

fn snap(a: f64, c: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else if a >= c {
        c
    } else {
        a
    }
}

fn signed(labels: &[i8]) -> Vec<f64> {
    labels.iter().map(|&l| l as f64).collect()
}

/// `αᵀQα` for the given kernel.
fn quadratic_form(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let ay: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    k.outer_iter()
        .into_par_iter()
        .zip(ay.par_iter())
        .map(|(row, &ai)| {
            if ai == 0.0 {
                0.0
            } else {
                ai * row.iter().zip(&ay).map(|(k, a)| k * a).sum::<f64>()
            }
        })
        .sum()
}

/// Dual objective `Σα − ½ αᵀQα`.
pub fn dual_objective(k: &Array2<f64>, labels: &[i8], alpha: &[f64]) -> f64 {
    alpha.iter().sum::<f64>() - 0.5 * quadratic_form(k, &signed(labels), alpha)
}

pub fn train_smo(
    kernel: &dyn KernelMatrix,
    labels: &[i8],
    c_vector: &[f64],
    params: &SmoParams,
) -> Result<TrainedModel> {
    let k = kernel.matrix();
    let n = labels.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    if c_vector.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c_vector.len(),
        });
    }
    if let Some(c) = c_vector.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParameter(format!("box bound {c} must be > 0")));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    let positives = labels.iter().filter(|&&l| l == POSITIVE).count();
    let negatives = labels.iter().filter(|&&l| l == NEGATIVE).count();
    if positives == 0 || negatives == 0 || positives + negatives != n {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(params.seed));
    let mut solver = Solver {
        k,
        y: signed(labels),
        c: c_vector,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
        order,
    };

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        match solver.select() {
            Some((i, j, gap)) if gap >= params.tol => {
                solver.update_pair(i, j);
                iterations += 1;
            }
            _ => {
                converged = true;
                break;
            }
        }
    }

    let bias = solver.bias();
    let objective = dual_objective(k, labels, &solver.alpha);
    Ok(TrainedModel {
        alpha: solver.alpha,
        bias,
        labels: labels.to_vec(),
        c_vector: c_vector.to_vec(),
        objective,
        converged,
        iterations,
        kernel_fingerprint: kernel.fingerprint().to_owned(),
    })
}

/// `Σ α_i y_i k_row[i] + b`.
pub fn raw_decision(model: &TrainedModel, k_row: ArrayView1<'_, f64>) -> Result<f64> {
    if k_row.len() != model.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: model.alpha.len(),
            found: k_row.len(),
        });
    }
    Ok(decision_unchecked(model, k_row))
}

fn decision_unchecked(model: &TrainedModel, k_row: ArrayView1<'_, f64>) -> f64 {
    model
        .alpha
        .iter()
        .zip(&model.labels)
        .zip(k_row.iter())
        .filter(|((a, _), _)| **a != 0.0)
        .map(|((a, &y), k)| a * y as f64 * k)
        .sum::<f64>()
        + model.bias
}

/// Raw decision values for each row of `k_rows`.
pub fn decision_values(model: &TrainedModel, k_rows: &Array2<f64>) -> Result<Vec<f64>> {
    if k_rows.ncols() != model.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: model.alpha.len(),
            found: k_rows.ncols(),
        });
    }
    Ok(k_rows
        .outer_iter()
        .into_par_iter()
        .map(|row| decision_unchecked(model, row))
        .collect())
}

/// Sign of a decision value; exact zero maps to `+1`.
pub fn sign_label(value: f64) -> i8 {
    if value >= 0.0 {
        POSITIVE
    } else {
        NEGATIVE
    }
}

pub fn predict(model: &TrainedModel, k_rows: &Array2<f64>) -> Result<Vec<i8>> {
    Ok(decision_values(model, k_rows)?
        .into_iter()
        .map(sign_label)
        .collect())
}

/// Functional margins `y_i f(x_i)` over the training kernel.
pub fn margins(model: &TrainedModel, k: &Array2<f64>, labels: &[i8]) -> Result<Vec<f64>> {
    if labels.len() != k.nrows() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            found: labels.len(),
        });
    }
    Ok(decision_values(model, k)?
        .into_iter()
        .zip(labels)
        .map(|(f, &y)| y as f64 * f)
        .collect())
}

/// Hinge slack `ξ_i = max(0, 1 − y_i f(x_i))`.
pub fn slack(model: &TrainedModel, k: &Array2<f64>, labels: &[i8]) -> Result<Vec<f64>> {
    Ok(margins(model, k, labels)?
        .into_iter()
        .map(slack_from_margin)
        .collect())
}

pub fn slack_from_margin(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// `‖w‖ = sqrt(αᵀQα)`.
pub fn weight_norm(model: &TrainedModel, k: &Array2<f64>) -> f64 {
    quadratic_form(k, &signed(&model.labels), &model.alpha)
        .max(0.0)
        .sqrt()
}

/// Half-width of the band around margin 1 treated as "on the margin".
pub const MARGIN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvClass {
    /// Margin above 1: not a support vector.
    Safe,
    /// Margin within ε of 1.
    OnMargin,
    /// Correctly classified but inside the margin.
    InMargin,
    /// Negative margin, slack above 1.
    Misclassified,
}

impl SvClass {
    pub fn from_margin(margin: f64) -> SvClass {
        if margin > 1.0 + MARGIN_EPS {
            SvClass::Safe
        } else if margin >= 1.0 - MARGIN_EPS {
            SvClass::OnMargin
        } else if margin >= 0.0 {
            SvClass::InMargin
        } else {
            SvClass::Misclassified
        }
    }

    pub fn is_support_vector(&self) -> bool {
        !matches!(self, SvClass::Safe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorityPoint {
    /// Row in the training kernel.
    pub index: usize,
    pub class: SvClass,
    pub margin: f64,
    pub slack: f64,
    /// Geometric distance `|f(x)| / ‖w‖` to the hyperplane.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvTaxonomy {
    pub points: Vec<MinorityPoint>,
    pub weight_norm: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyCounts {
    pub safe: usize,
    pub on_margin: usize,
    pub in_margin: usize,
    pub misclassified: usize,
}

impl SvTaxonomy {
    pub fn support_vectors(&self) -> impl Iterator<Item = &MinorityPoint> {
        self.points.iter().filter(|p| p.class.is_support_vector())
    }

    pub fn counts(&self) -> TaxonomyCounts {
        let mut c = TaxonomyCounts::default();
        for p in &self.points {
            match p.class {
                SvClass::Safe => c.safe += 1,
                SvClass::OnMargin => c.on_margin += 1,
                SvClass::InMargin => c.in_margin += 1,
                SvClass::Misclassified => c.misclassified += 1,
            }
        }
        c
    }
}

/// Places every minority (`+1`) training sample into one of the four margin
/// classes and measures its geometric distance to the hyperplane.
pub fn classify_minority_svs(
    model: &TrainedModel,
    k: &Array2<f64>,
    labels: &[i8],
) -> Result<SvTaxonomy> {
    let norm = weight_norm(model, k);
    if norm == 0.0 {
        return Err(Error::DegenerateModel);
    }
    let margins = margins(model, k, labels)?;
    let points = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == POSITIVE)
        .map(|(index, _)| {
            let margin = margins[index];
            MinorityPoint {
                index,
                class: SvClass::from_margin(margin),
                margin,
                slack: slack_from_margin(margin),
                // y = +1, so |f| = |margin|
                distance: margin.abs() / norm,
            }
        })
        .collect();
    Ok(SvTaxonomy {
        points,
        weight_norm: norm,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::kernel::{gram, KernelSpec};

    struct Raw(Array2<f64>);

    impl KernelMatrix for Raw {
        fn matrix(&self) -> &Array2<f64> {
            &self.0
        }
        fn fingerprint(&self) -> &str {
            "raw"
        }
    }

    fn two_point() -> TrainedModel {
        train_smo(&Raw(Array2::eye(2)), &[1, -1], &[10.0, 10.0], &SmoParams::default()).unwrap()
    }

    #[test]
    fn analytic_two_variable_dual() {
        let m = two_point();
        assert!(m.converged);
        assert!((m.alpha[0] - 1.0).abs() < 1e-12 && (m.alpha[1] - 1.0).abs() < 1e-12);
        assert!(m.bias.abs() < 1e-12);
        assert!((m.objective - 1.0).abs() < 1e-12);
        let f = raw_decision(&m, array![1.0, 0.0].view()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_single_class_and_bad_inputs() {
        let k = Raw(Array2::eye(2));
        assert!(matches!(
            train_smo(&k, &[1, 1], &[1.0, 1.0], &SmoParams::default()),
            Err(Error::SingleClass { .. })
        ));
        assert!(train_smo(&k, &[1, -1], &[1.0, 0.0], &SmoParams::default()).is_err());
        assert!(train_smo(&k, &[1, -1, 1], &[1.0; 3], &SmoParams::default()).is_err());
    }

    #[test]
    fn raw_decision_examples() {
        let mut m = two_point();
        assert!(raw_decision(&m, array![1.0].view()).is_err());
        m.alpha = vec![0.0, 0.0];
        m.bias = 0.25;
        assert_eq!(raw_decision(&m, array![3.0, 7.0].view()).unwrap(), 0.25);
    }

    #[test]
    fn predict_sign_and_tie_rule() {
        let mut m = two_point();
        m.bias = 0.0;
        let rows = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        assert_eq!(predict(&m, &rows).unwrap(), vec![1, -1, 1]);
    }

    #[test]
    fn slack_examples() {
        assert_eq!(slack_from_margin(2.0), 0.0);
        assert_eq!(slack_from_margin(1.0), 0.0);
        // y = +1, f = -0.5
        assert_eq!(slack_from_margin(-0.5), 1.5);
    }

    #[test]
    fn margin_classes() {
        assert_eq!(SvClass::from_margin(1.5), SvClass::Safe);
        assert_eq!(SvClass::from_margin(1.0), SvClass::OnMargin);
        assert_eq!(SvClass::from_margin(0.4), SvClass::InMargin);
        assert_eq!(SvClass::from_margin(0.0), SvClass::InMargin);
        assert_eq!(SvClass::from_margin(-0.2), SvClass::Misclassified);
        assert!((slack_from_margin(-0.2) - 1.2).abs() < 1e-15);
        assert!(!SvClass::Safe.is_support_vector());
    }

    #[test]
    fn taxonomy_on_two_point_model() {
        let m = two_point();
        let k = Array2::eye(2);
        let t = classify_minority_svs(&m, &k, &[1, -1]).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].class, SvClass::OnMargin);
        // ‖w‖ = sqrt(2), |f| = 1
        assert!((t.points[0].distance - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_model_has_no_hyperplane() {
        let mut m = two_point();
        m.alpha = vec![0.0, 0.0];
        assert!(matches!(
            classify_minority_svs(&m, &Array2::eye(2), &[1, -1]),
            Err(Error::DegenerateModel)
        ));
    }

    fn blob_problem() -> (Array2<f64>, Vec<i8>) {
        let ds = crate::data::gen_gaussian_blobs(40, 12, 1.2, 2, 3).unwrap();
        let g = gram(&KernelSpec::Rbf { gamma: 0.5 }, ds.features().view()).unwrap();
        (g.into_inner(), ds.labels().to_vec())
    }

    #[test]
    fn kkt_and_feasibility_on_blobs() {
        let (k, y) = blob_problem();
        let c = vec![1.0; y.len()];
        let params = SmoParams::default();
        let m = train_smo(&Raw(k.clone()), &y, &c, &params).unwrap();
        assert!(m.converged);
        let eq: f64 = m.alpha.iter().zip(&y).map(|(a, &l)| a * l as f64).sum();
        assert!(eq.abs() <= 1e-8);
        let margins = margins(&m, &k, &y).unwrap();
        for ((a, ci), mg) in m.alpha.iter().zip(&c).zip(&margins) {
            assert!(*a >= 0.0 && a <= ci);
            if *a == 0.0 {
                assert!(*mg >= 1.0 - params.tol);
            } else if a < ci {
                assert!((mg - 1.0).abs() <= params.tol);
            } else {
                assert!(*mg <= 1.0 + params.tol);
            }
        }
        // slack two ways
        let xi = slack(&m, &k, &y).unwrap();
        for (i, x) in xi.iter().enumerate() {
            let row = k.row(i);
            let f = raw_decision(&m, row).unwrap();
            assert!((x - (1.0 - y[i] as f64 * f).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (k, y) = blob_problem();
        let c = vec![2.0; y.len()];
        let p = SmoParams { seed: 17, ..SmoParams::default() };
        let a = train_smo(&Raw(k.clone()), &y, &c, &p).unwrap();
        let b = train_smo(&Raw(k), &y, &c, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (k, y) = blob_problem();
        let p = SmoParams { tol: 1e-12, max_passes: 0, seed: 0 };
        let m = train_smo(&Raw(k), &y, &vec![1.0; y.len()], &p).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let (k, y) = blob_problem();
        let m = train_smo(&Raw(k), &y, &vec![1.0; y.len()], &SmoParams::default()).unwrap();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn scaling_c_and_kernel_keeps_signs() {
        // K -> λK with C -> C/λ rescales α by 1/λ and keeps the decision sign
        for lambda in [0.5, 2.0, 10.0] {
            let k = Array2::eye(2) * lambda;
            let m = train_smo(&Raw(k), &[1, -1], &[10.0 / lambda; 2], &SmoParams::default()).unwrap();
            let rows = array![[lambda, 0.0], [0.0, lambda]];
            assert_eq!(predict(&m, &rows).unwrap(), vec![1, -1]);
        }
    }
}
