//! Labeled datasets and the data-shaping steps that run before training:
//! CSV ingestion, stratified splitting, standardization, imbalance-ratio
//! construction (k-means + per-cluster random undersampling) and a Gaussian
//! blob generator used as a desk-scale fixture.

use std::fs::File;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::{NEGATIVE, POSITIVE};

/// Feature matrix with ±1 labels. `+1` marks the minority class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<i8>,
    ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<i8>, ids: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() || labels.len() != ids.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows, {} labels, {} ids",
                features.nrows(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != POSITIVE && l != NEGATIVE) {
            return Err(Error::InvalidDataset(format!("label {bad} is not ±1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Dataset {
            features,
            labels,
            ids,
        })
    }

    /// Builds a dataset whose ids are `0..n`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        let ids = (0..labels.len()).collect();
        Dataset::new(features, labels, ids)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> ClassCounts {
        let positive = self.labels.iter().filter(|&&l| l == POSITIVE).count();
        ClassCounts {
            positive,
            negative: self.labels.len() - positive,
        }
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        self.indices_of(POSITIVE)
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        self.indices_of(NEGATIVE)
    }

    fn indices_of(&self, label: i8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<ClassCounts> {
        let counts = self.class_counts();
        if counts.positive == 0 || counts.negative == 0 {
            return Err(Error::SingleClass {
                positives: counts.positive,
                negatives: counts.negative,
            });
        }
        Ok(counts)
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    /// Appends rows; new rows get ids following the current maximum id.
    pub fn with_appended(&self, features: ArrayView2<'_, f64>, labels: &[i8]) -> Result<Dataset> {
        if features.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: features.ncols(),
            });
        }
        let next_id = self.ids.iter().max().map_or(0, |m| m + 1);
        let stacked = ndarray::concatenate(Axis(0), &[self.features.view(), features])
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        let mut all_labels = self.labels.clone();
        all_labels.extend_from_slice(labels);
        let mut ids = self.ids.clone();
        ids.extend(next_id..next_id + labels.len());
        Dataset::new(stacked, all_labels, ids)
    }

    fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            ids: self.ids.clone(),
        }
    }
}

/// Reads a headered numeric CSV. Rows whose label cell equals
/// `positive_value` become `+1`; all others become `-1`. Every non-label
/// column is a feature, in file order.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_value: &str,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_owned()))?;
    let positive_num = positive_value.trim().parse::<f64>().ok();
    let n_features = header.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let is_positive = cell == positive_value.trim()
                    || matches!((positive_num, cell.parse::<f64>()), (Some(p), Ok(v)) if p == v);
                labels.push(if is_positive { POSITIVE } else { NEGATIVE });
                continue;
            }
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: row + 1,
                    column: header[col].clone(),
                    value: cell.to_owned(),
                })?;
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    let features = Array2::from_shape_vec((labels.len(), n_features), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    let ds = Dataset::from_parts(features, labels)?;
    ds.require_both_classes()?;
    Ok(ds)
}

/// Per-class shuffled split. Each class contributes
/// `round(count * test_fraction)` rows to the test partition; both partitions
/// keep the input row order.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut in_test = vec![false; ds.n_samples()];
    for label in [POSITIVE, NEGATIVE] {
        let mut idx = ds.indices_of(label);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        if idx.len() < 2 || n_test == 0 || n_test == idx.len() {
            return Err(Error::ClassTooSmall {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.n_samples()).partition(|&i| in_test[i]);
    Ok((ds.select(&train), ds.select(&test)))
}

/// Per-column affine scaling fit on training data. Uses the population
/// (1/n) standard deviation; zero-variance columns map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl StandardScaler {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty);
        }
        let mean: Array1<f64> = x.mean_axis(Axis(0)).ok_or(Error::Empty)?;
        let std = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64;
                let sd = var.sqrt();
                // float dust from summing a constant column
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(StandardScaler {
            mean: mean.to_vec(),
            std,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let mut out = x.clone();
        for (mut col, (&m, &sd)) in out
            .axis_iter_mut(Axis(1))
            .zip(self.mean.iter().zip(&self.std))
        {
            if sd == 0.0 {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - m) / sd);
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let mut out = x.clone();
        for (mut col, (&m, &sd)) in out
            .axis_iter_mut(Axis(1))
            .zip(self.mean.iter().zip(&self.std))
        {
            col.mapv_inplace(|v| v * sd + m);
        }
        Ok(out)
    }

    fn check_dim(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        Ok(())
    }
}

/// Fits a scaler on `train` and applies it to `train` and every dataset in
/// `others`.
pub fn standardize(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, StandardScaler)> {
    let scaler = StandardScaler::fit(train.features())?;
    let scaled_train = train.with_features(scaler.transform(train.features())?);
    let scaled_others = others
        .iter()
        .map(|d| Ok(d.with_features(scaler.transform(d.features())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled_train, scaled_others, scaler))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSpec {
    /// Majority samples kept per minority sample, e.g. `70.0` for 70:1.
    pub majority_per_minority: f64,
    pub n_clusters: usize,
    pub seed: u64,
}

impl RatioSpec {
    pub fn new(majority_per_minority: f64, n_clusters: usize, seed: u64) -> Result<Self> {
        let spec = RatioSpec {
            majority_per_minority,
            n_clusters,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.majority_per_minority >= 1.0 && self.majority_per_minority.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "majority_per_minority {} must be >= 1",
                self.majority_per_minority
            )));
        }
        if self.n_clusters == 0 {
            return Err(Error::InvalidParameter("n_clusters must be >= 1".into()));
        }
        Ok(())
    }
}

const KMEANS_MAX_ITER: usize = 100;
const KMEANS_SHIFT_TOL: f64 = 1e-6;

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest_centroid(point: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.outer_iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Lloyd's algorithm with k-means++ seeding. Returns the cluster index of
/// every row. Stops after 100 iterations or when no centroid moves by more
/// than 1e-6.
pub fn kmeans(x: ArrayView2<'_, f64>, n_clusters: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.nrows();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidParameter(format!(
            "cannot form {n_clusters} clusters from {n} points"
        )));
    }
    let mut rng = seed::rng(seed);

    let mut centroids = Array2::<f64>::zeros((n_clusters, x.ncols()));
    centroids.row_mut(0).assign(&x.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = x
        .outer_iter()
        .map(|p| squared_distance(p, centroids.row(0)))
        .collect();
    for c in 1..n_clusters {
        let pick = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(&mut rng),
            // every point coincides with a chosen centroid
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (d, p) in d2.iter_mut().zip(x.outer_iter()) {
            *d = d.min(squared_distance(p, centroids.row(c)));
        }
    }

    let mut assignment = vec![0; n];
    for _ in 0..KMEANS_MAX_ITER {
        assignment = (0..n)
            .into_par_iter()
            .map(|i| nearest_centroid(x.row(i), &centroids))
            .collect();

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; n_clusters];
        for (i, &c) in assignment.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += &x.row(i);
            counts[c] += 1;
        }
        let mut max_shift = 0.0f64;
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let updated = sums.row(c).mapv(|v| v / count as f64);
            max_shift = max_shift.max(squared_distance(updated.view(), centroids.row(c)).sqrt());
            centroids.row_mut(c).assign(&updated);
        }
        if max_shift < KMEANS_SHIFT_TOL {
            break;
        }
    }
    Ok(assignment)
}

/// Splits `target` across clusters in proportion to `sizes` using
/// largest-remainder rounding (ties go to the lower cluster index).
/// Empty clusters receive nothing; the result always sums to `target` and
/// never exceeds a cluster's size.
pub fn largest_remainder_quotas(sizes: &[usize], target: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if target > total {
        return Err(Error::TargetExceedsAvailable {
            target,
            available: total,
        });
    }
    if total == 0 {
        return Ok(vec![0; sizes.len()]);
    }
    let mut quotas = Vec::with_capacity(sizes.len());
    let mut remainders = Vec::with_capacity(sizes.len());
    for (c, &size) in sizes.iter().enumerate() {
        // exact integer arithmetic: floor and remainder of target*size/total
        let num = target as u128 * size as u128;
        quotas.push((num / total as u128) as usize);
        remainders.push((num % total as u128, c));
    }
    let assigned: usize = quotas.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(target - assigned) {
        quotas[c] += 1;
    }
    Ok(quotas)
}

/// Keeps every minority row and undersamples the majority to
/// `round(minority * majority_per_minority)` rows: k-means on the majority,
/// per-cluster quotas proportional to cluster size, then uniform sampling
/// without replacement inside each cluster. Output rows keep input order.
pub fn make_ratio_dataset(ds: &Dataset, spec: &RatioSpec) -> Result<Dataset> {
    spec.validate()?;
    let counts = ds.require_both_classes()?;
    let target = (counts.positive as f64 * spec.majority_per_minority).round() as usize;
    if target > counts.negative {
        return Err(Error::TargetExceedsAvailable {
            target,
            available: counts.negative,
        });
    }
    if spec.n_clusters > counts.negative {
        return Err(Error::InvalidParameter(format!(
            "n_clusters {} exceeds the {} majority samples",
            spec.n_clusters, counts.negative
        )));
    }

    let majority = ds.negative_indices();
    let majority_x = ds.features.select(Axis(0), &majority);
    let assignment = kmeans(majority_x.view(), spec.n_clusters, seed::derive(spec.seed, &[0]))?;

    let mut members = vec![Vec::new(); spec.n_clusters];
    for (local, &c) in assignment.iter().enumerate() {
        members[c].push(majority[local]);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = largest_remainder_quotas(&sizes, target)?;

    let mut rng = seed::rng(seed::derive(spec.seed, &[1]));
    let mut keep = vec![false; ds.n_samples()];
    for i in ds.positive_indices() {
        keep[i] = true;
    }
    for (cluster, &quota) in members.iter().zip(&quotas) {
        for pos in rand::seq::index::sample(&mut rng, cluster.len(), quota) {
            keep[cluster[pos]] = true;
        }
    }
    let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| keep[i]).collect();
    Ok(ds.select(&rows))
}

/// Majority rows ~ N(0, I), minority rows ~ N(separation·1, I). Majority
/// rows come first.
pub fn gen_gaussian_blobs(
    n_majority: usize,
    n_minority: usize,
    separation: f64,
    dim: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_majority == 0 || n_minority == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "blob counts and dimension must be positive".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let n = n_majority + n_minority;
    let mut features = Array2::<f64>::zeros((n, dim));
    for (i, mut row) in features.outer_iter_mut().enumerate() {
        let shift = if i < n_majority { 0.0 } else { separation };
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z + shift;
        }
    }
    let labels = (0..n)
        .map(|i| if i < n_majority { NEGATIVE } else { POSITIVE })
        .collect();
    Dataset::from_parts(features, labels)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use ndarray::array;
    use proptest::prelude::*;

    use super::*;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toy(n_neg: usize, n_pos: usize) -> Dataset {
        let n = n_neg + n_pos;
        let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let labels = (0..n)
            .map(|i| if i < n_neg { NEGATIVE } else { POSITIVE })
            .collect();
        Dataset::from_parts(features, labels).unwrap()
    }

    #[test]
    fn dataset_rejects_bad_labels_and_values() {
        let x = array![[1.0], [2.0]];
        assert!(Dataset::from_parts(x.clone(), vec![1, 0]).is_err());
        assert!(Dataset::from_parts(x, vec![1]).is_err());
        assert!(Dataset::from_parts(array![[f64::NAN]], vec![1]).is_err());
    }

    #[test]
    fn load_two_row_csv() {
        let f = write_csv("a,b,Class\n1.0,2.0,1\n3.0,4.0,0\n");
        let ds = load_csv(f.path(), "Class", "1").unwrap();
        assert_eq!(ds.class_counts(), ClassCounts { positive: 1, negative: 1 });
        assert_eq!(ds.features(), &array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(ds.labels(), &[1, -1]);
    }

    #[test]
    fn load_keeps_column_order_around_label() {
        let f = write_csv("Time,Class,Amount\n0,\"1\",5.5\n1,\"0\",7\n");
        let ds = load_csv(f.path(), "Class", "1").unwrap();
        assert_eq!(ds.features(), &array![[0.0, 5.5], [1.0, 7.0]]);
        assert_eq!(ds.labels(), &[1, -1]);
    }

    #[test]
    fn load_rejects_single_class() {
        let f = write_csv("a,Class\n1,1\n2,1\n");
        assert!(matches!(
            load_csv(f.path(), "Class", "1"),
            Err(Error::SingleClass { positives: 2, negatives: 0 })
        ));
    }

    #[test]
    fn load_reports_bad_cell_and_missing_column() {
        let f = write_csv("a,b,Class\n1,2,1\n3,oops,0\n");
        match load_csv(f.path(), "Class", "1") {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_csv(f.path(), "Label", "1"),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "Class", "1"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn split_counts_follow_rounding() {
        let ds = toy(100, 10);
        let (train, test) = stratified_split(&ds, 0.3, 5).unwrap();
        assert_eq!(test.class_counts(), ClassCounts { positive: 3, negative: 30 });
        assert_eq!(train.class_counts(), ClassCounts { positive: 7, negative: 70 });

        let (train, test) = stratified_split(&toy(2, 2), 0.5, 1).unwrap();
        assert_eq!(train.class_counts(), ClassCounts { positive: 1, negative: 1 });
        assert_eq!(test.class_counts(), ClassCounts { positive: 1, negative: 1 });
    }

    #[test]
    fn split_is_deterministic_and_rejects_tiny_classes() {
        let ds = toy(50, 8);
        assert_eq!(
            stratified_split(&ds, 0.3, 9).unwrap(),
            stratified_split(&ds, 0.3, 9).unwrap()
        );
        assert!(stratified_split(&toy(10, 1), 0.3, 0).is_err());
        // 3 * 0.1 rounds to zero test samples
        assert!(stratified_split(&toy(10, 3), 0.1, 0).is_err());
    }

    #[test]
    fn scaler_examples() {
        let train = Dataset::from_parts(array![[1.0, 5.0], [3.0, 5.0]], vec![1, -1]).unwrap();
        let (scaled, _, scaler) = standardize(&train, &[]).unwrap();
        assert_eq!(scaled.features(), &array![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(scaler.std()[1], 0.0);

        let train = Dataset::from_parts(array![[0.0], [2.0]], vec![1, -1]).unwrap();
        let test = Dataset::from_parts(array![[4.0]], vec![1]).unwrap();
        let (_, others, _) = standardize(&train, &[&test]).unwrap();
        assert_eq!(others[0].features()[[0, 0]], 3.0);
    }

    #[test]
    fn scaler_constant_column_with_float_dust() {
        let x = array![[0.1], [0.1], [0.1]];
        let scaler = StandardScaler::fit(&x).unwrap();
        assert_eq!(scaler.transform(&x).unwrap(), array![[0.0], [0.0], [0.0]]);
    }

    #[test]
    fn quotas_example() {
        assert_eq!(largest_remainder_quotas(&[60, 40], 50).unwrap(), vec![30, 20]);
        assert_eq!(largest_remainder_quotas(&[1, 1, 1], 2).unwrap(), vec![1, 1, 0]);
        assert_eq!(largest_remainder_quotas(&[0, 10], 4).unwrap(), vec![0, 4]);
        assert!(largest_remainder_quotas(&[2, 2], 5).is_err());
    }

    #[test]
    fn ratio_dataset_keeps_minority_and_hits_target() {
        let ds = gen_gaussian_blobs(500, 20, 2.0, 3, 11).unwrap();
        let out = make_ratio_dataset(&ds, &RatioSpec::new(10.0, 8, 3).unwrap()).unwrap();
        assert_eq!(out.class_counts(), ClassCounts { positive: 20, negative: 200 });
        let ids: Vec<usize> = out.ids().to_vec();
        assert!(ds.positive_indices().iter().all(|i| ids.contains(i)));
        assert_eq!(
            out,
            make_ratio_dataset(&ds, &RatioSpec::new(10.0, 8, 3).unwrap()).unwrap()
        );
    }

    #[test]
    fn ratio_one_with_single_cluster_is_plain_undersampling() {
        let ds = gen_gaussian_blobs(100, 10, 1.0, 2, 4).unwrap();
        let out = make_ratio_dataset(&ds, &RatioSpec::new(1.0, 1, 0).unwrap()).unwrap();
        assert_eq!(out.class_counts(), ClassCounts { positive: 10, negative: 10 });
    }

    #[test]
    fn ratio_dataset_errors() {
        let ds = gen_gaussian_blobs(50, 10, 1.0, 2, 4).unwrap();
        assert!(matches!(
            make_ratio_dataset(&ds, &RatioSpec::new(6.0, 2, 0).unwrap()),
            Err(Error::TargetExceedsAvailable { target: 60, available: 50 })
        ));
        assert!(make_ratio_dataset(&ds, &RatioSpec::new(2.0, 51, 0).unwrap()).is_err());
        assert!(RatioSpec::new(0.5, 1, 0).is_err());
        assert!(RatioSpec::new(2.0, 0, 0).is_err());
    }

    #[test]
    fn kmeans_separates_far_groups() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]];
        let a = kmeans(x.view(), 2, 1).unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn blobs_counts_and_determinism() {
        let a = gen_gaussian_blobs(100, 10, 2.0, 2, 42).unwrap();
        assert_eq!(a.n_samples(), 110);
        assert_eq!(a.labels().iter().map(|&l| l as i32).sum::<i32>(), -90);
        let b = gen_gaussian_blobs(100, 10, 2.0, 2, 42).unwrap();
        assert_eq!(a.features(), b.features());
    }

    proptest! {
        #[test]
        fn quotas_sum_to_target(sizes in prop::collection::vec(0usize..200, 1..12), frac in 0.0f64..=1.0) {
            let total: usize = sizes.iter().sum();
            let target = (total as f64 * frac).floor() as usize;
            let q = largest_remainder_quotas(&sizes, target).unwrap();
            prop_assert_eq!(q.iter().sum::<usize>(), target);
            for (qi, si) in q.iter().zip(&sizes) {
                prop_assert!(qi <= si);
                // within one of the exact proportional share
                let exact = target as f64 * *si as f64 / total.max(1) as f64;
                prop_assert!((*qi as f64 - exact).abs() < 1.0 + 1e-9);
            }
        }

        #[test]
        fn split_is_a_partition(n_neg in 2usize..60, n_pos in 2usize..20, seed in any::<u64>()) {
            let ds = toy(n_neg, n_pos);
            if let Ok((train, test)) = stratified_split(&ds, 0.5, seed) {
                let mut ids: Vec<usize> = train.ids().iter().chain(test.ids()).copied().collect();
                ids.sort_unstable();
                prop_assert_eq!(ids, ds.ids().to_vec());
            }
        }

        #[test]
        fn scaler_round_trip(values in prop::collection::vec(-1e6f64..1e6, 6..40)) {
            let x = Array2::from_shape_vec((values.len() / 2, 2), values[..values.len() / 2 * 2].to_vec()).unwrap();
            let scaler = StandardScaler::fit(&x).unwrap();
            let scaled = scaler.transform(&x).unwrap();
            for col in scaled.axis_iter(Axis(1)) {
                prop_assert!(col.mean().unwrap().abs() <= 1e-9);
            }
            let back = scaler.inverse_transform(&scaled).unwrap();
            for (a, b) in back.iter().zip(x.iter()) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
