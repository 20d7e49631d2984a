//! Evaluation of recovered factors: factor match score, model fit, k-means
//! and clustering accuracy.

use itertools::Itertools;
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{CmtfError, Result};
use crate::tensor::DataTensor;

/// Largest size for which assignments are found by enumerating permutations.
const EXHAUSTIVE_LIMIT: usize = 8;
const EXHAUSTIVE_LABEL_LIMIT: usize = 6;

/// Column assignment between estimated and true factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationMatch {
    /// `permutation[r]` is the true column matched to estimated column `r`.
    pub permutation: Vec<usize>,
    /// Score of each matched pair, indexed by estimated column.
    pub scores: Vec<f64>,
}

impl PermutationMatch {
    pub fn mean_score(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

/// Assignment maximizing `Σ_r scores[r, permutation[r]]`.
pub fn best_column_permutation(scores: &Array2<f64>) -> Result<PermutationMatch> {
    let (n, m) = scores.dim();
    if n != m {
        return Err(CmtfError::Dimension(format!("score matrix is {n}x{m}, expected square")));
    }
    let permutation = if n <= EXHAUSTIVE_LIMIT {
        exhaustive_assignment(scores)
    } else {
        hungarian_max(scores)
    };
    let scores = permutation.iter().enumerate().map(|(r, &c)| scores[[r, c]]).collect();
    Ok(PermutationMatch { permutation, scores })
}

fn exhaustive_assignment(scores: &Array2<f64>) -> Vec<usize> {
    let n = scores.nrows();
    let mut best = (f64::NEG_INFINITY, (0..n).collect::<Vec<_>>());
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| scores[[r, c]]).sum();
        if total > best.0 {
            best = (total, perm);
        }
    }
    best.1
}

/// Shortest augmenting path assignment on `-scores`.
fn hungarian_max(scores: &Array2<f64>) -> Vec<usize> {
    let n = scores.nrows();
    let cost = |i: usize, j: usize| -scores[[i - 1, j - 1]];
    // 1-based potentials; `col_owner[j]` is the row assigned to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}

/// `|cos|` between estimated column `r` (rows) and true column `s` (columns).
fn abs_cosines(u_true: ArrayView2<'_, f64>, u_est: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if u_true.dim() != u_est.dim() {
        return Err(CmtfError::Dimension(format!(
            "factor shapes differ: {:?} vs {:?}",
            u_true.dim(),
            u_est.dim()
        )));
    }
    let norms = |m: ArrayView2<'_, f64>, which: &str| -> Result<Vec<f64>> {
        m.axis_iter(Axis(1))
            .enumerate()
            .map(|(r, c)| {
                let n = c.dot(&c).sqrt();
                if n == 0.0 {
                    Err(CmtfError::InvalidArgument(format!("{which} factor column {r} is zero")))
                } else {
                    Ok(n)
                }
            })
            .collect()
    };
    let nt = norms(u_true, "true")?;
    let ne = norms(u_est, "estimated")?;
    let r = u_true.ncols();
    let cross = u_est.t().dot(&u_true);
    Ok(Array2::from_shape_fn((r, r), |(e, t)| {
        (cross[[e, t]].abs() / (ne[e] * nt[t])).min(1.0)
    }))
}

/// Column matching behind [`fms`].
pub fn fms_match(u_true: ArrayView2<'_, f64>, u_est: ArrayView2<'_, f64>) -> Result<PermutationMatch> {
    best_column_permutation(&abs_cosines(u_true, u_est)?)
}

/// Factor match score: mean absolute cosine between matched columns under
/// the best column permutation.
pub fn fms(u_true: ArrayView2<'_, f64>, u_est: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(fms_match(u_true, u_est)?.mean_score())
}

fn squared_difference(a: &DataTensor, b: &DataTensor) -> Result<f64> {
    let mismatch = || CmtfError::Dimension("data and reconstruction shapes differ".into());
    let sq = |x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>| -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(mismatch());
        }
        Ok(x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum())
    };
    match (a, b) {
        (DataTensor::Matrix(x), DataTensor::Matrix(y)) => sq(x.view(), y.view()),
        (DataTensor::Dense(x), DataTensor::Dense(y)) => {
            if x.shape() != y.shape() {
                return Err(mismatch());
            }
            Ok(x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum())
        }
        (DataTensor::Ragged(x), DataTensor::Ragged(y)) => {
            if x.n_slices() != y.n_slices() {
                return Err(mismatch());
            }
            x.slices()
                .iter()
                .zip(y.slices())
                .map(|(p, q)| sq(p.view(), q.view()))
                .sum()
        }
        _ => Err(mismatch()),
    }
}

/// `100 (1 − ‖Z − Ẑ‖² / ‖Z‖²)`.
pub fn fit_percentage(data: &DataTensor, reconstruction: &DataTensor) -> Result<f64> {
    use crate::tensor::FrobeniusNorm;
    let norm = data.squared_norm();
    if norm == 0.0 {
        return Err(CmtfError::InvalidArgument("fit of zero-norm data".into()));
    }
    Ok(100.0 * (1.0 - squared_difference(data, reconstruction)? / norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_plus_plus<R: Rng + ?Sized>(points: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    centroids.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = points.rows().into_iter().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: ArrayView2<'_, f64>, mut centroids: Array2<f64>, iters: usize) -> KMeansResult {
    let n = points.nrows();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..iters {
        let mut changed = false;
        for (i, p) in points.rows().into_iter().enumerate() {
            let best = (0..k)
                .map(|c| (c, sq_dist(p, centroids.row(c))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap_or(0);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, p) in points.rows().into_iter().enumerate() {
            let mut row = sums.row_mut(labels[i]);
            row += &p;
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            }
        }
    }
    let inertia = points
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum();
    KMeansResult {
        labels,
        centroids,
        inertia,
    }
}

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs by
/// within-cluster sum of squares.
pub fn kmeans_with<R: Rng + ?Sized>(
    points: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut R,
    restarts: usize,
    iters: usize,
) -> Result<KMeansResult> {
    if k == 0 || points.nrows() < k {
        return Err(CmtfError::InvalidArgument(format!(
            "k-means needs 1 <= k <= number of points, got k={k} with {} points",
            points.nrows()
        )));
    }
    if restarts == 0 || iters == 0 {
        return Err(CmtfError::InvalidArgument("k-means needs >= 1 restart and iteration".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts {
        let init = kmeans_plus_plus(points, k, rng);
        let run = lloyd(points, init, iters);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// [`kmeans_with`] using 10 restarts of at most 300 iterations.
pub fn kmeans<R: Rng + ?Sized>(points: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    Ok(kmeans_with(points, k, rng, 10, 300)?.labels)
}

/// Percentage of points whose labels agree under the best relabeling.
pub fn clustering_accuracy(labels_true: &[usize], labels_est: &[usize]) -> Result<f64> {
    if labels_true.len() != labels_est.len() {
        return Err(CmtfError::Dimension(format!(
            "{} true labels vs {} estimated",
            labels_true.len(),
            labels_est.len()
        )));
    }
    if labels_true.is_empty() {
        return Err(CmtfError::InvalidArgument("no labels".into()));
    }
    let k = labels_true
        .iter()
        .chain(labels_est)
        .max()
        .map_or(0, |m| m + 1);
    let mut counts = Array2::<f64>::zeros((k, k));
    for (&t, &e) in labels_true.iter().zip(labels_est) {
        counts[[e, t]] += 1.0;
    }
    let permutation = if k <= EXHAUSTIVE_LABEL_LIMIT {
        exhaustive_assignment(&counts)
    } else {
        hungarian_max(&counts)
    };
    let agree: f64 = permutation.iter().enumerate().map(|(e, &t)| counts[[e, t]]).sum();
    Ok(100.0 * agree / labels_true.len() as f64)
}
