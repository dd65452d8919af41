//! Shared unsupervised kernels: k-means, cluster-and-label semi-supervised
//! labeling, and Gaussian mixture fitting by expectation-maximization.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::util::{mix_seed, squared_distance};
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("empty input")]
    EmptyInput,
    #[error("requested {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("no labeled points")]
    NoLabeledPoints,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Result of Lloyd's algorithm with k-means++ seeding.
#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub centroids: Vec<Point>,
    pub assignment: Vec<usize>,
    pub sse: f64,
    /// SSE after every assignment recomputation of the winning restart;
    /// non-increasing from the seeding assignment to convergence.
    pub sse_trace: Vec<f64>,
}

fn assign(points: &[Point], centroids: &[Point]) -> (Vec<usize>, f64) {
    let mut assignment = Vec::with_capacity(points.len());
    let mut sse = 0.0;
    for p in points {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = squared_distance(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        assignment.push(best);
        sse += best_d;
    }
    (assignment, sse)
}

fn means(points: &[Point], assignment: &[usize], k: usize, dim: usize) -> (Vec<Point>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            for v in sum.iter_mut() {
                *v /= n as f64;
            }
        }
    }
    (sums, counts)
}

fn kmeans_pp_init(points: &[Point], k: usize, rng: &mut ChaCha20Rng) -> Vec<Point> {
    let mut centroids: Vec<Point> = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    centroids.push(points[first].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass is on already-chosen positions (duplicate
            // points); fall back to uniform choice.
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            let nd = squared_distance(p, centroids.last().unwrap());
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

fn lloyd_iterations(
    points: &[Point],
    centroids: &mut Vec<Point>,
    assignment: &mut Vec<usize>,
    k: usize,
    max_iter: usize,
    tol: f64,
    trace: &mut Vec<f64>,
) {
    let dim = points[0].len();
    for _ in 0..max_iter {
        let (mut new_centroids, counts) = means(points, assignment, k, dim);
        // Re-seed empty clusters at the point currently farthest from its
        // own centroid, taking distinct points for multiple empties.
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| {
                    let da = squared_distance(&points[a], &centroids[assignment[a]]);
                    let db = squared_distance(&points[b], &centroids[assignment[b]]);
                    da.partial_cmp(&db).unwrap()
                });
            if let Some(i) = far {
                taken.push(i);
                new_centroids[j] = points[i].clone();
            }
        }
        let moved = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        *centroids = new_centroids;
        let (next, sse) = assign(points, centroids);
        trace.push(sse);
        let stable = next == *assignment;
        *assignment = next;
        if stable || moved < tol {
            break;
        }
    }
}

/// One pass of single-point relocations: moves a point to another cluster
/// whenever that strictly lowers the SSE, with the size-corrected Hartigan
/// deltas. Returns whether anything moved. Lloyd alone stalls in poor local
/// minima on small inputs; relocations escape many of them.
fn relocation_pass(
    points: &[Point],
    centroids: &mut [Point],
    assignment: &mut [usize],
    counts: &mut [usize],
) -> bool {
    let k = centroids.len();
    let mut moved = false;
    for (i, p) in points.iter().enumerate() {
        let from = assignment[i];
        if counts[from] <= 1 {
            continue;
        }
        let n_from = counts[from] as f64;
        let removal_gain = n_from / (n_from - 1.0) * squared_distance(p, &centroids[from]);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            if j == from {
                continue;
            }
            let n_j = counts[j] as f64;
            let insertion_cost = n_j / (n_j + 1.0) * squared_distance(p, &centroids[j]);
            let delta = insertion_cost - removal_gain;
            if delta < -1e-12 && best.map_or(true, |(_, d)| delta < d) {
                best = Some((j, delta));
            }
        }
        if let Some((to, _)) = best {
            // Incremental centroid updates keep the pass O(n k d).
            let n_from = counts[from] as f64;
            let n_to = counts[to] as f64;
            for d in 0..p.len() {
                centroids[from][d] = (centroids[from][d] * n_from - p[d]) / (n_from - 1.0);
                centroids[to][d] = (centroids[to][d] * n_to + p[d]) / (n_to + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            assignment[i] = to;
            moved = true;
        }
    }
    moved
}

fn lloyd(points: &[Point], k: usize, max_iter: usize, tol: f64, rng: &mut ChaCha20Rng) -> KMeansModel {
    let dim = points[0].len();
    let mut centroids = kmeans_pp_init(points, k, rng);
    let (mut assignment, seed_sse) = assign(points, &centroids);
    let mut trace = vec![seed_sse];
    // Alternate Lloyd convergence with relocation passes until neither
    // improves; the final state is a fixed point of both.
    for _ in 0..max_iter {
        lloyd_iterations(points, &mut centroids, &mut assignment, k, max_iter, tol, &mut trace);
        let (m, mut counts) = means(points, &assignment, k, dim);
        centroids = m;
        if !relocation_pass(points, &mut centroids, &mut assignment, &mut counts) {
            break;
        }
        let (_, sse) = assign(points, &centroids);
        trace.push(sse);
    }
    let (centroids, _) = means(points, &assignment, k, dim);
    let (assignment, sse) = assign(points, &centroids);
    trace.push(sse);
    KMeansModel {
        centroids,
        assignment,
        sse,
        sse_trace: trace,
    }
}

/// Lloyd's k-means with k-means++ seeding. Deterministic for a fixed seed;
/// runs a handful of restarts internally and keeps the lowest-SSE model.
pub fn kmeans(
    points: &[Point],
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<KMeansModel, ClusteringError> {
    if points.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    if k == 0 || k > points.len() {
        return Err(ClusteringError::TooFewPoints { k, n: points.len() });
    }
    // Small inputs are cheap to restart and show up in oracle comparisons
    // against exhaustive partitioning, so they get more attempts.
    let restarts = match points.len() {
        0..=16 => 24,
        17..=64 => 4,
        _ => 1,
    };
    let mut best: Option<KMeansModel> = None;
    for r in 0..restarts {
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(&[seed, 0x6b6d, r]));
        let model = lloyd(points, k, max_iter, tol, &mut rng);
        if best.as_ref().map_or(true, |b| model.sse < b.sse) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Labels `unlabeled` by clustering the union of labeled and unlabeled
/// points with k-means and giving every cluster the majority label of its
/// labeled members. Clusters without labeled members inherit the label of
/// the nearest (by centroid) cluster that has one. Majority ties break
/// toward the smallest label index.
pub fn cluster_and_label(
    labeled: &[Point],
    labels: &[Label],
    unlabeled: &[Point],
    k: usize,
    seed: u64,
) -> Result<Vec<Label>, ClusteringError> {
    if labeled.is_empty() {
        return Err(ClusteringError::NoLabeledPoints);
    }
    debug_assert_eq!(labeled.len(), labels.len());
    let union: Vec<Point> = labeled.iter().chain(unlabeled).cloned().collect();
    if k > union.len() {
        return Err(ClusteringError::TooFewPoints { k, n: union.len() });
    }
    let model = kmeans(&union, k, 100, 1e-9, seed)?;

    let class_count = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut votes = vec![vec![0usize; class_count]; k];
    for (i, y) in labels.iter().enumerate() {
        votes[model.assignment[i]][*y] += 1;
    }
    let mut cluster_label: Vec<Option<Label>> = votes
        .iter()
        .map(|v| {
            let best = v.iter().max().copied().unwrap_or(0);
            if best == 0 {
                None
            } else {
                v.iter().position(|&n| n == best)
            }
        })
        .collect();
    // Unlabeled clusters borrow from the nearest labeled cluster.
    let labeled_clusters: Vec<usize> = (0..k).filter(|&j| cluster_label[j].is_some()).collect();
    for j in 0..k {
        if cluster_label[j].is_none() {
            let nearest = labeled_clusters
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    squared_distance(&model.centroids[j], &model.centroids[a])
                        .partial_cmp(&squared_distance(&model.centroids[j], &model.centroids[b]))
                        .unwrap()
                })
                .expect("at least one labeled point implies a labeled cluster");
            cluster_label[j] = cluster_label[nearest];
        }
    }
    Ok(model.assignment[labeled.len()..]
        .iter()
        .map(|&j| cluster_label[j].expect("all clusters labeled"))
        .collect())
}

/// Gaussian mixture parameters: mixing weights, component means, and
/// component covariances. `log_likelihood_trace` records the total data
/// log-likelihood after each EM iteration.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covariances: Vec<DMatrix<f64>>,
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmModel {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

fn component_log_density(mean: &[f64], chol: &Cholesky<f64, nalgebra::Dyn>, x: &[f64]) -> f64 {
    let d = mean.len() as f64;
    let diff = DVector::from_iterator(mean.len(), x.iter().zip(mean).map(|(a, b)| a - b));
    let solved = chol.solve(&diff);
    let maha = diff.dot(&solved);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + maha)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Raises each covariance so its minimum eigenvalue is at least `floor`.
fn apply_floor(cov: &mut DMatrix<f64>, floor: f64) {
    let sym = nalgebra::SymmetricEigen::new(cov.clone());
    let min_eig = sym.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < floor {
        let bump = floor - min_eig.max(0.0).min(floor);
        for i in 0..cov.nrows() {
            cov[(i, i)] += bump;
        }
    }
}

fn cholesky_of(cov: &DMatrix<f64>) -> Cholesky<f64, nalgebra::Dyn> {
    match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            // Numerically indefinite despite the eigenvalue floor; nudge the
            // diagonal until factorization succeeds.
            let mut c = cov.clone();
            let mut bump = 1e-12;
            loop {
                for i in 0..c.nrows() {
                    c[(i, i)] += bump;
                }
                if let Some(ch) = c.clone().cholesky() {
                    return ch;
                }
                bump *= 10.0;
            }
        }
    }
}

/// Fits a `component_count`-component Gaussian mixture by EM from a k-means
/// initialization. The per-iteration log-likelihood is non-decreasing; EM
/// stops when the gain drops below `tol` or after `max_iter` iterations.
pub fn gmm_fit(
    points: &[Point],
    component_count: usize,
    max_iter: usize,
    tol: f64,
    cov_floor: f64,
    seed: u64,
) -> Result<GmmModel, ClusteringError> {
    if points.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    if component_count == 0 || component_count > points.len() {
        return Err(ClusteringError::TooFewPoints {
            k: component_count,
            n: points.len(),
        });
    }
    let n = points.len();
    let dim = points[0].len();
    let km = kmeans(points, component_count, 50, 1e-9, mix_seed(&[seed, 0x9333]))?;

    let mut weights = vec![0.0; component_count];
    let mut means_v: Vec<Point> = vec![vec![0.0; dim]; component_count];
    let mut covs: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, dim); component_count];
    {
        let mut counts = vec![0usize; component_count];
        for (p, &a) in points.iter().zip(&km.assignment) {
            counts[a] += 1;
            for (m, v) in means_v[a].iter_mut().zip(p) {
                *m += v;
            }
        }
        for (kx, &c) in counts.iter().enumerate() {
            let c = c.max(1);
            for m in means_v[kx].iter_mut() {
                *m /= c as f64;
            }
        }
        for (p, &a) in points.iter().zip(&km.assignment) {
            for i in 0..dim {
                for j in 0..dim {
                    covs[a][(i, j)] += (p[i] - means_v[a][i]) * (p[j] - means_v[a][j]);
                }
            }
        }
        for (kx, &c) in counts.iter().enumerate() {
            let denom = c.max(1) as f64;
            covs[kx] /= denom;
            apply_floor(&mut covs[kx], cov_floor);
            weights[kx] = c as f64 / n as f64;
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
    }

    let mut trace = Vec::new();
    let mut resp = vec![vec![0.0f64; component_count]; n];
    for _ in 0..max_iter {
        // E-step.
        let chols: Vec<_> = covs.iter().map(cholesky_of).collect();
        let mut ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let logs: Vec<f64> = (0..component_count)
                .map(|kx| weights[kx].ln() + component_log_density(&means_v[kx], &chols[kx], p))
                .collect();
            let norm = log_sum_exp(&logs);
            ll += norm;
            for kx in 0..component_count {
                resp[i][kx] = (logs[kx] - norm).exp();
            }
        }
        let converged = trace
            .last()
            .map_or(false, |&prev: &f64| ll - prev < tol && ll.is_finite());
        trace.push(ll);
        if converged {
            break;
        }
        // M-step.
        for kx in 0..component_count {
            let nk: f64 = resp.iter().map(|r| r[kx]).sum::<f64>().max(1e-12);
            weights[kx] = nk / n as f64;
            let mut mean = vec![0.0; dim];
            for (p, r) in points.iter().zip(&resp) {
                for (m, v) in mean.iter_mut().zip(p) {
                    *m += r[kx] * v;
                }
            }
            for m in &mut mean {
                *m /= nk;
            }
            let mut cov = DMatrix::zeros(dim, dim);
            for (p, r) in points.iter().zip(&resp) {
                for i in 0..dim {
                    for j in 0..dim {
                        cov[(i, j)] += r[kx] * (p[i] - mean[i]) * (p[j] - mean[j]);
                    }
                }
            }
            cov /= nk;
            apply_floor(&mut cov, cov_floor);
            means_v[kx] = mean;
            covs[kx] = cov;
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
    }

    Ok(GmmModel {
        weights,
        means: means_v,
        covariances: covs,
        log_likelihood_trace: trace,
    })
}

/// Log-density of the mixture at `x`, computed through log-sum-exp.
pub fn gmm_logpdf(model: &GmmModel, x: &[f64]) -> Result<f64, ClusteringError> {
    if x.len() != model.dimension() {
        return Err(ClusteringError::DimensionMismatch {
            expected: model.dimension(),
            got: x.len(),
        });
    }
    let logs: Vec<f64> = model
        .weights
        .iter()
        .zip(&model.means)
        .zip(&model.covariances)
        .map(|((w, mean), cov)| w.ln() + component_log_density(mean, &cholesky_of(cov), x))
        .collect();
    Ok(log_sum_exp(&logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn pts(raw: &[(f64, f64)]) -> Vec<Point> {
        raw.iter().map(|&(x, y)| vec![x, y]).collect()
    }

    /// Exhaustive best SSE over all assignments into two nonempty clusters.
    fn best_two_partition_sse(points: &[Point]) -> f64 {
        let n = points.len();
        let dim = points[0].len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut sums = [vec![0.0; dim], vec![0.0; dim]];
            let mut counts = [0usize; 2];
            for (i, p) in points.iter().enumerate() {
                let side = ((mask >> i) & 1) as usize;
                counts[side] += 1;
                for (s, v) in sums[side].iter_mut().zip(p) {
                    *s += v;
                }
            }
            let mut sse = 0.0;
            for (i, p) in points.iter().enumerate() {
                let side = ((mask >> i) & 1) as usize;
                sse += p
                    .iter()
                    .zip(&sums[side])
                    .map(|(v, s)| {
                        let m = s / counts[side] as f64;
                        (v - m) * (v - m)
                    })
                    .sum::<f64>();
            }
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn kmeans_symmetric_pairs() {
        let points = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let model = kmeans(&points, 2, 100, 1e-9, 3).unwrap();
        let mut cs = model.centroids.clone();
        cs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_relative_eq!(cs[0][0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(cs[0][1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(cs[1][0], 10.0, epsilon = 1e-12);
        assert_relative_eq!(cs[1][1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(model.sse, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let points = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let model = kmeans(&points, 3, 100, 1e-9, 1).unwrap();
        assert!(model.sse.abs() < 1e-15);
    }

    #[test]
    fn kmeans_matches_exhaustive_two_partition_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for trial in 0..50 {
            let points: Vec<Point> = (0..8)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let model = kmeans(&points, 2, 200, 1e-12, trial).unwrap();
            let oracle = best_two_partition_sse(&points);
            assert!(
                (model.sse - oracle).abs() < 1e-9,
                "trial {trial}: kmeans {} vs oracle {}",
                model.sse,
                oracle
            );
        }
    }

    #[test]
    fn kmeans_terminal_assignment_is_fixed_point() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let points: Vec<Point> = (0..40)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let model = kmeans(&points, 4, 200, 1e-12, 11).unwrap();
        let (rea, sse) = assign(&points, &model.centroids);
        assert_eq!(rea, model.assignment);
        assert_relative_eq!(sse, model.sse, epsilon = 1e-9);
        // Centroids are the means of their assigned points.
        let (m, counts) = means(&points, &model.assignment, 4, 2);
        for (j, c) in model.centroids.iter().enumerate() {
            if counts[j] > 0 {
                for (a, b) in c.iter().zip(&m[j]) {
                    assert_relative_eq!(a, b, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn kmeans_errors() {
        assert!(matches!(
            kmeans(&[], 1, 10, 1e-9, 0),
            Err(ClusteringError::EmptyInput)
        ));
        let points = pts(&[(0.0, 0.0)]);
        assert!(matches!(
            kmeans(&points, 2, 10, 1e-9, 0),
            Err(ClusteringError::TooFewPoints { k: 2, n: 1 })
        ));
    }

    #[test]
    fn cluster_and_label_separable() {
        let labeled = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        let labels = vec![0, 1];
        let unlabeled = pts(&[(0.1, 0.0), (9.9, 0.0)]);
        let pred = cluster_and_label(&labeled, &labels, &unlabeled, 2, 7).unwrap();
        assert_eq!(pred, vec![0, 1]);
    }

    #[test]
    fn cluster_and_label_single_class() {
        let labeled = pts(&[(0.0, 0.0), (5.0, 5.0)]);
        let labels = vec![0, 0];
        let unlabeled = pts(&[(1.0, 1.0), (4.0, 4.0), (2.0, 3.0)]);
        for k in 1..=4 {
            let pred = cluster_and_label(&labeled, &labels, &unlabeled, k, 7).unwrap();
            assert!(pred.iter().all(|&y| y == 0), "k={k}");
        }
    }

    #[test]
    fn cluster_and_label_bimodal_class_with_seeds() {
        // Three well-separated blobs; class 0 is bimodal. One labeled seed
        // per blob, k = 3.
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let centers = [(0.0, 0.0), (8.0, 0.0), (4.0, 7.0)];
        let blob_class = [0usize, 0, 1];
        let mut unlabeled = Vec::new();
        let mut truth = Vec::new();
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..30 {
                unlabeled.push(vec![
                    cx + rng.gen_range(-0.5..0.5),
                    cy + rng.gen_range(-0.5..0.5),
                ]);
                truth.push(blob_class[c]);
            }
        }
        let labeled = pts(&[(0.0, 0.0), (8.0, 0.0), (4.0, 7.0)]);
        let labels = vec![0, 0, 1];
        let pred = cluster_and_label(&labeled, &labels, &unlabeled, 3, 23).unwrap();
        assert_eq!(pred, truth);
    }

    #[test]
    fn cluster_and_label_errors() {
        assert!(matches!(
            cluster_and_label(&[], &[], &pts(&[(0.0, 0.0)]), 1, 0),
            Err(ClusteringError::NoLabeledPoints)
        ));
        let labeled = pts(&[(0.0, 0.0)]);
        assert!(matches!(
            cluster_and_label(&labeled, &[0], &[], 5, 0),
            Err(ClusteringError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn gmm_single_component_closed_form() {
        let points = pts(&[(0.0, 0.0), (2.0, 0.0), (1.0, 3.0), (3.0, 1.0)]);
        let model = gmm_fit(&points, 1, 100, 1e-12, 1e-9, 0).unwrap();
        assert_relative_eq!(model.weights[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(model.means[0][0], 1.5, epsilon = 1e-9);
        assert_relative_eq!(model.means[0][1], 1.0, epsilon = 1e-9);
        // Maximum-likelihood (1/N) covariance.
        let mut cov = DMatrix::zeros(2, 2);
        for p in &points {
            let dx = p[0] - 1.5;
            let dy = p[1] - 1.0;
            cov[(0, 0)] += dx * dx / 4.0;
            cov[(0, 1)] += dx * dy / 4.0;
            cov[(1, 0)] += dy * dx / 4.0;
            cov[(1, 1)] += dy * dy / 4.0;
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(model.covariances[0][(i, j)], cov[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn gmm_two_blobs_recovers_generating_parameters() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let mut points = Vec::new();
        for _ in 0..200 {
            points.push(vec![
                rng.sample::<f64, _>(StandardNormal) * 0.3,
                rng.sample::<f64, _>(StandardNormal) * 0.3,
            ]);
        }
        for _ in 0..200 {
            points.push(vec![
                8.0 + rng.sample::<f64, _>(StandardNormal) * 0.3,
                rng.sample::<f64, _>(StandardNormal) * 0.3,
            ]);
        }
        let model = gmm_fit(&points, 2, 200, 1e-10, 1e-6, 5).unwrap();
        let mut ws = model.weights.clone();
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ws[0] - 0.5).abs() < 0.05 && (ws[1] - 0.5).abs() < 0.05);
        let mut ms: Vec<&Point> = model.means.iter().collect();
        ms.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!(ms[0][0].abs() < 0.1 && ms[0][1].abs() < 0.1);
        assert!((ms[1][0] - 8.0).abs() < 0.1 && ms[1][1].abs() < 0.1);
    }

    #[test]
    fn gmm_log_likelihood_monotone() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for trial in 0..20 {
            let points: Vec<Point> = (0..60)
                .map(|_| {
                    vec![
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    ]
                })
                .collect();
            let model = gmm_fit(&points, 3, 60, 0.0, 1e-6, trial).unwrap();
            for w in model.log_likelihood_trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "trial {trial}: ll dropped {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn gmm_weights_sum_to_one_and_floor_held() {
        let points = pts(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        let model = gmm_fit(&points, 2, 50, 1e-9, 1e-6, 2).unwrap();
        assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for cov in &model.covariances {
            let eig = nalgebra::SymmetricEigen::new(cov.clone());
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= 1e-6 - 1e-12, "floor violated: {min}");
        }
    }

    #[test]
    fn gmm_logpdf_standard_normal_mode() {
        let model = GmmModel {
            weights: vec![1.0],
            means: vec![vec![0.0, 0.0]],
            covariances: vec![DMatrix::identity(2, 2)],
            log_likelihood_trace: vec![],
        };
        let v = gmm_logpdf(&model, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(v, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-12);
    }

    #[test]
    fn gmm_logpdf_degenerate_mixture_equals_single() {
        let single = GmmModel {
            weights: vec![1.0],
            means: vec![vec![0.3, -0.2]],
            covariances: vec![DMatrix::identity(2, 2) * 0.7],
            log_likelihood_trace: vec![],
        };
        let double = GmmModel {
            weights: vec![0.5, 0.5],
            means: vec![vec![0.3, -0.2], vec![0.3, -0.2]],
            covariances: vec![DMatrix::identity(2, 2) * 0.7, DMatrix::identity(2, 2) * 0.7],
            log_likelihood_trace: vec![],
        };
        let x = [1.0, 2.0];
        assert_relative_eq!(
            gmm_logpdf(&single, &x).unwrap(),
            gmm_logpdf(&double, &x).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gmm_logpdf_matches_naive_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let model = GmmModel {
            weights: vec![0.3, 0.7],
            means: vec![vec![0.0, 1.0], vec![2.0, -1.0]],
            covariances: vec![
                DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.8]),
                DMatrix::from_row_slice(2, 2, &[1.2, -0.3, -0.3, 0.9]),
            ],
            log_likelihood_trace: vec![],
        };
        for _ in 0..20 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let mut naive = 0.0;
            for k in 0..2 {
                let cov = &model.covariances[k];
                let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
                let inv = [
                    [cov[(1, 1)] / det, -cov[(0, 1)] / det],
                    [-cov[(1, 0)] / det, cov[(0, 0)] / det],
                ];
                let dx = x[0] - model.means[k][0];
                let dy = x[1] - model.means[k][1];
                let maha = dx * (inv[0][0] * dx + inv[0][1] * dy)
                    + dy * (inv[1][0] * dx + inv[1][1] * dy);
                naive += model.weights[k]
                    * (-0.5 * maha).exp()
                    / (2.0 * std::f64::consts::PI * det.sqrt());
            }
            assert_relative_eq!(
                gmm_logpdf(&model, &x).unwrap(),
                naive.ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn gmm_logpdf_dimension_mismatch() {
        let model = GmmModel {
            weights: vec![1.0],
            means: vec![vec![0.0, 0.0]],
            covariances: vec![DMatrix::identity(2, 2)],
            log_likelihood_trace: vec![],
        };
        assert!(matches!(
            gmm_logpdf(&model, &[0.0]),
            Err(ClusteringError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
