//! SCARGC with a 1-NN classifier: pool unlabeled instances, cluster the
//! full pool, map current centroids to the labeled centroids of the
//! previous pool, relabel, and replace the classifier's reference set.

use thiserror::Error;

use crate::clustering::{kmeans, ClusteringError};
use crate::util::{mix_seed, nearest_index};
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum ScargcError {
    #[error("empty initial labeled set")]
    EmptyInitial,
    #[error("cluster count {k} is below the class count {classes}")]
    TooFewClusters { k: usize, classes: usize },
    #[error("pool size {pool} is below the cluster count {k}")]
    PoolTooSmall { pool: usize, k: usize },
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

#[derive(Debug, Clone)]
pub struct ScargcLearner {
    k: usize,
    pool_size: usize,
    seed: u64,
    past_centroids: Vec<(Point, Label)>,
    reference: Vec<(Point, Label)>,
    pool: Vec<Point>,
    flush_count: u64,
}

/// Assigns each new centroid the label of its nearest past centroid
/// (Euclidean, ties toward the lowest past index). Each centroid is mapped
/// independently; no one-to-one assignment is enforced.
fn map_centroids(new_centroids: &[Point], past: &[(Point, Label)]) -> Vec<Label> {
    new_centroids
        .iter()
        .map(|c| {
            let i = nearest_index(c, past.iter().map(|(p, _)| p.as_slice()))
                .expect("past centroids nonempty");
            past[i].1
        })
        .collect()
}

impl ScargcLearner {
    /// Builds the initial classifier and centroid set. With `k` equal to
    /// the class count the classes themselves are the initial clusters;
    /// otherwise the labeled data is k-means clustered and each cluster
    /// takes the majority label of its members.
    pub fn new(
        initial: &[(Point, Label)],
        k: usize,
        pool_size: usize,
        class_count: usize,
        seed: u64,
    ) -> Result<Self, ScargcError> {
        if initial.is_empty() {
            return Err(ScargcError::EmptyInitial);
        }
        if k < class_count {
            return Err(ScargcError::TooFewClusters {
                k,
                classes: class_count,
            });
        }
        if pool_size < k {
            return Err(ScargcError::PoolTooSmall { pool: pool_size, k });
        }
        let past_centroids = if k == class_count {
            let dim = initial[0].0.len();
            let mut sums = vec![vec![0.0; dim]; class_count];
            let mut counts = vec![0usize; class_count];
            for (x, y) in initial {
                counts[*y] += 1;
                for (s, v) in sums[*y].iter_mut().zip(x) {
                    *s += v;
                }
            }
            sums.into_iter()
                .enumerate()
                .map(|(c, mut s)| {
                    for v in s.iter_mut() {
                        *v /= counts[c].max(1) as f64;
                    }
                    (s, c)
                })
                .collect()
        } else {
            let points: Vec<Point> = initial.iter().map(|(x, _)| x.clone()).collect();
            let model = kmeans(&points, k, 100, 1e-9, mix_seed(&[seed, 0x5c, 0]))?;
            let mut votes = vec![vec![0usize; class_count]; k];
            for ((_, y), &a) in initial.iter().zip(&model.assignment) {
                votes[a][*y] += 1;
            }
            model
                .centroids
                .into_iter()
                .zip(votes)
                .map(|(c, v)| {
                    let best = v.iter().max().copied().unwrap_or(0);
                    let label = v.iter().position(|&n| n == best).unwrap_or(0);
                    (c, label)
                })
                .collect()
        };
        Ok(ScargcLearner {
            k,
            pool_size,
            seed,
            past_centroids,
            reference: initial.to_vec(),
            pool: Vec::new(),
            flush_count: 0,
        })
    }

    /// Predicts each instance with the current 1-NN reference set as it
    /// arrives (prequential), accumulating instances into the pool; every
    /// time the pool fills, re-clusters it, relabels by nearest past
    /// centroid, and replaces the reference set and centroids.
    pub fn step(&mut self, batch: &[Point]) -> Result<Vec<Label>, ScargcError> {
        let mut predictions = Vec::with_capacity(batch.len());
        for x in batch {
            let i = nearest_index(x, self.reference.iter().map(|(p, _)| p.as_slice()))
                .expect("reference set nonempty");
            predictions.push(self.reference[i].1);
            self.pool.push(x.clone());
            if self.pool.len() == self.pool_size {
                self.flush()?;
            }
        }
        Ok(predictions)
    }

    fn flush(&mut self) -> Result<(), ScargcError> {
        let model = kmeans(
            &self.pool,
            self.k,
            100,
            1e-9,
            mix_seed(&[self.seed, 0x5c, 1 + self.flush_count]),
        )?;
        let cluster_labels = map_centroids(&model.centroids, &self.past_centroids);
        self.reference = self
            .pool
            .drain(..)
            .zip(&model.assignment)
            .map(|(x, &a)| (x, cluster_labels[a]))
            .collect();
        self.past_centroids = model
            .centroids
            .into_iter()
            .zip(cluster_labels)
            .collect();
        self.flush_count += 1;
        Ok(())
    }

    pub fn flush_count(&self) -> u64 {
        self.flush_count
    }

    pub fn past_centroids(&self) -> &[(Point, Label)] {
        &self.past_centroids
    }
}
