//! MClassification: fully online classification by labeled micro-clusters
//! with a maximum radius threshold.
//!
//! A micro-cluster stores the sufficient statistics `(N, LS, SS)` of its
//! members plus a class label, so centroid and radius queries are O(d) and
//! absorbing an instance is an O(d) update. Micro-clusters are never
//! deleted or merged; the nearest-centroid search is an exact linear scan.

use thiserror::Error;

use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum MClassificationError {
    #[error("empty initial labeled set")]
    EmptyInitial,
    #[error("micro-cluster radius threshold must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// Sufficient statistics of a set of points sharing one label: the count,
/// the per-coordinate linear sum, and the per-coordinate square sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroCluster {
    pub count: usize,
    pub linear_sum: Vec<f64>,
    pub square_sum: Vec<f64>,
    pub label: Label,
}

impl MicroCluster {
    pub fn singleton(x: &[f64], label: Label) -> Self {
        MicroCluster {
            count: 1,
            linear_sum: x.to_vec(),
            square_sum: x.iter().map(|v| v * v).collect(),
            label,
        }
    }

    /// LS / N.
    pub fn centroid(&self) -> Point {
        let n = self.count as f64;
        self.linear_sum.iter().map(|v| v / n).collect()
    }

    /// Euclidean norm of the per-coordinate deviation vector
    /// sqrt(sum_j(SS_j/N - (LS_j/N)^2)), with negative per-coordinate terms
    /// clamped to zero before the root.
    pub fn radius(&self) -> f64 {
        let n = self.count as f64;
        self.linear_sum
            .iter()
            .zip(&self.square_sum)
            .map(|(ls, ss)| (ss / n - (ls / n) * (ls / n)).max(0.0))
            .sum::<f64>()
            .sqrt()
    }

    /// Radius the cluster would have after absorbing `x`.
    pub fn radius_with(&self, x: &[f64]) -> f64 {
        let n = (self.count + 1) as f64;
        self.linear_sum
            .iter()
            .zip(&self.square_sum)
            .zip(x)
            .map(|((ls, ss), v)| {
                let ls = ls + v;
                let ss = ss + v * v;
                (ss / n - (ls / n) * (ls / n)).max(0.0)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn absorb(&mut self, x: &[f64]) {
        self.count += 1;
        for (s, v) in self.linear_sum.iter_mut().zip(x) {
            *s += v;
        }
        for (s, v) in self.square_sum.iter_mut().zip(x) {
            *s += v * v;
        }
    }

    fn squared_centroid_distance(&self, x: &[f64]) -> f64 {
        let n = self.count as f64;
        self.linear_sum
            .iter()
            .zip(x)
            .map(|(ls, v)| {
                let c = ls / n;
                (c - v) * (c - v)
            })
            .sum()
    }
}

/// Online micro-cluster classifier state.
#[derive(Debug, Clone)]
pub struct MClassifier {
    pub clusters: Vec<MicroCluster>,
    pub max_radius: f64,
}

impl MClassifier {
    /// One singleton micro-cluster per initial labeled instance; duplicates
    /// stay separate.
    pub fn new(initial: &[(Point, Label)], max_radius: f64) -> Result<Self, MClassificationError> {
        if initial.is_empty() {
            return Err(MClassificationError::EmptyInitial);
        }
        if max_radius.is_nan() || max_radius <= 0.0 {
            return Err(MClassificationError::NonPositiveRadius(max_radius));
        }
        Ok(MClassifier {
            clusters: initial
                .iter()
                .map(|(x, y)| MicroCluster::singleton(x, *y))
                .collect(),
            max_radius,
        })
    }

    /// Classifies one instance by its nearest micro-cluster centroid (ties
    /// toward the lowest index), then either absorbs it into that cluster,
    /// if the grown radius stays within the threshold, or opens a new
    /// singleton cluster carrying the predicted label.
    pub fn step_instance(&mut self, x: &[f64]) -> Label {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, mc) in self.clusters.iter().enumerate() {
            let d = mc.squared_centroid_distance(x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let predicted = self.clusters[best].label;
        if self.clusters[best].radius_with(x) <= self.max_radius {
            self.clusters[best].absorb(x);
        } else {
            self.clusters.push(MicroCluster::singleton(x, predicted));
        }
        predicted
    }

    /// Processes a batch strictly one instance at a time, in order.
    pub fn step(&mut self, batch: &[Point]) -> Vec<Label> {
        batch.iter().map(|x| self.step_instance(x)).collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}
