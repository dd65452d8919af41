//! The COMPOSE framework: label each unlabeled batch with a
//! cluster-and-label hypothesis trained on the current labeled set, then
//! extract per-class core supports to form the next labeled set.
//!
//! One implementation covers all three published variants through
//! [`CseParams`]: identity extraction keeps only the freshly labeled batch
//! (FAST COMPOSE), while alpha-shape and GMM extraction compact the union
//! of the carried labeled set and the freshly labeled batch.

use thiserror::Error;

use crate::clustering::{cluster_and_label, ClusteringError};
use crate::cse::{extract_core_supports, CseError, CseMethod, CseParams};
use crate::util::mix_seed;
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("empty initial labeled set")]
    EmptyInitial,
    #[error("class {0} has no initial labeled instance")]
    MissingClass(Label),
    #[error("alpha-shape extraction requires 2-d data, got dimension {0}")]
    NotPlanar(usize),
    #[error("cluster count must be positive")]
    ZeroClusters,
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Cse(#[from] CseError),
}

/// COMPOSE state: the current labeled set, the SSL cluster count, and the
/// core-support extraction configuration.
#[derive(Debug, Clone)]
pub struct ComposeLearner {
    labeled: Vec<Point>,
    labels: Vec<Label>,
    k: usize,
    cse: CseParams,
    class_count: usize,
    seed: u64,
    step_index: u64,
    class_loss_events: u64,
}

impl ComposeLearner {
    /// Wraps the initial labeled data. Every class in `0..class_count` must
    /// be represented.
    pub fn new(
        initial: &[(Point, Label)],
        k: usize,
        cse: CseParams,
        class_count: usize,
        seed: u64,
    ) -> Result<Self, ComposeError> {
        if initial.is_empty() {
            return Err(ComposeError::EmptyInitial);
        }
        if k == 0 {
            return Err(ComposeError::ZeroClusters);
        }
        for c in 0..class_count {
            if !initial.iter().any(|(_, y)| *y == c) {
                return Err(ComposeError::MissingClass(c));
            }
        }
        if matches!(cse.method, CseMethod::AlphaShape2d { .. }) && initial[0].0.len() != 2 {
            return Err(ComposeError::NotPlanar(initial[0].0.len()));
        }
        Ok(ComposeLearner {
            labeled: initial.iter().map(|(x, _)| x.clone()).collect(),
            labels: initial.iter().map(|(_, y)| *y).collect(),
            k,
            cse,
            class_count,
            seed,
            step_index: 0,
            class_loss_events: 0,
        })
    }

    /// Labels one unlabeled batch and replaces the labeled set with the
    /// extracted core supports. A class that receives no instances this
    /// step is recorded as a class-loss event and simply contributes no
    /// core supports; the run continues.
    pub fn step(&mut self, batch: &[Point]) -> Result<Vec<Label>, ComposeError> {
        let step_seed = mix_seed(&[self.seed, 0xc0, self.step_index]);
        let predictions = cluster_and_label(&self.labeled, &self.labels, batch, self.k, step_seed)?;

        // FAST COMPOSE carries only the freshly labeled batch forward; the
        // compacting variants carry the previous labeled set as well.
        let identity = matches!(self.cse.method, CseMethod::Identity);
        let mut pool_points: Vec<&Point> = Vec::new();
        let mut pool_labels: Vec<Label> = Vec::new();
        if !identity {
            pool_points.extend(self.labeled.iter());
            pool_labels.extend(self.labels.iter().copied());
        }
        pool_points.extend(batch.iter());
        pool_labels.extend(predictions.iter().copied());

        let mut next_points = Vec::new();
        let mut next_labels = Vec::new();
        for c in 0..self.class_count {
            let class_points: Vec<Point> = pool_points
                .iter()
                .zip(&pool_labels)
                .filter(|(_, y)| **y == c)
                .map(|(x, _)| (*x).clone())
                .collect();
            if class_points.is_empty() {
                self.class_loss_events += 1;
                continue;
            }
            // Shrink the component count rather than failing when a class
            // has fewer instances than the configured mixture size.
            let mut params = self.cse.clone();
            if let CseMethod::GmmDensity { components } = &mut params.method {
                *components = (*components).min(class_points.len());
            }
            let cs = extract_core_supports(
                &class_points,
                c,
                &params,
                mix_seed(&[step_seed, c as u64]),
            )?;
            next_labels.extend(std::iter::repeat(c).take(cs.instances.len()));
            next_points.extend(cs.instances);
        }
        self.labeled = next_points;
        self.labels = next_labels;
        self.step_index += 1;
        Ok(predictions)
    }

    pub fn labeled_len(&self) -> usize {
        self.labeled.len()
    }

    pub fn class_loss_events(&self) -> u64 {
        self.class_loss_events
    }

    pub fn labeled_set(&self) -> (&[Point], &[Label]) {
        (&self.labeled, &self.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{generate_stream, Family, StreamSpec};

    fn two_class_initial(n_per_class: usize) -> Vec<(Point, Label)> {
        let mut init = Vec::new();
        for i in 0..n_per_class {
            let jitter = i as f64 * 0.01;
            init.push((vec![0.0 + jitter, 0.0], 0));
            init.push((vec![5.0 - jitter, 0.0], 1));
        }
        init
    }

    #[test]
    fn init_wraps_inputs() {
        let init = two_class_initial(10);
        let learner = ComposeLearner::new(&init, 2, CseParams::identity(), 2, 0).unwrap();
        assert_eq!(learner.labeled_len(), 20);
    }

    #[test]
    fn init_rejects_missing_class() {
        let init = vec![(vec![0.0, 0.0], 0), (vec![1.0, 0.0], 0)];
        match ComposeLearner::new(&init, 2, CseParams::identity(), 2, 0) {
            Err(ComposeError::MissingClass(1)) => {}
            other => panic!("expected MissingClass(1), got {other:?}"),
        }
    }

    #[test]
    fn fast_compose_configuration_is_accepted() {
        let init = two_class_initial(5);
        assert!(ComposeLearner::new(&init, 2, CseParams::identity(), 2, 0).is_ok());
    }

    #[test]
    fn identity_cse_keeps_exactly_the_batch() {
        let init = two_class_initial(10);
        let mut learner = ComposeLearner::new(&init, 2, CseParams::identity(), 2, 1).unwrap();
        let batch: Vec<Point> = (0..14)
            .map(|i| vec![if i % 2 == 0 { 0.2 } else { 4.8 }, 0.1 * i as f64])
            .collect();
        learner.step(&batch).unwrap();
        assert_eq!(learner.labeled_len(), 14);
    }

    #[test]
    fn stationary_separable_stream_is_perfect_for_all_variants() {
        let spec = StreamSpec {
            family: Family::TranslatingGaussians,
            class_count: 2,
            modes_per_class: 1,
            dimension: 2,
            total_instances: 20 * 60,
            batch_size: 60,
            drift_rate: 0.0,
            class_overlap: 0.03,
            seed: 11,
        };
        let stream = generate_stream(&spec).unwrap();
        for cse in [
            CseParams::identity(),
            CseParams::gmm(1, 0.5),
            CseParams::alpha_shape(None, 0.5),
        ] {
            let mut learner =
                ComposeLearner::new(stream.initial_labeled(), 2, cse.clone(), 2, 3).unwrap();
            for t in 0..stream.batch_count() {
                let preds = learner.step(stream.batch(t).unwrap()).unwrap();
                let truth = stream.hidden_labels(t).unwrap();
                let acc = preds
                    .iter()
                    .zip(truth)
                    .filter(|(a, b)| a == b)
                    .count() as f64
                    / truth.len() as f64;
                assert!(acc >= 0.999, "cse {cse:?} batch {t}: {acc}");
            }
            assert_eq!(learner.class_loss_events(), 0);
        }
    }

    #[test]
    fn fast_compose_tracks_limited_drift() {
        // Drift of at most half the component sigma per batch.
        let spec = StreamSpec {
            family: Family::TranslatingGaussians,
            class_count: 2,
            modes_per_class: 1,
            dimension: 2,
            total_instances: 50 * 80,
            batch_size: 80,
            drift_rate: 0.02,
            class_overlap: 0.04,
            seed: 23,
        };
        let stream = generate_stream(&spec).unwrap();
        let mut learner =
            ComposeLearner::new(stream.initial_labeled(), 2, CseParams::identity(), 2, 9).unwrap();
        let mut total = 0usize;
        let mut hits = 0usize;
        for t in 0..stream.batch_count() {
            let preds = learner.step(stream.batch(t).unwrap()).unwrap();
            let truth = stream.hidden_labels(t).unwrap();
            total += truth.len();
            hits += preds.iter().zip(truth).filter(|(a, b)| a == b).count();
        }
        let avg = hits as f64 / total as f64;
        assert!(avg >= 0.99, "average accuracy {avg}");
    }

    #[test]
    fn labeled_set_growth_is_bounded() {
        let spec = StreamSpec {
            family: Family::TranslatingGaussians,
            class_count: 2,
            modes_per_class: 1,
            dimension: 2,
            total_instances: 10 * 40,
            batch_size: 40,
            drift_rate: 0.0,
            class_overlap: 0.05,
            seed: 2,
        };
        let stream = generate_stream(&spec).unwrap();
        let mut learner = ComposeLearner::new(
            stream.initial_labeled(),
            2,
            CseParams::gmm(1, 0.4),
            2,
            5,
        )
        .unwrap();
        for t in 0..stream.batch_count() {
            let before = learner.labeled_len();
            learner.step(stream.batch(t).unwrap()).unwrap();
            assert!(learner.labeled_len() <= before + 40);
        }
    }

    #[test]
    fn replay_reproduces_identical_predictions() {
        let spec = StreamSpec {
            family: Family::TranslatingGaussians,
            class_count: 2,
            modes_per_class: 1,
            dimension: 2,
            total_instances: 8 * 30,
            batch_size: 30,
            drift_rate: 0.01,
            class_overlap: 0.1,
            seed: 6,
        };
        let stream = generate_stream(&spec).unwrap();
        let run = || {
            let mut learner = ComposeLearner::new(
                stream.initial_labeled(),
                2,
                CseParams::gmm(1, 0.35),
                2,
                77,
            )
            .unwrap();
            (0..stream.batch_count())
                .map(|t| learner.step(stream.batch(t).unwrap()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stationary_core_support_centroids_do_not_wander() {
        // With zero drift and disjoint classes, per-class core-support
        // centroids stay within sampling noise of the class means.
        let overlap = 0.08;
        let spec = StreamSpec {
            family: Family::TranslatingGaussians,
            class_count: 2,
            modes_per_class: 1,
            dimension: 2,
            total_instances: 15 * 100,
            batch_size: 100,
            drift_rate: 0.0,
            class_overlap: overlap,
            seed: 19,
        };
        let stream = generate_stream(&spec).unwrap();
        let class_mean = |points: &[Point], labels: &[Label], class: Label| -> [f64; 2] {
            let mut m = [0.0f64; 2];
            let mut n = 0usize;
            for (x, y) in points.iter().zip(labels) {
                if *y == class {
                    m[0] += x[0];
                    m[1] += x[1];
                    n += 1;
                }
            }
            [m[0] / n as f64, m[1] / n as f64]
        };
        let init_points: Vec<Point> =
            stream.initial_labeled().iter().map(|(x, _)| x.clone()).collect();
        let init_labels: Vec<Label> = stream.initial_labeled().iter().map(|(_, y)| *y).collect();
        let reference: Vec<[f64; 2]> = (0..2)
            .map(|c| class_mean(&init_points, &init_labels, c))
            .collect();

        let mut learner = ComposeLearner::new(
            stream.initial_labeled(),
            2,
            CseParams::gmm(1, 0.5),
            2,
            3,
        )
        .unwrap();
        for t in 0..stream.batch_count() {
            learner.step(stream.batch(t).unwrap()).unwrap();
            let (points, labels) = learner.labeled_set();
            for c in 0..2 {
                let n_c = labels.iter().filter(|y| **y == c).count();
                let centroid = class_mean(points, labels, c);
                let se = overlap / (n_c as f64).sqrt();
                for d in 0..2 {
                    assert!(
                        (centroid[d] - reference[c][d]).abs() <= 3.0 * se,
                        "batch {t} class {c} coord {d}: {} vs {}",
                        centroid[d],
                        reference[c][d]
                    );
                }
            }
        }
    }

    #[test]
    fn class_loss_is_survivable() {
        // All labeled mass on one side and a batch entirely on that side:
        // class 1 receives no predictions, which is recorded, not fatal.
        let init = vec![
            (vec![0.0, 0.0], 0),
            (vec![0.1, 0.0], 0),
            (vec![0.2, 0.1], 0),
            (vec![100.0, 0.0], 1),
        ];
        let mut learner = ComposeLearner::new(&init, 2, CseParams::identity(), 2, 0).unwrap();
        let batch = vec![vec![0.05, 0.0], vec![0.15, 0.05], vec![0.1, 0.1]];
        learner.step(&batch).unwrap();
        assert_eq!(learner.class_loss_events(), 1);
        // The learner keeps running on later batches.
        assert!(learner.step(&batch).is_ok());
    }
}
