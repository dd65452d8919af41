//! LEVEL-IW: importance-weighted label propagation between consecutive
//! batches. Each step estimates density-ratio weights from the previous
//! batch (training role) to the current batch (test role) with uLSIF, fits
//! an importance-weighted least-squares probabilistic classifier, and
//! carries the predicted labels forward as the next training labels.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::util::{mix_seed, squared_distance};
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum LevelIwError {
    #[error("empty input set")]
    EmptyInput,
    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("singular system; retry with a regularization floor of at least 1e-6")]
    SingularSystem,
    #[error("mismatched training arrays: {xs} instances, {ys} labels, {ws} weights")]
    LengthMismatch { xs: usize, ys: usize, ws: usize },
}

/// Free parameters of the IWLSPC subroutine.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIwParams {
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    /// Ridge regularization for both the density-ratio and posterior fits.
    pub lambda: f64,
    /// Kernel-center budget for the density-ratio fit; capped at the test
    /// batch size.
    pub basis_count: usize,
    pub seed: u64,
}

impl Default for LevelIwParams {
    fn default() -> Self {
        LevelIwParams {
            sigma: 0.5,
            lambda: 0.1,
            basis_count: 100,
            seed: 0,
        }
    }
}

fn kernel(x: &[f64], center: &[f64], sigma: f64) -> f64 {
    (-squared_distance(x, center) / (2.0 * sigma * sigma)).exp()
}

/// Unconstrained least-squares importance fitting: returns one non-negative
/// density-ratio weight per training instance, modeling test density over
/// training density in a Gaussian kernel basis of `basis_count` centers
/// sampled uniformly without replacement from the test set.
pub fn ulsif_weights(
    train_x: &[Point],
    test_x: &[Point],
    sigma: f64,
    lambda: f64,
    basis_count: usize,
    seed: u64,
) -> Result<Vec<f64>, LevelIwError> {
    if train_x.is_empty() || test_x.is_empty() {
        return Err(LevelIwError::EmptyInput);
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(LevelIwError::NonPositiveSigma(sigma));
    }
    let b = basis_count.max(1).min(test_x.len());
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(&[seed, 0x1f, 0]));
    let centers: Vec<&Point> = rand::seq::index::sample(&mut rng, test_x.len(), b)
        .into_iter()
        .map(|i| &test_x[i])
        .collect();

    let n_tr = train_x.len();
    let n_te = test_x.len();
    let k_train = DMatrix::from_fn(n_tr, b, |i, l| kernel(&train_x[i], centers[l], sigma));
    let h_mat = (k_train.transpose() * &k_train) / n_tr as f64;
    let mut h_vec = DVector::zeros(b);
    for x in test_x {
        for (l, c) in centers.iter().enumerate() {
            h_vec[l] += kernel(x, c, sigma);
        }
    }
    h_vec /= n_te as f64;

    let mut system = h_mat;
    for i in 0..b {
        system[(i, i)] += lambda;
    }
    let chol = system.cholesky().ok_or(LevelIwError::SingularSystem)?;
    let beta = chol.solve(&h_vec);
    Ok((k_train * beta).iter().map(|w| w.max(0.0)).collect())
}

/// A fitted kernel posterior model: one coefficient vector per class over
/// Gaussian kernels centered at the training instances.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    pub centers: Vec<Point>,
    /// `coefficients[class][center]`; all-zero rows for classes absent from
    /// the training labels (those classes are unreachable).
    pub coefficients: Vec<Vec<f64>>,
    pub sigma: f64,
}

/// Weighted least-squares posterior fit: for each class solves
/// `(K^T W K + lambda I) theta = K^T W 1_class` over kernels centered at
/// every training instance.
pub fn iwlspc_fit(
    train_x: &[Point],
    train_y: &[Label],
    weights: &[f64],
    sigma: f64,
    lambda: f64,
    class_count: usize,
) -> Result<PosteriorModel, LevelIwError> {
    if train_x.is_empty() {
        return Err(LevelIwError::EmptyInput);
    }
    if train_x.len() != train_y.len() || train_x.len() != weights.len() {
        return Err(LevelIwError::LengthMismatch {
            xs: train_x.len(),
            ys: train_y.len(),
            ws: weights.len(),
        });
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(LevelIwError::NonPositiveSigma(sigma));
    }
    let n = train_x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&train_x[i], &train_x[j], sigma));
    let w = DMatrix::from_diagonal(&DVector::from_iterator(n, weights.iter().copied()));
    let ktw = k.transpose() * w;
    let mut system = &ktw * &k;
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    let chol = system.cholesky().ok_or(LevelIwError::SingularSystem)?;

    let mut coefficients = Vec::with_capacity(class_count);
    for class in 0..class_count {
        if train_y.iter().any(|y| *y == class) {
            let indicator =
                DVector::from_iterator(n, train_y.iter().map(|y| f64::from(u8::from(*y == class))));
            let rhs = &ktw * indicator;
            coefficients.push(chol.solve(&rhs).iter().copied().collect());
        } else {
            coefficients.push(vec![0.0; n]);
        }
    }
    Ok(PosteriorModel {
        centers: train_x.to_vec(),
        coefficients,
        sigma,
    })
}

/// Scores `x` under the model: raw per-class kernel scores clipped at zero
/// and normalized to a posterior (uniform when everything clips to zero).
/// Returns the argmax label, ties toward the lowest class index.
pub fn iwlspc_predict(model: &PosteriorModel, x: &[f64]) -> (Label, Vec<f64>) {
    let k: Vec<f64> = model
        .centers
        .iter()
        .map(|c| kernel(x, c, model.sigma))
        .collect();
    let mut scores: Vec<f64> = model
        .coefficients
        .iter()
        .map(|theta| theta.iter().zip(&k).map(|(t, kv)| t * kv).sum::<f64>())
        .map(|q: f64| q.max(0.0))
        .collect();
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in &mut scores {
            *s /= total;
        }
    } else {
        let u = 1.0 / scores.len() as f64;
        scores.iter_mut().for_each(|s| *s = u);
    }
    let label = scores
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    // max_by returns the last maximum; rescan for the lowest index.
    let best = scores[label];
    let label = scores.iter().position(|&s| s == best).unwrap_or(label);
    (label, scores)
}

/// LEVEL-IW wrapper state: the previous batch with its propagated labels.
#[derive(Debug, Clone)]
pub struct LevelIwLearner {
    params: LevelIwParams,
    class_count: usize,
    train_x: Vec<Point>,
    train_y: Vec<Label>,
    step_index: u64,
    class_loss_events: u64,
}

impl LevelIwLearner {
    pub fn new(
        initial: &[(Point, Label)],
        params: LevelIwParams,
        class_count: usize,
    ) -> Result<Self, LevelIwError> {
        if initial.is_empty() {
            return Err(LevelIwError::EmptyInput);
        }
        if params.sigma.is_nan() || params.sigma <= 0.0 {
            return Err(LevelIwError::NonPositiveSigma(params.sigma));
        }
        Ok(LevelIwLearner {
            params,
            class_count,
            train_x: initial.iter().map(|(x, _)| x.clone()).collect(),
            train_y: initial.iter().map(|(_, y)| *y).collect(),
            step_index: 0,
            class_loss_events: 0,
        })
    }

    /// One LEVEL-IW step: the previous batch (with its propagated labels)
    /// trains an importance-weighted classifier for the current batch, and
    /// the predictions become the next step's training labels.
    pub fn step(&mut self, batch: &[Point]) -> Result<Vec<Label>, LevelIwError> {
        let seed = mix_seed(&[self.params.seed, 0x11, self.step_index]);
        let weights = match ulsif_weights(
            &self.train_x,
            batch,
            self.params.sigma,
            self.params.lambda,
            self.params.basis_count,
            seed,
        ) {
            Ok(w) => w,
            Err(LevelIwError::SingularSystem) => ulsif_weights(
                &self.train_x,
                batch,
                self.params.sigma,
                self.params.lambda.max(1e-6),
                self.params.basis_count,
                seed,
            )?,
            Err(e) => return Err(e),
        };
        for class in 0..self.class_count {
            if !self.train_y.iter().any(|y| *y == class) {
                self.class_loss_events += 1;
            }
        }
        let model = iwlspc_fit(
            &self.train_x,
            &self.train_y,
            &weights,
            self.params.sigma,
            self.params.lambda,
            self.class_count,
        )?;
        let predictions: Vec<Label> = batch.iter().map(|x| iwlspc_predict(&model, x).0).collect();
        self.train_x = batch.to_vec();
        self.train_y = predictions.clone();
        self.step_index += 1;
        Ok(predictions)
    }

    pub fn class_loss_events(&self) -> u64 {
        self.class_loss_events
    }
}
