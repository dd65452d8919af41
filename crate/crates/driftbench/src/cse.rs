//! Core-support extraction: choosing the labeled subset of a class that is
//! carried into the next time step.
//!
//! Three strategies share one interface: alpha-shape boundary peeling,
//! GMM density ranking, and the identity pass-through in which every
//! freshly labeled instance becomes a core support.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{gmm_fit, gmm_logpdf, ClusteringError};
use crate::geometry::{mean_nearest_neighbor_distance, peel_compaction, GeometryError};
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum CseError {
    #[error("empty class")]
    EmptyClass,
    #[error("alpha-shape extraction requires 2-d data, got dimension {0}")]
    NotPlanar(usize),
    #[error("gmm components ({components}) exceed class size ({n})")]
    TooManyComponents { components: usize, n: usize },
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Extraction strategy. The alpha level, when unset, defaults to twice the
/// mean nearest-neighbor distance of the class being compacted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum CseMethod {
    Identity,
    GmmDensity { components: usize },
    AlphaShape2d { alpha: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CseParams {
    #[serde(flatten)]
    pub method: CseMethod,
    /// Compaction percentage: fraction of the class retained as core
    /// supports. Ignored by the identity method.
    pub cp: f64,
}

impl CseParams {
    pub fn identity() -> Self {
        CseParams {
            method: CseMethod::Identity,
            cp: 1.0,
        }
    }

    pub fn gmm(components: usize, cp: f64) -> Self {
        CseParams {
            method: CseMethod::GmmDensity { components },
            cp,
        }
    }

    pub fn alpha_shape(alpha: Option<f64>, cp: f64) -> Self {
        CseParams {
            method: CseMethod::AlphaShape2d { alpha },
            cp,
        }
    }
}

/// The core supports of one class.
#[derive(Debug, Clone)]
pub struct CoreSupports {
    pub instances: Vec<Point>,
    pub label: Label,
}

/// Extracts core supports from one class's instances. Deterministic for a
/// fixed seed; the output is always a sub-multiset of the input, of size
/// `ceil(cp * n)` for the non-identity methods (alpha-shape may return more
/// if the geometry degenerates mid-peel).
pub fn extract_core_supports(
    class_points: &[Point],
    label: Label,
    params: &CseParams,
    seed: u64,
) -> Result<CoreSupports, CseError> {
    if class_points.is_empty() {
        return Err(CseError::EmptyClass);
    }
    let n = class_points.len();
    let keep = |idx: Vec<usize>| CoreSupports {
        instances: idx.iter().map(|&i| class_points[i].clone()).collect(),
        label,
    };
    match &params.method {
        CseMethod::Identity => Ok(keep((0..n).collect())),
        CseMethod::GmmDensity { components } => {
            if *components > n {
                return Err(CseError::TooManyComponents {
                    components: *components,
                    n,
                });
            }
            let model = gmm_fit(class_points, *components, 100, 1e-8, 1e-6, seed)?;
            let scores: Vec<f64> = class_points
                .iter()
                .map(|p| gmm_logpdf(&model, p))
                .collect::<Result<_, _>>()?;
            let mut order: Vec<usize> = (0..n).collect();
            // Highest density first; ties keep input order.
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            let take = (params.cp * n as f64).ceil() as usize;
            let mut kept: Vec<usize> = order.into_iter().take(take).collect();
            kept.sort_unstable();
            Ok(keep(kept))
        }
        CseMethod::AlphaShape2d { alpha } => {
            if let Some(p) = class_points.iter().find(|p| p.len() != 2) {
                return Err(CseError::NotPlanar(p.len()));
            }
            let alpha = alpha
                .unwrap_or_else(|| 2.0 * mean_nearest_neighbor_distance(class_points))
                .max(1e-12);
            let kept = peel_compaction(class_points, alpha, params.cp)?;
            Ok(keep(kept))
        }
    }
}
