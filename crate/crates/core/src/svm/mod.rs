//! Linear support vector machines.
//!
//! Binary problems are solved by dual coordinate descent on the
//! L2-regularised hinge-loss (L1-loss) SVM:
//!
//! ```text
//! min_w  ½‖w‖² + Σᵢ Uᵢ · max(0, 1 − yᵢ w·x̂ᵢ)
//! ```
//!
//! where `x̂ᵢ` is `xᵢ` augmented with a constant feature 1, so the last weight
//! acts as the (regularised) bias, and `Uᵢ = C · weightᵢ`. The dual is
//!
//! ```text
//! max_α  Σᵢ αᵢ − ½‖Σᵢ αᵢ yᵢ x̂ᵢ‖²   subject to 0 ≤ αᵢ ≤ Uᵢ
//! ```
//!
//! One coordinate is optimised at a time in a seeded, per-epoch shuffled
//! order, keeping `w = Σ αᵢ yᵢ x̂ᵢ` up to date. Training stops once the
//! largest projected-gradient violation over a full pass drops below `tol`.

mod ovr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, SparseVector};

pub use ovr::{
    predict, train_ovr, ClassModelFile, ModelFile, MulticlassModel, OvrMeta, OvrParams, Prediction,
    MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("degenerate problem: both label signs are required")]
    DegenerateProblem,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("non-finite weights after {iterations} epochs")]
    NonFinite { iterations: usize },
    #[error("feature index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("training data holds a single class ({0}); at least two are needed")]
    SingleClassDataset(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersionMismatch { found: u64, expected: u64 },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("stop-word list hash {current} does not match the model's {model}")]
    StopwordMismatch { model: String, current: String },
}

/// A two-class training problem with labels ±1.
#[derive(Debug, Clone)]
pub struct BinaryProblem {
    vectors: Vec<SparseVector>,
    labels: Vec<f64>,
    c: f64,
    upper_bounds: Vec<f64>,
    dim: usize,
}

impl BinaryProblem {
    pub fn new(
        vectors: Vec<SparseVector>,
        labels: Vec<f64>,
        c: f64,
    ) -> Result<BinaryProblem, SvmError> {
        if vectors.len() != labels.len() {
            return Err(SvmError::InvalidProblem(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        if vectors.len() < 2 {
            return Err(SvmError::InvalidProblem(
                "at least two examples are required".into(),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(SvmError::InvalidProblem(format!("label {bad} is not ±1")));
        }
        if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
            return Err(SvmError::DegenerateProblem);
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(SvmError::InvalidProblem(format!(
                "C must be positive, got {c}"
            )));
        }
        let dim = vectors
            .iter()
            .map(SparseVector::dim_hint)
            .max()
            .unwrap_or(0);
        Ok(BinaryProblem {
            upper_bounds: vec![c; vectors.len()],
            vectors,
            labels,
            c,
            dim,
        })
    }

    /// Fixes the feature dimension (e.g. the vocabulary size).
    pub fn with_dim(mut self, dim: usize) -> Result<BinaryProblem, SvmError> {
        if dim < self.dim {
            return Err(SvmError::IndexOutOfRange {
                index: self.dim - 1,
                dim,
            });
        }
        self.dim = dim;
        Ok(self)
    }

    /// Per-example cost multipliers: example `i` gets box `[0, C · weights[i]]`.
    pub fn with_example_weights(mut self, weights: &[f64]) -> Result<BinaryProblem, SvmError> {
        if weights.len() != self.vectors.len() {
            return Err(SvmError::InvalidProblem(
                "one weight per example required".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(SvmError::InvalidProblem(
                "example weights must be positive".into(),
            ));
        }
        self.upper_bounds = weights.iter().map(|w| self.c * w).collect();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    /// `y·(w·x̂)` for example `i` against augmented weights.
    fn margin(&self, weights: &[f64], i: usize) -> f64 {
        let bias = weights[self.dim];
        self.labels[i] * (self.vectors[i].dot_dense(&weights[..self.dim]) + bias)
    }

    /// Primal objective at augmented weights (length `dim + 1`).
    pub fn primal_objective(&self, weights: &[f64]) -> f64 {
        let reg = 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
        let loss: f64 = (0..self.len())
            .map(|i| self.upper_bounds[i] * (1.0 - self.margin(weights, i)).max(0.0))
            .sum();
        reg + loss
    }

    /// Dual objective at `alpha`.
    pub fn dual_objective(&self, alpha: &[f64]) -> f64 {
        let w = self.weights_from_dual(alpha);
        alpha.iter().sum::<f64>() - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// `Σ αᵢ yᵢ x̂ᵢ`.
    pub fn weights_from_dual(&self, alpha: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim + 1];
        for (i, &a) in alpha.iter().enumerate() {
            let coef = a * self.labels[i];
            for &(j, v) in self.vectors[i].entries() {
                w[j as usize] += coef * v;
            }
            w[self.dim] += coef;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            tol: 1e-4,
            max_iter: 1000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub iterations: usize,
    pub final_violation: f64,
    pub converged: bool,
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub seed: u64,
}

/// Weights and dual variables at the end of training.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Augmented weights; the last entry is the bias.
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub meta: TrainMeta,
}

fn projected_gradient(g: f64, alpha: f64, upper: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= upper {
        g.max(0.0)
    } else {
        g
    }
}

/// Largest projected-gradient magnitude at `(weights, alpha)`.
pub fn max_violation(problem: &BinaryProblem, weights: &[f64], alpha: &[f64]) -> f64 {
    (0..problem.len())
        .map(|i| {
            let g = problem.margin(weights, i) - 1.0;
            projected_gradient(g, alpha[i], problem.upper_bounds[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs dual coordinate descent.
pub fn solve_dual(problem: &BinaryProblem, params: &TrainParams) -> Result<DualSolution, SvmError> {
    if !(params.tol.is_finite() && params.tol > 0.0) {
        return Err(SvmError::InvalidProblem(format!(
            "tol must be positive, got {}",
            params.tol
        )));
    }
    let n = problem.len();
    let dim = problem.dim;
    let diag: Vec<f64> = problem
        .vectors
        .iter()
        .map(|x| x.squared_norm() + 1.0)
        .collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut iterations = 0;
    let mut violation = max_violation(problem, &w, &alpha);
    while iterations < params.max_iter && violation >= params.tol {
        order.shuffle(&mut rng);
        for &i in &order {
            let upper = problem.upper_bounds[i];
            let g = problem.margin(&w, i) - 1.0;
            if projected_gradient(g, alpha[i], upper) == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / diag[i]).clamp(0.0, upper);
            let delta = (alpha[i] - old) * problem.labels[i];
            if delta != 0.0 {
                for &(j, v) in problem.vectors[i].entries() {
                    w[j as usize] += delta * v;
                }
                w[dim] += delta;
            }
        }
        iterations += 1;
        violation = max_violation(problem, &w, &alpha);
        if !violation.is_finite() {
            return Err(SvmError::NonFinite { iterations });
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(SvmError::NonFinite { iterations });
    }
    Ok(DualSolution {
        weights: w,
        alpha,
        meta: TrainMeta {
            iterations,
            final_violation: violation,
            converged: violation < params.tol,
            c: problem.c,
            tol: params.tol,
            seed: params.seed,
        },
    })
}

/// A trained one-class-versus-rest hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Length `dim + 1`; the last entry is the bias.
    pub weights: Vec<f64>,
    pub target_class: String,
    pub meta: TrainMeta,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.dim()]
    }

    /// `w·x + b`.
    pub fn decision(&self, x: &SparseVector) -> Result<f64, SvmError> {
        let dim = self.dim();
        if let Some(&(index, _)) = x.entries().iter().find(|(i, _)| *i as usize >= dim) {
            return Err(SvmError::IndexOutOfRange {
                index: index as usize,
                dim,
            });
        }
        Ok(x.dot_dense(&self.weights[..dim]) + self.bias())
    }
}

/// Free-function form of [`LinearModel::decision`].
pub fn decision(model: &LinearModel, x: &SparseVector) -> Result<f64, SvmError> {
    model.decision(x)
}

/// Trains a binary model; `target_class` names the +1 side.
pub fn train_binary(
    problem: &BinaryProblem,
    params: &TrainParams,
    target_class: impl Into<String>,
) -> Result<LinearModel, SvmError> {
    let solution = solve_dual(problem, params)?;
    Ok(LinearModel {
        weights: solution.weights,
        target_class: target_class.into(),
        meta: solution.meta,
    })
}
