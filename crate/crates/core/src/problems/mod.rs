//! Objective functions: ill-conditioned quadratics and toy multilayer
//! perceptrons over synthetic classification data.

mod dataset;
mod mlp;
mod quadratic;

pub use dataset::{make_dataset, Dataset, DatasetKind};
pub use mlp::{mlp_eval_grad, Activation, MlpModel, MlpProblem};
pub use quadratic::{make_quadratic, quadratic_eval_grad, QuadraticProblem};

use crate::diagnostics::Granularity;
use crate::error::Result;

/// A differentiable objective over a flat parameter vector.
///
/// Implementations are immutable after construction, so a single problem can
/// be shared by concurrent training runs.
pub trait Problem: Send + Sync {
    fn dimension(&self) -> usize;

    /// Loss and gradient at `w`. `batch` selects sample indices for
    /// data-driven problems; `None` means the full objective.
    fn eval_grad(&self, w: &[f64], batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)>;

    fn evaluate(&self, w: &[f64]) -> Result<f64> {
        self.eval_grad(w, None).map(|(loss, _)| loss)
    }

    /// Number of samples available for mini-batching, if the problem is
    /// backed by a dataset.
    fn n_samples(&self) -> Option<usize> {
        None
    }

    /// The known minimizer, when there is one.
    fn optimum_hint(&self) -> Option<&[f64]> {
        None
    }

    /// Seeded starting point for training.
    fn initial_point(&self, seed: u64) -> Vec<f64>;

    /// Fraction of correctly classified samples, for classifiers.
    fn accuracy(&self, _w: &[f64]) -> Option<f64> {
        None
    }

    /// Accuracy on samples outside the training data.
    fn held_out_accuracy(&self, _w: &[f64], _data: &Dataset) -> Option<f64> {
        None
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Epoch
    }

    /// Stable one-line description, used for run fingerprints.
    fn describe(&self) -> String;
}
