use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{apply_step, decayed_gradient, BatchMode, MomentumState, PhaseSpec, ScheduleSpec};
use crate::diagnostics::{alignment, scale, Granularity, ReferencePoint, TraceRow, TraceSink, TrainTrace};
use crate::error::{invalid, Error, Result};
use crate::problems::Problem;
use crate::seed;
use crate::vecops::{all_finite, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Updates per epoch in full-batch phases. Mini-batch epochs are one
    /// shuffled pass over the data.
    pub iters_per_epoch: usize,
    /// Drives the initial point and the per-epoch shuffles.
    pub seed: u64,
    /// `None` picks the problem's default.
    pub granularity: Option<Granularity>,
    pub store_snapshots: bool,
    /// A loss above `divergence_factor · max(initial loss, 1)` counts as
    /// divergence, as does any non-finite loss or gradient.
    pub divergence_factor: f64,
}

impl TrainConfig {
    pub fn epochs(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            iters_per_epoch: 1,
            seed,
            granularity: None,
            store_snapshots: false,
            divergence_factor: 1e12,
        }
    }

    /// `iterations` full-batch updates, logged every iteration.
    pub fn iterations(iterations: usize, seed: u64) -> Self {
        Self {
            granularity: Some(Granularity::Iteration),
            ..Self::epochs(iterations, seed)
        }
    }

    pub fn with_snapshots(mut self) -> Self {
        self.store_snapshots = true;
        self
    }

    pub fn total_full_batch_steps(&self) -> usize {
        self.epochs * self.iters_per_epoch
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if self.iters_per_epoch == 0 {
            return Err(invalid("iters_per_epoch must be >= 1"));
        }
        if self.divergence_factor.is_nan() || self.divergence_factor <= 1.0 {
            return Err(invalid("divergence_factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: MomentumState,
    pub trace: TrainTrace,
    /// Full objective at the final state; `None` when the run diverged.
    pub final_loss: Option<f64>,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        self.final_loss.is_none()
    }
}

/// Where a run stopped, as reported by [`train_into`].
#[derive(Debug, Clone)]
pub struct RunEnd {
    pub state: MomentumState,
    pub initial_loss: f64,
    pub final_loss: Option<f64>,
    pub diverged_at: Option<u64>,
}

/// Hash of everything that determines a run's output.
pub fn run_fingerprint(problem: &dyn Problem, spec: &ScheduleSpec, cfg: &TrainConfig) -> String {
    let mut h = Sha256::new();
    h.update(problem.describe().as_bytes());
    h.update(serde_json::to_string(spec).expect("spec serializes").as_bytes());
    h.update(serde_json::to_string(cfg).expect("config serializes").as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

/// Runs `spec` on `problem` and records a [`TrainTrace`].
///
/// Divergence ends the run early and is recorded in the trace; only
/// configuration errors are returned as `Err`.
pub fn train(problem: &dyn Problem, spec: &ScheduleSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let granularity = cfg.granularity.unwrap_or_else(|| problem.default_granularity());
    let mut trace = TrainTrace::new(
        run_fingerprint(problem, spec, cfg),
        granularity,
        0.0,
        cfg.store_snapshots,
    );
    let end = train_into(problem, spec, cfg, &mut trace)?;
    trace.initial_loss = end.initial_loss;
    Ok(TrainOutcome {
        state: end.state,
        trace,
        final_loss: end.final_loss,
    })
}

struct Diverged(u64);

/// Full-objective loss and gradient at the current iterate, cached until the
/// iterate moves.
struct FullEval<'a> {
    problem: &'a dyn Problem,
    cached: Option<(f64, Vec<f64>)>,
}

impl FullEval<'_> {
    fn get(&mut self, w: &[f64]) -> Result<&(f64, Vec<f64>)> {
        if self.cached.is_none() {
            self.cached = Some(self.problem.eval_grad(w, None)?);
        }
        Ok(self.cached.as_ref().expect("just filled"))
    }

    fn invalidate(&mut self) {
        self.cached = None;
    }
}

/// Like [`train`], streaming rows into `sink`.
pub fn train_into(
    problem: &dyn Problem,
    spec: &ScheduleSpec,
    cfg: &TrainConfig,
    sink: &mut dyn TraceSink,
) -> Result<RunEnd> {
    cfg.validate()?;
    spec.validate(cfg.epochs)?;
    let n_samples = problem.n_samples();
    if n_samples.is_none()
        && spec
            .phases
            .iter()
            .any(|p| matches!(p.batch, BatchMode::MiniBatch { .. }))
    {
        return Err(invalid(format!(
            "mini-batch phases need a dataset, but {} has none",
            problem.describe()
        )));
    }
    let granularity = cfg.granularity.unwrap_or_else(|| problem.default_granularity());
    let reference = problem
        .optimum_hint()
        .map(|x| ReferencePoint::known_optimum(x.to_vec()));

    let w0 = problem.initial_point(seed::derive(cfg.seed, &[seed::STREAM_INIT]));
    if w0.len() != problem.dimension() {
        return Err(invalid("initial point has the wrong dimension"));
    }
    let mut state = MomentumState::new(w0);
    let mut full = FullEval {
        problem,
        cached: None,
    };
    let initial_loss = full.get(&state.w)?.0;
    if !initial_loss.is_finite() {
        return Err(invalid("loss at the initial point is not finite"));
    }
    let limit = cfg.divergence_factor * initial_loss.abs().max(1.0);
    let blown = |loss: f64| !loss.is_finite() || loss > limit;

    let mut order: Vec<usize> = (0..n_samples.unwrap_or(0)).collect();
    let mut shuffle = seed::rng(seed::derive(cfg.seed, &[seed::STREAM_SHUFFLE]));
    let mut current_phase = None;

    let outcome: std::result::Result<(), Diverged> = 'run: {
        for epoch in 0..cfg.epochs {
            let k = spec.phase_index(epoch, cfg.epochs)?;
            let phase = spec.phases[k];
            if current_phase.is_some_and(|c| c != k) && spec.reset_momentum {
                state.g.fill(0.0);
            }
            current_phase = Some(k);
            // Shuffle every epoch so the stream does not depend on the phases.
            if n_samples.is_some() {
                order.shuffle(&mut shuffle);
            }
            let batches: Vec<Option<&[usize]>> = match phase.batch {
                BatchMode::FullBatch => vec![None; cfg.iters_per_epoch],
                BatchMode::MiniBatch { size } => order.chunks(size).map(Some).collect(),
            };

            for batch in batches {
                if granularity == Granularity::Iteration {
                    let (loss, grad) = full.get(&state.w)?;
                    if blown(*loss) || !all_finite(grad) {
                        break 'run Err(Diverged(state.step));
                    }
                    log_row(sink, &state, *loss, grad, &phase, epoch, k, reference.as_ref())?;
                }
                let (loss, grad) = match batch {
                    None => full.get(&state.w)?.clone(),
                    Some(idx) => problem.eval_grad(&state.w, Some(idx))?,
                };
                if blown(loss) {
                    break 'run Err(Diverged(state.step));
                }
                match apply_step(&mut state, &grad, &phase.hyper) {
                    Ok(()) => {}
                    Err(Error::Divergence { step }) => break 'run Err(Diverged(step)),
                    Err(e) => return Err(e),
                }
                full.invalidate();
            }

            if granularity == Granularity::Epoch {
                let (loss, grad) = full.get(&state.w)?;
                if blown(*loss) || !all_finite(grad) {
                    break 'run Err(Diverged(state.step));
                }
                log_row(sink, &state, *loss, grad, &phase, epoch, k, reference.as_ref())?;
            }
        }
        Ok(())
    };

    let (final_loss, diverged_at) = match outcome {
        Ok(()) => {
            let (loss, grad) = full.get(&state.w)?;
            if blown(*loss) || !all_finite(grad) {
                (None, Some(state.step))
            } else {
                (Some(*loss), None)
            }
        }
        Err(Diverged(step)) => (None, Some(step)),
    };
    if let Some(step) = diverged_at {
        sink.diverged(step);
    }
    Ok(RunEnd {
        state,
        initial_loss,
        final_loss,
        diverged_at,
    })
}

#[allow(clippy::too_many_arguments)]
fn log_row(
    sink: &mut dyn TraceSink,
    state: &MomentumState,
    loss: f64,
    grad: &[f64],
    phase: &PhaseSpec,
    epoch: usize,
    phase_index: usize,
    reference: Option<&ReferencePoint>,
) -> Result<()> {
    let hp = &phase.hyper;
    let decayed = decayed_gradient(grad, &state.w, hp.weight_decay);
    let buffer: Vec<f64> = decayed
        .iter()
        .zip(&state.g)
        .map(|(d, g)| hp.momentum * g + d)
        .collect();
    let r = scale(&buffer, &decayed)?;
    let s = match reference {
        Some(x) => alignment(&buffer, &state.w, x)?,
        None => None,
    };
    let row = TraceRow {
        step: state.step,
        epoch,
        phase: phase_index,
        loss,
        grad_norm: norm(&decayed),
        momentum_norm: norm(&buffer),
        scale: r,
        alignment: s,
        eta_effective: r.map(|r| hp.learning_rate * r),
    };
    sink.record(row, &state.w, &buffer);
    Ok(())
}
