//! Batch experiment harness: learning-rate × momentum grids, random search
//! over learning rates and transition-epoch sweeps for two-phase schedules.
//!
//! Runs are independent and execute on the rayon pool; results are always
//! reported in cell order, so output never depends on completion order.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::diagnostics::{TraceRow, TraceSink};
use crate::error::{invalid, Error, Result};
use crate::optim::{train_into, BatchMode, HyperParams, PhaseSpec, ScheduleSpec, TrainConfig};
use crate::problems::{Dataset, Problem};
use crate::seed;
use crate::vecops::{log_spaced, median};

const STREAM_SEARCH: u64 = 0x7365_6172;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eta_values: Vec<f64>,
    pub one_minus_mu_values: Vec<f64>,
    pub repetitions: usize,
}

impl SweepGrid {
    /// `n_eta` log-spaced rates in `eta_range` by `n_mu` log-spaced values of
    /// `1 − μ` in `one_minus_mu_range`.
    pub fn log_spaced(eta_range: (f64, f64), n_eta: usize, one_minus_mu_range: (f64, f64), n_mu: usize) -> Self {
        Self {
            eta_values: log_spaced(eta_range.0, eta_range.1, n_eta),
            one_minus_mu_values: log_spaced(one_minus_mu_range.0, one_minus_mu_range.1, n_mu),
            repetitions: 1,
        }
    }

    /// 50 × 50 grid over `η ∈ [1e-7, 5e5]` and `1 − μ ∈ [1e-3, 1]`.
    pub fn quadratic_default() -> Self {
        Self::log_spaced((1e-7, 5e5), 50, (1e-3, 1.0), 50)
    }

    /// Grid over explicit momentum values.
    pub fn with_momenta(eta_values: Vec<f64>, momenta: &[f64]) -> Self {
        Self {
            eta_values,
            one_minus_mu_values: momenta.iter().map(|m| 1.0 - m).collect(),
            repetitions: 1,
        }
    }

    pub fn momenta(&self) -> Vec<f64> {
        self.one_minus_mu_values.iter().map(|v| 1.0 - v).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.eta_values.len() * self.one_minus_mu_values.len() * self.repetitions
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta_values.is_empty() || self.one_minus_mu_values.is_empty() || self.repetitions == 0 {
            return Err(invalid("sweep grid is empty"));
        }
        if self.eta_values.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(invalid("grid learning rates must be positive"));
        }
        if self.one_minus_mu_values.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(invalid("grid values of 1 - momentum must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Batch mode and weight decay shared by every run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTemplate {
    pub batch: BatchMode,
    pub weight_decay: f64,
}

impl RunTemplate {
    pub fn full_batch() -> Self {
        Self {
            batch: BatchMode::FullBatch,
            weight_decay: 0.0,
        }
    }

    fn phase(&self, eta: f64, mu: f64) -> Result<PhaseSpec> {
        Ok(PhaseSpec {
            hyper: HyperParams::new(eta, mu, self.weight_decay)?,
            batch: self.batch,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Refuse sweeps with more runs than this...
    pub max_runs: usize,
    /// ...unless this is set.
    pub allow_large: bool,
    /// Equal-width bins over the transition axis.
    pub bins: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            max_runs: 2500,
            allow_large: false,
            bins: 10,
        }
    }
}

impl SweepOptions {
    fn check_budget(&self, runs: usize) -> Result<()> {
        if runs > self.max_runs && !self.allow_large {
            return Err(invalid(format!(
                "sweep needs {runs} runs, above the cap of {}; pass the override to run it anyway",
                self.max_runs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub eta: f64,
    pub mu: f64,
    pub seed: u64,
    pub repetition: usize,
    pub transition: Option<usize>,
    /// Full objective after the last update; `None` when diverged.
    pub final_loss: Option<f64>,
    pub status: RunStatus,
    /// Logging point with the lowest loss.
    pub best_step: Option<u64>,
    pub best_epoch: Option<usize>,
    pub held_out_accuracy: Option<f64>,
}

impl CellOutcome {
    pub fn log_final_loss(&self) -> Option<f64> {
        self.final_loss.filter(|&l| l > 0.0).map(f64::ln)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionBin {
    pub lo: f64,
    pub hi: f64,
    pub runs: usize,
    pub diverged: usize,
    pub median_final_loss: Option<f64>,
    pub median_held_out_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Grid,
    RandomSearch,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    /// Heatmap axes for grid sweeps, ascending.
    pub eta_axis: Vec<f64>,
    pub mu_axis: Vec<f64>,
    pub cells: Vec<CellOutcome>,
    pub bins: Vec<TransitionBin>,
}

/// Tracks the lowest logged loss without storing rows.
#[derive(Default)]
struct BestSink {
    best: Option<(f64, u64, usize)>,
}

impl TraceSink for BestSink {
    fn record(&mut self, row: TraceRow, _w: &[f64], _g: &[f64]) {
        if self.best.is_none_or(|(l, _, _)| row.loss < l) {
            self.best = Some((row.loss, row.step, row.epoch));
        }
    }

    fn diverged(&mut self, _step: u64) {}
}

struct RunSpec {
    schedule: ScheduleSpec,
    seed: u64,
    repetition: usize,
    transition: Option<usize>,
}

fn execute(problem: &dyn Problem, held_out: Option<&Dataset>, cfg: &TrainConfig, run: &RunSpec) -> Result<CellOutcome> {
    let cfg = TrainConfig {
        seed: run.seed,
        store_snapshots: false,
        ..cfg.clone()
    };
    let mut sink = BestSink::default();
    let end = train_into(problem, &run.schedule, &cfg, &mut sink)?;
    let last = run.schedule.phases.last().expect("validated schedule").hyper;
    let held_out_accuracy = match (held_out, end.final_loss) {
        (Some(d), Some(_)) => problem.held_out_accuracy(&end.state.w, d),
        _ => None,
    };
    Ok(CellOutcome {
        eta: last.learning_rate,
        mu: last.momentum,
        seed: run.seed,
        repetition: run.repetition,
        transition: run.transition,
        final_loss: end.final_loss,
        status: if end.final_loss.is_some() {
            RunStatus::Ok
        } else {
            RunStatus::Diverged
        },
        best_step: sink.best.map(|b| b.1),
        best_epoch: sink.best.map(|b| b.2),
        held_out_accuracy,
    })
}

fn execute_all(problem: &dyn Problem, held_out: Option<&Dataset>, cfg: &TrainConfig, runs: &[RunSpec]) -> Result<Vec<CellOutcome>> {
    runs.par_iter()
        .map(|r| execute(problem, held_out, cfg, r))
        .collect()
}

/// Seed of repetition `rep`. Shared by every cell so that cells differ only
/// in their hyperparameters.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    seed::derive(seed, &[rep as u64])
}

/// Trains every (η, μ, repetition) cell of `grid` with `cfg`'s budget.
pub fn run_grid(
    problem: &dyn Problem,
    grid: &SweepGrid,
    template: RunTemplate,
    cfg: &TrainConfig,
    seed: u64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    grid.validate()?;
    opts.check_budget(grid.cell_count())?;
    let mut runs = Vec::with_capacity(grid.cell_count());
    for &omm in &grid.one_minus_mu_values {
        for &eta in &grid.eta_values {
            for rep in 0..grid.repetitions {
                runs.push(RunSpec {
                    schedule: ScheduleSpec::single(template.phase(eta, 1.0 - omm)?),
                    seed: repetition_seed(seed, rep),
                    repetition: rep,
                    transition: None,
                });
            }
        }
    }
    let cells = execute_all(problem, None, cfg, &runs)?;
    let mut eta_axis = grid.eta_values.clone();
    eta_axis.sort_by(f64::total_cmp);
    eta_axis.dedup();
    let mut mu_axis = grid.momenta();
    mu_axis.sort_by(f64::total_cmp);
    mu_axis.dedup();
    Ok(SweepResult {
        kind: SweepKind::Grid,
        eta_axis,
        mu_axis,
        cells,
        bins: Vec::new(),
    })
}

/// Samples `n_samples` learning rates log-uniformly from `eta_range` and
/// trains each at momentum `mu`. Every sample uses the same run seed.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    problem: &dyn Problem,
    held_out: Option<&Dataset>,
    eta_range: (f64, f64),
    mu: f64,
    n_samples: usize,
    template: RunTemplate,
    cfg: &TrainConfig,
    seed: u64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let (lo, hi) = eta_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(invalid(format!("bad learning-rate range [{lo}, {hi}]")));
    }
    if n_samples == 0 {
        return Err(invalid("random search needs at least one sample"));
    }
    opts.check_budget(n_samples)?;
    let etas = sample_log_uniform(lo, hi, n_samples, seed);
    let runs = etas
        .iter()
        .map(|&eta| {
            Ok(RunSpec {
                schedule: ScheduleSpec::single(template.phase(eta, mu)?),
                seed: repetition_seed(seed, 0),
                repetition: 0,
                transition: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = execute_all(problem, held_out, cfg, &runs)?;
    Ok(SweepResult {
        kind: SweepKind::RandomSearch,
        eta_axis: Vec::new(),
        mu_axis: vec![mu],
        cells,
        bins: Vec::new(),
    })
}

/// Log-uniform draws from `[lo, hi]`.
pub fn sample_log_uniform(lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed::derive(seed, &[STREAM_SEARCH]));
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (a + (b - a) * u).exp().clamp(lo, hi)
        })
        .collect()
}

/// Trains `template` with its (single) transition moved to each candidate
/// epoch, once per seed, then reports per-bin medians of the final loss and,
/// when `held_out` is given, of held-out accuracy.
#[allow(clippy::too_many_arguments)]
pub fn transition_sweep(
    problem: &dyn Problem,
    held_out: Option<&Dataset>,
    template: &ScheduleSpec,
    candidates: &[usize],
    cfg: &TrainConfig,
    seeds: &[u64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if template.phases.len() != 2 {
        return Err(invalid("transition sweeps need a two-phase template"));
    }
    if candidates.is_empty() || seeds.is_empty() {
        return Err(invalid("transition sweep needs candidates and seeds"));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= cfg.epochs) {
        return Err(invalid(format!(
            "transition candidate {bad} is not below the budget of {} epochs",
            cfg.epochs
        )));
    }
    opts.check_budget(candidates.len() * seeds.len())?;
    let mut runs = Vec::new();
    for &c in candidates {
        for &s in seeds {
            let mut schedule = template.clone();
            schedule.transition_epochs = vec![c];
            schedule.validate(cfg.epochs)?;
            runs.push(RunSpec {
                schedule,
                seed: s,
                repetition: 0,
                transition: Some(c),
            });
        }
    }
    let cells = execute_all(problem, held_out, cfg, &runs)?;
    let bins = bin_transitions(&cells, opts.bins.max(1));
    Ok(SweepResult {
        kind: SweepKind::Transition,
        eta_axis: Vec::new(),
        mu_axis: Vec::new(),
        cells,
        bins,
    })
}

/// Equal-width bins over the transition range; only non-empty bins are kept.
pub fn bin_transitions(cells: &[CellOutcome], n_bins: usize) -> Vec<TransitionBin> {
    let ts: Vec<f64> = cells.iter().filter_map(|c| c.transition).map(|t| t as f64).collect();
    let (Some(lo), Some(hi)) = (
        ts.iter().copied().reduce(f64::min),
        ts.iter().copied().reduce(f64::max),
    ) else {
        return Vec::new();
    };
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let index = |t: f64| (((t - lo) / width) as usize).min(n_bins - 1);
    let mut members: Vec<Vec<&CellOutcome>> = vec![Vec::new(); n_bins];
    for c in cells {
        if let Some(t) = c.transition {
            members[index(t as f64)].push(c);
        }
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| {
            let losses: Vec<f64> = m.iter().filter_map(|c| c.final_loss).collect();
            let accs: Vec<f64> = m.iter().filter_map(|c| c.held_out_accuracy).collect();
            TransitionBin {
                lo: lo + width * i as f64,
                hi: lo + width * (i + 1) as f64,
                runs: m.len(),
                diverged: m.iter().filter(|c| c.status == RunStatus::Diverged).count(),
                median_final_loss: median(&losses),
                median_held_out_accuracy: median(&accs),
            }
        })
        .collect()
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool for `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn better(a: &CellOutcome, b: &CellOutcome) -> bool {
    match (a.final_loss, b.final_loss) {
        (Some(x), Some(y)) => x < y || (x == y && a.eta < b.eta),
        (Some(_), None) => true,
        _ => false,
    }
}

impl SweepResult {
    /// Lowest final loss; ties go to the smaller learning rate.
    pub fn argmin(&self) -> Option<&CellOutcome> {
        self.cells
            .iter()
            .filter(|c| c.final_loss.is_some())
            .fold(None, |best: Option<&CellOutcome>, c| match best {
                Some(b) if !better(c, b) => Some(b),
                _ => Some(c),
            })
    }

    /// Highest final loss among the runs that did not diverge.
    pub fn argmax(&self) -> Option<&CellOutcome> {
        self.cells
            .iter()
            .filter(|c| c.final_loss.is_some())
            .fold(None, |worst: Option<&CellOutcome>, c| match worst {
                Some(w) if c.final_loss <= w.final_loss => Some(w),
                _ => Some(c),
            })
    }

    /// Best cell for each momentum on the axis.
    pub fn best_per_mu(&self) -> Vec<(f64, Option<&CellOutcome>)> {
        let mut mus: Vec<f64> = self.cells.iter().map(|c| c.mu).collect();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        mus.into_iter()
            .map(|mu| {
                let best = self
                    .cells
                    .iter()
                    .filter(|c| c.mu == mu && c.final_loss.is_some())
                    .fold(None, |best: Option<&CellOutcome>, c| match best {
                        Some(b) if !better(c, b) => Some(b),
                        _ => Some(c),
                    });
                (mu, best)
            })
            .collect()
    }

    /// Median log final loss of every (η, μ) cell over repetitions, indexed
    /// `[mu][eta]` along the axes; `None` where every repetition diverged.
    pub fn log_loss_matrix(&self) -> Result<Vec<Vec<Option<f64>>>> {
        if self.eta_axis.is_empty() || self.mu_axis.is_empty() {
            return Err(invalid("sweep result has no grid axes"));
        }
        let mut m = Vec::with_capacity(self.mu_axis.len());
        for &mu in &self.mu_axis {
            let mut row = Vec::with_capacity(self.eta_axis.len());
            for &eta in &self.eta_axis {
                let here: Vec<&CellOutcome> = self
                    .cells
                    .iter()
                    .filter(|c| c.eta == eta && c.mu == mu)
                    .collect();
                if here.is_empty() {
                    return Err(invalid(format!("grid is missing the cell eta={eta}, mu={mu}")));
                }
                let logs: Vec<f64> = here.iter().filter_map(|c| c.log_final_loss()).collect();
                row.push(median(&logs));
            }
            m.push(row);
        }
        Ok(m)
    }

    /// Long-format CSV: `eta,mu,seed,transition,final_loss,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(err)?;
        for c in &self.cells {
            w.write_record([
                c.eta.to_string(),
                c.mu.to_string(),
                c.seed.to_string(),
                c.transition.map(|t| t.to_string()).unwrap_or_default(),
                c.final_loss
                    .map_or_else(|| crate::diagnostics::UNDEFINED.to_string(), |l| l.to_string()),
                c.status.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Rebuilds a result from its CSV. Axes are the distinct values found;
    /// bins are recomputed for transition sweeps.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(err)?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Parse(format!("unexpected sweep header {header:?}")));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse(format!("bad {what} {s:?}")))
        };
        let mut cells = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            let status = match &rec[5] {
                "ok" => RunStatus::Ok,
                "diverged" => RunStatus::Diverged,
                other => return Err(Error::Parse(format!("bad status {other:?}"))),
            };
            cells.push(CellOutcome {
                eta: num(&rec[0], "eta")?,
                mu: num(&rec[1], "mu")?,
                seed: rec[2].parse().map_err(|_| Error::Parse(format!("bad seed {:?}", &rec[2])))?,
                repetition: 0,
                transition: if rec[3].is_empty() {
                    None
                } else {
                    Some(rec[3].parse().map_err(|_| Error::Parse(format!("bad transition {:?}", &rec[3])))?)
                },
                final_loss: if &rec[4] == crate::diagnostics::UNDEFINED {
                    None
                } else {
                    Some(num(&rec[4], "final_loss")?)
                },
                status,
                best_step: None,
                best_epoch: None,
                held_out_accuracy: None,
            });
        }
        let is_transition = cells.iter().any(|c| c.transition.is_some());
        let axis = |f: fn(&CellOutcome) -> f64| {
            let mut v: Vec<f64> = cells.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        Ok(if is_transition {
            let bins = bin_transitions(&cells, SweepOptions::default().bins);
            Self {
                kind: SweepKind::Transition,
                eta_axis: Vec::new(),
                mu_axis: Vec::new(),
                cells,
                bins,
            }
        } else {
            Self {
                kind: SweepKind::Grid,
                eta_axis: axis(|c| c.eta),
                mu_axis: axis(|c| c.mu),
                cells,
                bins: Vec::new(),
            }
        })
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: SweepKind,
            runs: usize,
            diverged: usize,
            best: Option<&'a CellOutcome>,
            worst: Option<&'a CellOutcome>,
            best_per_mu: Vec<(f64, Option<&'a CellOutcome>)>,
            bins: &'a [TransitionBin],
        }
        let s = Summary {
            kind: self.kind,
            runs: self.cells.len(),
            diverged: self.cells.iter().filter(|c| c.status == RunStatus::Diverged).count(),
            best: self.argmin(),
            worst: self.argmax(),
            best_per_mu: self.best_per_mu(),
            bins: &self.bins,
        };
        serde_json::to_string_pretty(&s).expect("summary serializes")
    }
}

const CSV_HEADER: [&str; 6] = ["eta", "mu", "seed", "transition", "final_loss", "status"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_dataset, make_quadratic, Activation, MlpModel, MlpProblem};

    #[test]
    fn grid_coverage_and_status() {
        let p = make_quadratic(4, 10.0, 1).unwrap();
        let l = p.lambda_max();
        let mut grid = SweepGrid::with_momenta(vec![0.1 / l, 0.5 / l, 3.0 / l], &[0.0, 0.5]);
        grid.repetitions = 2;
        let r = run_grid(&p, &grid, RunTemplate::full_batch(), &TrainConfig::iterations(200, 0), 3, &SweepOptions::default()).unwrap();
        assert_eq!(r.cells.len(), 12);
        for c in &r.cells {
            let stable = c.eta * l < 1.0 + c.mu;
            assert_eq!(c.status == RunStatus::Ok, stable, "{c:?}");
        }
        let m = r.log_loss_matrix().unwrap();
        assert_eq!((m.len(), m[0].len()), (2, 3));
        assert!(m[0][2].is_none());
    }

    #[test]
    fn unstable_grid_all_diverge() {
        let p = make_quadratic(5, 100.0, 2).unwrap();
        let l = p.lambda_max();
        let grid = SweepGrid::with_momenta(vec![1.5 / l, 3.0 / l, 10.0 / l], &[0.0]);
        let r = run_grid(&p, &grid, RunTemplate::full_batch(), &TrainConfig::iterations(10_000, 0), 0, &SweepOptions::default()).unwrap();
        assert!(r.cells.iter().all(|c| c.status == RunStatus::Diverged));
        assert!(r.argmin().is_none());
    }

    #[test]
    fn permuting_the_grid_keeps_cell_results() {
        let p = make_quadratic(4, 10.0, 1).unwrap();
        let cfg = TrainConfig::iterations(50, 0);
        let a = SweepGrid::with_momenta(vec![0.01, 0.02, 0.04], &[0.0, 0.9]);
        let b = SweepGrid::with_momenta(vec![0.04, 0.01, 0.02], &[0.9, 0.0]);
        let opts = SweepOptions::default();
        let ra = run_grid(&p, &a, RunTemplate::full_batch(), &cfg, 5, &opts).unwrap();
        let rb = run_grid(&p, &b, RunTemplate::full_batch(), &cfg, 5, &opts).unwrap();
        for c in &ra.cells {
            let twin = rb.cells.iter().find(|d| d.eta == c.eta && d.mu == c.mu).unwrap();
            assert_eq!(c, twin);
        }
        assert_eq!(ra.log_loss_matrix().unwrap(), rb.log_loss_matrix().unwrap());
    }

    #[test]
    fn budget_guardrail() {
        let p = make_quadratic(2, 1.0, 0).unwrap();
        let grid = SweepGrid::log_spaced((1e-3, 1e-1), 10, (0.1, 1.0), 10);
        let opts = SweepOptions {
            max_runs: 50,
            ..SweepOptions::default()
        };
        let cfg = TrainConfig::iterations(2, 0);
        assert!(run_grid(&p, &grid, RunTemplate::full_batch(), &cfg, 0, &opts).is_err());
        let opts = SweepOptions {
            allow_large: true,
            ..opts
        };
        assert_eq!(run_grid(&p, &grid, RunTemplate::full_batch(), &cfg, 0, &opts).unwrap().cells.len(), 100);
    }

    #[test]
    fn random_search_samples() {
        let v = sample_log_uniform(1e-3, 10.0, 20, 4);
        assert_eq!(v.len(), 20);
        assert!(v.iter().all(|&x| (1e-3..=10.0).contains(&x)));
        assert_eq!(v, sample_log_uniform(1e-3, 10.0, 20, 4));

        let p = make_quadratic(3, 10.0, 0).unwrap();
        let cfg = TrainConfig::iterations(20, 0);
        let r = random_search(&p, None, (1e-3, 1e-2), 0.5, 1, RunTemplate::full_batch(), &cfg, 1, &SweepOptions::default()).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.argmin(), r.argmax());
        assert_eq!(r.argmin(), Some(&r.cells[0]));
        assert!(random_search(&p, None, (1e-2, 1e-3), 0.5, 1, RunTemplate::full_batch(), &cfg, 1, &SweepOptions::default()).is_err());
    }

    fn toy() -> (MlpProblem, Dataset) {
        let data = make_dataset("two_moons", 80, 0.15, 3).unwrap();
        let (train, test) = data.split(20).unwrap();
        let p = MlpProblem::new(MlpModel::new(vec![2, 8, 2], Activation::Tanh).unwrap(), train).unwrap();
        (p, test)
    }

    fn two_phase() -> ScheduleSpec {
        ScheduleSpec::two_phase(
            PhaseSpec::minibatch(HyperParams::new(0.5, 0.0, 0.0).unwrap(), 20),
            PhaseSpec::minibatch(HyperParams::new(0.05, 0.9, 0.0).unwrap(), 20),
            1,
        )
    }

    #[test]
    fn transition_counting_contract() {
        let (p, test) = toy();
        let cfg = TrainConfig::epochs(40, 0);
        let r = transition_sweep(&p, Some(&test), &two_phase(), &[10, 20, 30], &cfg, &[1, 2, 3], &SweepOptions::default()).unwrap();
        assert_eq!(r.cells.len(), 9);
        assert_eq!(r.bins.len(), 3);
        assert!(r.bins.iter().all(|b| b.runs == 3));
        assert!(r.bins.iter().all(|b| b.median_held_out_accuracy.is_some()));

        let back = SweepResult::read_csv(r.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back.bins.len(), 3);
        for (a, b) in back.bins.iter().zip(&r.bins) {
            assert_eq!(a.median_final_loss, b.median_final_loss);
        }
    }

    #[test]
    fn transition_candidates_validated_first() {
        let (p, _) = toy();
        let cfg = TrainConfig::epochs(10, 0);
        assert!(transition_sweep(&p, None, &two_phase(), &[5, 10], &cfg, &[1], &SweepOptions::default()).is_err());
    }

    #[test]
    fn bins_ignore_completion_order() {
        let (p, _) = toy();
        let cfg = TrainConfig::epochs(12, 0);
        let r = transition_sweep(&p, None, &two_phase(), &[2, 5, 9], &cfg, &[1, 2], &SweepOptions::default()).unwrap();
        let mut shuffled = r.cells.clone();
        shuffled.reverse();
        assert_eq!(bin_transitions(&shuffled, 10), r.bins);
    }

    #[test]
    fn csv_round_trip() {
        let p = make_quadratic(4, 10.0, 1).unwrap();
        let l = p.lambda_max();
        let grid = SweepGrid::with_momenta(vec![0.1 / l, 5.0 / l], &[0.0, 0.9]);
        let r = run_grid(&p, &grid, RunTemplate::full_batch(), &TrainConfig::iterations(100, 0), 0, &SweepOptions::default()).unwrap();
        let text = r.to_csv_string();
        assert!(text.starts_with("eta,mu,seed,transition,final_loss,status\n"));
        let back = SweepResult::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.to_csv_string(), text);
        assert_eq!(back.log_loss_matrix().unwrap(), r.log_loss_matrix().unwrap());
    }
}
