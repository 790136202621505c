//! Subcommands: validation into a [`Job`], then execution into artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use steplab::diagnostics::{annotate_alignment, read_rows_csv, Granularity, ReferencePoint, TrainTrace};
use steplab::equivalence::{equivalence_sweep, MatchSettings};
use steplab::optim::{train, BatchMode, ScheduleSpec, TrainConfig};
use steplab::report::{
    render_heatmap, render_panels, render_series, summarize_labelled, summarize_sweep, trace_series, transition_series,
    Metric, PlotKind, PlotSpec, Series,
};
use steplab::sweep::{
    random_search, repetition_seed, run_grid, transition_sweep, RunTemplate, SweepGrid, SweepKind, SweepOptions,
    SweepResult,
};

use crate::config::{check_momenta, validate_axis, BuiltProblem, CommandKind, ExperimentConfig, SweepMode};
use crate::error::CliError;
use crate::output::Artifacts;

/// What a validated command will do.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub command: String,
    pub run_dir: PathBuf,
    pub runs: usize,
    pub steps_per_run: u64,
    pub notes: Vec<String>,
}

impl Plan {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "output: {}", self.run_dir.display());
        let _ = writeln!(s, "runs: {}", self.runs);
        let _ = writeln!(s, "steps per run (at most): {}", self.steps_per_run);
        let _ = writeln!(s, "total steps (at most): {}", self.runs as u64 * self.steps_per_run);
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        s
    }
}

/// Fully validated command ready to run.
pub struct Job {
    pub plan: Plan,
    kind: JobKind,
}

enum JobKind {
    Experiment {
        config: Box<ExperimentConfig>,
        problem: Box<BuiltProblem>,
        command: CommandKind,
    },
    Report {
        inputs: Vec<PathBuf>,
    },
}

impl Job {
    pub fn execute(&self) -> Result<Artifacts, CliError> {
        match &self.kind {
            JobKind::Experiment {
                config,
                problem,
                command,
            } => {
                let mut a = match command {
                    CommandKind::QuadraticDemo => quadratic_demo(config, problem)?,
                    CommandKind::Train => run_train(config, problem)?,
                    CommandKind::Equivalence => run_equivalence(config, problem)?,
                    CommandKind::Sweep => run_sweep(config, problem)?,
                };
                a.add("config.json", config.snapshot());
                Ok(a)
            }
            JobKind::Report { inputs } => run_report(inputs),
        }
    }
}

fn steps_per_epoch(config: &ExperimentConfig, problem: &BuiltProblem, batch: Option<usize>) -> u64 {
    match (batch, problem.as_dyn().n_samples()) {
        (Some(b), Some(n)) => n.div_ceil(b.max(1)) as u64,
        _ => config.training.iters_per_epoch as u64,
    }
}

/// Validates `config` for `command` and builds the problem.
pub fn prepare(command: CommandKind, config: ExperimentConfig, out_root: &Path) -> Result<Job, CliError> {
    config.check_command(command)?;
    let cfg = config.train_config()?;
    let problem = config.build_problem()?;
    let run_dir = out_root.join(config.run_name(command));
    let epochs = cfg.epochs as u64;
    let (runs, steps, notes) = match command {
        CommandKind::QuadraticDemo => {
            let d = config
                .demo
                .as_ref()
                .ok_or_else(|| CliError::config("quadratic-demo needs a [demo] section"))?;
            if problem.lambda_max().is_none() {
                return Err(CliError::config("quadratic-demo needs a quadratic problem"));
            }
            check_momenta(&d.momenta, "demo.momenta")?;
            validate_axis(&d.eta, "demo.eta")?;
            let runs = d.momenta.len() * d.eta.n + d.momenta.len();
            (runs, epochs * cfg.iters_per_epoch as u64, vec![format!("tuning grid: {} rates x {} momenta", d.eta.n, d.momenta.len())])
        }
        CommandKind::Train => {
            let spec = config.schedule()?;
            let runs = match &config.compare {
                Some(c) => {
                    check_momenta(&c.momenta, "compare.momenta")?;
                    if spec.phases.len() != 1 {
                        return Err(CliError::config("[compare] needs a single-phase schedule"));
                    }
                    c.momenta.len()
                }
                None => 1,
            };
            let per_epoch = config
                .phases
                .iter()
                .map(|p| steps_per_epoch(&config, &problem, p.batch_size))
                .max()
                .unwrap_or(1);
            (runs, epochs * per_epoch, vec![format!("phases: {}", spec.phases.len())])
        }
        CommandKind::Equivalence => {
            let e = config
                .equivalence
                .as_ref()
                .ok_or_else(|| CliError::config("equivalence needs an [equivalence] section"))?;
            check_momenta(&e.momenta, "equivalence.momenta")?;
            validate_axis(&e.candidates, "equivalence.candidates")?;
            if e.baseline_etas.is_empty() || e.baseline_etas.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(CliError::config("equivalence.baseline_etas must be positive and non-empty"));
            }
            if e.relative_to_lambda_max && problem.lambda_max().is_none() {
                return Err(CliError::config("relative_to_lambda_max needs a quadratic problem"));
            }
            let runs = e.baseline_etas.len() * (1 + e.momenta.len() * e.candidates.n);
            (runs, epochs * cfg.iters_per_epoch as u64, Vec::new())
        }
        CommandKind::Sweep => {
            let s = config
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::config("sweep needs a [sweep] section"))?;
            let per_epoch = steps_per_epoch(&config, &problem, s.batch_size);
            let (runs, steps) = match s.mode {
                SweepMode::Grid => {
                    let grid = grid_of(&config, &problem)?;
                    (grid.cell_count(), epochs * per_epoch)
                }
                SweepMode::Random => {
                    let n = s.samples.ok_or_else(|| CliError::config("random sweeps need sweep.samples"))?;
                    if n == 0 || s.ranges.is_empty() {
                        return Err(CliError::config("random sweeps need samples >= 1 and at least one range"));
                    }
                    for r in &s.ranges {
                        check_momenta(&[r.momentum], "sweep.ranges")?;
                        if !(r.eta_lo > 0.0 && r.eta_lo <= r.eta_hi && r.eta_hi.is_finite()) {
                            return Err(CliError::config(format!(
                                "sweep.ranges: bad learning-rate range [{}, {}]",
                                r.eta_lo, r.eta_hi
                            )));
                        }
                    }
                    (n * s.ranges.len(), epochs * per_epoch)
                }
                SweepMode::Transition => {
                    let spec = config.schedule()?;
                    if spec.phases.len() != 2 {
                        return Err(CliError::config("transition sweeps need exactly two phases"));
                    }
                    let seeds = s.seeds.unwrap_or(1);
                    if s.candidates.is_empty() || seeds == 0 {
                        return Err(CliError::config("transition sweeps need candidates and seeds >= 1"));
                    }
                    if let Some(c) = s.candidates.iter().find(|&&c| c >= cfg.epochs) {
                        return Err(CliError::config(format!(
                            "transition candidate {c} is not below the budget of {} epochs",
                            cfg.epochs
                        )));
                    }
                    let per_epoch = config
                        .phases
                        .iter()
                        .map(|p| steps_per_epoch(&config, &problem, p.batch_size))
                        .max()
                        .unwrap_or(1);
                    (s.candidates.len() * seeds, epochs * per_epoch)
                }
            };
            if runs > s.max_runs && !s.allow_large {
                return Err(CliError::config(format!(
                    "sweep needs {runs} runs, above sweep.max_runs = {}; set sweep.allow_large to run it",
                    s.max_runs
                )));
            }
            (runs, steps, vec![format!("mode: {:?}", s.mode).to_lowercase()])
        }
    };
    Ok(Job {
        plan: Plan {
            command: command.as_str().into(),
            run_dir,
            runs,
            steps_per_run: steps,
            notes,
        },
        kind: JobKind::Experiment {
            config: Box::new(config),
            problem: Box::new(problem),
            command,
        },
    })
}

/// Validates report inputs.
pub fn prepare_report(inputs: Vec<PathBuf>, name: &str, out_root: &Path) -> Result<Job, CliError> {
    if inputs.is_empty() {
        return Err(CliError::config("report needs at least one input file"));
    }
    for p in &inputs {
        std::fs::metadata(p).map_err(|e| CliError::io(p, e))?;
    }
    Ok(Job {
        plan: Plan {
            command: "report".into(),
            run_dir: out_root.join(name),
            runs: 0,
            steps_per_run: 0,
            notes: inputs.iter().map(|p| format!("input: {}", p.display())).collect(),
        },
        kind: JobKind::Report { inputs },
    })
}

fn unit(relative: bool, problem: &BuiltProblem) -> Result<f64, CliError> {
    match (relative, problem.lambda_max()) {
        (false, _) => Ok(1.0),
        (true, Some(l)) => Ok(1.0 / l),
        (true, None) => Err(CliError::config("relative_to_lambda_max needs a quadratic problem")),
    }
}

fn grid_of(config: &ExperimentConfig, problem: &BuiltProblem) -> Result<SweepGrid, CliError> {
    let s = config.sweep.as_ref().expect("checked by caller");
    let eta = s.eta.ok_or_else(|| CliError::config("grid sweeps need sweep.eta"))?;
    validate_axis(&eta, "sweep.eta")?;
    let etas = eta.values(unit(s.relative_to_lambda_max, problem)?);
    let mut grid = match (&s.one_minus_mu, &s.momenta) {
        (Some(a), None) => {
            validate_axis(a, "sweep.one_minus_mu")?;
            if a.hi > 1.0 {
                return Err(CliError::config("sweep.one_minus_mu must not exceed 1"));
            }
            SweepGrid {
                eta_values: etas,
                one_minus_mu_values: a.values(1.0),
                repetitions: 1,
            }
        }
        (None, Some(m)) => {
            check_momenta(m, "sweep.momenta")?;
            SweepGrid::with_momenta(etas, m)
        }
        _ => return Err(CliError::config("grid sweeps need exactly one of sweep.one_minus_mu and sweep.momenta")),
    };
    grid.repetitions = s.repetitions;
    grid.validate().map_err(CliError::from_config)?;
    Ok(grid)
}

fn fmt_label(v: f64) -> String {
    v.to_string()
}

fn positive(series: &[Series]) -> bool {
    series.iter().flat_map(|s| s.y.iter().flatten()).all(|&v| v > 0.0)
}

/// Loss plot, log scale when every value is positive.
fn loss_plot(series: &[Series], title: &str, x_label: &str) -> Result<String, CliError> {
    let mut spec = PlotSpec::new(PlotKind::MultiLine).titled(title, x_label, "training loss");
    if positive(series) {
        spec = spec.log_y();
    }
    render_series(series, &spec).map_err(CliError::from_run)
}

fn diagnostics_plot(traces: &[(String, &TrainTrace)], title: &str, x_label: &str) -> Result<String, CliError> {
    let loss: Vec<Series> = traces.iter().map(|(l, t)| trace_series(t, Metric::Loss, l)).collect();
    let align: Vec<Series> = traces.iter().map(|(l, t)| trace_series(t, Metric::Alignment, l)).collect();
    let scale: Vec<Series> = traces.iter().map(|(l, t)| trace_series(t, Metric::Scale, l)).collect();
    let mut loss_spec = PlotSpec::new(PlotKind::MultiLine).titled("training loss", x_label, "loss");
    if positive(&loss) {
        loss_spec = loss_spec.log_y();
    }
    let panels = vec![
        (loss, loss_spec),
        (align, PlotSpec::new(PlotKind::MultiLine).titled("alignment s", x_label, "s")),
        (scale, PlotSpec::new(PlotKind::MultiLine).titled("scale r", x_label, "r")),
    ];
    render_panels(&panels, title).map_err(CliError::from_run)
}

fn csv_of(trace: &TrainTrace) -> String {
    trace.to_csv_string()
}

fn quadratic_demo(config: &ExperimentConfig, problem: &BuiltProblem) -> Result<Artifacts, CliError> {
    let d = config.demo.as_ref().expect("validated");
    let p = problem.as_dyn();
    let cfg = TrainConfig {
        granularity: Some(Granularity::Iteration),
        seed: repetition_seed(config.seed, 0),
        ..config.train_config()?
    };
    let etas = d.eta.values(unit(d.relative_to_lambda_max, problem)?);
    let grid = SweepGrid::with_momenta(etas, &d.momenta);
    let opts = SweepOptions {
        allow_large: true,
        ..SweepOptions::default()
    };
    let tuning = run_grid(p, &grid, RunTemplate::full_batch(), &cfg, config.seed, &opts).map_err(CliError::from_run)?;

    let mut a = Artifacts::default();
    let mut traces = Vec::new();
    let mut tuned = String::from("mu,eta,final_loss\n");
    for (mu, best) in tuning.best_per_mu() {
        let best = best.ok_or_else(|| CliError::Run(format!("every learning rate diverged for momentum {mu}")))?;
        let spec = single(best.eta, mu, 0.0, BatchMode::FullBatch)?;
        let out = train(p, &spec, &cfg).map_err(CliError::from_run)?;
        let _ = writeln!(
            tuned,
            "{mu},{},{}",
            best.eta,
            out.final_loss.map_or_else(|| "undefined".into(), |l| l.to_string())
        );
        a.add(format!("trace_mu{}.csv", fmt_label(mu)), csv_of(&out.trace));
        traces.push((format!("mu={}", fmt_label(mu)), out.trace));
    }
    let labelled: Vec<(String, &TrainTrace)> = traces.iter().map(|(l, t)| (l.clone(), t)).collect();
    a.add("summary.csv", summarize_labelled(&labelled).to_csv_string());
    a.add("tuned.csv", tuned);
    a.add("tuning.csv", tuning.to_csv_string());
    a.add("tuning_summary.csv", summarize_sweep(&tuning).to_csv_string());
    a.add(
        "tuning_heatmap.svg",
        render_heatmap(
            &tuning,
            &PlotSpec::new(PlotKind::Heatmap).titled("log f after tuning budget", "learning rate", "momentum"),
        )
        .map_err(CliError::from_run)?,
    );
    a.add("demo.svg", diagnostics_plot(&labelled, "heavy ball on a quadratic", "iteration")?);
    Ok(a)
}

fn single(eta: f64, mu: f64, wd: f64, batch: BatchMode) -> Result<ScheduleSpec, CliError> {
    let hyper = steplab::HyperParams::new(eta, mu, wd).map_err(CliError::from_config)?;
    Ok(ScheduleSpec::single(steplab::PhaseSpec { hyper, batch }))
}

#[derive(serde::Serialize)]
struct RunRecord {
    run: String,
    final_loss: Option<f64>,
    diverged_at: Option<u64>,
    train_accuracy: Option<f64>,
    held_out_accuracy: Option<f64>,
}

fn run_train(config: &ExperimentConfig, problem: &BuiltProblem) -> Result<Artifacts, CliError> {
    let p = problem.as_dyn();
    let base = config.schedule()?;
    let needs_reference = p.optimum_hint().is_none();
    let cfg = TrainConfig {
        store_snapshots: needs_reference,
        ..config.train_config()?
    };
    let variants: Vec<(String, ScheduleSpec)> = match &config.compare {
        None => vec![("run".into(), base)],
        Some(c) => c
            .momenta
            .iter()
            .map(|&mu| {
                let mut s = base.clone();
                s.phases[0].hyper.momentum = mu;
                (format!("mu={}", fmt_label(mu)), s)
            })
            .collect(),
    };
    let mut a = Artifacts::default();
    let mut traces = Vec::new();
    let mut records = Vec::new();
    for (label, spec) in &variants {
        let out = train(p, spec, &cfg).map_err(CliError::from_run)?;
        let mut trace = out.trace.clone();
        if needs_reference && !trace.rows.is_empty() && !trace.is_diverged() {
            let reference = ReferencePoint::final_iterate(&trace).map_err(CliError::from_run)?;
            trace = annotate_alignment(&trace, &reference).map_err(CliError::from_run)?;
        }
        trace.snapshots = None;
        let ok = out.final_loss.is_some();
        records.push(RunRecord {
            run: label.clone(),
            final_loss: out.final_loss,
            diverged_at: out.trace.diverged_at,
            train_accuracy: ok.then(|| p.accuracy(&out.state.w)).flatten(),
            held_out_accuracy: problem
                .held_out()
                .filter(|_| ok)
                .and_then(|d| p.held_out_accuracy(&out.state.w, d)),
        });
        let file = if config.compare.is_some() {
            format!("trace_{}.csv", label.replace('=', ""))
        } else {
            "trace.csv".to_string()
        };
        a.add(file, csv_of(&trace));
        traces.push((label.clone(), trace));
    }
    let labelled: Vec<(String, &TrainTrace)> = traces.iter().map(|(l, t)| (l.clone(), t)).collect();
    let x_label = match traces.first().map(|t| t.1.granularity) {
        Some(Granularity::Epoch) => "step (epoch ends)",
        _ => "iteration",
    };
    a.add("summary.csv", summarize_labelled(&labelled).to_csv_string());
    a.add(
        "runs.json",
        serde_json::to_string_pretty(&records).expect("records serialize") + "\n",
    );
    let loss: Vec<Series> = labelled.iter().map(|(l, t)| trace_series(t, Metric::Loss, l)).collect();
    a.add("loss.svg", loss_plot(&loss, "training loss", x_label)?);
    a.add("diagnostics.svg", diagnostics_plot(&labelled, "momentum diagnostics", x_label)?);
    Ok(a)
}

fn run_equivalence(config: &ExperimentConfig, problem: &BuiltProblem) -> Result<Artifacts, CliError> {
    let e = config.equivalence.as_ref().expect("validated");
    let u = unit(e.relative_to_lambda_max, problem)?;
    let settings = MatchSettings {
        train: config.train_config()?,
        batch: BatchMode::FullBatch,
        weight_decay: 0.0,
        space: e.space,
    };
    let baselines: Vec<f64> = e.baseline_etas.iter().map(|v| v * u).collect();
    let report = equivalence_sweep(problem.as_dyn(), &baselines, &e.momenta, &e.candidates.values(u), &settings)
        .map_err(CliError::from_run)?;
    let mut a = Artifacts::default();
    let mut table = Vec::new();
    report.write_match_table(&mut table).map_err(CliError::from_run)?;
    a.add("match_table.csv", table);
    a.add("fit_summary.json", report.fit_summary_json() + "\n");
    let series: Vec<Series> = e
        .momenta
        .iter()
        .map(|&mu| {
            let ms: Vec<_> = report.matches.iter().filter(|m| m.candidate_mu == mu).collect();
            Series {
                label: format!("mu={}", fmt_label(mu)),
                x: ms.iter().map(|m| m.baseline_eta()).collect(),
                y: ms.iter().map(|m| Some(m.matched_eta)).collect(),
            }
        })
        .filter(|s| !s.x.is_empty())
        .collect();
    if !series.is_empty() {
        let spec = PlotSpec::new(PlotKind::MultiLine)
            .log_x()
            .log_y()
            .titled("equivalent learning rates", "baseline learning rate (mu=0)", "matched learning rate");
        a.add("equivalence.svg", render_series(&series, &spec).map_err(CliError::from_run)?);
    }
    Ok(a)
}

fn run_sweep(config: &ExperimentConfig, problem: &BuiltProblem) -> Result<Artifacts, CliError> {
    let s = config.sweep.as_ref().expect("validated");
    let p = problem.as_dyn();
    let cfg = config.train_config()?;
    let opts = SweepOptions {
        max_runs: s.max_runs,
        allow_large: s.allow_large,
        bins: s.bins,
    };
    let template = RunTemplate {
        batch: s.batch_size.map_or(BatchMode::FullBatch, |size| BatchMode::MiniBatch { size }),
        weight_decay: s.weight_decay,
    };
    let result = match s.mode {
        SweepMode::Grid => {
            let grid = grid_of(config, problem)?;
            run_grid(p, &grid, template, &cfg, config.seed, &opts).map_err(CliError::from_run)?
        }
        SweepMode::Random => {
            let mut merged: Option<SweepResult> = None;
            let n = s.samples.expect("validated");
            for r in &s.ranges {
                let part = random_search(p, problem.held_out(), (r.eta_lo, r.eta_hi), r.momentum, n, template, &cfg, config.seed, &SweepOptions { allow_large: true, ..opts.clone() })
                    .map_err(CliError::from_run)?;
                match &mut merged {
                    None => merged = Some(part),
                    Some(m) => {
                        m.cells.extend(part.cells);
                        m.mu_axis.extend(part.mu_axis);
                    }
                }
            }
            merged.expect("at least one range")
        }
        SweepMode::Transition => {
            let template = config.schedule()?;
            let seeds: Vec<u64> = (0..s.seeds.unwrap_or(1)).map(|r| repetition_seed(config.seed, r)).collect();
            transition_sweep(p, problem.held_out(), &template, &s.candidates, &cfg, &seeds, &opts)
                .map_err(CliError::from_run)?
        }
    };
    let mut a = sweep_artifacts(&result, "")?;
    a.add("summary.json", result.summary_json() + "\n");
    Ok(a)
}

/// CSV, summary table and the plot suited to the sweep kind.
fn sweep_artifacts(result: &SweepResult, prefix: &str) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    a.add(format!("{prefix}sweep.csv"), result.to_csv_string());
    a.add(format!("{prefix}summary.csv"), summarize_sweep(result).to_csv_string());
    if result.cells.is_empty() {
        return Ok(a);
    }
    match result.kind {
        SweepKind::Grid if result.log_loss_matrix().is_ok() => {
            let spec = PlotSpec::new(PlotKind::Heatmap).titled("log final loss", "learning rate", "momentum");
            a.add(format!("{prefix}heatmap.svg"), render_heatmap(result, &spec).map_err(CliError::from_run)?);
        }
        SweepKind::Transition => {
            let loss = transition_series(result, "median final loss").map_err(CliError::from_run)?;
            let mut panels = vec![(
                vec![loss],
                PlotSpec::new(PlotKind::Line).titled("final training loss", "transition epoch", "median loss"),
            )];
            if result.bins.iter().any(|b| b.median_held_out_accuracy.is_some()) {
                let acc = Series {
                    label: "median held-out accuracy".into(),
                    x: result.bins.iter().map(|b| (b.lo + b.hi) / 2.0).collect(),
                    y: result.bins.iter().map(|b| b.median_held_out_accuracy).collect(),
                };
                panels.push((
                    vec![acc],
                    PlotSpec::new(PlotKind::Line).titled("held-out accuracy", "transition epoch", "accuracy"),
                ));
            }
            a.add(format!("{prefix}transition.svg"), render_panels(&panels, "transition sweep").map_err(CliError::from_run)?);
        }
        _ => {
            let loss = per_mu_series(result, |c| c.final_loss);
            let spec = PlotSpec::new(PlotKind::MultiLine)
                .log_x()
                .titled("final loss by learning rate", "learning rate", "final loss");
            let spec = if positive(&loss) { spec.log_y() } else { spec };
            a.add(format!("{prefix}search.svg"), render_series(&loss, &spec).map_err(CliError::from_run)?);
            if result.cells.iter().any(|c| c.held_out_accuracy.is_some()) {
                let acc = per_mu_series(result, |c| c.held_out_accuracy);
                let spec = PlotSpec::new(PlotKind::MultiLine)
                    .log_x()
                    .titled("held-out accuracy by learning rate", "learning rate", "accuracy");
                a.add(format!("{prefix}accuracy.svg"), render_series(&acc, &spec).map_err(CliError::from_run)?);
            }
        }
    }
    Ok(a)
}

fn per_mu_series(result: &SweepResult, value: impl Fn(&steplab::sweep::CellOutcome) -> Option<f64>) -> Vec<Series> {
    let mut mus: Vec<f64> = result.cells.iter().map(|c| c.mu).collect();
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    mus.into_iter()
        .map(|mu| {
            let mut cells: Vec<_> = result.cells.iter().filter(|c| c.mu == mu).collect();
            cells.sort_by(|a, b| a.eta.total_cmp(&b.eta));
            Series {
                label: format!("mu={}", fmt_label(mu)),
                x: cells.iter().map(|c| c.eta).collect(),
                y: cells.iter().map(|c| value(c)).collect(),
            }
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn run_report(inputs: &[PathBuf]) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    let mut traces = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let header = text.lines().next().unwrap_or_default();
        let bad = |e: steplab::Error| CliError::config(format!("{}: {e}", path.display()));
        if header.starts_with("step,") {
            let rows = read_rows_csv(text.as_bytes()).map_err(bad)?;
            let mut t = TrainTrace::new(stem(path), Granularity::Iteration, rows.first().map_or(0.0, |r| r.loss), false);
            t.rows = rows;
            traces.push(t);
        } else if header.starts_with("eta,") {
            let result = SweepResult::read_csv(text.as_bytes()).map_err(bad)?;
            let part = sweep_artifacts(&result, &format!("{}_", stem(path)))?;
            for name in part.names() {
                a.add(name.to_string(), part.get(name).expect("listed").to_vec());
            }
        } else {
            return Err(CliError::config(format!(
                "{}: not a trace or sweep CSV (header {header:?})",
                path.display()
            )));
        }
    }
    if !traces.is_empty() {
        let labelled: Vec<(String, &TrainTrace)> = traces.iter().map(|t| (t.fingerprint.clone(), t)).collect();
        a.add("traces_summary.csv", summarize_labelled(&labelled).to_csv_string());
        let loss: Vec<Series> = labelled.iter().map(|(l, t)| trace_series(t, Metric::Loss, l)).collect();
        a.add("loss.svg", loss_plot(&loss, "training loss", "step")?);
        a.add("diagnostics.svg", diagnostics_plot(&labelled, "momentum diagnostics", "step")?);
    }
    let listed: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    a.add(
        "inputs.json",
        serde_json::to_string_pretty(&listed).expect("paths serialize") + "\n",
    );
    Ok(a)
}
