//! Plots and summary tables for traces and sweep results.
//!
//! Every renderer is a pure function of its inputs: the same data always
//! yields the same bytes.

mod svg;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use svg::{ramp_color, AxisScale, RAMP_NAME};
use svg::{fmt_tick, Axis, Canvas, PALETTE};

use crate::diagnostics::{defined_mean, tail_mean, TraceRow, TrainTrace, UNDEFINED};
use crate::error::{invalid, Error, Result};
use crate::sweep::{CellOutcome, RunStatus, SweepKind, SweepResult};
use crate::vecops::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Line,
    MultiLine,
    Heatmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub kind: PlotKind,
    #[serde(default)]
    pub x_scale: AxisScale,
    #[serde(default)]
    pub y_scale: AxisScale,
    /// Legend entries; fingerprints are used when empty.
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub x_label: String,
    #[serde(default)]
    pub y_label: String,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_height")]
    pub height: f64,
}

fn default_width() -> f64 {
    640.0
}

fn default_height() -> f64 {
    420.0
}

impl PlotSpec {
    pub fn new(kind: PlotKind) -> Self {
        Self {
            kind,
            x_scale: AxisScale::Linear,
            y_scale: AxisScale::Linear,
            labels: Vec::new(),
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            width: default_width(),
            height: default_height(),
        }
    }

    pub fn log_y(mut self) -> Self {
        self.y_scale = AxisScale::Log;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.x_scale = AxisScale::Log;
        self
    }

    pub fn titled(mut self, title: &str, x_label: &str, y_label: &str) -> Self {
        self.title = title.into();
        self.x_label = x_label.into();
        self.y_label = y_label.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }
}

/// One curve. Undefined points break the polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<Option<f64>>,
}

/// Per-row quantity of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Loss,
    GradNorm,
    Scale,
    Alignment,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::GradNorm => "grad_norm",
            Metric::Scale => "scale",
            Metric::Alignment => "alignment",
        }
    }

    fn of(self, r: &TraceRow) -> Option<f64> {
        match self {
            Metric::Loss => Some(r.loss),
            Metric::GradNorm => Some(r.grad_norm),
            Metric::Scale => r.scale,
            Metric::Alignment => r.alignment,
        }
    }
}

/// Series of `metric` against the step counter.
pub fn trace_series(trace: &TrainTrace, metric: Metric, label: &str) -> Series {
    Series {
        label: label.into(),
        x: trace.rows.iter().map(|r| r.step as f64).collect(),
        y: trace.rows.iter().map(|r| metric.of(r)).collect(),
    }
}

/// Median final loss per transition bin against the bin centre.
pub fn transition_series(result: &SweepResult, label: &str) -> Result<Series> {
    if result.kind != SweepKind::Transition {
        return Err(invalid("transition curves need a transition sweep"));
    }
    Ok(Series {
        label: label.into(),
        x: result.bins.iter().map(|b| (b.lo + b.hi) / 2.0).collect(),
        y: result.bins.iter().map(|b| b.median_final_loss).collect(),
    })
}

/// Loss against step, one polyline per trace.
pub fn render_loss_curves(traces: &[TrainTrace], spec: &PlotSpec) -> Result<String> {
    if traces.is_empty() {
        return Err(invalid("at least one trace is required"));
    }
    let labels = legend_labels(spec, traces.iter().map(|t| t.fingerprint.clone()).collect())?;
    let series: Vec<Series> = traces
        .iter()
        .zip(labels)
        .map(|(t, l)| trace_series(t, Metric::Loss, &l))
        .collect();
    render_series(&series, spec)
}

fn legend_labels(spec: &PlotSpec, fallback: Vec<String>) -> Result<Vec<String>> {
    if spec.labels.is_empty() {
        return Ok(fallback);
    }
    if spec.labels.len() != fallback.len() {
        return Err(invalid(format!(
            "{} labels for {} series",
            spec.labels.len(),
            fallback.len()
        )));
    }
    Ok(spec.labels.clone())
}

const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

/// Line or multi-line chart of arbitrary series.
pub fn render_series(series: &[Series], spec: &PlotSpec) -> Result<String> {
    let mut c = Canvas::new(spec.width, spec.height);
    let frame = Frame {
        left: MARGIN_L,
        top: MARGIN_T,
        right: spec.width - MARGIN_R,
        bottom: spec.height - MARGIN_B,
    };
    draw_series(&mut c, series, spec, frame)?;
    Ok(c.finish(&spec.title))
}

/// Panels stacked top to bottom in one document, each with its own axes and
/// legend. Panel titles come from the panel specs; the document title from
/// `title`.
pub fn render_panels(panels: &[(Vec<Series>, PlotSpec)], title: &str) -> Result<String> {
    if panels.is_empty() {
        return Err(invalid("at least one panel is required"));
    }
    let width = panels.iter().map(|p| p.1.width).fold(0.0, f64::max);
    let height: f64 = panels.iter().map(|p| p.1.height).sum::<f64>() + MARGIN_T;
    let mut c = Canvas::new(width, height);
    let mut top = MARGIN_T;
    for (series, spec) in panels {
        if !spec.title.is_empty() {
            c.text(width / 2.0, top + 14.0, "middle", 12.0, &spec.title, "");
        }
        let frame = Frame {
            left: MARGIN_L,
            top: top + MARGIN_T,
            right: spec.width - MARGIN_R,
            bottom: top + spec.height - MARGIN_B,
        };
        draw_series(&mut c, series, spec, frame)?;
        top += spec.height;
    }
    Ok(c.finish(title))
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

fn draw_series(c: &mut Canvas, series: &[Series], spec: &PlotSpec, f: Frame) -> Result<()> {
    match spec.kind {
        PlotKind::Line if series.len() != 1 => {
            return Err(invalid(format!("a line plot takes one series, got {}", series.len())))
        }
        PlotKind::Heatmap => return Err(invalid("heatmaps are rendered from sweep results")),
        _ if series.is_empty() => return Err(invalid("at least one series is required")),
        _ => {}
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(invalid(format!(
                "series {:?} has {} x values and {} y values",
                s.label,
                s.x.len(),
                s.y.len()
            )));
        }
        for (row, (&x, y)) in s.x.iter().zip(&s.y).enumerate() {
            let Some(y) = *y else { continue };
            check_value(x, spec.x_scale, &s.label, row, "x")?;
            check_value(y, spec.y_scale, &s.label, row, "y")?;
            xs.push(x);
            ys.push(y);
        }
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (1.0, 1.0)
        }
    };
    let (x_lo, x_hi) = range(&xs);
    let (y_lo, y_hi) = range(&ys);
    let x_axis = Axis::new(spec.x_scale, x_lo, x_hi, f.left, f.right);
    let y_axis = Axis::new(spec.y_scale, y_lo, y_hi, f.bottom, f.top);

    c.axes(&x_axis, &y_axis, &spec.x_label, &spec.y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment = Vec::new();
        for (&x, y) in s.x.iter().zip(&s.y) {
            match y {
                Some(y) => segment.push((x_axis.map(x), y_axis.map(*y))),
                None if !segment.is_empty() => {
                    c.polyline(&segment, color, i);
                    segment.clear();
                }
                None => {}
            }
        }
        if !segment.is_empty() {
            c.polyline(&segment, color, i);
        }
    }
    for (i, s) in series.iter().enumerate() {
        let y = f.top + 14.0 + 16.0 * i as f64;
        let x = f.right - 150.0;
        let color = PALETTE[i % PALETTE.len()];
        c.raw(&format!(
            r#"<g class="legend-entry" data-series="{i}"><line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="10">{}</text></g>"#,
            x + 18.0,
            x + 22.0,
            y + 3.5,
            svg::escape(&s.label)
        ));
    }
    Ok(())
}

fn check_value(v: f64, scale: AxisScale, label: &str, row: usize, axis: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(invalid(format!("series {label:?} row {row}: non-finite {axis} value {v}")));
    }
    if scale == AxisScale::Log && v <= 0.0 {
        return Err(invalid(format!(
            "series {label:?} row {row}: {axis} value {v} cannot be shown on a log axis"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct HeatmapMeta {
    value: &'static str,
    ramp: &'static str,
    min: Option<f64>,
    max: Option<f64>,
    rows: usize,
    columns: usize,
    diverged_cells: usize,
}

/// Median log final loss of every (η, μ) cell. Rows are momenta (largest at
/// the top), columns learning rates; diverged cells are hatched.
pub fn render_heatmap(result: &SweepResult, spec: &PlotSpec) -> Result<String> {
    if spec.kind != PlotKind::Heatmap {
        return Err(invalid("render_heatmap needs a heatmap plot spec"));
    }
    let m = result.log_loss_matrix()?;
    let defined: Vec<f64> = m.iter().flatten().flatten().copied().collect();
    let min = defined.iter().copied().reduce(f64::min);
    let max = defined.iter().copied().reduce(f64::max);
    let position = |v: f64| match (min, max) {
        (Some(lo), Some(hi)) if hi > lo => (v - lo) / (hi - lo),
        _ => 0.5,
    };
    let (n_rows, n_cols) = (result.mu_axis.len(), result.eta_axis.len());
    let bar = 60.0;
    let plot_r = spec.width - MARGIN_R - bar;
    let plot_b = spec.height - MARGIN_B;
    let cw = (plot_r - MARGIN_L) / n_cols as f64;
    let ch = (plot_b - MARGIN_T) / n_rows as f64;

    let mut c = Canvas::new(spec.width, spec.height);
    c.set_metadata(
        serde_json::to_string(&HeatmapMeta {
            value: "log_final_loss",
            ramp: RAMP_NAME,
            min,
            max,
            rows: n_rows,
            columns: n_cols,
            diverged_cells: m.iter().flatten().filter(|v| v.is_none()).count(),
        })
        .expect("metadata serializes"),
    );
    c.def(r##"<pattern id="diverged" width="6" height="6" patternUnits="userSpaceOnUse"><rect width="6" height="6" fill="#d9d9d9"/><path d="M0,6 L6,0" stroke="#e41a1c" stroke-width="1"/></pattern>"##);
    for (i, (row, &mu)) in m.iter().zip(&result.mu_axis).enumerate() {
        let y = plot_b - ch * (i + 1) as f64;
        for (j, (v, &eta)) in row.iter().zip(&result.eta_axis).enumerate() {
            let x = MARGIN_L + cw * j as f64;
            let cell = match v {
                Some(v) => {
                    let t = position(*v);
                    format!(
                        r#"class="cell" fill="{}" data-value="{v}" data-t="{t}""#,
                        ramp_color(t)
                    )
                }
                None => format!(r#"class="cell diverged" fill="url(#diverged)" data-value="{UNDEFINED}""#),
            };
            c.raw(&format!(
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" {cell} data-eta="{eta}" data-mu="{mu}"/>"#
            ));
        }
    }
    let every_col = n_cols.div_ceil(8).max(1);
    for (j, &eta) in result.eta_axis.iter().enumerate().filter(|(j, _)| j % every_col == 0) {
        let x = MARGIN_L + cw * (j as f64 + 0.5);
        c.text(x, plot_b + 16.0, "middle", 10.0, &fmt_tick(eta), "");
    }
    let every_row = n_rows.div_ceil(10).max(1);
    for (i, &mu) in result.mu_axis.iter().enumerate().filter(|(i, _)| i % every_row == 0) {
        let y = plot_b - ch * (i as f64 + 0.5) + 3.5;
        c.text(MARGIN_L - 6.0, y, "end", 10.0, &fmt_tick(mu), "");
    }
    let x_label = if spec.x_label.is_empty() { "learning rate" } else { &spec.x_label };
    let y_label = if spec.y_label.is_empty() { "momentum" } else { &spec.y_label };
    c.text((MARGIN_L + plot_r) / 2.0, plot_b + 34.0, "middle", 12.0, x_label, "");
    let cy = (MARGIN_T + plot_b) / 2.0;
    c.text(
        MARGIN_L - 52.0,
        cy,
        "middle",
        12.0,
        y_label,
        &format!(r#" transform="rotate(-90 {:.2} {cy:.2})""#, MARGIN_L - 52.0),
    );

    let bx = plot_r + 16.0;
    let steps = 32;
    let sh = (plot_b - MARGIN_T) / steps as f64;
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        let y = plot_b - sh * (k + 1) as f64;
        c.raw(&format!(
            r#"<rect class="ramp" x="{bx:.2}" y="{y:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            sh + 0.05,
            ramp_color(t)
        ));
    }
    if let (Some(lo), Some(hi)) = (min, max) {
        c.text(bx + 18.0, plot_b, "start", 10.0, &fmt_tick(lo), "");
        c.text(bx + 18.0, MARGIN_T + 8.0, "start", 10.0, &fmt_tick(hi), "");
    }
    Ok(c.finish(&spec.title))
}

/// Rows of named statistics with a fixed column order. Cells hold the
/// shortest round-trip text of each value, or `undefined`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&str> {
        let c = self.column(name)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }

    /// Numeric cell; `None` when absent or undefined.
    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.get(row, name)?.parse().ok()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

pub const TRACE_SUMMARY_COLUMNS: [&str; 7] = [
    "rows",
    "initial_loss",
    "final_loss",
    "min_loss",
    "median_loss",
    "r_last_decile_mean",
    "s_run_mean",
];

pub const SWEEP_SUMMARY_COLUMNS: [&str; 7] = [
    "group",
    "runs",
    "diverged",
    "best_eta",
    "best_mu",
    "min_final_loss",
    "median_final_loss",
];

/// One-row summary of a trace, computed from its rows alone so that the
/// serialized CSV gives the same table. `initial_loss` is the first logged
/// loss.
pub fn summarize_trace(trace: &TrainTrace) -> Table {
    summarize_rows(&trace.rows)
}

/// Trace summaries of several runs, one row each, led by a `run` column.
pub fn summarize_labelled(traces: &[(String, &TrainTrace)]) -> Table {
    let mut t = Table::new(&["run"]);
    t.columns.extend(TRACE_SUMMARY_COLUMNS);
    for (label, trace) in traces {
        let mut row = vec![label.clone()];
        row.extend(summarize_trace(trace).rows.remove(0));
        t.rows.push(row);
    }
    t
}

pub fn summarize_rows(rows: &[TraceRow]) -> Table {
    let mut t = Table::new(&TRACE_SUMMARY_COLUMNS);
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let scales: Vec<Option<f64>> = rows.iter().map(|r| r.scale).collect();
    let aligns: Vec<Option<f64>> = rows.iter().map(|r| r.alignment).collect();
    t.rows.push(vec![
        rows.len().to_string(),
        cell(losses.first().copied()),
        cell(losses.last().copied()),
        cell(losses.iter().copied().filter(|l| l.is_finite()).reduce(f64::min)),
        cell(median(&losses)),
        cell(tail_mean(&scales, 0.1)),
        cell(defined_mean(&aligns)),
    ]);
    t
}

/// Overall row plus one row per momentum (grid, random search) or per
/// transition epoch. An empty sweep gives a header-only table.
pub fn summarize_sweep(result: &SweepResult) -> Table {
    let mut t = Table::new(&SWEEP_SUMMARY_COLUMNS);
    if result.cells.is_empty() {
        return t;
    }
    let row = |group: String, cells: &[&CellOutcome]| {
        let ok: Vec<&&CellOutcome> = cells.iter().filter(|c| c.final_loss.is_some()).collect();
        let best = ok.iter().copied().copied().fold(None, |b: Option<&CellOutcome>, c| match b {
            Some(b) if (b.final_loss, b.eta) <= (c.final_loss, c.eta) => Some(b),
            _ => Some(c),
        });
        let losses: Vec<f64> = ok.iter().filter_map(|c| c.final_loss).collect();
        vec![
            group,
            cells.len().to_string(),
            cells.iter().filter(|c| c.status == RunStatus::Diverged).count().to_string(),
            cell(best.map(|c| c.eta)),
            cell(best.map(|c| c.mu)),
            cell(best.and_then(|c| c.final_loss)),
            cell(median(&losses)),
        ]
    };
    let all: Vec<&CellOutcome> = result.cells.iter().collect();
    t.rows.push(row("all".into(), &all));
    if result.kind == SweepKind::Transition {
        let mut ts: Vec<usize> = result.cells.iter().filter_map(|c| c.transition).collect();
        ts.sort_unstable();
        ts.dedup();
        for tr in ts {
            let cs: Vec<&CellOutcome> = result.cells.iter().filter(|c| c.transition == Some(tr)).collect();
            t.rows.push(row(format!("transition={tr}"), &cs));
        }
    } else {
        let mut mus: Vec<f64> = result.cells.iter().map(|c| c.mu).collect();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        for mu in mus {
            let cs: Vec<&CellOutcome> = result.cells.iter().filter(|c| c.mu == mu).collect();
            t.rows.push(row(format!("mu={mu}"), &cs));
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Granularity;
    use crate::optim::{train, HyperParams, PhaseSpec, ScheduleSpec, TrainConfig};
    use crate::problems::make_quadratic;
    use crate::sweep::{run_grid, RunTemplate, SweepGrid, SweepOptions};

    fn row(step: u64, loss: f64) -> TraceRow {
        TraceRow {
            step,
            epoch: 0,
            phase: 0,
            loss,
            grad_norm: 1.0,
            momentum_norm: 1.0,
            scale: Some(1.0),
            alignment: None,
            eta_effective: None,
        }
    }

    fn trace(name: &str, losses: &[f64]) -> TrainTrace {
        let mut t = TrainTrace::new(name.into(), Granularity::Iteration, losses[0], false);
        t.rows = losses.iter().enumerate().map(|(i, &l)| row(i as u64, l)).collect();
        t
    }

    fn polylines(svg: &str) -> Vec<&str> {
        svg.lines().filter(|l| l.starts_with("<polyline")).collect()
    }

    fn points(line: &str) -> Vec<(f64, f64)> {
        let p = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        p.split(' ')
            .map(|xy| {
                let (x, y) = xy.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn constant_trace_is_horizontal() {
        let svg = render_loss_curves(&[trace("a", &[2.0; 5])], &PlotSpec::new(PlotKind::Line)).unwrap();
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 1);
        let pts = points(lines[0]);
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| p.1 == pts[0].1));
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    }

    #[test]
    fn identical_traces_coincide() {
        let t = trace("a", &[3.0, 2.0, 1.5]);
        let mut u = t.clone();
        u.fingerprint = "b".into();
        let svg = render_loss_curves(&[t.clone(), u.clone()], &PlotSpec::new(PlotKind::MultiLine).log_y()).unwrap();
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 2);
        assert_eq!(points(lines[0]), points(lines[1]));
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
        let again = render_loss_curves(&[t, u], &PlotSpec::new(PlotKind::MultiLine).log_y()).unwrap();
        assert_eq!(svg, again);
    }

    #[test]
    fn log_axis_rejects_non_positive() {
        let err = render_loss_curves(&[trace("a", &[1.0, 0.5, 0.0])], &PlotSpec::new(PlotKind::Line).log_y()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(render_loss_curves(&[], &PlotSpec::new(PlotKind::Line)).is_err());
        let two = [trace("a", &[1.0]), trace("b", &[1.0])];
        assert!(render_loss_curves(&two, &PlotSpec::new(PlotKind::Line)).is_err());
        let bad = Series {
            label: "x".into(),
            x: vec![1.0, 2.0],
            y: vec![Some(1.0)],
        };
        assert!(render_series(&[bad], &PlotSpec::new(PlotKind::Line)).is_err());
    }

    #[test]
    fn panels_stack() {
        let a = trace("a", &[3.0, 2.0, 1.0]);
        let panels = vec![
            (vec![trace_series(&a, Metric::Loss, "a")], PlotSpec::new(PlotKind::MultiLine).log_y()),
            (vec![trace_series(&a, Metric::Scale, "a")], PlotSpec::new(PlotKind::MultiLine)),
        ];
        let svg = render_panels(&panels, "demo").unwrap();
        assert_eq!(polylines(&svg).len(), 2);
        assert_eq!(svg.matches("class=\"frame\"").count(), 2);
        assert!(render_panels(&[], "x").is_err());
    }

    #[test]
    fn undefined_points_split_polylines() {
        let s = Series {
            label: "s".into(),
            x: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            y: vec![Some(0.1), Some(0.2), None, Some(0.5), Some(0.9)],
        };
        let svg = render_series(&[s], &PlotSpec::new(PlotKind::Line)).unwrap();
        assert_eq!(polylines(&svg).len(), 2);
    }

    fn small_grid(etas: Vec<f64>, mus: &[f64]) -> SweepResult {
        let p = make_quadratic(4, 10.0, 1).unwrap();
        let grid = SweepGrid::with_momenta(etas, mus);
        run_grid(&p, &grid, RunTemplate::full_batch(), &TrainConfig::iterations(50, 0), 0, &SweepOptions::default()).unwrap()
    }

    fn attr<'a>(line: &'a str, name: &str) -> &'a str {
        line.split(&format!(" {name}=\"")).nth(1).unwrap().split('"').next().unwrap()
    }

    #[test]
    fn heatmap_cells_and_divergence() {
        let p = make_quadratic(4, 10.0, 1).unwrap();
        let l = p.lambda_max();
        let r = small_grid(vec![0.1 / l, 5.0 / l], &[0.0, 0.5]);
        let svg = render_heatmap(&r, &PlotSpec::new(PlotKind::Heatmap)).unwrap();
        let cells: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"cell")).collect();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells.iter().filter(|c| c.contains("class=\"cell diverged\"")).count(), 2);
        assert!(svg.contains("\"min\":") && svg.contains("\"max\":"));
        assert!(svg.contains(">learning rate</text>"));
    }

    #[test]
    fn heatmap_colour_is_monotone_in_value() {
        let r = small_grid(vec![0.002, 0.005, 0.01, 0.02, 0.05], &[0.0]);
        let svg = render_heatmap(&r, &PlotSpec::new(PlotKind::Heatmap)).unwrap();
        let mut pairs: Vec<(f64, f64)> = svg
            .lines()
            .filter(|l| l.contains("class=\"cell\""))
            .map(|l| (attr(l, "data-value").parse().unwrap(), attr(l, "data-t").parse().unwrap()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(pairs[0].1, 0.0);
        assert_eq!(pairs.last().unwrap().1, 1.0);
    }

    #[test]
    fn heatmap_rejects_incomplete_grid() {
        let mut r = small_grid(vec![0.01, 0.02], &[0.0, 0.5]);
        r.cells.pop();
        assert!(render_heatmap(&r, &PlotSpec::new(PlotKind::Heatmap)).is_err());
    }

    #[test]
    fn trace_summary() {
        let p = make_quadratic(10, 1e4, 1).unwrap();
        let spec = ScheduleSpec::single(PhaseSpec::full_batch(HyperParams::new(0.5 / p.lambda_max(), 0.9, 0.0).unwrap()));
        let t = train(&p, &spec, &TrainConfig::iterations(5000, 0)).unwrap().trace;
        let s = summarize_trace(&t);
        assert_eq!(s.columns, TRACE_SUMMARY_COLUMNS);
        assert!(s.value(0, "final_loss").unwrap() < s.value(0, "initial_loss").unwrap());
        let r = s.value(0, "r_last_decile_mean").unwrap();
        assert!((r / 10.0 - 1.0).abs() < 0.05, "{r}");
        assert!(s.value(0, "s_run_mean").unwrap().abs() <= 1.0);

        let back = crate::diagnostics::read_rows_csv(t.to_csv_string().as_bytes()).unwrap();
        assert_eq!(summarize_rows(&back), s);
    }

    #[test]
    fn sweep_summary() {
        let empty = SweepResult {
            kind: SweepKind::Grid,
            eta_axis: vec![],
            mu_axis: vec![],
            cells: vec![],
            bins: vec![],
        };
        let t = summarize_sweep(&empty);
        assert!(t.is_empty());
        assert_eq!(t.to_csv_string(), "group,runs,diverged,best_eta,best_mu,min_final_loss,median_final_loss\n");

        let r = small_grid(vec![0.01, 0.02, 10.0], &[0.0, 0.5]);
        let s = summarize_sweep(&r);
        assert_eq!(s.rows.len(), 3);
        assert_eq!(s.get(0, "runs"), Some("6"));
        assert_eq!(s.get(0, "diverged"), Some("2"));
        let best = r.argmin().unwrap();
        assert_eq!(s.value(0, "best_eta"), Some(best.eta));
        assert_eq!(s.value(0, "best_mu"), Some(best.mu));
        let back = SweepResult::read_csv(r.to_csv_string().as_bytes()).unwrap();
        assert_eq!(summarize_sweep(&back), s);
    }
}
