//! Training traces and the two momentum diagnostics.
//!
//! * scale `r = ‖g‖ / ‖∇f(w)‖`, which settles at `1/(1−μ)` when the buffer
//!   accumulates a slowly varying gradient;
//! * alignment `s`, the cosine between the descent direction `−g` and the
//!   direction `x* − w` towards a reference point.
//!
//! A row describes the iterate `w` at a logging point together with the
//! buffer `g` that an update from `w` applies, `μ·g_prev + ∇f(w) + wd·w`.
//! Gradients are full-objective gradients, including weight decay.
//!
//! Undefined diagnostics (zero norms) are `None`, written as `undefined` in
//! CSV and `null` in JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, invalid, Error, Result};
use crate::vecops::{dot, norm};

pub const UNDEFINED: &str = "undefined";

/// How often training emits a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Before every update.
    Iteration,
    /// After every epoch.
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub epoch: usize,
    pub phase: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub momentum_norm: f64,
    pub scale: Option<f64>,
    pub alignment: Option<f64>,
    /// `η · r`.
    pub eta_effective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub w: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    KnownOptimum,
    FinalIterate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub x_star: Vec<f64>,
    pub source: ReferenceSource,
}

impl ReferencePoint {
    pub fn known_optimum(x_star: Vec<f64>) -> Self {
        Self {
            x_star,
            source: ReferenceSource::KnownOptimum,
        }
    }

    /// The iterate of the last logged row, for problems without a known
    /// optimum. Requires snapshots.
    pub fn final_iterate(trace: &TrainTrace) -> Result<Self> {
        let snap = trace
            .snapshots
            .as_ref()
            .and_then(|s| s.last())
            .ok_or_else(|| invalid("trace has no snapshots to take a final iterate from"))?;
        Ok(Self {
            x_star: snap.w.clone(),
            source: ReferenceSource::FinalIterate,
        })
    }
}

/// `‖g‖ / ‖grad‖`, undefined when the gradient vanishes.
pub fn scale(g: &[f64], grad: &[f64]) -> Result<Option<f64>> {
    ensure_len("gradient", grad.len(), g.len())?;
    let denom = norm(grad);
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(norm(g) / denom))
}

/// Cosine between `−g` and `x* − w`, clamped to `[−1, 1]`.
pub fn alignment(g: &[f64], w: &[f64], reference: &ReferencePoint) -> Result<Option<f64>> {
    ensure_len("iterate", w.len(), g.len())?;
    ensure_len("reference", reference.x_star.len(), g.len())?;
    let to_ref: Vec<f64> = reference.x_star.iter().zip(w).map(|(x, y)| x - y).collect();
    let (ng, nd) = (norm(g), norm(&to_ref));
    if ng == 0.0 || nd == 0.0 {
        return Ok(None);
    }
    Ok(Some((-dot(g, &to_ref) / (ng * nd)).clamp(-1.0, 1.0)))
}

/// Consumer of training rows. Receives rows from one producer at a time.
pub trait TraceSink {
    fn record(&mut self, row: TraceRow, w: &[f64], g: &[f64]);
    fn diverged(&mut self, step: u64);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub fingerprint: String,
    pub granularity: Granularity,
    pub initial_loss: f64,
    pub rows: Vec<TraceRow>,
    pub snapshots: Option<Vec<Snapshot>>,
    pub diverged_at: Option<u64>,
}

impl TrainTrace {
    pub fn new(fingerprint: String, granularity: Granularity, initial_loss: f64, store_snapshots: bool) -> Self {
        Self {
            fingerprint,
            granularity,
            initial_loss,
            rows: Vec::new(),
            snapshots: store_snapshots.then(Vec::new),
            diverged_at: None,
        }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn scales(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.scale).collect()
    }

    pub fn alignments(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.alignment).collect()
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows_csv(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl TraceSink for TrainTrace {
    fn record(&mut self, row: TraceRow, w: &[f64], g: &[f64]) {
        if let Some(snaps) = &mut self.snapshots {
            snaps.push(Snapshot {
                w: w.to_vec(),
                g: g.to_vec(),
            });
        }
        self.rows.push(row);
    }

    fn diverged(&mut self, step: u64) {
        self.diverged_at = Some(step);
    }
}

/// Fills the alignment of every row against `reference` from the stored
/// snapshots.
pub fn annotate_alignment(trace: &TrainTrace, reference: &ReferencePoint) -> Result<TrainTrace> {
    let snaps = trace
        .snapshots
        .as_ref()
        .ok_or_else(|| invalid("trace was recorded without snapshots"))?;
    if snaps.len() != trace.rows.len() {
        return Err(invalid(format!(
            "{} snapshots for {} rows",
            snaps.len(),
            trace.rows.len()
        )));
    }
    let mut out = trace.clone();
    for (row, snap) in out.rows.iter_mut().zip(snaps) {
        row.alignment = alignment(&snap.g, &snap.w, reference)?;
    }
    Ok(out)
}

/// Mean of the defined values in the trailing `fraction` of the sequence.
pub fn tail_mean(values: &[Option<f64>], fraction: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    let tail: Vec<f64> = values[values.len() - n..].iter().flatten().copied().collect();
    crate::vecops::mean(&tail)
}

/// Mean of the defined values.
pub fn defined_mean(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    crate::vecops::mean(&v)
}

const CSV_HEADER: [&str; 9] = [
    "step",
    "epoch",
    "phase",
    "loss",
    "grad_norm",
    "momentum_norm",
    "scale",
    "alignment",
    "eta_effective",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {field:?}")))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field == UNDEFINED {
        Ok(None)
    } else {
        parse_f64(field, what).map(Some)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn write_rows_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.epoch.to_string(),
            r.phase.to_string(),
            r.loss.to_string(),
            r.grad_norm.to_string(),
            r.momentum_norm.to_string(),
            fmt_opt(r.scale),
            fmt_opt(r.alignment),
            fmt_opt(r.eta_effective),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad {} value {:?}", CSV_HEADER[i], &rec[i])))
        };
        rows.push(TraceRow {
            step: int(0)?,
            epoch: int(1)? as usize,
            phase: int(2)? as usize,
            loss: parse_f64(&rec[3], "loss")?,
            grad_norm: parse_f64(&rec[4], "grad_norm")?,
            momentum_norm: parse_f64(&rec[5], "momentum_norm")?,
            scale: parse_opt(&rec[6], "scale")?,
            alignment: parse_opt(&rec[7], "alignment")?,
            eta_effective: parse_opt(&rec[8], "eta_effective")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin(d: usize) -> ReferencePoint {
        ReferencePoint::known_optimum(vec![0.0; d])
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), Some(1.0));
        assert_eq!(scale(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), Some(0.0));
        assert_eq!(scale(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), None);
        assert!(scale(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn alignment_examples() {
        // Scalar quadratic at w = 1 with g = ∇f = 2: descent points at the optimum.
        assert_eq!(alignment(&[2.0], &[1.0], &origin(1)).unwrap(), Some(1.0));
        assert_eq!(alignment(&[-2.0], &[1.0], &origin(1)).unwrap(), Some(-1.0));
        assert_eq!(alignment(&[0.0, 1.0], &[1.0, 0.0], &origin(2)).unwrap(), Some(0.0));
        assert_eq!(alignment(&[0.0], &[1.0], &origin(1)).unwrap(), None);
        assert_eq!(alignment(&[1.0], &[0.0], &origin(1)).unwrap(), None);
        assert!(alignment(&[1.0, 1.0], &[1.0], &origin(2)).is_err());
    }

    fn sample_trace() -> TrainTrace {
        let mut t = TrainTrace::new("abc".into(), Granularity::Iteration, 4.0, true);
        let ws = [vec![2.0, 1.0], vec![1.0, 0.5], vec![0.5, -0.1]];
        let gs = [vec![1.0, 0.0], vec![1.0, 1.0], vec![0.2, 0.1]];
        for (i, (w, g)) in ws.iter().zip(&gs).enumerate() {
            let row = TraceRow {
                step: i as u64,
                epoch: i,
                phase: 0,
                loss: 1.0 / (i as f64 + 1.0),
                grad_norm: 1.0,
                momentum_norm: norm(g),
                scale: Some(norm(g)),
                alignment: alignment(g, w, &origin(2)).unwrap(),
                eta_effective: None,
            };
            t.record(row, w, g);
        }
        t
    }

    #[test]
    fn annotation_matches_online_values() {
        let t = sample_trace();
        let annotated = annotate_alignment(&t, &origin(2)).unwrap();
        assert_eq!(annotated, t);
        assert_eq!(annotate_alignment(&annotated, &origin(2)).unwrap(), annotated);
    }

    #[test]
    fn final_iterate_reference_leaves_last_row_undefined() {
        let t = sample_trace();
        let r = ReferencePoint::final_iterate(&t).unwrap();
        assert_eq!(r.source, ReferenceSource::FinalIterate);
        let a = annotate_alignment(&t, &r).unwrap();
        assert_eq!(a.rows.last().unwrap().alignment, None);
        assert!(a.rows[0].alignment.is_some());
    }

    #[test]
    fn annotation_requires_snapshots() {
        let mut t = sample_trace();
        t.snapshots = None;
        assert!(annotate_alignment(&t, &origin(2)).is_err());
        assert!(ReferencePoint::final_iterate(&t).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut t = sample_trace();
        t.rows[1].loss = 0.1 + 0.2;
        t.rows[2].eta_effective = Some(1.0 / 3.0);
        let csv = t.to_csv_string();
        assert!(csv.starts_with("step,epoch,phase,loss,grad_norm,momentum_norm,scale,alignment,eta_effective\n"));
        assert!(csv.contains(UNDEFINED));
        assert_eq!(read_rows_csv(csv.as_bytes()).unwrap(), t.rows);

        let json = t.to_json();
        let back = TrainTrace::from_json(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn tail_mean_window() {
        let v: Vec<Option<f64>> = (0..20).map(|i| Some(i as f64)).collect();
        assert_eq!(tail_mean(&v, 0.1), Some(18.5));
        assert_eq!(tail_mean(&[None, Some(2.0)], 0.5), Some(2.0));
        assert_eq!(tail_mean(&[], 0.1), None);
    }

    proptest! {
        #[test]
        fn alignment_is_scale_invariant(
            g in prop::collection::vec(-5.0f64..5.0, 4),
            w in prop::collection::vec(-5.0f64..5.0, 4),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let r = origin(4);
            let base = alignment(&g, &w, &r).unwrap();
            let gs: Vec<f64> = g.iter().map(|x| a * x).collect();
            let ws: Vec<f64> = w.iter().map(|x| b * x).collect();
            let scaled = alignment(&gs, &ws, &r).unwrap();
            match (base, scaled) {
                (Some(x), Some(y)) => {
                    prop_assert!((x - y).abs() < 1e-9);
                    prop_assert!((-1.0..=1.0).contains(&x));
                }
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn scale_is_invariant_under_joint_rescaling(
            g in prop::collection::vec(-5.0f64..5.0, 3),
            grad in prop::collection::vec(0.1f64..5.0, 3),
            c in 0.01f64..100.0,
        ) {
            let r = scale(&g, &grad).unwrap().unwrap();
            let gs: Vec<f64> = g.iter().map(|x| c * x).collect();
            let grads: Vec<f64> = grad.iter().map(|x| c * x).collect();
            let rs = scale(&gs, &grads).unwrap().unwrap();
            prop_assert!(r >= 0.0);
            prop_assert!((r - rs).abs() <= 1e-12 * r.max(1.0));
        }
    }
}
