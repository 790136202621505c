//! Learning-rate/momentum equivalence by loss-curve matching.
//!
//! A baseline curve trained without momentum is compared against curves
//! trained with momentum `μ` over a grid of learning rates; the candidate
//! whose curve is closest in L2 norm is the equivalent learning rate. When
//! momentum only rescales the step, the matched rate is close to
//! `η_baseline · (1 − μ)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{train, BatchMode, HyperParams, PhaseSpec, ScheduleSpec, TrainConfig};
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSpace {
    /// Distances between raw loss values.
    #[default]
    Raw,
    /// Distances between `ln(loss)`.
    Log,
}

/// Per-logging-point training losses of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub values: Vec<f64>,
    pub hyper: HyperParams,
    pub seed: u64,
    /// Step at which the run diverged; `values` stops there.
    pub diverged_at: Option<u64>,
}

impl LossCurve {
    pub fn new(values: Vec<f64>, hyper: HyperParams, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("loss curve is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("loss curve contains non-finite values"));
        }
        Ok(Self {
            values,
            hyper,
            seed,
            diverged_at: None,
        })
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// How candidate and baseline curves are produced and compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSettings {
    /// Budget, logging and seed shared by every compared run.
    pub train: TrainConfig,
    pub batch: BatchMode,
    pub weight_decay: f64,
    pub space: MatchSpace,
}

impl MatchSettings {
    /// Full-batch, per-iteration curves with no weight decay.
    pub fn full_batch(iterations: usize, seed: u64) -> Self {
        Self {
            train: TrainConfig::iterations(iterations, seed),
            batch: BatchMode::FullBatch,
            weight_decay: 0.0,
            space: MatchSpace::Raw,
        }
    }
}

/// Trains a single-phase run and returns its loss curve.
pub fn train_curve(problem: &dyn Problem, learning_rate: f64, momentum: f64, settings: &MatchSettings) -> Result<LossCurve> {
    let hyper = HyperParams::new(learning_rate, momentum, settings.weight_decay)?;
    let spec = ScheduleSpec::single(PhaseSpec {
        hyper,
        batch: settings.batch,
    });
    let out = train(problem, &spec, &settings.train)?;
    Ok(LossCurve {
        values: out.trace.losses(),
        hyper,
        seed: settings.train.seed,
        diverged_at: out.trace.diverged_at,
    })
}

/// L2 distance over the common prefix of two loss sequences.
pub fn l2_distance(a: &[f64], b: &[f64], space: MatchSpace) -> Result<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(invalid(format!(
            "curves overlap on {n} points, at least 2 are needed"
        )));
    }
    let map = |v: f64| -> Result<f64> {
        match space {
            MatchSpace::Raw => Ok(v),
            MatchSpace::Log if v > 0.0 => Ok(v.ln()),
            MatchSpace::Log => Err(invalid(format!("log-space matching needs positive losses, got {v}"))),
        }
    };
    let mut sum = 0.0;
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let d = map(*x)? - map(*y)?;
        sum += d * d;
    }
    Ok(sum.sqrt())
}

pub fn curve_distance(a: &LossCurve, b: &LossCurve, space: MatchSpace) -> Result<f64> {
    l2_distance(&a.values, &b.values, space)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub learning_rate: f64,
    /// `None` for diverged candidates.
    pub distance: Option<f64>,
    pub diverged_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceMatch {
    pub baseline: LossCurve,
    pub matched: LossCurve,
    pub candidate_mu: f64,
    pub matched_eta: f64,
    pub distance: f64,
    /// `η_baseline / η_matched`.
    pub ratio: f64,
    /// Every grid point, ascending in learning rate.
    pub candidates: Vec<Candidate>,
}

impl EquivalenceMatch {
    pub fn baseline_eta(&self) -> f64 {
        self.baseline.hyper.learning_rate
    }

    /// Whether distance decreases up to the match and increases after it,
    /// over the non-diverged candidates. Not guaranteed; reported only.
    pub fn is_unimodal(&self) -> bool {
        let d: Vec<f64> = self.candidates.iter().filter_map(|c| c.distance).collect();
        let Some(best) = d.iter().position(|&x| x == self.distance) else {
            return false;
        };
        d[..=best].windows(2).all(|w| w[1] <= w[0]) && d[best..].windows(2).all(|w| w[1] >= w[0])
    }
}

fn sorted_grid(eta_grid: &[f64]) -> Result<Vec<f64>> {
    if eta_grid.is_empty() {
        return Err(invalid("learning-rate grid is empty"));
    }
    if eta_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(invalid("learning rates must be positive and finite"));
    }
    let mut grid = eta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Finds the learning rate at `target_mu` whose loss curve best matches
/// `baseline`. Candidates train concurrently; ties go to the smaller rate.
pub fn find_equivalent_lr(
    problem: &dyn Problem,
    baseline: &LossCurve,
    target_mu: f64,
    eta_grid: &[f64],
    settings: &MatchSettings,
) -> Result<EquivalenceMatch> {
    if baseline.hyper.momentum != 0.0 {
        return Err(invalid("the baseline curve must be trained without momentum"));
    }
    if baseline.is_diverged() {
        return Err(invalid("the baseline run diverged"));
    }
    let grid = sorted_grid(eta_grid)?;

    let curves: Vec<LossCurve> = grid
        .par_iter()
        .map(|&eta| train_curve(problem, eta, target_mu, settings))
        .collect::<Result<_>>()?;

    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize)> = None;
    for (i, curve) in curves.iter().enumerate() {
        let distance = if curve.is_diverged() {
            None
        } else {
            Some(curve_distance(baseline, curve, settings.space)?)
        };
        if let Some(d) = distance {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        candidates.push(Candidate {
            learning_rate: grid[i],
            distance,
            diverged_at: curve.diverged_at,
        });
    }

    let Some((distance, i)) = best else {
        let points: Vec<String> = candidates
            .iter()
            .map(|c| format!("eta={} diverged at step {}", c.learning_rate, c.diverged_at.unwrap_or(0)))
            .collect();
        return Err(Error::NoMatch(format!(
            "all {} candidates at momentum {target_mu} diverged: {}",
            grid.len(),
            points.join("; ")
        )));
    };
    let matched_eta = grid[i];
    Ok(EquivalenceMatch {
        baseline: baseline.clone(),
        matched: curves[i].clone(),
        candidate_mu: target_mu,
        matched_eta,
        distance,
        ratio: baseline.hyper.learning_rate / matched_eta,
        candidates,
    })
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares fit; `None` with fewer than two points or constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumFit {
    pub mu: f64,
    /// `None` when fewer than two baselines found a match.
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub baseline_eta: f64,
    pub mu: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub matches: Vec<EquivalenceMatch>,
    pub fits: Vec<MomentumFit>,
    pub failures: Vec<SweepFailure>,
}

/// Matches every baseline learning rate at every momentum in `mus`, then
/// fits matched against baseline learning rate per momentum.
pub fn equivalence_sweep(
    problem: &dyn Problem,
    baseline_etas: &[f64],
    mus: &[f64],
    candidate_grid: &[f64],
    settings: &MatchSettings,
) -> Result<EquivalenceReport> {
    let baselines = sorted_grid(baseline_etas)?;
    let mut matches = Vec::new();
    let mut failures = Vec::new();
    for &eta in &baselines {
        let baseline = train_curve(problem, eta, 0.0, settings)?;
        if baseline.is_diverged() {
            failures.push(SweepFailure {
                baseline_eta: eta,
                mu: None,
                reason: "baseline diverged".into(),
            });
            continue;
        }
        for &mu in mus {
            match find_equivalent_lr(problem, &baseline, mu, candidate_grid, settings) {
                Ok(m) => matches.push(m),
                Err(Error::NoMatch(reason)) => failures.push(SweepFailure {
                    baseline_eta: eta,
                    mu: Some(mu),
                    reason,
                }),
                Err(e) => return Err(e),
            }
        }
    }
    let fits = mus
        .iter()
        .map(|&mu| {
            let (x, y): (Vec<f64>, Vec<f64>) = matches
                .iter()
                .filter(|m| m.candidate_mu == mu)
                .map(|m| (m.baseline_eta(), m.matched_eta))
                .unzip();
            MomentumFit {
                mu,
                fit: linear_fit(&x, &y),
            }
        })
        .collect();
    Ok(EquivalenceReport {
        matches,
        fits,
        failures,
    })
}

impl EquivalenceReport {
    /// CSV with columns `mu,baseline_eta,matched_eta,distance,ratio`.
    pub fn write_match_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["mu", "baseline_eta", "matched_eta", "distance", "ratio"])
            .map_err(err)?;
        for m in &self.matches {
            w.write_record([
                m.candidate_mu.to_string(),
                m.baseline_eta().to_string(),
                m.matched_eta.to_string(),
                m.distance.to_string(),
                m.ratio.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Per-momentum fits and the baselines that found no match.
    pub fn fit_summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            fits: &'a [MomentumFit],
            failures: &'a [SweepFailure],
        }
        serde_json::to_string_pretty(&Summary {
            fits: &self.fits,
            failures: &self.failures,
        })
        .expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;
    use crate::vecops::log_spaced;
    use proptest::prelude::*;

    fn curve(values: Vec<f64>) -> LossCurve {
        LossCurve::new(values, HyperParams::sgd(0.1).unwrap(), 0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let a = curve(vec![1.0, 1.0]);
        assert_eq!(curve_distance(&a, &a, MatchSpace::Raw).unwrap(), 0.0);
        let b = curve(vec![1.0, 2.0]);
        assert_eq!(curve_distance(&a, &b, MatchSpace::Raw).unwrap(), 1.0);
        let e = std::f64::consts::E;
        let d = curve_distance(&curve(vec![e, e]), &a, MatchSpace::Log).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_truncates_and_rejects_short_overlap() {
        let a = curve(vec![1.0, 2.0, 3.0]);
        let b = curve(vec![1.0, 2.0]);
        assert_eq!(curve_distance(&a, &b, MatchSpace::Raw).unwrap(), 0.0);
        let c = curve(vec![1.0]);
        assert!(curve_distance(&a, &c, MatchSpace::Raw).is_err());
        let z = curve(vec![0.0, 1.0]);
        assert!(curve_distance(&a, &z, MatchSpace::Log).is_err());
    }

    #[test]
    fn self_match_at_zero_momentum() {
        let p = make_quadratic(6, 10.0, 1).unwrap();
        let settings = MatchSettings::full_batch(200, 4);
        let eta = 0.1 / p.lambda_max();
        let baseline = train_curve(&p, eta, 0.0, &settings).unwrap();
        let mut grid = log_spaced(1e-3 / p.lambda_max(), 0.5 / p.lambda_max(), 9);
        grid.push(eta);
        let m = find_equivalent_lr(&p, &baseline, 0.0, &grid, &settings).unwrap();
        assert_eq!(m.distance, 0.0);
        assert_eq!(m.matched_eta, eta);
        assert_eq!(m.ratio, 1.0);
    }

    #[test]
    fn all_diverged_grid_is_no_match() {
        let p = make_quadratic(4, 10.0, 2).unwrap();
        let settings = MatchSettings::full_batch(2000, 1);
        let baseline = train_curve(&p, 0.1 / p.lambda_max(), 0.0, &settings).unwrap();
        // Heavy ball is unstable once η exceeds (1 + μ)/λ_max.
        let grid = [3.0 / p.lambda_max(), 5.0 / p.lambda_max()];
        match find_equivalent_lr(&p, &baseline, 0.9, &grid, &settings) {
            Err(Error::NoMatch(msg)) => assert!(msg.contains("diverged at step")),
            other => panic!("expected no match, got {other:?}"),
        }
    }

    #[test]
    fn matched_rate_scales_with_one_minus_mu() {
        // Brute-force oracle: on this quadratic the matched rate for μ = 0.9
        // sits one decade below the baseline rate. At η = 0.1/λ_max the raw
        // distance is dominated by the first few iterations, so compare logs.
        let p = make_quadratic(20, 100.0, 3).unwrap();
        let mut settings = MatchSettings::full_batch(3000, 5);
        settings.space = MatchSpace::Log;
        let l = p.lambda_max();
        let grid: Vec<f64> = (-40..=0).map(|k| 10f64.powf(k as f64 / 10.0) / l).collect();
        let baseline = train_curve(&p, 0.1 / l, 0.0, &settings).unwrap();
        let m = find_equivalent_lr(&p, &baseline, 0.9, &grid, &settings).unwrap();
        let steps = (m.matched_eta * l / 0.01).log10() * 10.0;
        assert!(steps.abs() <= 1.0 + 1e-9, "matched {} (ratio {})", m.matched_eta * l, m.ratio);
    }

    #[test]
    fn deterministic_matching() {
        let p = make_quadratic(5, 30.0, 8).unwrap();
        let settings = MatchSettings::full_batch(300, 2);
        let grid = log_spaced(1e-4 / p.lambda_max(), 1.0 / p.lambda_max(), 13);
        let baseline = train_curve(&p, 0.2 / p.lambda_max(), 0.0, &settings).unwrap();
        let a = find_equivalent_lr(&p, &baseline, 0.5, &grid, &settings).unwrap();
        let b = find_equivalent_lr(&p, &baseline, 0.5, &grid, &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(curve_distance(&a.baseline, &a.matched, MatchSpace::Raw).unwrap(), a.distance);
    }

    #[test]
    fn baseline_must_have_no_momentum() {
        let p = make_quadratic(3, 2.0, 0).unwrap();
        let settings = MatchSettings::full_batch(10, 0);
        let c = train_curve(&p, 0.01, 0.5, &settings).unwrap();
        assert!(find_equivalent_lr(&p, &c, 0.9, &[0.01], &settings).is_err());
    }

    #[test]
    fn fits() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        let x = [0.1, 0.2, 0.5, 1.0];
        let f = linear_fit(&x, &x).unwrap();
        assert_eq!((f.slope, f.intercept, f.r_squared), (1.0, 0.0, 1.0));
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_momentum_sweep_is_identity() {
        let p = make_quadratic(5, 10.0, 1).unwrap();
        let settings = MatchSettings::full_batch(100, 1);
        let l = p.lambda_max();
        let grid: Vec<f64> = (-30..=-3).map(|k| 10f64.powf(k as f64 / 10.0) / l).collect();
        let baselines = [grid[5], grid[10], grid[20]];
        let report = equivalence_sweep(&p, &baselines, &[0.0], &grid, &settings).unwrap();
        let fit = report.fits[0].fit.unwrap();
        assert_eq!((fit.slope, fit.intercept, fit.r_squared), (1.0, 0.0, 1.0));

        let single = equivalence_sweep(&p, &[grid[5]], &[0.0], &grid, &settings).unwrap();
        assert!(single.fits[0].fit.is_none());

        let mut buf = Vec::new();
        report.write_match_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mu,baseline_eta,matched_eta,distance,ratio\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in prop::collection::vec(-10.0f64..10.0, 5),
            b in prop::collection::vec(-10.0f64..10.0, 5),
            c in prop::collection::vec(-10.0f64..10.0, 5),
        ) {
            let d = |x: &[f64], y: &[f64]| l2_distance(x, y, MatchSpace::Raw).unwrap();
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &a), 0.0);
            if a != b {
                prop_assert!(d(&a, &b) > 0.0);
            }
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }
}
