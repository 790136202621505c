use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Two isotropic Gaussian blobs centred at (-1, 0) and (1, 0).
    TwoGaussians,
    /// Two interleaving half circles.
    TwoMoons,
    /// Standard Gaussian inputs with labels independent of the inputs.
    RandomLabels,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::TwoGaussians => "two_gaussians",
            DatasetKind::TwoMoons => "two_moons",
            DatasetKind::RandomLabels => "random_labels",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_gaussians" => Ok(DatasetKind::TwoGaussians),
            "two_moons" => Ok(DatasetKind::TwoMoons),
            "random_labels" => Ok(DatasetKind::RandomLabels),
            other => Err(invalid(format!("unknown dataset kind {other:?}"))),
        }
    }
}

/// Labelled samples, inputs stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub version: u32,
    pub kind: Option<DatasetKind>,
    pub seed: Option<u64>,
    pub n_features: usize,
    pub n_classes: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

const DATASET_FORMAT_VERSION: u32 = 1;

impl Dataset {
    pub fn new(n_features: usize, n_classes: usize, inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let d = Self {
            version: DATASET_FORMAT_VERSION,
            kind: None,
            seed: None,
            n_features,
            n_classes,
            inputs,
            labels,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes == 0 {
            return Err(invalid("dataset needs at least one feature and one class"));
        }
        if self.labels.is_empty() {
            return Err(invalid("dataset is empty"));
        }
        if self.inputs.len() != self.labels.len() * self.n_features {
            return Err(invalid(format!(
                "dataset has {} input values for {} samples of {} features",
                self.inputs.len(),
                self.labels.len(),
                self.n_features
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(invalid(format!("label {bad} outside [0, {})", self.n_classes)));
        }
        if !self.inputs.iter().all(|x| x.is_finite()) {
            return Err(invalid("dataset inputs contain non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Copies the samples at `indices` into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(invalid(format!("sample index {i} out of range")));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
        }
        Ok(Self {
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone()
        })
    }

    /// Splits off the last `held_out` samples, returning `(train, held_out)`.
    pub fn split(&self, held_out: usize) -> Result<(Self, Self)> {
        if held_out == 0 || held_out >= self.len() {
            return Err(invalid("held-out split must leave both parts non-empty"));
        }
        let cut = self.len() - held_out;
        let train: Vec<usize> = (0..cut).collect();
        let test: Vec<usize> = (cut..self.len()).collect();
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if d.version != DATASET_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported dataset version {}", d.version)));
        }
        d.validate()?;
        Ok(d)
    }
}

/// Generates a seeded two-class dataset. Labels alternate before a final
/// shuffle, so the classes are balanced to within one sample.
pub fn make_dataset(kind: &str, n_samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let kind: DatasetKind = kind.parse()?;
    if n_samples < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    if noise < 0.0 || !noise.is_finite() {
        return Err(invalid(format!("noise must be finite and >= 0, got {noise}")));
    }

    let mut rng = seed::rng(seed);
    let jitter = Normal::new(0.0, noise).expect("noise validated");
    let mut samples: Vec<([f64; 2], usize)> = (0..n_samples)
        .map(|i| {
            let label = i % 2;
            let x = match kind {
                DatasetKind::TwoGaussians => {
                    let cx = if label == 0 { -1.0 } else { 1.0 };
                    [cx + jitter.sample(&mut rng), jitter.sample(&mut rng)]
                }
                DatasetKind::TwoMoons => {
                    let t: f64 = rng.random_range(0.0..PI);
                    let (x, y) = if label == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    [x + jitter.sample(&mut rng), y + jitter.sample(&mut rng)]
                }
                DatasetKind::RandomLabels => [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ],
            };
            (x, label)
        })
        .collect();
    samples.shuffle(&mut rng);

    let mut inputs = Vec::with_capacity(2 * n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for (x, l) in samples {
        inputs.extend_from_slice(&x);
        labels.push(l);
    }
    let mut d = Dataset::new(2, 2, inputs, labels)?;
    d.kind = Some(kind);
    d.seed = Some(seed);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_gaussians_are_two_points() {
        let d = make_dataset("two_gaussians", 100, 0.0, 1).unwrap();
        assert_eq!(d.class_counts(), vec![50, 50]);
        for i in 0..d.len() {
            let expected = if d.labels[i] == 0 { [-1.0, 0.0] } else { [1.0, 0.0] };
            assert_eq!(d.input(i), &expected);
        }
    }

    #[test]
    fn moons_contract() {
        let d = make_dataset("two_moons", 200, 0.1, 2).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.n_classes, 2);
        assert!(d.inputs.iter().all(|x| x.is_finite()));
        assert_eq!(d.class_counts(), vec![100, 100]);
    }

    #[test]
    fn random_labels_balanced() {
        let d = make_dataset("random_labels", 64, 0.0, 5).unwrap();
        let c = d.class_counts();
        assert!(c[0].abs_diff(c[1]) <= 1);
        let odd = make_dataset("random_labels", 65, 0.0, 5).unwrap();
        let c = odd.class_counts();
        assert!(c[0].abs_diff(c[1]) <= 1);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = make_dataset("two_moons", 50, 0.2, 9).unwrap();
        assert_eq!(a, make_dataset("two_moons", 50, 0.2, 9).unwrap());
        assert_ne!(a, make_dataset("two_moons", 50, 0.2, 10).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(make_dataset("spirals", 10, 0.0, 0), Err(Error::InvalidArgument(_))));
        assert!(make_dataset("two_moons", 1, 0.0, 0).is_err());
        assert!(make_dataset("two_moons", 10, -0.1, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = make_dataset("two_gaussians", 10, 0.3, 4).unwrap();
        let text = d.to_json();
        for key in ["\"kind\"", "\"seed\"", "\"inputs\"", "\"labels\""] {
            assert!(text.contains(key));
        }
        assert_eq!(Dataset::from_json(&text).unwrap(), d);
    }

    #[test]
    fn split_keeps_everything() {
        let d = make_dataset("two_moons", 20, 0.1, 1).unwrap();
        let (a, b) = d.split(5).unwrap();
        assert_eq!((a.len(), b.len()), (15, 5));
        assert_eq!(b.input(4), d.input(19));
        assert!(d.split(0).is_err());
    }
}
