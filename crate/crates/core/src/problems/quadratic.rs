use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::diagnostics::Granularity;
use crate::error::{ensure_len, invalid, Error, Result};
use crate::seed;

/// `f(w) = wᵀ A w` for a dense symmetric positive semi-definite `A`.
///
/// The minimizer is the origin, with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    matrix: DMatrix<f64>,
    /// Ascending.
    eigenvalues: Vec<f64>,
    seed: Option<u64>,
    optimum: Vec<f64>,
}

/// Builds `A = Q diag(λ) Qᵀ` with `Q` the orthogonal factor of a seeded
/// Gaussian matrix and `λ` log-spaced from 1 to `condition_number`.
pub fn make_quadratic(dim: usize, condition_number: f64, seed: u64) -> Result<QuadraticProblem> {
    if dim < 2 {
        return Err(invalid(format!("quadratic dimension must be >= 2, got {dim}")));
    }
    if condition_number < 1.0 || !condition_number.is_finite() {
        return Err(invalid(format!(
            "condition number must be a finite value >= 1, got {condition_number}"
        )));
    }

    let mut rng = seed::rng(seed);
    // Column-major fill, so the draw order is fixed by (dim, seed) alone.
    let gaussian = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let q = gaussian.qr().q();

    let log_kappa = condition_number.ln();
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|i| match i {
            0 => 1.0,
            i if i == dim - 1 => condition_number,
            i => (log_kappa * i as f64 / (dim - 1) as f64).exp(),
        })
        .collect();

    let scaled = DMatrix::from_fn(dim, dim, |r, c| q[(r, c)] * eigenvalues[c]);
    let a = &scaled * q.transpose();
    let matrix = symmetrize(a);

    Ok(QuadraticProblem {
        matrix,
        eigenvalues,
        seed: Some(seed),
        optimum: vec![0.0; dim],
    })
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |r, c| 0.5 * (a[(r, c)] + a[(c, r)]))
}

/// Returns `(wᵀAw, 2Aw)`.
pub fn quadratic_eval_grad(p: &QuadraticProblem, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_len("w", w.len(), p.dimension())?;
    let v = DVector::from_column_slice(w);
    let av = &p.matrix * &v;
    let loss = v.dot(&av);
    Ok((loss, av.iter().map(|x| 2.0 * x).collect()))
}

impl QuadraticProblem {
    /// Wraps an explicit matrix. It must be square, symmetric to 1e-10 and
    /// have no negative eigenvalues.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(invalid("matrix must be square and non-empty"));
        }
        let matrix = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(invalid("matrix contains non-finite entries"));
        }
        for r in 0..n {
            for c in 0..r {
                if (matrix[(r, c)] - matrix[(c, r)]).abs() > 1e-10 {
                    return Err(invalid(format!("matrix is not symmetric at ({r}, {c})")));
                }
            }
        }
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        let scale = eigenvalues.last().copied().unwrap_or(0.0).abs().max(1.0);
        if eigenvalues[0] < -1e-10 * scale {
            return Err(invalid(format!(
                "matrix is not positive semi-definite (eigenvalue {})",
                eigenvalues[0]
            )));
        }
        for e in &mut eigenvalues {
            *e = e.max(0.0);
        }
        Ok(Self {
            matrix,
            eigenvalues,
            seed: None,
            optimum: vec![0.0; n],
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// `λ_max / λ_min`; infinite for a singular matrix.
    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    /// Plain gradient descent on `wᵀAw` contracts iff `η < 1/λ_max`.
    pub fn stability_threshold(&self) -> f64 {
        1.0 / self.lambda_max()
    }

    pub fn to_json(&self) -> String {
        let doc = QuadraticDoc {
            version: QUADRATIC_FORMAT_VERSION,
            kind: "quadratic".into(),
            seed: self.seed,
            eigenvalues: self.eigenvalues.clone(),
            matrix: (0..self.dimension())
                .map(|r| self.matrix.row(r).iter().copied().collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: QuadraticDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.version != QUADRATIC_FORMAT_VERSION || doc.kind != "quadratic" {
            return Err(Error::Parse(format!(
                "unsupported quadratic document (kind {:?}, version {})",
                doc.kind, doc.version
            )));
        }
        let mut p = Self::from_matrix(&doc.matrix)?;
        ensure_len("eigenvalues", doc.eigenvalues.len(), p.dimension())?;
        // The stored spectrum is the exact one used at construction.
        p.eigenvalues = doc.eigenvalues;
        p.seed = doc.seed;
        Ok(p)
    }
}

const QUADRATIC_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticDoc {
    version: u32,
    kind: String,
    seed: Option<u64>,
    eigenvalues: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

impl Problem for QuadraticProblem {
    fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval_grad(&self, w: &[f64], _batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
        quadratic_eval_grad(self, w)
    }

    fn optimum_hint(&self) -> Option<&[f64]> {
        Some(&self.optimum)
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..self.dimension())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Iteration
    }

    fn describe(&self) -> String {
        match self.seed {
            Some(seed) => format!(
                "quadratic(dim={},kappa={:e},seed={seed})",
                self.dimension(),
                self.condition_number()
            ),
            None => {
                use sha2::{Digest, Sha256};
                let mut h = Sha256::new();
                for x in self.matrix.iter() {
                    h.update(x.to_le_bytes());
                }
                format!(
                    "quadratic(dim={},matrix={})",
                    self.dimension(),
                    &hex::encode(h.finalize())[..16]
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eig_oracle(p: &QuadraticProblem) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(p.matrix().clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(make_quadratic(1, 10.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_quadratic(5, 0.5, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_quadratic(5, f64::NAN, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn paper_scale_spectrum() {
        let p = make_quadratic(100, 1e5, 7).unwrap();
        assert_eq!(p.lambda_min(), 1.0);
        assert_eq!(p.lambda_max(), 1e5);
        let oracle = eig_oracle(&p);
        assert_relative_eq!(oracle[0], 1.0, max_relative = 1e-6);
        assert_relative_eq!(oracle[99], 1e5, max_relative = 1e-8);
    }

    #[test]
    fn unit_condition_number_is_rotated_identity() {
        let p = make_quadratic(2, 1.0, 0).unwrap();
        let oracle = eig_oracle(&p);
        for e in oracle {
            assert_relative_eq!(e, 1.0, epsilon = 1e-12);
        }
        let id = DMatrix::<f64>::identity(2, 2);
        assert!((p.matrix() - id).abs().max() < 1e-12);
    }

    #[test]
    fn condition_number_matches_eigendecomposition() {
        let p = make_quadratic(10, 100.0, 3).unwrap();
        let oracle = eig_oracle(&p);
        let kappa = oracle[9] / oracle[0];
        assert_relative_eq!(kappa, 100.0, max_relative = 1e-8);
        assert_relative_eq!(p.condition_number(), kappa, max_relative = 1e-8);
        for (a, b) in p.eigenvalues().iter().zip(&oracle) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn symmetric_and_deterministic() {
        let a = make_quadratic(12, 1e3, 11).unwrap();
        let b = make_quadratic(12, 1e3, 11).unwrap();
        let bits = |p: &QuadraticProblem| p.matrix().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&make_quadratic(12, 1e3, 12).unwrap()));
        for r in 0..12 {
            for c in 0..12 {
                assert!((a.matrix()[(r, c)] - a.matrix()[(c, r)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalues_log_spaced() {
        let p = make_quadratic(30, 1e4, 5).unwrap();
        let e = p.eigenvalues();
        let ratio = e[1] / e[0];
        for w in e.windows(2) {
            assert_relative_eq!(w[1] / w[0], ratio, max_relative = 1e-8);
        }
    }

    #[test]
    fn eval_grad_examples() {
        let one = QuadraticProblem::from_matrix(&[vec![1.0]]).unwrap();
        assert_eq!(quadratic_eval_grad(&one, &[1.0]).unwrap(), (1.0, vec![2.0]));
        assert_eq!(quadratic_eval_grad(&one, &[0.0]).unwrap(), (0.0, vec![0.0]));

        let diag = QuadraticProblem::from_matrix(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(
            quadratic_eval_grad(&diag, &[1.0, 1.0]).unwrap(),
            (5.0, vec![2.0, 8.0])
        );
        assert!(matches!(
            quadratic_eval_grad(&diag, &[1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn from_matrix_validation() {
        assert!(QuadraticProblem::from_matrix(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(QuadraticProblem::from_matrix(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(QuadraticProblem::from_matrix(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn optimum_is_origin() {
        let p = make_quadratic(6, 50.0, 1).unwrap();
        let opt = p.optimum_hint().unwrap().to_vec();
        assert_eq!(opt, vec![0.0; 6]);
        assert_eq!(p.evaluate(&opt).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let p = make_quadratic(5, 20.0, 9).unwrap();
        let text = p.to_json();
        for key in ["\"matrix\"", "\"eigenvalues\"", "\"seed\"", "\"kind\""] {
            assert!(text.contains(key), "missing {key}");
        }
        let q = QuadraticProblem::from_json(&text).unwrap();
        assert_eq!(p, q);
    }
}
