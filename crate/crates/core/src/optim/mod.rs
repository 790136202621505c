//! Heavy-ball momentum, phase schedules and the training loop.

mod schedule;
mod train;

pub use schedule::{BatchMode, PhaseSpec, ScheduleSpec};
pub use train::{train, train_into, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, invalid, Error, Result};
use crate::vecops;

/// Learning rate, momentum and weight decay of one optimizer phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl HyperParams {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        let hp = Self {
            learning_rate,
            momentum,
            weight_decay,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Plain gradient descent.
    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(learning_rate, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Parameters `w`, momentum buffer `g` and the number of steps taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState {
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub step: u64,
}

impl MomentumState {
    /// Fresh state at `w` with an empty buffer.
    pub fn new(w: Vec<f64>) -> Self {
        let g = vec![0.0; w.len()];
        Self { w, g, step: 0 }
    }

    pub fn dimension(&self) -> usize {
        self.w.len()
    }
}

/// `grad + weight_decay · w`, the gradient the buffer accumulates.
pub fn decayed_gradient(grad: &[f64], w: &[f64], weight_decay: f64) -> Vec<f64> {
    if weight_decay == 0.0 {
        grad.to_vec()
    } else {
        grad.iter().zip(w).map(|(g, x)| g + weight_decay * x).collect()
    }
}

/// The buffer the next update would apply: `μ·g + grad + weight_decay·w`.
pub fn next_buffer(state: &MomentumState, grad: &[f64], hp: &HyperParams) -> Vec<f64> {
    decayed_gradient(grad, &state.w, hp.weight_decay)
        .into_iter()
        .zip(&state.g)
        .map(|(d, g)| hp.momentum * g + d)
        .collect()
}

/// One heavy-ball update, in place:
///
/// ```text
/// g ← μ·g + (∇f(w) + weight_decay·w)
/// w ← w − η·g
/// ```
pub fn apply_step(state: &mut MomentumState, grad: &[f64], hp: &HyperParams) -> Result<()> {
    ensure_len("gradient", grad.len(), state.dimension())?;
    if !vecops::all_finite(grad) {
        return Err(Error::Divergence { step: state.step });
    }
    let (mu, eta, wd) = (hp.momentum, hp.learning_rate, hp.weight_decay);
    for ((w, g), d) in state.w.iter_mut().zip(state.g.iter_mut()).zip(grad) {
        *g = mu * *g + (d + wd * *w);
        *w -= eta * *g;
    }
    state.step += 1;
    Ok(())
}

/// Functional form of [`apply_step`].
pub fn momentum_step(state: &MomentumState, grad: &[f64], hp: &HyperParams) -> Result<MomentumState> {
    let mut next = state.clone();
    apply_step(&mut next, grad, hp)?;
    Ok(next)
}

/// Zeroes the momentum buffer, keeping `w` and the step count.
pub fn reset_on_transition(state: &MomentumState) -> MomentumState {
    MomentumState {
        w: state.w.clone(),
        g: vec![0.0; state.dimension()],
        step: state.step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_grad(w: f64) -> Vec<f64> {
        vec![2.0 * w]
    }

    #[test]
    fn hyper_param_validation() {
        assert!(HyperParams::new(0.1, 0.9, 1e-4).is_ok());
        assert!(HyperParams::new(0.0, 0.0, 0.0).is_err());
        assert!(HyperParams::new(0.1, 1.0, 0.0).is_err());
        assert!(HyperParams::new(0.1, -0.1, 0.0).is_err());
        assert!(HyperParams::new(0.1, 0.0, -1.0).is_err());
    }

    #[test]
    fn plain_gd_closed_form() {
        let hp = HyperParams::new(0.25, 0.0, 0.0).unwrap();
        let s0 = MomentumState::new(vec![1.0]);
        let s1 = momentum_step(&s0, &scalar_grad(1.0), &hp).unwrap();
        assert_eq!(s1.w, vec![0.5]);
        let s2 = momentum_step(&s1, &scalar_grad(s1.w[0]), &hp).unwrap();
        assert_eq!(s2.w, vec![0.25]);
        assert_eq!(s2.step, 2);
    }

    #[test]
    fn three_step_hand_recurrence() {
        // Oracle: g1 = 2, w1 = 0.5; g2 = 0.5·2 + 1 = 2, w2 = 0; g3 = 1 + 0 = 1, w3 = -0.25.
        let hp = HyperParams::new(0.25, 0.5, 0.0).unwrap();
        let mut s = MomentumState::new(vec![1.0]);
        let expected = [(2.0, 0.5), (2.0, 0.0), (1.0, -0.25)];
        for (g, w) in expected {
            let grad = scalar_grad(s.w[0]);
            s = momentum_step(&s, &grad, &hp).unwrap();
            assert_eq!((s.g[0], s.w[0]), (g, w));
        }
    }

    #[test]
    fn no_momentum_buffer_is_decayed_gradient() {
        let hp = HyperParams::new(0.1, 0.0, 0.01).unwrap();
        let mut s = MomentumState::new(vec![1.0, -2.0]);
        s.g = vec![5.0, 5.0];
        let grad = vec![0.3, 0.7];
        let next = momentum_step(&s, &grad, &hp).unwrap();
        assert_eq!(next.g, decayed_gradient(&grad, &s.w, 0.01));
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let hp = HyperParams::sgd(0.1).unwrap();
        let mut s = MomentumState::new(vec![1.0]);
        s.step = 7;
        match momentum_step(&s, &[f64::NAN], &hp) {
            Err(Error::Divergence { step }) => assert_eq!(step, 7),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(momentum_step(&s, &[1.0, 2.0], &hp).is_err());
    }

    #[test]
    fn reset_examples() {
        let s = MomentumState {
            w: vec![1.0, 2.0],
            g: vec![3.0, 4.0],
            step: 5,
        };
        let r = reset_on_transition(&s);
        assert_eq!(r.g, vec![0.0, 0.0]);
        assert_eq!((r.w.clone(), r.step), (s.w.clone(), 5));
        assert_eq!(reset_on_transition(&r), r);
        let fresh = MomentumState::new(vec![1.0]);
        assert_eq!(reset_on_transition(&fresh), fresh);
    }

    proptest! {
        #[test]
        fn buffer_is_discounted_history(
            mu in 0.0f64..0.99,
            wd in 0.0f64..0.1,
            eta in 1e-3f64..0.5,
            grads in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..12),
        ) {
            let hp = HyperParams::new(eta, mu, wd).unwrap();
            let mut s = MomentumState::new(vec![0.5, -1.0, 2.0]);
            let mut decayed_history = Vec::new();
            for grad in &grads {
                decayed_history.push(decayed_gradient(grad, &s.w, wd));
                apply_step(&mut s, grad, &hp).unwrap();
            }
            let t = decayed_history.len();
            for i in 0..3 {
                let direct: f64 = decayed_history
                    .iter()
                    .enumerate()
                    .map(|(k, d)| mu.powi((t - 1 - k) as i32) * d[i])
                    .sum();
                let scale = decayed_history.iter().map(|d| d[i].abs()).sum::<f64>().max(1.0);
                prop_assert!((s.g[i] - direct).abs() <= 1e-10 * t as f64 * scale);
            }
        }
    }
}
