use serde::{Deserialize, Serialize};

use super::HyperParams;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// One gradient per shuffled chunk of `size` samples; the last chunk of
    /// an epoch may be smaller.
    MiniBatch { size: usize },
    FullBatch,
}

/// Optimizer settings for one phase of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub hyper: HyperParams,
    pub batch: BatchMode,
}

impl PhaseSpec {
    pub fn full_batch(hyper: HyperParams) -> Self {
        Self {
            hyper,
            batch: BatchMode::FullBatch,
        }
    }

    pub fn minibatch(hyper: HyperParams, size: usize) -> Self {
        Self {
            hyper,
            batch: BatchMode::MiniBatch { size },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if let BatchMode::MiniBatch { size: 0 } = self.batch {
            return Err(invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Ordered phases switched at transition epochs. The transition epoch itself
/// belongs to the phase that starts there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub phases: Vec<PhaseSpec>,
    pub transition_epochs: Vec<usize>,
    /// Zero the momentum buffer when a new phase starts.
    pub reset_momentum: bool,
}

impl ScheduleSpec {
    pub fn single(phase: PhaseSpec) -> Self {
        Self {
            phases: vec![phase],
            transition_epochs: Vec::new(),
            reset_momentum: true,
        }
    }

    pub fn two_phase(first: PhaseSpec, second: PhaseSpec, transition_epoch: usize) -> Self {
        Self {
            phases: vec![first, second],
            transition_epochs: vec![transition_epoch],
            reset_momentum: true,
        }
    }

    /// Checks the phases and that every transition lies inside a budget of
    /// `total_epochs`.
    pub fn validate(&self, total_epochs: usize) -> Result<()> {
        if self.phases.is_empty() {
            return Err(invalid("schedule has no phases"));
        }
        for p in &self.phases {
            p.validate()?;
        }
        if self.transition_epochs.len() + 1 != self.phases.len() {
            return Err(invalid(format!(
                "{} phases need {} transition epochs, got {}",
                self.phases.len(),
                self.phases.len() - 1,
                self.transition_epochs.len()
            )));
        }
        if self.transition_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("transition epochs must be strictly increasing"));
        }
        if let Some(&last) = self.transition_epochs.last() {
            if last >= total_epochs {
                return Err(invalid(format!(
                    "transition epoch {last} is outside the budget of {total_epochs} epochs"
                )));
            }
        }
        Ok(())
    }

    /// Index of the phase active during `epoch`.
    pub fn phase_index(&self, epoch: usize, total_epochs: usize) -> Result<usize> {
        if epoch >= total_epochs {
            return Err(invalid(format!(
                "epoch {epoch} outside budget of {total_epochs}"
            )));
        }
        Ok(self.transition_epochs.iter().filter(|&&t| t <= epoch).count())
    }

    pub fn active_phase(&self, epoch: usize, total_epochs: usize) -> Result<&PhaseSpec> {
        let k = self.phase_index(epoch, total_epochs)?;
        self.phases
            .get(k)
            .ok_or_else(|| invalid("schedule has fewer phases than transitions"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phase(eta: f64) -> PhaseSpec {
        PhaseSpec::full_batch(HyperParams::sgd(eta).unwrap())
    }

    #[test]
    fn boundary_belongs_to_new_phase() {
        let s = ScheduleSpec::two_phase(phase(1.0), phase(0.1), 30);
        assert_eq!(s.phase_index(29, 50).unwrap(), 0);
        assert_eq!(s.phase_index(30, 50).unwrap(), 1);
        assert_eq!(s.active_phase(30, 50).unwrap(), &phase(0.1));
        assert!(s.phase_index(50, 50).is_err());
    }

    #[test]
    fn interior_of_three_phases() {
        let s = ScheduleSpec {
            phases: vec![phase(1.0), phase(0.5), phase(0.1)],
            transition_epochs: vec![10, 20],
            reset_momentum: true,
        };
        s.validate(30).unwrap();
        assert_eq!(s.phase_index(15, 30).unwrap(), 1);
    }

    #[test]
    fn validation() {
        assert!(ScheduleSpec::single(phase(0.1)).validate(1).is_ok());
        assert!(ScheduleSpec::two_phase(phase(1.0), phase(0.1), 10).validate(10).is_err());
        let bad = ScheduleSpec {
            phases: vec![phase(1.0), phase(0.5), phase(0.1)],
            transition_epochs: vec![20, 10],
            reset_momentum: true,
        };
        assert!(bad.validate(30).is_err());
        let missing = ScheduleSpec {
            phases: vec![phase(1.0), phase(0.5)],
            transition_epochs: vec![],
            reset_momentum: true,
        };
        assert!(missing.validate(30).is_err());
        let mb = PhaseSpec::minibatch(HyperParams::sgd(0.1).unwrap(), 0);
        assert!(ScheduleSpec::single(mb).validate(5).is_err());
    }

    proptest! {
        #[test]
        fn every_epoch_maps_to_one_phase(
            mut cuts in prop::collection::btree_set(0usize..60, 0..5),
            total in 60usize..80,
        ) {
            let transitions: Vec<usize> = std::mem::take(&mut cuts).into_iter().collect();
            let s = ScheduleSpec {
                phases: (0..=transitions.len()).map(|i| phase(1.0 / (i + 1) as f64)).collect(),
                transition_epochs: transitions.clone(),
                reset_momentum: true,
            };
            s.validate(total).unwrap();
            let mut prev = 0;
            for e in 0..total {
                let k = s.phase_index(e, total).unwrap();
                prop_assert!(k < s.phases.len());
                prop_assert!(k >= prev);
                prev = k;
                let starts = if k == 0 { 0 } else { transitions[k - 1] };
                prop_assert!(e >= starts);
            }
        }
    }
}
