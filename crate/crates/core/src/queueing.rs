//! Slot/frame timeline, bursty arrivals and the fluid queue recursion.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid arrival model: {0}")]
    InvalidArrival(String),
    #[error("arrival supplied at slot {slot}, which is not a frame boundary")]
    OffBoundaryArrival { slot: u64 },
    #[error("missing arrival at frame boundary slot {slot}")]
    MissingArrival { slot: u64 },
    #[error("slots_per_frame must be positive")]
    ZeroFrame,
}

/// Per-frame burst size law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalModel {
    Deterministic { per_frame: f64 },
    Iid { values: Vec<f64>, probs: Vec<f64> },
}

impl ArrivalModel {
    pub fn deterministic(per_frame: f64) -> Result<Self, QueueError> {
        if !(per_frame >= 0.0 && per_frame.is_finite()) {
            return Err(QueueError::InvalidArrival(format!("burst {per_frame} must be finite and >= 0")));
        }
        Ok(Self::Deterministic { per_frame })
    }

    pub fn iid(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, QueueError> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(QueueError::InvalidArrival(
                "value and probability tables must be nonempty and of equal length".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(QueueError::InvalidArrival("values must be finite and >= 0".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(QueueError::InvalidArrival("probabilities must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(QueueError::InvalidArrival(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self::Iid { values, probs })
    }

    /// `E[B_m]` in nats per frame.
    pub fn mean_per_frame(&self) -> f64 {
        match self {
            Self::Deterministic { per_frame } => *per_frame,
            Self::Iid { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// `B_max`, the support upper bound.
    pub fn max_per_frame(&self) -> f64 {
        match self {
            Self::Deterministic { per_frame } => *per_frame,
            Self::Iid { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `(value, probability)` atoms; a single atom for the deterministic law.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Deterministic { per_frame } => vec![(*per_frame, 1.0)],
            Self::Iid { values, probs } => values.iter().copied().zip(probs.iter().copied()).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Deterministic { per_frame } => *per_frame,
            Self::Iid { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // rounding left u above the final cumulative sum
                *values.iter().zip(probs).rev().find(|(_, p)| **p > 0.0).map(|(v, _)| v).unwrap_or(&values[0])
            }
        }
    }
}

/// Backlog `U` (nats) on the slot timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    backlog: f64,
    slot: u64,
    slots_per_frame: u64,
}

/// What one call to [`QueueState::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub served: f64,
    pub arrived: f64,
}

impl QueueState {
    pub fn new(initial_backlog: f64, slots_per_frame: u64) -> Result<Self, QueueError> {
        if slots_per_frame == 0 {
            return Err(QueueError::ZeroFrame);
        }
        Ok(Self {
            backlog: initial_backlog.max(0.0),
            slot: 0,
            slots_per_frame,
        })
    }

    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn slots_per_frame(&self) -> u64 {
        self.slots_per_frame
    }

    /// True when an arrival is due at the end of the current slot.
    pub fn is_frame_boundary(&self) -> bool {
        self.slot % self.slots_per_frame == 0
    }

    /// `U(k+1) = [U(k) − r(1−e)Δt]⁺ + B·1(k mod N = 0)`.
    pub fn step(&mut self, rate: f64, error: bool, dt: f64, arrival: Option<f64>) -> Result<SlotOutcome, QueueError> {
        let boundary = self.is_frame_boundary();
        match (boundary, arrival) {
            (false, Some(_)) => return Err(QueueError::OffBoundaryArrival { slot: self.slot }),
            (true, None) => return Err(QueueError::MissingArrival { slot: self.slot }),
            _ => {}
        }
        let offered = if error { 0.0 } else { rate.max(0.0) * dt };
        let served = offered.min(self.backlog);
        let arrived = arrival.unwrap_or(0.0);
        self.backlog = (self.backlog - offered).max(0.0) + arrived;
        self.slot += 1;
        Ok(SlotOutcome { served, arrived })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_frame(backlog: f64) -> QueueState {
        let mut q = QueueState::new(backlog, 20).unwrap();
        q.slot = 3;
        q
    }

    #[test]
    fn recursion_examples() {
        let mut q = mid_frame(10.0);
        let out = q.step(4.0, false, 1.0, None).unwrap();
        assert_eq!(q.backlog(), 6.0);
        assert_eq!(out.served, 4.0);

        let mut q = QueueState::new(3.0, 20).unwrap();
        q.step(5.0, false, 1.0, Some(7.0)).unwrap();
        assert_eq!(q.backlog(), 7.0);

        let mut q = mid_frame(10.0);
        let out = q.step(4.0, true, 1.0, None).unwrap();
        assert_eq!(q.backlog(), 10.0);
        assert_eq!(out.served, 0.0);
    }

    #[test]
    fn boundary_contract() {
        let mut q = mid_frame(1.0);
        assert_eq!(q.step(0.0, false, 1.0, Some(1.0)), Err(QueueError::OffBoundaryArrival { slot: 3 }));
        let mut q = QueueState::new(1.0, 4).unwrap();
        assert!(q.step(0.0, false, 1.0, None).is_err());
        assert!(q.step(0.0, false, 1.0, Some(2.0)).is_ok());
        for _ in 0..3 {
            assert!(!q.is_frame_boundary());
            q.step(0.0, false, 1.0, None).unwrap();
        }
        assert!(q.is_frame_boundary());
    }

    #[test]
    fn arrival_table_validation() {
        assert!(ArrivalModel::iid(vec![0.0, 4.0], vec![0.5, 0.4]).is_err());
        assert!(ArrivalModel::iid(vec![-1.0, 4.0], vec![0.5, 0.5]).is_err());
        assert!(ArrivalModel::iid(vec![], vec![]).is_err());
        assert!(ArrivalModel::deterministic(f64::NAN).is_err());
        let m = ArrivalModel::iid(vec![0.0, 4000.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.mean_per_frame(), 2000.0);
        assert_eq!(m.max_per_frame(), 4000.0);
    }

    #[test]
    fn deterministic_sampling() {
        let mut rng = rand::rng();
        let m = ArrivalModel::deterministic(2000.0).unwrap();
        assert!((0..100).all(|_| m.sample(&mut rng) == 2000.0));
    }
}
