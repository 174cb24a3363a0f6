use serde::{Deserialize, Serialize};

use super::{domain, ModelError};
use crate::Real;

/// Identity and exposure of one data-taking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta<T> {
    pub run_id: String,
    pub current_a: T,
    pub live_time_s: T,
    pub current_on: bool,
}

impl<T: Real> RunMeta<T> {
    pub fn new(run_id: impl Into<String>, current_a: T, live_time_s: T, current_on: bool) -> Result<Self, ModelError> {
        let meta = Self {
            run_id: run_id.into(),
            current_a,
            live_time_s,
            current_on,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn current_on(run_id: impl Into<String>, current_a: T, live_time_s: T) -> Result<Self, ModelError> {
        Self::new(run_id, current_a, live_time_s, true)
    }

    pub fn current_off(run_id: impl Into<String>, live_time_s: T) -> Result<Self, ModelError> {
        Self::new(run_id, T::zero(), live_time_s, false)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.live_time_s >= T::zero()) || !self.live_time_s.is_finite() {
            return Err(domain(format!("run `{}`: live time must be >= 0", self.run_id)));
        }
        if !(self.current_a >= T::zero()) || !self.current_a.is_finite() {
            return Err(domain(format!("run `{}`: current must be >= 0", self.run_id)));
        }
        if !self.current_on && self.current_a != T::zero() {
            return Err(domain(format!(
                "run `{}`: current-off run carries nonzero current {} A",
                self.run_id, self.current_a
            )));
        }
        Ok(())
    }

    /// Integrated charge `Σ I Δt` in coulombs.
    pub fn charge_c(&self) -> T {
        if self.current_on {
            self.current_a * self.live_time_s
        } else {
            T::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_runs_carry_no_current() {
        assert!(RunMeta::new("r", 5.0, 10.0, false).is_err());
        let off = RunMeta::current_off("r", 10.0).unwrap();
        assert_eq!(off.charge_c(), 0.0);
    }

    #[test]
    fn negative_values_rejected() {
        assert!(RunMeta::current_on("r", -1.0, 10.0).is_err());
        assert!(RunMeta::current_on("r", 1.0, -10.0).is_err());
        assert_eq!(RunMeta::current_on("r", 2.0, 10.0f32).unwrap().charge_c(), 20.0);
    }
}
