//! Power-law step sizes `α_k = c1/(c2 k + 1)^ω1`, `β_k = c3/(c2 k + 1)^ω2`.
//!
//! Summability of power laws is decided by the exponents alone, so the
//! convergence conditions are checked symbolically:
//!
//! | condition              | exponent form   |
//! |------------------------|-----------------|
//! | `Σ α_k β_k = ∞`        | `ω1 + ω2 <= 1`  |
//! | `Σ β_k² < ∞`           | `ω2 > 1/2`      |
//! | `Σ α_k² β_k < ∞`       | `2ω1 + ω2 > 1`  |
//!
//! When all three hold, the weighted running average of the squared error
//! decays at rate `min{2ω1, ω2}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to decide `ω1 + ω2 == 1` for the hyperbolic product form.
const PRODUCT_EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl StepSchedule {
    pub fn new(c1: f64, c2: f64, c3: f64, omega1: f64, omega2: f64) -> Result<Self> {
        for (name, v) in [("alpha.c", c1), ("c2", c2), ("beta.c", c3)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("schedule.{name}"), "must be positive and finite"));
            }
        }
        for (name, v) in [("alpha.omega", omega1), ("beta.omega", omega2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("schedule.{name}"), "must be non-negative and finite"));
            }
        }
        Ok(Self {
            c1,
            c2,
            c3,
            omega1,
            omega2,
        })
    }

    /// `α_k = 0.4/(k+1)^0.3`, `β_k = 0.4/(k+1)^0.6`.
    pub fn energy_game() -> Self {
        Self {
            c1: 0.4,
            c2: 1.0,
            c3: 0.4,
            omega1: 0.3,
            omega2: 0.6,
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.c1 / (self.c2 * k as f64 + 1.0).powf(self.omega1)
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.c3 / (self.c2 * k as f64 + 1.0).powf(self.omega2)
    }

    /// `α_k β_k`, the effective gradient step.
    pub fn product(&self, k: usize) -> f64 {
        self.alpha(k) * self.beta(k)
    }

    /// `Σ_{s<k} α_s β_s`.
    pub fn product_partial_sum(&self, k: usize) -> f64 {
        (0..k).map(|s| self.product(s)).sum()
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::energy_game()
    }
}

/// One of the exponent conditions for mean-square convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `ω1 + ω2 <= 1`, i.e. `Σ α_k β_k` diverges.
    ProductNotSummable,
    /// `ω2 > 1/2`, i.e. `Σ β_k²` converges.
    BetaSquareSummable,
    /// `2ω1 + ω2 > 1`, i.e. `Σ α_k² β_k` converges.
    AlphaSquareBetaSummable,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::ProductNotSummable,
        Condition::BetaSquareSummable,
        Condition::AlphaSquareBetaSummable,
    ];

    fn holds(self, omega1: f64, omega2: f64) -> bool {
        match self {
            Condition::ProductNotSummable => omega1 + omega2 <= 1.0,
            Condition::BetaSquareSummable => omega2 > 0.5,
            Condition::AlphaSquareBetaSummable => 2.0 * omega1 + omega2 > 1.0,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::ProductNotSummable => "omega1 + omega2 <= 1",
            Condition::BetaSquareSummable => "omega2 > 0.5",
            Condition::AlphaSquareBetaSummable => "2*omega1 + omega2 > 1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleVerdict {
    pub passes: bool,
    pub failed_conditions: Vec<Condition>,
    /// `min{2ω1, ω2}`; present iff `passes`.
    pub rate_exponent: Option<f64>,
}

impl fmt::Display for ScheduleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passes {
            write!(f, "pass (rate exponent {})", self.rate_exponent.unwrap_or(f64::NAN))
        } else {
            let failed: Vec<String> = self.failed_conditions.iter().map(ToString::to_string).collect();
            write!(f, "fail: {}", failed.join("; "))
        }
    }
}

pub fn check_conditions(s: &StepSchedule) -> ScheduleVerdict {
    let failed_conditions: Vec<Condition> = Condition::ALL
        .into_iter()
        .filter(|c| !c.holds(s.omega1, s.omega2))
        .collect();
    let passes = failed_conditions.is_empty();
    ScheduleVerdict {
        passes,
        failed_conditions,
        rate_exponent: passes.then(|| (2.0 * s.omega1).min(s.omega2)),
    }
}

/// `(c4, c5)` with `α_k β_k = c4/(c5 k + 1)`, if the schedule has that form.
///
/// This needs `ω1 + ω2 = 1`; then `α_k β_k = c1 c3/(c2 k + 1)`.
pub fn dp_product_check(s: &StepSchedule) -> Option<(f64, f64)> {
    ((s.omega1 + s.omega2 - 1.0).abs() <= PRODUCT_EXPONENT_TOL).then(|| (s.c1 * s.c3, s.c2))
}

/// Config form: `{"alpha": {"c": .., "omega": ..}, "beta": {..}, "c2": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub alpha: PowerLaw,
    pub beta: PowerLaw,
    #[serde(default = "unit")]
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub c: f64,
    pub omega: f64,
}

fn unit() -> f64 {
    1.0
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.alpha.c, self.c2, self.beta.c, self.alpha.omega, self.beta.omega)
    }
}

impl From<StepSchedule> for ScheduleSpec {
    fn from(s: StepSchedule) -> Self {
        Self {
            alpha: PowerLaw { c: s.c1, omega: s.omega1 },
            beta: PowerLaw { c: s.c3, omega: s.omega2 },
            c2: s.c2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_exponents(omega1: f64, omega2: f64) -> StepSchedule {
        StepSchedule::new(0.4, 1.0, 0.4, omega1, omega2).unwrap()
    }

    #[test]
    fn initial_steps() {
        let s = StepSchedule::energy_game();
        assert_eq!(s.alpha(0), 0.4);
        assert_eq!(s.beta(0), 0.4);
    }

    #[test]
    fn beta_at_999() {
        let s = StepSchedule::energy_game();
        let expected = 0.4 / 1000f64.powf(0.6);
        assert!((s.beta(999) - expected).abs() < 1e-15);
        assert!((s.beta(999) - 6.34e-3).abs() < 5e-6);
    }

    #[test]
    fn zero_exponents_give_constant_steps() {
        let s = with_exponents(0.0, 0.0);
        assert_eq!(s.alpha(0), s.alpha(12345));
        assert_eq!(s.beta(0), s.beta(12345));
    }

    #[test]
    fn energy_schedule_passes() {
        let v = check_conditions(&StepSchedule::energy_game());
        assert!(v.passes);
        assert!(v.failed_conditions.is_empty());
        assert_eq!(v.rate_exponent, Some(0.6));
    }

    #[test]
    fn constant_steps_fail_the_summability_conditions() {
        let v = check_conditions(&with_exponents(0.0, 0.0));
        assert!(!v.passes);
        assert_eq!(
            v.failed_conditions,
            vec![Condition::BetaSquareSummable, Condition::AlphaSquareBetaSummable]
        );
        assert_eq!(v.rate_exponent, None);
    }

    #[test]
    fn boundary_beta_exponent_fails() {
        let v = check_conditions(&with_exponents(0.2, 0.5));
        // 2 * 0.2 + 0.5 = 0.9 also misses the third condition
        assert_eq!(
            v.failed_conditions,
            vec![Condition::BetaSquareSummable, Condition::AlphaSquareBetaSummable]
        );
        let v = check_conditions(&with_exponents(0.3, 0.5));
        assert_eq!(v.failed_conditions, vec![Condition::BetaSquareSummable]);
    }

    #[test]
    fn too_fast_decay_fails_divergence() {
        let v = check_conditions(&with_exponents(0.4, 0.7));
        assert_eq!(v.failed_conditions, vec![Condition::ProductNotSummable]);
    }

    #[test]
    fn hyperbolic_product() {
        let (c4, c5) = dp_product_check(&with_exponents(0.4, 0.6)).unwrap();
        assert!((c4 - 0.16).abs() < 1e-15);
        assert_eq!(c5, 1.0);
        assert_eq!(dp_product_check(&StepSchedule::energy_game()), None);
        let half = with_exponents(0.5, 0.5);
        assert!(dp_product_check(&half).is_some());
        assert!(!check_conditions(&half).passes);
    }

    #[test]
    fn product_constants_with_time_scale() {
        let s = StepSchedule::new(0.5, 2.0, 0.3, 0.25, 0.75).unwrap();
        let (c4, c5) = dp_product_check(&s).unwrap();
        for k in [0, 1, 7, 1000] {
            assert!((s.product(k) - c4 / (c5 * k as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(StepSchedule::new(0.0, 1.0, 0.4, 0.3, 0.6).is_err());
        assert!(StepSchedule::new(0.4, 1.0, 0.4, -0.1, 0.6).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: ScheduleSpec = serde_json::from_str(
            r#"{"alpha": {"c": 0.4, "omega": 0.3}, "beta": {"c": 0.4, "omega": 0.6}, "c2": 1.0}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap(), StepSchedule::energy_game());
        assert_eq!(ScheduleSpec::from(StepSchedule::energy_game()), spec);
    }
}
