//! Stepper-motor model: resolution, step computation, quantized motion and
//! calibration.
//!
//! `step_count` is the ground truth for orientation. `theta_o` is always
//! recomputed as `reference + step_count · Δθ` so that long step sequences
//! never accumulate drift.

use thiserror::Error;

use crate::geometry::normalize_deg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ActuatorError {
    #[error("invalid motor config: steps_per_rev={steps_per_rev}, microstepping={microstepping} (both must be >= 1)")]
    InvalidConfig { steps_per_rev: u32, microstepping: u32 },
    #[error("reflector must be calibrated before commanding motion")]
    CalibrationRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotorConfig {
    pub steps_per_rev: u32,
    pub microstepping: u32,
}

impl MotorConfig {
    pub fn new(steps_per_rev: u32, microstepping: u32) -> Result<Self, ActuatorError> {
        let cfg = Self {
            steps_per_rev,
            microstepping,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ActuatorError> {
        if self.steps_per_rev == 0 || self.microstepping == 0 {
            return Err(ActuatorError::InvalidConfig {
                steps_per_rev: self.steps_per_rev,
                microstepping: self.microstepping,
            });
        }
        Ok(())
    }
}

impl Default for MotorConfig {
    /// 200 full steps per revolution at 1/16 microstepping.
    fn default() -> Self {
        Self {
            steps_per_rev: 200,
            microstepping: 16,
        }
    }
}

/// `360 / (N_step · m)` degrees per microstep.
pub fn angular_resolution(cfg: &MotorConfig) -> Result<f64, ActuatorError> {
    cfg.validate()?;
    Ok(360.0 / (cfg.steps_per_rev as f64 * cfg.microstepping as f64))
}

/// Signed microsteps from `theta_o` to `theta_ref`, rounding half away from
/// zero. The signed difference is used as-is (no short-way wrap).
pub fn steps_for(theta_ref: f64, theta_o: f64, cfg: &MotorConfig) -> Result<i64, ActuatorError> {
    let step = angular_resolution(cfg)?;
    Ok(((theta_ref - theta_o) / step).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatingMode {
    Active,
    #[default]
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReflectorState {
    pub theta_o: f64,
    pub step_count: i64,
    pub calibrated: bool,
    pub mode: OperatingMode,
    pub reference_deg: f64,
}

impl ReflectorState {
    pub fn uncalibrated() -> Self {
        Self::default()
    }

    /// A state already calibrated at `reference_deg`.
    pub fn calibrated_at(reference_deg: f64) -> Self {
        calibrate(&Self::default(), reference_deg)
    }

    /// `theta_o` folded into `[0, 360)` for display.
    pub fn theta_o_wrapped(&self) -> f64 {
        normalize_deg(self.theta_o)
    }

    pub fn steps_toward(&self, theta_ref: f64, cfg: &MotorConfig) -> Result<i64, ActuatorError> {
        if !self.calibrated {
            return Err(ActuatorError::CalibrationRequired);
        }
        steps_for(theta_ref, self.theta_o, cfg)
    }
}

pub fn apply_steps(state: &ReflectorState, steps: i64, cfg: &MotorConfig) -> Result<ReflectorState, ActuatorError> {
    if !state.calibrated {
        return Err(ActuatorError::CalibrationRequired);
    }
    let step = angular_resolution(cfg)?;
    let step_count = state.step_count + steps;
    Ok(ReflectorState {
        step_count,
        theta_o: state.reference_deg + step_count as f64 * step,
        ..*state
    })
}

/// Manual alignment to a known reference orientation.
pub fn calibrate(state: &ReflectorState, reference_deg: f64) -> ReflectorState {
    ReflectorState {
        theta_o: reference_deg,
        step_count: 0,
        calibrated: true,
        mode: state.mode,
        reference_deg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resolution_examples() {
        assert_eq!(angular_resolution(&MotorConfig::new(200, 16).unwrap()).unwrap(), 0.1125);
        assert_eq!(angular_resolution(&MotorConfig::new(200, 1).unwrap()).unwrap(), 1.8);
        assert_eq!(angular_resolution(&MotorConfig::new(400, 8).unwrap()).unwrap(), 0.1125);
        assert!(MotorConfig::new(0, 16).is_err());
        assert!(angular_resolution(&MotorConfig { steps_per_rev: 200, microstepping: 0 }).is_err());
    }

    #[test]
    fn step_examples() {
        let cfg = MotorConfig::default();
        assert_eq!(steps_for(45.0, 0.0, &cfg).unwrap(), 400);
        assert_eq!(steps_for(12.3, 12.3, &cfg).unwrap(), 0);
        assert_eq!(steps_for(0.05625, 0.0, &cfg).unwrap(), 1);
        assert_eq!(steps_for(-0.05625, 0.0, &cfg).unwrap(), -1);
        assert_eq!(
            ReflectorState::uncalibrated().steps_toward(10.0, &cfg),
            Err(ActuatorError::CalibrationRequired)
        );
    }

    #[test]
    fn apply_examples() {
        let cfg = MotorConfig::default();
        let s = ReflectorState::calibrated_at(0.0);
        assert_eq!(apply_steps(&s, 0, &cfg).unwrap(), s);
        let moved = apply_steps(&s, 400, &cfg).unwrap();
        assert_eq!(moved.theta_o, 45.0);
        assert_eq!(moved.step_count, 400);
        let back = apply_steps(&moved, -400, &cfg).unwrap();
        assert!((back.theta_o - s.theta_o).abs() < 1e-12);
        assert_eq!(
            apply_steps(&ReflectorState::uncalibrated(), 1, &cfg),
            Err(ActuatorError::CalibrationRequired)
        );
    }

    #[test]
    fn calibration_examples() {
        let cfg = MotorConfig::default();
        let s = calibrate(&ReflectorState::uncalibrated(), 0.0);
        assert!(s.calibrated && s.theta_o == 0.0 && s.step_count == 0);
        let s = calibrate(&s, 90.0);
        assert_eq!(s.steps_toward(90.0, &cfg).unwrap(), 0);
        assert_eq!(calibrate(&s, 90.0), s);
        let moved = apply_steps(&s, 1000, &cfg).unwrap();
        let recal = calibrate(&moved, 90.0);
        assert_eq!(recal.step_count, 0);
        assert_eq!(recal.theta_o, 90.0);
    }

    #[test]
    fn display_wrap() {
        let cfg = MotorConfig::default();
        let s = apply_steps(&ReflectorState::calibrated_at(350.0), 200, &cfg).unwrap();
        assert_eq!(s.theta_o, 372.5);
        assert!((s.theta_o_wrapped() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn long_step_sequences_do_not_drift() {
        use rand::{Rng, SeedableRng};
        let cfg = MotorConfig::default();
        let step = angular_resolution(&cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut s = ReflectorState::calibrated_at(17.0);
        for _ in 0..10_000 {
            s = apply_steps(&s, rng.random_range(-3000..=3000), &cfg).unwrap();
        }
        assert!((s.theta_o - (17.0 + s.step_count as f64 * step)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn residual_within_half_step(theta_ref in -720.0..720.0f64, theta_o in -720.0..720.0f64) {
            let cfg = MotorConfig::default();
            let step = angular_resolution(&cfg).unwrap();
            let s = ReflectorState::calibrated_at(theta_o);
            let n = s.steps_toward(theta_ref, &cfg).unwrap();
            let after = apply_steps(&s, n, &cfg).unwrap();
            prop_assert!((after.theta_o - theta_ref).abs() <= step / 2.0 + 1e-9);
        }

        #[test]
        fn steps_antisymmetric(a in -360.0..360.0f64, b in -360.0..360.0f64) {
            let cfg = MotorConfig::default();
            let q = (a - b) / angular_resolution(&cfg).unwrap();
            prop_assume!((q.abs().fract() - 0.5).abs() > 1e-9);
            prop_assert_eq!(steps_for(a, b, &cfg).unwrap(), -steps_for(b, a, &cfg).unwrap());
        }
    }
}
