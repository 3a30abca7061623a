//! Closed-loop reflector orientation from dual-marker AoA estimates.
//!
//! Each frame: drop unauthorized markers, estimate the TX and RX bearings,
//! bisect them, and step the motor toward the bisector. A frame missing
//! either marker leaves the plate where it is (static fallback).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::actuator::{self, ActuatorError, MotorConfig, OperatingMode, ReflectorState};
use crate::vision::{self, CameraModel, FrameObservations, VisionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Actuator(#[from] ActuatorError),
    #[error("invalid frame: {0}")]
    InvalidFrame(#[from] VisionError),
    #[error("frame {frame_index}: {source}")]
    AtFrame {
        frame_index: u64,
        #[source]
        source: Box<ControllerError>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub tx_marker_id: u32,
    pub rx_marker_id: u32,
    pub allowed_ids: BTreeSet<u32>,
    pub camera: CameraModel,
    pub motor: MotorConfig,
}

impl ControllerConfig {
    pub fn new(
        tx_marker_id: u32,
        rx_marker_id: u32,
        allowed_ids: BTreeSet<u32>,
        camera: CameraModel,
        motor: MotorConfig,
    ) -> Result<Self, ControllerError> {
        let cfg = Self {
            tx_marker_id,
            rx_marker_id,
            allowed_ids,
            camera,
            motor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.tx_marker_id == self.rx_marker_id {
            return Err(ControllerError::InvalidConfig(format!(
                "tx and rx marker ids must differ (both {})",
                self.tx_marker_id
            )));
        }
        for (role, id) in [("tx", self.tx_marker_id), ("rx", self.rx_marker_id)] {
            if !self.allowed_ids.contains(&id) {
                return Err(ControllerError::InvalidConfig(format!("{role} marker id {id} is not in allowed_ids")));
            }
        }
        self.camera.validate().map_err(|e| ControllerError::InvalidConfig(e.to_string()))?;
        self.motor.validate()?;
        Ok(())
    }
}

impl Default for ControllerConfig {
    /// Transmitter tagged with marker 1, receiver with marker 0.
    fn default() -> Self {
        Self {
            tx_marker_id: 1,
            rx_marker_id: 0,
            allowed_ids: [0, 1].into(),
            camera: CameraModel::default(),
            motor: MotorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionMode {
    Active,
    StaticFallback,
}

impl DecisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMode::Active => "active",
            DecisionMode::StaticFallback => "static_fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub frame_index: u64,
    pub theta_t: Option<f64>,
    pub theta_r: Option<f64>,
    pub theta_ref: Option<f64>,
    pub steps_commanded: i64,
    /// Quantized orientation actually reached, camera-frame degrees.
    pub new_theta_o: f64,
    pub mode: DecisionMode,
}

/// One pass of the orientation loop.
pub fn control_step(
    frame: &FrameObservations,
    state: &ReflectorState,
    cfg: &ControllerConfig,
) -> Result<(ReflectorState, ControlDecision), ControllerError> {
    if !state.calibrated {
        return Err(ActuatorError::CalibrationRequired.into());
    }
    frame.check_unique_ids()?;
    let frame = vision::filter_authorized(frame, &cfg.allowed_ids);

    let theta_t = frame
        .find(cfg.tx_marker_id)
        .map(|o| vision::estimate_aoa(o, &cfg.camera))
        .transpose()?;
    let theta_r = frame
        .find(cfg.rx_marker_id)
        .map(|o| vision::estimate_aoa(o, &cfg.camera))
        .transpose()?;

    let (Some(t), Some(r)) = (theta_t, theta_r) else {
        let held = ReflectorState {
            mode: OperatingMode::Static,
            ..*state
        };
        let decision = ControlDecision {
            frame_index: frame.frame_index,
            theta_t,
            theta_r,
            theta_ref: None,
            steps_commanded: 0,
            new_theta_o: held.theta_o,
            mode: DecisionMode::StaticFallback,
        };
        return Ok((held, decision));
    };

    let theta_ref = (t + r) / 2.0;
    let steps = state.steps_toward(theta_ref, &cfg.motor)?;
    let next = ReflectorState {
        mode: OperatingMode::Active,
        ..actuator::apply_steps(state, steps, &cfg.motor)?
    };
    let decision = ControlDecision {
        frame_index: frame.frame_index,
        theta_t: Some(t),
        theta_r: Some(r),
        theta_ref: Some(theta_ref),
        steps_commanded: steps,
        new_theta_o: next.theta_o,
        mode: DecisionMode::Active,
    };
    Ok((next, decision))
}

/// Folds [`control_step`] over a frame stream, returning one decision per frame.
pub fn run_loop(
    frames: &[FrameObservations],
    initial: &ReflectorState,
    cfg: &ControllerConfig,
) -> Result<Vec<ControlDecision>, ControllerError> {
    let mut state = *initial;
    let mut decisions = Vec::with_capacity(frames.len());
    for frame in frames {
        let (next, decision) = control_step(frame, &state, cfg).map_err(|e| ControllerError::AtFrame {
            frame_index: frame.frame_index,
            source: Box::new(e),
        })?;
        state = next;
        decisions.push(decision);
    }
    Ok(decisions)
}
