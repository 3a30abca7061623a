//! Deterministic simulator and analysis toolkit for vision-guided passive
//! mmWave reflectors.
//!
//! The processing chain mirrors the physical device: a camera mounted on the
//! reflector base reports fiducial-marker centroids, the [`vision`] stage
//! turns them into bearings, the [`controller`] bisects the transmitter and
//! receiver bearings and drives the [`actuator`] (a microstepped stepper
//! motor), and [`linkbudget`] scores the resulting alignment with the
//! bistatic radar equation. [`simulator`] reproduces the lateral-walk
//! experiment for four link configurations, and [`analysis`] computes
//! CCDF/outage statistics, average gains and AoA error statistics.
//!
//! Conventions used throughout:
//!
//! - planar, azimuth-only geometry; `+x` east, angles counterclockwise in degrees;
//! - world-frame angles are normalized to `[0, 360)`;
//! - camera-frame bearings live in `[0, fov]`, with the image center at `fov / 2`;
//! - distances are meters internally, feet are accepted only at config ingestion.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator;
pub mod analysis;
pub mod config;
pub mod controller;
pub mod geometry;
pub mod io;
pub mod linkbudget;
pub mod simulator;
pub mod vision;

pub use actuator::{MotorConfig, OperatingMode, ReflectorState};
pub use controller::{ControlDecision, ControllerConfig, DecisionMode};
pub use geometry::{PlanarPoint, ReflectorPose, SceneGeometry};
pub use linkbudget::{LinkParams, LogDistanceFit, MisalignmentKind, MisalignmentModel};
pub use simulator::{Mode, PowerTrace, Scenario};
pub use vision::{CameraModel, FrameObservations, MarkerObservation};
