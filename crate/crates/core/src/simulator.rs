//! Scenario engine for the lateral-walk experiment: a fixed transmitter, a
//! receiver stepping along a straight line, and four link configurations
//! evaluated at every receiver position.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actuator::{self, ReflectorState};
use crate::controller::{self, ControlDecision, ControllerConfig, ControllerError};
use crate::geometry::{self, feet_to_meters, GeometryError, PlanarPoint, ReflectorPose, SceneGeometry};
use crate::linkbudget::{self, LinkError, LinkParams, MisalignmentModel, NearFieldModel};
use crate::vision::{self, FrameObservations, MarkerObservation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("position {position_index}: {source}")]
    AtPosition {
        position_index: usize,
        #[source]
        source: Box<SimError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Los,
    NlosBare,
    StaticReflector,
    VisionGuided,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Los, Mode::NlosBare, Mode::StaticReflector, Mode::VisionGuided];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Los => "los",
            Mode::NlosBare => "nlos_bare",
            Mode::StaticReflector => "static_reflector",
            Mode::VisionGuided => "vision_guided",
        }
    }

    pub fn is_reflected(self) -> bool {
        matches!(self, Mode::StaticReflector | Mode::VisionGuided)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode '{0}' (expected one of los, nlos_bare, static_reflector, vision_guided)")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Placement at position 0.
    pub scene0: SceneGeometry,
    pub rx_step_m: f64,
    /// Number of increments; the walk visits `rx_steps + 1` positions.
    pub rx_steps: u32,
    /// Unit walking direction.
    pub rx_direction: PlanarPoint,
    pub blockage_loss_db: f64,
    pub link: LinkParams,
    pub misalignment: MisalignmentModel,
    pub near_field: NearFieldModel,
    pub controller: ControllerConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scene0.validate()?;
        self.link.validate()?;
        if !(self.rx_step_m > 0.0 && self.rx_step_m.is_finite()) {
            return Err(SimError::InvalidScenario(format!("rx step must be > 0, got {}", self.rx_step_m)));
        }
        if self.rx_steps < 1 {
            return Err(SimError::InvalidScenario("rx_steps must be >= 1".into()));
        }
        if !(self.blockage_loss_db >= 0.0 && self.blockage_loss_db.is_finite()) {
            return Err(SimError::InvalidScenario(format!(
                "blockage loss must be >= 0 dB, got {}",
                self.blockage_loss_db
            )));
        }
        let norm = self.rx_direction.x.hypot(self.rx_direction.y);
        if !((norm - 1.0).abs() < 1e-9) {
            return Err(SimError::InvalidScenario(format!("rx direction must be a unit vector (norm {norm})")));
        }
        if self.controller.tx_marker_id == self.controller.rx_marker_id {
            return Err(SimError::InvalidScenario("tx and rx marker ids must differ".into()));
        }
        self.controller
            .camera
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        self.controller.motor.validate().map_err(ControllerError::from)?;
        Ok(())
    }

    pub fn position_count(&self) -> usize {
        self.rx_steps as usize + 1
    }

    pub fn rx_position(&self, index: usize) -> PlanarPoint {
        let travel = index as f64 * self.rx_step_m;
        self.scene0
            .rx
            .offset(travel * self.rx_direction.x, travel * self.rx_direction.y)
    }

    pub fn scene_at(&self, index: usize) -> SceneGeometry {
        self.scene0.with_rx(self.rx_position(index))
    }

    /// Unit direction vector for a world bearing.
    pub fn direction(bearing_deg: f64) -> PlanarPoint {
        PlanarPoint::polar(PlanarPoint::ORIGIN, 1.0, bearing_deg)
    }
}

/// Reflector at the origin with its normal along `+y`. The transmitter sits
/// 5 ft away and the receiver 6 ft away, each 45° off the plate surface on
/// opposite sides of the normal. The receiver then walks perpendicular to its
/// initial ray, toward the normal, 19 × 0.5 ft. The camera boresight is
/// turned 10° toward the transmitter so that both markers fit in the
/// corrected field of view once the receiver has moved in.
pub fn default_scenario() -> Scenario {
    let normal = 90.0;
    let reflector = ReflectorPose::new(PlanarPoint::ORIGIN, 100.0, normal);
    let tx = PlanarPoint::polar(PlanarPoint::ORIGIN, feet_to_meters(5.0), normal + 45.0);
    let rx = PlanarPoint::polar(PlanarPoint::ORIGIN, feet_to_meters(6.0), normal - 45.0);
    Scenario {
        scene0: SceneGeometry { tx, rx, reflector },
        rx_step_m: feet_to_meters(0.5),
        rx_steps: 19,
        rx_direction: Scenario::direction(normal + 45.0),
        blockage_loss_db: 40.0,
        link: LinkParams::default(),
        misalignment: MisalignmentModel::default(),
        near_field: NearFieldModel::default(),
        controller: ControllerConfig::default(),
        seed: 0,
    }
}

/// What the camera would report for this scene. Markers whose bearings do not
/// project into the image are omitted.
pub fn synth_frame(scene: &SceneGeometry, cfg: &ControllerConfig, seed: u64, frame_index: u64) -> FrameObservations {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timestamp_s = frame_index as f64;
    let mut observations = Vec::with_capacity(2);
    for (marker_id, target) in [(cfg.tx_marker_id, scene.tx), (cfg.rx_marker_id, scene.rx)] {
        let noise_seed = rng.next_u64();
        let Ok(world) = geometry::bearing_world(&scene.reflector, target) else {
            continue;
        };
        let cam = geometry::world_to_camera_bearing(&scene.reflector, world, &cfg.camera);
        if let Some(x) = vision::project_bearing_to_pixel(cam, &cfg.camera, Some(noise_seed)).pixel() {
            observations.push(MarkerObservation {
                marker_id,
                centroid_x_px: x as f64,
                timestamp_s,
            });
        }
    }
    FrameObservations {
        frame_index,
        observations,
    }
}

/// World normal of a reflector whose controller orientation is `state.theta_o`.
pub fn world_normal(scene: &SceneGeometry, state: &ReflectorState, cfg: &ControllerConfig) -> f64 {
    geometry::camera_to_world_bearing(&scene.reflector, state.theta_o, &cfg.camera)
}

/// Received power for one mode at one placement, in dBm.
pub fn evaluate_link(mode: Mode, scene: &SceneGeometry, state: &ReflectorState, scenario: &Scenario) -> Result<f64, SimError> {
    scene.validate()?;
    let link = &scenario.link;
    match mode {
        Mode::Los | Mode::NlosBare => {
            let d = scene.tx.distance_to(scene.rx);
            if d <= geometry::MIN_SEPARATION_M {
                return Err(GeometryError::InvalidScene("transmitter coincides with receiver").into());
            }
            let los = linkbudget::received_power_los(link, d)?;
            Ok(if mode == Mode::Los { los } else { los - scenario.blockage_loss_db })
        }
        Mode::StaticReflector | Mode::VisionGuided => {
            let normal = world_normal(scene, state, &scenario.controller);
            let error = geometry::angular_separation(normal, geometry::specular_normal(scene)?);
            let beta = geometry::bistatic_angle(scene)?;
            let (d1, d2) = geometry::distances(scene)?;
            let sigma = scenario.near_field.specular_rcs(link, beta, d1, d2)? * scenario.misalignment.factor(error);
            Ok(linkbudget::received_power_reflected(link, d1, d2, sigma)?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    pub position_index: usize,
    pub rx_position: PlanarPoint,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub mode: Mode,
    pub samples: Vec<PowerSample>,
}

impl PowerTrace {
    pub fn powers(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.power_db).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub traces: Vec<PowerTrace>,
    /// Controller decisions, one per position; empty unless the vision
    /// mode was requested.
    pub decisions: Vec<ControlDecision>,
    pub frames: Vec<FrameObservations>,
    /// Some leg was shorter than the plate's far-field distance.
    pub far_field_warning: bool,
}

impl Experiment {
    pub fn trace(&self, mode: Mode) -> Option<&PowerTrace> {
        self.traces.iter().find(|t| t.mode == mode)
    }
}

/// Initial orientation shared by the static and vision-guided reflectors:
/// aligned by hand to the specular normal at position 0.
pub fn manual_alignment(scenario: &Scenario) -> Result<ReflectorState, SimError> {
    let scene = &scenario.scene0;
    let normal = geometry::specular_normal(scene)?;
    let cam = geometry::world_to_camera_bearing(&scene.reflector, normal, &scenario.controller.camera);
    Ok(actuator::ReflectorState::calibrated_at(cam))
}

pub fn run_experiment(scenario: &Scenario, modes: &[Mode]) -> Result<Experiment, SimError> {
    run_experiment_masked(scenario, modes, &BTreeSet::new())
}

/// Like [`run_experiment`], but markers in `masked_ids` are deleted from
/// every synthesized frame, as if permanently occluded.
pub fn run_experiment_masked(scenario: &Scenario, modes: &[Mode], masked_ids: &BTreeSet<u32>) -> Result<Experiment, SimError> {
    scenario.validate()?;
    let static_state = manual_alignment(scenario)?;
    let mut vision_state = static_state;
    let run_vision = modes.contains(&Mode::VisionGuided);

    let mut traces: Vec<PowerTrace> = modes
        .iter()
        .map(|&mode| PowerTrace {
            mode,
            samples: Vec::with_capacity(scenario.position_count()),
        })
        .collect();
    let mut decisions = Vec::new();
    let mut frames = Vec::new();
    let mut far_field_warning = false;
    let mut seeds = ChaCha8Rng::seed_from_u64(scenario.seed);

    for index in 0..scenario.position_count() {
        let at = |e: SimError| SimError::AtPosition {
            position_index: index,
            source: Box::new(e),
        };
        let scene = scenario.scene_at(index);
        scene.validate().map_err(|e| at(e.into()))?;
        let frame_seed = seeds.next_u64();

        if run_vision {
            let mut frame = synth_frame(&scene, &scenario.controller, frame_seed, index as u64);
            frame.observations.retain(|o| !masked_ids.contains(&o.marker_id));
            let (next, decision) =
                controller::control_step(&frame, &vision_state, &scenario.controller).map_err(|e| at(e.into()))?;
            vision_state = next;
            decisions.push(decision);
            frames.push(frame);
        }

        let (d1, d2) = geometry::distances(&scene).map_err(|e| at(e.into()))?;
        far_field_warning |= scenario.link.violates_far_field(d1, d2);

        for trace in &mut traces {
            let state = match trace.mode {
                Mode::VisionGuided => &vision_state,
                _ => &static_state,
            };
            let power_db = evaluate_link(trace.mode, &scene, state, scenario).map_err(at)?;
            trace.samples.push(PowerSample {
                position_index: index,
                rx_position: scene.rx,
                power_db,
            });
        }
    }

    Ok(Experiment {
        traces,
        decisions,
        frames,
        far_field_warning,
    })
}

/// Worst-case pointing error of a noiseless vision-guided step: half a pixel
/// of AoA quantization through the steepest part of the correction, plus
/// half a motor step.
pub fn quantization_pointing_bound_deg(cfg: &ControllerConfig) -> Result<f64, SimError> {
    let step = actuator::angular_resolution(&cfg.motor).map_err(ControllerError::from)?;
    let aoa = 0.5 * cfg.camera.pixel_pitch_deg() * cfg.camera.max_distortion_slope();
    Ok(aoa + step / 2.0 + 1e-9)
}

/// Power loss (dB, positive) the misalignment model assigns to
/// [`quantization_pointing_bound_deg`].
pub fn quantization_loss_bound_db(scenario: &Scenario) -> Result<f64, SimError> {
    let bound = quantization_pointing_bound_deg(&scenario.controller)?;
    Ok(-linkbudget::linear_to_db(scenario.misalignment.factor(bound)))
}
