//! JSON scenario files.
//!
//! Every dimensioned value carries an explicit unit tag, e.g.
//! `{"value": 5, "unit": "ft"}`. Bare numbers for dimensioned fields, unknown
//! units and unknown keys are rejected at parse time. Lengths accept `m` or
//! `ft`; angles `deg`; power `dBm`; gains `dBi`; losses `dB`; frequency
//! `Hz`, `MHz` or `GHz`; area `m2` or `ft2`; pixel quantities `px`.
//!
//! Placements are either cartesian (`{"x": L, "y": L}`) or polar relative to
//! the reflector (`{"range": L, "bearing": A}`).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::MotorConfig;
use crate::controller::ControllerConfig;
use crate::geometry::{PlanarPoint, ReflectorPose, SceneGeometry, METERS_PER_FOOT};
use crate::linkbudget::{wavelength_from_frequency, LinkParams, MisalignmentKind, MisalignmentModel, NearFieldModel};
use crate::simulator::{self, Mode, Scenario};
use crate::vision::CameraModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field '{field}': {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tagged {
    pub value: f64,
    pub unit: String,
}

impl Tagged {
    pub fn new(value: f64, unit: &str) -> Self {
        Self {
            value,
            unit: unit.to_string(),
        }
    }

    fn scaled(&self, field: &str, units: &[(&str, f64)]) -> Result<f64, ConfigError> {
        if !self.value.is_finite() {
            return Err(invalid(field, "value must be finite"));
        }
        units
            .iter()
            .find(|(u, _)| *u == self.unit)
            .map(|(_, k)| self.value * k)
            .ok_or_else(|| {
                let allowed: Vec<_> = units.iter().map(|u| u.0).collect();
                invalid(field, format!("unit '{}' not accepted here (expected {})", self.unit, allowed.join(" or ")))
            })
    }

    pub fn meters(&self, field: &str) -> Result<f64, ConfigError> {
        self.scaled(field, &[("m", 1.0), ("ft", METERS_PER_FOOT)])
    }

    pub fn degrees(&self, field: &str) -> Result<f64, ConfigError> {
        self.scaled(field, &[("deg", 1.0)])
    }

    fn in_unit(&self, field: &str, unit: &str) -> Result<f64, ConfigError> {
        self.scaled(field, &[(unit, 1.0)])
    }

    pub fn hertz(&self, field: &str) -> Result<f64, ConfigError> {
        self.scaled(field, &[("Hz", 1.0), ("MHz", 1e6), ("GHz", 1e9)])
    }

    pub fn square_meters(&self, field: &str) -> Result<f64, ConfigError> {
        self.scaled(field, &[("m2", 1.0), ("ft2", METERS_PER_FOOT * METERS_PER_FOOT)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    Cartesian { x: Tagged, y: Tagged },
    Polar { range: Tagged, bearing: Tagged },
}

impl Placement {
    fn resolve(&self, field: &str, origin: PlanarPoint) -> Result<PlanarPoint, ConfigError> {
        match self {
            Placement::Cartesian { x, y } => Ok(PlanarPoint::new(
                x.meters(&format!("{field}.x"))?,
                y.meters(&format!("{field}.y"))?,
            )),
            Placement::Polar { range, bearing } => {
                let r = range.meters(&format!("{field}.range"))?;
                if r < 0.0 {
                    return Err(invalid(&format!("{field}.range"), "range must be >= 0"));
                }
                Ok(PlanarPoint::polar(origin, r, bearing.degrees(&format!("{field}.bearing"))?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectorSection {
    pub x: Tagged,
    pub y: Tagged,
    pub camera_boresight: Tagged,
    pub normal: Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    pub step: Tagged,
    pub steps: u32,
    pub direction: Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub tx_power: Tagged,
    pub tx_gain: Tagged,
    pub rx_gain: Tagged,
    pub carrier_frequency: Tagged,
    pub plate_area: Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisalignmentSection {
    pub kind: MisalignmentKind,
    pub beamwidth: Tagged,
    pub floor: Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub width: Tagged,
    pub fov: Tagged,
    pub distortion_scale: f64,
    pub distortion_denom: f64,
    pub pixel_noise_sigma: Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorSection {
    pub steps_per_rev: u32,
    pub microstepping: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSection {
    pub tx_id: u32,
    pub rx_id: u32,
    pub allowed_ids: Vec<u32>,
}

/// Reference log-distance fit, kept with the unit its distances were in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFitSection {
    pub a: Tagged,
    pub b: Tagged,
    pub distance_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub reflector: ReflectorSection,
    pub tx: Placement,
    pub rx: Placement,
    pub walk: WalkSection,
    pub link: LinkSection,
    pub blockage_loss: Tagged,
    pub misalignment: MisalignmentSection,
    #[serde(default)]
    pub near_field: NearFieldModel,
    pub camera: CameraSection,
    pub motor: MotorSection,
    pub markers: MarkerSection,
    pub modes: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_fit: Option<ReferenceFitSection>,
}

/// Resolved, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub modes: Vec<Mode>,
    pub reference_fit: Option<(f64, f64, String)>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }

    /// The built-in scenario expressed in file form (feet for the layout).
    pub fn default_file() -> Self {
        let s = simulator::default_scenario();
        let cam = s.controller.camera;
        Self {
            reflector: ReflectorSection {
                x: Tagged::new(0.0, "ft"),
                y: Tagged::new(0.0, "ft"),
                camera_boresight: Tagged::new(s.scene0.reflector.boresight_deg, "deg"),
                normal: Tagged::new(s.scene0.reflector.normal_deg, "deg"),
            },
            tx: Placement::Polar {
                range: Tagged::new(5.0, "ft"),
                bearing: Tagged::new(135.0, "deg"),
            },
            rx: Placement::Polar {
                range: Tagged::new(6.0, "ft"),
                bearing: Tagged::new(45.0, "deg"),
            },
            walk: WalkSection {
                step: Tagged::new(0.5, "ft"),
                steps: s.rx_steps,
                direction: Tagged::new(135.0, "deg"),
            },
            link: LinkSection {
                tx_power: Tagged::new(s.link.p_tx_dbm, "dBm"),
                tx_gain: Tagged::new(s.link.g_tx_dbi, "dBi"),
                rx_gain: Tagged::new(s.link.g_rx_dbi, "dBi"),
                carrier_frequency: Tagged::new(60.0, "GHz"),
                plate_area: Tagged::new(s.link.plate_area_m2, "m2"),
            },
            blockage_loss: Tagged::new(s.blockage_loss_db, "dB"),
            misalignment: MisalignmentSection {
                kind: s.misalignment.kind,
                beamwidth: Tagged::new(s.misalignment.beamwidth_deg, "deg"),
                floor: Tagged::new(s.misalignment.floor_db, "dB"),
            },
            near_field: s.near_field,
            camera: CameraSection {
                width: Tagged::new(cam.width_px as f64, "px"),
                fov: Tagged::new(cam.fov_deg, "deg"),
                distortion_scale: cam.distortion_scale,
                distortion_denom: cam.distortion_denom,
                pixel_noise_sigma: Tagged::new(cam.pixel_noise_sigma, "px"),
            },
            motor: MotorSection {
                steps_per_rev: s.controller.motor.steps_per_rev,
                microstepping: s.controller.motor.microstepping,
            },
            markers: MarkerSection {
                tx_id: s.controller.tx_marker_id,
                rx_id: s.controller.rx_marker_id,
                allowed_ids: s.controller.allowed_ids.iter().copied().collect(),
            },
            modes: Mode::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            seed: s.seed,
            reference_fit: Some(ReferenceFitSection {
                a: Tagged::new(-56.10, "dB"),
                b: Tagged::new(-15.71, "dB"),
                distance_unit: "ft".into(),
            }),
        }
    }

    pub fn resolve(&self) -> Result<LoadedScenario, ConfigError> {
        let r = &self.reflector;
        let origin = PlanarPoint::new(r.x.meters("reflector.x")?, r.y.meters("reflector.y")?);
        let pose = ReflectorPose::new(
            origin,
            r.camera_boresight.degrees("reflector.camera_boresight")?,
            r.normal.degrees("reflector.normal")?,
        );
        let tx = self.tx.resolve("tx", origin)?;
        let rx = self.rx.resolve("rx", origin)?;
        let scene0 = SceneGeometry::new(tx, rx, pose).map_err(|e| invalid("tx/rx", e.to_string()))?;

        let link = LinkParams::new(
            self.link.tx_power.in_unit("link.tx_power", "dBm")?,
            self.link.tx_gain.in_unit("link.tx_gain", "dBi")?,
            self.link.rx_gain.in_unit("link.rx_gain", "dBi")?,
            wavelength_from_frequency(self.link.carrier_frequency.hertz("link.carrier_frequency")?),
            self.link.plate_area.square_meters("link.plate_area")?,
        )
        .map_err(|e| invalid("link", e.to_string()))?;

        let misalignment = MisalignmentModel::new(
            self.misalignment.kind,
            self.misalignment.beamwidth.degrees("misalignment.beamwidth")?,
            self.misalignment.floor.in_unit("misalignment.floor", "dB")?,
        )
        .map_err(|e| invalid("misalignment", e.to_string()))?;

        let width = self.camera.width.in_unit("camera.width", "px")?;
        if !(width >= 1.0 && width.fract() == 0.0 && width <= u32::MAX as f64) {
            return Err(invalid("camera.width", "must be a positive whole number of pixels"));
        }
        let camera = CameraModel::with_distortion(
            width as u32,
            self.camera.fov.degrees("camera.fov")?,
            self.camera.distortion_scale,
            self.camera.distortion_denom,
            self.camera.pixel_noise_sigma.in_unit("camera.pixel_noise_sigma", "px")?,
        )
        .map_err(|e| invalid("camera", e.to_string()))?;
        let motor = MotorConfig::new(self.motor.steps_per_rev, self.motor.microstepping)
            .map_err(|e| invalid("motor", e.to_string()))?;
        let allowed: BTreeSet<u32> = self.markers.allowed_ids.iter().copied().collect();
        let controller = ControllerConfig::new(self.markers.tx_id, self.markers.rx_id, allowed, camera, motor)
            .map_err(|e| invalid("markers", e.to_string()))?;

        let step = self.walk.step.meters("walk.step")?;
        let scenario = Scenario {
            scene0,
            rx_step_m: step,
            rx_steps: self.walk.steps,
            rx_direction: Scenario::direction(self.walk.direction.degrees("walk.direction")?),
            blockage_loss_db: self.blockage_loss.in_unit("blockage_loss", "dB")?,
            link,
            misalignment,
            near_field: self.near_field,
            controller,
            seed: self.seed,
        };
        scenario.validate().map_err(|e| invalid("walk", e.to_string()))?;

        let mut modes = Vec::with_capacity(self.modes.len());
        for (i, m) in self.modes.iter().enumerate() {
            let mode: Mode = m.parse().map_err(|e: simulator::UnknownMode| invalid(&format!("modes[{i}]"), e.to_string()))?;
            if !modes.contains(&mode) {
                modes.push(mode);
            }
        }
        if modes.is_empty() {
            return Err(invalid("modes", "at least one mode is required"));
        }

        let reference_fit = match &self.reference_fit {
            None => None,
            Some(f) => {
                if !matches!(f.distance_unit.as_str(), "m" | "ft") {
                    return Err(invalid("reference_fit.distance_unit", "expected 'm' or 'ft'"));
                }
                Some((
                    f.a.in_unit("reference_fit.a", "dB")?,
                    f.b.in_unit("reference_fit.b", "dB")?,
                    f.distance_unit.clone(),
                ))
            }
        };

        Ok(LoadedScenario {
            scenario,
            modes,
            reference_fit,
        })
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioFile::from_json(&text)?.resolve()
}
