//! Received-power models: bistatic radar equation with a flat-plate RCS,
//! free-space LoS baseline, log-distance regression and an off-specular
//! misalignment roll-off.
//!
//! Powers are in dBm, gains in dBi, distances in meters, RCS in m².

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("invalid link parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit underdetermined: need at least 2 distinct distances, got {distinct}")]
    Underdetermined { distinct: usize },
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn wavelength_from_frequency(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT_M_S / freq_hz
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub p_tx_dbm: f64,
    pub g_tx_dbi: f64,
    pub g_rx_dbi: f64,
    pub wavelength_m: f64,
    pub plate_area_m2: f64,
}

impl LinkParams {
    pub fn new(p_tx_dbm: f64, g_tx_dbi: f64, g_rx_dbi: f64, wavelength_m: f64, plate_area_m2: f64) -> Result<Self, LinkError> {
        let p = Self {
            p_tx_dbm,
            g_tx_dbi,
            g_rx_dbi,
            wavelength_m,
            plate_area_m2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(LinkError::InvalidParams(format!("wavelength must be > 0, got {}", self.wavelength_m)));
        }
        if !(self.plate_area_m2 > 0.0 && self.plate_area_m2.is_finite()) {
            return Err(LinkError::InvalidParams(format!("plate area must be > 0, got {}", self.plate_area_m2)));
        }
        if ![self.p_tx_dbm, self.g_tx_dbi, self.g_rx_dbi].iter().all(|v| v.is_finite()) {
            return Err(LinkError::InvalidParams("power and gains must be finite".into()));
        }
        Ok(())
    }

    /// Fraunhofer distance `2 D² / λ` for a square plate of the configured
    /// area, taking `D` as the plate diagonal.
    pub fn far_field_distance_m(&self) -> f64 {
        let diagonal_sq = 2.0 * self.plate_area_m2;
        2.0 * diagonal_sq / self.wavelength_m
    }

    /// True when either leg is shorter than the far-field distance. Such
    /// geometries are still evaluated; callers surface this as a warning.
    pub fn violates_far_field(&self, d1: f64, d2: f64) -> bool {
        let limit = self.far_field_distance_m();
        d1 < limit || d2 < limit
    }

    fn eirp_and_rx_gain_db(&self) -> f64 {
        self.p_tx_dbm + self.g_tx_dbi + self.g_rx_dbi
    }
}

impl Default for LinkParams {
    /// 60 GHz carrier, 0.3 m x 0.3 m plate, 10 dBm into a 20 dBi transmit
    /// array and an omnidirectional receiver.
    fn default() -> Self {
        Self {
            p_tx_dbm: 10.0,
            g_tx_dbi: 20.0,
            g_rx_dbi: 0.0,
            wavelength_m: wavelength_from_frequency(60e9),
            plate_area_m2: 0.3 * 0.3,
        }
    }
}

/// Specular flat-plate RCS `4πA²/λ² · cos(β/2)`.
pub fn flat_plate_rcs(params: &LinkParams, beta_deg: f64) -> Result<f64, LinkError> {
    if !(0.0..180.0).contains(&beta_deg) {
        return Err(LinkError::Domain(format!("bistatic angle must be in [0, 180), got {beta_deg}")));
    }
    let a = params.plate_area_m2;
    let lambda = params.wavelength_m;
    Ok(4.0 * PI * a * a / (lambda * lambda) * (beta_deg / 2.0).to_radians().cos())
}

/// RCS at which the bistatic radar equation equals free-space propagation
/// over the unfolded path `d1 + d2`, i.e. a perfect infinite mirror.
pub fn mirror_limited_rcs(d1: f64, d2: f64) -> Result<f64, LinkError> {
    check_positive("d1", d1)?;
    check_positive("d2", d2)?;
    let r = d1 * d2 / (d1 + d2);
    Ok(4.0 * PI * r * r)
}

fn check_positive(name: &str, v: f64) -> Result<(), LinkError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LinkError::Domain(format!("{name} must be > 0, got {v}")))
    }
}

/// Bistatic radar equation in dBm.
pub fn received_power_reflected(params: &LinkParams, d1: f64, d2: f64, sigma: f64) -> Result<f64, LinkError> {
    check_positive("d1", d1)?;
    check_positive("d2", d2)?;
    check_positive("rcs", sigma)?;
    let lambda = params.wavelength_m;
    let four_pi = 4.0 * PI;
    let path = lambda * lambda * sigma / (four_pi.powi(3) * d1 * d1 * d2 * d2);
    Ok(params.eirp_and_rx_gain_db() + linear_to_db(path))
}

/// Friis free-space power in dBm.
pub fn received_power_los(params: &LinkParams, d: f64) -> Result<f64, LinkError> {
    check_positive("distance", d)?;
    Ok(params.eirp_and_rx_gain_db() + 20.0 * (params.wavelength_m / (4.0 * PI * d)).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDistanceFit {
    pub a: f64,
    pub b: f64,
    pub n: f64,
    pub r_squared: f64,
}

impl LogDistanceFit {
    pub fn new(a: f64, b: f64, r_squared: f64) -> Self {
        Self {
            a,
            b,
            n: -b / 10.0,
            r_squared,
        }
    }
}

/// `a + b·log10(d)`, with `d` in the unit the fit was produced in.
pub fn log_distance_power(fit: &LogDistanceFit, d: f64) -> Result<f64, LinkError> {
    check_positive("distance", d)?;
    Ok(fit.a + fit.b * d.log10())
}

/// Ordinary least squares of power against `log10(d)`.
pub fn fit_log_distance(samples: &[(f64, f64)]) -> Result<LogDistanceFit, LinkError> {
    for &(d, p) in samples {
        check_positive("distance", d)?;
        if !p.is_finite() {
            return Err(LinkError::Domain(format!("non-finite power {p}")));
        }
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(LinkError::Underdetermined { distinct: distinct.len() });
    }

    let count = samples.len() as f64;
    let x_mean = samples.iter().map(|s| s.0.log10()).sum::<f64>() / count;
    let y_mean = samples.iter().map(|s| s.1).sum::<f64>() / count;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(d, p) in samples {
        let dx = d.log10() - x_mean;
        sxx += dx * dx;
        sxy += dx * (p - y_mean);
    }
    let b = sxy / sxx;
    let a = y_mean - b * x_mean;

    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(d, p) in samples {
        let r = p - (a + b * d.log10());
        ss_res += r * r;
        ss_tot += (p - y_mean) * (p - y_mean);
    }
    // a flat response is fit exactly by the b = 0 line
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(LogDistanceFit::new(a, b, r_squared))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisalignmentKind {
    HardCutoff,
    GaussianRolloff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisalignmentModel {
    pub kind: MisalignmentKind,
    /// Pointing tolerance; for the Gaussian form this is the full width at
    /// half power.
    pub beamwidth_deg: f64,
    /// Residual scatter floor relative to the specular RCS.
    pub floor_db: f64,
}

impl MisalignmentModel {
    pub fn new(kind: MisalignmentKind, beamwidth_deg: f64, floor_db: f64) -> Result<Self, LinkError> {
        if !(beamwidth_deg > 0.0) {
            return Err(LinkError::InvalidParams(format!("beamwidth must be > 0, got {beamwidth_deg}")));
        }
        if !(floor_db <= 0.0) {
            return Err(LinkError::InvalidParams(format!("floor must be <= 0 dB, got {floor_db}")));
        }
        Ok(Self {
            kind,
            beamwidth_deg,
            floor_db,
        })
    }

    /// Linear RCS multiplier for a pointing error in degrees.
    pub fn factor(&self, pointing_error_deg: f64) -> f64 {
        let err = pointing_error_deg.abs();
        if err == 0.0 {
            return 1.0;
        }
        let floor = db_to_linear(self.floor_db);
        match self.kind {
            MisalignmentKind::HardCutoff => {
                if err <= self.beamwidth_deg {
                    1.0
                } else {
                    floor
                }
            }
            MisalignmentKind::GaussianRolloff => {
                let u = err / self.beamwidth_deg;
                (-(u * u) * LN_2 * 4.0).exp().max(floor)
            }
        }
    }
}

impl Default for MisalignmentModel {
    fn default() -> Self {
        Self {
            kind: MisalignmentKind::GaussianRolloff,
            beamwidth_deg: 2.0,
            floor_db: -30.0,
        }
    }
}

/// Flat-plate RCS scaled by the misalignment roll-off.
pub fn misaligned_rcs(
    params: &LinkParams,
    scene_beta_deg: f64,
    pointing_error_deg: f64,
    model: &MisalignmentModel,
) -> Result<f64, LinkError> {
    Ok(flat_plate_rcs(params, scene_beta_deg)? * model.factor(pointing_error_deg))
}

/// How the reflected modes treat legs shorter than the far-field distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearFieldModel {
    /// Use the flat-plate RCS unchanged at every range.
    AsPrinted,
    /// Cap the specular RCS at [`mirror_limited_rcs`].
    #[default]
    MirrorCap,
}

impl NearFieldModel {
    pub fn specular_rcs(&self, params: &LinkParams, beta_deg: f64, d1: f64, d2: f64) -> Result<f64, LinkError> {
        let plate = flat_plate_rcs(params, beta_deg)?;
        match self {
            NearFieldModel::AsPrinted => Ok(plate),
            NearFieldModel::MirrorCap => Ok(plate.min(mirror_limited_rcs(d1, d2)?)),
        }
    }
}
