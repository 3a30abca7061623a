//! Camera-side pipeline: marker centroids to corrected bearings, the inverse
//! projection used to synthesize observations, and ID allow-listing.
//!
//! Camera-frame bearings run from 0 at the left image edge to `fov_deg` at
//! the right edge; the image center is `center_deg`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("observation invalid: pixel x={x} outside [0, {width})")]
    ObservationOutOfRange { x: f64, width: u32 },
    #[error("frame {frame_index}: marker id {marker_id} detected more than once")]
    DuplicateMarker { frame_index: u64, marker_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width_px: u32,
    pub fov_deg: f64,
    pub center_deg: f64,
    pub distortion_scale: f64,
    pub distortion_denom: f64,
    pub pixel_noise_sigma: f64,
}

impl CameraModel {
    pub const DEFAULT_DISTORTION_SCALE: f64 = 43.5;
    pub const DEFAULT_DISTORTION_DENOM: f64 = 4000.0;

    pub fn new(width_px: u32, fov_deg: f64) -> Result<Self, VisionError> {
        Self::with_distortion(width_px, fov_deg, Self::DEFAULT_DISTORTION_SCALE, Self::DEFAULT_DISTORTION_DENOM, 0.0)
    }

    pub fn with_distortion(
        width_px: u32,
        fov_deg: f64,
        distortion_scale: f64,
        distortion_denom: f64,
        pixel_noise_sigma: f64,
    ) -> Result<Self, VisionError> {
        let cam = Self {
            width_px,
            fov_deg,
            center_deg: fov_deg / 2.0,
            distortion_scale,
            distortion_denom,
            pixel_noise_sigma,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        if self.width_px == 0 {
            return Err(VisionError::InvalidCamera("width must be > 0".into()));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(VisionError::InvalidCamera(format!("fov must be in (0, 180), got {}", self.fov_deg)));
        }
        if self.center_deg != self.fov_deg / 2.0 {
            return Err(VisionError::InvalidCamera("center must equal fov / 2".into()));
        }
        if !(self.distortion_denom > 0.0) {
            return Err(VisionError::InvalidCamera("distortion denominator must be > 0".into()));
        }
        if !(self.distortion_scale > 0.0 && self.distortion_scale.is_finite()) {
            return Err(VisionError::InvalidCamera("distortion scale must be > 0".into()));
        }
        if !(self.pixel_noise_sigma >= 0.0 && self.pixel_noise_sigma.is_finite()) {
            return Err(VisionError::InvalidCamera("pixel noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Raw-angle width of one pixel.
    pub fn pixel_pitch_deg(&self) -> f64 {
        self.fov_deg / self.width_px as f64
    }

    /// Largest slope of [`correct_distortion`], reached at the image center.
    pub fn max_distortion_slope(&self) -> f64 {
        self.distortion_scale * (180.0 / std::f64::consts::PI) / self.distortion_denom
    }

    /// Corrected bearings reachable from the leftmost and rightmost raw angle.
    pub fn corrected_range_deg(&self) -> (f64, f64) {
        (correct_distortion(0.0, self), correct_distortion(self.fov_deg, self))
    }
}

impl Default for CameraModel {
    /// 640 px wide, 120° horizontal field of view.
    fn default() -> Self {
        Self::new(640, 120.0).expect("default camera is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerObservation {
    pub marker_id: u32,
    pub centroid_x_px: f64,
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameObservations {
    pub frame_index: u64,
    pub observations: Vec<MarkerObservation>,
}

impl FrameObservations {
    /// Builds a frame, rejecting repeated marker IDs.
    pub fn new(frame_index: u64, observations: Vec<MarkerObservation>) -> Result<Self, VisionError> {
        let frame = Self {
            frame_index,
            observations,
        };
        frame.check_unique_ids()?;
        Ok(frame)
    }

    pub fn check_unique_ids(&self) -> Result<(), VisionError> {
        let mut seen = BTreeSet::new();
        for o in &self.observations {
            if !seen.insert(o.marker_id) {
                return Err(VisionError::DuplicateMarker {
                    frame_index: self.frame_index,
                    marker_id: o.marker_id,
                });
            }
        }
        Ok(())
    }

    pub fn find(&self, marker_id: u32) -> Option<&MarkerObservation> {
        self.observations.iter().find(|o| o.marker_id == marker_id)
    }
}

/// Linear pixel-to-angle map `x / W · fov`.
pub fn pixel_to_raw_angle(x: f64, camera: &CameraModel) -> Result<f64, VisionError> {
    let width = camera.width_px as f64;
    if !(x >= 0.0 && x < width) {
        return Err(VisionError::ObservationOutOfRange { x, width: camera.width_px });
    }
    Ok(x / width * camera.fov_deg)
}

/// Empirical arctangent correction around the optical center. The offset is
/// taken in degrees and divided by the dimensionless denominator; arctan is
/// evaluated in radians and converted back with `180/π`.
pub fn correct_distortion(theta_raw: f64, camera: &CameraModel) -> f64 {
    let offset = (theta_raw - camera.center_deg) / camera.distortion_denom;
    camera.distortion_scale * offset.atan() * (180.0 / std::f64::consts::PI) + camera.center_deg
}

pub fn estimate_aoa(obs: &MarkerObservation, camera: &CameraModel) -> Result<f64, VisionError> {
    Ok(correct_distortion(pixel_to_raw_angle(obs.centroid_x_px, camera)?, camera))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelProjection {
    InView { x_px: u32 },
    OutOfView,
}

impl PixelProjection {
    pub fn pixel(self) -> Option<u32> {
        match self {
            PixelProjection::InView { x_px } => Some(x_px),
            PixelProjection::OutOfView => None,
        }
    }
}

const BISECTION_TOL_DEG: f64 = 1e-9;

/// Raw angle in `[0, fov]` whose corrected value is `theta_true`, found by
/// bisection on the monotone correction. `None` if no such angle exists.
pub fn invert_distortion(theta_true: f64, camera: &CameraModel) -> Option<f64> {
    if !theta_true.is_finite() {
        return None;
    }
    let (lo_v, hi_v) = camera.corrected_range_deg();
    if theta_true < lo_v || theta_true > hi_v {
        return None;
    }
    let (mut lo, mut hi) = (0.0, camera.fov_deg);
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL_DEG * 1e-3 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if correct_distortion(mid, camera) < theta_true {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Synthesizes the pixel centroid a marker at camera-frame bearing
/// `theta_true` would produce. Noise of `pixel_noise_sigma` is added before
/// integer quantization when a seed is supplied.
pub fn project_bearing_to_pixel(theta_true: f64, camera: &CameraModel, noise_seed: Option<u64>) -> PixelProjection {
    let Some(raw) = invert_distortion(theta_true, camera) else {
        return PixelProjection::OutOfView;
    };
    let mut x = raw * camera.width_px as f64 / camera.fov_deg;
    if let Some(seed) = noise_seed {
        if camera.pixel_noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, camera.pixel_noise_sigma).expect("sigma validated");
            x += normal.sample(&mut rng);
        }
    }
    let x = x.round();
    if x >= 0.0 && x < camera.width_px as f64 {
        PixelProjection::InView { x_px: x as u32 }
    } else {
        PixelProjection::OutOfView
    }
}

/// Keeps only observations whose marker ID is allow-listed; order preserved.
pub fn filter_authorized(frame: &FrameObservations, allowed_ids: &BTreeSet<u32>) -> FrameObservations {
    FrameObservations {
        frame_index: frame.frame_index,
        observations: frame
            .observations
            .iter()
            .filter(|o| allowed_ids.contains(&o.marker_id))
            .copied()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(id: u32, x: f64) -> MarkerObservation {
        MarkerObservation {
            marker_id: id,
            centroid_x_px: x,
            timestamp_s: 0.0,
        }
    }

    #[test]
    fn raw_angle_examples() {
        let cam = CameraModel::default();
        assert_eq!(pixel_to_raw_angle(320.0, &cam).unwrap(), 60.0);
        assert_eq!(pixel_to_raw_angle(0.0, &cam).unwrap(), 0.0);
        assert_eq!(pixel_to_raw_angle(480.0, &cam).unwrap(), 90.0);
        assert!(pixel_to_raw_angle(640.0, &cam).is_err());
        assert!(pixel_to_raw_angle(-0.5, &cam).is_err());
        assert!(pixel_to_raw_angle(f64::NAN, &cam).is_err());
    }

    #[test]
    fn distortion_examples() {
        let cam = CameraModel::default();
        assert_eq!(correct_distortion(60.0, &cam), 60.0);
        let edge = 60.0 + 43.5 * (60.0f64 / 4000.0).atan() * (180.0 / std::f64::consts::PI);
        assert_eq!(correct_distortion(120.0, &cam), edge);
        assert!((edge - 97.38).abs() < 0.01);
        let a = correct_distortion(30.0, &cam);
        let b = correct_distortion(60.0, &cam);
        let c = correct_distortion(90.0, &cam);
        assert!(a < b && b < c);
    }

    #[test]
    fn aoa_composition() {
        let cam = CameraModel::default();
        assert_eq!(estimate_aoa(&obs(0, 320.0), &cam).unwrap(), 60.0);
        for x in [0.0, 17.0, 333.0, 639.0] {
            let manual = correct_distortion(pixel_to_raw_angle(x, &cam).unwrap(), &cam);
            assert_eq!(estimate_aoa(&obs(1, x), &cam).unwrap(), manual);
        }
        assert!(estimate_aoa(&obs(1, 700.0), &cam).is_err());
    }

    #[test]
    fn projection_examples() {
        let cam = CameraModel::default();
        assert_eq!(project_bearing_to_pixel(60.0, &cam, None), PixelProjection::InView { x_px: 320 });
        assert_eq!(project_bearing_to_pixel(97.5, &cam, None), PixelProjection::OutOfView);
        assert_eq!(project_bearing_to_pixel(20.0, &cam, None), PixelProjection::OutOfView);
        // the right edge rounds to x = W, which is not a valid pixel
        let (_, hi) = cam.corrected_range_deg();
        assert_eq!(project_bearing_to_pixel(hi, &cam, None), PixelProjection::OutOfView);
        assert_eq!(project_bearing_to_pixel(f64::NAN, &cam, None), PixelProjection::OutOfView);
    }

    #[test]
    fn noisy_projection_is_seeded() {
        let cam = CameraModel::with_distortion(640, 120.0, 43.5, 4000.0, 3.0).unwrap();
        let a = project_bearing_to_pixel(70.0, &cam, Some(11));
        let b = project_bearing_to_pixel(70.0, &cam, Some(11));
        assert_eq!(a, b);
        let spread: BTreeSet<u32> = (0..50).filter_map(|s| project_bearing_to_pixel(70.0, &cam, Some(s)).pixel()).collect();
        assert!(spread.len() > 3);
        // without a seed, the noise sigma is ignored
        let clean = CameraModel::default();
        assert_eq!(project_bearing_to_pixel(70.0, &cam, None), project_bearing_to_pixel(70.0, &clean, None));
    }

    #[test]
    fn round_trip_on_grid() {
        let cam = CameraModel::default();
        let bound = cam.pixel_pitch_deg() * cam.max_distortion_slope() + 1e-6;
        let (lo, _) = cam.corrected_range_deg();
        let hi = correct_distortion(639.0 * cam.pixel_pitch_deg(), &cam);
        for i in 0..=200 {
            let theta = lo + (hi - lo) * i as f64 / 200.0;
            let x = project_bearing_to_pixel(theta, &cam, None).pixel().expect("in view");
            let back = estimate_aoa(&obs(0, x as f64), &cam).unwrap();
            assert!((back - theta).abs() <= bound, "theta={theta} back={back}");
        }
    }

    #[test]
    fn authorization_filter() {
        let frame = FrameObservations::new(3, vec![obs(0, 10.0), obs(1, 20.0), obs(7, 30.0)]).unwrap();
        let allowed: BTreeSet<u32> = [0, 1].into();
        let kept = filter_authorized(&frame, &allowed);
        assert_eq!(kept.observations.iter().map(|o| o.marker_id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(kept.frame_index, 3);
        assert!(filter_authorized(&frame, &BTreeSet::new()).observations.is_empty());
        let tx_only = FrameObservations::new(4, vec![obs(1, 5.0)]).unwrap();
        assert_eq!(filter_authorized(&tx_only, &allowed), tx_only);
        assert_eq!(filter_authorized(&kept, &allowed), kept);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = FrameObservations::new(9, vec![obs(1, 5.0), obs(1, 6.0)]).unwrap_err();
        assert_eq!(err, VisionError::DuplicateMarker { frame_index: 9, marker_id: 1 });
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0, 120.0).is_err());
        assert!(CameraModel::new(640, 180.0).is_err());
        assert!(CameraModel::with_distortion(640, 120.0, 43.5, 0.0, 0.0).is_err());
        assert!(CameraModel::with_distortion(640, 120.0, 43.5, 4000.0, -1.0).is_err());
    }

    #[test]
    fn single_fixed_point_scan() {
        let cam = CameraModel::default();
        let mut prev = f64::NEG_INFINITY;
        let mut fixed = Vec::new();
        for i in 0..=12_000 {
            let raw = i as f64 * 0.01;
            let v = correct_distortion(raw, &cam);
            assert!(v > prev);
            prev = v;
            if (v - raw).abs() < 1e-12 {
                fixed.push(raw);
            }
        }
        assert_eq!(fixed, vec![60.0]);
    }

    proptest! {
        #[test]
        fn raw_angle_is_linear(x1 in 0.0..320.0f64, x2 in 0.0..319.0f64) {
            let cam = CameraModel::default();
            let f = |x| pixel_to_raw_angle(x, &cam).unwrap();
            prop_assert!((f(x1) + f(x2) - f(x1 + x2) - f(0.0)).abs() < 1e-12);
        }

        #[test]
        fn filter_never_invents(ids in proptest::collection::btree_set(0u32..20, 0..10), allowed in proptest::collection::btree_set(0u32..20, 0..10)) {
            let observations = ids.iter().map(|&id| obs(id, id as f64)).collect();
            let frame = FrameObservations::new(0, observations).unwrap();
            let kept = filter_authorized(&frame, &allowed);
            prop_assert!(kept.observations.iter().all(|o| allowed.contains(&o.marker_id) && frame.find(o.marker_id).is_some()));
            prop_assert_eq!(filter_authorized(&kept, &allowed), kept.clone());
        }
    }
}
