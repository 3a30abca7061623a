//! Planar scene geometry: placements, bearings, bistatic angle and the
//! specular bisector.
//!
//! Everything here is azimuth-only. World angles are measured
//! counterclockwise from `+x` and normalized to `[0, 360)`.

use thiserror::Error;

use crate::vision::CameraModel;

pub const METERS_PER_FOOT: f64 = 0.3048;

/// Points closer than this are treated as coincident.
pub const MIN_SEPARATION_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid scene: {0}")]
    InvalidScene(&'static str),
    #[error("no specular normal: transmitter and receiver are on opposite sides of the reflector (bistatic angle {beta_deg:.6} deg)")]
    NoSpecularNormal { beta_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const ORIGIN: PlanarPoint = PlanarPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Point at `range` meters from `origin` along world bearing `bearing_deg`.
    pub fn polar(origin: PlanarPoint, range: f64, bearing_deg: f64) -> Self {
        let (s, c) = bearing_deg.to_radians().sin_cos();
        Self::new(origin.x + range * c, origin.y + range * s)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_to(&self, other: PlanarPoint) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectorPose {
    pub position: PlanarPoint,
    /// World direction that the camera sees at the image center.
    pub boresight_deg: f64,
    /// World direction of the plate normal.
    pub normal_deg: f64,
}

impl ReflectorPose {
    pub fn new(position: PlanarPoint, boresight_deg: f64, normal_deg: f64) -> Self {
        Self {
            position,
            boresight_deg: normalize_deg(boresight_deg),
            normal_deg: normalize_deg(normal_deg),
        }
    }

    pub fn with_normal(mut self, normal_deg: f64) -> Self {
        self.normal_deg = normalize_deg(normal_deg);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGeometry {
    pub tx: PlanarPoint,
    pub rx: PlanarPoint,
    pub reflector: ReflectorPose,
}

impl SceneGeometry {
    pub fn new(tx: PlanarPoint, rx: PlanarPoint, reflector: ReflectorPose) -> Result<Self, GeometryError> {
        let scene = Self { tx, rx, reflector };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.tx.is_finite() && self.rx.is_finite() && self.reflector.position.is_finite()) {
            return Err(GeometryError::InvalidScene("non-finite coordinate"));
        }
        if self.tx.distance_to(self.reflector.position) <= MIN_SEPARATION_M {
            return Err(GeometryError::InvalidScene("transmitter coincides with reflector"));
        }
        if self.rx.distance_to(self.reflector.position) <= MIN_SEPARATION_M {
            return Err(GeometryError::InvalidScene("receiver coincides with reflector"));
        }
        Ok(())
    }

    pub fn with_rx(mut self, rx: PlanarPoint) -> Self {
        self.rx = rx;
        self
    }

    pub fn with_normal(mut self, normal_deg: f64) -> Self {
        self.reflector = self.reflector.with_normal(normal_deg);
        self
    }
}

/// Normalizes an angle to `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360.0
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Wraps an angle to `[-180, 180)`.
pub fn wrap_180(deg: f64) -> f64 {
    normalize_deg(deg + 180.0) - 180.0
}

/// Unsigned angular separation of two directions, in `[0, 180]`.
pub fn angular_separation(a_deg: f64, b_deg: f64) -> f64 {
    wrap_180(a_deg - b_deg).abs()
}

pub fn feet_to_meters(feet: f64) -> f64 {
    feet * METERS_PER_FOOT
}

/// Returns `(d1, d2)`: transmitter-reflector and reflector-receiver distances.
pub fn distances(scene: &SceneGeometry) -> Result<(f64, f64), GeometryError> {
    scene.validate()?;
    let p = scene.reflector.position;
    Ok((p.distance_to(scene.tx), p.distance_to(scene.rx)))
}

/// World bearing from the reflector to `target`.
pub fn bearing_world(reflector: &ReflectorPose, target: PlanarPoint) -> Result<f64, GeometryError> {
    let p = reflector.position;
    if !target.is_finite() || !p.is_finite() {
        return Err(GeometryError::InvalidScene("non-finite coordinate"));
    }
    if p.distance_to(target) <= MIN_SEPARATION_M {
        return Err(GeometryError::InvalidScene("target coincides with reflector"));
    }
    Ok(normalize_deg((target.y - p.y).atan2(target.x - p.x).to_degrees()))
}

/// Maps a world direction into the camera frame. Results outside
/// `[0, fov]` are outside the field of view; the caller decides what that means.
pub fn world_to_camera_bearing(reflector: &ReflectorPose, world_deg: f64, camera: &CameraModel) -> f64 {
    camera.center_deg + wrap_180(world_deg - reflector.boresight_deg)
}

/// Inverse of [`world_to_camera_bearing`], normalized to `[0, 360)`.
pub fn camera_to_world_bearing(reflector: &ReflectorPose, camera_deg: f64, camera: &CameraModel) -> f64 {
    normalize_deg(reflector.boresight_deg + (camera_deg - camera.center_deg))
}

fn unit_towards(from: PlanarPoint, to: PlanarPoint) -> (f64, f64) {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let n = dx.hypot(dy);
    (dx / n, dy / n)
}

fn unit_of(deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    (c, s)
}

/// Unsigned angle between two vectors in degrees, in `[0, 180]`.
fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    cross.abs().atan2(dot).to_degrees()
}

/// Angle TX-reflector-RX in `[0, 180]`.
pub fn bistatic_angle(scene: &SceneGeometry) -> Result<f64, GeometryError> {
    scene.validate()?;
    let p = scene.reflector.position;
    Ok(angle_between(unit_towards(p, scene.tx), unit_towards(p, scene.rx)))
}

/// World direction bisecting the reflector-to-TX and reflector-to-RX rays.
pub fn specular_normal(scene: &SceneGeometry) -> Result<f64, GeometryError> {
    scene.validate()?;
    let p = scene.reflector.position;
    let t = unit_towards(p, scene.tx);
    let r = unit_towards(p, scene.rx);
    let (sx, sy) = (t.0 + r.0, t.1 + r.1);
    // |t + r| = 2 cos(beta / 2); vanishes only for a straight-through layout
    if sx.hypot(sy) < 1e-12 {
        return Err(GeometryError::NoSpecularNormal {
            beta_deg: angle_between(t, r),
        });
    }
    Ok(normalize_deg(sy.atan2(sx).to_degrees()))
}

/// `(theta_i, theta_r)`: angles of the TX and RX rays off the plate normal.
pub fn incidence_angles(scene: &SceneGeometry) -> Result<(f64, f64), GeometryError> {
    scene.validate()?;
    let p = scene.reflector.position;
    let n = unit_of(scene.reflector.normal_deg);
    Ok((
        angle_between(unit_towards(p, scene.tx), n),
        angle_between(unit_towards(p, scene.rx), n),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose_at_origin(normal: f64) -> ReflectorPose {
        ReflectorPose::new(PlanarPoint::ORIGIN, normal, normal)
    }

    fn scene(tx: (f64, f64), rx: (f64, f64)) -> SceneGeometry {
        SceneGeometry::new(
            PlanarPoint::new(tx.0, tx.1),
            PlanarPoint::new(rx.0, rx.1),
            pose_at_origin(90.0),
        )
        .unwrap()
    }

    #[test]
    fn distances_on_axes() {
        let (d1, d2) = distances(&scene((0.0, 3.0), (4.0, 0.0))).unwrap();
        assert_eq!((d1, d2), (3.0, 4.0));
    }

    #[test]
    fn five_feet_transmitter() {
        let s = scene((0.0, feet_to_meters(5.0)), (4.0, 0.0));
        let (d1, _) = distances(&s).unwrap();
        assert!((d1 - 1.524).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_rejected() {
        let bad = SceneGeometry::new(PlanarPoint::ORIGIN, PlanarPoint::new(1.0, 0.0), pose_at_origin(0.0));
        assert!(matches!(bad, Err(GeometryError::InvalidScene(_))));
        let pose = pose_at_origin(0.0);
        assert!(bearing_world(&pose, PlanarPoint::ORIGIN).is_err());
    }

    #[test]
    fn world_bearings() {
        let pose = pose_at_origin(0.0);
        assert_eq!(bearing_world(&pose, PlanarPoint::new(1.0, 0.0)).unwrap(), 0.0);
        assert!((bearing_world(&pose, PlanarPoint::new(0.0, 1.0)).unwrap() - 90.0).abs() < 1e-12);
        let shifted = ReflectorPose::new(PlanarPoint::new(1.0, 1.0), 0.0, 0.0);
        assert!((bearing_world(&shifted, PlanarPoint::ORIGIN).unwrap() - 225.0).abs() < 1e-12);
    }

    #[test]
    fn camera_frame_mapping() {
        let cam = CameraModel::default();
        let pose = ReflectorPose::new(PlanarPoint::ORIGIN, 70.0, 70.0);
        assert_eq!(world_to_camera_bearing(&pose, 70.0, &cam), 60.0);
        assert_eq!(world_to_camera_bearing(&pose, 100.0, &cam), 90.0);
        let outside = world_to_camera_bearing(&pose, 0.0, &cam);
        assert_eq!(outside, -10.0);
        assert!(outside < 0.0 || outside > cam.fov_deg);
        assert_eq!(camera_to_world_bearing(&pose, 90.0, &cam), 100.0);
    }

    #[test]
    fn bistatic_examples() {
        assert!((bistatic_angle(&scene((-1.0, 1.0), (1.0, 1.0))).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(bistatic_angle(&scene((0.0, 1.0), (0.0, 3.0))).unwrap(), 0.0);
        // 45 deg off the plate surface on either side of a +y normal
        let tx = PlanarPoint::polar(PlanarPoint::ORIGIN, 1.524, 135.0);
        let rx = PlanarPoint::polar(PlanarPoint::ORIGIN, 1.8288, 45.0);
        let s = SceneGeometry::new(tx, rx, pose_at_origin(90.0)).unwrap();
        assert!((bistatic_angle(&s).unwrap() - 90.0).abs() < 1e-9);
        assert!((specular_normal(&s).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn specular_normal_examples() {
        let at = |deg: f64| PlanarPoint::polar(PlanarPoint::ORIGIN, 2.0, deg);
        let s = SceneGeometry::new(at(30.0), at(60.0), pose_at_origin(0.0)).unwrap();
        assert!((specular_normal(&s).unwrap() - 45.0).abs() < 1e-9);
        let s = SceneGeometry::new(at(350.0), at(10.0), pose_at_origin(0.0)).unwrap();
        assert!(angular_separation(specular_normal(&s).unwrap(), 0.0) < 1e-9);
        let s = SceneGeometry::new(at(0.0), at(180.0), pose_at_origin(0.0)).unwrap();
        assert!(matches!(specular_normal(&s), Err(GeometryError::NoSpecularNormal { .. })));
    }

    #[test]
    fn incidence_examples() {
        let at = |deg: f64| PlanarPoint::polar(PlanarPoint::ORIGIN, 2.0, deg);
        let base = SceneGeometry::new(at(40.0), at(120.0), pose_at_origin(0.0)).unwrap();
        let normal = specular_normal(&base).unwrap();
        let (ti, tr) = incidence_angles(&base.with_normal(normal)).unwrap();
        assert!((ti - 40.0).abs() < 1e-9 && (tr - 40.0).abs() < 1e-9);

        let (ti, tr) = incidence_angles(&base.with_normal(normal + 10.0)).unwrap();
        assert!(((tr - ti).abs() - 20.0).abs() < 1e-9);

        let (ti, tr) = incidence_angles(&base.with_normal(40.0)).unwrap();
        assert!(ti.abs() < 1e-9 && (tr - 80.0).abs() < 1e-9);
    }

    #[test]
    fn feet_conversion() {
        assert_eq!(feet_to_meters(0.0), 0.0);
        assert_eq!(feet_to_meters(5.0), 5.0 * 0.3048);
        assert!((feet_to_meters(9.5) - 2.8956).abs() < 1e-12);
    }

    #[test]
    fn normalization_edges() {
        assert_eq!(normalize_deg(-1e-18), 0.0);
        assert_eq!(normalize_deg(360.0), 0.0);
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert_eq!(wrap_180(190.0), -170.0);
        assert_eq!(angular_separation(350.0, 10.0), 20.0);
    }

    /// Independent distance routine for the oracle check.
    fn distance_oracle(a: PlanarPoint, b: PlanarPoint) -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        (dx * dx + dy * dy).sqrt()
    }

    fn point() -> impl Strategy<Value = PlanarPoint> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| PlanarPoint::new(x, y))
    }

    fn valid_scene() -> impl Strategy<Value = SceneGeometry> {
        (point(), point(), point(), 0.0..360.0f64)
            .prop_filter("separated", |(t, r, p, _)| t.distance_to(*p) > 0.1 && r.distance_to(*p) > 0.1)
            .prop_map(|(t, r, p, n)| SceneGeometry::new(t, r, ReflectorPose::new(p, n, n)).unwrap())
    }

    fn rigid(p: PlanarPoint, rot_deg: f64, dx: f64, dy: f64) -> PlanarPoint {
        let (s, c) = rot_deg.to_radians().sin_cos();
        PlanarPoint::new(c * p.x - s * p.y + dx, s * p.x + c * p.y + dy)
    }

    proptest! {
        #[test]
        fn distances_match_oracle(s in valid_scene()) {
            let (d1, d2) = distances(&s).unwrap();
            prop_assert!((d1 - distance_oracle(s.tx, s.reflector.position)).abs() < 1e-12);
            prop_assert!((d2 - distance_oracle(s.rx, s.reflector.position)).abs() < 1e-12);
            let swapped = SceneGeometry { tx: s.rx, rx: s.tx, ..s };
            prop_assert_eq!(distances(&swapped).unwrap(), (d2, d1));
        }

        #[test]
        fn bistatic_angle_rigid_invariant(s in valid_scene(), rot in 0.0..360.0f64, dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
            let beta = bistatic_angle(&s).unwrap();
            let moved = SceneGeometry {
                tx: rigid(s.tx, rot, dx, dy),
                rx: rigid(s.rx, rot, dx, dy),
                reflector: ReflectorPose::new(rigid(s.reflector.position, rot, dx, dy), 0.0, 0.0),
            };
            prop_assert!((bistatic_angle(&moved).unwrap() - beta).abs() < 1e-9);
        }

        #[test]
        fn specular_normal_equalizes_incidence(s in valid_scene()) {
            prop_assume!(bistatic_angle(&s).unwrap() < 179.0);
            let n = specular_normal(&s).unwrap();
            let (ti, tr) = incidence_angles(&s.with_normal(n)).unwrap();
            prop_assert!((ti - tr).abs() < 1e-9);
            prop_assert!((ti - bistatic_angle(&s).unwrap() / 2.0).abs() < 1e-9);
        }
    }
}
