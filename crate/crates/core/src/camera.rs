//! Pinhole camera model and intrinsic-conditioned normalization.
//!
//! ```text
//! u = fx · x / z + cx
//! v = fy · y / z + cy
//! ```
//!
//! The camera frame has `+x` right, `+y` down and `+z` forward, so projection
//! needs no sign flips. 3D quantities are millimeters, 2D quantities pixels.
//!
//! Two normalizations make predictions independent of the capturing camera:
//! [`unify_focal`] rescales coordinates so every input shares one focal
//! length, and [`apply_crop`] shifts the principal point the way a crop of
//! the image does. Neither touches pixels; resampling is the caller's job.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("point depth must be positive, got z = {0}")]
    NonPositiveDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// A camera-frame point in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3Cam {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3Cam {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn distance(&self, other: &Point3Cam) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<Point3Cam> for nalgebra::Vector3<f64> {
    fn from(p: Point3Cam) -> Self {
        nalgebra::Vector3::new(p.x, p.y, p.z)
    }
}

impl From<nalgebra::Vector3<f64>> for Point3Cam {
    fn from(v: nalgebra::Vector3<f64>) -> Self {
        Point3Cam::new(v.x, v.y, v.z)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

/// Focal lengths and principal point in pixels, plus the image size.
///
/// The principal point may lie outside the image; crops routinely move it
/// there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = CameraError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive and finite (fx = {fx}, fy = {fy})"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(CameraError::InvalidIntrinsics("principal point must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "image size must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Whether `px` falls inside `[0, width) x [0, height)`.
    pub fn contains(&self, px: &Pixel) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < f64::from(self.width) && px.v < f64::from(self.height)
    }
}

impl Default for CameraIntrinsics {
    /// 1280x720 with the canonical unified focal length of 1000 px.
    fn default() -> Self {
        Self { fx: 1000.0, fy: 1000.0, cx: 640.0, cy: 360.0, width: 1280, height: 720 }
    }
}

pub fn project(p: &Point3Cam, k: &CameraIntrinsics) -> Result<Pixel, CameraError> {
    if !(p.z > 0.0) {
        return Err(CameraError::NonPositiveDepth(p.z));
    }
    Ok(Pixel::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

pub fn backproject(px: &Pixel, depth_mm: f64, k: &CameraIntrinsics) -> Result<Point3Cam, CameraError> {
    if !(depth_mm > 0.0) {
        return Err(CameraError::NonPositiveDepth(depth_mm));
    }
    Ok(Point3Cam::new(
        (px.u - k.cx) * depth_mm / k.fx,
        (px.v - k.cy) * depth_mm / k.fy,
        depth_mm,
    ))
}

/// Rescales the camera so that `fx` becomes `target_focal`.
///
/// The scale is anchored on `fx`; `fy` is multiplied by the same factor, so
/// anisotropic pixels stay anisotropic. Image dimensions are rounded to the
/// nearest pixel (never below 1). Returns the new intrinsics and the scale
/// that maps original pixel coordinates onto the new image.
pub fn unify_focal(k: &CameraIntrinsics, target_focal: f64) -> Result<(CameraIntrinsics, f64), CameraError> {
    if !(target_focal.is_finite() && target_focal > 0.0) {
        return Err(CameraError::InvalidIntrinsics(format!("target focal must be positive, got {target_focal}")));
    }
    let scale = target_focal / k.fx;
    let dim = |d: u32| ((f64::from(d) * scale).round().max(1.0)).min(f64::from(u32::MAX)) as u32;
    let out = CameraIntrinsics::new(
        target_focal,
        k.fy * scale,
        k.cx * scale,
        k.cy * scale,
        dim(k.width),
        dim(k.height),
    )?;
    Ok((out, scale))
}

/// Intrinsics of the `crop_w x crop_h` window whose top-left corner sits at
/// `crop_origin` in the original image. The window may extend past the image.
pub fn apply_crop(
    k: &CameraIntrinsics,
    crop_origin: Pixel,
    crop_w: u32,
    crop_h: u32,
) -> Result<CameraIntrinsics, CameraError> {
    CameraIntrinsics::new(k.fx, k.fy, k.cx - crop_origin.u, k.cy - crop_origin.v, crop_w, crop_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k0() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn project_examples() {
        assert_eq!(project(&Point3Cam::new(0.0, 0.0, 2000.0), &k0()).unwrap(), Pixel::new(640.0, 360.0));
        assert_eq!(project(&Point3Cam::new(1000.0, 0.0, 2000.0), &k0()).unwrap().u, 1140.0);
        assert_eq!(
            project(&Point3Cam::new(0.0, 0.0, -1.0), &k0()),
            Err(CameraError::NonPositiveDepth(-1.0))
        );
        assert!(project(&Point3Cam::new(0.0, 0.0, 0.0), &k0()).is_err());
    }

    #[test]
    fn backproject_examples() {
        assert_eq!(backproject(&Pixel::new(640.0, 360.0), 2000.0, &k0()).unwrap(), Point3Cam::new(0.0, 0.0, 2000.0));
        assert_eq!(
            backproject(&Pixel::new(1140.0, 360.0), 2000.0, &k0()).unwrap(),
            Point3Cam::new(1000.0, 0.0, 2000.0)
        );
        assert!(matches!(
            backproject(&Pixel::new(640.0, 360.0), 0.0, &k0()),
            Err(CameraError::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn unify_focal_examples() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let (ku, s) = unify_focal(&k, 1000.0).unwrap();
        assert_eq!(s, 2.0);
        let p = backproject(&Pixel::new(100.0, 80.0), 1500.0, &k).unwrap();
        let q = project(&p, &ku).unwrap();
        assert!((q.u - 200.0).abs() < 1e-9 && (q.v - 160.0).abs() < 1e-9);
        assert_eq!((ku.width, ku.height), (1280, 960));

        let (same, s1) = unify_focal(&k0(), 1000.0).unwrap();
        assert_eq!(s1, 1.0);
        assert_eq!(same, k0());

        let big = CameraIntrinsics::new(1500.0, 1500.0, 960.0, 540.0, 1920, 1080).unwrap();
        let (kb, sb) = unify_focal(&big, 1000.0).unwrap();
        assert!((sb - 2.0 / 3.0).abs() < 1e-15);
        assert!((kb.cx - 640.0).abs() < 1e-9 && (kb.cy - 360.0).abs() < 1e-9);
        assert_eq!((kb.width, kb.height), (1280, 720));
    }

    #[test]
    fn unify_focal_keeps_anisotropy() {
        let k = CameraIntrinsics::new(800.0, 840.0, 400.0, 300.0, 800, 600).unwrap();
        let (ku, s) = unify_focal(&k, 1000.0).unwrap();
        assert_eq!(s, 1.25);
        assert_eq!(ku.fx, 1000.0);
        assert_eq!(ku.fy, 1050.0);
    }

    #[test]
    fn crop_examples() {
        assert_eq!(apply_crop(&k0(), Pixel::new(0.0, 0.0), 1280, 720).unwrap(), k0());
        assert_eq!(apply_crop(&k0(), Pixel::new(100.0, 0.0), 1000, 720).unwrap().cx, 540.0);
        let c = apply_crop(&k0(), Pixel::new(700.0, 400.0), 580, 320).unwrap();
        assert_eq!((c.cx, c.cy), (-60.0, -40.0));
        assert!(apply_crop(&k0(), Pixel::new(0.0, 0.0), 0, 10).is_err());
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, -1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, f64::NAN, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        let bad = r#"{"fx":1000,"fy":1000,"cx":640,"cy":360,"width":1280,"height":720,"k1":0}"#;
        assert!(serde_json::from_str::<CameraIntrinsics>(bad).is_err());
        let neg = r#"{"fx":-1,"fy":1000,"cx":640,"cy":360,"width":1280,"height":720}"#;
        assert!(serde_json::from_str::<CameraIntrinsics>(neg).is_err());
        let ok = r#"{"fx":1000,"fy":1000,"cx":640,"cy":360,"width":1280,"height":720}"#;
        assert_eq!(serde_json::from_str::<CameraIntrinsics>(ok).unwrap(), k0());
    }

    fn intrinsics() -> impl Strategy<Value = CameraIntrinsics> {
        (100.0..3000.0f64, 100.0..3000.0f64, -500.0..2500.0f64, -500.0..2000.0f64, 1u32..4000, 1u32..4000)
            .prop_map(|(fx, fy, cx, cy, w, h)| CameraIntrinsics::new(fx, fy, cx, cy, w, h).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip(x in -3000.0..3000.0f64, y in -3000.0..3000.0f64, z in 1.0..10000.0f64, k in intrinsics()) {
            let p = Point3Cam::new(x, y, z);
            let back = backproject(&project(&p, &k).unwrap(), p.z, &k).unwrap();
            prop_assert!(back.distance(&p) < 1e-6);
        }

        #[test]
        fn crop_composes(k in intrinsics(), a in (-500.0..500.0f64, -500.0..500.0f64), b in (-500.0..500.0f64, -500.0..500.0f64)) {
            let ab = apply_crop(&apply_crop(&k, Pixel::new(a.0, a.1), 100, 100).unwrap(), Pixel::new(b.0, b.1), 50, 50).unwrap();
            let direct = apply_crop(&k, Pixel::new(a.0 + b.0, a.1 + b.1), 50, 50).unwrap();
            prop_assert!((ab.cx - direct.cx).abs() < 1e-9 && (ab.cy - direct.cy).abs() < 1e-9);
        }
    }
}
