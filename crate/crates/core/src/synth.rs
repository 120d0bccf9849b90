//! Close-range scene synthesis: stick-figure skeletons seen by a virtual
//! camera at 0.5-3 m, with annotation noise and a reprojection-error filter.
//!
//! Each attempt draws a subject (bone lengths and joint angles), places its
//! pelvis in the camera frame, projects all joints, and then passes two
//! gates: enough joints inside the frustum, and every noisy 2D annotation
//! within `filter_threshold_px` of the exact projection. Joints outside the
//! image are expected at this range and are kept as invisible.

use std::collections::BTreeMap;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project, CameraIntrinsics, Pixel, Point3Cam};
use crate::joints::{Joint, KeypointSet};
use crate::numeric::{derive_seed, stream_rng};
use crate::records::{JointRecord, SampleRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("degenerate config: {0}")]
    DegenerateConfig(String),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("sample has no visible joints")]
    NoVisibleJoints,
}

/// The 16 bones of the stick figure as (parent, child) pairs.
pub const BONES: [(Joint, Joint); 16] = [
    (Joint::LeftHip, Joint::RightHip),
    (Joint::LeftHip, Joint::LeftKnee),
    (Joint::LeftKnee, Joint::LeftAnkle),
    (Joint::RightHip, Joint::RightKnee),
    (Joint::RightKnee, Joint::RightAnkle),
    (Joint::LeftHip, Joint::LeftShoulder),
    (Joint::RightHip, Joint::RightShoulder),
    (Joint::LeftShoulder, Joint::LeftElbow),
    (Joint::LeftElbow, Joint::LeftWrist),
    (Joint::RightShoulder, Joint::RightElbow),
    (Joint::RightElbow, Joint::RightWrist),
    (Joint::LeftShoulder, Joint::Nose),
    (Joint::Nose, Joint::LeftEye),
    (Joint::Nose, Joint::RightEye),
    (Joint::LeftEye, Joint::LeftEar),
    (Joint::RightEye, Joint::RightEar),
];

/// `[min, max]` ranges in millimeters for per-subject body dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyRanges {
    pub hip_width: [f64; 2],
    pub shoulder_width: [f64; 2],
    pub torso: [f64; 2],
    pub upper_arm: [f64; 2],
    pub forearm: [f64; 2],
    pub thigh: [f64; 2],
    pub shin: [f64; 2],
}

impl Default for BodyRanges {
    fn default() -> Self {
        Self {
            hip_width: [240.0, 320.0],
            shoulder_width: [340.0, 420.0],
            torso: [450.0, 550.0],
            upper_arm: [270.0, 340.0],
            forearm: [230.0, 290.0],
            thigh: [400.0, 480.0],
            shin: [370.0, 450.0],
        }
    }
}

/// Joint-angle limits in degrees. Shoulders and hips swing in `[-max, max]`,
/// elbows and knees flex in `[0, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngleLimits {
    pub shoulder: f64,
    pub elbow: f64,
    pub hip: f64,
    pub knee: f64,
}

impl Default for AngleLimits {
    fn default() -> Self {
        Self { shoulder: 80.0, elbow: 120.0, hip: 40.0, knee: 90.0 }
    }
}

impl AngleLimits {
    pub fn zero() -> Self {
        Self { shoulder: 0.0, elbow: 0.0, hip: 0.0, knee: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub intrinsics: CameraIntrinsics,
    /// Pelvis depth range in millimeters.
    pub distance_range_mm: [f64; 2],
    /// Horizontal angle of the pelvis off the optical axis.
    pub yaw_range_deg: [f64; 2],
    /// Vertical angle of the pelvis off the optical axis (camera height).
    pub pitch_range_deg: [f64; 2],
    /// Rotation of the body about the vertical axis; 0 faces the camera.
    pub facing_range_deg: [f64; 2],
    pub body: BodyRanges,
    pub angles: AngleLimits,
    /// Std of the Gaussian added to each visible 2D coordinate.
    pub noise_px: f64,
    pub filter_threshold_px: f64,
    /// Minimum fraction of the 17 joints inside the frustum.
    pub min_visible_fraction: f64,
    /// Redraws allowed in `sample_scene` to get at least one visible joint.
    pub max_retries: u32,
    /// Attempts allowed per accepted dataset sample.
    pub max_attempts_per_sample: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            distance_range_mm: [500.0, 3000.0],
            yaw_range_deg: [-15.0, 15.0],
            pitch_range_deg: [-10.0, 10.0],
            facing_range_deg: [-60.0, 60.0],
            body: BodyRanges::default(),
            angles: AngleLimits::default(),
            noise_px: 3.0,
            filter_threshold_px: 15.0,
            min_visible_fraction: 0.4,
            max_retries: 100,
            max_attempts_per_sample: 1000,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], lo: f64, hi: f64) -> Result<(), SynthError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= lo && r[1] <= hi) {
        return Err(SynthError::InvalidConfig(format!("{name} = {r:?} must be an ordered range within [{lo}, {hi}]")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_range("distance_range_mm", self.distance_range_mm, f64::MIN_POSITIVE, f64::MAX)?;
        check_range("yaw_range_deg", self.yaw_range_deg, -89.0, 89.0)?;
        check_range("pitch_range_deg", self.pitch_range_deg, -89.0, 89.0)?;
        check_range("facing_range_deg", self.facing_range_deg, -180.0, 180.0)?;
        let b = &self.body;
        for (name, r) in [
            ("hip_width", b.hip_width),
            ("shoulder_width", b.shoulder_width),
            ("torso", b.torso),
            ("upper_arm", b.upper_arm),
            ("forearm", b.forearm),
            ("thigh", b.thigh),
            ("shin", b.shin),
        ] {
            check_range(name, r, f64::MIN_POSITIVE, f64::MAX)?;
        }
        let a = &self.angles;
        for (name, v) in [("shoulder", a.shoulder), ("elbow", a.elbow), ("hip", a.hip), ("knee", a.knee)] {
            if !(0.0..=180.0).contains(&v) {
                return Err(SynthError::InvalidConfig(format!("angle limit {name} = {v} must lie in [0, 180]")));
            }
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(SynthError::InvalidConfig(format!("noise_px must be nonnegative, got {}", self.noise_px)));
        }
        if !(self.filter_threshold_px > 0.0) {
            return Err(SynthError::InvalidConfig("filter_threshold_px must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_visible_fraction) {
            return Err(SynthError::InvalidConfig("min_visible_fraction must lie in [0, 1]".into()));
        }
        if self.max_retries == 0 || self.max_attempts_per_sample == 0 {
            return Err(SynthError::InvalidConfig("retry budgets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-subject body dimensions in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyDims {
    pub hip_width: f64,
    pub shoulder_width: f64,
    pub torso: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub thigh: f64,
    pub shin: f64,
}

/// Articulation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Articulation {
    /// (abduction, swing) per shoulder, left then right.
    pub shoulders: [[f64; 2]; 2],
    pub elbows: [f64; 2],
    pub hips: [f64; 2],
    pub knees: [f64; 2],
}

/// Joint positions in the body frame: pelvis (hip midpoint) at the origin,
/// `+y` down, `+x` toward the subject's left, `+z` toward the subject's back.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPose {
    pub joints: [Point3Cam; Joint::COUNT],
    pub dims: BodyDims,
}

const NECK: f64 = 200.0;
const NOSE_FORWARD: f64 = 90.0;

fn v(p: Point3Cam) -> Vector3<f64> {
    p.into()
}

impl SkeletonPose {
    /// Rest pose: arms straight out to the sides, legs straight down.
    pub fn t_pose(d: &BodyDims) -> Self {
        let mut j = [Point3Cam::default(); Joint::COUNT];
        let set = |j: &mut [Point3Cam; Joint::COUNT], joint: Joint, x: f64, y: f64, z: f64| {
            j[joint.index()] = Point3Cam::new(x, y, z);
        };
        let (hw, sw) = (d.hip_width / 2.0, d.shoulder_width / 2.0);
        set(&mut j, Joint::LeftHip, hw, 0.0, 0.0);
        set(&mut j, Joint::RightHip, -hw, 0.0, 0.0);
        set(&mut j, Joint::LeftKnee, hw, d.thigh, 0.0);
        set(&mut j, Joint::RightKnee, -hw, d.thigh, 0.0);
        set(&mut j, Joint::LeftAnkle, hw, d.thigh + d.shin, 0.0);
        set(&mut j, Joint::RightAnkle, -hw, d.thigh + d.shin, 0.0);
        set(&mut j, Joint::LeftShoulder, sw, -d.torso, 0.0);
        set(&mut j, Joint::RightShoulder, -sw, -d.torso, 0.0);
        set(&mut j, Joint::LeftElbow, sw + d.upper_arm, -d.torso, 0.0);
        set(&mut j, Joint::RightElbow, -sw - d.upper_arm, -d.torso, 0.0);
        set(&mut j, Joint::LeftWrist, sw + d.upper_arm + d.forearm, -d.torso, 0.0);
        set(&mut j, Joint::RightWrist, -sw - d.upper_arm - d.forearm, -d.torso, 0.0);
        let head = -d.torso - NECK;
        set(&mut j, Joint::Nose, 0.0, head, -NOSE_FORWARD);
        set(&mut j, Joint::LeftEye, 32.0, head - 35.0, -75.0);
        set(&mut j, Joint::RightEye, -32.0, head - 35.0, -75.0);
        set(&mut j, Joint::LeftEar, 75.0, head - 25.0, 0.0);
        set(&mut j, Joint::RightEar, -75.0, head - 25.0, 0.0);
        Self { joints: j, dims: *d }
    }

    /// Rotates each limb about its proximal joint. Rotations never change
    /// distances between connected joints.
    pub fn articulated(d: &BodyDims, a: &Articulation) -> Self {
        let mut pose = Self::t_pose(d);
        let limbs = [
            (Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist, 0usize, true),
            (Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist, 1, true),
            (Joint::LeftHip, Joint::LeftKnee, Joint::LeftAnkle, 0, false),
            (Joint::RightHip, Joint::RightKnee, Joint::RightAnkle, 1, false),
        ];
        for (root, mid, end, side, is_arm) in limbs {
            let r = v(pose.joints[root.index()]);
            let m = v(pose.joints[mid.index()]);
            let e = v(pose.joints[end.index()]);
            let (proximal, distal) = if is_arm {
                // Mirror the abduction sign so positive raises both arms.
                let sign = if side == 0 { -1.0 } else { 1.0 };
                let [abduct, swing] = a.shoulders[side];
                (
                    Rotation3::from_axis_angle(&Vector3::y_axis(), sign * swing)
                        * Rotation3::from_axis_angle(&Vector3::z_axis(), sign * abduct),
                    // Elbows bend the forearm toward the front (-z).
                    Rotation3::from_axis_angle(&Vector3::y_axis(), -sign * a.elbows[side]),
                )
            } else {
                (
                    Rotation3::from_axis_angle(&Vector3::x_axis(), a.hips[side]),
                    // Knees bend the shin toward the back (+z).
                    Rotation3::from_axis_angle(&Vector3::x_axis(), -a.knees[side]),
                )
            };
            let m2 = r + proximal * (m - r);
            let e2 = m2 + proximal * distal * (e - m);
            pose.joints[mid.index()] = m2.into();
            pose.joints[end.index()] = e2.into();
        }
        pose
    }

    pub fn bone_length(&self, bone: (Joint, Joint)) -> f64 {
        self.joints[bone.0.index()].distance(&self.joints[bone.1.index()])
    }
}

/// A 2D annotation; `pixel` is `None` when the joint is behind the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint2d {
    pub joint: Joint,
    pub pixel: Option<Pixel>,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub skeleton: SkeletonPose,
    pub intrinsics: CameraIntrinsics,
    /// Camera-frame joints, visibility = inside the image frustum.
    pub keypoints_3d: KeypointSet,
    /// Indexed by [`Joint::index`].
    pub keypoints_2d: Vec<Keypoint2d>,
    pub camera_distance_mm: f64,
}

impl SceneSample {
    pub fn visible_count(&self) -> usize {
        self.keypoints_2d.iter().filter(|k| k.visible).count()
    }

    pub fn to_record(&self, id: u64, seed: u64) -> SampleRecord {
        let joints = self
            .keypoints_2d
            .iter()
            .map(|k| {
                let s = self.keypoints_3d.get(k.joint).expect("all joints present");
                JointRecord {
                    name: k.joint,
                    xyz_mm: s.position.to_array(),
                    uv_px: k.pixel.map(|p| [p.u, p.v]),
                    visible: k.visible,
                }
            })
            .collect();
        SampleRecord { id, intrinsics: self.intrinsics, joints, pelvis_depth_mm: self.camera_distance_mm, seed }
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn sample_dims(rng: &mut ChaCha8Rng, b: &BodyRanges) -> BodyDims {
    BodyDims {
        hip_width: uniform(rng, b.hip_width),
        shoulder_width: uniform(rng, b.shoulder_width),
        torso: uniform(rng, b.torso),
        upper_arm: uniform(rng, b.upper_arm),
        forearm: uniform(rng, b.forearm),
        thigh: uniform(rng, b.thigh),
        shin: uniform(rng, b.shin),
    }
}

fn sample_articulation(rng: &mut ChaCha8Rng, l: &AngleLimits) -> Articulation {
    let sym = |rng: &mut ChaCha8Rng, lim: f64| uniform(rng, [-lim, lim]).to_radians();
    let flex = |rng: &mut ChaCha8Rng, lim: f64| uniform(rng, [0.0, lim]).to_radians();
    Articulation {
        shoulders: [
            [sym(rng, l.shoulder), sym(rng, l.shoulder)],
            [sym(rng, l.shoulder), sym(rng, l.shoulder)],
        ],
        elbows: [flex(rng, l.elbow), flex(rng, l.elbow)],
        hips: [sym(rng, l.hip), sym(rng, l.hip)],
        knees: [flex(rng, l.knee), flex(rng, l.knee)],
    }
}

/// Places `skeleton` in the camera frame and projects it.
pub fn place(skeleton: SkeletonPose, k: &CameraIntrinsics, pelvis: Point3Cam, facing_rad: f64) -> SceneSample {
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), facing_rad);
    let mut keypoints_3d = KeypointSet::new();
    let mut keypoints_2d = Vec::with_capacity(Joint::COUNT);
    for joint in Joint::ALL {
        let p: Point3Cam = (v(pelvis) + rot * v(skeleton.joints[joint.index()])).into();
        let pixel = project(&p, k).ok();
        let visible = pixel.is_some_and(|px| k.contains(&px));
        keypoints_3d.insert(joint, p, visible);
        keypoints_2d.push(Keypoint2d { joint, pixel, visible });
    }
    SceneSample { skeleton, intrinsics: *k, keypoints_3d, keypoints_2d, camera_distance_mm: pelvis.z }
}

/// Draws one scene with at least one visible joint.
pub fn sample_scene(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Result<SceneSample, SynthError> {
    cfg.validate()?;
    for _ in 0..cfg.max_retries {
        let dims = sample_dims(rng, &cfg.body);
        let art = sample_articulation(rng, &cfg.angles);
        let skeleton = SkeletonPose::articulated(&dims, &art);
        let depth = uniform(rng, cfg.distance_range_mm);
        let yaw = uniform(rng, cfg.yaw_range_deg).to_radians();
        let pitch = uniform(rng, cfg.pitch_range_deg).to_radians();
        let facing = uniform(rng, cfg.facing_range_deg).to_radians();
        let pelvis = Point3Cam::new(depth * yaw.tan(), depth * pitch.tan(), depth);
        let scene = place(skeleton, &cfg.intrinsics, pelvis, facing);
        if scene.visible_count() > 0 {
            return Ok(scene);
        }
    }
    Err(SynthError::DegenerateConfig(format!(
        "no joint visible after {} draws; check the camera orientation limits",
        cfg.max_retries
    )))
}

/// Adds isotropic Gaussian noise to the visible 2D keypoints.
pub fn perturb_annotations(sample: &SceneSample, noise_px: f64, rng: &mut ChaCha8Rng) -> Result<SceneSample, SynthError> {
    if !(noise_px >= 0.0 && noise_px.is_finite()) {
        return Err(SynthError::InvalidConfig(format!("noise_px must be nonnegative, got {noise_px}")));
    }
    let mut out = sample.clone();
    if noise_px == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, noise_px).expect("validated std");
    for k in out.keypoints_2d.iter_mut().filter(|k| k.visible) {
        if let Some(px) = k.pixel.as_mut() {
            px.u += normal.sample(rng);
            px.v += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Largest distance between an annotated visible keypoint and the exact
/// projection of its 3D joint; passes when strictly below `threshold_px`.
pub fn reprojection_filter(sample: &SceneSample, threshold_px: f64) -> Result<(bool, f64), SynthError> {
    let mut max_err: Option<f64> = None;
    for k in sample.keypoints_2d.iter().filter(|k| k.visible) {
        let (Some(px), Some(state)) = (k.pixel, sample.keypoints_3d.get(k.joint)) else {
            continue;
        };
        let Ok(exact) = project(&state.position, &sample.intrinsics) else {
            continue;
        };
        let e = px.distance(&exact);
        max_err = Some(max_err.map_or(e, |m: f64| m.max(e)));
    }
    let max_err = max_err.ok_or(SynthError::NoVisibleJoints)?;
    Ok((max_err < threshold_px, max_err))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttemptOutcome {
    Accepted(SceneSample),
    RejectedByVisibility { visible: usize },
    RejectedByFilter { visible: usize, max_error_px: f64 },
}

/// One pass of the pipeline from a single seed: scene, visibility gate,
/// annotation noise, reprojection filter.
pub fn run_attempt(cfg: &SynthConfig, seed: u64) -> Result<AttemptOutcome, SynthError> {
    let mut rng = stream_rng(seed, &[]);
    let scene = sample_scene(&mut rng, cfg)?;
    let visible = scene.visible_count();
    if (visible as f64) < cfg.min_visible_fraction * Joint::COUNT as f64 {
        return Ok(AttemptOutcome::RejectedByVisibility { visible });
    }
    let noisy = perturb_annotations(&scene, cfg.noise_px, &mut rng)?;
    let (pass, max_error_px) = reprojection_filter(&noisy, cfg.filter_threshold_px)?;
    if pass {
        Ok(AttemptOutcome::Accepted(noisy))
    } else {
        Ok(AttemptOutcome::RejectedByFilter { visible, max_error_px })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub attempted: u64,
    pub accepted: u64,
    pub rejected_by_visibility: u64,
    pub rejected_by_filter: u64,
    /// Visible-joint counts of the attempts that reached the filter.
    pub filter_candidates_by_visible: BTreeMap<usize, u64>,
}

impl DatasetStats {
    pub fn merge(&mut self, other: &DatasetStats) {
        self.attempted += other.attempted;
        self.accepted += other.accepted;
        self.rejected_by_visibility += other.rejected_by_visibility;
        self.rejected_by_filter += other.rejected_by_filter;
        for (k, n) in &other.filter_candidates_by_visible {
            *self.filter_candidates_by_visible.entry(*k).or_default() += n;
        }
    }

    pub fn filter_candidates(&self) -> u64 {
        self.accepted + self.rejected_by_filter
    }

    fn record(&mut self, outcome: &AttemptOutcome) {
        self.attempted += 1;
        match outcome {
            AttemptOutcome::Accepted(s) => {
                self.accepted += 1;
                *self.filter_candidates_by_visible.entry(s.visible_count()).or_default() += 1;
            }
            AttemptOutcome::RejectedByVisibility { .. } => self.rejected_by_visibility += 1,
            AttemptOutcome::RejectedByFilter { visible, .. } => {
                self.rejected_by_filter += 1;
                *self.filter_candidates_by_visible.entry(*visible).or_default() += 1;
            }
        }
    }
}

/// Seed of attempt `attempt` for dataset sample `index`.
pub fn attempt_seed(master: u64, index: u64, attempt: u64) -> u64 {
    derive_seed(master, &[index, attempt])
}

fn generate_one(cfg: &SynthConfig, master: u64, index: u64) -> Result<(SampleRecord, DatasetStats), SynthError> {
    let mut stats = DatasetStats::default();
    for attempt in 0..u64::from(cfg.max_attempts_per_sample) {
        let seed = attempt_seed(master, index, attempt);
        let outcome = run_attempt(cfg, seed)?;
        stats.record(&outcome);
        if let AttemptOutcome::Accepted(sample) = outcome {
            return Ok((sample.to_record(index, seed), stats));
        }
    }
    Err(SynthError::DegenerateConfig(format!(
        "sample {index}: no attempt accepted within {} tries",
        cfg.max_attempts_per_sample
    )))
}

/// Generates exactly `n` accepted samples, in index order.
///
/// Samples are produced in parallel; each one only depends on
/// `(seed, index)`, so the output is identical for any thread count.
pub fn generate_dataset(n: usize, cfg: &SynthConfig, seed: u64) -> Result<(Vec<SampleRecord>, DatasetStats), SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidConfig("n must be at least 1".into()));
    }
    cfg.validate()?;
    let results: Vec<_> = (0..n as u64).into_par_iter().map(|i| generate_one(cfg, seed, i)).collect();
    let mut records = Vec::with_capacity(n);
    let mut stats = DatasetStats::default();
    for r in results {
        let (rec, s) = r?;
        stats.merge(&s);
        records.push(rec);
    }
    Ok((records, stats))
}

/// Runs `attempts` independent pipeline attempts without requiring any to
/// be accepted; used to measure the gate rejection rates.
pub fn screen_attempts(cfg: &SynthConfig, seed: u64, attempts: u64) -> Result<DatasetStats, SynthError> {
    cfg.validate()?;
    let outcomes: Vec<_> = (0..attempts)
        .into_par_iter()
        .map(|i| run_attempt(cfg, attempt_seed(seed, i, 0)))
        .collect();
    let mut stats = DatasetStats::default();
    for o in outcomes {
        stats.record(&o?);
    }
    Ok(stats)
}

/// Rebuilds the sample stored under `seed` (the attempt seed of a record).
pub fn regenerate(cfg: &SynthConfig, seed: u64) -> Result<Option<SceneSample>, SynthError> {
    match run_attempt(cfg, seed)? {
        AttemptOutcome::Accepted(s) => Ok(Some(s)),
        _ => Ok(None),
    }
}
