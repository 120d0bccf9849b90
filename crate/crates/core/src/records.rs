//! JSONL record schemas shared by the dataset, prediction and pose files.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Point3Cam};
use crate::joints::{Joint, KeypointSet};

/// One joint of a record. `uv_px` is absent when the joint cannot be
/// projected (behind the camera) or was never annotated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub name: Joint,
    pub xyz_mm: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uv_px: Option<[f64; 2]>,
    #[serde(default = "default_visible")]
    pub visible: bool,
}

fn default_visible() -> bool {
    true
}

/// A line of a synthesized dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub intrinsics: CameraIntrinsics,
    pub joints: Vec<JointRecord>,
    pub pelvis_depth_mm: f64,
    /// Seed of the attempt that produced this sample; regenerates it exactly.
    pub seed: u64,
}

/// A line of a prediction or pose file: the dataset joint schema keyed by id.
/// Extra dataset fields are tolerated so a dataset can be fed back as
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub id: u64,
    pub joints: Vec<JointRecord>,
}

fn to_set(joints: &[JointRecord]) -> KeypointSet {
    joints
        .iter()
        .map(|j| (j.name, Point3Cam::from_array(j.xyz_mm), j.visible))
        .collect()
}

fn from_set(set: &KeypointSet) -> Vec<JointRecord> {
    set.iter()
        .map(|(name, s)| JointRecord { name, xyz_mm: s.position.to_array(), uv_px: None, visible: s.visible })
        .collect()
}

impl SampleRecord {
    pub fn keypoints(&self) -> KeypointSet {
        to_set(&self.joints)
    }
}

impl KeypointRecord {
    pub fn keypoints(&self) -> KeypointSet {
        to_set(&self.joints)
    }

    pub fn from_keypoints(id: u64, set: &KeypointSet) -> Self {
        Self { id, joints: from_set(set) }
    }
}

impl From<&SampleRecord> for KeypointRecord {
    fn from(s: &SampleRecord) -> Self {
        Self { id: s.id, joints: s.joints.clone() }
    }
}

/// Parses JSONL text, skipping blank lines. Errors carry the 1-based line.
pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// One compact JSON object per line, newline terminated.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}
