//! The 17-joint COCO vocabulary and camera-frame keypoint sets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::camera::Point3Cam;

/// A body joint from the COCO-17 vocabulary.
///
/// The declaration order is the canonical COCO order and is used for
/// iteration, sorting and array indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const COUNT: usize = 17;

    pub const ALL: [Joint; Joint::COUNT] = [
        Joint::Nose,
        Joint::LeftEye,
        Joint::RightEye,
        Joint::LeftEar,
        Joint::RightEar,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::LeftEye => "left_eye",
            Joint::RightEye => "right_eye",
            Joint::LeftEar => "left_ear",
            Joint::RightEar => "right_ear",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightWrist => "right_wrist",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightAnkle => "right_ankle",
        }
    }

    /// Position in [`Joint::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown joint name {0:?}")]
pub struct UnknownJoint(pub String);

impl FromStr for Joint {
    type Err = UnknownJoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| UnknownJoint(s.to_owned()))
    }
}

/// Position and visibility of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub position: Point3Cam,
    pub visible: bool,
}

/// Named 3D joints in the camera frame (mm) with per-joint visibility.
///
/// A set may hold any subset of the vocabulary; iteration is in canonical
/// joint order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeypointSet {
    joints: BTreeMap<Joint, JointState>,
}

impl KeypointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, joint: Joint, position: Point3Cam, visible: bool) {
        self.joints.insert(joint, JointState { position, visible });
    }

    pub fn with(mut self, joint: Joint, position: Point3Cam, visible: bool) -> Self {
        self.insert(joint, position, visible);
        self
    }

    pub fn get(&self, joint: Joint) -> Option<&JointState> {
        self.joints.get(&joint)
    }

    pub fn get_mut(&mut self, joint: Joint) -> Option<&mut JointState> {
        self.joints.get_mut(&joint)
    }

    pub fn contains(&self, joint: Joint) -> bool {
        self.joints.contains_key(&joint)
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &JointState)> + '_ {
        self.joints.iter().map(|(j, s)| (*j, s))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (Joint, &mut JointState)> + '_ {
        self.joints.iter_mut().map(|(j, s)| (*j, s))
    }

    pub fn visible_count(&self) -> usize {
        self.joints.values().filter(|s| s.visible).count()
    }

    /// Adds `offset` to every joint position.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let mut out = self.clone();
        for (_, s) in out.iter_mut() {
            s.position = Point3Cam::new(
                s.position.x + offset[0],
                s.position.y + offset[1],
                s.position.z + offset[2],
            );
        }
        out
    }
}

impl FromIterator<(Joint, Point3Cam, bool)> for KeypointSet {
    fn from_iter<I: IntoIterator<Item = (Joint, Point3Cam, bool)>>(iter: I) -> Self {
        let mut set = KeypointSet::new();
        for (j, p, v) in iter {
            set.insert(j, p, v);
        }
        set
    }
}
