//! Geometry, tokenization, reward, policy-optimization, synthesis, evaluation
//! and alignment machinery for close-range 3D human keypoint localization.
//!
//! Conventions used throughout the crate:
//!
//! - 3D points live in the camera frame, in millimeters, with `+z` forward
//!   along the optical axis, `+x` right and `+y` **down** (image aligned).
//! - 2D points are pixels.
//! - Joint names come from the fixed 17-name COCO vocabulary in [`joints`].

pub mod align;
pub mod camera;
pub mod codec;
mod error;
pub mod eval;
pub mod grpo;
pub mod joints;
pub mod numeric;
pub mod records;
pub mod reward;
pub mod synth;

pub use align::{align_with_anchors, apply_transform, kabsch, AlignError, AnchorCorrespondence, RigidTransform};
pub use camera::{backproject, project, CameraError, CameraIntrinsics, Pixel, Point3Cam};
pub use codec::{
    decode_voxel, encode_voxel, parse_sequence, serialize_sequence, CodecError, InteractionVolume,
    PredictionRecord, PredictionSequence, VoxelToken,
};
pub use error::Error;
pub use eval::{gmpjpe, resolve_task, run_benchmark, EvalError, EvalReport, PartConfig, TaskRegistry, TaskSpec};
pub use grpo::{GrpoConfig, GrpoError, RolloutGroup, ToyPolicy};
pub use joints::{Joint, KeypointSet};
pub use reward::{aggregate_error, huber, pose_reward, JointErrors, RewardConfig, RewardError};
pub use synth::{SceneSample, SynthConfig, SynthError};
