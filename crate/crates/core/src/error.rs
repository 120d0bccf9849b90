use thiserror::Error;

use crate::align::AlignError;
use crate::camera::CameraError;
use crate::codec::CodecError;
use crate::eval::EvalError;
use crate::grpo::GrpoError;
use crate::reward::RewardError;
use crate::synth::SynthError;

/// Any error raised by the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

fn variant_name<E: std::fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_owned()
}

impl Error {
    /// Name of the innermost error variant, e.g. `MissingJoint`.
    pub fn name(&self) -> String {
        match self {
            Error::Camera(e) => variant_name(e),
            Error::Codec(e) => variant_name(e),
            Error::Reward(e) => variant_name(e),
            Error::Grpo(GrpoError::Reward(e)) => variant_name(e),
            Error::Grpo(GrpoError::Codec(e)) => variant_name(e),
            Error::Grpo(e) => variant_name(e),
            Error::Synth(e) => variant_name(e),
            Error::Eval(e) => variant_name(e),
            Error::Align(e) => variant_name(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joints::Joint;

    #[test]
    fn names_are_variant_names() {
        assert_eq!(Error::from(EvalError::MissingJoint(Joint::Nose)).name(), "MissingJoint");
        assert_eq!(Error::from(EvalError::IdMismatch("x".into())).name(), "IdMismatch");
        assert_eq!(Error::from(AlignError::TooFewAnchors { got: 0, need: 1 }).name(), "TooFewAnchors");
        assert_eq!(Error::from(GrpoError::Reward(RewardError::NoVisibleJoints)).name(), "NoVisibleJoints");
    }
}
