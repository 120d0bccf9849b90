//! Pose-aware reward: a Huber-aggregated joint error mapped through an
//! exponential, blended with the fraction of joints inside a success radius.
//!
//! ```text
//! E = mean_{j in V} huber_delta(d_j)
//! r = lambda * exp(-E / tau) + (1 - lambda) * mean_{j in V} [d_j < kappa]
//! ```
//!
//! The same code serves 3D (mm) and 2D (px) errors; only the units of the
//! configuration change. Note that `E` is quadratic in distance below the
//! Huber knee, so `tau` carries squared-ish units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::exact_sum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("no visible joints to score")]
    NoVisibleJoints,
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
    #[error("invalid joint errors: {0}")]
    InvalidErrors(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRewardConfig {
    delta: f64,
    kappa: f64,
    tau: f64,
    lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRewardConfig")]
pub struct RewardConfig {
    /// Huber knee.
    pub delta: f64,
    /// PCK success radius (strict `<`).
    pub kappa: f64,
    /// Temperature of the exponential term, in the units of `E`.
    pub tau: f64,
    /// Weight of the exponential term.
    pub lambda: f64,
}

impl TryFrom<RawRewardConfig> for RewardConfig {
    type Error = RewardError;

    fn try_from(r: RawRewardConfig) -> Result<Self, Self::Error> {
        RewardConfig::new(r.delta, r.kappa, r.tau, r.lambda)
    }
}

impl RewardConfig {
    pub fn new(delta: f64, kappa: f64, tau: f64, lambda: f64) -> Result<Self, RewardError> {
        for (name, v) in [("delta", delta), ("kappa", kappa), ("tau", tau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RewardError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(RewardError::InvalidConfig(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self { delta, kappa, tau, lambda })
    }

    /// Millimeter defaults for 3D joints.
    pub fn default_3d() -> Self {
        Self { delta: 100.0, kappa: 150.0, tau: 2500.0, lambda: 0.5 }
    }

    /// Pixel defaults for 2D keypoints; `kappa` matches the 15 px annotation
    /// filter.
    pub fn default_2d() -> Self {
        Self { delta: 10.0, kappa: 15.0, tau: 250.0, lambda: 0.5 }
    }
}

/// Per-joint distances with the visibility mask that selects which count.
#[derive(Debug, Clone, PartialEq)]
pub struct JointErrors {
    distances: Vec<f64>,
    visible: Vec<bool>,
}

impl JointErrors {
    pub fn new(distances: Vec<f64>, visible: Vec<bool>) -> Result<Self, RewardError> {
        if distances.len() != visible.len() {
            return Err(RewardError::InvalidErrors(format!(
                "{} distances but {} visibility flags",
                distances.len(),
                visible.len()
            )));
        }
        if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(RewardError::InvalidErrors(format!("distance {d} is not a finite nonnegative value")));
        }
        Ok(Self { distances, visible })
    }

    /// All joints visible.
    pub fn all_visible(distances: Vec<f64>) -> Result<Self, RewardError> {
        let n = distances.len();
        Self::new(distances, vec![true; n])
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn visible(&self) -> &[bool] {
        &self.visible
    }

    fn visible_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.distances.iter().zip(&self.visible).filter(|(_, v)| **v).map(|(d, _)| *d)
    }
}

pub fn huber(d: f64, delta: f64) -> f64 {
    if d <= delta {
        0.5 * d * d
    } else {
        delta * (d - 0.5 * delta)
    }
}

/// Mean Huber loss over the visible joints.
pub fn aggregate_error(errs: &JointErrors, delta: f64) -> Result<f64, RewardError> {
    let terms: Vec<f64> = errs.visible_distances().map(|d| huber(d, delta)).collect();
    if terms.is_empty() {
        return Err(RewardError::NoVisibleJoints);
    }
    let n = terms.len() as f64;
    // A correctly rounded sum is permutation invariant and monotone.
    Ok(exact_sum(terms) / n)
}

/// Fraction of visible joints strictly closer than `kappa`.
pub fn pck(errs: &JointErrors, kappa: f64) -> Result<f64, RewardError> {
    let (mut hits, mut n) = (0usize, 0usize);
    for d in errs.visible_distances() {
        n += 1;
        if d < kappa {
            hits += 1;
        }
    }
    if n == 0 {
        return Err(RewardError::NoVisibleJoints);
    }
    Ok(hits as f64 / n as f64)
}

pub fn pose_reward(errs: &JointErrors, cfg: &RewardConfig) -> Result<f64, RewardError> {
    let e = aggregate_error(errs, cfg.delta)?;
    let success = pck(errs, cfg.kappa)?;
    Ok(cfg.lambda * (-e / cfg.tau).exp() + (1.0 - cfg.lambda) * success)
}

/// Blend of the 2D and 3D rewards; `weight_3d` goes to the 3D term.
pub fn combined_reward(
    errs_2d: &JointErrors,
    cfg_2d: &RewardConfig,
    errs_3d: &JointErrors,
    cfg_3d: &RewardConfig,
    weight_3d: f64,
) -> Result<f64, RewardError> {
    if !(0.0..=1.0).contains(&weight_3d) {
        return Err(RewardError::InvalidConfig(format!("weight_3d must lie in [0, 1], got {weight_3d}")));
    }
    Ok(weight_3d * pose_reward(errs_3d, cfg_3d)? + (1.0 - weight_3d) * pose_reward(errs_2d, cfg_2d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huber_examples() {
        assert_eq!(huber(30.0, 50.0), 450.0);
        assert_eq!(huber(100.0, 50.0), 3750.0);
        assert_eq!(huber(50.0, 50.0), 1250.0);
        assert_eq!(50.0 * (50.0 - 25.0), 1250.0);
    }

    #[test]
    fn huber_is_c1_at_knee() {
        let delta = 37.0;
        let h = 1e-6;
        let left = (huber(delta, delta) - huber(delta - h, delta)) / h;
        let right = (huber(delta + h, delta) - huber(delta, delta)) / h;
        assert!((left - right).abs() < 1e-4);
        assert!((huber(delta - 1e-12, delta) - huber(delta + 1e-12, delta)).abs() < 1e-9);
    }

    #[test]
    fn aggregate_examples() {
        let zero = JointErrors::all_visible(vec![0.0; 5]).unwrap();
        assert_eq!(aggregate_error(&zero, 50.0).unwrap(), 0.0);
        let two = JointErrors::new(vec![30.0, 999.0, 100.0], vec![true, false, true]).unwrap();
        assert_eq!(aggregate_error(&two, 50.0).unwrap(), 2100.0);
        let hidden = JointErrors::new(vec![1.0, 2.0], vec![false, false]).unwrap();
        assert_eq!(aggregate_error(&hidden, 50.0), Err(RewardError::NoVisibleJoints));
        assert_eq!(pose_reward(&hidden, &RewardConfig::default_3d()), Err(RewardError::NoVisibleJoints));
    }

    #[test]
    fn reward_examples() {
        let zero = JointErrors::all_visible(vec![0.0; 3]).unwrap();
        for lambda in [0.0, 0.3, 1.0] {
            let cfg = RewardConfig::new(10.0, 10.0, 10.0, lambda).unwrap();
            assert_eq!(pose_reward(&zero, &cfg).unwrap(), 1.0);
        }
        // E = tau exactly: one joint at d = 20 with delta 50 gives E = 200.
        let one = JointErrors::all_visible(vec![20.0]).unwrap();
        let cfg = RewardConfig::new(50.0, 1.0, 200.0, 1.0).unwrap();
        assert!((pose_reward(&one, &cfg).unwrap() - (-1.0f64).exp()).abs() < 1e-15);

        let d = JointErrors::all_visible(vec![30.0, 100.0]).unwrap();
        let pck_only = RewardConfig::new(50.0, 50.0, 1000.0, 0.0).unwrap();
        assert_eq!(pose_reward(&d, &pck_only).unwrap(), 0.5);

        // Independent evaluation: 0.5 * exp(-(0.5*30^2 + 50*(100-25))/2/1000) + 0.5 * 1/2
        let worked = RewardConfig::new(50.0, 50.0, 1000.0, 0.5).unwrap();
        let oracle = 0.5 * (-2.1f64).exp() + 0.25;
        assert!((pose_reward(&d, &worked).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.3112).abs() < 5e-5);
    }

    #[test]
    fn pck_tie_fails() {
        let d = JointErrors::all_visible(vec![50.0]).unwrap();
        assert_eq!(pck(&d, 50.0).unwrap(), 0.0);
        assert_eq!(pck(&d, 50.000001).unwrap(), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::new(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(RewardConfig::new(1.0, -1.0, 1.0, 0.5).is_err());
        assert!(RewardConfig::new(1.0, 1.0, f64::INFINITY, 0.5).is_err());
        assert!(RewardConfig::new(1.0, 1.0, 1.0, 1.5).is_err());
        let json = r#"{"delta":100,"kappa":150,"tau":2500,"lambda":0.5}"#;
        assert_eq!(serde_json::from_str::<RewardConfig>(json).unwrap(), RewardConfig::default_3d());
        assert!(serde_json::from_str::<RewardConfig>(r#"{"delta":1,"kappa":1,"tau":1}"#).is_err());
        assert!(JointErrors::new(vec![1.0], vec![]).is_err());
        assert!(JointErrors::all_visible(vec![-1.0]).is_err());
        assert!(JointErrors::all_visible(vec![f64::NAN]).is_err());
    }

    #[test]
    fn combined_weighting() {
        let e2 = JointErrors::all_visible(vec![0.0]).unwrap();
        let e3 = JointErrors::all_visible(vec![1e6]).unwrap();
        let c3 = RewardConfig::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let r = combined_reward(&e2, &RewardConfig::default_2d(), &e3, &c3, 0.5).unwrap();
        assert_eq!(r, 0.5);
    }

    proptest! {
        #[test]
        fn permutation_is_bit_identical(ds in proptest::collection::vec((0.0..500.0f64, any::<bool>()), 1..17), seed in any::<u64>()) {
            prop_assume!(ds.iter().any(|(_, v)| *v));
            let cfg = RewardConfig::default_3d();
            let (d, v): (Vec<_>, Vec<_>) = ds.iter().copied().unzip();
            let base = pose_reward(&JointErrors::new(d, v).unwrap(), &cfg).unwrap();
            let mut perm = ds.clone();
            let mut s = seed;
            for i in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let (d, v): (Vec<_>, Vec<_>) = perm.into_iter().unzip();
            let shuffled = pose_reward(&JointErrors::new(d, v).unwrap(), &cfg).unwrap();
            prop_assert_eq!(base.to_bits(), shuffled.to_bits());
        }
    }
}
