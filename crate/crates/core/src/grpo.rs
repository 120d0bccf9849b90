//! Group Relative Policy Optimization on a factorized categorical policy.
//!
//! For every prompt the current policy samples a group of `K` responses. Each
//! response gets a scalar reward and the group-relative advantage
//! `A_i = r_i - mean(r)`, broadcast to all of its tokens. The objective is
//!
//! ```text
//! J = 1/G sum_i 1/|o_i| sum_t [ min(rho A_i, clip(rho, 1-eps, 1+eps) A_i) - beta k3_t ]
//! rho = pi(o_t) / pi_old(o_t),   k3 = exp(D) - D - 1,   D = log pi_ref(o_t) - log pi(o_t)
//! ```
//!
//! [`ToyPolicy`] keeps one independent categorical distribution per
//! (context, position), so the gradient of `J` with respect to the logits is
//! closed form and one optimization step is a plain gradient ascent.
//! Sampling uses one fresh pass per step (`pi_old = pi` at sampling time).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::codec::{decode_voxel, CodecError, InteractionVolume, VoxelToken};
use crate::joints::Joint;
use crate::numeric::{exact_sum, stream_rng};
use crate::reward::{pose_reward, JointErrors, RewardConfig, RewardError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group of {0} responses is too small for a group-relative advantage (need at least 2)")]
    GroupTooSmall(usize),
    #[error("invalid GRPO config: {0}")]
    InvalidConfig(String),
    #[error("invalid rollout group: {0}")]
    InvalidGroup(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrpoConfig {
    group_size: usize,
    clip_epsilon: f64,
    kl_beta: f64,
    learning_rate: f64,
    steps: usize,
    seed: u64,
}

impl Default for RawGrpoConfig {
    fn default() -> Self {
        let d = GrpoConfig::default();
        Self {
            group_size: d.group_size,
            clip_epsilon: d.clip_epsilon,
            kl_beta: d.kl_beta,
            learning_rate: d.learning_rate,
            steps: d.steps,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrpoConfig")]
pub struct GrpoConfig {
    /// Responses sampled per prompt.
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    /// Step size of the logit ascent. Zero freezes the policy.
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self { group_size: 8, clip_epsilon: 0.2, kl_beta: 0.01, learning_rate: 20.0, steps: 200, seed: 7 }
    }
}

impl TryFrom<RawGrpoConfig> for GrpoConfig {
    type Error = GrpoError;

    fn try_from(r: RawGrpoConfig) -> Result<Self, Self::Error> {
        let cfg = GrpoConfig {
            group_size: r.group_size,
            clip_epsilon: r.clip_epsilon,
            kl_beta: r.kl_beta,
            learning_rate: r.learning_rate,
            steps: r.steps,
            seed: r.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall(self.group_size));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(GrpoError::InvalidConfig(format!("clip_epsilon must be positive, got {}", self.clip_epsilon)));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(GrpoError::InvalidConfig(format!("kl_beta must be nonnegative, got {}", self.kl_beta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GrpoError::InvalidConfig(format!(
                "learning_rate must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// `A_i = r_i - mean(r)`, adjusted so that the exact sum is zero.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    let k = rewards.len();
    if k < 2 {
        return Err(GrpoError::GroupTooSmall(k));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::InvalidGroup("rewards must be finite".into()));
    }
    if rewards.iter().all(|r| r.to_bits() == rewards[0].to_bits()) {
        return Ok(vec![0.0; k]);
    }
    let mean = exact_sum(rewards.iter().copied()) / k as f64;
    let mut adv: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    // Rounding in `mean` and in each difference leaves a residual of a few
    // ulps; fold it into the smallest-magnitude entry until it vanishes.
    for _ in 0..64 {
        let residual = exact_sum(adv.iter().copied());
        if residual == 0.0 {
            break;
        }
        let j = (0..k)
            .min_by(|&a, &b| adv[a].abs().total_cmp(&adv[b].abs()).then(a.cmp(&b)))
            .expect("k >= 2");
        adv[j] -= residual;
    }
    Ok(adv)
}

/// `min(rho A, clip(rho, 1-eps, 1+eps) A)`.
pub fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the clipped branch is the (strictly) smaller one, i.e. the token
/// contributes no gradient through the ratio.
pub fn is_clipped(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    clipped * advantage < ratio * advantage
}

/// Per-token k3 estimate of `KL(pi || pi_ref)` averaged over tokens.
pub fn kl_penalty(logp_current: &[f64], logp_ref: &[f64]) -> f64 {
    assert_eq!(logp_current.len(), logp_ref.len(), "log-prob arrays must be length matched");
    if logp_current.is_empty() {
        return 0.0;
    }
    let terms = logp_current.iter().zip(logp_ref).map(|(c, r)| k3(r - c));
    exact_sum(terms) / logp_current.len() as f64
}

fn k3(delta: f64) -> f64 {
    // exp_m1 keeps precision for tiny deltas; the max guards the last ulp.
    (delta.exp_m1() - delta).max(0.0)
}

/// `K` responses to one prompt with their token log-probabilities under the
/// current, behavior (`old`) and reference policies.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub context: usize,
    pub responses: Vec<Vec<u32>>,
    pub logp_current: Vec<Vec<f64>>,
    pub logp_old: Vec<Vec<f64>>,
    pub logp_ref: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl RolloutGroup {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let k = self.responses.len();
        if self.rewards.len() != k
            || self.logp_current.len() != k
            || self.logp_old.len() != k
            || self.logp_ref.len() != k
        {
            return Err(GrpoError::InvalidGroup("per-response arrays must all have K entries".into()));
        }
        for (i, resp) in self.responses.iter().enumerate() {
            let n = resp.len();
            if n == 0 {
                return Err(GrpoError::InvalidGroup(format!("response {i} is empty")));
            }
            if self.logp_current[i].len() != n || self.logp_old[i].len() != n || self.logp_ref[i].len() != n {
                return Err(GrpoError::InvalidGroup(format!("log-prob arrays of response {i} do not match its length")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Length-normalized clipped surrogate averaged over responses, with
/// per-response advantages supplied by the caller.
pub fn surrogate_with_advantages(
    logp_current: &[Vec<f64>],
    logp_old: &[Vec<f64>],
    advantages: &[f64],
    epsilon: f64,
) -> f64 {
    let per_response: Vec<f64> = logp_current
        .iter()
        .zip(logp_old)
        .zip(advantages)
        .map(|((cur, old), &a)| {
            let terms = cur.iter().zip(old).map(|(c, o)| clipped_term((c - o).exp(), a, epsilon));
            exact_sum(terms) / cur.len() as f64
        })
        .collect();
    exact_sum(per_response) / advantages.len() as f64
}

pub fn clipped_surrogate(group: &RolloutGroup, epsilon: f64) -> Result<f64, GrpoError> {
    group.validate()?;
    let adv = group_advantages(&group.rewards)?;
    Ok(surrogate_with_advantages(&group.logp_current, &group.logp_old, &adv, epsilon))
}

/// Mean over responses of the per-response k3 estimate.
pub fn group_kl(group: &RolloutGroup) -> f64 {
    let per: Vec<f64> = group.logp_current.iter().zip(&group.logp_ref).map(|(c, r)| kl_penalty(c, r)).collect();
    exact_sum(per) / group.len() as f64
}

/// `J` for one group: surrogate minus `beta` times KL.
pub fn group_objective(group: &RolloutGroup, epsilon: f64, beta: f64) -> Result<f64, GrpoError> {
    Ok(clipped_surrogate(group, epsilon)? - beta * group_kl(group))
}

/// Independent categorical distributions over a small token alphabet, one
/// per (context, position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    contexts: usize,
    positions: usize,
    alphabet: usize,
    logits: Vec<f64>,
}

impl ToyPolicy {
    pub fn uniform(contexts: usize, positions: usize, alphabet: usize) -> Self {
        Self { contexts, positions, alphabet, logits: vec![0.0; contexts * positions * alphabet] }
    }

    pub fn from_logits(contexts: usize, positions: usize, alphabet: usize, logits: Vec<f64>) -> Result<Self, GrpoError> {
        if contexts == 0 || positions == 0 || alphabet == 0 {
            return Err(GrpoError::InvalidConfig("policy dimensions must be positive".into()));
        }
        if logits.len() != contexts * positions * alphabet {
            return Err(GrpoError::InvalidConfig(format!(
                "expected {} logits, got {}",
                contexts * positions * alphabet,
                logits.len()
            )));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(GrpoError::InvalidConfig("logits must be finite".into()));
        }
        Ok(Self { contexts, positions, alphabet, logits })
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn offset(&self, context: usize, position: usize) -> usize {
        (context * self.positions + position) * self.alphabet
    }

    fn slot(&self, context: usize, position: usize) -> &[f64] {
        let o = self.offset(context, position);
        &self.logits[o..o + self.alphabet]
    }

    pub fn log_probs(&self, context: usize, position: usize) -> Vec<f64> {
        let l = self.slot(context, position);
        let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + exact_sum(l.iter().map(|x| (x - max).exp())).ln();
        l.iter().map(|x| x - lse).collect()
    }

    pub fn probs(&self, context: usize, position: usize) -> Vec<f64> {
        self.log_probs(context, position).into_iter().map(f64::exp).collect()
    }

    /// Per-token log-probabilities of `tokens` (one per position).
    pub fn sequence_log_probs(&self, context: usize, tokens: &[u32]) -> Vec<f64> {
        tokens
            .iter()
            .enumerate()
            .map(|(t, &tok)| self.log_probs(context, t)[tok as usize])
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, context: usize, rng: &mut R) -> Vec<u32> {
        (0..self.positions)
            .map(|t| {
                let p = self.probs(context, t);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, pa) in p.iter().enumerate() {
                    acc += pa;
                    if u < acc {
                        return a as u32;
                    }
                }
                (self.alphabet - 1) as u32
            })
            .collect()
    }

    /// Most likely token at every position.
    pub fn greedy(&self, context: usize) -> Vec<u32> {
        (0..self.positions)
            .map(|t| {
                let l = self.slot(context, t);
                (0..self.alphabet).max_by(|&a, &b| l[a].total_cmp(&l[b]).then(b.cmp(&a))).unwrap_or(0) as u32
            })
            .collect()
    }
}

/// Rollouts of one prompt: sampled tokens plus the fixed log-probabilities of
/// the behavior and reference policies. `logp_current` is recomputed from
/// whatever policy is being differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGroup {
    pub context: usize,
    pub responses: Vec<Vec<u32>>,
    pub logp_old: Vec<Vec<f64>>,
    pub logp_ref: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl SampledGroup {
    pub fn to_rollout(&self, policy: &ToyPolicy) -> RolloutGroup {
        RolloutGroup {
            context: self.context,
            logp_current: self.responses.iter().map(|r| policy.sequence_log_probs(self.context, r)).collect(),
            responses: self.responses.clone(),
            logp_old: self.logp_old.clone(),
            logp_ref: self.logp_ref.clone(),
            rewards: self.rewards.clone(),
        }
    }
}

/// Mean over groups of [`group_objective`] evaluated at `policy`.
pub fn batch_objective(policy: &ToyPolicy, batch: &[SampledGroup], epsilon: f64, beta: f64) -> Result<f64, GrpoError> {
    let per: Vec<f64> = batch
        .iter()
        .map(|g| group_objective(&g.to_rollout(policy), epsilon, beta))
        .collect::<Result<_, _>>()?;
    Ok(exact_sum(per) / batch.len() as f64)
}

/// Analytic gradient of [`batch_objective`] with respect to the logits.
pub fn batch_gradient(policy: &ToyPolicy, batch: &[SampledGroup], epsilon: f64, beta: f64) -> Result<Vec<f64>, GrpoError> {
    let mut grad = vec![0.0; policy.logits.len()];
    let batch_scale = 1.0 / batch.len() as f64;
    for g in batch {
        let rollout = g.to_rollout(policy);
        rollout.validate()?;
        let adv = group_advantages(&rollout.rewards)?;
        let group_scale = batch_scale / rollout.len() as f64;
        for (i, tokens) in rollout.responses.iter().enumerate() {
            let scale = group_scale / tokens.len() as f64;
            for (t, &tok) in tokens.iter().enumerate() {
                let cur = rollout.logp_current[i][t];
                let ratio = (cur - rollout.logp_old[i][t]).exp();
                let d_surrogate = if is_clipped(ratio, adv[i], epsilon) { 0.0 } else { ratio * adv[i] };
                let delta = rollout.logp_ref[i][t] - cur;
                let d_kl = -delta.exp_m1();
                let d_logp = scale * (d_surrogate - beta * d_kl);
                if d_logp == 0.0 {
                    continue;
                }
                // d log softmax(l)[tok] / d l[a] = [a == tok] - p[a]
                let probs = policy.probs(g.context, t);
                let o = policy.offset(g.context, t);
                for (a, p) in probs.iter().enumerate() {
                    let indicator = if a == tok as usize { 1.0 } else { 0.0 };
                    grad[o + a] += d_logp * (indicator - p);
                }
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    /// Fraction of tokens whose ratio was clipped out of the gradient.
    pub clip_fraction: f64,
    /// Mean k3 estimate against the reference policy, before the update.
    pub kl: f64,
    pub objective: f64,
}

/// Samples `K` responses per prompt, scores them and takes one gradient
/// ascent step on the logits.
///
/// Response `i` of prompt `p` at step `step` draws from its own RNG stream
/// derived from `(cfg.seed, step, p, i)`, so results do not depend on
/// evaluation order.
pub fn grpo_step<F>(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    prompts: &[usize],
    mut reward_fn: F,
    cfg: &GrpoConfig,
    step: u64,
) -> Result<(ToyPolicy, StepStats), GrpoError>
where
    F: FnMut(usize, &[u32]) -> Result<f64, GrpoError>,
{
    cfg.validate()?;
    if prompts.is_empty() {
        return Err(GrpoError::InvalidConfig("at least one prompt is required".into()));
    }
    let mut batch = Vec::with_capacity(prompts.len());
    for (p, &context) in prompts.iter().enumerate() {
        if context >= policy.contexts {
            return Err(GrpoError::InvalidTask(format!("prompt context {context} out of range")));
        }
        let mut responses = Vec::with_capacity(cfg.group_size);
        let mut rewards = Vec::with_capacity(cfg.group_size);
        for i in 0..cfg.group_size {
            let mut rng = stream_rng(cfg.seed, &[step, p as u64, i as u64]);
            let tokens = policy.sample(context, &mut rng);
            rewards.push(reward_fn(context, &tokens)?);
            responses.push(tokens);
        }
        let logp_old = responses.iter().map(|r| policy.sequence_log_probs(context, r)).collect();
        let logp_ref = responses.iter().map(|r| reference.sequence_log_probs(context, r)).collect();
        batch.push(SampledGroup { context, responses, logp_old, logp_ref, rewards });
    }

    let mut reward_sum = Vec::new();
    let mut abs_adv = Vec::new();
    let mut kls = Vec::new();
    let (mut clipped, mut tokens) = (0usize, 0usize);
    for g in &batch {
        let rollout = g.to_rollout(policy);
        let adv = group_advantages(&g.rewards)?;
        reward_sum.extend_from_slice(&g.rewards);
        abs_adv.extend(adv.iter().map(|a| a.abs()));
        kls.push(group_kl(&rollout));
        for (i, cur) in rollout.logp_current.iter().enumerate() {
            for (c, o) in cur.iter().zip(&rollout.logp_old[i]) {
                tokens += 1;
                if is_clipped((c - o).exp(), adv[i], cfg.clip_epsilon) {
                    clipped += 1;
                }
            }
        }
    }
    let objective = batch_objective(policy, &batch, cfg.clip_epsilon, cfg.kl_beta)?;
    let stats = StepStats {
        mean_reward: exact_sum(reward_sum.iter().copied()) / reward_sum.len() as f64,
        mean_abs_advantage: exact_sum(abs_adv.iter().copied()) / abs_adv.len() as f64,
        clip_fraction: clipped as f64 / tokens.max(1) as f64,
        kl: exact_sum(kls.iter().copied()) / kls.len() as f64,
        objective,
    };

    let grad = batch_gradient(policy, &batch, cfg.clip_epsilon, cfg.kl_beta)?;
    let mut next = policy.clone();
    for (l, g) in next.logits.iter_mut().zip(&grad) {
        *l += cfg.learning_rate * g;
    }
    Ok((next, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskJoint {
    pub name: Joint,
    pub xyz_mm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskContext {
    pub joints: Vec<TaskJoint>,
}

/// Contexts with ground-truth joints that a [`ToyPolicy`] must localize by
/// emitting one coarse voxel bin per axis per joint.
///
/// A coarse bin `b` of `alphabet_size` maps to the fine 0-999 index at the
/// center of its span; reward is [`pose_reward`] on the decoded positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLocalizationTask {
    #[serde(default)]
    pub volume: InteractionVolume,
    pub alphabet_size: u32,
    #[serde(default = "SyntheticLocalizationTask::default_reward")]
    pub reward: RewardConfig,
    pub contexts: Vec<TaskContext>,
}

impl SyntheticLocalizationTask {
    pub fn default_reward() -> RewardConfig {
        RewardConfig { delta: 1000.0, kappa: 300.0, tau: 250_000.0, lambda: 0.5 }
    }

    /// Random task whose ground truth sits at coarse-bin centers.
    pub fn generate(contexts: usize, joints: &[Joint], alphabet_size: u32, seed: u64) -> Result<Self, GrpoError> {
        if contexts == 0 || joints.is_empty() {
            return Err(GrpoError::InvalidTask("need at least one context and one joint".into()));
        }
        let volume = InteractionVolume::default();
        let mut ctxs = Vec::with_capacity(contexts);
        for c in 0..contexts {
            let mut rng = stream_rng(seed, &[c as u64]);
            let mut js = Vec::with_capacity(joints.len());
            for &name in joints {
                let bins = [0; 3].map(|_| rng.random_range(0..alphabet_size));
                let p = decode_coarse(bins, alphabet_size, &volume)?;
                js.push(TaskJoint { name, xyz_mm: p });
            }
            ctxs.push(TaskContext { joints: js });
        }
        let task = Self { volume, alphabet_size, reward: Self::default_reward(), contexts: ctxs };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        if !(2..=1000).contains(&self.alphabet_size) {
            return Err(GrpoError::InvalidTask(format!("alphabet_size must lie in 2..=1000, got {}", self.alphabet_size)));
        }
        let Some(first) = self.contexts.first() else {
            return Err(GrpoError::InvalidTask("task has no contexts".into()));
        };
        if first.joints.is_empty() {
            return Err(GrpoError::InvalidTask("contexts must list at least one joint".into()));
        }
        if self.contexts.iter().any(|c| c.joints.len() != first.joints.len()) {
            return Err(GrpoError::InvalidTask("all contexts must list the same number of joints".into()));
        }
        Ok(())
    }

    /// Tokens per response: three axes per joint.
    pub fn positions(&self) -> usize {
        self.contexts.first().map_or(0, |c| 3 * c.joints.len())
    }

    pub fn policy_shape(&self) -> (usize, usize, usize) {
        (self.contexts.len(), self.positions(), self.alphabet_size as usize)
    }

    pub fn reward(&self, context: usize, tokens: &[u32]) -> Result<f64, GrpoError> {
        let ctx = self
            .contexts
            .get(context)
            .ok_or_else(|| GrpoError::InvalidTask(format!("context {context} out of range")))?;
        if tokens.len() != 3 * ctx.joints.len() {
            return Err(GrpoError::InvalidTask(format!("expected {} tokens, got {}", 3 * ctx.joints.len(), tokens.len())));
        }
        let distances = ctx
            .joints
            .iter()
            .zip(tokens.chunks_exact(3))
            .map(|(j, t)| {
                let p = decode_coarse([t[0], t[1], t[2]], self.alphabet_size, &self.volume)?;
                let d = p.iter().zip(j.xyz_mm).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                Ok(d)
            })
            .collect::<Result<Vec<_>, GrpoError>>()?;
        Ok(pose_reward(&JointErrors::all_visible(distances)?, &self.reward)?)
    }
}

/// Fine 0-999 index at the center of coarse bin `bin`.
pub fn coarse_to_fine(bin: u32, alphabet_size: u32) -> u32 {
    (2 * bin + 1) * 1000 / (2 * alphabet_size)
}

fn decode_coarse(bins: [u32; 3], alphabet_size: u32, volume: &InteractionVolume) -> Result<[f64; 3], GrpoError> {
    if let Some(b) = bins.iter().find(|&&b| b >= alphabet_size) {
        return Err(GrpoError::InvalidTask(format!("token {b} outside alphabet of size {alphabet_size}")));
    }
    let [x, y, z] = bins.map(|b| coarse_to_fine(b, alphabet_size));
    Ok(decode_voxel(&VoxelToken::new(x, y, z)?, volume)?.to_array())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_reward: f64,
    pub clip_fraction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_reward).collect()
    }

    /// Mean reward of the `q`-th quarter of the curve (`q` in 0..4).
    pub fn quartile_mean(&self, q: usize) -> f64 {
        let n = self.points.len();
        let (lo, hi) = (q * n / 4, (q + 1) * n / 4);
        let slice = &self.points[lo..hi.max(lo + 1).min(n)];
        exact_sum(slice.iter().map(|p| p.mean_reward)) / slice.len() as f64
    }

    /// CSV with columns `step,mean_reward,clip_fraction,kl`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_reward,clip_fraction,kl\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.step, p.mean_reward, p.clip_fraction, p.kl));
        }
        out
    }
}

/// Trains a uniform-initialized [`ToyPolicy`] on every context of `task`
/// for `cfg.steps` steps; the initial policy doubles as the KL reference.
pub fn train_toy(task: &SyntheticLocalizationTask, cfg: &GrpoConfig) -> Result<(ToyPolicy, LearningCurve), GrpoError> {
    cfg.validate()?;
    task.validate()?;
    let (c, t, a) = task.policy_shape();
    let reference = ToyPolicy::uniform(c, t, a);
    let mut policy = reference.clone();
    let prompts: Vec<usize> = (0..c).collect();
    let mut curve = LearningCurve::default();
    for step in 0..cfg.steps {
        let (next, stats) = grpo_step(&policy, &reference, &prompts, |ctx, toks| task.reward(ctx, toks), cfg, step as u64)?;
        curve.points.push(CurvePoint {
            step,
            mean_reward: stats.mean_reward,
            clip_fraction: stats.clip_fraction,
            kl: stats.kl,
        });
        policy = next;
    }
    Ok((policy, curve))
}
