//! Camera-frame joint error (G-MPJPE), body-part subsets, and the
//! instruction-to-joint-set registry.
//!
//! Errors are plain Euclidean distances between predicted and ground-truth
//! joints in the camera frame. Nothing is aligned first: a prediction that is
//! perfect up to a global offset `t` scores `|t|`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::joints::{Joint, KeypointSet};
use crate::numeric::exact_sum;
use crate::records::{KeypointRecord, SampleRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("joint {0} is missing")]
    MissingJoint(Joint),
    #[error("no visible ground-truth joints in the subset")]
    NoVisibleJoints,
    #[error("prediction/ground-truth ids do not match: {0}")]
    IdMismatch(String),
    #[error("unknown part config '{0}' (expected upper, lower, l_upper or r_upper)")]
    UnknownConfig(String),
    #[error("invalid task spec: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartConfig {
    #[serde(rename = "Upper")]
    Upper,
    #[serde(rename = "Lower")]
    Lower,
    #[serde(rename = "L-Upper")]
    LUpper,
    #[serde(rename = "R-Upper")]
    RUpper,
}

impl PartConfig {
    pub const ALL: [PartConfig; 4] = [PartConfig::Upper, PartConfig::Lower, PartConfig::LUpper, PartConfig::RUpper];

    pub fn name(self) -> &'static str {
        match self {
            PartConfig::Upper => "Upper",
            PartConfig::Lower => "Lower",
            PartConfig::LUpper => "L-Upper",
            PartConfig::RUpper => "R-Upper",
        }
    }

    pub fn joints(self) -> &'static [Joint] {
        use Joint::*;
        match self {
            PartConfig::Upper => &[LeftShoulder, RightShoulder, LeftElbow, RightElbow],
            PartConfig::Lower => &[LeftHip, RightHip, LeftKnee, RightKnee],
            PartConfig::LUpper => &[LeftShoulder, LeftElbow, LeftWrist],
            PartConfig::RUpper => &[RightShoulder, RightElbow, RightWrist],
        }
    }

    /// Parses a comma-separated list such as `upper,l_upper`.
    pub fn parse_list(s: &str) -> Result<Vec<PartConfig>, EvalError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let c: PartConfig = part.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(EvalError::UnknownConfig(s.to_owned()));
        }
        Ok(out)
    }
}

impl fmt::Display for PartConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartConfig {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "upper" => Ok(PartConfig::Upper),
            "lower" => Ok(PartConfig::Lower),
            "l_upper" => Ok(PartConfig::LUpper),
            "r_upper" => Ok(PartConfig::RUpper),
            _ => Err(EvalError::UnknownConfig(s.to_owned())),
        }
    }
}

/// Per-joint errors of the visible subset joints.
fn subset_errors(pred: &KeypointSet, gt: &KeypointSet, subset: &[Joint]) -> Result<Vec<(Joint, f64)>, EvalError> {
    let mut out = Vec::with_capacity(subset.len());
    for &j in subset {
        let g = gt.get(j).ok_or(EvalError::MissingJoint(j))?;
        let p = pred.get(j).ok_or(EvalError::MissingJoint(j))?;
        if g.visible {
            out.push((j, p.position.distance(&g.position)));
        }
    }
    Ok(out)
}

/// Mean camera-frame joint error (mm) over the subset joints visible in `gt`.
pub fn gmpjpe(pred: &KeypointSet, gt: &KeypointSet, subset: &[Joint]) -> Result<f64, EvalError> {
    let errs = subset_errors(pred, gt, subset)?;
    if errs.is_empty() {
        return Err(EvalError::NoVisibleJoints);
    }
    let n = errs.len() as f64;
    Ok(exact_sum(errs.into_iter().map(|(_, e)| e)) / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: PartConfig,
    /// Mean over evaluated samples of the per-sample joint mean; `None` when
    /// every sample was excluded.
    pub gmpjpe_mm: Option<f64>,
    pub samples_evaluated: usize,
    /// Samples with no visible ground-truth joint in this config.
    pub samples_excluded: usize,
    pub joints_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sample_count: usize,
    pub configs: Vec<ConfigResult>,
    /// Mean error of each joint over the samples where it is visible, for
    /// the joints covered by the requested configs.
    pub per_joint_mm: BTreeMap<Joint, f64>,
}

impl EvalReport {
    pub fn get(&self, config: PartConfig) -> Option<&ConfigResult> {
        self.configs.iter().find(|c| c.config == config)
    }
}

struct SampleEval {
    per_config: Vec<Option<(f64, usize)>>,
    per_joint: Vec<(Joint, f64)>,
}

fn eval_sample(pred: &KeypointSet, gt: &KeypointSet, configs: &[PartConfig], joints: &[Joint]) -> Result<SampleEval, EvalError> {
    let mut per_config = Vec::with_capacity(configs.len());
    for c in configs {
        match gmpjpe(pred, gt, c.joints()) {
            Ok(e) => per_config.push(Some((e, subset_errors(pred, gt, c.joints())?.len()))),
            Err(EvalError::NoVisibleJoints) => per_config.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(SampleEval { per_config, per_joint: subset_errors(pred, gt, joints)? })
}

fn covered_joints(configs: &[PartConfig]) -> Vec<Joint> {
    let mut js: Vec<Joint> = configs.iter().flat_map(|c| c.joints().iter().copied()).collect();
    js.sort();
    js.dedup();
    js
}

/// Scores `(prediction, ground truth)` pairs. Every quantity is a correctly
/// rounded mean, so the report does not depend on pair order.
pub fn evaluate_pairs(pairs: &[(KeypointSet, KeypointSet)], configs: &[PartConfig]) -> Result<EvalReport, EvalError> {
    let joints = covered_joints(configs);
    let evals: Vec<SampleEval> = pairs
        .par_iter()
        .map(|(p, g)| eval_sample(p, g, configs, &joints))
        .collect::<Result<_, _>>()?;

    let configs_out = configs
        .iter()
        .enumerate()
        .map(|(ci, &config)| {
            let scored: Vec<(f64, usize)> = evals.iter().filter_map(|e| e.per_config[ci]).collect();
            let n = scored.len();
            ConfigResult {
                config,
                gmpjpe_mm: (n > 0).then(|| exact_sum(scored.iter().map(|s| s.0)) / n as f64),
                samples_evaluated: n,
                samples_excluded: evals.len() - n,
                joints_evaluated: scored.iter().map(|s| s.1).sum(),
            }
        })
        .collect();

    let mut by_joint: BTreeMap<Joint, Vec<f64>> = BTreeMap::new();
    for e in &evals {
        for &(j, d) in &e.per_joint {
            by_joint.entry(j).or_default().push(d);
        }
    }
    let per_joint_mm = by_joint
        .into_iter()
        .map(|(j, ds)| {
            let n = ds.len() as f64;
            (j, exact_sum(ds) / n)
        })
        .collect();

    Ok(EvalReport { sample_count: pairs.len(), configs: configs_out, per_joint_mm })
}

/// Runs `predictor` over the dataset and scores it against the stored
/// ground truth.
pub fn run_benchmark<F>(dataset: &[SampleRecord], predictor: F, configs: &[PartConfig]) -> Result<EvalReport, EvalError>
where
    F: Fn(&SampleRecord) -> Result<KeypointSet, EvalError> + Sync,
{
    let pairs: Vec<(KeypointSet, KeypointSet)> = dataset
        .par_iter()
        .map(|s| predictor(s).map(|p| (p, s.keypoints())))
        .collect::<Result<_, _>>()?;
    evaluate_pairs(&pairs, configs)
}

/// Pairs predictions with ground truth by id. Both sides must hold the same
/// set of unique ids.
pub fn match_by_id(gt: &[KeypointRecord], preds: &[KeypointRecord]) -> Result<Vec<(KeypointSet, KeypointSet)>, EvalError> {
    let mut by_id: HashMap<u64, &KeypointRecord> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id, p).is_some() {
            return Err(EvalError::IdMismatch(format!("duplicate prediction id {}", p.id)));
        }
    }
    let mut seen = HashSet::with_capacity(gt.len());
    let mut pairs = Vec::with_capacity(gt.len());
    for g in gt {
        if !seen.insert(g.id) {
            return Err(EvalError::IdMismatch(format!("duplicate ground-truth id {}", g.id)));
        }
        let p = by_id
            .get(&g.id)
            .ok_or_else(|| EvalError::IdMismatch(format!("no prediction for id {}", g.id)))?;
        pairs.push((p.keypoints(), g.keypoints()));
    }
    if let Some(extra) = preds.iter().map(|p| p.id).filter(|id| !seen.contains(id)).min() {
        return Err(EvalError::IdMismatch(format!("prediction id {extra} has no ground truth")));
    }
    Ok(pairs)
}

/// One registry entry: an interaction task and the joints it attends to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub keywords: Vec<String>,
    pub joints: Vec<Joint>,
}

impl TaskSpec {
    pub fn new(task_id: &str, keywords: &[&str], joints: &[Joint]) -> Result<Self, EvalError> {
        let spec = Self {
            task_id: task_id.to_owned(),
            keywords: keywords.iter().map(|k| (*k).to_owned()).collect(),
            joints: joints.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.joints.is_empty() {
            return Err(EvalError::InvalidTask(format!("task '{}' has no target joints", self.task_id)));
        }
        if self.keywords.is_empty() {
            return Err(EvalError::InvalidTask(format!("task '{}' has no keywords", self.task_id)));
        }
        for k in &self.keywords {
            if normalize(k).is_empty() || k.to_lowercase() != *k {
                return Err(EvalError::InvalidTask(format!(
                    "keyword '{k}' of task '{}' must be nonempty lowercase text",
                    self.task_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskRegistry {
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResolution {
    pub task_id: Option<String>,
    pub matched_keyword: Option<String>,
    pub joints: Vec<Joint>,
    pub unresolved: bool,
}

impl TaskRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(tasks: Vec<TaskSpec>) -> Result<Self, EvalError> {
        for t in &tasks {
            t.validate()?;
        }
        Ok(Self { tasks })
    }

    /// Twelve built-in interaction tasks.
    pub fn seeded() -> Self {
        use Joint::*;
        let upper = PartConfig::Upper.joints();
        let lower = PartConfig::Lower.joints();
        let l_upper = PartConfig::LUpper.joints();
        let r_upper = PartConfig::RUpper.joints();
        let t = |id: &str, kw: &[&str], js: &[Joint]| TaskSpec::new(id, kw, js).expect("seed tasks are valid");
        Self {
            tasks: vec![
                t("handshake", &["shake hands", "shake hand", "shaking hands", "handshake"], r_upper),
                t("handover", &["hand over", "handover", "pass the", "give"], &[LeftElbow, RightElbow, LeftWrist, RightWrist]),
                t("shoulder_massage", &["massage", "shoulder massage", "rub shoulders"], upper),
                t("wheelchair_lift", &["wheelchair", "lift", "transfer"], &[LeftShoulder, RightShoulder, LeftHip, RightHip, LeftKnee, RightKnee]),
                t("stand_assist_left", &["stand from left", "stand up from the left", "stand from the left"], l_upper),
                t("stand_assist_right", &["stand from right", "stand up from the right", "stand from the right"], r_upper),
                t("high_five", &["high five", "high-five"], r_upper),
                t("hug", &["hug", "embrace"], upper),
                t("walk_assist", &["walk", "walking", "steady their gait"], lower),
                t("feeding", &["feed", "feeding", "spoon"], &[Nose, LeftEye, RightEye]),
                t("dressing", &["put on", "dress", "jacket", "sleeve"], &[LeftShoulder, RightShoulder, LeftElbow, RightElbow, LeftWrist, RightWrist]),
                t("footwear", &["shoe", "shoes", "put on shoes", "sock"], &[LeftKnee, RightKnee, LeftAnkle, RightAnkle]),
            ],
        }
    }
}

/// Lowercases and collapses every run of non-alphanumeric characters to a
/// single space, so keyword matches fall on word boundaries.
fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn contains_phrase(haystack: &str, needle: &str) -> bool {
    // Both are normalized, so padding with spaces enforces word boundaries.
    format!(" {haystack} ").contains(&format!(" {needle} "))
}

/// Maps an instruction to its target joints. The longest matching keyword
/// wins; ties go to the earlier registry entry. Unmatched instructions
/// resolve to all 17 joints with `unresolved` set.
pub fn resolve_task(instruction: &str, registry: &TaskRegistry) -> TaskResolution {
    let text = normalize(instruction);
    let mut best: Option<(usize, &TaskSpec, &str)> = None;
    for task in &registry.tasks {
        for kw in &task.keywords {
            let norm = normalize(kw);
            if norm.is_empty() || !contains_phrase(&text, &norm) {
                continue;
            }
            let len = norm.chars().count();
            if best.is_none_or(|(l, _, _)| len > l) {
                best = Some((len, task, kw));
            }
        }
    }
    match best {
        Some((_, task, kw)) => TaskResolution {
            task_id: Some(task.task_id.clone()),
            matched_keyword: Some(kw.to_owned()),
            joints: task.joints.clone(),
            unresolved: false,
        },
        None => TaskResolution { task_id: None, matched_keyword: None, joints: Joint::ALL.to_vec(), unresolved: true },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Point3Cam;
    use proptest::prelude::*;

    fn full(offset: f64) -> KeypointSet {
        Joint::ALL
            .iter()
            .map(|&j| (j, Point3Cam::new(j.index() as f64 * 10.0 + offset, -50.0, 1500.0), true))
            .collect()
    }

    #[test]
    fn part_sets_are_exact() {
        use Joint::*;
        assert_eq!(PartConfig::Upper.joints(), &[LeftShoulder, RightShoulder, LeftElbow, RightElbow]);
        assert_eq!(PartConfig::Lower.joints(), &[LeftHip, RightHip, LeftKnee, RightKnee]);
        assert_eq!(PartConfig::LUpper.joints(), &[LeftShoulder, LeftElbow, LeftWrist]);
        assert_eq!(PartConfig::RUpper.joints(), &[RightShoulder, RightElbow, RightWrist]);
        assert_eq!(PartConfig::parse_list("upper, lower,l_upper,R-Upper").unwrap(), PartConfig::ALL.to_vec());
        assert!(PartConfig::parse_list("torso").is_err());
        assert_eq!(serde_json::to_string(&PartConfig::LUpper).unwrap(), "\"L-Upper\"");
    }

    #[test]
    fn gmpjpe_examples() {
        let gt = full(0.0);
        let subset = PartConfig::Upper.joints();
        assert_eq!(gmpjpe(&gt, &gt, subset).unwrap(), 0.0);
        let mut pred = gt.clone();
        let p = &mut pred.get_mut(Joint::LeftElbow).unwrap().position;
        p.x += 3.0;
        p.y += 4.0;
        assert_eq!(gmpjpe(&pred, &gt, subset).unwrap(), 1.25);
        let mut missing = KeypointSet::new();
        for (j, s) in gt.iter().filter(|(j, _)| *j != Joint::RightElbow) {
            missing.insert(j, s.position, s.visible);
        }
        assert_eq!(gmpjpe(&missing, &gt, subset), Err(EvalError::MissingJoint(Joint::RightElbow)));
    }

    #[test]
    fn invisible_ground_truth_is_excluded() {
        let mut gt = full(0.0);
        let pred = gt.translated([0.0, 0.0, 100.0]);
        gt.get_mut(Joint::LeftShoulder).unwrap().visible = false;
        assert_eq!(gmpjpe(&pred, &gt, PartConfig::Upper.joints()).unwrap(), 100.0);
        for j in PartConfig::LUpper.joints() {
            gt.get_mut(*j).unwrap().visible = false;
        }
        assert_eq!(gmpjpe(&pred, &gt, PartConfig::LUpper.joints()), Err(EvalError::NoVisibleJoints));
        let report = evaluate_pairs(&[(pred, gt)], &PartConfig::ALL).unwrap();
        let l = report.get(PartConfig::LUpper).unwrap();
        assert_eq!((l.gmpjpe_mm, l.samples_excluded, l.joints_evaluated), (None, 1, 0));
        assert_eq!(report.get(PartConfig::Upper).unwrap().joints_evaluated, 2);
    }

    #[test]
    fn sample_then_average() {
        // Sample A: 4 visible joints off by 10. Sample B: 1 visible joint off by 50.
        let gt_a = full(0.0);
        let pred_a = gt_a.translated([10.0, 0.0, 0.0]);
        let mut gt_b = full(0.0);
        for j in [Joint::RightShoulder, Joint::LeftElbow, Joint::RightElbow] {
            gt_b.get_mut(j).unwrap().visible = false;
        }
        let pred_b = gt_b.translated([0.0, 50.0, 0.0]);
        let r = evaluate_pairs(&[(pred_a, gt_a), (pred_b, gt_b)], &[PartConfig::Upper]).unwrap();
        let e = r.get(PartConfig::Upper).unwrap().gmpjpe_mm.unwrap();
        assert!((e - 30.0).abs() < 1e-9, "{e}");
        assert_eq!(r.get(PartConfig::Upper).unwrap().joints_evaluated, 5);
    }

    #[test]
    fn id_matching() {
        let rec = |id| SampleRecord {
            id,
            intrinsics: Default::default(),
            joints: crate::records::KeypointRecord::from_keypoints(id, &full(0.0)).joints,
            pelvis_depth_mm: 1500.0,
            seed: 0,
        };
        let gt = vec![rec(0), rec(1)];
        let gt_kp: Vec<KeypointRecord> = gt.iter().map(KeypointRecord::from).collect();
        let preds = gt_kp.clone();
        assert_eq!(match_by_id(&gt_kp, &preds).unwrap().len(), 2);
        assert!(matches!(match_by_id(&gt_kp, &preds[..1]), Err(EvalError::IdMismatch(_))));
        let mut extra = preds.clone();
        extra.push(KeypointRecord { id: 9, joints: vec![] });
        assert!(matches!(match_by_id(&gt_kp, &extra), Err(EvalError::IdMismatch(_))));
        let report = run_benchmark(&gt, |s| Ok(s.keypoints()), &PartConfig::ALL).unwrap();
        assert!(report.configs.iter().all(|c| c.gmpjpe_mm == Some(0.0)));
    }

    #[test]
    fn resolve_examples() {
        let reg = TaskRegistry::seeded();
        assert_eq!(reg.tasks.len(), 12);
        let r = resolve_task("Please shake hands with the visitor", &reg);
        assert_eq!(r.joints, PartConfig::RUpper.joints());
        assert!(!r.unresolved);
        let r = resolve_task("LIFT the person", &reg);
        assert_eq!(r.task_id.as_deref(), Some("wheelchair_lift"));
        let r = resolve_task("assist the person to stand from left", &reg);
        assert_eq!(r.joints, PartConfig::LUpper.joints());
        let r = resolve_task("anything", &TaskRegistry::empty());
        assert!(r.unresolved);
        assert_eq!(r.joints, Joint::ALL.to_vec());
        assert!(resolve_task("", &reg).unresolved);
    }

    #[test]
    fn longest_match_and_word_boundaries() {
        let reg = TaskRegistry::seeded();
        assert_eq!(resolve_task("help them put on shoes", &reg).task_id.as_deref(), Some("footwear"));
        assert_eq!(resolve_task("help them put on a coat", &reg).task_id.as_deref(), Some("dressing"));
        // "lift" must not match inside "liftoff", nor "hug" inside "hugely".
        assert!(resolve_task("liftoff hugely", &reg).unresolved);
        assert_eq!(resolve_task("give a high-five!", &reg).task_id.as_deref(), Some("high_five"));
        assert!(TaskSpec::new("x", &["Lift"], &[Joint::Nose]).is_err());
        assert!(TaskSpec::new("x", &["lift"], &[]).is_err());
    }

    proptest! {
        #[test]
        fn uniform_offset_scores_its_norm(tx in -200.0..200.0f64, ty in -200.0..200.0f64, tz in -200.0..200.0f64) {
            let gt = full(0.0);
            let pred = gt.translated([tx, ty, tz]);
            let norm = (tx * tx + ty * ty + tz * tz).sqrt();
            for c in PartConfig::ALL {
                let e = gmpjpe(&pred, &gt, c.joints()).unwrap();
                prop_assert!((e - norm).abs() <= 1e-9 * norm.max(1.0));
            }
        }

        #[test]
        fn upper_is_mean_of_members(noise in proptest::collection::vec(-50.0..50.0f64, 12)) {
            let gt = full(0.0);
            let mut pred = gt.clone();
            for (k, j) in PartConfig::Upper.joints().iter().enumerate() {
                let p = &mut pred.get_mut(*j).unwrap().position;
                p.x += noise[3 * k];
                p.y += noise[3 * k + 1];
                p.z += noise[3 * k + 2];
            }
            let members: Vec<f64> = PartConfig::Upper.joints().iter().map(|j| gmpjpe(&pred, &gt, &[*j]).unwrap()).collect();
            let e = gmpjpe(&pred, &gt, PartConfig::Upper.joints()).unwrap();
            prop_assert!((e - members.iter().sum::<f64>() / 4.0).abs() < 1e-12);
        }

        #[test]
        fn shuffle_leaves_report_identical(offsets in proptest::collection::vec((0.0..100.0f64, any::<bool>()), 1..12), rot in 0usize..12) {
            let pairs: Vec<_> = offsets.iter().map(|(o, hide)| {
                let mut gt = full(*o);
                if *hide {
                    gt.get_mut(Joint::LeftHip).unwrap().visible = false;
                }
                (gt.translated([*o, 1.0, -*o]), gt)
            }).collect();
            let mut shuffled = pairs.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            prop_assert_eq!(evaluate_pairs(&pairs, &PartConfig::ALL).unwrap(), evaluate_pairs(&shuffled, &PartConfig::ALL).unwrap());
        }
    }
}
