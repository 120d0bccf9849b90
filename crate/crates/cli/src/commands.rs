use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hrikit_core::align::{align_with_options, anchor_rms, apply_similarity, AlignOptions};
use hrikit_core::codec::{encode_voxel_clamped, parse_sequence_in_frame, serialize_sequence};
use hrikit_core::eval::{evaluate_pairs, match_by_id};
use hrikit_core::grpo::{train_toy, SyntheticLocalizationTask};
use hrikit_core::records::{to_jsonl, KeypointRecord, SampleRecord};
use hrikit_core::reward::pck;
use hrikit_core::synth::generate_dataset;
use hrikit_core::{
    aggregate_error, decode_voxel, encode_voxel, pose_reward, AnchorCorrespondence, CameraIntrinsics, EvalError,
    GrpoConfig, InteractionVolume, Joint, JointErrors, PartConfig, Point3Cam, RewardConfig, SynthConfig, VoxelToken,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io;
use crate::manifest::ManifestBuilder;

pub struct Context {
    pub intrinsics: Option<PathBuf>,
}

impl Context {
    fn intrinsics(&self) -> Result<Option<CameraIntrinsics>, CliError> {
        self.intrinsics.as_deref().map(io::read_json).transpose()
    }

    fn note_intrinsics(&self, m: &mut ManifestBuilder) {
        if let Some(p) = &self.intrinsics {
            m.input("intrinsics", p);
        }
    }
}

fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("'{p}' is not a valid number"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn point_arg(s: &str) -> Result<[f64; 3], String> {
    triple(s)
}

fn token_arg(s: &str) -> Result<[u32; 3], String> {
    triple(s)
}

fn load_volume(path: Option<&Path>, m: &mut ManifestBuilder) -> Result<InteractionVolume, CliError> {
    let vol = match path {
        Some(p) => {
            m.input("volume", p);
            io::read_json(p)?
        }
        None => InteractionVolume::default(),
    };
    m.config(&vol);
    Ok(vol)
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Interaction volume JSON; defaults to 4000x3000x4000 mm.
    #[arg(long)]
    volume: Option<PathBuf>,
    /// Point in mm as `x,y,z`.
    #[arg(long, value_parser = point_arg, allow_hyphen_values = true)]
    point: [f64; 3],
    /// Clamp points outside the volume instead of failing.
    #[arg(long)]
    clamp: bool,
    /// Where to write the run manifest (default: stderr).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn encode(ctx: &Context, a: EncodeArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("encode");
    ctx.note_intrinsics(&mut m);
    let vol = load_volume(a.volume.as_deref(), &mut m)?;
    let p = Point3Cam::from_array(a.point);
    let token = if a.clamp {
        let (t, clamped) = encode_voxel_clamped(&p, &vol);
        if clamped {
            eprintln!("note: point clamped into the volume");
        }
        t
    } else {
        encode_voxel(&p, &vol)?
    };
    let [x, y, z] = token.to_array();
    println!("{x},{y},{z}");
    m.summary(&token);
    m.emit(a.manifest.as_deref())
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    volume: Option<PathBuf>,
    /// Token as `X,Y,Z`, each in 0..=999.
    #[arg(long, value_parser = token_arg)]
    token: [u32; 3],
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn decode(ctx: &Context, a: DecodeArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("decode");
    ctx.note_intrinsics(&mut m);
    let vol = load_volume(a.volume.as_deref(), &mut m)?;
    let [x, y, z] = a.token;
    let p = decode_voxel(&VoxelToken::new(x, y, z)?, &vol)?;
    println!("x={:.3},y={:.3},z={:.3} mm", p.x, p.y, p.z);
    m.summary(&p);
    m.emit(a.manifest.as_deref())
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Prediction text, one `name: (u,v) -> [X,Y,Z]` record per line.
    #[arg(long = "in")]
    input: PathBuf,
    /// Diagnostics report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct ParseReport<'a> {
    records: &'a [hrikit_core::PredictionRecord],
    diagnostics: &'a [hrikit_core::codec::Diagnostic],
}

pub fn parse(ctx: &Context, a: ParseArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("parse");
    ctx.note_intrinsics(&mut m);
    m.input("in", &a.input);
    let frame = ctx.intrinsics()?;
    let bytes = io::read_bytes(&a.input)?;
    let text = String::from_utf8_lossy(&bytes);
    let parsed = match parse_sequence_in_frame(&text, frame.as_ref()) {
        Ok(p) => p,
        Err(hrikit_core::CodecError::EmptySequence(diags)) => {
            if let Some(r) = &a.report {
                io::write_json(r, &ParseReport { records: &[], diagnostics: &diags })?;
            }
            for d in &diags {
                eprintln!("line {}: {:?}: {}", d.line, d.kind, d.reason);
            }
            return Err(hrikit_core::CodecError::EmptySequence(diags).into());
        }
        Err(e) => return Err(e.into()),
    };
    for d in &parsed.diagnostics {
        eprintln!("line {}: {:?}: {}", d.line, d.kind, d.reason);
    }
    print!("{}", serialize_sequence(&parsed.sequence));
    let report = ParseReport { records: parsed.sequence.records(), diagnostics: &parsed.diagnostics };
    m.summary(&serde_json::json!({
        "records": parsed.sequence.len(),
        "diagnostics": parsed.diagnostics.len(),
    }));
    match &a.report {
        Some(r) => {
            io::write_json(r, &report)?;
            m.output("report", r);
            m.write_next_to(r)
        }
        None => m.emit(a.manifest.as_deref()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum Modality {
    #[value(name = "3d")]
    #[serde(rename = "3d")]
    ThreeD,
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// Predictions JSONL (dataset joint schema).
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth JSONL (dataset joint schema).
    #[arg(long)]
    gt: PathBuf,
    /// Reward config JSON {delta, kappa, tau, lambda}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Score 3D positions (mm) or 2D pixels.
    #[arg(long, value_enum, default_value = "3d")]
    modality: Modality,
    /// Per-sample rewards JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct RewardLine {
    id: u64,
    aggregate_error: f64,
    pck: f64,
    reward: f64,
}

fn errors_for(gt: &KeypointRecord, pred: &KeypointRecord, modality: Modality) -> Result<JointErrors, CliError> {
    let by_name: HashMap<Joint, _> = pred.joints.iter().map(|j| (j.name, j)).collect();
    let mut distances = Vec::with_capacity(gt.joints.len());
    let mut visible = Vec::with_capacity(gt.joints.len());
    for g in &gt.joints {
        let p = by_name.get(&g.name).ok_or(EvalError::MissingJoint(g.name))?;
        let (d, v) = match modality {
            Modality::ThreeD => (Point3Cam::from_array(p.xyz_mm).distance(&Point3Cam::from_array(g.xyz_mm)), g.visible),
            Modality::TwoD => match (g.uv_px, p.uv_px) {
                (Some(a), Some(b)) => ((a[0] - b[0]).hypot(a[1] - b[1]), g.visible),
                _ => (0.0, false),
            },
        };
        distances.push(d);
        visible.push(v);
    }
    Ok(JointErrors::new(distances, visible)?)
}

pub fn reward(ctx: &Context, a: RewardArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("reward");
    ctx.note_intrinsics(&mut m);
    m.input("pred", &a.pred).input("gt", &a.gt);
    let cfg = match &a.config {
        Some(p) => {
            m.input("config", p);
            io::read_json(p)?
        }
        None if a.modality == Modality::TwoD => RewardConfig::default_2d(),
        None => RewardConfig::default_3d(),
    };
    m.config(&serde_json::json!({ "reward": cfg, "modality": a.modality }));
    let gt: Vec<KeypointRecord> = io::read_jsonl(&a.gt)?;
    let preds: Vec<KeypointRecord> = io::read_jsonl(&a.pred)?;
    match_by_id(&gt, &preds)?;
    let by_id: HashMap<u64, &KeypointRecord> = preds.iter().map(|p| (p.id, p)).collect();

    let mut lines = Vec::with_capacity(gt.len());
    for g in &gt {
        let errs = errors_for(g, by_id[&g.id], a.modality)?;
        lines.push(RewardLine {
            id: g.id,
            aggregate_error: aggregate_error(&errs, cfg.delta)?,
            pck: pck(&errs, cfg.kappa)?,
            reward: pose_reward(&errs, &cfg)?,
        });
    }
    let mean = if lines.is_empty() {
        0.0
    } else {
        hrikit_core::numeric::exact_sum(lines.iter().map(|l| l.reward)) / lines.len() as f64
    };
    println!("samples={} mean_reward={mean:.6}", lines.len());
    m.summary(&serde_json::json!({ "samples": lines.len(), "mean_reward": mean }));
    match &a.out {
        Some(out) => {
            io::write_atomic(out, to_jsonl(&lines).as_bytes())?;
            m.output("out", out);
            m.write_next_to(out)
        }
        None => m.emit(a.manifest.as_deref()),
    }
}

#[derive(Debug, Args)]
pub struct GrpoTrainArgs {
    /// Task JSON {alphabet_size, contexts:[{joints:[{name, xyz_mm}]}], volume?, reward?}.
    #[arg(long)]
    task: PathBuf,
    /// Training config JSON {group_size, clip_epsilon, kl_beta, learning_rate, steps, seed}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Learning curve CSV.
    #[arg(long)]
    curve: PathBuf,
    /// Trained policy logits JSON.
    #[arg(long)]
    policy: Option<PathBuf>,
}

pub fn grpo_train(ctx: &Context, a: GrpoTrainArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("grpo-train");
    ctx.note_intrinsics(&mut m);
    m.input("task", &a.task);
    let task: SyntheticLocalizationTask = io::read_json(&a.task)?;
    let mut cfg = match &a.config {
        Some(p) => {
            m.input("config", p);
            io::read_json(p)?
        }
        None => GrpoConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    m.config(&cfg).seed(cfg.seed);
    let (policy, curve) = train_toy(&task, &cfg)?;
    io::write_atomic(&a.curve, curve.to_csv().as_bytes())?;
    m.output("curve", &a.curve);
    if let Some(p) = &a.policy {
        io::write_json(p, &policy)?;
        m.output("policy", p);
    }
    let greedy: Vec<f64> =
        (0..task.contexts.len()).map(|c| task.reward(c, &policy.greedy(c))).collect::<Result<_, _>>()?;
    let summary = if curve.is_empty() {
        serde_json::json!({ "steps": 0 })
    } else {
        let q: Vec<f64> = (0..4).map(|i| curve.quartile_mean(i)).collect();
        println!(
            "steps={} first_quartile={:.6} last_quartile={:.6} final_kl={:.6}",
            curve.len(),
            q[0],
            q[3],
            curve.points.last().map_or(0.0, |p| p.kl)
        );
        serde_json::json!({ "steps": curve.len(), "quartile_mean_reward": q, "greedy_reward": greedy })
    };
    m.summary(&summary);
    m.write_next_to(&a.curve)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of accepted samples.
    #[arg(long)]
    n: usize,
    /// Synthesis config JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Dataset JSONL.
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("synth");
    ctx.note_intrinsics(&mut m);
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => {
            m.input("config", p);
            io::read_json(p)?
        }
        None => SynthConfig::default(),
    };
    if let Some(k) = ctx.intrinsics()? {
        cfg.intrinsics = k;
    }
    m.config(&serde_json::json!({ "n": a.n, "synth": cfg })).seed(a.seed);
    let (records, stats) = generate_dataset(a.n, &cfg, a.seed)?;
    io::write_atomic(&a.out, to_jsonl(&records).as_bytes())?;
    m.output("out", &a.out);
    println!(
        "accepted={} attempted={} rejected_by_visibility={} rejected_by_filter={}",
        stats.accepted, stats.attempted, stats.rejected_by_visibility, stats.rejected_by_filter
    );
    m.summary(&stats);
    m.write_next_to(&a.out)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth dataset JSONL.
    #[arg(long)]
    data: PathBuf,
    /// Predictions JSONL keyed by sample id.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value = "upper,lower,l_upper,r_upper")]
    configs: String,
    /// Report JSON.
    #[arg(long)]
    report: PathBuf,
}

pub fn eval(ctx: &Context, a: EvalArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("eval");
    ctx.note_intrinsics(&mut m);
    m.input("data", &a.data).input("pred", &a.pred);
    let configs = PartConfig::parse_list(&a.configs)?;
    m.config(&serde_json::json!({ "configs": configs }));
    let data: Vec<SampleRecord> = io::read_jsonl(&a.data)?;
    let gt: Vec<KeypointRecord> = data.iter().map(KeypointRecord::from).collect();
    let preds: Vec<KeypointRecord> = io::read_jsonl(&a.pred)?;
    let pairs = match_by_id(&gt, &preds)?;
    let report = evaluate_pairs(&pairs, &configs)?;
    io::write_json(&a.report, &report)?;
    m.output("report", &a.report);
    for c in &report.configs {
        match c.gmpjpe_mm {
            Some(e) => println!("{:<8} {:>10.3} mm  samples={}", c.config.name(), e, c.samples_evaluated),
            None => println!("{:<8} {:>10}     samples=0", c.config.name(), "n/a"),
        }
    }
    m.write_next_to(&a.report)
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AnchorEntry {
    name: Joint,
    source: [f64; 3],
    target: [f64; 3],
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AnchorsFile {
    anchors: Vec<AnchorEntry>,
    #[serde(default)]
    allow_scale: bool,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Anchors JSON {anchors:[{name, source:[x,y,z], target:[x,y,z]}], allow_scale?}.
    #[arg(long)]
    anchors: PathBuf,
    /// Root-relative poses JSONL.
    #[arg(long)]
    pose: PathBuf,
    /// Aligned poses JSONL.
    #[arg(long)]
    out: PathBuf,
}

pub fn align(ctx: &Context, a: AlignArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("align");
    ctx.note_intrinsics(&mut m);
    m.input("anchors", &a.anchors).input("pose", &a.pose);
    let file: AnchorsFile = io::read_json(&a.anchors)?;
    m.config(&file);
    let corr = AnchorCorrespondence::new(
        file.anchors.iter().map(|e| e.name).collect(),
        file.anchors.iter().map(|e| Point3Cam::from_array(e.source)).collect(),
        file.anchors.iter().map(|e| Point3Cam::from_array(e.target)).collect(),
    )?;
    let t = align_with_options(&corr, &AlignOptions { allow_scale: file.allow_scale })?;
    let poses: Vec<KeypointRecord> = io::read_jsonl(&a.pose)?;
    let aligned: Vec<KeypointRecord> = poses
        .iter()
        .map(|p| KeypointRecord::from_keypoints(p.id, &apply_similarity(&t, &p.keypoints())))
        .collect();
    io::write_atomic(&a.out, to_jsonl(&aligned).as_bytes())?;
    m.output("out", &a.out);
    let rms = anchor_rms(&t, &corr);
    let tr = t.rigid.translation();
    println!("anchors={} scale={} rms_mm={rms:.6} t=[{:.3},{:.3},{:.3}]", corr.len(), t.scale, tr.x, tr.y, tr.z);
    m.summary(&serde_json::json!({
        "anchors": corr.len(),
        "rotation": t.rigid.rows(),
        "translation_mm": [tr.x, tr.y, tr.z],
        "scale": t.scale,
        "anchor_rms_mm": rms,
    }));
    m.write_next_to(&a.out)
}
