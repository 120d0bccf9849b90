//! Voxel tokenization of the interaction volume and the text format of a
//! keypoint prediction.
//!
//! A point is tokenized relative to the volume's minimum corner:
//!
//! ```text
//! X = floor((x - x0) / W * 1000)      (same for Y with H, Z with D)
//! ```
//!
//! giving indices in `0..=999`. Decoding returns the voxel center, so the
//! round-trip error per axis is at most `extent / 2000`.
//!
//! A prediction is one line per joint, 2D pixel first, then the voxel token:
//!
//! ```text
//! left_wrist: (320,180) -> [500,250,125]
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Pixel, Point3Cam};
use crate::joints::Joint;

/// Number of voxel bins per axis.
pub const BINS: u32 = 1000;
pub const MAX_INDEX: u16 = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("coordinate outside the interaction volume on axis {0}")]
    OutOfVolume(Axis),
    #[error("voxel index {value} on axis {axis} is outside 0..=999")]
    TokenOutOfRange { axis: Axis, value: u32 },
    #[error("invalid interaction volume: {0}")]
    InvalidVolume(String),
    #[error("invalid prediction sequence: {0}")]
    InvalidSequence(String),
    #[error("no line of the input parsed as a prediction record ({} diagnostics)", .0.len())]
    EmptySequence(Vec<Diagnostic>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVolume {
    width_mm: f64,
    height_mm: f64,
    depth_mm: f64,
    origin_mm: [f64; 3],
}

/// The `W x H x D` cuboid (mm) that the 0-999 grid spans, placed in the
/// camera frame by the position of its minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVolume")]
pub struct InteractionVolume {
    pub width_mm: f64,
    pub height_mm: f64,
    pub depth_mm: f64,
    pub origin_mm: [f64; 3],
}

impl TryFrom<RawVolume> for InteractionVolume {
    type Error = CodecError;

    fn try_from(r: RawVolume) -> Result<Self, Self::Error> {
        InteractionVolume::new(r.width_mm, r.height_mm, r.depth_mm, r.origin_mm)
    }
}

impl Default for InteractionVolume {
    /// 4 m x 3 m x 4 m in front of the camera, centered on the optical axis.
    fn default() -> Self {
        Self { width_mm: 4000.0, height_mm: 3000.0, depth_mm: 4000.0, origin_mm: [-2000.0, -1500.0, 0.0] }
    }
}

impl InteractionVolume {
    pub fn new(width_mm: f64, height_mm: f64, depth_mm: f64, origin_mm: [f64; 3]) -> Result<Self, CodecError> {
        for (name, v) in [("width_mm", width_mm), ("height_mm", height_mm), ("depth_mm", depth_mm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CodecError::InvalidVolume(format!("{name} must be positive, got {v}")));
            }
        }
        if origin_mm.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::InvalidVolume("origin must be finite".into()));
        }
        Ok(Self { width_mm, height_mm, depth_mm, origin_mm })
    }

    pub fn extents(&self) -> [f64; 3] {
        [self.width_mm, self.height_mm, self.depth_mm]
    }

    pub fn contains(&self, p: &Point3Cam) -> bool {
        let e = self.extents();
        p.to_array()
            .iter()
            .zip(self.origin_mm)
            .zip(e)
            .all(|((&c, o), ext)| c - o >= 0.0 && c - o < ext)
    }
}

/// Discretized position `(X, Y, Z)`, each in `0..=999`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelToken {
    pub x: u16,
    pub y: u16,
    pub z: u16,
}

impl VoxelToken {
    pub fn new(x: u32, y: u32, z: u32) -> Result<Self, CodecError> {
        for (axis, value) in [(Axis::X, x), (Axis::Y, y), (Axis::Z, z)] {
            if value > u32::from(MAX_INDEX) {
                return Err(CodecError::TokenOutOfRange { axis, value });
            }
        }
        Ok(Self { x: x as u16, y: y as u16, z: z as u16 })
    }

    pub fn to_array(self) -> [u16; 3] {
        [self.x, self.y, self.z]
    }
}

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

fn axis_index(local: f64, extent: f64) -> f64 {
    (local / extent * f64::from(BINS)).floor()
}

/// Tokenizes `p`; fails with [`CodecError::OutOfVolume`] for points outside
/// the half-open volume.
pub fn encode_voxel(p: &Point3Cam, vol: &InteractionVolume) -> Result<VoxelToken, CodecError> {
    let mut idx = [0u16; 3];
    for (i, ((c, o), ext)) in p.to_array().into_iter().zip(vol.origin_mm).zip(vol.extents()).enumerate() {
        let local = c - o;
        if !(local >= 0.0 && local < ext) {
            return Err(CodecError::OutOfVolume(AXES[i]));
        }
        // local < ext can still round to exactly 1000 after the division.
        idx[i] = axis_index(local, ext).min(f64::from(MAX_INDEX)) as u16;
    }
    Ok(VoxelToken { x: idx[0], y: idx[1], z: idx[2] })
}

/// Tokenizes `p`, clamping out-of-volume coordinates to the nearest valid
/// index. The flag reports whether any axis was clamped.
pub fn encode_voxel_clamped(p: &Point3Cam, vol: &InteractionVolume) -> (VoxelToken, bool) {
    let mut idx = [0u16; 3];
    let mut clamped = false;
    for (i, ((c, o), ext)) in p.to_array().into_iter().zip(vol.origin_mm).zip(vol.extents()).enumerate() {
        let local = c - o;
        if !(local >= 0.0 && local < ext) {
            clamped = true;
        }
        let raw = axis_index(local, ext);
        idx[i] = if raw.is_nan() || raw < 0.0 { 0 } else { raw.min(f64::from(MAX_INDEX)) as u16 };
    }
    (VoxelToken { x: idx[0], y: idx[1], z: idx[2] }, clamped)
}

/// Center of the voxel addressed by `t`.
pub fn decode_voxel(t: &VoxelToken, vol: &InteractionVolume) -> Result<Point3Cam, CodecError> {
    let mut out = [0.0; 3];
    for (i, ((index, o), ext)) in t.to_array().into_iter().zip(vol.origin_mm).zip(vol.extents()).enumerate() {
        if index > MAX_INDEX {
            return Err(CodecError::TokenOutOfRange { axis: AXES[i], value: u32::from(index) });
        }
        out[i] = (f64::from(index) + 0.5) / f64::from(BINS) * ext + o;
    }
    Ok(Point3Cam::from_array(out))
}

/// Integer pixel location as emitted in a prediction line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelIndex {
    pub u: i64,
    pub v: i64,
}

impl PixelIndex {
    /// Rounds half away from zero.
    pub fn from_pixel(px: &Pixel) -> Self {
        Self { u: px.u.round() as i64, v: px.v.round() as i64 }
    }

    pub fn in_frame(&self, k: &CameraIntrinsics) -> bool {
        self.u >= 0 && self.v >= 0 && self.u < i64::from(k.width) && self.v < i64::from(k.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub joint: Joint,
    pub pixel: PixelIndex,
    pub voxel: VoxelToken,
}

/// Ordered prediction records with unique joint names, 1 to 17 of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionSequence {
    records: Vec<PredictionRecord>,
}

impl PredictionSequence {
    pub fn new(records: Vec<PredictionRecord>) -> Result<Self, CodecError> {
        if records.is_empty() || records.len() > Joint::COUNT {
            return Err(CodecError::InvalidSequence(format!(
                "expected 1..={} records, got {}",
                Joint::COUNT,
                records.len()
            )));
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.joint) {
                return Err(CodecError::InvalidSequence(format!("duplicate joint {}", r.joint)));
            }
            VoxelToken::new(r.voxel.x.into(), r.voxel.y.into(), r.voxel.z.into())?;
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, joint: Joint) -> Option<&PredictionRecord> {
        self.records.iter().find(|r| r.joint == joint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// The line does not follow the record grammar.
    Malformed,
    UnknownJoint,
    TokenOutOfRange,
    DuplicateJoint,
    /// The record was kept but its pixel lies outside the image.
    OutOfFrame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub kind: DiagnosticKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedSequence {
    pub sequence: PredictionSequence,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn format_record(r: &PredictionRecord) -> String {
    format!(
        "{}: ({},{}) -> [{},{},{}]",
        r.joint, r.pixel.u, r.pixel.v, r.voxel.x, r.voxel.y, r.voxel.z
    )
}

/// One newline-terminated line per record, in order.
pub fn serialize_sequence(seq: &PredictionSequence) -> String {
    let mut out = String::new();
    for r in seq.records() {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

/// Parses prediction text, skipping (and reporting) every line that does not
/// follow the grammar. Empty lines are ignored silently.
pub fn parse_sequence(text: &str) -> Result<ParsedSequence, CodecError> {
    parse_sequence_in_frame(text, None)
}

/// Lossy UTF-8 front end for [`parse_sequence`]; never panics.
pub fn parse_sequence_bytes(bytes: &[u8]) -> Result<ParsedSequence, CodecError> {
    parse_sequence(&String::from_utf8_lossy(bytes))
}

/// As [`parse_sequence`], additionally flagging pixels outside `frame`.
pub fn parse_sequence_in_frame(text: &str, frame: Option<&CameraIntrinsics>) -> Result<ParsedSequence, CodecError> {
    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(rec) => {
                if records.iter().any(|r| r.joint == rec.joint) {
                    diagnostics.push(Diagnostic {
                        line: line_no,
                        kind: DiagnosticKind::DuplicateJoint,
                        reason: format!("duplicate joint {}, keeping the first occurrence", rec.joint),
                    });
                    continue;
                }
                if let Some(k) = frame {
                    if !rec.pixel.in_frame(k) {
                        diagnostics.push(Diagnostic {
                            line: line_no,
                            kind: DiagnosticKind::OutOfFrame,
                            reason: format!("pixel ({},{}) outside {}x{} image", rec.pixel.u, rec.pixel.v, k.width, k.height),
                        });
                    }
                }
                records.push(rec);
            }
            Err((kind, reason)) => diagnostics.push(Diagnostic { line: line_no, kind, reason }),
        }
    }
    if records.is_empty() {
        return Err(CodecError::EmptySequence(diagnostics));
    }
    Ok(ParsedSequence { sequence: PredictionSequence { records }, diagnostics })
}

type LineError = (DiagnosticKind, String);

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn expect(&mut self, lit: &str) -> Result<(), LineError> {
        match self.rest.strip_prefix(lit) {
            Some(r) => {
                self.rest = r;
                Ok(())
            }
            None => Err(malformed(format!("expected {lit:?}"))),
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let end = self.rest.find(|c: char| !pred(c)).unwrap_or(self.rest.len());
        let (head, tail) = self.rest.split_at(end);
        self.rest = tail;
        head
    }

    fn signed_int(&mut self, what: &str) -> Result<i64, LineError> {
        let neg = self.rest.starts_with('-');
        if neg {
            self.rest = &self.rest[1..];
        }
        let digits = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return Err(malformed(format!("expected integer {what}")));
        }
        let v: i64 = digits.parse().map_err(|_| malformed(format!("{what} does not fit in 64 bits")))?;
        Ok(if neg { -v } else { v })
    }

    fn token_index(&mut self, axis: Axis) -> Result<u16, LineError> {
        let digits = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return Err(malformed(format!("expected integer {axis} index")));
        }
        match digits.parse::<u32>() {
            Ok(v) if v <= u32::from(MAX_INDEX) => Ok(v as u16),
            _ => Err((DiagnosticKind::TokenOutOfRange, format!("{axis} out of range"))),
        }
    }
}

fn malformed(reason: String) -> LineError {
    (DiagnosticKind::Malformed, reason)
}

fn parse_line(line: &str) -> Result<PredictionRecord, LineError> {
    let mut c = Cursor { rest: line };
    let name = c.take_while(|ch| ch.is_ascii_lowercase() || ch == '_');
    if name.is_empty() {
        return Err(malformed("expected a lowercase joint name".into()));
    }
    c.expect(": (")?;
    let u = c.signed_int("u")?;
    c.expect(",")?;
    let v = c.signed_int("v")?;
    c.expect(") -> [")?;
    let x = c.token_index(Axis::X)?;
    c.expect(",")?;
    let y = c.token_index(Axis::Y)?;
    c.expect(",")?;
    let z = c.token_index(Axis::Z)?;
    c.expect("]")?;
    if !c.rest.is_empty() {
        return Err(malformed("trailing characters after record".into()));
    }
    let joint = name
        .parse::<Joint>()
        .map_err(|_| (DiagnosticKind::UnknownJoint, format!("unknown joint {name:?}")))?;
    Ok(PredictionRecord { joint, pixel: PixelIndex { u, v }, voxel: VoxelToken { x, y, z } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol4k() -> InteractionVolume {
        InteractionVolume::new(4000.0, 4000.0, 4000.0, [0.0; 3]).unwrap()
    }

    #[test]
    fn encode_examples() {
        let v = vol4k();
        assert_eq!(encode_voxel(&Point3Cam::new(2000.0, 0.0, 0.0), &v).unwrap().x, 500);
        assert_eq!(encode_voxel(&Point3Cam::new(0.0, 0.0, 0.0), &v).unwrap(), VoxelToken { x: 0, y: 0, z: 0 });
        assert_eq!(
            encode_voxel(&Point3Cam::new(0.0, 0.0, 4000.0), &v),
            Err(CodecError::OutOfVolume(Axis::Z))
        );
        assert_eq!(encode_voxel(&Point3Cam::new(3999.0, 0.0, 0.0), &v).unwrap().x, 999);
        assert_eq!(
            encode_voxel(&Point3Cam::new(-0.001, 0.0, 0.0), &v),
            Err(CodecError::OutOfVolume(Axis::X))
        );
    }

    #[test]
    fn max_index_over_millimeter_grid() {
        // Brute force over every whole millimeter of a 4 m axis.
        let v = vol4k();
        let mut max = 0;
        for mm in 0..4000 {
            let t = encode_voxel(&Point3Cam::new(f64::from(mm), 0.0, 0.0), &v).unwrap();
            max = max.max(t.x);
        }
        assert_eq!(max, 999);
    }

    #[test]
    fn clamping() {
        let v = vol4k();
        let (t, clamped) = encode_voxel_clamped(&Point3Cam::new(-10.0, 5000.0, 2000.0), &v);
        assert!(clamped);
        assert_eq!(t, VoxelToken { x: 0, y: 999, z: 500 });
        let (t, clamped) = encode_voxel_clamped(&Point3Cam::new(10.0, 10.0, 10.0), &v);
        assert!(!clamped);
        assert_eq!(t, encode_voxel(&Point3Cam::new(10.0, 10.0, 10.0), &v).unwrap());
    }

    #[test]
    fn decode_examples() {
        let v = vol4k();
        let p = decode_voxel(&VoxelToken { x: 500, y: 0, z: 0 }, &v).unwrap();
        assert!((p.x - 2002.0).abs() < 1e-9);
        assert_eq!(encode_voxel(&Point3Cam::new(2002.0, 0.0, 0.0), &v).unwrap().x, 500);
        let unit = InteractionVolume::new(1000.0, 1000.0, 1000.0, [0.0; 3]).unwrap();
        assert_eq!(decode_voxel(&VoxelToken { x: 0, y: 0, z: 0 }, &unit).unwrap(), Point3Cam::new(0.5, 0.5, 0.5));
        assert_eq!(
            decode_voxel(&VoxelToken { x: 1000, y: 0, z: 0 }, &v),
            Err(CodecError::TokenOutOfRange { axis: Axis::X, value: 1000 })
        );
        assert!(VoxelToken::new(0, 0, 1000).is_err());
    }

    #[test]
    fn volume_json_is_strict() {
        let ok = r#"{"width_mm":4000,"height_mm":3000,"depth_mm":4000,"origin_mm":[-2000,-1500,0]}"#;
        assert_eq!(serde_json::from_str::<InteractionVolume>(ok).unwrap(), InteractionVolume::default());
        assert!(serde_json::from_str::<InteractionVolume>(&ok.replace("}", r#","extra":1}"#)).is_err());
        assert!(serde_json::from_str::<InteractionVolume>(&ok.replace("4000,\"h", "0,\"h")).is_err());
    }

    fn rec(joint: Joint, u: i64, v: i64, t: [u16; 3]) -> PredictionRecord {
        PredictionRecord { joint, pixel: PixelIndex { u, v }, voxel: VoxelToken { x: t[0], y: t[1], z: t[2] } }
    }

    #[test]
    fn serialize_examples() {
        let s = PredictionSequence::new(vec![rec(Joint::LeftWrist, 320, 180, [500, 250, 125])]).unwrap();
        assert_eq!(serialize_sequence(&s), "left_wrist: (320,180) -> [500,250,125]\n");
        let two = PredictionSequence::new(vec![
            rec(Joint::RightElbow, 1, 2, [3, 4, 5]),
            rec(Joint::Nose, -7, 800, [0, 999, 10]),
        ])
        .unwrap();
        assert_eq!(
            serialize_sequence(&two),
            "right_elbow: (1,2) -> [3,4,5]\nnose: (-7,800) -> [0,999,10]\n"
        );
        assert!(PredictionSequence::new(vec![]).is_err());
        assert!(PredictionSequence::new(vec![rec(Joint::Nose, 0, 0, [0; 3]), rec(Joint::Nose, 1, 1, [1; 3])]).is_err());
    }

    #[test]
    fn pixel_rounding_half_away_from_zero() {
        assert_eq!(PixelIndex::from_pixel(&Pixel::new(2.5, -2.5)), PixelIndex { u: 3, v: -3 });
        assert_eq!(PixelIndex::from_pixel(&Pixel::new(2.49, -2.51)), PixelIndex { u: 2, v: -3 });
    }

    #[test]
    fn parse_reports_and_skips() {
        let text = "left_wrist: (320,180) -> [500,250,1250]\n\
                    right_wrist: (1,2) -> [3,4,5]\n\
                    right_wrist: (9,9) -> [9,9,9]\n\
                    pelvis: (1,2) -> [3,4,5]\n\
                    nose: (1,2) -> [3,4,5] \n\
                    garbage";
        let parsed = parse_sequence(text).unwrap();
        assert_eq!(parsed.sequence.records(), &[rec(Joint::RightWrist, 1, 2, [3, 4, 5])]);
        let kinds: Vec<_> = parsed.diagnostics.iter().map(|d| (d.line, d.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (1, DiagnosticKind::TokenOutOfRange),
                (3, DiagnosticKind::DuplicateJoint),
                (4, DiagnosticKind::UnknownJoint),
                (5, DiagnosticKind::Malformed),
                (6, DiagnosticKind::Malformed),
            ]
        );
        assert_eq!(parsed.diagnostics[0].reason, "Z out of range");
    }

    #[test]
    fn parse_garbage_is_empty_sequence() {
        assert!(matches!(parse_sequence("hello\nworld"), Err(CodecError::EmptySequence(d)) if d.len() == 2));
        assert!(matches!(parse_sequence(""), Err(CodecError::EmptySequence(d)) if d.is_empty()));
    }

    #[test]
    fn parse_flags_out_of_frame() {
        let k = CameraIntrinsics::default();
        let p = parse_sequence_in_frame("nose: (1280,10) -> [1,2,3]\n", Some(&k)).unwrap();
        assert_eq!(p.sequence.len(), 1);
        assert_eq!(p.diagnostics[0].kind, DiagnosticKind::OutOfFrame);
    }

    fn sequence() -> impl Strategy<Value = PredictionSequence> {
        proptest::sample::subsequence(Joint::ALL.to_vec(), 1..=Joint::COUNT)
            .prop_flat_map(|joints| {
                let n = joints.len();
                (
                    Just(joints).prop_shuffle(),
                    proptest::collection::vec((-5000i64..5000, -5000i64..5000, 0u16..1000, 0u16..1000, 0u16..1000), n),
                )
            })
            .prop_map(|(joints, vals)| {
                let recs = joints
                    .into_iter()
                    .zip(vals)
                    .map(|(j, (u, v, x, y, z))| rec(j, u, v, [x, y, z]))
                    .collect();
                PredictionSequence::new(recs).unwrap()
            })
    }

    proptest! {
        #[test]
        fn round_trip(seq in sequence()) {
            let parsed = parse_sequence(&serialize_sequence(&seq)).unwrap();
            prop_assert_eq!(parsed.sequence, seq);
            prop_assert!(parsed.diagnostics.is_empty());
        }

        #[test]
        fn parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_sequence_bytes(&bytes);
        }

        #[test]
        fn encode_is_monotone(a in 0.0..4000.0f64, b in 0.0..4000.0f64) {
            let v = vol4k();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let tl = encode_voxel(&Point3Cam::new(lo, lo, lo), &v).unwrap();
            let th = encode_voxel(&Point3Cam::new(hi, hi, hi), &v).unwrap();
            prop_assert!(tl.x <= th.x && tl.y <= th.y && tl.z <= th.z);
        }

        #[test]
        fn tokens_are_idempotent(x in 0u16..1000, y in 0u16..1000, z in 0u16..1000) {
            let v = InteractionVolume::default();
            let t = VoxelToken { x, y, z };
            prop_assert_eq!(encode_voxel(&decode_voxel(&t, &v).unwrap(), &v).unwrap(), t);
        }
    }
}
