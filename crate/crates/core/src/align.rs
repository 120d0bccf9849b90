//! Rigid placement of a root-relative skeleton from 1, 2 or 3+ anchor
//! keypoints predicted in the camera frame.
//!
//! - one anchor: translation only;
//! - two anchors: midpoint translation plus the smallest rotation taking the
//!   source segment onto the target segment (roll about the segment is left
//!   at zero);
//! - three or more: least-squares rotation and translation via SVD.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Point3Cam;
use crate::joints::{Joint, KeypointSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("too few anchors: got {got}, need at least {need}")]
    TooFewAnchors { got: usize, need: usize },
    #[error("anchors are collinear")]
    CollinearAnchors,
    #[error("the two anchors coincide")]
    CoincidentPair,
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
    #[error("not a rotation: {0}")]
    InvalidRotation(String),
}

/// `p' = R p + t`, with `t` in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self { rotation: Rotation3::identity(), translation: t }
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    /// Checks `RᵀR = I` and `det R = 1` within `1e-9`.
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, AlignError> {
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if !(ortho <= 1e-9) || !((det - 1.0).abs() <= 1e-9) || !t.iter().all(|v| v.is_finite()) {
            return Err(AlignError::InvalidRotation(format!("orthogonality defect {ortho:e}, det {det}")));
        }
        Ok(Self { rotation: Rotation3::from_matrix_unchecked(r), translation: t })
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3Cam) -> Point3Cam {
        (self.rotation * Vector3::from(*p) + self.translation).into()
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self { rotation: r, translation: -(r * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Angle in radians of the relative rotation between the two transforms.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        self.rotation.rotation_to(&other.rotation).angle()
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = self.rotation.matrix();
        [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
    }
}

/// Similarity transform `p' = s R p + t`; only produced when scale is
/// enabled explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rigid: RigidTransform,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &Point3Cam) -> Point3Cam {
        (self.scale * (self.rigid.rotation * Vector3::from(*p)) + self.rigid.translation).into()
    }
}

/// Name-matched anchor pairs: `source` in the root-relative frame, `target`
/// in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCorrespondence {
    names: Vec<Joint>,
    source: Vec<Point3Cam>,
    target: Vec<Point3Cam>,
}

impl AnchorCorrespondence {
    pub fn new(names: Vec<Joint>, source: Vec<Point3Cam>, target: Vec<Point3Cam>) -> Result<Self, AlignError> {
        if names.len() != source.len() || names.len() != target.len() {
            return Err(AlignError::InvalidCorrespondence(format!(
                "{} names, {} source points, {} target points",
                names.len(),
                source.len(),
                target.len()
            )));
        }
        if names.is_empty() {
            return Err(AlignError::TooFewAnchors { got: 0, need: 1 });
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AlignError::InvalidCorrespondence(format!("anchor {n} listed twice")));
            }
        }
        if !source.iter().chain(&target).all(Point3Cam::is_finite) {
            return Err(AlignError::InvalidCorrespondence("non-finite coordinate".into()));
        }
        Ok(Self { names, source, target })
    }

    /// Pairs the named joints of two keypoint sets.
    pub fn from_sets(names: &[Joint], source: &KeypointSet, target: &KeypointSet) -> Result<Self, AlignError> {
        let pick = |set: &KeypointSet, side: &str| -> Result<Vec<Point3Cam>, AlignError> {
            names
                .iter()
                .map(|j| {
                    set.get(*j)
                        .map(|s| s.position)
                        .ok_or_else(|| AlignError::InvalidCorrespondence(format!("{side} lacks anchor {j}")))
                })
                .collect()
        };
        Self::new(names.to_vec(), pick(source, "source")?, pick(target, "target")?)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[Joint] {
        &self.names
    }

    pub fn source(&self) -> &[Point3Cam] {
        &self.source
    }

    pub fn target(&self) -> &[Point3Cam] {
        &self.target
    }

    fn vectors(&self) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        (
            self.source.iter().map(|p| Vector3::from(*p)).collect(),
            self.target.iter().map(|p| Vector3::from(*p)).collect(),
        )
    }
}

fn centroid(ps: &[Vector3<f64>]) -> Vector3<f64> {
    ps.iter().fold(Vector3::zeros(), |a, p| a + p) / ps.len() as f64
}

/// Anchors count as collinear when the second principal variance of the
/// centered source falls below this fraction of the first.
const COLLINEAR_TOL: f64 = 1e-12;

struct Fit {
    rotation: Rotation3<f64>,
    src_c: Vector3<f64>,
    dst_c: Vector3<f64>,
    singular_sum: f64,
    src_var: f64,
}

fn fit_rotation(corr: &AnchorCorrespondence) -> Result<Fit, AlignError> {
    if corr.len() < 3 {
        return Err(AlignError::TooFewAnchors { got: corr.len(), need: 3 });
    }
    let (src, dst) = corr.vectors();
    let (src_c, dst_c) = (centroid(&src), centroid(&dst));

    let mut spread = Matrix3::zeros();
    let mut h = Matrix3::zeros();
    let mut src_var = 0.0;
    for (s, d) in src.iter().zip(&dst) {
        let (a, b) = (s - src_c, d - dst_c);
        spread += a * a.transpose();
        h += a * b.transpose();
        src_var += a.norm_squared();
    }
    let sv = spread.symmetric_eigenvalues();
    let mut ev = [sv[0], sv[1], sv[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= COLLINEAR_TOL * ev[0] {
        return Err(AlignError::CollinearAnchors);
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = v * fix * u.transpose();
    let singular_sum = svd.singular_values[0] + svd.singular_values[1] + d * svd.singular_values[2];
    Ok(Fit { rotation: Rotation3::from_matrix(&r), src_c, dst_c, singular_sum, src_var })
}

/// Least-squares rigid transform (no scale) for 3+ non-collinear anchors.
pub fn kabsch(corr: &AnchorCorrespondence) -> Result<RigidTransform, AlignError> {
    let f = fit_rotation(corr)?;
    Ok(RigidTransform { rotation: f.rotation, translation: f.dst_c - f.rotation * f.src_c })
}

/// Least-squares similarity transform for 3+ non-collinear anchors.
pub fn umeyama(corr: &AnchorCorrespondence) -> Result<SimilarityTransform, AlignError> {
    let f = fit_rotation(corr)?;
    let scale = f.singular_sum / f.src_var;
    Ok(SimilarityTransform {
        scale,
        rigid: RigidTransform { rotation: f.rotation, translation: f.dst_c - scale * (f.rotation * f.src_c) },
    })
}

/// Smallest rotation taking direction `a` onto direction `b`.
fn minimal_rotation(a: &Vector3<f64>, b: &Vector3<f64>) -> Rotation3<f64> {
    let (a, b) = (a.normalize(), b.normalize());
    let cross = a.cross(&b);
    let sin = cross.norm();
    let cos = a.dot(&b);
    if sin == 0.0 && cos > 0.0 {
        return Rotation3::identity();
    }
    if sin <= 1e-12 && cos < 0.0 {
        // Antiparallel: half turn about any axis perpendicular to `a`.
        let min_axis = (0..3).min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
        let axis = a.cross(&Vector3::ith(min_axis, 1.0));
        return Rotation3::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI);
    }
    Rotation3::from_axis_angle(&Unit::new_normalize(cross), sin.atan2(cos))
}

/// Chooses the estimator by anchor count.
pub fn align_with_anchors(corr: &AnchorCorrespondence) -> Result<RigidTransform, AlignError> {
    let (src, dst) = corr.vectors();
    match src.len() {
        0 => Err(AlignError::TooFewAnchors { got: 0, need: 1 }),
        1 => Ok(RigidTransform::from_translation(dst[0] - src[0])),
        2 => {
            let (a, b) = (src[1] - src[0], dst[1] - dst[0]);
            if a.norm() == 0.0 || b.norm() == 0.0 {
                return Err(AlignError::CoincidentPair);
            }
            let r = minimal_rotation(&a, &b);
            let mid_s = (src[0] + src[1]) / 2.0;
            let mid_d = (dst[0] + dst[1]) / 2.0;
            Ok(RigidTransform { rotation: r, translation: mid_d - r * mid_s })
        }
        _ => kabsch(corr),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignOptions {
    /// Fit a uniform scale as well (3+ anchors only). Off by default.
    pub allow_scale: bool,
}

/// [`align_with_anchors`], or a similarity fit when scale is enabled and
/// there are at least three anchors.
pub fn align_with_options(corr: &AnchorCorrespondence, opts: &AlignOptions) -> Result<SimilarityTransform, AlignError> {
    if opts.allow_scale && corr.len() >= 3 {
        umeyama(corr)
    } else {
        Ok(SimilarityTransform { scale: 1.0, rigid: align_with_anchors(corr)? })
    }
}

/// Root-mean-square anchor distance after the transform.
pub fn anchor_rms(t: &SimilarityTransform, corr: &AnchorCorrespondence) -> f64 {
    let sq: f64 = corr
        .source
        .iter()
        .zip(&corr.target)
        .map(|(s, d)| {
            let p = t.apply(s);
            let e = p.distance(d);
            e * e
        })
        .sum();
    (sq / corr.len() as f64).sqrt()
}

pub fn apply_transform(t: &RigidTransform, points: &KeypointSet) -> KeypointSet {
    let mut out = points.clone();
    for (_, s) in out.iter_mut() {
        s.position = t.apply(&s.position);
    }
    out
}

pub fn apply_similarity(t: &SimilarityTransform, points: &KeypointSet) -> KeypointSet {
    let mut out = points.clone();
    for (_, s) in out.iter_mut() {
        s.position = t.apply(&s.position);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point3Cam {
        Point3Cam::new(x, y, z)
    }

    fn corr(src: Vec<Point3Cam>, dst: Vec<Point3Cam>) -> AnchorCorrespondence {
        let names = Joint::ALL[..src.len()].to_vec();
        AnchorCorrespondence::new(names, src, dst).unwrap()
    }

    fn rot(ax: [f64; 3], angle: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(ax)), angle)
    }

    fn residual(t: &RigidTransform, c: &AnchorCorrespondence) -> f64 {
        c.source().iter().zip(c.target()).map(|(s, d)| t.apply(s).distance(d).powi(2)).sum()
    }

    fn src5() -> Vec<Point3Cam> {
        vec![p(0.0, 0.0, 0.0), p(100.0, 0.0, 0.0), p(0.0, 200.0, 0.0), p(30.0, -40.0, 90.0), p(-70.0, 10.0, 25.0)]
    }

    #[test]
    fn kabsch_examples() {
        let s = src5();
        let id = kabsch(&corr(s.clone(), s.clone())).unwrap();
        assert!(id.rotation_error(&RigidTransform::identity()) < 1e-12);
        assert!(id.translation().norm() < 1e-9);

        let moved: Vec<_> = s.iter().map(|q| p(q.x + 100.0, q.y, q.z)).collect();
        let t = kabsch(&corr(s.clone(), moved)).unwrap();
        assert!(t.rotation_error(&RigidTransform::identity()) < 1e-12);
        assert!((t.translation() - Vector3::new(100.0, 0.0, 0.0)).norm() < 1e-9);

        let gen = RigidTransform::from_parts(rot([0.3, -1.0, 0.5], 2.1), Vector3::new(-40.0, 300.0, 1800.0));
        let dst: Vec<_> = s.iter().map(|q| gen.apply(q)).collect();
        let got = kabsch(&corr(s, dst)).unwrap();
        assert!(got.rotation_error(&gen) < 1e-6);
        assert!((got.translation() - gen.translation()).norm() < 1e-6);
    }

    #[test]
    fn kabsch_degenerate_inputs() {
        let line = vec![p(0.0, 0.0, 0.0), p(1.0, 1.0, 1.0), p(5.0, 5.0, 5.0), p(-2.0, -2.0, -2.0)];
        assert_eq!(kabsch(&corr(line.clone(), line)), Err(AlignError::CollinearAnchors));
        let same = vec![p(1.0, 2.0, 3.0); 3];
        assert_eq!(kabsch(&corr(same.clone(), same)), Err(AlignError::CollinearAnchors));
        let two = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)];
        assert_eq!(kabsch(&corr(two.clone(), two)), Err(AlignError::TooFewAnchors { got: 2, need: 3 }));
    }

    #[test]
    fn reflection_is_corrected() {
        // Target is a mirror image; the best proper rotation must still have det +1.
        let s = src5();
        let mirrored: Vec<_> = s.iter().map(|q| p(-q.x, q.y, q.z)).collect();
        let t = kabsch(&corr(s, mirrored)).unwrap();
        assert!((t.rotation().matrix().determinant() - 1.0).abs() < 1e-9);
        assert!(RigidTransform::new(*t.rotation().matrix(), *t.translation()).is_ok());
    }

    #[test]
    fn one_and_two_anchor_modes() {
        let one = corr(vec![p(0.0, 0.0, 0.0)], vec![p(0.0, 0.0, 2000.0)]);
        let t = align_with_anchors(&one).unwrap();
        assert_eq!(*t.rotation(), Rotation3::identity());
        assert_eq!(*t.translation(), Vector3::new(0.0, 0.0, 2000.0));

        let par = corr(vec![p(0.0, 0.0, 0.0), p(0.0, 300.0, 0.0)], vec![p(10.0, 20.0, 1000.0), p(10.0, 320.0, 1000.0)]);
        let t = align_with_anchors(&par).unwrap();
        assert_eq!(*t.rotation(), Rotation3::identity());
        assert_eq!(*t.translation(), Vector3::new(10.0, 20.0, 1000.0));

        let anti = corr(vec![p(0.0, 0.0, 0.0), p(0.0, 300.0, 0.0)], vec![p(0.0, 300.0, 900.0), p(0.0, 0.0, 900.0)]);
        let t = align_with_anchors(&anti).unwrap();
        assert!(residual(&t, &anti) < 1e-12);

        let coincident = corr(vec![p(1.0, 1.0, 1.0), p(1.0, 1.0, 1.0)], vec![p(0.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]);
        assert_eq!(align_with_anchors(&coincident), Err(AlignError::CoincidentPair));
        assert_eq!(
            AnchorCorrespondence::new(vec![], vec![], vec![]),
            Err(AlignError::TooFewAnchors { got: 0, need: 1 })
        );
        assert!(AnchorCorrespondence::new(vec![Joint::Nose, Joint::Nose], vec![p(0.0, 0.0, 0.0); 2], vec![p(0.0, 0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn scale_is_opt_in() {
        let s = src5();
        let gen = RigidTransform::from_parts(rot([1.0, 2.0, 3.0], 0.7), Vector3::new(5.0, 6.0, 700.0));
        let dst: Vec<_> = s.iter().map(|q| {
            let r = gen.rotation() * Vector3::from(*q) * 1.25 + gen.translation();
            Point3Cam::from(r)
        }).collect();
        let c = corr(s, dst);
        let sim = align_with_options(&c, &AlignOptions { allow_scale: true }).unwrap();
        assert!((sim.scale - 1.25).abs() < 1e-9);
        assert!(anchor_rms(&sim, &c) < 1e-9);
        let rigid = align_with_options(&c, &AlignOptions::default()).unwrap();
        assert_eq!(rigid.scale, 1.0);
        assert!(anchor_rms(&rigid, &c) > 1.0);
        assert!(serde_json::from_str::<AlignOptions>(r#"{"scale": true}"#).is_err());
    }

    #[test]
    fn apply_examples() {
        let set: KeypointSet = [(Joint::Nose, p(1.0, 2.0, 3.0), true), (Joint::LeftWrist, p(-4.0, 5.0, 600.0), false)]
            .into_iter()
            .collect();
        assert_eq!(apply_transform(&RigidTransform::identity(), &set), set);
        let t = RigidTransform::from_parts(rot([0.0, 1.0, 1.0], 1.0), Vector3::new(3.0, -9.0, 1000.0));
        let back = apply_transform(&t.inverse(), &apply_transform(&t, &set));
        for ((_, a), (_, b)) in set.iter().zip(back.iter()) {
            assert!(a.position.distance(&b.position) < 1e-9);
            assert_eq!(a.visible, b.visible);
        }
        let shifted = apply_transform(&RigidTransform::from_translation(Vector3::new(7.0, 8.0, 9.0)), &set);
        let d0 = set.get(Joint::Nose).unwrap().position.distance(&set.get(Joint::LeftWrist).unwrap().position);
        let d1 = shifted.get(Joint::Nose).unwrap().position.distance(&shifted.get(Joint::LeftWrist).unwrap().position);
        assert!((d0 - d1).abs() <= 1e-12 * d0);
        assert!(RigidTransform::new(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)), Vector3::zeros()).is_err());
    }

    fn arb_rigid() -> impl Strategy<Value = RigidTransform> {
        (
            (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
            0.0..std::f64::consts::PI,
            (-1000.0..1000.0f64, -1000.0..1000.0f64, 0.0..3000.0f64),
        )
            .prop_filter("axis", |((x, y, z), _, _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|((x, y, z), a, (tx, ty, tz))| RigidTransform::from_parts(rot([x, y, z], a), Vector3::new(tx, ty, tz)))
    }

    proptest! {
        #[test]
        fn isometry(t in arb_rigid(), pts in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64), 2..6)) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y, z)| p(x, y, z)).collect();
            let moved: Vec<_> = pts.iter().map(|q| t.apply(q)).collect();
            for i in 0..pts.len() {
                for j in 0..i {
                    let (a, b) = (pts[i].distance(&pts[j]), moved[i].distance(&moved[j]));
                    prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
                }
            }
        }

        #[test]
        fn kabsch_is_locally_optimal(
            t in arb_rigid(),
            noise in proptest::collection::vec(-5.0..5.0f64, 15),
            axes in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 8),
        ) {
            let s = src5();
            let dst: Vec<_> = s.iter().enumerate().map(|(i, q)| {
                let m = t.apply(q);
                p(m.x + noise[3 * i], m.y + noise[3 * i + 1], m.z + noise[3 * i + 2])
            }).collect();
            let c = corr(s, dst);
            let best = kabsch(&c).unwrap();
            let r0 = residual(&best, &c);
            for (x, y, z) in axes {
                prop_assume!(x * x + y * y + z * z > 1e-3);
                let perturbed = RigidTransform::from_parts(rot([x, y, z], 1e-3) * best.rotation(), *best.translation());
                prop_assert!(residual(&perturbed, &c) >= r0 * (1.0 - 1e-12));
            }
        }

        #[test]
        fn two_anchor_residual_vanishes(t in arb_rigid(), a in (-500.0..500.0f64, -500.0..500.0f64, -500.0..500.0f64), b in (-500.0..500.0f64, -500.0..500.0f64, -500.0..500.0f64)) {
            let (sa, sb) = (p(a.0, a.1, a.2), p(b.0, b.1, b.2));
            prop_assume!(sa.distance(&sb) > 1.0);
            let c = corr(vec![sa, sb], vec![t.apply(&sa), t.apply(&sb)]);
            let got = align_with_anchors(&c).unwrap();
            prop_assert!(residual(&got, &c).sqrt() < 1e-6);
        }
    }
}
