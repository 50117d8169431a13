//! Point-cloud and box metrics for scene evaluation.
//!
//! Chamfer distance is `0.5 * (mean_a d(a, B)^2 + mean_b d(b, A)^2)`.
//! The single-direction variant keeps only the ground-truth-to-prediction
//! term. F-score compares unsquared nearest-neighbor distances against the
//! threshold.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{canonicalize, CodecError};
use crate::geometry::{compute_unit_cube_frame, sample_surface, GeometryError};
use crate::mesh::{Aabb, TriangleMesh, Vec3};
use crate::pose::{transform_mesh, AffineTransform, GravityBox};
use crate::quantize::QuantizationGrid;
use crate::spatial::{nearest_brute, KdTree};

pub const CHAMFER_CONVENTION: &str =
    "cd = 0.5 * (mean squared nn distance pred->gt + gt->pred); cd_s = gt->pred term";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{0} point set is empty")]
    Empty(&'static str),
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("box has zero volume: {0:?}")]
    DegenerateBox(GravityBox),
    #[error("{0} bounding box is degenerate")]
    DegenerateBounds(&'static str),
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error("object {id}: {source}")]
    Object {
        id: u32,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub fscore_threshold: f64,
    pub samples_per_mesh: usize,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            fscore_threshold: 0.002,
            samples_per_mesh: 10_000,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.fscore_threshold > 0.0 && self.fscore_threshold.is_finite()) {
            return Err(MetricError::InvalidThreshold(self.fscore_threshold));
        }
        if self.samples_per_mesh == 0 {
            return Err(MetricError::ZeroSamples);
        }
        Ok(())
    }
}

fn nonempty(a: &[Vec3], b: &[Vec3]) -> Result<(), MetricError> {
    if a.is_empty() {
        return Err(MetricError::Empty("first"));
    }
    if b.is_empty() {
        return Err(MetricError::Empty("second"));
    }
    Ok(())
}

/// Squared distance from every point of `a` to its nearest point in `b`.
pub fn nearest_sq_dists(a: &[Vec3], b: &[Vec3]) -> Result<Vec<f64>, MetricError> {
    nonempty(a, b)?;
    let tree = KdTree::new(b);
    Ok(a.par_iter().map(|p| tree.nearest(p).unwrap().1).collect())
}

/// O(|a| |b|) reference for [`nearest_sq_dists`].
pub fn nearest_sq_dists_brute(a: &[Vec3], b: &[Vec3]) -> Result<Vec<f64>, MetricError> {
    nonempty(a, b)?;
    Ok(a.iter().map(|p| nearest_brute(b, p).unwrap().1).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricError> {
    let ab = mean(&nearest_sq_dists(a, b)?);
    let ba = mean(&nearest_sq_dists(b, a)?);
    Ok(0.5 * (ab + ba))
}

/// Mean squared distance from ground truth to the prediction.
pub fn chamfer_single(gt: &[Vec3], pred: &[Vec3]) -> Result<f64, MetricError> {
    Ok(mean(&nearest_sq_dists(gt, pred)?))
}

/// Percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
}

fn within(sq: &[f64], threshold: f64) -> f64 {
    let hit = sq.iter().filter(|d| d.sqrt() <= threshold).count();
    100.0 * hit as f64 / sq.len() as f64
}

fn harmonic(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn fscore(pred: &[Vec3], gt: &[Vec3], threshold: f64) -> Result<FScore, MetricError> {
    if !(threshold > 0.0) {
        return Err(MetricError::InvalidThreshold(threshold));
    }
    let precision = within(&nearest_sq_dists(pred, gt)?, threshold);
    let recall = within(&nearest_sq_dists(gt, pred)?, threshold);
    Ok(FScore {
        fscore: harmonic(precision, recall),
        precision,
        recall,
    })
}

/// All cloud metrics from one pair of nearest-neighbor passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudScores {
    pub cd: f64,
    pub cd_s: f64,
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn compare_clouds(
    pred: &[Vec3],
    gt: &[Vec3],
    threshold: f64,
) -> Result<CloudScores, MetricError> {
    if !(threshold > 0.0) {
        return Err(MetricError::InvalidThreshold(threshold));
    }
    let p2g = nearest_sq_dists(pred, gt)?;
    let g2p = nearest_sq_dists(gt, pred)?;
    let cd_s = mean(&g2p);
    let precision = within(&p2g, threshold);
    let recall = within(&g2p, threshold);
    Ok(CloudScores {
        cd: 0.5 * (mean(&p2g) + cd_s),
        cd_s,
        fscore: harmonic(precision, recall),
        precision,
        recall,
    })
}

type P2 = [f64; 2];

fn cross2(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Footprint of a box in the horizontal `(x, z)` plane, counter-clockwise.
fn footprint(b: &GravityBox) -> Vec<P2> {
    let (s, c) = b.yaw.sin_cos();
    let (hx, hz) = (0.5 * b.scale.x, 0.5 * b.scale.z);
    // images of the local x and z axes under the yaw rotation
    let ax = [c * hx, -s * hx];
    let az = [s * hz, c * hz];
    let mut poly: Vec<P2> = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|&(i, k)| {
            [
                b.center.x + i * ax[0] + k * az[0],
                b.center.z + i * ax[1] + k * az[1],
            ]
        })
        .collect();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`. Points within `eps` of an edge count as inside.
fn clip_convex(subject: &[P2], clip: &[P2], eps: f64) -> Vec<P2> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (e0, e1) = (clip[i], clip[(i + 1) % m]);
        let len = ((e1[0] - e0[0]).powi(2) + (e1[1] - e0[1]).powi(2)).sqrt();
        let side = |p: P2| cross2(e0, e1, p) / len;
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            let (pin, qin) = (sp >= -eps, sq >= -eps);
            if pin {
                out.push(p);
            }
            if pin != qin {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Volume IoU of two boxes sharing the vertical axis.
pub fn box_iou(a: &GravityBox, b: &GravityBox) -> Result<f64, MetricError> {
    for bx in [a, b] {
        if !(bx.scale.iter().all(|&s| s > 0.0) && bx.scale.iter().all(|s| s.is_finite())) {
            return Err(MetricError::DegenerateBox(*bx));
        }
    }
    let span = |bx: &GravityBox| {
        (
            bx.center.y - 0.5 * bx.scale.y,
            bx.center.y + 0.5 * bx.scale.y,
        )
    };
    let ((ba, ta), (bb, tb)) = (span(a), span(b));
    let (fa, fb) = (footprint(a), footprint(b));
    let va = signed_area(&fa) * (ta - ba);
    let vb = signed_area(&fb) * (tb - bb);
    let h = (ta.min(tb) - ba.max(bb)).max(0.0);
    if h == 0.0 {
        return Ok(0.0);
    }
    let eps = 1e-12 * a.scale.amax().max(b.scale.amax());
    let inter_poly = clip_convex(&fa, &fb, eps);
    let inter = if inter_poly.len() < 3 {
        0.0
    } else {
        signed_area(&inter_poly).max(0.0) * h
    };
    Ok((inter / (va + vb - inter)).clamp(0.0, 1.0))
}

/// Global scale and translation taking `pred` onto `gt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub scale: f64,
    pub translation: Vec3,
}

impl Alignment {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.translation
    }
}

fn bounds(points: &[Vec3], what: &'static str) -> Result<(Vec3, f64), MetricError> {
    let bb = Aabb::from_points(points).ok_or(MetricError::Empty(what))?;
    let d = bb.diagonal();
    if !(d > 0.0 && d.is_finite()) {
        return Err(MetricError::DegenerateBounds(what));
    }
    Ok((bb.center(), d))
}

/// Match bounding-box diagonals and centers. Rotation is left alone.
pub fn align_scene(pred: &[Vec3], gt: &[Vec3]) -> Result<Alignment, MetricError> {
    let (cp, dp) = bounds(pred, "prediction")?;
    let (cg, dg) = bounds(gt, "ground truth")?;
    let scale = dg / dp;
    Ok(Alignment {
        scale,
        translation: cg - cp * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshCount {
    pub faces: usize,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshStats {
    pub faces: usize,
    pub vertices: usize,
    pub meshes: Vec<MeshCount>,
}

/// Face and vertex counts after unit-cube normalization and
/// canonicalization on `grid`.
pub fn mesh_stats(
    meshes: &[TriangleMesh],
    grid: QuantizationGrid,
) -> Result<MeshStats, MetricError> {
    let mut per = Vec::with_capacity(meshes.len());
    for m in meshes {
        let frame = compute_unit_cube_frame(&m.vertices)?;
        let c = canonicalize(&frame.apply_mesh(m), grid)?;
        per.push(MeshCount {
            faces: c.faces.len(),
            vertices: c.vertices.len(),
        });
    }
    Ok(MeshStats {
        faces: per.iter().map(|c| c.faces).sum(),
        vertices: per.iter().map(|c| c.vertices).sum(),
        meshes: per,
    })
}

/// A mesh placed in a scene by its local-to-scene transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub mesh: TriangleMesh,
    pub transform: AffineTransform,
}

impl SceneObject {
    pub fn composed(&self) -> TriangleMesh {
        transform_mesh(&self.transform, &self.mesh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub id: u32,
    /// `None` when the prediction lacks this object.
    pub scores: Option<CloudScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub convention: String,
    pub fscore_threshold: f64,
    pub samples_per_mesh: usize,
    pub scene: CloudScores,
    pub objects: Vec<ObjectScore>,
}

impl ScoreReport {
    /// Aligned text table; Chamfer values are shown in units of 1e-3.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>8} {:>10} {:>8}",
            "object", "CD(e-3)", "CD-S(e-3)", "F", "precision", "recall"
        );
        let mut row = |name: &str, c: Option<&CloudScores>| match c {
            Some(c) => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>10.4} {:>10.4} {:>8.2} {:>10.2} {:>8.2}",
                    name,
                    c.cd * 1e3,
                    c.cd_s * 1e3,
                    c.fscore,
                    c.precision,
                    c.recall
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>10} {:>10} {:>8} {:>10} {:>8}",
                    name, "-", "-", "-", "-", "-"
                );
            }
        };
        row("scene", Some(&self.scene));
        for o in &self.objects {
            row(&o.id.to_string(), o.scores.as_ref());
        }
        s
    }
}

/// Snap step of aligned prediction vertices, relative to the bounding box
/// diagonal.
const SNAP: f64 = 1.0 / (1u64 << 20) as f64;

fn object_seed(seed: u64, id: u32) -> u64 {
    seed ^ u64::from(id).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn check_ids(objects: &[SceneObject], what: &str) -> Result<HashSet<u32>, MetricError> {
    let mut ids = HashSet::new();
    for o in objects {
        if !ids.insert(o.id) {
            return Err(MetricError::Manifest(format!(
                "{what} lists object {} twice",
                o.id
            )));
        }
    }
    Ok(ids)
}

/// Compose both scenes, align the prediction to the ground truth, sample
/// each object surface and score the scene and every ground-truth object.
///
/// Each scene is expressed relative to its own bounding-box center and
/// diagonal, rounded to a fine lattice, and placed in the ground-truth
/// box; this is the closed-form alignment of [`align_scene`]. Any global
/// scale and translation of the prediction therefore yields the same
/// report. Matching objects share a sampling seed.
pub fn evaluate_scene(
    pred: &[SceneObject],
    gt: &[SceneObject],
    cfg: &MetricConfig,
) -> Result<ScoreReport, MetricError> {
    cfg.validate()?;
    if gt.is_empty() {
        return Err(MetricError::Manifest("ground truth has no objects".into()));
    }
    let gt_ids = check_ids(gt, "ground truth")?;
    check_ids(pred, "prediction")?;
    if let Some(o) = pred.iter().find(|o| !gt_ids.contains(&o.id)) {
        return Err(MetricError::Manifest(format!(
            "predicted object {} has no ground truth",
            o.id
        )));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty("prediction"));
    }

    let gt_meshes: Vec<TriangleMesh> = gt.iter().map(SceneObject::composed).collect();
    let pred_meshes: Vec<TriangleMesh> = pred.iter().map(SceneObject::composed).collect();
    let gt_all: Vec<Vec3> = gt_meshes
        .iter()
        .flat_map(|m| m.vertices.iter().copied())
        .collect();
    let pred_all: Vec<Vec3> = pred_meshes
        .iter()
        .flat_map(|m| m.vertices.iter().copied())
        .collect();
    let (cp, dp) = bounds(&pred_all, "prediction")?;
    let (cg, dg) = bounds(&gt_all, "ground truth")?;
    let snap =
        |p: Vec3, c: Vec3, d: f64| ((p - c) / d).map(|x| (x / SNAP).round() * SNAP) * dg + cg;
    let gt_meshes: Vec<TriangleMesh> = gt_meshes
        .iter()
        .map(|m| m.map_vertices(|p| snap(*p, cg, dg)))
        .collect();
    let pred_meshes: Vec<TriangleMesh> = pred_meshes
        .iter()
        .map(|m| m.map_vertices(|p| snap(*p, cp, dp)))
        .collect();

    let n = cfg.samples_per_mesh;
    let sample =
        |objs: &[SceneObject], meshes: &[TriangleMesh]| -> Result<Vec<Vec<Vec3>>, MetricError> {
            objs.par_iter()
                .zip(meshes.par_iter())
                .map(|(o, m)| {
                    sample_surface(m, n, object_seed(cfg.seed, o.id))
                        .map(|c| c.points)
                        .map_err(|source| MetricError::Object { id: o.id, source })
                })
                .collect()
        };
    let gt_pts = sample(gt, &gt_meshes)?;
    let pred_pts = sample(pred, &pred_meshes)?;

    let scene = compare_clouds(&pred_pts.concat(), &gt_pts.concat(), cfg.fscore_threshold)?;
    let pred_by_id: HashMap<u32, usize> = pred.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
    let objects = gt
        .iter()
        .zip(&gt_pts)
        .map(|(o, g)| {
            let scores = match pred_by_id.get(&o.id) {
                Some(&i) => Some(compare_clouds(&pred_pts[i], g, cfg.fscore_threshold)?),
                None => None,
            };
            Ok(ObjectScore { id: o.id, scores })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;

    Ok(ScoreReport {
        convention: CHAMFER_CONVENTION.into(),
        fscore_threshold: cfg.fscore_threshold,
        samples_per_mesh: n,
        scene,
        objects,
    })
}
