//! Asset preparation before tokenization: vertex merging, planar and
//! quadric edge-collapse decimation, and candidate selection by sampled
//! Hausdorff distance.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use nalgebra::{Matrix3, Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compute_unit_cube_frame, sample_surface, GeometryError};
use crate::mesh::{TriangleMesh, Vec3};
use crate::quantize::{QuantizationGrid, QuantizeError};
use crate::spatial::TriangleBvh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("mesh has no faces left")]
    EmptyResult,
    #[error("face index out of range")]
    InvalidIndices,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("target face count {0} is below 4")]
    InvalidTarget(usize),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("every candidate failed: {}", .0.join("; "))]
    AllCandidatesFailed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub quant_levels: Vec<u32>,
    pub face_targets: Vec<usize>,
    pub hausdorff_tau: f64,
    pub hausdorff_samples: usize,
    /// Radians.
    pub planar_angle_tol: f64,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            quant_levels: QuantizationGrid::STANDARD.to_vec(),
            face_targets: vec![800, 2000, 4000],
            hausdorff_tau: 0.01,
            hausdorff_samples: 50_000,
            planar_angle_tol: 1f64.to_radians(),
            seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: String| Err(PreprocessError::InvalidConfig(m));
        if self.quant_levels.is_empty() || self.face_targets.is_empty() {
            return bad("quant_levels and face_targets must be nonempty".into());
        }
        for &q in &self.quant_levels {
            QuantizationGrid::new(q)?;
        }
        if self.face_targets.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "face targets must be strictly ascending, got {:?}",
                self.face_targets
            ));
        }
        if let Some(&t) = self.face_targets.iter().find(|&&t| t < 4) {
            return Err(PreprocessError::InvalidTarget(t));
        }
        if !(self.hausdorff_tau > 0.0) {
            return bad(format!(
                "hausdorff_tau must be positive, got {}",
                self.hausdorff_tau
            ));
        }
        if self.hausdorff_samples == 0 {
            return bad("hausdorff_samples must be at least 1".into());
        }
        if !(self.planar_angle_tol >= 0.0) {
            return bad(format!(
                "planar_angle_tol must be nonnegative, got {}",
                self.planar_angle_tol
            ));
        }
        Ok(())
    }
}

/// Sidecar record of how a candidate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub quant_level: u32,
    pub face_target: usize,
    pub hausdorff: f64,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub mesh: TriangleMesh,
    pub quant_level: u32,
    pub face_target: usize,
    pub hausdorff: f64,
    pub faces: usize,
}

impl CandidateResult {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            quant_level: self.quant_level,
            face_target: self.face_target,
            hausdorff: self.hausdorff,
            faces: self.faces,
        }
    }
}

fn face_key(f: [u32; 3]) -> [u32; 3] {
    crate::codec::rotate_min_first(f)
}

/// Merge vertices sharing a bin of the `q`-grid over `[-1, 1]^3` into the
/// mean of their positions, then drop faces that lost a corner, repeated
/// faces and unused vertices. Expects unit-cube coordinates; anything
/// outside lands in the boundary bins.
pub fn merge_vertices(mesh: &TriangleMesh, q: u32) -> Result<TriangleMesh, PreprocessError> {
    if !mesh.indices_valid() {
        return Err(PreprocessError::InvalidIndices);
    }
    let grid = QuantizationGrid::new(q)?;
    let mut cell_of: HashMap<[u32; 3], u32> = HashMap::new();
    let mut sums: Vec<(Vec3, u32)> = Vec::new();
    let mut remap = Vec::with_capacity(mesh.vertices.len());
    for p in &mesh.vertices {
        let cell = grid.quantize_point(p)?;
        let id = *cell_of.entry(cell).or_insert_with(|| {
            sums.push((Vec3::zeros(), 0));
            sums.len() as u32 - 1
        });
        sums[id as usize].0 += p;
        sums[id as usize].1 += 1;
        remap.push(id);
    }
    let vertices = sums
        .iter()
        .map(|(s, n)| if *n == 1 { *s } else { s / *n as f64 })
        .collect();
    let mut seen = HashSet::new();
    let faces: Vec<[u32; 3]> = mesh
        .faces
        .iter()
        .map(|f| f.map(|i| remap[i as usize]))
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .filter(|f| seen.insert(face_key(*f)))
        .collect();
    if faces.is_empty() {
        return Err(PreprocessError::EmptyResult);
    }
    Ok(TriangleMesh::new(vertices, faces).remove_unreferenced())
}

#[derive(Clone, Copy)]
enum Criterion {
    /// Face normals stay within the tolerance of their starting direction.
    Planar { tol: f64 },
    /// Face normals must not flip.
    NoFlip,
}

/// Mutable triangle soup supporting half-edge collapses.
struct Work {
    pos: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    alive: Vec<bool>,
    vf: Vec<Vec<usize>>,
    gone: Vec<bool>,
    locked: Vec<bool>,
    start_normal: Vec<Vec3>,
    live: usize,
    area_eps: f64,
}

fn tri_normal(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

impl Work {
    fn new(mesh: &TriangleMesh) -> Work {
        let faces: Vec<[u32; 3]> = mesh
            .faces
            .iter()
            .copied()
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        let n = mesh.vertices.len();
        let mut vf = vec![Vec::new(); n];
        for (i, f) in faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(i);
            }
        }
        let diag = mesh.bounds().map_or(1.0, |b| b.diagonal());
        let start_normal = faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| mesh.vertices[i as usize]);
                tri_normal(&a, &b, &c)
                    .try_normalize(0.0)
                    .unwrap_or_else(Vec3::zeros)
            })
            .collect();
        let mut w = Work {
            pos: mesh.vertices.clone(),
            alive: vec![true; faces.len()],
            live: faces.len(),
            faces,
            vf,
            gone: vec![false; n],
            locked: vec![false; n],
            start_normal,
            area_eps: 1e-14 * diag * diag,
        };
        // vertices on non-manifold edges or with a pinched boundary stay put
        let mut edge_count: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &w.faces {
            for k in 0..3 {
                *edge_count
                    .entry(crate::mesh::edge_key(f[k], f[(k + 1) % 3]))
                    .or_default() += 1;
            }
        }
        let mut boundary_deg = vec![0u32; n];
        for (&(a, b), &c) in &edge_count {
            if c > 2 {
                w.locked[a as usize] = true;
                w.locked[b as usize] = true;
            } else if c == 1 {
                boundary_deg[a as usize] += 1;
                boundary_deg[b as usize] += 1;
            }
        }
        for v in 0..n {
            if boundary_deg[v] != 0 && boundary_deg[v] != 2 {
                w.locked[v] = true;
            }
        }
        w
    }

    fn neighbors(&self, u: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vf[u as usize]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&x| x != u)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn faces_with(&self, u: u32, v: u32) -> Vec<usize> {
        self.vf[u as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&v))
            .collect()
    }

    fn boundary_neighbors(&self, u: u32) -> Vec<u32> {
        self.neighbors(u)
            .into_iter()
            .filter(|&w| self.faces_with(u, w).len() == 1)
            .collect()
    }

    /// Whether removing `u` into `v`, with `v` moved to `p`, keeps the
    /// surface manifold, non-degenerate and within `crit`.
    fn can_collapse(&self, u: u32, v: u32, p: &Vec3, crit: Criterion) -> bool {
        let (ui, vi) = (u as usize, v as usize);
        if u == v || self.gone[ui] || self.gone[vi] || self.locked[ui] || self.locked[vi] {
            return false;
        }
        let shared = self.faces_with(u, v);
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        // link condition
        let nv: HashSet<u32> = self.neighbors(v).into_iter().collect();
        let common: HashSet<u32> = self
            .neighbors(u)
            .into_iter()
            .filter(|x| nv.contains(x))
            .collect();
        let opposite: HashSet<u32> = shared
            .iter()
            .map(|&f| *self.faces[f].iter().find(|&&x| x != u && x != v).unwrap())
            .collect();
        if common != opposite {
            return false;
        }
        let bu = self.boundary_neighbors(u);
        let bv = self.boundary_neighbors(v);
        if !bu.is_empty() && !bv.is_empty() && shared.len() != 1 {
            return false;
        }
        if let Criterion::Planar { tol } = crit {
            if !bu.is_empty() {
                // u may only slide along a straight boundary
                if bv.is_empty() || bu.len() != 2 {
                    return false;
                }
                let w = if bu[0] == v { bu[1] } else { bu[0] };
                let (a, b) = (
                    self.pos[ui] - self.pos[w as usize],
                    self.pos[vi] - self.pos[ui],
                );
                if a.dot(&b) <= 0.0
                    || a.cross(&b).norm() > tol.sin() * a.norm() * b.norm() + self.area_eps
                {
                    return false;
                }
            }
        }

        let mut new_keys = HashSet::new();
        let others: Vec<usize> = self.vf[vi]
            .iter()
            .copied()
            .filter(|f| !shared.contains(f))
            .collect();
        for &f in &others {
            new_keys.insert(face_key(self.faces[f]));
        }
        let place = |x: u32| {
            if x == u || x == v {
                *p
            } else {
                self.pos[x as usize]
            }
        };
        for &f in self.vf[ui].iter().chain(others.iter()) {
            if shared.contains(&f) {
                continue;
            }
            let old = self.faces[f];
            if old.contains(&u) {
                let moved = old.map(|x| if x == u { v } else { x });
                if !new_keys.insert(face_key(moved)) {
                    return false;
                }
                // same vertices, opposite winding
                if new_keys.contains(&face_key([moved[0], moved[2], moved[1]])) {
                    return false;
                }
            }
            let [a, b, c] = old.map(place);
            let n = tri_normal(&a, &b, &c);
            if n.norm() <= self.area_eps {
                return false;
            }
            let n = n.normalize();
            let ok = match crit {
                Criterion::Planar { tol } => {
                    n.dot(&self.start_normal[f]).clamp(-1.0, 1.0).acos() <= tol + 1e-9
                }
                Criterion::NoFlip => {
                    let [a0, b0, c0] = old.map(|x| self.pos[x as usize]);
                    n.dot(&tri_normal(&a0, &b0, &c0)) > 0.0
                }
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn collapse(&mut self, u: u32, v: u32, p: Vec3) {
        for f in self.faces_with(u, v) {
            self.alive[f] = false;
            self.live -= 1;
            for x in self.faces[f] {
                self.vf[x as usize].retain(|&g| g != f);
            }
        }
        for f in std::mem::take(&mut self.vf[u as usize]) {
            for x in &mut self.faces[f] {
                if *x == u {
                    *x = v;
                }
            }
            self.vf[v as usize].push(f);
        }
        self.gone[u as usize] = true;
        self.pos[v as usize] = p;
    }

    fn finish(&self) -> TriangleMesh {
        let faces = self
            .faces
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| *f)
            .collect();
        TriangleMesh::new(self.pos.clone(), faces).remove_unreferenced()
    }
}

/// Collapse edges inside flat regions. A vertex is removed into a
/// neighbor only when no surviving face turns by more than `angle_tol`
/// from its starting direction and open boundaries stay straight.
pub fn planar_decimate(mesh: &TriangleMesh, angle_tol: f64) -> TriangleMesh {
    let mut w = Work::new(mesh);
    let crit = Criterion::Planar { tol: angle_tol };
    loop {
        let mut changed = false;
        for u in 0..w.pos.len() as u32 {
            if w.gone[u as usize] || w.vf[u as usize].is_empty() {
                continue;
            }
            for v in w.neighbors(u) {
                let p = w.pos[v as usize];
                if w.can_collapse(u, v, &p, crit) {
                    w.collapse(u, v, p);
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    w.finish()
}

const BOUNDARY_WEIGHT: f64 = 100.0;

fn plane_quadric(n: &Vec3, point: &Vec3, weight: f64) -> Matrix4<f64> {
    let p = Vector4::new(n.x, n.y, n.z, -n.dot(point));
    p * p.transpose() * weight
}

fn quadric_cost(q: &Matrix4<f64>, p: &Vec3) -> f64 {
    let h = Vector4::new(p.x, p.y, p.z, 1.0);
    (h.transpose() * q * h)[(0, 0)].max(0.0)
}

/// Position minimizing `q`, or the midpoint of `a` and `b` when the system
/// is near-singular or the minimizer lands far from the edge.
fn optimal_position(q: &Matrix4<f64>, a: &Vec3, b: &Vec3) -> Vec3 {
    let mid = (a + b) * 0.5;
    let m: Matrix3<f64> = q.fixed_view::<3, 3>(0, 0).into_owned();
    let rhs = -q.fixed_view::<3, 1>(0, 3).into_owned();
    let scale = m.norm();
    if scale == 0.0 || m.determinant().abs() <= 1e-10 * scale.powi(3) {
        return mid;
    }
    match m.try_inverse() {
        Some(inv) => {
            let p = inv * rhs;
            if (p - mid).norm() <= 2.0 * (b - a).norm() {
                p
            } else {
                mid
            }
        }
        None => mid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub mesh: TriangleMesh,
    /// False when no further collapse was allowed before reaching the target.
    pub reached_target: bool,
}

/// Garland-Heckbert edge collapse down to at most `target_faces` faces.
/// Open boundaries carry extra perpendicular-plane quadrics.
pub fn quadric_decimate(
    mesh: &TriangleMesh,
    target_faces: usize,
) -> Result<Decimated, PreprocessError> {
    if target_faces < 4 {
        return Err(PreprocessError::InvalidTarget(target_faces));
    }
    if !mesh.indices_valid() {
        return Err(PreprocessError::InvalidIndices);
    }
    let mut w = Work::new(mesh);
    if w.live <= target_faces {
        return Ok(Decimated {
            mesh: w.finish(),
            reached_target: true,
        });
    }
    let n = w.pos.len();
    let mut quad = vec![Matrix4::<f64>::zeros(); n];
    for f in 0..w.faces.len() {
        let [a, b, c] = w.faces[f].map(|i| w.pos[i as usize]);
        let nrm = tri_normal(&a, &b, &c);
        let area = 0.5 * nrm.norm();
        if area == 0.0 {
            continue;
        }
        let k = plane_quadric(&(nrm / (2.0 * area)), &a, area);
        for &v in &w.faces[f] {
            quad[v as usize] += k;
        }
    }
    for f in 0..w.faces.len() {
        let face = w.faces[f];
        let [a, b, c] = face.map(|i| w.pos[i as usize]);
        let nrm = tri_normal(&a, &b, &c);
        for k in 0..3 {
            let (x, y) = (face[k], face[(k + 1) % 3]);
            if w.faces_with(x, y).len() != 1 {
                continue;
            }
            let e = w.pos[y as usize] - w.pos[x as usize];
            if let Some(bn) = e.cross(&nrm).try_normalize(0.0) {
                let k = plane_quadric(&bn, &w.pos[x as usize], BOUNDARY_WEIGHT * e.norm_squared());
                quad[x as usize] += k;
                quad[y as usize] += k;
            }
        }
    }

    let mut version = vec![0u64; n];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<_>,
                w: &Work,
                quad: &[Matrix4<f64>],
                version: &[u64],
                a: u32,
                b: u32| {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let q = quad[a as usize] + quad[b as usize];
        let p = optimal_position(&q, &w.pos[a as usize], &w.pos[b as usize]);
        heap.push(Reverse((
            Cost(quadric_cost(&q, &p)),
            a,
            b,
            version[a as usize],
            version[b as usize],
        )));
    };
    for u in 0..n as u32 {
        for v in w.neighbors(u) {
            if u < v {
                push(&mut heap, &w, &quad, &version, u, v);
            }
        }
    }

    while w.live > target_faces {
        let Some(Reverse((_, a, b, va, vb))) = heap.pop() else {
            break;
        };
        if w.gone[a as usize]
            || w.gone[b as usize]
            || version[a as usize] != va
            || version[b as usize] != vb
        {
            continue;
        }
        let q = quad[a as usize] + quad[b as usize];
        let p = optimal_position(&q, &w.pos[a as usize], &w.pos[b as usize]);
        // b is removed, a survives at p
        if !w.can_collapse(b, a, &p, Criterion::NoFlip) {
            continue;
        }
        w.collapse(b, a, p);
        quad[a as usize] = q;
        version[a as usize] += 1;
        version[b as usize] += 1;
        let ring = w.neighbors(a);
        for &x in &ring {
            push(&mut heap, &w, &quad, &version, a, x);
        }
        // edges around the ring may have become collapsible
        for &x in &ring {
            for y in w.neighbors(x) {
                if y != a && x < y {
                    push(&mut heap, &w, &quad, &version, x, y);
                }
            }
        }
    }
    let reached_target = w.live <= target_faces;
    Ok(Decimated {
        mesh: w.finish(),
        reached_target,
    })
}

/// Surface samples of one mesh with a point-to-surface index, reusable
/// against many other meshes.
pub struct HausdorffReference {
    samples: Vec<Vec3>,
    bvh: TriangleBvh,
    n: usize,
    seed: u64,
}

impl HausdorffReference {
    pub fn new(mesh: &TriangleMesh, samples: usize, seed: u64) -> Result<Self, PreprocessError> {
        Ok(HausdorffReference {
            samples: sample_surface(mesh, samples, seed)?.points,
            bvh: TriangleBvh::from_mesh(mesh),
            n: samples,
            seed,
        })
    }

    /// Symmetric sampled Hausdorff distance to `other`.
    pub fn distance(&self, other: &TriangleMesh) -> Result<f64, PreprocessError> {
        let theirs = sample_surface(other, self.n, self.seed)?.points;
        let other_bvh = TriangleBvh::from_mesh(other);
        let one_way = |pts: &[Vec3], bvh: &TriangleBvh| {
            pts.par_iter()
                .map(|p| bvh.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
                .reduce(|| 0.0, f64::max)
        };
        let d = one_way(&self.samples, &other_bvh).max(one_way(&theirs, &self.bvh));
        Ok(d.sqrt())
    }
}

/// Symmetric Hausdorff estimate: both surfaces are sampled with the same
/// seed and each sample is measured against the other surface.
pub fn hausdorff(
    a: &TriangleMesh,
    b: &TriangleMesh,
    samples: usize,
    seed: u64,
) -> Result<f64, PreprocessError> {
    HausdorffReference::new(a, samples, seed)?.distance(b)
}

/// Below `tau`, the fewest faces wins (then the lower distance); with no
/// candidate below `tau`, the lowest distance wins (then fewer faces).
pub fn select_best(candidates: &[CandidateResult], tau: f64) -> Option<&CandidateResult> {
    let good = candidates
        .iter()
        .filter(|c| c.hausdorff < tau)
        .min_by(|x, y| {
            x.faces
                .cmp(&y.faces)
                .then(x.hausdorff.total_cmp(&y.hausdorff))
        });
    good.or_else(|| {
        candidates.iter().min_by(|x, y| {
            x.hausdorff
                .total_cmp(&y.hausdorff)
                .then(x.faces.cmp(&y.faces))
        })
    })
}

/// Every quantization level and face target, each with its outcome. The
/// input is first normalized to the unit cube; candidate meshes stay in
/// that frame.
pub fn evaluate_candidates(
    mesh: &TriangleMesh,
    cfg: &PreprocessConfig,
) -> Result<Vec<Result<CandidateResult, PreprocessError>>, PreprocessError> {
    cfg.validate()?;
    if !mesh.indices_valid() {
        return Err(PreprocessError::InvalidIndices);
    }
    let frame = compute_unit_cube_frame(&mesh.vertices)?;
    let unit = frame.apply_mesh(mesh);
    let reference = HausdorffReference::new(&unit, cfg.hausdorff_samples, cfg.seed)?;
    let per_level: Vec<Vec<Result<CandidateResult, PreprocessError>>> = cfg
        .quant_levels
        .par_iter()
        .map(|&q| {
            let flat = match merge_vertices(&unit, q) {
                Ok(m) => planar_decimate(&m, cfg.planar_angle_tol),
                Err(e) => return vec![Err(e); cfg.face_targets.len()],
            };
            cfg.face_targets
                .par_iter()
                .map(|&target| {
                    let d = quadric_decimate(&flat, target)?;
                    let hausdorff = reference.distance(&d.mesh)?;
                    Ok(CandidateResult {
                        faces: d.mesh.faces.len(),
                        mesh: d.mesh,
                        quant_level: q,
                        face_target: target,
                        hausdorff,
                    })
                })
                .collect()
        })
        .collect();
    Ok(per_level.into_iter().flatten().collect())
}

/// Run all candidates and keep the one [`select_best`] prefers.
pub fn preprocess_asset(
    mesh: &TriangleMesh,
    cfg: &PreprocessConfig,
) -> Result<CandidateResult, PreprocessError> {
    let results = evaluate_candidates(mesh, cfg)?;
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(c) => ok.push(c),
            Err(e) => errors.push(e.to_string()),
        }
    }
    select_best(&ok, cfg.hausdorff_tau)
        .cloned()
        .ok_or(PreprocessError::AllCandidatesFailed(errors))
}
