//! Pinhole camera, depth back-projection, unit-cube normalization,
//! augmentation and surface sampling.
//!
//! Pixel `(u, v)` is the ray through the integer coordinate `(u, v)`;
//! rasters are stored row-major, `index = v * width + u`.

use nalgebra::Matrix3;
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Aabb, TriangleMesh, Vec3};
use crate::pose::{wrap_angle, yaw_rotation, GravityBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{what}: expected {expected:?} (width, height), found {found:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("point {0:?} is not in front of the camera")]
    BehindCamera([f64; 3]),
    #[error("point set is empty")]
    Empty,
    #[error("points have zero extent")]
    ZeroExtent,
    #[error("augmentation parameter out of range: {0}")]
    InvalidParams(String),
    #[error("mesh has no surface area")]
    ZeroArea,
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidIntrinsics(m));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            ));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return bad(format!(
                "principal point ({}, {}) outside a {}x{} image",
                self.cx, self.cy, self.width, self.height
            ));
        }
        Ok(())
    }

    /// Image plane coordinates of a camera-space point.
    pub fn project(&self, p: &Vec3) -> Result<(f64, f64), GeometryError> {
        if !(p.z > 0.0) {
            return Err(GeometryError::BehindCamera([p.x, p.y, p.z]));
        }
        Ok((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Camera-space point at depth `d` on the ray through `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> Vec3 {
        Vec3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }
}

/// Metric depth per pixel; zero means no reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != width * height {
            return Err(GeometryError::InvalidRaster(format!(
                "{} depth values for a {width}x{height} raster",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(GeometryError::InvalidRaster(format!(
                "depth at pixel ({}, {}) is {}",
                i % width.max(1),
                i / width.max(1),
                values[i]
            )));
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, d: f64) -> Result<Self, GeometryError> {
        Self::new(width, height, vec![d; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pixel membership of one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self, GeometryError> {
        if values.len() != width * height {
            return Err(GeometryError::InvalidRaster(format!(
                "{} mask values for a {width}x{height} raster",
                values.len()
            )));
        }
        Ok(InstanceMask {
            width,
            height,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.values[v * self.width + u]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            pixels: None,
            features: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.points.len();
        self.pixels.as_ref().is_none_or(|p| p.len() == n)
            && self.features.as_ref().is_none_or(|f| f.len() == n)
            && self.points.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Keep the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            pixels: self
                .pixels
                .as_ref()
                .map(|px| indices.iter().map(|&i| px[i]).collect()),
            features: self
                .features
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i].clone()).collect()),
        }
    }

    fn with_points(&self, points: Vec<Vec3>) -> PointCloud {
        PointCloud {
            points,
            ..self.clone()
        }
    }
}

/// Dense `height x width x channels` grid of features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        values: Vec<f32>,
    ) -> Result<Self, GeometryError> {
        if channels == 0 || width == 0 || height == 0 {
            return Err(GeometryError::InvalidRaster(
                "feature map needs positive width, height and channels".into(),
            ));
        }
        if values.len() != width * height * channels {
            return Err(GeometryError::InvalidRaster(format!(
                "{} feature values for {width}x{height}x{channels}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRaster(
                "non-finite feature value".into(),
            ));
        }
        Ok(FeatureMap {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn cell(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.values[i..i + self.channels]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// One point per pixel with positive depth (and inside `mask`, if given).
pub fn back_project(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    mask: Option<&InstanceMask>,
) -> Result<PointCloud, GeometryError> {
    k.validate()?;
    if (k.width, k.height) != depth.dims() {
        return Err(GeometryError::DimensionMismatch {
            what: "depth map vs intrinsics",
            expected: (k.width, k.height),
            found: depth.dims(),
        });
    }
    if let Some(m) = mask {
        if m.dims() != depth.dims() {
            return Err(GeometryError::DimensionMismatch {
                what: "mask vs depth map",
                expected: depth.dims(),
                found: m.dims(),
            });
        }
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if d > 0.0 && mask.is_none_or(|m| m.get(u, v)) {
                points.push(k.unproject(u as f64, v as f64, d));
                pixels.push([u as f64, v as f64]);
            }
        }
    }
    Ok(PointCloud {
        points,
        pixels: Some(pixels),
        features: None,
    })
}

/// Bilinear lookup with edge clamping. Pixel coordinates are rescaled from
/// `image_size` (`w x h`) to the `W x H` feature grid; cell `(x, y)` is
/// centered on image pixel `((x + 0.5) * w / W - 0.5, (y + 0.5) * h / H - 0.5)`.
pub fn gather_features(
    fm: &FeatureMap,
    pixels: &[[f64; 2]],
    image_size: (usize, usize),
) -> Vec<Vec<f64>> {
    let sx = fm.width as f64 / image_size.0 as f64;
    let sy = fm.height as f64 / image_size.1 as f64;
    let axis = |t: f64, n: usize| -> (usize, usize, f64) {
        let t = t.clamp(0.0, (n - 1) as f64);
        let i0 = (t.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, t - i0 as f64)
    };
    pixels
        .iter()
        .map(|&[u, v]| {
            let (x0, x1, wx) = axis((u + 0.5) * sx - 0.5, fm.width);
            let (y0, y1, wy) = axis((v + 0.5) * sy - 0.5, fm.height);
            (0..fm.channels)
                .map(|c| {
                    let at = |x: usize, y: usize| fm.cell(x, y)[c] as f64;
                    let top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
                    let bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
                    top * (1.0 - wy) + bottom * wy
                })
                .collect()
        })
        .collect()
}

/// Isotropic map `p -> (p - center) / half_extent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationFrame {
    pub center: Vec3,
    pub half_extent: f64,
}

impl Default for NormalizationFrame {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormalizationFrame {
    pub fn identity() -> Self {
        NormalizationFrame {
            center: Vec3::zeros(),
            half_extent: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) / self.half_extent
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p * self.half_extent + self.center
    }

    pub fn apply_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    pub fn invert_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.invert(p)).collect()
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.apply(p))
    }

    pub fn invert_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.invert(p))
    }
}

/// Frame centering the bounding box and fitting its longest side to `[-1, 1]`.
pub fn compute_unit_cube_frame(points: &[Vec3]) -> Result<NormalizationFrame, GeometryError> {
    let bb = Aabb::from_points(points).ok_or(GeometryError::Empty)?;
    let half_extent = 0.5 * bb.extent().max();
    if !(half_extent > 0.0) || !half_extent.is_finite() {
        return Err(GeometryError::ZeroExtent);
    }
    Ok(NormalizationFrame {
        center: bb.center(),
        half_extent,
    })
}

/// A concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub yaw: f64,
    pub scale: f64,
    pub shift: Vec3,
    #[serde(default = "default_jitter")]
    pub depth_jitter_max: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_jitter() -> f64 {
    AugmentationParams::DEPTH_JITTER
}

impl Default for AugmentationParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AugmentationParams {
    pub const MAX_YAW: f64 = std::f64::consts::FRAC_PI_4;
    pub const SCALE_RANGE: (f64, f64) = (0.75, 1.0);
    pub const MAX_SHIFT: f64 = 0.2;
    pub const DEPTH_JITTER: f64 = 0.02;

    pub fn identity() -> Self {
        AugmentationParams {
            yaw: 0.0,
            scale: 1.0,
            shift: Vec3::zeros(),
            depth_jitter_max: 0.0,
            seed: 0,
        }
    }

    /// Uniform draw over the full parameter ranges.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = Uniform::new_inclusive(0.0, Self::MAX_SHIFT);
        AugmentationParams {
            yaw: rng.gen_range(-Self::MAX_YAW..=Self::MAX_YAW),
            scale: rng.gen_range(Self::SCALE_RANGE.0..=Self::SCALE_RANGE.1),
            shift: Vec3::new(
                shift.sample(&mut rng),
                shift.sample(&mut rng),
                shift.sample(&mut rng),
            ),
            depth_jitter_max: Self::DEPTH_JITTER,
            seed: rng.gen(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParams(m));
        if !(self.yaw.abs() <= Self::MAX_YAW) {
            return bad(format!("yaw {} outside [-pi/4, pi/4]", self.yaw));
        }
        if !(Self::SCALE_RANGE.0..=Self::SCALE_RANGE.1).contains(&self.scale) {
            return bad(format!("scale {} outside [0.75, 1]", self.scale));
        }
        if !self
            .shift
            .iter()
            .all(|s| (0.0..=Self::MAX_SHIFT).contains(s))
        {
            return bad(format!(
                "shift {:?} outside [0, 0.2]",
                self.shift.as_slice()
            ));
        }
        if !(self.depth_jitter_max >= 0.0 && self.depth_jitter_max.is_finite()) {
            return bad(format!(
                "depth jitter {} must be nonnegative",
                self.depth_jitter_max
            ));
        }
        Ok(())
    }

    fn similarity(&self) -> (Matrix3<f64>, Vec3) {
        (yaw_rotation(self.yaw) * self.scale, self.shift)
    }
}

/// Apply yaw, isotropic scale and shift to points and boxes alike. For
/// camera-space clouds (`depth_like`) each point first moves along its
/// viewing ray by a uniform depth offset.
pub fn augment(
    cloud: &PointCloud,
    boxes: &[GravityBox],
    depth_like: bool,
    params: &AugmentationParams,
) -> Result<(PointCloud, Vec<GravityBox>), GeometryError> {
    params.validate()?;
    let mut points = cloud.points.clone();
    if depth_like && params.depth_jitter_max > 0.0 {
        if let Some(p) = points.iter().find(|p| !(p.z > 0.0)) {
            return Err(GeometryError::BehindCamera([p.x, p.y, p.z]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let noise = Uniform::new_inclusive(-params.depth_jitter_max, params.depth_jitter_max);
        for p in &mut points {
            let d = noise.sample(&mut rng);
            *p *= (p.z + d) / p.z;
        }
    }
    let (m, t) = params.similarity();
    for p in &mut points {
        *p = m * *p + t;
    }
    let boxes = boxes
        .iter()
        .map(|b| GravityBox {
            center: m * b.center + t,
            scale: b.scale * params.scale,
            yaw: wrap_angle(b.yaw + params.yaw),
        })
        .collect();
    Ok((cloud.with_points(points), boxes))
}

/// Area-weighted uniform samples on the surface, with the source face of
/// each sample.
pub fn sample_surface_with_faces(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<u32>), GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroSamples);
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let faces = WeightedIndex::new(&areas).map_err(|_| GeometryError::ZeroArea)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for _ in 0..n {
        let f = faces.sample(&mut rng);
        let [a, b, c] = mesh.triangle(f);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        source.push(f as u32);
    }
    Ok((PointCloud::from_points(points), source))
}

pub fn sample_surface(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    sample_surface_with_faces(mesh, n, seed).map(|(c, _)| c)
}

/// `n` entries of the cloud: without replacement when `n <= len`,
/// otherwise with replacement.
pub fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroSamples);
    }
    if cloud.is_empty() {
        return Err(GeometryError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = cloud.len();
    let idx: Vec<usize> = if n <= len {
        sample_indices(&mut rng, len, n).into_vec()
    } else {
        let pick = Uniform::new(0, len);
        (0..n).map(|_| pick.sample(&mut rng)).collect()
    };
    Ok(cloud.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 120.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
        let js: CameraIntrinsics = serde_json::from_str(
            r#"{"fx":500,"fy":500,"cx":320,"cy":240,"width":640,"height":480}"#,
        )
        .unwrap();
        assert_eq!(js.width, 640);
    }

    #[test]
    fn principal_ray_and_offset_pixel() {
        let k = cam();
        let depth = DepthMap::constant(64, 48, 2.0).unwrap();
        let pc = back_project(&depth, &k, None).unwrap();
        assert_eq!(pc.len(), 64 * 48);
        let px = pc.pixels.as_ref().unwrap();
        let at = |u: f64, v: f64| pc.points[px.iter().position(|p| *p == [u, v]).unwrap()];
        assert_eq!(at(32.0, 24.0), Vec3::new(0.0, 0.0, 2.0));
        // fx = 100 scaled to the right by 100 px needs a wider camera
        let wide = CameraIntrinsics::new(100.0, 100.0, 10.0, 5.0, 128, 10).unwrap();
        assert_eq!(wide.unproject(110.0, 5.0, 2.0), Vec3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn invalid_depth_and_mask_filtering() {
        let k = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 3, 2).unwrap();
        let depth = DepthMap::new(3, 2, vec![1.0, 0.0, 2.0, 3.0, 0.0, 1.5]).unwrap();
        assert_eq!(back_project(&depth, &k, None).unwrap().len(), 4);
        let mask = InstanceMask::new(3, 2, vec![true, true, false, true, true, true]).unwrap();
        let pc = back_project(&depth, &k, Some(&mask)).unwrap();
        assert_eq!(pc.pixels.unwrap(), vec![[0.0, 0.0], [0.0, 1.0], [2.0, 1.0]]);
        assert!(DepthMap::new(3, 2, vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let k = cam();
        let depth = DepthMap::constant(64, 48, 1.0).unwrap();
        let mask = InstanceMask::new(2, 2, vec![true; 4]).unwrap();
        let err = back_project(&depth, &k, Some(&mask)).unwrap_err();
        assert_eq!(
            err,
            GeometryError::DimensionMismatch {
                what: "mask vs depth map",
                expected: (64, 48),
                found: (2, 2)
            }
        );
        assert!(err.to_string().contains("(64, 48)"));
    }

    #[test]
    fn projection_cases() {
        let k = cam();
        assert_eq!(k.project(&Vec3::new(0.0, 0.0, 1.0)).unwrap(), (32.0, 24.0));
        assert!(matches!(
            k.project(&Vec3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera(_))
        ));
        let p = k.unproject(37.0, 12.0, 3.7);
        let (u, v) = k.project(&p).unwrap();
        assert!((u - 37.0).abs() < 1e-9 && (v - 12.0).abs() < 1e-9);
    }

    fn ramp_map() -> FeatureMap {
        // 4x2 cells, 2 channels: (x, 10 y)
        let mut vals = Vec::new();
        for y in 0..2 {
            for x in 0..4 {
                vals.extend([x as f32, 10.0 * y as f32]);
            }
        }
        FeatureMap::new(4, 2, 2, vals).unwrap()
    }

    #[test]
    fn gather_cases() {
        let c = FeatureMap::new(3, 3, 1, vec![0.25; 9]).unwrap();
        for f in gather_features(&c, &[[0.0, 0.0], [7.3, 2.9], [-5.0, 100.0]], (8, 8)) {
            assert_eq!(f, vec![0.25]);
        }
        // image 8x4 onto 4x2 cells: cell (x, y) center is pixel (2x + 0.5, 2y + 0.5)
        let fm = ramp_map();
        let f = gather_features(&fm, &[[2.5, 0.5], [3.5, 0.5], [1.5, 1.5]], (8, 4));
        assert_eq!(f[0], vec![1.0, 0.0]);
        assert!((f[1][0] - 1.5).abs() < 1e-9);
        assert!((f[2][1] - 5.0).abs() < 1e-9);
        // beyond the last cell center clamps to the edge value
        assert_eq!(
            gather_features(&fm, &[[100.0, -3.0]], (8, 4))[0],
            vec![3.0, 0.0]
        );
    }

    #[test]
    fn frame_cases() {
        let cube = [Vec3::zeros(), Vec3::repeat(2.0)];
        let f = compute_unit_cube_frame(&cube).unwrap();
        assert_eq!(f.center, Vec3::repeat(1.0));
        assert_eq!(f.half_extent, 1.0);

        let slab = [Vec3::zeros(), Vec3::new(4.0, 2.0, 2.0)];
        let f = compute_unit_cube_frame(&slab).unwrap();
        assert_eq!(f.half_extent, 2.0);
        let n = f.apply_all(&slab);
        assert_eq!((n[0].x, n[1].x), (-1.0, 1.0));
        assert_eq!((n[0].y, n[1].y), (-0.5, 0.5));

        assert_eq!(
            compute_unit_cube_frame(&[Vec3::repeat(3.0); 5]),
            Err(GeometryError::ZeroExtent)
        );
        assert_eq!(compute_unit_cube_frame(&[]), Err(GeometryError::Empty));
        let p = Vec3::new(1.0, -2.0, 3.0);
        assert_eq!(NormalizationFrame::identity().apply(&p), p);
    }

    #[test]
    fn augment_identity_and_yaw() {
        let cloud =
            PointCloud::from_points(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, 0.2, 2.0)]);
        let b = GravityBox::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.4, 0.5, 0.6), 0.2).unwrap();
        let (same, bs) = augment(&cloud, &[b], true, &AugmentationParams::identity()).unwrap();
        assert_eq!(same, cloud);
        assert_eq!(bs, vec![b]);

        let p = AugmentationParams {
            yaw: FRAC_PI_4,
            ..AugmentationParams::identity()
        };
        let (rot, bs) = augment(&cloud, &[b], false, &p).unwrap();
        let h = 0.5f64.sqrt();
        assert!((rot.points[0] - Vec3::new(h, 0.0, -h)).amax() < 1e-15);
        assert!((bs[0].yaw - (0.2 + FRAC_PI_4)).abs() < 1e-15);
    }

    #[test]
    fn augment_keeps_boxes_consistent() {
        let b = GravityBox::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.4, 0.5, 0.6), -0.7).unwrap();
        let corners = crate::pose::corners_from_box(&b);
        let cloud = PointCloud::from_points(corners.0.to_vec());
        let p = AugmentationParams {
            depth_jitter_max: 0.0,
            ..AugmentationParams::random(9)
        };
        let (moved, bs) = augment(&cloud, &[b], false, &p).unwrap();
        let expect = crate::pose::corners_from_box(&bs[0]);
        for (a, e) in moved.points.iter().zip(expect.0.iter()) {
            assert!((a - e).amax() < 1e-12);
        }
    }

    #[test]
    fn augment_rejects_out_of_range_and_is_deterministic() {
        let cloud = PointCloud::from_points(vec![Vec3::new(0.1, 0.2, 1.5); 50]);
        let bad = AugmentationParams {
            scale: 0.5,
            ..AugmentationParams::identity()
        };
        assert!(matches!(
            augment(&cloud, &[], false, &bad),
            Err(GeometryError::InvalidParams(_))
        ));
        let p = AugmentationParams::random(4);
        let a = augment(&cloud, &[], true, &p).unwrap();
        let b = augment(&cloud, &[], true, &p).unwrap();
        assert_eq!(a, b);
        // jitter moves points along the ray: the x/z ratio is preserved
        let q = AugmentationParams {
            depth_jitter_max: 0.02,
            ..AugmentationParams::identity()
        };
        let (j, _) = augment(&cloud, &[], true, &q).unwrap();
        for p in &j.points {
            assert!((p.x / p.z - 0.1 / 1.5).abs() < 1e-12);
            assert!((p.z - 1.5).abs() <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn single_triangle_samples_inside() {
        let m = crate::corpus::triangle();
        let pc = sample_surface(&m, 2000, 3).unwrap();
        let [a, b, c] = m.triangle(0);
        let n = (b - a).cross(&(c - a));
        for p in &pc.points {
            // barycentric coordinates from sub-triangle areas
            let w = [
                (b - p).cross(&(c - p)).dot(&n),
                (c - p).cross(&(a - p)).dot(&n),
                (a - p).cross(&(b - p)).dot(&n),
            ];
            let s = n.norm_squared();
            assert!(w.iter().all(|x| x / s >= -1e-12));
            assert!(((w[0] + w[1] + w[2]) / s - 1.0).abs() < 1e-12);
        }
        assert_eq!(sample_surface(&m, 5, 1), sample_surface(&m, 5, 1));
        assert_eq!(sample_surface(&m, 0, 1), Err(GeometryError::ZeroSamples));
        let flat = TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]);
        assert_eq!(sample_surface(&flat, 5, 1), Err(GeometryError::ZeroArea));
    }

    #[test]
    fn subsample_full_size_is_permutation() {
        let pts: Vec<Vec3> = (0..100).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::from_points(pts.clone());
        let s = subsample(&cloud, 100, 7).unwrap();
        let mut xs: Vec<f64> = s.points.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, pts.iter().map(|p| p.x).collect::<Vec<_>>());
        assert_eq!(subsample(&cloud, 250, 7).unwrap().len(), 250);
    }

    proptest! {
        #[test]
        fn frame_roundtrip(
            pts in proptest::collection::vec(proptest::array::uniform3(-1e3f64..1e3), 2..40),
        ) {
            let pts: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
            if let Ok(f) = compute_unit_cube_frame(&pts) {
                let n = f.apply_all(&pts);
                for (p, q) in pts.iter().zip(f.invert_all(&n).iter()) {
                    prop_assert!((p - q).norm() <= 1e-9 * p.norm().max(f.half_extent));
                }
                for q in &n {
                    prop_assert!(q.amax() <= 1.0 + 1e-12);
                }
            }
        }

        #[test]
        fn gather_is_convex(u in -5.0f64..20.0, v in -5.0f64..20.0, vals in proptest::collection::vec(-9.0f32..9.0, 12)) {
            let fm = FeatureMap::new(4, 3, 1, vals.clone()).unwrap();
            let out = gather_features(&fm, &[[u, v]], (16, 12))[0][0];
            let lo = vals.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
            let hi = vals.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
            prop_assert!(out >= lo - 1e-9 && out <= hi + 1e-9);
        }

        #[test]
        fn project_inverts_back_project(u in 0usize..64, v in 0usize..48, d in 0.01f64..50.0) {
            let k = cam();
            let (pu, pv) = k.project(&k.unproject(u as f64, v as f64, d)).unwrap();
            prop_assert!((pu - u as f64).abs() <= 1e-9 && (pv - v as f64).abs() <= 1e-9);
        }
    }
}
