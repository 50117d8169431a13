//! Gravity-aligned box poses as corner tokens, and recovery of a
//! local-to-global affine map from decoded corners.
//!
//! The vertical axis is `+y`. A box with center `c`, side lengths `s` and
//! yaw `θ` has corners `c + R_y(θ) · diag(s / 2) · σ` for the eight sign
//! vectors `σ ∈ {-1, +1}^3`, enumerated in binary-count order over
//! `(x, y, z)` with `z` varying fastest:
//!
//! ```text
//! 0 (-,-,-)  1 (-,-,+)  2 (-,+,-)  3 (-,+,+)
//! 4 (+,-,-)  5 (+,-,+)  6 (+,+,-)  7 (+,+,+)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{MeshVocabulary, Scheme, TokenClass, TokenSequence};
use crate::linalg::PivotedQr;
use crate::mesh::{TriangleMesh, Vec3};
use crate::quantize::QuantizationGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("pose sequence has {found} tokens, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("pose token {token} at offset {offset} is not a {expected} token")]
    TokenClass {
        offset: usize,
        token: u32,
        expected: &'static str,
    },
    #[error("local corners are degenerate (rank {rank} < 4)")]
    DegenerateFit { rank: usize },
    #[error("transform column {axis} has near-zero length")]
    DegenerateScale { axis: usize },
}

/// Rotation by `yaw` about the vertical (`y`) axis.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// 7-DoF box: center, side lengths, yaw about `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityBox {
    pub center: Vec3,
    pub scale: Vec3,
    pub yaw: f64,
}

impl GravityBox {
    pub fn new(center: Vec3, scale: Vec3, yaw: f64) -> Result<Self, PoseError> {
        let b = GravityBox {
            center,
            scale,
            yaw: wrap_angle(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        if !(self.center.iter().all(|c| c.is_finite()) && self.yaw.is_finite()) {
            return Err(PoseError::InvalidBox("non-finite center or yaw".into()));
        }
        if !self.scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(PoseError::InvalidBox(format!(
                "scale must be positive, got {:?}",
                self.scale.as_slice()
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.scale.product()
    }
}

/// Eight box corners in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CornerSet(pub [Vec3; 8]);

/// Sign vector of canonical corner `k`.
pub fn corner_signs(k: usize) -> Vec3 {
    let s = |bit: usize| if (k >> bit) & 1 == 1 { 1.0 } else { -1.0 };
    Vec3::new(s(2), s(1), s(0))
}

impl CornerSet {
    /// Corners of the canonical cube `[-1, 1]^3`.
    pub fn canonical() -> Self {
        CornerSet(std::array::from_fn(corner_signs))
    }

    pub fn max_abs_diff(&self, other: &CornerSet) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

pub fn corners_from_box(b: &GravityBox) -> CornerSet {
    affine_from_box(b).apply_corners(&CornerSet::canonical())
}

/// A 3x4 affine map `x -> linear · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 4]; 3]", from = "[[f64; 4]; 3]")]
pub struct AffineTransform {
    pub linear: Matrix3<f64>,
    pub translation: Vec3,
}

impl From<AffineTransform> for [[f64; 4]; 3] {
    fn from(t: AffineTransform) -> Self {
        std::array::from_fn(|i| {
            [
                t.linear[(i, 0)],
                t.linear[(i, 1)],
                t.linear[(i, 2)],
                t.translation[i],
            ]
        })
    }
}

impl From<[[f64; 4]; 3]> for AffineTransform {
    fn from(rows: [[f64; 4]; 3]) -> Self {
        AffineTransform {
            linear: Matrix3::from_fn(|i, j| rows[i][j]),
            translation: Vec3::new(rows[0][3], rows[1][3], rows[2][3]),
        }
    }
}

impl Default for AffineTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self {
            linear: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.linear * p + self.translation
    }

    pub fn apply_corners(&self, c: &CornerSet) -> CornerSet {
        CornerSet(c.0.map(|p| self.apply(&p)))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineTransform) -> AffineTransform {
        AffineTransform {
            linear: self.linear * other.linear,
            translation: self.linear * other.translation + self.translation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear
            .iter()
            .chain(self.translation.iter())
            .all(|v| v.is_finite())
    }

    /// Largest absolute row sum of the linear part.
    pub fn linear_inf_norm(&self) -> f64 {
        (0..3)
            .map(|i| self.linear.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Affine map taking the canonical cube onto the box.
pub fn affine_from_box(b: &GravityBox) -> AffineTransform {
    AffineTransform {
        linear: yaw_rotation(b.yaw) * Matrix3::from_diagonal(&(b.scale * 0.5)),
        translation: b.center,
    }
}

/// Read `(center, scale, yaw)` back from an affine map. Yaw comes from the
/// horizontal part of the first column; scale from the column norms.
pub fn box_from_affine(t: &AffineTransform) -> Result<GravityBox, PoseError> {
    if !t.is_finite() {
        return Err(PoseError::InvalidBox("non-finite transform".into()));
    }
    let mut scale = Vec3::zeros();
    for axis in 0..3 {
        let n = t.linear.column(axis).norm();
        if n < 1e-12 {
            return Err(PoseError::DegenerateScale { axis });
        }
        scale[axis] = 2.0 * n;
    }
    let c0 = t.linear.column(0);
    let yaw = wrap_angle((-c0[2]).atan2(c0[0]));
    Ok(GravityBox {
        center: t.translation,
        scale,
        yaw,
    })
}

/// Apply `t` to every vertex.
pub fn transform_mesh(t: &AffineTransform, mesh: &TriangleMesh) -> TriangleMesh {
    mesh.map_vertices(|p| t.apply(p))
}

/// Result of a least-squares corner fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub transform: AffineTransform,
    /// Sum of squared residuals over all corner coordinates.
    pub residual: f64,
}

/// Best affine map in the least-squares sense taking `local` onto `global`:
/// `argmin_T || X_global - [X_local 1] T^T ||^2`, one column-pivoted QR
/// shared by the three output coordinates.
pub fn fit_affine(local: &CornerSet, global: &CornerSet) -> Result<AffineFit, PoseError> {
    fit_affine_points(&local.0, &global.0)
}

/// [`fit_affine`] over any number (>= 4) of correspondences.
pub fn fit_affine_points(local: &[Vec3], global: &[Vec3]) -> Result<AffineFit, PoseError> {
    assert_eq!(local.len(), global.len());
    let m = local.len();
    if m < 4 {
        return Err(PoseError::DegenerateFit { rank: m });
    }
    let a = DMatrix::from_fn(m, 4, |i, j| if j < 3 { local[i][j] } else { 1.0 });
    let b = DMatrix::from_fn(m, 3, |i, j| global[i][j]);
    let qr = PivotedQr::new(&a, 1e-10);
    if !qr.is_full_rank() {
        return Err(PoseError::DegenerateFit { rank: qr.rank() });
    }
    // x is T^T: rows 0..3 hold the linear part transposed, row 3 the translation
    let x = qr.solve(&b);
    let transform = AffineTransform {
        linear: Matrix3::from_fn(|i, j| x[(j, i)]),
        translation: Vec3::new(x[(3, 0)], x[(3, 1)], x[(3, 2)]),
    };
    let r = &b - &a * &x;
    Ok(AffineFit {
        transform,
        residual: r.norm_squared(),
    })
}

/// Widen any column whose length fell below half a bin (a box extent below
/// one bin width) so the map stays invertible. A collapsed column is
/// rebuilt along the yaw-rotated axis.
pub fn inflate_collapsed(t: &AffineTransform, grid: QuantizationGrid) -> AffineTransform {
    let min_len = 0.5 * grid.bin_width();
    let norms: Vec<f64> = (0..3).map(|j| t.linear.column(j).norm()).collect();
    if norms.iter().all(|&n| n >= min_len) {
        return *t;
    }
    let yaw = if norms[0] >= norms[2] {
        let c = t.linear.column(0);
        (-c[2]).atan2(c[0])
    } else {
        let c = t.linear.column(2);
        c[0].atan2(c[2])
    };
    let rot = yaw_rotation(yaw);
    let mut out = *t;
    for j in 0..3 {
        if norms[j] < min_len {
            let dir = if norms[j] > 1e-12 {
                t.linear.column(j) / norms[j]
            } else {
                rot.column(j).into_owned()
            };
            out.linear.set_column(j, &(dir * min_len));
        }
    }
    out
}

/// How a pose is spelled with the mesh vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseStyle {
    /// Three axis tokens per corner.
    PerAxis,
    /// A block token and an offset token per corner.
    BlockOffset,
}

impl PoseStyle {
    pub fn for_scheme(scheme: Scheme) -> PoseStyle {
        match scheme {
            Scheme::Coordinate | Scheme::Compact => PoseStyle::PerAxis,
            Scheme::BlockPatch => PoseStyle::BlockOffset,
        }
    }

    pub fn token_count(self) -> usize {
        match self {
            PoseStyle::PerAxis => 24,
            PoseStyle::BlockOffset => 16,
        }
    }
}

/// Tokenize a box as its eight quantized corners. Corners outside the
/// unit cube are clamped onto the boundary bins.
pub fn encode_pose(b: &GravityBox, vocab: MeshVocabulary) -> TokenSequence {
    let grid = vocab.grid;
    let style = PoseStyle::for_scheme(vocab.scheme);
    let mut tokens = Vec::with_capacity(style.token_count());
    for p in corners_from_box(b).0 {
        let q = p.map(|c| {
            grid.quantize(c)
                .unwrap_or(if c > 0.0 { grid.resolution() - 1 } else { 0 })
        });
        let q = [q[0], q[1], q[2]];
        match style {
            PoseStyle::PerAxis => tokens.extend(q.iter().map(|&i| vocab.coord_token(i))),
            PoseStyle::BlockOffset => {
                let (blk, off) = vocab.split_vertex(&q);
                tokens.push(vocab.block_token(blk));
                tokens.push(vocab.offset_token(off));
            }
        }
    }
    TokenSequence::new(vocab, tokens)
}

/// Dequantize pose tokens into corners.
pub fn decode_corners(tokens: &[u32], vocab: MeshVocabulary) -> Result<CornerSet, PoseError> {
    let style = PoseStyle::for_scheme(vocab.scheme);
    if tokens.len() != style.token_count() {
        return Err(PoseError::Length {
            expected: style.token_count(),
            found: tokens.len(),
        });
    }
    let grid = vocab.grid;
    let class_err = |offset: usize, expected| PoseError::TokenClass {
        offset,
        token: tokens[offset],
        expected,
    };
    let mut corners = [Vec3::zeros(); 8];
    for (k, corner) in corners.iter_mut().enumerate() {
        let q = match style {
            PoseStyle::PerAxis => {
                let mut q = [0u32; 3];
                for (axis, slot) in q.iter_mut().enumerate() {
                    let off = 3 * k + axis;
                    match vocab.classify(tokens[off]) {
                        Some(TokenClass::Coord(b)) => *slot = b,
                        _ => return Err(class_err(off, "coord")),
                    }
                }
                q
            }
            PoseStyle::BlockOffset => {
                let blk = match vocab.classify(tokens[2 * k]) {
                    Some(TokenClass::Block(b)) => b,
                    _ => return Err(class_err(2 * k, "block")),
                };
                let off = match vocab.classify(tokens[2 * k + 1]) {
                    Some(TokenClass::Offset(o)) => o,
                    _ => return Err(class_err(2 * k + 1, "offset")),
                };
                vocab
                    .join_vertex(blk, off)
                    .ok_or_else(|| class_err(2 * k + 1, "in-grid offset"))?
            }
        };
        *corner = Vec3::new(grid.center(q[0]), grid.center(q[1]), grid.center(q[2]));
    }
    Ok(CornerSet(corners))
}

/// Decoded pose tokens to the local-to-global map of the object.
pub fn pose_transform(tokens: &[u32], vocab: MeshVocabulary) -> Result<AffineFit, PoseError> {
    let global = decode_corners(tokens, vocab)?;
    let fit = fit_affine(&CornerSet::canonical(), &global)?;
    Ok(AffineFit {
        transform: inflate_collapsed(&fit.transform, vocab.grid),
        residual: fit.residual,
    })
}
