//! Depth maps, instance masks, feature maps and camera intrinsics.
//!
//! Depth comes as a single-channel PFM in meters or a 16-bit binary PGM in
//! millimeters; zero means no reading. Masks are 8-bit binary PGMs (any
//! nonzero sample is set) or run-length JSON sidecars. Feature maps use a
//! small `FMAP` container: magic, then width, height and channels as LE
//! `u32`, then LE `f32` values in row-major `height x width x channels`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geometry::{CameraIntrinsics, DepthMap, FeatureMap, InstanceMask};

const FMAP_MAGIC: &[u8; 4] = b"FMAP";

fn geometry(format: &'static str) -> impl Fn(crate::geometry::GeometryError) -> IoError {
    move |e| IoError::format(format, e.to_string())
}

/// Whitespace-separated header fields of a netpbm-style file, skipping
/// `#` comments. Consumes exactly one whitespace byte after the last field.
fn header_fields(
    data: &[u8],
    n: usize,
    format: &'static str,
) -> Result<(Vec<String>, usize), IoError> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < n {
        while i < data.len() && data[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < data.len() && data[i] == b'#' {
            while i < data.len() && data[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < data.len() && !data[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(IoError::format(format, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&data[start..i]).into_owned());
    }
    if i >= data.len() {
        return Err(IoError::format(format, "missing data after header"));
    }
    Ok((fields, i + 1))
}

fn dim(s: &str, format: &'static str) -> Result<usize, IoError> {
    s.parse()
        .map_err(|_| IoError::format(format, format!("bad dimension {s:?}")))
}

/// Non-finite samples are read as "no reading".
pub fn read_pfm<R: Read>(mut r: R) -> Result<DepthMap, IoError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let (f, start) = header_fields(&data, 4, "pfm")?;
    if f[0] != "Pf" {
        return Err(IoError::format(
            "pfm",
            format!("expected single-channel Pf, found {:?}", f[0]),
        ));
    }
    let (w, h) = (dim(&f[1], "pfm")?, dim(&f[2], "pfm")?);
    let scale: f64 = f[3]
        .parse()
        .map_err(|_| IoError::format("pfm", "bad scale"))?;
    let little = scale < 0.0;
    let body = &data[start..];
    if body.len() != w * h * 4 {
        return Err(IoError::format(
            "pfm",
            format!("{} data bytes for {w}x{h}", body.len()),
        ));
    }
    let mut values = vec![0.0; w * h];
    for (k, c) in body.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        } as f64;
        // rows are stored bottom to top
        let (x, y) = (k % w, h - 1 - k / w);
        values[y * w + x] = if v.is_finite() { v } else { 0.0 };
    }
    DepthMap::new(w, h, values).map_err(geometry("pfm"))
}

pub fn write_pfm<W: Write>(w: &mut W, depth: &DepthMap) -> Result<(), IoError> {
    let (width, height) = depth.dims();
    write!(w, "Pf\n{width} {height}\n-1.0\n")?;
    for y in (0..height).rev() {
        for x in 0..width {
            w.write_all(&(depth.get(x, y) as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_pgm_samples<R: Read>(mut r: R) -> Result<(usize, usize, u32, Vec<u32>), IoError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let (f, start) = header_fields(&data, 4, "pgm")?;
    if f[0] != "P5" {
        return Err(IoError::format(
            "pgm",
            format!("expected binary P5, found {:?}", f[0]),
        ));
    }
    let (w, h) = (dim(&f[1], "pgm")?, dim(&f[2], "pgm")?);
    let maxval: u32 = f[3]
        .parse()
        .map_err(|_| IoError::format("pgm", "bad maxval"))?;
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::format(
            "pgm",
            format!("maxval {maxval} out of range"),
        ));
    }
    let wide = maxval > 255;
    let body = &data[start..];
    let need = w * h * if wide { 2 } else { 1 };
    if body.len() != need {
        return Err(IoError::format(
            "pgm",
            format!("{} data bytes, expected {need}", body.len()),
        ));
    }
    let samples = if wide {
        body.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    } else {
        body.iter().map(|&b| b as u32).collect()
    };
    Ok((w, h, maxval, samples))
}

/// 16-bit PGM with millimeter samples.
pub fn read_depth_pgm<R: Read>(r: R) -> Result<DepthMap, IoError> {
    let (w, h, _, samples) = read_pgm_samples(r)?;
    DepthMap::new(
        w,
        h,
        samples.into_iter().map(|s| s as f64 / 1000.0).collect(),
    )
    .map_err(geometry("pgm"))
}

/// Depths are rounded to whole millimeters; anything beyond 65.535 m is
/// rejected.
pub fn write_depth_pgm<W: Write>(w: &mut W, depth: &DepthMap) -> Result<(), IoError> {
    let (width, height) = depth.dims();
    write!(w, "P5\n{width} {height}\n65535\n")?;
    for &d in depth.values() {
        let mm = (d * 1000.0).round();
        if mm > 65535.0 {
            return Err(IoError::format(
                "pgm",
                format!("depth {d} m does not fit 16-bit millimeters"),
            ));
        }
        w.write_all(&(mm as u16).to_be_bytes())?;
    }
    Ok(())
}

pub fn read_mask_pgm<R: Read>(r: R) -> Result<InstanceMask, IoError> {
    let (w, h, _, samples) = read_pgm_samples(r)?;
    InstanceMask::new(w, h, samples.into_iter().map(|s| s != 0).collect()).map_err(geometry("pgm"))
}

pub fn write_mask_pgm<W: Write>(w: &mut W, mask: &InstanceMask) -> Result<(), IoError> {
    let (width, height) = mask.dims();
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = mask
        .values()
        .iter()
        .map(|&m| if m { 255 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Row-major run lengths alternating unset/set, starting with unset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<usize>,
}

impl RleMask {
    pub fn encode(mask: &InstanceMask) -> RleMask {
        let (width, height) = mask.dims();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0;
        for &m in mask.values() {
            if m != current {
                counts.push(run);
                run = 0;
                current = m;
            }
            run += 1;
        }
        counts.push(run);
        RleMask {
            width,
            height,
            counts,
        }
    }

    pub fn decode(&self) -> Result<InstanceMask, IoError> {
        let total: usize = self.counts.iter().sum();
        if total != self.width * self.height {
            return Err(IoError::format(
                "rle",
                format!(
                    "runs cover {total} pixels of a {}x{} mask",
                    self.width, self.height
                ),
            ));
        }
        let mut values = Vec::with_capacity(total);
        for (i, &c) in self.counts.iter().enumerate() {
            values.extend(std::iter::repeat_n(i % 2 == 1, c));
        }
        InstanceMask::new(self.width, self.height, values).map_err(geometry("rle"))
    }
}

pub fn read_fmap<R: Read>(mut r: R) -> Result<FeatureMap, IoError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 16 || &data[..4] != FMAP_MAGIC {
        return Err(IoError::format("fmap", "missing FMAP header"));
    }
    let word =
        |i: usize| u32::from_le_bytes([data[i], data[i + 1], data[i + 2], data[i + 3]]) as usize;
    let (w, h, c) = (word(4), word(8), word(12));
    let body = &data[16..];
    if Some(body.len())
        != w.checked_mul(h)
            .and_then(|n| n.checked_mul(c))
            .and_then(|n| n.checked_mul(4))
    {
        return Err(IoError::format(
            "fmap",
            format!("{} data bytes for {w}x{h}x{c}", body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureMap::new(w, h, c, values).map_err(geometry("fmap"))
}

pub fn write_fmap<W: Write>(w: &mut W, fm: &FeatureMap) -> Result<(), IoError> {
    let (width, height, channels) = fm.dims();
    w.write_all(FMAP_MAGIC)?;
    for d in [width, height, channels] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in fm.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn ext(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// `.pfm` (meters) or `.pgm` (millimeters).
pub fn load_depth(path: &Path) -> Result<DepthMap, IoError> {
    let r = BufReader::new(File::open(path)?);
    match ext(path).as_str() {
        "pfm" => read_pfm(r),
        "pgm" => read_depth_pgm(r),
        other => Err(IoError::UnknownExtension(other.into())),
    }
}

pub fn save_depth(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    match ext(path).as_str() {
        "pfm" => write_pfm(&mut w, depth)?,
        "pgm" => write_depth_pgm(&mut w, depth)?,
        other => return Err(IoError::UnknownExtension(other.into())),
    }
    w.flush()?;
    Ok(())
}

/// `.pgm` or a `.json` run-length sidecar.
pub fn load_mask(path: &Path) -> Result<InstanceMask, IoError> {
    let r = BufReader::new(File::open(path)?);
    match ext(path).as_str() {
        "pgm" => read_mask_pgm(r),
        "json" => serde_json::from_reader::<_, RleMask>(r)?.decode(),
        other => Err(IoError::UnknownExtension(other.into())),
    }
}

pub fn load_fmap(path: &Path) -> Result<FeatureMap, IoError> {
    read_fmap(BufReader::new(File::open(path)?))
}

pub fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    let k: CameraIntrinsics = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    k.validate().map_err(geometry("intrinsics"))?;
    Ok(k)
}
