//! The `KV3DVF1` vote-field container: the interchange format between an
//! external direction-vector predictor and this pipeline.
//!
//! Layout (little-endian): magic `"KV3DVF1\0"`, `u32` N, `u32` K, then
//! `N·3` float32 scene-point coordinates in meters, then `N·K·3` float32 unit
//! vectors, row-major by point then keypoint. A JSON mirror with the same
//! field names is accepted for debugging.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, UnitVec3, Vec3};
use crate::votefield::VoteField;

pub const VOTE_FIELD_MAGIC: &[u8; 8] = b"KV3DVF1\0";

/// Unit-norm slack accepted on load; float32 storage never lands exactly on
/// the sphere, so vectors within this tolerance are renormalized and anything
/// farther off is rejected.
const NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Serialize, Deserialize)]
struct VoteFieldJson {
    n: u32,
    k: u32,
    scene_points: Vec<[f64; 3]>,
    vectors: Vec<Vec<[f64; 3]>>,
}

/// Loads either format: binary when the magic matches, otherwise JSON.
pub fn load_vote_field(path: impl AsRef<Path>) -> Result<VoteField> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.len() >= VOTE_FIELD_MAGIC.len() && &bytes[..VOTE_FIELD_MAGIC.len()] == VOTE_FIELD_MAGIC
    {
        read_vote_field(&bytes[..])
    } else if bytes.first() == Some(&b'{') {
        let parsed: VoteFieldJson = serde_json::from_slice(&bytes)?;
        field_from_json(parsed)
    } else {
        let found = bytes[..bytes.len().min(8)].to_vec();
        Err(Error::MagicMismatch {
            expected: String::from_utf8_lossy(VOTE_FIELD_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        })
    }
}

/// Reads the binary container from any reader.
pub fn read_vote_field<R: Read>(mut reader: R) -> Result<VoteField> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let magic = take(&bytes, &mut cursor, 8, "magic")?;
    if magic != VOTE_FIELD_MAGIC {
        return Err(Error::MagicMismatch {
            expected: String::from_utf8_lossy(VOTE_FIELD_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let n = read_u32(&bytes, &mut cursor, "point count N")? as usize;
    let k = read_u32(&bytes, &mut cursor, "keypoint count K")? as usize;
    if k == 0 {
        return Err(Error::invalid("k", "container declares K = 0"));
    }

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = read_f32(&bytes, &mut cursor, "scene point")?;
        let y = read_f32(&bytes, &mut cursor, "scene point")?;
        let z = read_f32(&bytes, &mut cursor, "scene point")?;
        points.push(Point3::new(x as f64, y as f64, z as f64));
    }

    let mut vectors = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        let x = read_f32(&bytes, &mut cursor, "direction vector")?;
        let y = read_f32(&bytes, &mut cursor, "direction vector")?;
        let z = read_f32(&bytes, &mut cursor, "direction vector")?;
        vectors.push(validated_unit(Vec3::new(x as f64, y as f64, z as f64))?);
    }

    VoteField::new(PointCloud::new(points)?, vectors, k)
}

fn field_from_json(parsed: VoteFieldJson) -> Result<VoteField> {
    let n = parsed.n as usize;
    let k = parsed.k as usize;
    if parsed.scene_points.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "header says {} points, body has {}",
            n,
            parsed.scene_points.len()
        )));
    }
    if parsed.vectors.len() != n || parsed.vectors.iter().any(|row| row.len() != k) {
        return Err(Error::ShapeMismatch(format!(
            "vector grid is not {n}x{k}"
        )));
    }
    let points: Vec<Point3> = parsed.scene_points.into_iter().map(Point3::from).collect();
    let mut vectors = Vec::with_capacity(n * k);
    for row in parsed.vectors {
        for v in row {
            vectors.push(validated_unit(Vec3::new(v[0], v[1], v[2]))?);
        }
    }
    VoteField::new(PointCloud::new(points)?, vectors, k)
}

fn validated_unit(v: Vec3) -> Result<UnitVec3> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NormViolation {
            norm,
            tolerance: NORM_TOLERANCE,
        });
    }
    Ok(UnitVec3::new_unchecked(v / norm))
}

fn take<'a>(bytes: &'a [u8], cursor: &mut usize, len: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < *cursor + len {
        return Err(Error::TruncatedFile {
            what: what.to_string(),
            needed: len,
            got: bytes.len() - *cursor,
        });
    }
    let slice = &bytes[*cursor..*cursor + len];
    *cursor += len;
    Ok(slice)
}

fn read_u32(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<u32> {
    let slice = take(bytes, cursor, 4, what)?;
    Ok(u32::from_le_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

fn read_f32(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<f32> {
    let slice = take(bytes, cursor, 4, what)?;
    Ok(f32::from_le_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

pub fn save_vote_field(field: &VoteField, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_vote_field(field, BufWriter::new(file))
}

pub fn write_vote_field<W: Write>(field: &VoteField, mut writer: W) -> Result<()> {
    writer.write_all(VOTE_FIELD_MAGIC)?;
    writer.write_all(&(field.n() as u32).to_le_bytes())?;
    writer.write_all(&(field.k() as u32).to_le_bytes())?;
    for p in field.scene_points().iter() {
        for value in [p.x, p.y, p.z] {
            writer.write_all(&(value as f32).to_le_bytes())?;
        }
    }
    for v in field.vectors() {
        for value in [v.x, v.y, v.z] {
            writer.write_all(&(value as f32).to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn save_vote_field_json(field: &VoteField, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_vote_field_json(field, BufWriter::new(file))
}

pub fn write_vote_field_json<W: Write>(field: &VoteField, mut writer: W) -> Result<()> {
    let json = VoteFieldJson {
        n: field.n() as u32,
        k: field.k() as u32,
        scene_points: field
            .scene_points()
            .iter()
            .map(|p| [p.x, p.y, p.z])
            .collect(),
        vectors: (0..field.n())
            .map(|i| {
                (0..field.k())
                    .map(|j| {
                        let v = field.vector(i, j);
                        [v.x, v.y, v.z]
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_writer(&mut writer, &json)?;
    writer.flush()?;
    Ok(())
}
