//! Depth-map ingestion and pinhole backprojection.
//!
//! Depth files are single-channel images: 16-bit (or 8-bit) PGM with integer
//! samples, or 32-bit float PFM. A unit flag converts millimeter maps (the
//! common RGB-D convention) to meters on load. Masks are PGM images where
//! nonzero means "keep the pixel".

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Pinhole camera intrinsics in pixels.
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
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("fx/fy", "focal lengths must be > 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("width/height", "must be positive"));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64) {
            return Err(Error::invalid("cx", "must satisfy 0 <= cx < width"));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f64) {
            return Err(Error::invalid("cy", "must satisfy 0 <= cy < height"));
        }
        Ok(())
    }
}

pub fn load_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    let file = File::open(path.as_ref())?;
    let intrinsics: CameraIntrinsics = serde_json::from_reader(file)?;
    intrinsics.validate()?;
    Ok(intrinsics)
}

pub fn save_intrinsics(k: &CameraIntrinsics, path: impl AsRef<Path>) -> Result<()> {
    k.validate()?;
    let file = File::create(path.as_ref())?;
    serde_json::to_writer_pretty(file, k)?;
    Ok(())
}

/// Unit of the raw samples in a depth file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthUnit {
    Meters,
    Millimeters,
}

impl DepthUnit {
    fn scale(self) -> f64 {
        match self {
            DepthUnit::Meters => 1.0,
            DepthUnit::Millimeters => 1e-3,
        }
    }
}

/// Row-major depth values in meters; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("depth", "values must be finite and >= 0"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Nonzero-pixel mask paired with a depth image.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    valid: Vec<bool>,
}

impl BinaryMask {
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[v * self.width + u]
    }
}

/// Loads a PGM (P2/P5, 8- or 16-bit) or PFM (`Pf`) depth map.
pub fn load_depth(path: impl AsRef<Path>, unit: DepthUnit) -> Result<DepthImage> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    let (width, height, raw) = decode_single_channel(&bytes)?;
    let scale = unit.scale();
    DepthImage::new(width, height, raw.into_iter().map(|v| v * scale).collect())
}

/// Loads a PGM mask: nonzero sample means the pixel is kept.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    let (width, height, raw) = decode_single_channel(&bytes)?;
    Ok(BinaryMask {
        width,
        height,
        valid: raw.into_iter().map(|v| v != 0.0).collect(),
    })
}

fn decode_single_channel(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    match bytes.get(..2) {
        Some(b"P5") => decode_pgm_binary(bytes),
        Some(b"P2") => decode_pgm_ascii(bytes),
        Some(b"Pf") => decode_pfm(bytes),
        _ => Err(Error::UnsupportedFormat(
            "expected P2/P5 PGM or Pf PFM".into(),
        )),
    }
}

/// Reads the next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], cursor: &mut usize) -> Result<String> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if start == *cursor {
        return Err(Error::parse(
            format!("offset {start}"),
            "unexpected end of header",
        ));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
}

fn parse_header_3(bytes: &[u8], cursor: &mut usize) -> Result<(usize, usize, f64)> {
    let _magic = next_token(bytes, cursor)?;
    let width: usize = next_token(bytes, cursor)?
        .parse()
        .map_err(|_| Error::parse(format!("offset {cursor}"), "bad width"))?;
    let height: usize = next_token(bytes, cursor)?
        .parse()
        .map_err(|_| Error::parse(format!("offset {cursor}"), "bad height"))?;
    let third: f64 = next_token(bytes, cursor)?
        .parse()
        .map_err(|_| Error::parse(format!("offset {cursor}"), "bad maxval/scale"))?;
    Ok((width, height, third))
}

fn decode_pgm_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut cursor = 0usize;
    let (width, height, maxval) = parse_header_3(bytes, &mut cursor)?;
    if !(1.0..=65535.0).contains(&maxval) {
        return Err(Error::parse(format!("offset {cursor}"), "maxval out of range"));
    }
    // Exactly one whitespace byte separates the header from the samples.
    cursor += 1;
    let two_byte = maxval > 255.0;
    let sample_size = if two_byte { 2 } else { 1 };
    let needed = width * height * sample_size;
    let available = bytes.len().saturating_sub(cursor);
    if available < needed {
        return Err(Error::TruncatedFile {
            what: "PGM samples".into(),
            needed,
            got: available,
        });
    }
    let mut values = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let v = if two_byte {
            // Netpbm stores 16-bit samples big-endian.
            u16::from_be_bytes([bytes[cursor + 2 * i], bytes[cursor + 2 * i + 1]]) as f64
        } else {
            bytes[cursor + i] as f64
        };
        values.push(v);
    }
    Ok((width, height, values))
}

fn decode_pgm_ascii(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut cursor = 0usize;
    let (width, height, _maxval) = parse_header_3(bytes, &mut cursor)?;
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let token = next_token(bytes, &mut cursor)?;
        let v: f64 = token
            .parse()
            .map_err(|_| Error::parse(format!("offset {cursor}"), format!("bad sample '{token}'")))?;
        values.push(v);
    }
    Ok((width, height, values))
}

/// PFM grayscale: float32 samples, rows stored bottom-to-top, little-endian
/// when the scale token is negative.
fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut cursor = 0usize;
    let (width, height, scale) = parse_header_3(bytes, &mut cursor)?;
    cursor += 1; // single whitespace after the scale token
    let little_endian = scale < 0.0;
    let needed = width * height * 4;
    let available = bytes.len().saturating_sub(cursor);
    if available < needed {
        return Err(Error::TruncatedFile {
            what: "PFM samples".into(),
            needed,
            got: available,
        });
    }
    let mut values = vec![0.0f64; width * height];
    for row in 0..height {
        // PFM rows run bottom-to-top.
        let target_row = height - 1 - row;
        for col in 0..width {
            let at = cursor + (row * width + col) * 4;
            let raw: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            values[target_row * width + col] = v as f64;
        }
    }
    Ok((width, height, values))
}

/// Backprojects valid masked pixels through the pinhole model:
/// `(d·(u−cx)/fx, d·(v−cy)/fy, d)` for depth `d > 0`, row-major pixel order.
pub fn backproject(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    mask: Option<&BinaryMask>,
) -> Result<PointCloud> {
    k.validate()?;
    if depth.width != k.width || depth.height != k.height {
        return Err(Error::DimensionMismatch(format!(
            "depth is {}x{}, intrinsics expect {}x{}",
            depth.width, depth.height, k.width, k.height
        )));
    }
    if let Some(mask) = mask {
        if mask.width != depth.width || mask.height != depth.height {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, depth is {}x{}",
                mask.width, mask.height, depth.width, depth.height
            )));
        }
    }
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            if let Some(mask) = mask {
                if !mask.is_valid(u, v) {
                    continue;
                }
            }
            let d = depth.get(u, v);
            if d <= 0.0 {
                continue;
            }
            points.push(Point3::new(
                d * (u as f64 - k.cx) / k.fx,
                d * (v as f64 - k.cy) / k.fy,
                d,
            ));
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    #[test]
    fn intrinsics_validation() {
        let mut k = test_intrinsics();
        assert!(k.validate().is_ok());
        k.fx = 0.0;
        assert!(k.validate().is_err());
        k = test_intrinsics();
        k.cx = 640.0;
        assert!(k.validate().is_err());
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let k = test_intrinsics();
        let mut values = vec![0.0; 640 * 480];
        values[240 * 640 + 320] = 1.0;
        let depth = DepthImage::new(640, 480, values).unwrap();
        let cloud = backproject(&depth, &k, None).unwrap();
        assert_eq!(cloud.len(), 1);
        assert!((cloud[0] - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn off_axis_pixel_formula() {
        // fx = fy = 500; pixel (cx + 500, cy) at depth 2 -> (2, 0, 2).
        let k = CameraIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 100.0,
            cy: 100.0,
            width: 601,
            height: 200,
        };
        let mut values = vec![0.0; 601 * 200];
        values[100 * 601 + 600] = 2.0;
        let depth = DepthImage::new(601, 200, values).unwrap();
        let cloud = backproject(&depth, &k, None).unwrap();
        assert!((cloud[0] - Point3::new(2.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn synthetic_plane_backprojects_coplanar() {
        // Depth of a plane z = ax + by + c seen by the camera satisfies
        // d = c / (1 - a(u-cx)/fx - b(v-cy)/fy).
        let k = CameraIntrinsics {
            fx: 400.0,
            fy: 420.0,
            cx: 64.0,
            cy: 48.0,
            width: 128,
            height: 96,
        };
        let (a, b, c) = (0.08, -0.05, 1.3);
        let mut values = vec![0.0; 128 * 96];
        for v in 0..96 {
            for u in 0..128 {
                let denom = 1.0 - a * (u as f64 - k.cx) / k.fx - b * (v as f64 - k.cy) / k.fy;
                values[v * 128 + u] = c / denom;
            }
        }
        let depth = DepthImage::new(128, 96, values).unwrap();
        let cloud = backproject(&depth, &k, None).unwrap();
        assert_eq!(cloud.len(), 128 * 96);
        for p in cloud.iter() {
            let residual = (a * p.x + b * p.y + c - p.z).abs();
            assert!(residual < 1e-6, "plane residual {residual:.2e}");
        }
    }

    #[test]
    fn backproject_reproject_round_trip() {
        let k = test_intrinsics();
        let mut values = vec![0.0; 640 * 480];
        for v in (0..480).step_by(37) {
            for u in (0..640).step_by(41) {
                values[v * 640 + u] = 0.5 + (u + v) as f64 * 1e-3;
            }
        }
        let depth = DepthImage::new(640, 480, values.clone()).unwrap();
        let cloud = backproject(&depth, &k, None).unwrap();
        // Inverse pinhole: u = x fx / z + cx, v = y fy / z + cy.
        let mut idx = 0;
        for v in 0..480 {
            for u in 0..640 {
                if values[v * 640 + u] > 0.0 {
                    let p = cloud[idx];
                    let u_back = p.x * k.fx / p.z + k.cx;
                    let v_back = p.y * k.fy / p.z + k.cy;
                    assert!((u_back - u as f64).abs() < 1e-6);
                    assert!((v_back - v as f64).abs() < 1e-6);
                    idx += 1;
                }
            }
        }
        assert_eq!(idx, cloud.len());
    }

    #[test]
    fn mask_filters_pixels() {
        let k = test_intrinsics();
        let values = vec![1.0; 640 * 480];
        let depth = DepthImage::new(640, 480, values).unwrap();
        let mut valid = vec![false; 640 * 480];
        valid[0] = true;
        valid[640 * 480 - 1] = true;
        let mask = BinaryMask {
            width: 640,
            height: 480,
            valid,
        };
        let cloud = backproject(&depth, &k, Some(&mask)).unwrap();
        assert_eq!(cloud.len(), 2);
    }

    #[test]
    fn dimension_mismatches_rejected() {
        let k = test_intrinsics();
        let depth = DepthImage::new(10, 10, vec![1.0; 100]).unwrap();
        assert!(matches!(
            backproject(&depth, &k, None),
            Err(Error::DimensionMismatch(_))
        ));

        let full = DepthImage::new(640, 480, vec![1.0; 640 * 480]).unwrap();
        let mask = BinaryMask {
            width: 10,
            height: 10,
            valid: vec![true; 100],
        };
        assert!(matches!(
            backproject(&full, &k, Some(&mask)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pgm16_is_big_endian_and_unit_scaled() {
        // 2x1, maxval 65535, samples 1000 and 2500 mm.
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&1000u16.to_be_bytes());
        bytes.extend_from_slice(&2500u16.to_be_bytes());
        let (w, h, raw) = decode_single_channel(&bytes).unwrap();
        assert_eq!((w, h), (2, 1));
        assert_eq!(raw, vec![1000.0, 2500.0]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.pgm");
        std::fs::write(&path, &bytes).unwrap();
        let depth = load_depth(&path, DepthUnit::Millimeters).unwrap();
        assert!((depth.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((depth.get(1, 0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn pgm8_and_ascii_variants() {
        let bytes = b"P5\n# comment\n3 1\n255\n\x00\x07\xff".to_vec();
        let (_, _, raw) = decode_single_channel(&bytes).unwrap();
        assert_eq!(raw, vec![0.0, 7.0, 255.0]);

        let ascii = b"P2\n3 1\n255\n0 7 255\n".to_vec();
        let (_, _, raw) = decode_single_channel(&ascii).unwrap();
        assert_eq!(raw, vec![0.0, 7.0, 255.0]);
    }

    #[test]
    fn pfm_rows_are_bottom_up() {
        // 1 column, 2 rows: file stores the bottom row first.
        let mut bytes = b"Pf\n1 2\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_le_bytes()); // bottom row (v = 1)
        bytes.extend_from_slice(&0.5f32.to_le_bytes()); // top row (v = 0)
        let (w, h, raw) = decode_single_channel(&bytes).unwrap();
        assert_eq!((w, h), (1, 2));
        assert_eq!(raw, vec![0.5, 1.5]);
    }

    #[test]
    fn pfm_big_endian_by_positive_scale() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.25f32.to_be_bytes());
        let (_, _, raw) = decode_single_channel(&bytes).unwrap();
        assert_eq!(raw, vec![2.25]);
    }

    #[test]
    fn truncated_and_garbage_depth_files() {
        let bytes = b"P5\n4 4\n65535\n\x00\x01".to_vec();
        assert!(matches!(
            decode_single_channel(&bytes),
            Err(Error::TruncatedFile { .. })
        ));
        assert!(matches!(
            decode_single_channel(b"JUNKDATA"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn intrinsics_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        let k = test_intrinsics();
        save_intrinsics(&k, &path).unwrap();
        let back = load_intrinsics(&path).unwrap();
        assert_eq!(k, back);
    }
}
