//! PLY point-cloud reader and writer.
//!
//! Reads ASCII and binary-little-endian PLY files with at least x/y/z vertex
//! properties; any extra properties (including lists) are parsed and ignored,
//! and vertex order is preserved. Big-endian files are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count_ty: ScalarType, item_ty: ScalarType },
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let file = File::open(path.as_ref())?;
    read_ply(BufReader::new(file))
}

fn read_header_line<R: BufRead>(reader: &mut R, line_no: &mut usize) -> Result<String> {
    let mut line = String::new();
    let n = reader.read_line(&mut line)?;
    if n == 0 {
        return Err(Error::parse(
            format!("line {line_no}"),
            "unexpected end of header",
        ));
    }
    *line_no += 1;
    Ok(line.trim_end_matches(['\r', '\n']).to_string())
}

/// Reads a PLY document from any buffered reader.
pub fn read_ply<R: BufRead>(mut reader: R) -> Result<PointCloud> {
    let mut line_no = 0usize;

    let magic = read_header_line(&mut reader, &mut line_no)?;
    if magic.trim() != "ply" {
        return Err(Error::parse("line 1", "missing 'ply' magic"));
    }

    let mut format: Option<PlyFormat> = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let line = read_header_line(&mut reader, &mut line_no)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("format") => {
                format = Some(match tokens.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some("binary_big_endian") => {
                        return Err(Error::UnsupportedFormat(
                            "big-endian PLY is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(Error::parse(
                            format!("line {line_no}"),
                            format!("unknown format {other:?}"),
                        ))
                    }
                });
            }
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::parse(format!("line {line_no}"), "element needs a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(format!("line {line_no}"), "bad element count"))?;
                elements.push(ElementDecl {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| {
                    Error::parse(format!("line {line_no}"), "property before any element")
                })?;
                let first = tokens
                    .next()
                    .ok_or_else(|| Error::parse(format!("line {line_no}"), "property needs a type"))?;
                if first == "list" {
                    let count_ty = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| Error::parse(format!("line {line_no}"), "bad list count type"))?;
                    let item_ty = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| Error::parse(format!("line {line_no}"), "bad list item type"))?;
                    element.properties.push(Property::List { count_ty, item_ty });
                } else {
                    let ty = ScalarType::parse(first).ok_or_else(|| {
                        Error::parse(format!("line {line_no}"), format!("unknown type '{first}'"))
                    })?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| Error::parse(format!("line {line_no}"), "property needs a name"))?;
                    element.properties.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(
                    format!("line {line_no}"),
                    format!("unknown header keyword '{other}'"),
                ))
            }
            None => continue,
        }
    }

    let format = format
        .ok_or_else(|| Error::parse(format!("line {line_no}"), "header has no format line"))?;

    let vertex_decl = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse("header", "no vertex element"))?;
    let coordinate_slots = coordinate_slots(vertex_decl)?;

    match format {
        PlyFormat::Ascii => read_ascii_body(reader, &elements, coordinate_slots, line_no),
        PlyFormat::BinaryLittleEndian => read_binary_body(reader, &elements, coordinate_slots),
    }
}

/// Positions of the x, y, z scalar properties in the vertex element.
fn coordinate_slots(vertex: &ElementDecl) -> Result<[usize; 3]> {
    let mut slots = [usize::MAX; 3];
    for (i, prop) in vertex.properties.iter().enumerate() {
        if let Property::Scalar { name, .. } = prop {
            match name.as_str() {
                "x" => slots[0] = i,
                "y" => slots[1] = i,
                "z" => slots[2] = i,
                _ => {}
            }
        }
    }
    if slots.contains(&usize::MAX) {
        return Err(Error::parse("header", "vertex element lacks x/y/z properties"));
    }
    Ok(slots)
}

fn read_ascii_body<R: BufRead>(
    mut reader: R,
    elements: &[ElementDecl],
    slots: [usize; 3],
    header_lines: usize,
) -> Result<PointCloud> {
    let mut line_no = header_lines;
    let mut points: Vec<Point3> = Vec::new();
    for element in elements {
        let is_vertex = element.name == "vertex";
        for _ in 0..element.count {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::parse(
                    format!("line {}", line_no + 1),
                    format!("file ends inside element '{}'", element.name),
                ));
            }
            line_no += 1;
            if !is_vertex {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let mut cursor = 0usize;
            let mut coords = [f64::NAN; 3];
            for (prop_idx, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { .. } => {
                        let token = tokens.get(cursor).ok_or_else(|| {
                            Error::parse(format!("line {line_no}"), "vertex row too short")
                        })?;
                        if let Some(axis) = slots.iter().position(|&s| s == prop_idx) {
                            coords[axis] = token.parse().map_err(|_| {
                                Error::parse(
                                    format!("line {line_no}"),
                                    format!("bad coordinate '{token}'"),
                                )
                            })?;
                        }
                        cursor += 1;
                    }
                    Property::List { .. } => {
                        let count: usize = tokens
                            .get(cursor)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| {
                                Error::parse(format!("line {line_no}"), "bad list count")
                            })?;
                        cursor += 1 + count;
                    }
                }
            }
            points.push(Point3::new(coords[0], coords[1], coords[2]));
        }
        if is_vertex {
            break; // everything we need has been read
        }
    }
    PointCloud::new(points)
}

fn read_binary_body<R: Read>(
    mut reader: R,
    elements: &[ElementDecl],
    slots: [usize; 3],
) -> Result<PointCloud> {
    let mut offset = 0usize;
    let mut points: Vec<Point3> = Vec::new();
    for element in elements {
        let is_vertex = element.name == "vertex";
        for _ in 0..element.count {
            let mut coords = [f64::NAN; 3];
            for (prop_idx, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let value = read_scalar(&mut reader, *ty, &mut offset)?;
                        if is_vertex {
                            if let Some(axis) = slots.iter().position(|&s| s == prop_idx) {
                                coords[axis] = value;
                            }
                        }
                    }
                    Property::List { count_ty, item_ty } => {
                        let count = read_scalar(&mut reader, *count_ty, &mut offset)? as usize;
                        let mut skip = vec![0u8; count * item_ty.size()];
                        read_exact_at(&mut reader, &mut skip, &mut offset)?;
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(coords[0], coords[1], coords[2]));
            }
        }
        if is_vertex {
            break;
        }
    }
    PointCloud::new(points)
}

fn read_exact_at<R: Read>(reader: &mut R, buf: &mut [u8], offset: &mut usize) -> Result<()> {
    reader.read_exact(buf).map_err(|_| {
        Error::parse(
            format!("offset {offset}"),
            format!("file truncated while reading {} bytes", buf.len()),
        )
    })?;
    *offset += buf.len();
    Ok(())
}

fn read_scalar<R: Read>(reader: &mut R, ty: ScalarType, offset: &mut usize) -> Result<f64> {
    let mut buf = [0u8; 8];
    let slice = &mut buf[..ty.size()];
    read_exact_at(reader, slice, offset)?;
    Ok(match ty {
        ScalarType::I8 => buf[0] as i8 as f64,
        ScalarType::U8 => buf[0] as f64,
        ScalarType::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
        ScalarType::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
        ScalarType::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
        ScalarType::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
        ScalarType::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
        ScalarType::F64 => f64::from_le_bytes(buf),
    })
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_ply(cloud, BufWriter::new(file), format)
}

/// Writes vertices with double-precision coordinates; the ASCII form uses
/// Rust's shortest round-trip float formatting, so a save/load cycle is
/// bit-exact in either format.
pub fn write_ply<W: Write>(cloud: &PointCloud, mut writer: W, format: PlyFormat) -> Result<()> {
    let format_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    write!(
        writer,
        "ply\n{format_line}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    )?;
    match format {
        PlyFormat::Ascii => {
            for p in cloud.iter() {
                writeln!(writer, "{} {} {}", p.x, p.y, p.z)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for p in cloud.iter() {
                writer.write_all(&p.x.to_le_bytes())?;
                writer.write_all(&p.y.to_le_bytes())?;
                writer.write_all(&p.z.to_le_bytes())?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}
