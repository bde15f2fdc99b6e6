//! PLY point clouds: ascii 1.0 and binary_little_endian 1.0.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::{Point3, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyMode {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    mode: PlyMode,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut mode = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let line_start = pos;
        let rel_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(pos as u64, "header ends before end_header"))?;
        let raw = &bytes[pos..pos + rel_end];
        pos += rel_end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(line_start as u64, "header is not valid text"))?
            .trim_end_matches('\r');
        let err = |m: &str| Error::parse(line_start as u64, format!("{m}: '{line}'"));
        let mut tok = line.split_whitespace();
        if first {
            if line != "ply" {
                return Err(Error::parse(0, "missing 'ply' magic"));
            }
            first = false;
            continue;
        }
        match tok.next() {
            Some("format") => {
                mode = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => PlyMode::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyMode::Binary,
                    (Some("binary_big_endian"), _) => return Err(err("big-endian PLY is not supported")),
                    _ => return Err(err("unsupported format line")),
                });
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| err("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| err("element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| err("property before any element"))?;
                let t = tok.next().ok_or_else(|| err("property without type"))?;
                if t == "list" {
                    let count = tok.next().and_then(Scalar::parse).ok_or_else(|| err("bad list count type"))?;
                    let item = tok.next().and_then(Scalar::parse).ok_or_else(|| err("bad list item type"))?;
                    tok.next().ok_or_else(|| err("list property without name"))?;
                    el.props.push(Property::List { count, item });
                } else {
                    let ty = Scalar::parse(t).ok_or_else(|| err("unknown property type"))?;
                    let name = tok.next().ok_or_else(|| err("property without name"))?;
                    el.props.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(_) => return Err(err("unrecognised header line")),
            None => return Err(err("empty header line")),
        }
    }
    let mode = mode.ok_or_else(|| Error::parse(0, "header has no format line"))?;
    Ok(Header {
        mode,
        elements,
        body_offset: pos,
    })
}

struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    width: usize,
}

fn vertex_layout(el: &Element, at: u64) -> Result<VertexLayout> {
    let find = |want: &str| {
        el.props.iter().position(|p| matches!(p, Property::Scalar { name, .. } if name == want))
    };
    let get = |want: &str| find(want).ok_or_else(|| Error::parse(at, format!("vertex has no '{want}' property")));
    if el.props.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(Error::parse(at, "list properties on vertices are not supported"));
    }
    let xyz = [get("x")?, get("y")?, get("z")?];
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => return Err(Error::parse(at, "partial normal properties")),
    };
    Ok(VertexLayout {
        xyz,
        normal,
        width: el.props.len(),
    })
}

struct Vertices {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Point3<f64>>>,
}

fn push_vertex(out: &mut Vertices, layout: &VertexLayout, vals: &[f64], at: u64) -> Result<()> {
    let p = layout.xyz.map(|i| vals[i]);
    if p.iter().any(|c| !c.is_finite()) {
        return Err(Error::parse(at, "non-finite coordinate"));
    }
    out.points.push(p);
    if let (Some(idx), Some(normals)) = (layout.normal, out.normals.as_mut()) {
        let n = idx.map(|i| vals[i]);
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::parse(at, "normal has zero or non-finite length"));
        }
        normals.push(if (len - 1.0).abs() <= 1e-12 { n } else { n.map(|c| c / len) });
    }
    Ok(())
}

fn read_ascii(bytes: &[u8], header: &Header) -> Result<Vertices> {
    let mut pos = header.body_offset;
    let mut out = None;
    for el in &header.elements {
        let layout = if el.name == "vertex" {
            Some(vertex_layout(el, header.body_offset as u64)?)
        } else {
            None
        };
        let mut verts = Vertices {
            points: Vec::with_capacity(if layout.is_some() { el.count } else { 0 }),
            normals: layout.as_ref().and_then(|l| l.normal).map(|_| Vec::with_capacity(el.count)),
        };
        let mut vals = Vec::new();
        for _ in 0..el.count {
            let start = pos;
            if pos >= bytes.len() {
                return Err(Error::parse(pos as u64, format!("truncated '{}' data", el.name)));
            }
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            pos = (end + 1).min(bytes.len());
            if let Some(layout) = &layout {
                let line = std::str::from_utf8(&bytes[start..end])
                    .map_err(|_| Error::parse(start as u64, "vertex line is not valid text"))?;
                vals.clear();
                for t in line.split_whitespace() {
                    vals.push(t.parse::<f64>().map_err(|_| Error::parse(start as u64, format!("bad number '{t}'")))?);
                }
                if vals.len() != layout.width {
                    return Err(Error::parse(
                        start as u64,
                        format!("expected {} values, found {}", layout.width, vals.len()),
                    ));
                }
                push_vertex(&mut verts, layout, &vals, start as u64)?;
            }
        }
        if layout.is_some() {
            out = Some(verts);
            break;
        }
    }
    out.ok_or_else(|| Error::parse(header.body_offset as u64, "no vertex element"))
}

fn read_binary(bytes: &[u8], header: &Header) -> Result<Vertices> {
    let mut pos = header.body_offset;
    let take = |pos: &mut usize, n: usize| -> Result<usize> {
        if *pos + n > bytes.len() {
            return Err(Error::parse(bytes.len() as u64, "truncated binary payload"));
        }
        let at = *pos;
        *pos += n;
        Ok(at)
    };
    for el in &header.elements {
        if el.name == "vertex" {
            let layout = vertex_layout(el, header.body_offset as u64)?;
            let types: Vec<Scalar> = el
                .props
                .iter()
                .map(|p| match p {
                    Property::Scalar { ty, .. } => *ty,
                    Property::List { .. } => unreachable!(),
                })
                .collect();
            let stride: usize = types.iter().map(|t| t.size()).sum();
            let mut verts = Vertices {
                points: Vec::with_capacity(el.count),
                normals: layout.normal.map(|_| Vec::with_capacity(el.count)),
            };
            let mut vals = vec![0.0; types.len()];
            for _ in 0..el.count {
                let start = take(&mut pos, stride)?;
                let mut o = start;
                for (v, t) in vals.iter_mut().zip(&types) {
                    *v = t.read_le(&bytes[o..]);
                    o += t.size();
                }
                push_vertex(&mut verts, &layout, &vals, start as u64)?;
            }
            return Ok(verts);
        }
        for _ in 0..el.count {
            for p in &el.props {
                match p {
                    Property::Scalar { ty, .. } => {
                        take(&mut pos, ty.size())?;
                    }
                    Property::List { count, item } => {
                        let at = take(&mut pos, count.size())?;
                        let len = count.read_le(&bytes[at..]);
                        if !(len >= 0.0) {
                            return Err(Error::parse(at as u64, "negative list length"));
                        }
                        take(&mut pos, len as usize * item.size())?;
                    }
                }
            }
        }
    }
    Err(Error::parse(header.body_offset as u64, "no vertex element"))
}

/// Parses a PLY image. The cloud id is taken from `id`.
pub fn parse_ply<T: Real>(bytes: &[u8], id: &str) -> Result<PointCloud<T>> {
    let header = parse_header(bytes)?;
    let v = match header.mode {
        PlyMode::Ascii => read_ascii(bytes, &header)?,
        PlyMode::Binary => read_binary(bytes, &header)?,
    };
    let mut cloud = PointCloud::new(id, v.points)?;
    if let Some(n) = v.normals {
        cloud = cloud.with_normals(n)?;
    }
    Ok(cloud.cast())
}

/// Reads a PLY file; the cloud id is the file stem.
pub fn read_ply<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let bytes = fs::read(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    parse_ply(&bytes, id)
}

fn is_single<T: Real>() -> bool {
    std::mem::size_of::<T>() == 4
}

/// Serialises a cloud. Coordinates are stored as `float` for `f32` clouds
/// and `double` for `f64` clouds, so binary output round-trips bit for bit.
pub fn encode_ply<T: Real>(cloud: &PointCloud<T>, mode: PlyMode) -> Vec<u8> {
    let ty = if is_single::<T>() { "float" } else { "double" };
    let mut out = Vec::new();
    let fmt = match mode {
        PlyMode::Ascii => "ascii",
        PlyMode::Binary => "binary_little_endian",
    };
    let mut header = format!("ply\nformat {fmt} 1.0\nelement vertex {}\n", cloud.len());
    let mut names = vec!["x", "y", "z"];
    if cloud.normals().is_some() {
        names.extend(["nx", "ny", "nz"]);
    }
    for n in &names {
        header.push_str(&format!("property {ty} {n}\n"));
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());

    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let mut row: Vec<T> = p.to_vec();
        if let Some(n) = normals {
            row.extend_from_slice(&n[i]);
        }
        match mode {
            PlyMode::Ascii => {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyMode::Binary => {
                for v in row {
                    if is_single::<T>() {
                        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
                    } else {
                        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

pub fn write_ply<T: Real>(cloud: &PointCloud<T>, path: &Path, mode: PlyMode) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ply(cloud, mode))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_offset<T: std::fmt::Debug>(r: Result<T>) -> u64 {
        match r {
            Err(Error::Parse { offset, .. }) => offset,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ascii_fixture() {
        let text = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 3\n\
                    property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0 255\n1.5 -2 3 0\n0.25 0.5 0.75 7\n3 0 1 2\n";
        let c: PointCloud<f64> = parse_ply(text.as_bytes(), "t").unwrap();
        assert_eq!(c.points(), &[[0.0, 0.0, 0.0], [1.5, -2.0, 3.0], [0.25, 0.5, 0.75]]);
        assert!(c.normals().is_none());
    }

    #[test]
    fn normals_are_renormalised() {
        let text = "ply\r\nformat ascii 1.0\r\nelement vertex 2\r\nproperty double x\r\nproperty double y\r\n\
                    property double z\r\nproperty double nx\r\nproperty double ny\r\nproperty double nz\r\nend_header\r\n\
                    0 0 0 0 0 2\r\n1 0 0 3 4 0\r\n";
        let c: PointCloud<f64> = parse_ply(text.as_bytes(), "n").unwrap();
        let n = c.normals().unwrap();
        assert_eq!(n[0], [0.0, 0.0, 1.0]);
        assert!((n[1][0] - 0.6).abs() < 1e-15 && (n[1][1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let pts = vec![[0.1, -1e-300, 3.0e10], [f64::MIN_POSITIVE, 2.0 / 3.0, -0.0]];
        let c = PointCloud::new("b", pts.clone()).unwrap();
        let back: PointCloud<f64> = parse_ply(&encode_ply(&c, PlyMode::Binary), "b").unwrap();
        for (a, b) in back.points().iter().zip(&pts) {
            for i in 0..3 {
                assert_eq!(a[i].to_bits(), b[i].to_bits());
            }
        }
        let ascii: PointCloud<f64> = parse_ply(&encode_ply(&c, PlyMode::Ascii), "b").unwrap();
        assert_eq!(ascii.points(), back.points());
    }

    #[test]
    fn empty_cloud_and_size_arithmetic() {
        let empty = PointCloud::<f32>::new("e", vec![]).unwrap();
        let back: PointCloud<f32> = parse_ply(&encode_ply(&empty, PlyMode::Binary), "e").unwrap();
        assert!(back.is_empty());

        let pts: Vec<[f32; 3]> = (0..10_000).map(|i| [i as f32, 0.5, -(i as f32)]).collect();
        let c = PointCloud::new("s", pts).unwrap();
        let bytes = encode_ply(&c, PlyMode::Binary);
        let header_len = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        assert_eq!(bytes.len(), header_len + 10_000 * 3 * 4);
        let normals = vec![[0.0f32, 0.0, 1.0]; 10_000];
        let bytes = encode_ply(&c.with_normals(normals).unwrap(), PlyMode::Binary);
        let header_len = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        assert_eq!(bytes.len(), header_len + 10_000 * 6 * 4);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        assert_eq!(err_offset(parse_ply::<f64>(b"plx\n", "x")), 0);
        let be = b"ply\nformat binary_big_endian 1.0\nend_header\n";
        assert_eq!(err_offset(parse_ply::<f64>(be, "x")), 4);
        let no_end = b"ply\nformat ascii 1.0\nelement vertex 1\n";
        assert!(err_offset(parse_ply::<f64>(no_end, "x")) > 0);

        let c = PointCloud::new("t", vec![[1.0f64, 2.0, 3.0]; 4]).unwrap();
        let bytes = encode_ply(&c, PlyMode::Binary);
        let cut = &bytes[..bytes.len() - 5];
        assert_eq!(err_offset(parse_ply::<f64>(cut, "t")), cut.len() as u64);

        let short = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n4 5\n";
        let off = err_offset(parse_ply::<f64>(short, "t"));
        assert_eq!(&short[off as usize..], b"4 5\n");
        let missing = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        let truncated = &missing[..missing.len() - 6];
        assert!(matches!(parse_ply::<f64>(truncated, "t"), Err(Error::Parse { .. })));
    }
}
