//! Vertex-only PLY reader and writer.
//!
//! The reader accepts `ascii` and `binary_little_endian` files with any
//! scalar or list properties; only the `vertex` element is retained
//! (x, y, z, optional red/green/blue and nx/ny/nz). Other elements such as
//! faces are parsed and dropped.
//!
//! The writer always emits float32 positions/normals and uchar colors.
//! Binary output is bit-exact for values representable in float32; ascii
//! output uses 6-decimal fixed point.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;
use crate::scene::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

impl PlyEncoding {
    fn header_name(self) -> &'static str {
        match self {
            PlyEncoding::Ascii => "ascii",
            PlyEncoding::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarKind {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => ScalarKind::I8,
            "uchar" | "uint8" => ScalarKind::U8,
            "short" | "int16" => ScalarKind::I16,
            "ushort" | "uint16" => ScalarKind::U16,
            "int" | "int32" => ScalarKind::I32,
            "uint" | "uint32" => ScalarKind::U32,
            "float" | "float32" => ScalarKind::F32,
            "double" | "float64" => ScalarKind::F64,
            other => return Err(Error::format(format!("unknown property type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarKind::I8 | ScalarKind::U8 => 1,
            ScalarKind::I16 | ScalarKind::U16 => 2,
            ScalarKind::I32 | ScalarKind::U32 | ScalarKind::F32 => 4,
            ScalarKind::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarKind::I8 => b[0] as i8 as f64,
            ScalarKind::U8 => b[0] as f64,
            ScalarKind::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarKind::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarKind::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarKind::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarKind::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarKind::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(ScalarKind),
    List { count: ScalarKind, item: ScalarKind },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
}

fn read_line<R: BufRead>(r: &mut R, buf: &mut String) -> Result<bool> {
    buf.clear();
    let n = r
        .read_line(buf)
        .map_err(|e| Error::format(format!("read failed: {e}")))?;
    Ok(n > 0)
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    if !read_line(r, &mut line)? || line.trim_end() != "ply" {
        return Err(Error::format("missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !read_line(r, &mut line)? {
            return Err(Error::format("header ended without `end_header`"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::format(format!("unsupported encoding `{other}`")))
                    }
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::format(format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", cnt, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format("property before any element"))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List {
                        count: ScalarKind::parse(cnt)?,
                        item: ScalarKind::parse(item)?,
                    },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format("property before any element"))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(ScalarKind::parse(ty)?),
                });
            }
            _ => return Err(Error::format(format!("bad header line `{}`", line.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format("missing `format` line"))?;
    Ok(Header { encoding, elements })
}

/// Column positions of the properties we keep.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
    normal: Option<[usize; 3]>,
}

impl VertexLayout {
    fn new(el: &Element) -> Result<Self> {
        let find = |n: &str| -> Option<usize> {
            el.props.iter().position(|p| p.name == n && matches!(p.kind, PropertyKind::Scalar(_)))
        };
        let triple = |a: &str, b: &str, c: &str| -> Result<Option<[usize; 3]>> {
            match (find(a), find(b), find(c)) {
                (Some(i), Some(j), Some(k)) => Ok(Some([i, j, k])),
                (None, None, None) => Ok(None),
                _ => Err(Error::format(format!("incomplete property triple {a}/{b}/{c}"))),
            }
        };
        let xyz = triple("x", "y", "z")?.ok_or_else(|| Error::format("vertex lacks x/y/z"))?;
        let rgb = triple("red", "green", "blue")?;
        let normal = triple("nx", "ny", "nz")?;
        Ok(VertexLayout { xyz, rgb, normal })
    }
}

struct RawVertices {
    xyz: Vec<[f64; 3]>,
    rgb: Option<Vec<[u8; 3]>>,
    normals: Option<Vec<[f64; 3]>>,
}

impl RawVertices {
    fn with_capacity(n: usize, layout: &VertexLayout) -> Self {
        RawVertices {
            xyz: Vec::with_capacity(n),
            rgb: layout.rgb.map(|_| Vec::with_capacity(n)),
            normals: layout.normal.map(|_| Vec::with_capacity(n)),
        }
    }

    fn push(&mut self, row: &[f64], layout: &VertexLayout) -> Result<()> {
        let [x, y, z] = layout.xyz;
        self.xyz.push([row[x], row[y], row[z]]);
        if let (Some(rgb), Some([r, g, b])) = (self.rgb.as_mut(), layout.rgb) {
            let c = |v: f64| -> Result<u8> {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::format(format!("color value {v} not in 0..=255")))
                }
            };
            rgb.push([c(row[r])?, c(row[g])?, c(row[b])?]);
        }
        if let (Some(ns), Some([a, b, c])) = (self.normals.as_mut(), layout.normal) {
            ns.push([row[a], row[b], row[c]]);
        }
        Ok(())
    }
}

fn read_ascii_body<R: BufRead>(r: &mut R, header: &Header, layout: &VertexLayout) -> Result<RawVertices> {
    let mut out = None;
    let mut line = String::new();
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            out = Some(RawVertices::with_capacity(el.count, layout));
        }
        let mut row = Vec::with_capacity(el.props.len());
        for i in 0..el.count {
            if !read_line(r, &mut line)? {
                return Err(Error::format(format!(
                    "truncated body: element `{}` has {i} of {} rows",
                    el.name, el.count
                )));
            }
            if !is_vertex {
                continue;
            }
            row.clear();
            let mut toks = line.split_whitespace();
            for p in &el.props {
                let mut next = || -> Result<f64> {
                    let t = toks
                        .next()
                        .ok_or_else(|| Error::format(format!("vertex row {i} too short")))?;
                    t.parse::<f64>()
                        .map_err(|_| Error::format(format!("bad number `{t}` in vertex row {i}")))
                };
                match p.kind {
                    PropertyKind::Scalar(_) => row.push(next()?),
                    PropertyKind::List { .. } => {
                        let n = next()? as usize;
                        for _ in 0..n {
                            next()?;
                        }
                        row.push(f64::NAN);
                    }
                }
            }
            out.as_mut().unwrap().push(&row, layout)?;
        }
    }
    out.ok_or_else(|| Error::format("no `vertex` element"))
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(format!("truncated body while reading {what}")))
}

fn read_binary_body<R: Read>(r: &mut R, header: &Header, layout: &VertexLayout) -> Result<RawVertices> {
    let mut out = None;
    let mut scratch = [0u8; 8];
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            out = Some(RawVertices::with_capacity(el.count, layout));
        }
        let fixed = el.props.iter().all(|p| matches!(p.kind, PropertyKind::Scalar(_)));
        if fixed {
            let kinds: Vec<ScalarKind> = el
                .props
                .iter()
                .map(|p| match p.kind {
                    PropertyKind::Scalar(k) => k,
                    PropertyKind::List { .. } => unreachable!(),
                })
                .collect();
            let stride: usize = kinds.iter().map(|k| k.size()).sum();
            let mut rowbuf = vec![0u8; stride];
            let mut row = vec![0.0f64; kinds.len()];
            for _ in 0..el.count {
                read_exact_or_truncated(r, &mut rowbuf, &el.name)?;
                if !is_vertex {
                    continue;
                }
                let mut off = 0;
                for (slot, k) in row.iter_mut().zip(&kinds) {
                    *slot = k.decode_le(&rowbuf[off..]);
                    off += k.size();
                }
                out.as_mut().unwrap().push(&row, layout)?;
            }
        } else {
            let mut row = Vec::with_capacity(el.props.len());
            for _ in 0..el.count {
                row.clear();
                for p in &el.props {
                    match p.kind {
                        PropertyKind::Scalar(k) => {
                            read_exact_or_truncated(r, &mut scratch[..k.size()], &el.name)?;
                            row.push(k.decode_le(&scratch));
                        }
                        PropertyKind::List { count, item } => {
                            read_exact_or_truncated(r, &mut scratch[..count.size()], &el.name)?;
                            let n = count.decode_le(&scratch);
                            if n < 0.0 {
                                return Err(Error::format("negative list length"));
                            }
                            let mut skip = vec![0u8; n as usize * item.size()];
                            read_exact_or_truncated(r, &mut skip, &el.name)?;
                            row.push(f64::NAN);
                        }
                    }
                }
                if is_vertex {
                    out.as_mut().unwrap().push(&row, layout)?;
                }
            }
        }
    }
    out.ok_or_else(|| Error::format("no `vertex` element"))
}

/// Reads the vertex element of a PLY stream into a cloud with unlabeled
/// points (`instance_label = semantic_label = -1`).
pub fn read_ply<T: Real, R: BufRead>(mut r: R) -> Result<PointCloud<T>> {
    let header = parse_header(&mut r)?;
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::format("no `vertex` element"))?;
    let layout = VertexLayout::new(vertex)?;
    let raw = match header.encoding {
        PlyEncoding::Ascii => read_ascii_body(&mut r, &header, &layout)?,
        PlyEncoding::BinaryLittleEndian => read_binary_body(&mut r, &header, &layout)?,
    };
    let to_vec = |a: [f64; 3]| Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
    let n = raw.xyz.len();
    let points = raw.xyz.into_iter().map(to_vec).collect();
    let colors = raw.rgb.unwrap_or_else(|| vec![[0, 0, 0]; n]);
    let normals = raw.normals.map(|ns| ns.into_iter().map(to_vec).collect());
    PointCloud::from_parts(points, colors, normals, vec![-1; n], vec![-1; n])
        .map_err(|e| Error::format(e.to_string()))
}

pub fn read_ply_file<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(BufReader::new(f))
}

pub fn write_ply<T: Real, W: Write>(cloud: &PointCloud<T>, encoding: PlyEncoding, w: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "ply")?;
    writeln!(w, "format {} 1.0", encoding.header_name())?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for n in ["x", "y", "z"] {
        writeln!(w, "property float {n}")?;
    }
    for n in ["red", "green", "blue"] {
        writeln!(w, "property uchar {n}")?;
    }
    let normals = cloud.normals();
    if normals.is_some() {
        for n in ["nx", "ny", "nz"] {
            writeln!(w, "property float {n}")?;
        }
    }
    writeln!(w, "end_header")?;

    for (i, (p, c)) in cloud.points().iter().zip(cloud.colors()).enumerate() {
        let n = normals.map(|ns| ns[i]);
        match encoding {
            PlyEncoding::Ascii => {
                write!(w, "{:.6} {:.6} {:.6} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
                if let Some(n) = n {
                    write!(w, " {:.6} {:.6} {:.6}", n.x, n.y, n.z)?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    w.write_all(&(v.to_f64_lossless() as f32).to_le_bytes())?;
                }
                w.write_all(c)?;
                if let Some(n) = n {
                    for v in [n.x, n.y, n.z] {
                        w.write_all(&(v.to_f64_lossless() as f32).to_le_bytes())?;
                    }
                }
            }
        }
    }
    w.flush()
}

pub fn write_ply_file<T: Real>(cloud: &PointCloud<T>, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(cloud, encoding, f).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII_2: &str = "ply\nformat ascii 1.0\ncomment two points\nelement vertex 2\n\
        property float x\nproperty float y\nproperty float z\n\
        property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n\
        0.25 0.5 1.0 255 0 0\n-1.5 2 3.75 0 128 255\n";

    #[test]
    fn reads_ascii() {
        let c: PointCloud<f64> = read_ply(ASCII_2.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[1], Vec3::new(-1.5, 2.0, 3.75));
        assert_eq!(c.colors()[1], [0, 128, 255]);
        assert!(c.normals().is_none());
    }

    #[test]
    fn missing_end_header_is_format_error() {
        let bad = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n";
        assert!(matches!(read_ply::<f64, _>(bad.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_bodies() {
        let short_ascii = ASCII_2.replace("-1.5 2 3.75 0 128 255\n", "");
        assert!(matches!(read_ply::<f64, _>(short_ascii.as_bytes()), Err(Error::Format(_))));

        let c: PointCloud<f64> = read_ply(ASCII_2.as_bytes()).unwrap();
        let mut bin = Vec::new();
        write_ply(&c, PlyEncoding::BinaryLittleEndian, &mut bin).unwrap();
        bin.truncate(bin.len() - 3);
        assert!(matches!(read_ply::<f64, _>(bin.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn big_endian_rejected() {
        let s = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(read_ply::<f64, _>(s.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn skips_faces_and_extra_properties() {
        let s = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
            property double z\nproperty float alpha\nelement face 1\n\
            property list uchar int vertex_indices\nend_header\n\
            0 0 0 1\n1 0 0 1\n0 1 0 1\n3 0 1 2\n";
        let c: PointCloud<f32> = read_ply(s.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.colors()[2], [0, 0, 0]);

        // the same in binary, including a list-valued vertex property
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
            property float x\nproperty float y\nproperty float z\n\
            property list uchar int tags\nelement face 1\n\
            property list uchar int vertex_indices\nend_header\n"
            .to_vec();
        for (p, tags) in [([1.0f32, 2.0, 3.0], vec![7i32]), ([4.0, 5.0, 6.0], vec![])] {
            for v in p {
                bin.extend(v.to_le_bytes());
            }
            bin.push(tags.len() as u8);
            for t in tags {
                bin.extend(t.to_le_bytes());
            }
        }
        bin.push(3);
        for i in [0i32, 1, 0] {
            bin.extend(i.to_le_bytes());
        }
        let c: PointCloud<f64> = read_ply(bin.as_slice()).unwrap();
        assert_eq!(c.points()[1], Vec3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn writer_header_is_verbatim() {
        let c: PointCloud<f64> = read_ply(ASCII_2.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_ply(&c, PlyEncoding::Ascii, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"));
        assert!(text.ends_with("-1.500000 2.000000 3.750000 0 128 255\n"));
    }
}
