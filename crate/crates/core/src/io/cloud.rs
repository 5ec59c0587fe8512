//! Point clouds and meshes as XYZ, PLY (ASCII or binary) and OBJ.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
    Obj,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "ply" => Ok(CloudFormat::Ply),
            "obj" => Ok(CloudFormat::Obj),
            _ => Err(Error::UnsupportedFormat(format!(
                "{}: expected .xyz, .ply or .obj",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn non_empty(path: &Path, points: Vec<Point3>) -> Result<Vec<Point3>> {
    if points.is_empty() {
        return Err(Error::parse(path, 0, "file contains no points"));
    }
    Ok(points)
}

/// Reads a point cloud; the format follows the file extension. OBJ files
/// contribute their vertices.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<Vec<Point3>> {
    let path = path.as_ref();
    let points = match CloudFormat::from_path(path)? {
        CloudFormat::Xyz => parse_xyz(path, &read(path)?)?,
        CloudFormat::Ply => parse_ply(path, &read(path)?)?.vertices,
        CloudFormat::Obj => parse_obj(path, &read(path)?)?.0,
    };
    non_empty(path, points)
}

/// Reads whitespace-separated `x y z` lines regardless of the extension.
pub fn load_xyz(path: impl AsRef<Path>) -> Result<Vec<Point3>> {
    let path = path.as_ref();
    non_empty(path, parse_xyz(path, &read(path)?)?)
}

/// Reads a triangle mesh from OBJ or PLY. Polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let (vertices, polygons) = match CloudFormat::from_path(path)? {
        CloudFormat::Obj => parse_obj(path, &read(path)?)?,
        CloudFormat::Ply => {
            let ply = parse_ply(path, &read(path)?)?;
            (ply.vertices, ply.faces)
        }
        CloudFormat::Xyz => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: XYZ files hold no faces",
                path.display()
            )))
        }
    };
    let mut faces = Vec::new();
    for poly in polygons {
        for i in 1..poly.len().saturating_sub(1) {
            faces.push([poly[0], poly[i], poly[i + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn parse_coord(path: &Path, line: usize, tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(path, line, "expected three coordinates"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite coordinate '{tok}'")));
    }
    Ok(v)
}

fn utf8<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|_| Error::parse(path, 0, "file is not valid UTF-8 text"))
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<Vec<Point3>> {
    let text = utf8(path, bytes)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let x = parse_coord(path, i + 1, tok.next())?;
        let y = parse_coord(path, i + 1, tok.next())?;
        let z = parse_coord(path, i + 1, tok.next())?;
        points.push(Point3::new(x, y, z));
    }
    Ok(points)
}

type Polygons = Vec<Vec<usize>>;

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<(Vec<Point3>, Polygons)> {
    let text = utf8(path, bytes)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_coord(path, n, tok.next())?;
                let y = parse_coord(path, n, tok.next())?;
                let z = parse_coord(path, n, tok.next())?;
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| Error::parse(path, n, format!("invalid face index '{t}'")))?;
                    // 1-based; negative counts back from the latest vertex
                    let resolved = match idx {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => (vertices.len() as i64 + i).try_into().ok(),
                    };
                    let v = resolved
                        .filter(|&v| v < vertices.len())
                        .ok_or_else(|| Error::parse(path, n, format!("face index {idx} out of range")))?;
                    poly.push(v);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(path, n, "face needs at least three vertices"));
                }
                faces.push(poly);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
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

    fn read_be(self, b: &[u8]) -> f64 {
        let mut le = b[..self.size()].to_vec();
        le.reverse();
        self.read_le(&le)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

struct Ply {
    vertices: Vec<Point3>,
    faces: Polygons,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Ply> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |e| *pos + e);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim().to_string();
        *pos = (end + 1).min(bytes.len());
        line_no += 1;
        Some((line_no, line))
    };

    match next_line(&mut pos) {
        Some((_, l)) if l == "ply" => {}
        _ => return Err(Error::parse(path, 1, "missing 'ply' magic line")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines = 1;
    loop {
        let (n, line) =
            next_line(&mut pos).ok_or_else(|| Error::parse(path, header_lines, "unterminated header"))?;
        header_lines = n;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                encoding = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(Error::parse(path, n, format!("unknown format '{other}'"))),
                })
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(path, n, format!("invalid element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(Error::parse(path, n, "unknown list property type"));
                };
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, n, "property before any element"))?;
                el.properties.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(path, n, format!("unknown property type '{ty}'")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, n, "property before any element"))?;
                el.properties.push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(Error::parse(path, n, format!("unrecognized header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse(path, header_lines, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut ascii_line = header_lines;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let coord_idx: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|c| el.properties.iter().position(|p| p.name() == *c))
            .collect();
        if is_vertex && coord_idx.iter().any(Option::is_none) {
            return Err(Error::parse(path, header_lines, "vertex element lacks x, y or z"));
        }
        let face_idx = el
            .properties
            .iter()
            .position(|p| p.name() == "vertex_indices" || p.name() == "vertex_index");
        for _ in 0..el.count {
            let (values, lists) = match encoding {
                Encoding::Ascii => {
                    let (n, line) = next_line(&mut pos).ok_or_else(|| {
                        Error::parse(path, ascii_line + 1, format!("truncated {} data", el.name))
                    })?;
                    ascii_line = n;
                    read_ascii_record(path, n, &line, &el.properties)?
                }
                Encoding::Little | Encoding::Big => {
                    read_binary_record(path, bytes, &mut pos, &el.properties, encoding == Encoding::Big)?
                }
            };
            if is_vertex {
                let c = |k: usize| values[coord_idx[k].unwrap()];
                let p = Point3::new(c(0), c(1), c(2));
                if !p.is_finite() {
                    return Err(Error::parse(path, ascii_line, "non-finite vertex coordinate"));
                }
                vertices.push(p);
            } else if is_face {
                if let Some(fi) = face_idx {
                    let poly: Vec<usize> = lists[fi]
                        .iter()
                        .map(|&v| {
                            if v >= 0.0 && v.fract() == 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(Error::parse(path, ascii_line, format!("invalid face index {v}")))
                            }
                        })
                        .collect::<Result<_>>()?;
                    faces.push(poly);
                }
            }
        }
    }
    for (i, f) in faces.iter().enumerate() {
        if f.len() < 3 || f.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::parse(path, header_lines, format!("face {i} is invalid")));
        }
    }
    Ok(Ply { vertices, faces })
}

type Record = (Vec<f64>, Vec<Vec<f64>>);

fn read_ascii_record(path: &Path, n: usize, line: &str, props: &[Property]) -> Result<Record> {
    let mut tok = line.split_whitespace();
    let mut next = || -> Result<f64> {
        let t = tok
            .next()
            .ok_or_else(|| Error::parse(path, n, "too few values"))?;
        t.parse::<f64>()
            .map_err(|_| Error::parse(path, n, format!("invalid number '{t}'")))
    };
    let mut values = vec![f64::NAN; props.len()];
    let mut lists = vec![Vec::new(); props.len()];
    for (i, p) in props.iter().enumerate() {
        match p {
            Property::Scalar(..) => values[i] = next()?,
            Property::List(..) => {
                let count = next()?;
                if count < 0.0 || count.fract() != 0.0 {
                    return Err(Error::parse(path, n, "invalid list length"));
                }
                lists[i] = (0..count as usize).map(|_| next()).collect::<Result<_>>()?;
            }
        }
    }
    Ok((values, lists))
}

fn read_binary_record(
    path: &Path,
    bytes: &[u8],
    pos: &mut usize,
    props: &[Property],
    big: bool,
) -> Result<Record> {
    let mut take = |s: Scalar| -> Result<f64> {
        let end = *pos + s.size();
        if end > bytes.len() {
            return Err(Error::parse(path, 0, "truncated binary data"));
        }
        let b = &bytes[*pos..end];
        *pos = end;
        Ok(if big { s.read_be(b) } else { s.read_le(b) })
    };
    let mut values = vec![f64::NAN; props.len()];
    let mut lists = vec![Vec::new(); props.len()];
    for (i, p) in props.iter().enumerate() {
        match p {
            Property::Scalar(_, s) => values[i] = take(*s)?,
            Property::List(_, ct, it) => {
                let count = take(*ct)?;
                if count < 0.0 {
                    return Err(Error::parse(path, 0, "negative list length"));
                }
                lists[i] = (0..count as usize).map(|_| take(*it)).collect::<Result<_>>()?;
            }
        }
    }
    Ok((values, lists))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: BufWriter<fs::File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

/// Writes `x y z` lines using the shortest representation that reads back exactly.
pub fn write_xyz(path: impl AsRef<Path>, points: &[Point3]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn write_ply(path: impl AsRef<Path>, points: &[Point3], encoding: PlyEncoding) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )
    .map_err(io)?;
    for p in points {
        match encoding {
            PlyEncoding::Ascii => writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(io)?,
            PlyEncoding::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    w.write_all(&v.to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    finish(path, w)
}

/// Writes by extension: `.xyz`/`.txt` or `.ply` (ASCII).
pub fn save_point_cloud(path: impl AsRef<Path>, points: &[Point3]) -> Result<()> {
    let path = path.as_ref();
    match CloudFormat::from_path(path)? {
        CloudFormat::Xyz => write_xyz(path, points),
        CloudFormat::Ply => write_ply(path, points, PlyEncoding::Ascii),
        CloudFormat::Obj => Err(Error::UnsupportedFormat(format!(
            "{}: point clouds are written as .xyz or .ply",
            path.display()
        ))),
    }
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z).map_err(io)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io)?;
    }
    finish(path, w)
}

/// Vertices with an `error` scalar and a viridis color scaled to the largest error.
pub fn write_heatmap_ply(path: impl AsRef<Path>, points: &[Point3], errors: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if points.len() != errors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} error values",
            points.len(),
            errors.len()
        )));
    }
    let max = errors.iter().copied().fold(0.0, f64::max);
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty double error\nend_header\n",
        points.len()
    )
    .map_err(io)?;
    for (p, &e) in points.iter().zip(errors) {
        let t = if max > 0.0 { e / max } else { 0.0 };
        let [r, g, b] = viridis(t);
        writeln!(w, "{} {} {} {r} {g} {b} {e}", p.x, p.y, p.z).map_err(io)?;
    }
    finish(path, w)
}

/// Piecewise-linear viridis colormap on `[0, 1]`.
pub fn viridis(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 9] = [
        [68.0, 1.0, 84.0],
        [71.0, 44.0, 122.0],
        [59.0, 81.0, 139.0],
        [44.0, 113.0, 142.0],
        [33.0, 144.0, 141.0],
        [39.0, 173.0, 129.0],
        [92.0, 200.0, 99.0],
        [170.0, 220.0, 50.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    out
}
