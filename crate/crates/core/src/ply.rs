//! PLY ingestion for multispectral point clouds.
//!
//! Supports `ascii 1.0` and `binary_little_endian 1.0`. Only the vertex
//! element is kept; any other element (faces, edges, ...) is parsed far
//! enough to be skipped. Coordinates of any numeric type are widened to
//! `f64`, colour channels must hold values in `0..=255`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::PlyError;

/// One scanned plant: N points with an (R, G, B, NIR) tuple each.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    colors: Vec<[u8; 4]>,
    source_id: String,
}

impl PointCloud {
    /// Builds a cloud, checking that it is non-empty, that both arrays agree in
    /// length and that every coordinate is finite. Negative zero is stored as
    /// positive zero so that extrema do not depend on reduction order.
    pub fn new(
        mut points: Vec<[f64; 3]>,
        colors: Vec<[u8; 4]>,
        source_id: impl Into<String>,
    ) -> Result<Self, PlyError> {
        if points.is_empty() {
            return Err(PlyError::InvalidSpec("point cloud must hold at least one point".into()));
        }
        if points.len() != colors.len() {
            return Err(PlyError::InvalidSpec(format!(
                "{} points but {} colour tuples",
                points.len(),
                colors.len()
            )));
        }
        for (index, p) in points.iter_mut().enumerate() {
            for c in p.iter_mut() {
                if !c.is_finite() {
                    return Err(PlyError::Data { index, reason: "non-finite coordinate".into() });
                }
                *c += 0.0;
            }
        }
        Ok(Self { points, colors, source_id: source_id.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for the usual `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn colors(&self) -> &[[u8; 4]] {
        &self.colors
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }
}

/// Property names used to locate the colour channels.
#[derive(Debug, Clone)]
pub struct PlyOptions {
    pub red_names: Vec<String>,
    pub green_names: Vec<String>,
    pub blue_names: Vec<String>,
    /// Candidates for the near-infrared property, tried in order.
    pub nir_names: Vec<String>,
}

impl Default for PlyOptions {
    fn default() -> Self {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            red_names: names(&["red", "diffuse_red", "r"]),
            green_names: names(&["green", "diffuse_green", "g"]),
            blue_names: names(&["blue", "diffuse_blue", "b"]),
            nir_names: names(&["nir", "NIR", "scalar_NIR", "alpha"]),
        }
    }
}

/// Side information collected while parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub format: String,
    /// `comment` lines from the header, without the keyword.
    pub comments: Vec<String>,
    /// Channels not found in the vertex element, among "red", "green",
    /// "blue", "nir". Those channels were filled with 0.
    pub missing_channels: Vec<String>,
    /// Non-vertex elements that were skipped, with their declared counts.
    pub skipped_elements: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
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
    fn from_name(name: &str) -> Option<Self> {
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
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
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
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    comments: Vec<String>,
    /// Byte offset of the first payload byte.
    body_start: usize,
    /// 1-based line number of `end_header`.
    end_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let err = |line: usize, reason: &str| PlyError::Parse { line, reason: reason.to_string() };

    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut comments = Vec::new();

    loop {
        let Some(rel_end) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(err(line_no + 1, "header is not terminated by end_header"));
        };
        let raw = &bytes[pos..pos + rel_end];
        pos += rel_end + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| err(line_no, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');

        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(err(1, "missing 'ply' magic line"));
            }
            continue;
        }

        let mut words = line.split_whitespace();
        let Some(keyword) = words.next() else { continue };
        match keyword {
            "format" => {
                let kind = words.next().ok_or_else(|| err(line_no, "format line without a format"))?;
                let version = words.next().unwrap_or("");
                encoding = Some(match kind {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => {
                        return Err(PlyError::UnsupportedFormat(format!("{kind} {version}")))
                    }
                    other => return Err(err(line_no, &format!("unknown format '{other}'"))),
                });
                if version != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("{kind} {version}")));
                }
            }
            "comment" | "obj_info" => {
                let text = line[keyword.len()..].trim_start();
                comments.push(text.to_string());
            }
            "element" => {
                let name = words.next().ok_or_else(|| err(line_no, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| err(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| err(line_no, "property declared before any element"))?;
                let ty = words.next().ok_or_else(|| err(line_no, "property without a type"))?;
                let kind = if ty == "list" {
                    let count = words.next().and_then(Scalar::from_name);
                    let item = words.next().and_then(Scalar::from_name);
                    match (count, item) {
                        (Some(count), Some(item)) => PropertyKind::List { count, item },
                        _ => return Err(err(line_no, "malformed list property")),
                    }
                } else {
                    PropertyKind::Scalar(
                        Scalar::from_name(ty)
                            .ok_or_else(|| err(line_no, &format!("unknown property type '{ty}'")))?,
                    )
                };
                let name = words.next().ok_or_else(|| err(line_no, "property without a name"))?;
                element.properties.push(Property { name: name.to_string(), kind });
            }
            "end_header" => break,
            other => return Err(err(line_no, &format!("unexpected header keyword '{other}'"))),
        }
    }

    let encoding = encoding.ok_or_else(|| err(line_no, "header has no format line"))?;
    Ok(Header { encoding, elements, comments, body_start: pos, end_line: line_no })
}

/// Column positions of the vertex properties we care about.
struct VertexLayout {
    xyz: [usize; 3],
    color: [Option<usize>; 4],
}

fn vertex_layout(
    element: &Element,
    options: &PlyOptions,
    end_line: usize,
) -> Result<VertexLayout, PlyError> {
    let find = |names: &[String]| {
        names.iter().find_map(|n| {
            element
                .properties
                .iter()
                .position(|p| &p.name == n && matches!(p.kind, PropertyKind::Scalar(_)))
        })
    };
    let mut xyz = [0; 3];
    for (slot, axis) in xyz.iter_mut().zip(["x", "y", "z"]) {
        *slot = find(&[axis.to_string()]).ok_or_else(|| PlyError::Parse {
            line: end_line,
            reason: format!("vertex element has no scalar '{axis}' property"),
        })?;
    }
    Ok(VertexLayout {
        xyz,
        color: [
            find(&options.red_names),
            find(&options.green_names),
            find(&options.blue_names),
            find(&options.nir_names),
        ],
    })
}

fn to_channel(value: f64, index: usize) -> Result<u8, PlyError> {
    if !value.is_finite() || !(0.0..=255.0).contains(&value) {
        return Err(PlyError::Data { index, reason: format!("colour value {value} outside 0..=255") });
    }
    Ok(value.round() as u8)
}

/// Parses a PLY file with the default property names.
pub fn parse_ply(bytes: &[u8]) -> Result<(PointCloud, ParseReport), PlyError> {
    parse_ply_with(bytes, &PlyOptions::default())
}

pub fn parse_ply_with(
    bytes: &[u8],
    options: &PlyOptions,
) -> Result<(PointCloud, ParseReport), PlyError> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| PlyError::Parse {
            line: header.end_line,
            reason: "no vertex element declared".into(),
        })?;
    let vertex = &header.elements[vertex_pos];
    if vertex.count == 0 {
        return Err(PlyError::Parse {
            line: header.end_line,
            reason: "vertex element declares zero vertices".into(),
        });
    }
    let layout = vertex_layout(vertex, options, header.end_line)?;

    let mut report = ParseReport {
        format: match header.encoding {
            Encoding::Ascii => "ascii 1.0".into(),
            Encoding::BinaryLe => "binary_little_endian 1.0".into(),
        },
        comments: header.comments.clone(),
        ..Default::default()
    };
    for (slot, name) in layout.color.iter().zip(["red", "green", "blue", "nir"]) {
        if slot.is_none() {
            report.missing_channels.push(name.to_string());
        }
    }
    for e in header.elements.iter().filter(|e| e.name != "vertex") {
        report.skipped_elements.push((e.name.clone(), e.count));
    }

    // Only elements that precede the vertex element have to be walked.
    let preceding = &header.elements[..vertex_pos];
    let body = &bytes[header.body_start..];
    let (points, colors) = match header.encoding {
        Encoding::Ascii => read_ascii(body, preceding, vertex, &layout, header.end_line)?,
        Encoding::BinaryLe => read_binary(body, preceding, vertex, &layout)?,
    };
    let cloud = PointCloud::new(points, colors, String::new())?;
    Ok((cloud, report))
}

type Payload = (Vec<[f64; 3]>, Vec<[u8; 4]>);

fn read_ascii(
    body: &[u8],
    preceding: &[Element],
    vertex: &Element,
    layout: &VertexLayout,
    end_line: usize,
) -> Result<Payload, PlyError> {
    let text = std::str::from_utf8(body).map_err(|e| PlyError::Parse {
        line: end_line + 1,
        reason: format!("ASCII payload is not valid UTF-8: {e}"),
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (end_line + 1 + i, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let skip_rows: usize = preceding.iter().map(|e| e.count).sum();
    for _ in 0..skip_rows {
        if lines.next().is_none() {
            return Err(PlyError::Truncated { expected: vertex.count, found: 0 });
        }
    }

    let n = vertex.count;
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(vertex.properties.len());
    for index in 0..n {
        let Some((line_no, line)) = lines.next() else {
            return Err(PlyError::Truncated { expected: n, found: index });
        };
        values.clear();
        let mut tokens = line.split_whitespace();
        for prop in &vertex.properties {
            let parse = |tok: Option<&str>| -> Result<f64, PlyError> {
                let tok = tok.ok_or_else(|| PlyError::Parse {
                    line: line_no,
                    reason: format!("vertex row has too few values (missing '{}')", prop.name),
                })?;
                tok.parse::<f64>().map_err(|_| PlyError::Parse {
                    line: line_no,
                    reason: format!("'{tok}' is not a number"),
                })
            };
            match prop.kind {
                PropertyKind::Scalar(_) => values.push(parse(tokens.next())?),
                PropertyKind::List { .. } => {
                    let len = parse(tokens.next())? as usize;
                    for _ in 0..len {
                        parse(tokens.next())?;
                    }
                    values.push(f64::NAN);
                }
            }
        }
        let p = [values[layout.xyz[0]], values[layout.xyz[1]], values[layout.xyz[2]]];
        if p.iter().any(|c| !c.is_finite()) {
            return Err(PlyError::Data { index, reason: "non-finite coordinate".into() });
        }
        let mut c = [0u8; 4];
        for (dst, slot) in c.iter_mut().zip(layout.color) {
            if let Some(col) = slot {
                *dst = to_channel(values[col], index)?;
            }
        }
        points.push(p);
        colors.push(c);
    }
    Ok((points, colors))
}

fn read_binary(
    body: &[u8],
    preceding: &[Element],
    vertex: &Element,
    layout: &VertexLayout,
) -> Result<Payload, PlyError> {
    let n = vertex.count;
    let mut pos = 0usize;

    for element in preceding {
        for _ in 0..element.count {
            for prop in &element.properties {
                pos = skip_binary_property(body, pos, &prop.kind)
                    .ok_or(PlyError::Truncated { expected: n, found: 0 })?;
            }
        }
    }

    // Fast path: fixed-size rows.
    let offsets: Option<Vec<(usize, Scalar)>> = {
        let mut acc = 0;
        vertex
            .properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(s) => {
                    let o = acc;
                    acc += s.size();
                    Some((o, s))
                }
                PropertyKind::List { .. } => None,
            })
            .collect()
    };

    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut row_values = vec![0.0; vertex.properties.len()];
    for index in 0..n {
        match &offsets {
            Some(offs) => {
                let stride = offs.last().map(|(o, s)| o + s.size()).unwrap_or(0);
                let row = body
                    .get(pos..pos + stride)
                    .ok_or(PlyError::Truncated { expected: n, found: index })?;
                for (v, (o, s)) in row_values.iter_mut().zip(offs) {
                    *v = s.read_le(&row[*o..]);
                }
                pos += stride;
            }
            None => {
                for (v, prop) in row_values.iter_mut().zip(&vertex.properties) {
                    match prop.kind {
                        PropertyKind::Scalar(s) => {
                            let b = body
                                .get(pos..pos + s.size())
                                .ok_or(PlyError::Truncated { expected: n, found: index })?;
                            *v = s.read_le(b);
                            pos += s.size();
                        }
                        PropertyKind::List { .. } => {
                            pos = skip_binary_property(body, pos, &prop.kind)
                                .ok_or(PlyError::Truncated { expected: n, found: index })?;
                            *v = f64::NAN;
                        }
                    }
                }
            }
        }
        let p = [row_values[layout.xyz[0]], row_values[layout.xyz[1]], row_values[layout.xyz[2]]];
        if p.iter().any(|c| !c.is_finite()) {
            return Err(PlyError::Data { index, reason: "non-finite coordinate".into() });
        }
        let mut c = [0u8; 4];
        for (dst, slot) in c.iter_mut().zip(layout.color) {
            if let Some(col) = slot {
                *dst = to_channel(row_values[col], index)?;
            }
        }
        points.push(p);
        colors.push(c);
    }
    Ok((points, colors))
}

fn skip_binary_property(body: &[u8], pos: usize, kind: &PropertyKind) -> Option<usize> {
    match *kind {
        PropertyKind::Scalar(s) => {
            let end = pos + s.size();
            (end <= body.len()).then_some(end)
        }
        PropertyKind::List { count, item } => {
            let len = count.read_le(body.get(pos..pos + count.size())?);
            let end = pos + count.size() + (len as usize) * item.size();
            (end <= body.len()).then_some(end)
        }
    }
}

/// Serializes the vertices of a cloud as ASCII PLY with float coordinates
/// and `uchar` red/green/blue/nir properties.
pub fn write_ascii_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(64 + cloud.len() * 32);
    out.push_str("ply\nformat ascii 1.0\n");
    write_vertex_header(&mut out, cloud.len(), "double");
    for (p, c) in cloud.points().iter().zip(cloud.colors()) {
        // `{}` on f64 prints the shortest representation that round-trips.
        let _ = writeln!(out, "{} {} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2], c[3]);
    }
    out
}

/// Serializes the vertices as binary little-endian PLY with `float`
/// coordinates, so values are narrowed to `f32`.
pub fn write_binary_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    write_vertex_header(&mut header, cloud.len(), "float");
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * 16);
    for (p, c) in cloud.points().iter().zip(cloud.colors()) {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out.extend_from_slice(c);
    }
    out
}

fn write_vertex_header(out: &mut String, n: usize, coord_type: &str) {
    let _ = writeln!(out, "element vertex {n}");
    for axis in ["x", "y", "z"] {
        let _ = writeln!(out, "property {coord_type} {axis}");
    }
    for channel in ["red", "green", "blue", "nir"] {
        let _ = writeln!(out, "property uchar {channel}");
    }
    out.push_str("end_header\n");
}

/// Parameters of a synthetic test cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Inclusive (min, max) per axis.
    pub extents: [(f64, f64); 3],
    pub count: usize,
    pub seed: u64,
}

/// Generates a deterministic cloud whose per-axis extrema equal the
/// requested extents: point 0 sits on the low corner and point 1 on the high
/// corner, the rest are uniform inside the box.
pub fn generate_synthetic_cloud(spec: &SyntheticSpec) -> Result<PointCloud, PlyError> {
    if spec.count == 0 {
        return Err(PlyError::InvalidSpec("point count must be at least 1".into()));
    }
    for (lo, hi) in spec.extents {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(PlyError::InvalidSpec(format!("invalid extent [{lo}, {hi}]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lo = spec.extents.map(|e| e.0);
    let hi = spec.extents.map(|e| e.1);

    let mut points = Vec::with_capacity(spec.count);
    let mut colors = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let p = match i {
            0 => lo,
            1 => hi,
            _ => std::array::from_fn(|a| {
                if lo[a] == hi[a] {
                    lo[a]
                } else {
                    rng.gen_range(lo[a]..=hi[a])
                }
            }),
        };
        points.push(p);
        colors.push(rng.gen());
    }
    PointCloud::new(points, colors, format!("synthetic-{}", spec.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINTS: &str = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n\
        property float x\nproperty float y\nproperty float z\n\
        property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar nir\n\
        end_header\n0 0 0 10 20 30 40\n1 2 4 50 60 70 80\n";

    #[test]
    fn ascii_two_points() {
        let (cloud, report) = parse_ply(TWO_POINTS.as_bytes()).unwrap();
        assert_eq!(cloud.points(), &[[0.0, 0.0, 0.0], [1.0, 2.0, 4.0]]);
        assert_eq!(cloud.colors(), &[[10, 20, 30, 40], [50, 60, 70, 80]]);
        assert!(report.missing_channels.is_empty());
        assert_eq!(report.comments, vec!["made by hand".to_string()]);
    }

    #[test]
    fn binary_single_vertex() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
            property float x\nproperty float y\nproperty float z\n\
            property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar nir\n\
            end_header\n"
            .to_vec();
        for v in [1.5f32, -2.0, 3.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let (cloud, _) = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.points(), &[[1.5, -2.0, 3.25]]);
        assert_eq!(cloud.colors(), &[[1, 2, 3, 4]]);
    }

    #[test]
    fn missing_nir_is_zero_filled() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n\
            property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
            end_header\n0 0 0 1 2 3\n1 1 1 4 5 6\n";
        let (cloud, report) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.colors(), &[[1, 2, 3, 0], [4, 5, 6, 0]]);
        assert_eq!(report.missing_channels, vec!["nir".to_string()]);
    }

    #[test]
    fn nir_name_is_configurable() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
            property float z\nproperty uchar infrared\nend_header\n0 0 0 77\n";
        let (cloud, report) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.colors()[0][3], 0);
        assert_eq!(report.missing_channels.len(), 4);

        let options = PlyOptions { nir_names: vec!["infrared".into()], ..Default::default() };
        let (cloud, report) = parse_ply_with(text.as_bytes(), &options).unwrap();
        assert_eq!(cloud.colors()[0][3], 77);
        assert_eq!(report.missing_channels, vec!["red", "green", "blue"]);
    }

    #[test]
    fn faces_are_skipped() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
            property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
            end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let (cloud, report) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(report.skipped_elements, vec![("face".to_string(), 1)]);
    }

    #[test]
    fn binary_face_before_vertex_is_walked() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement face 1\n\
            property list uchar int vertex_indices\nelement vertex 1\n\
            property double x\nproperty double y\nproperty double z\nend_header\n"
            .to_vec();
        bytes.push(3);
        for i in 0i32..3 {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        for v in [7.0f64, 8.0, 9.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let (cloud, _) = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.points(), &[[7.0, 8.0, 9.0]]);
    }

    #[test]
    fn big_endian_is_unsupported() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply(text.as_bytes()), Err(PlyError::UnsupportedFormat(_))));
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex two\nend_header\n";
        match parse_ply(text.as_bytes()) {
            Err(PlyError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_ply(b"plx\n"), Err(PlyError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\n"),
            Err(PlyError::Parse { .. })
        ));
    }

    #[test]
    fn missing_coordinate_property() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n";
        assert!(matches!(parse_ply(text.as_bytes()), Err(PlyError::Parse { .. })));
    }

    #[test]
    fn truncated_payloads() {
        let ascii = TWO_POINTS.replace("1 2 4 50 60 70 80\n", "");
        assert!(matches!(
            parse_ply(ascii.as_bytes()),
            Err(PlyError::Truncated { expected: 2, found: 1 })
        ));
        let cloud = PointCloud::new(vec![[0.0; 3], [1.0; 3]], vec![[0; 4]; 2], "").unwrap();
        let mut bin = write_binary_ply(&cloud);
        bin.truncate(bin.len() - 3);
        assert!(matches!(parse_ply(&bin), Err(PlyError::Truncated { expected: 2, found: 1 })));
    }

    #[test]
    fn non_finite_coordinate() {
        let text = TWO_POINTS.replace("1 2 4 50", "1 nan 4 50");
        assert!(matches!(parse_ply(text.as_bytes()), Err(PlyError::Data { index: 1, .. })));
    }

    #[test]
    fn colour_out_of_range() {
        let text = TWO_POINTS.replace("10 20 30 40", "10 20 300 40");
        assert!(matches!(parse_ply(text.as_bytes()), Err(PlyError::Data { index: 0, .. })));
    }

    #[test]
    fn crlf_header() {
        let text = TWO_POINTS.replace('\n', "\r\n");
        let (cloud, _) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 2);
    }

    #[test]
    fn synthetic_extents_are_pinned() {
        let spec = SyntheticSpec { extents: [(0.0, 10.0), (0.0, 20.0), (0.0, 5.0)], count: 100, seed: 7 };
        let cloud = generate_synthetic_cloud(&spec).unwrap();
        assert_eq!(cloud.len(), 100);
        for axis in 0..3 {
            let min = cloud.points().iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
            let max = cloud.points().iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((min, max), spec.extents[axis]);
        }
        assert_eq!(cloud, generate_synthetic_cloud(&spec).unwrap());
    }

    #[test]
    fn synthetic_degenerate_and_invalid() {
        let spec = SyntheticSpec { extents: [(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)], count: 1, seed: 0 };
        let cloud = generate_synthetic_cloud(&spec).unwrap();
        assert_eq!(cloud.points(), &[[1.0, 3.0, 5.0]]);
        let spec = SyntheticSpec { count: 0, ..spec };
        assert!(matches!(generate_synthetic_cloud(&spec), Err(PlyError::InvalidSpec(_))));
    }
}
