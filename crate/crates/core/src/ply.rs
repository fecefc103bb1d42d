//! Minimal PLY reader shared by the mesh and splat loaders.
//!
//! Reads `ascii` and `binary_little_endian` bodies with arbitrary scalar and
//! list properties. Values are widened to `f64`; callers pick properties by
//! name.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::parse("PLY", format!("unknown property type `{other}`"))),
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

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementHeader {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

/// A parsed element: scalar columns by property position, plus one
/// flattened buffer per list property.
#[derive(Debug, Clone)]
pub struct Element {
    pub header: ElementHeader,
    /// `scalars[p][row]` for scalar property `p` (empty for list properties).
    pub scalars: Vec<Vec<f64>>,
    /// `lists[p][row]` for list property `p` (empty for scalar properties).
    pub lists: Vec<Vec<Vec<f64>>>,
}

impl Element {
    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.header.properties.iter().position(|p| p.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        let i = self.property_index(name)?;
        match self.header.properties[i].kind {
            PropertyKind::Scalar(_) => Some(&self.scalars[i]),
            PropertyKind::List { .. } => None,
        }
    }

    pub fn list(&self, name: &str) -> Option<&[Vec<f64>]> {
        let i = self.property_index(name)?;
        match self.header.properties[i].kind {
            PropertyKind::List { .. } => Some(&self.lists[i]),
            PropertyKind::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlyData {
    pub encoding: Encoding,
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.header.name == name)
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Encoding, Vec<ElementHeader>, usize)> {
    const END: &[u8] = b"end_header";
    let pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse("PLY", "missing end_header"))?;
    let mut body_start = pos + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let text = std::str::from_utf8(&bytes[..pos]).map_err(|_| Error::parse("PLY", "header is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse("PLY", "missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<ElementHeader> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => return Err(Error::UnsupportedFormat(format!("PLY encoding `{other}`"))),
                });
            }
            ["element", name, count] => elements.push(ElementHeader {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse("PLY", format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse("PLY", "property before element"))?;
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List {
                        count: Scalar::parse(count)?,
                        item: Scalar::parse(item)?,
                    },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse("PLY", "property before element"))?;
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(Scalar::parse(ty)?),
                });
            }
            _ => return Err(Error::parse("PLY", format!("unrecognized header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse("PLY", "missing format line"))?;
    Ok((encoding, elements, body_start))
}

fn empty_element(header: ElementHeader) -> Element {
    let np = header.properties.len();
    Element {
        scalars: header
            .properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(_) => Vec::with_capacity(header.count),
                PropertyKind::List { .. } => Vec::new(),
            })
            .collect(),
        lists: vec![Vec::new(); np],
        header,
    }
}

/// Parse a whole PLY file held in memory.
pub fn parse(bytes: &[u8]) -> Result<PlyData> {
    let (encoding, headers, body_start) = parse_header(bytes)?;
    let body = &bytes[body_start..];
    let elements = match encoding {
        Encoding::BinaryLittleEndian => parse_binary(body, headers)?,
        Encoding::Ascii => parse_ascii(body, headers)?,
    };
    Ok(PlyData { encoding, elements })
}

fn parse_binary(body: &[u8], headers: Vec<ElementHeader>) -> Result<Vec<Element>> {
    let truncated = || Error::parse("PLY", "binary body truncated");
    let mut cursor = 0usize;
    let mut out = Vec::with_capacity(headers.len());
    for header in headers {
        let mut el = empty_element(header);
        for _ in 0..el.header.count {
            for (p, prop) in el.header.properties.iter().enumerate() {
                match prop.kind {
                    PropertyKind::Scalar(s) => {
                        let end = cursor + s.size();
                        let raw = body.get(cursor..end).ok_or_else(truncated)?;
                        el.scalars[p].push(s.read_le(raw));
                        cursor = end;
                    }
                    PropertyKind::List { count, item } => {
                        let end = cursor + count.size();
                        let raw = body.get(cursor..end).ok_or_else(truncated)?;
                        let n = count.read_le(raw);
                        cursor = end;
                        if n < 0.0 {
                            return Err(Error::parse("PLY", "negative list length"));
                        }
                        let n = n as usize;
                        let mut values = Vec::with_capacity(n);
                        for _ in 0..n {
                            let end = cursor + item.size();
                            let raw = body.get(cursor..end).ok_or_else(truncated)?;
                            values.push(item.read_le(raw));
                            cursor = end;
                        }
                        el.lists[p].push(values);
                    }
                }
            }
        }
        out.push(el);
    }
    Ok(out)
}

fn parse_ascii(body: &[u8], headers: Vec<ElementHeader>) -> Result<Vec<Element>> {
    let text = std::str::from_utf8(body).map_err(|_| Error::parse("PLY", "ascii body is not UTF-8"))?;
    let mut tokens = text.split_ascii_whitespace();
    let mut next = || -> Result<f64> {
        let tok = tokens.next().ok_or_else(|| Error::parse("PLY", "ascii body truncated"))?;
        tok.parse::<f64>()
            .map_err(|_| Error::parse("PLY", format!("bad number `{tok}`")))
    };
    let mut out = Vec::with_capacity(headers.len());
    for header in headers {
        let mut el = empty_element(header);
        for _ in 0..el.header.count {
            for (p, prop) in el.header.properties.iter().enumerate() {
                match prop.kind {
                    PropertyKind::Scalar(_) => el.scalars[p].push(next()?),
                    PropertyKind::List { .. } => {
                        let n = next()?;
                        if n < 0.0 {
                            return Err(Error::parse("PLY", "negative list length"));
                        }
                        let values = (0..n as usize).map(|_| next()).collect::<Result<Vec<_>>>()?;
                        el.lists[p].push(values);
                    }
                }
            }
        }
        out.push(el);
    }
    Ok(out)
}

/// Header for a binary little-endian file. `elements` lists
/// `(name, count, property lines)` where each property line is the text after
/// `property `.
pub fn binary_header(elements: &[(&str, usize, &[&str])]) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    for (name, count, props) in elements {
        h.push_str(&format!("element {name} {count}\n"));
        for p in *props {
            h.push_str("property ");
            h.push_str(p);
            h.push('\n');
        }
    }
    h.push_str("end_header\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ascii_with_lists() {
        let src = b"ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let ply = parse(src).unwrap();
        assert_eq!(ply.encoding, Encoding::Ascii);
        let v = ply.element("vertex").unwrap();
        assert_eq!(v.scalar("x").unwrap(), &[0.0, 1.0, 0.0]);
        let f = ply.element("face").unwrap();
        assert_eq!(f.list("vertex_indices").unwrap()[0], vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_big_endian() {
        let src = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse(src), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let mut bytes = binary_header(&[("vertex", 2, &["float x"])]).into_bytes();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(matches!(parse(&bytes), Err(Error::Parse { .. })));
    }
}
