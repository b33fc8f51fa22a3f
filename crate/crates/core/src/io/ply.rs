//! ASCII PLY reading and writing for labeled point clouds.
//!
//! Only the `vertex` element is interpreted; other elements are skipped.
//! Positions are stored as `float`, colors as `uchar`, labels as `int`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::PointCloud;

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Ply { line, msg: msg.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarKind {
    Int,
    Float32,
    Float64,
}

fn scalar_kind(name: &str) -> Option<ScalarKind> {
    Some(match name {
        "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8" | "uint8" | "int16" | "uint16"
        | "int32" | "uint32" => ScalarKind::Int,
        "float" | "float32" => ScalarKind::Float32,
        "double" | "float64" => ScalarKind::Float64,
        _ => return None,
    })
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    /// Scalar properties; list properties make the element unreadable as
    /// vertices but are fine for skipped elements.
    props: Vec<(String, Option<ScalarKind>)>,
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ply(cloud)?)?;
    Ok(())
}

pub fn encode_ply(cloud: &PointCloud) -> Result<String> {
    let n = cloud.len();
    if cloud.colors.len() != n || cloud.gt_labels.as_ref().is_some_and(|l| l.len() != n) {
        return Err(Error::InvalidArgument("cloud rows disagree".into()));
    }
    let mut out = String::with_capacity(64 * n + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {n}");
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    if cloud.gt_labels.is_some() {
        out.push_str("property int label\n");
    }
    out.push_str("end_header\n");
    for i in 0..n {
        let p = cloud.positions[i];
        let c = cloud.colors[i];
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let _ = write!(
            out,
            "{} {} {} {} {} {}",
            p[0] as f32,
            p[1] as f32,
            p[2] as f32,
            q(c[0]),
            q(c[1]),
            q(c[2])
        );
        if let Some(labels) = &cloud.gt_labels {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let text = fs::read(path)?;
    let text = String::from_utf8(text).map_err(|_| err(0, "file is not UTF-8 text"))?;
    parse_ply(&text)
}

pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(err(n, "missing header: first line must be \"ply\"")),
        None => return Err(err(1, "missing header: empty file")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    let mut header_end = None;
    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                match tok.next() {
                    Some("ascii") => {}
                    Some(other) => return Err(err(n, format!("unsupported format {other:?}; only ascii is read"))),
                    None => return Err(err(n, "format line without a format")),
                }
                format_seen = true;
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| err(n, "element without a name"))?;
                let count = tok
                    .next()
                    .ok_or_else(|| err(n, "element without a count"))?
                    .parse::<usize>()
                    .map_err(|_| err(n, "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| err(n, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| err(n, "property without a type"))?;
                if ty == "list" {
                    let (_, _, name) = (tok.next(), tok.next(), tok.next());
                    let name = name.ok_or_else(|| err(n, "list property without a name"))?;
                    element.props.push((name.to_string(), None));
                } else {
                    let kind = scalar_kind(ty).ok_or_else(|| err(n, format!("unknown property type {ty:?}")))?;
                    let name = tok.next().ok_or_else(|| err(n, "property without a name"))?;
                    element.props.push((name.to_string(), Some(kind)));
                }
            }
            Some("end_header") => {
                header_end = Some(n);
                break;
            }
            Some(other) => return Err(err(n, format!("unexpected header keyword {other:?}"))),
        }
    }
    let header_end = header_end.ok_or_else(|| err(0, "missing header: no end_header"))?;
    if !format_seen {
        return Err(err(header_end, "missing header: no format line"));
    }
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| err(header_end, "missing header: no vertex element"))?;

    let vertex = &elements[vertex_pos];
    let find = |name: &str| -> Result<usize> {
        let at = vertex
            .props
            .iter()
            .position(|(p, _)| p == name)
            .ok_or_else(|| err(header_end, format!("missing required property {name}")))?;
        if vertex.props[at].1.is_none() {
            return Err(err(header_end, format!("property {name} must be a scalar")));
        }
        Ok(at)
    };
    let xyz = [find("x")?, find("y")?, find("z")?];
    let rgb = [find("red")?, find("green")?, find("blue")?];
    let label = match vertex.props.iter().position(|(p, _)| p == "label") {
        Some(at) if vertex.props[at].1 == Some(ScalarKind::Int) => Some(at),
        Some(_) => return Err(err(header_end, "label property must be an integer type")),
        None => None,
    };
    if vertex.props.iter().any(|(_, k)| k.is_none()) {
        return Err(err(header_end, "list properties on vertices are not supported"));
    }

    // skip elements declared before the vertices
    let mut last_line = header_end;
    for e in &elements[..vertex_pos] {
        for _ in 0..e.count {
            match lines.next() {
                Some((n, _)) => last_line = n,
                None => return Err(err(last_line + 1, format!("{} count mismatch at line {}", e.name, last_line + 1))),
            }
        }
    }

    let n = vertex.count;
    let cap = n.min(1 << 20);
    let mut positions = Vec::with_capacity(cap);
    let mut colors = Vec::with_capacity(cap);
    let mut labels = label.map(|_| Vec::with_capacity(cap));
    let width = vertex.props.len();
    let mut fields: Vec<&str> = Vec::with_capacity(width);
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(last_line + 1, format!("vertex count mismatch at line {}", last_line + 1)))?;
        last_line = ln;
        fields.clear();
        fields.extend(line.split_whitespace());
        if fields.len() != width {
            return Err(err(ln, format!("expected {width} values, found {}", fields.len())));
        }
        let num = |at: usize| -> Result<f64> {
            let t = fields[at];
            let v = match vertex.props[at].1 {
                Some(ScalarKind::Float32) => t.parse::<f32>().map(f64::from).ok(),
                Some(ScalarKind::Float64) => t.parse::<f64>().ok(),
                _ => t.parse::<i64>().ok().map(|v| v as f64),
            };
            match v {
                Some(v) if v.is_finite() => Ok(v),
                _ => Err(err(ln, format!("non-numeric token {t:?} at line {ln}"))),
            }
        };
        positions.push([num(xyz[0])?, num(xyz[1])?, num(xyz[2])?]);
        let mut c = [0.0; 3];
        for (slot, &at) in c.iter_mut().zip(&rgb) {
            let v = num(at)?;
            *slot = if vertex.props[at].1 == Some(ScalarKind::Int) {
                if !(0.0..=255.0).contains(&v) {
                    return Err(err(ln, format!("color {v} outside 0..=255")));
                }
                v / 255.0
            } else {
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(ln, format!("color {v} outside [0,1]")));
                }
                v
            };
        }
        colors.push(c);
        if let (Some(at), Some(out)) = (label, labels.as_mut()) {
            let v = num(at)?;
            if v < 0.0 || v > f64::from(u32::MAX) {
                return Err(err(ln, format!("label {v} is not a class id")));
            }
            out.push(v as u32);
        }
    }
    for e in &elements[vertex_pos + 1..] {
        for _ in 0..e.count {
            match lines.next() {
                Some((n, _)) => last_line = n,
                None => return Err(err(last_line + 1, format!("{} count mismatch at line {}", e.name, last_line + 1))),
            }
        }
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        let _ = extra;
        return Err(err(ln, format!("vertex count mismatch at line {ln}: data beyond declared elements")));
    }

    Ok(PointCloud {
        positions,
        colors,
        gt_labels: labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 0\n1.5 2 -3 0 128 255\n";

    #[test]
    fn reads_without_labels() {
        let c = parse_ply(SMALL).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.positions[1], [1.5, 2.0, -3.0]);
        assert_eq!(c.colors[0], [1.0, 0.0, 0.0]);
        assert!(c.gt_labels.is_none());
    }

    #[test]
    fn count_mismatch_names_line() {
        let text = SMALL.replace("vertex 2", "vertex 3");
        let e = parse_ply(&text).unwrap_err().to_string();
        assert!(e.contains("vertex count mismatch at line 14"), "{e}");
    }

    #[test]
    fn extra_body_rows_rejected() {
        let text = SMALL.replace("vertex 2", "vertex 1");
        assert!(parse_ply(&text).unwrap_err().to_string().contains("count mismatch"));
    }

    #[test]
    fn non_numeric_token() {
        let text = SMALL.replace("1.5 2", "1.5 abc");
        let e = parse_ply(&text).unwrap_err();
        assert!(matches!(e, Error::Ply { line: 13, .. }), "{e}");
    }

    #[test]
    fn header_errors() {
        assert!(parse_ply("").is_err());
        assert!(parse_ply("plx\n").unwrap_err().to_string().contains("missing header"));
        let no_end = SMALL.replace("end_header\n", "");
        assert!(parse_ply(&no_end).is_err());
        let no_red = SMALL.replace("property uchar red\n", "property uchar r\n");
        assert!(parse_ply(&no_red).unwrap_err().to_string().contains("missing required property red"));
        let binary = SMALL.replace("ascii", "binary_little_endian");
        assert!(parse_ply(&binary).unwrap_err().to_string().contains("unsupported format"));
        let bad_ty = SMALL.replace("float x", "quad x");
        assert!(parse_ply(&bad_ty).unwrap_err().to_string().contains("unknown property type"));
    }

    #[test]
    fn skips_other_elements() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty float nx\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nproperty int label\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0.25 0.5 1 0.1 10 20 30 4\n3 0 0 0\n";
        let c = parse_ply(text).unwrap();
        assert_eq!(c.positions, vec![[0.25, 0.5, 1.0]]);
        assert_eq!(c.gt_labels, Some(vec![4]));
    }

    #[test]
    fn writer_output_is_readable() {
        let cloud = PointCloud::new(
            vec![[0.1, -2.5, 3.0], [1e-3, 0.0, 7.25]],
            vec![[0.0, 0.5, 1.0], [0.2, 0.4, 0.6]],
            Some(vec![3, 0]),
        )
        .unwrap();
        let text = encode_ply(&cloud).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\nelement vertex 2\n"));
        assert!(text.contains("property int label\nend_header\n0.1 -2.5 3 0 128 255 3\n"));
        let back = parse_ply(&text).unwrap();
        assert_eq!(back.gt_labels, cloud.gt_labels);
        for (a, b) in back.positions.iter().zip(&cloud.positions) {
            for k in 0..3 {
                assert_eq!(a[k], f64::from(b[k] as f32));
            }
        }
    }
}
