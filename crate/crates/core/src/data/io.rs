//! CSV and ASCII PLY point clouds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::geom::PointCloud;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    /// ASCII PLY with `x`, `y` and optional `z` vertex properties.
    Ply,
}

impl CloudFormat {
    /// Guesses the format from the file extension (`.ply`, else CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Csv,
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = match format {
        CloudFormat::Csv => parse_csv(&text),
        CloudFormat::Ply => parse_ply(&text),
    };
    parsed.map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    })
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let text = match format {
        CloudFormat::Csv => to_csv(cloud),
        CloudFormat::Ply => to_ply(cloud)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from("<input>"),
        line,
        msg: msg.into(),
    }
}

fn parse_real(token: &str, line: usize) -> Result<f64> {
    let x: f64 = token
        .trim()
        .parse()
        .map_err(|_| parse_error(line, format!("not a number: {:?}", token.trim())))?;
    if !x.is_finite() {
        return Err(parse_error(line, format!("non-finite value {x}")));
    }
    Ok(x)
}

/// One point per line, comma-separated; the dimension comes from the first
/// non-blank line.
pub fn parse_csv(text: &str) -> Result<PointCloud> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        let d = *dim.get_or_insert(fields.len());
        if fields.len() != d {
            return Err(parse_error(
                line,
                format!("expected {d} fields, found {}", fields.len()),
            ));
        }
        for f in fields {
            coords.push(parse_real(f, line)?);
        }
    }
    let dim = dim.ok_or_else(|| parse_error(0, "no points"))?;
    PointCloud::new(dim, coords)
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

/// ASCII PLY: vertex `x`, `y` and optional `z`; other properties and
/// elements are skipped.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut ended = false;
    let mut format_seen = false;
    for (line, l) in lines.by_ref() {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => format_seen = true,
            ["format", other, ..] => {
                return Err(parse_error(line, format!("unsupported PLY format {other}")));
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_error(line, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            ["property", "list", ..] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(line, "property before any element"))?;
                el.has_list = true;
                el.properties.push(String::new());
            }
            ["property", _ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(line, "property before any element"))?;
                el.properties.push(name.to_string());
            }
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(parse_error(line, format!("malformed header line {l:?}"))),
        }
    }
    if !format_seen || !ended {
        return Err(parse_error(0, "incomplete PLY header"));
    }
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_error(0, "no vertex element"))?;
    let vertex = &elements[vi];
    if vertex.has_list {
        return Err(parse_error(0, "list properties on vertices are not supported"));
    }
    let column = |name: &str| vertex.properties.iter().position(|p| p == name);
    let (x, y) = match (column("x"), column("y")) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(parse_error(0, "vertex element lacks x/y properties")),
    };
    let axes: Vec<usize> = match column("z") {
        Some(z) => vec![x, y, z],
        None => vec![x, y],
    };
    let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
    let mut body = lines.filter(|(_, l)| !l.is_empty()).skip(skip);
    let mut coords = Vec::with_capacity(vertex.count * axes.len());
    for k in 0..vertex.count {
        let (line, l) = body
            .next()
            .ok_or_else(|| parse_error(0, format!("expected {} vertices, found {k}", vertex.count)))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != vertex.properties.len() {
            return Err(parse_error(
                line,
                format!(
                    "expected {} vertex values, found {}",
                    vertex.properties.len(),
                    tokens.len()
                ),
            ));
        }
        for &a in &axes {
            coords.push(parse_real(tokens[a], line)?);
        }
    }
    PointCloud::new(axes.len(), coords)
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros
/// dropped, exponent form outside `[1e-4, 1e17)`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_fraction(&format!("{:.*}", (16 - exp) as usize, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn to_csv(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.iter() {
        let row: Vec<String> = p.iter().map(|&x| format_g17(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn to_ply(cloud: &PointCloud) -> Result<String> {
    let names = match cloud.dim() {
        2 => &["x", "y"][..],
        3 => &["x", "y", "z"][..],
        d => return Err(Error::Unsupported(format!("PLY output for dimension {d}"))),
    };
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", cloud.len()).expect("string write");
    for n in names {
        writeln!(out, "property double {n}").expect("string write");
    }
    out.push_str("end_header\n");
    for p in cloud.iter() {
        let row: Vec<String> = p.iter().map(|&x| format_g17(x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}
