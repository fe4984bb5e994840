//! Text formats for fields and plot data.
//!
//! A field file is a header followed by one line per lattice node:
//!
//! ```text
//! # subinf field
//! geometry heisenberg1
//! shape 9 9 9
//! lower -1.0000000000000000e0 -1.0000000000000000e0 -1.0000000000000000e0
//! h 2.5000000000000000e-1
//! nodes 729
//! 0 B -1.0000000000000000e0
//! ...
//! ```
//!
//! The node line holds the row-major lattice index, the class (`I`
//! interior, `B` boundary, `E` exterior) and the value. Floats carry 17
//! significant digits, so write → read → write is byte-identical.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use subinf_core::{GridDomain, GroupSpec, NodeKind, ScalarField};

use crate::failure::Failure;

const MAGIC: &str = "# subinf field";

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn class(kind: NodeKind) -> char {
    match kind {
        NodeKind::Interior => 'I',
        NodeKind::Boundary => 'B',
        NodeKind::Exterior => 'E',
    }
}

pub fn write_field(u: &ScalarField) -> String {
    let d = u.domain();
    let mut out = String::with_capacity(32 * d.len() + 128);
    let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(" ");
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "geometry {}", d.spec()).unwrap();
    writeln!(out, "shape {}", join(&mut d.shape().iter().map(|s| s.to_string()))).unwrap();
    writeln!(out, "lower {}", join(&mut d.lower().iter().map(|&x| float(x)))).unwrap();
    writeln!(out, "h {}", float(d.h())).unwrap();
    writeln!(out, "nodes {}", d.len()).unwrap();
    for (i, (&v, &k)) in u.values().iter().zip(d.kinds()).enumerate() {
        writeln!(out, "{i} {} {}", class(k), float(v)).unwrap();
    }
    out
}

/// Parse error with a 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FormatError {}

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError {
        line,
        message: message.into(),
    }
}

/// Parses a field file. `expected` optionally pins the geometry.
pub fn read_field(src: &str, expected: Option<GroupSpec>) -> Result<ScalarField, FormatError> {
    let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("missing {what}")));
    let (n, first) = next("header")?;
    if first.trim() != MAGIC {
        return Err(err(n, format!("expected `{MAGIC}`")));
    }
    let mut keyed = |key: &str| -> Result<(usize, Vec<String>), FormatError> {
        let (n, l) = next(key)?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(err(n, format!("expected `{key}`")));
        }
        Ok((n, parts.map(String::from).collect()))
    };
    let (gl, g) = keyed("geometry")?;
    let spec = GroupSpec::parse(&g.join(" ")).map_err(|e| err(gl, e.to_string()))?;
    if let Some(want) = expected {
        if want != spec {
            return Err(err(gl, format!("expected geometry {want}, found {spec}")));
        }
    }
    let (sl, s) = keyed("shape")?;
    let shape: Vec<usize> = s
        .iter()
        .map(|v| v.parse().map_err(|_| err(sl, format!("bad extent `{v}`"))))
        .collect::<Result<_, _>>()?;
    let (ll, l) = keyed("lower")?;
    let lower: Vec<f64> = l
        .iter()
        .map(|v| v.parse().map_err(|_| err(ll, format!("bad coordinate `{v}`"))))
        .collect::<Result<_, _>>()?;
    let (hl, hv) = keyed("h")?;
    let h: f64 = match &hv[..] {
        [v] => v.parse().map_err(|_| err(hl, format!("bad spacing `{v}`")))?,
        _ => return Err(err(hl, "expected one spacing")),
    };
    let (nl, nv) = keyed("nodes")?;
    let count: usize = match &nv[..] {
        [v] => v.parse().map_err(|_| err(nl, format!("bad node count `{v}`")))?,
        _ => return Err(err(nl, "expected one node count")),
    };
    if shape.len() != spec.total_dim() || shape.iter().product::<usize>() != count {
        return Err(err(sl, format!("shape does not fit {spec} with {count} nodes")));
    }
    let mut kinds = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let (n, l) = next("node line")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        let [idx, k, v] = parts[..] else {
            return Err(err(n, "expected `index class value`"));
        };
        if idx.parse::<usize>().ok() != Some(i) {
            return Err(err(n, format!("expected node index {i}")));
        }
        kinds.push(match k {
            "I" => NodeKind::Interior,
            "B" => NodeKind::Boundary,
            "E" => NodeKind::Exterior,
            _ => return Err(err(n, format!("unknown class `{k}`"))),
        });
        values.push(v.parse::<f64>().map_err(|_| err(n, format!("bad value `{v}`")))?);
    }
    if let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(n, format!("trailing content `{l}`")));
    }
    let domain = GridDomain::from_kinds(spec, &lower, h, &shape, kinds).map_err(|e| err(sl, e.to_string()))?;
    ScalarField::from_values(Arc::new(domain), values).map_err(|e| err(0, e.to_string()))
}

pub fn load(path: &Path, expected: Option<GroupSpec>) -> Result<ScalarField, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    read_field(&src, expected).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

pub fn save(path: &Path, u: &ScalarField) -> Result<(), Failure> {
    std::fs::write(path, write_field(u)).map_err(|e| Failure::io(path, e))
}

/// Whitespace-separated columns under a `#` header.
pub fn columns(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("# {}\n", header.join(" "));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| float(v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}
