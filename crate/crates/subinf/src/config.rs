//! Problem configuration files.
//!
//! A configuration is a TOML document with three flat sections:
//!
//! ```toml
//! [problem]
//! geometry = "euclidean:1"      # euclidean:<n> | heisenberg1 | grushin
//! lower = [0.0]                 # default: zeros
//! upper = [1.0]                 # default: ones
//! h = 0.0078125
//! boundary = "linear:0,1"       # linear:<c0,c1..cn> | constant:<c> | aronsson43 | file:<path>
//! integrand = "squared_norm"    # squared_norm | power:<alpha>
//!
//! [solver]
//! k_max = 256
//! eps = 0.0                     # 0 solves the infinity problem, > 0 the auxiliary one
//! side = "lower"
//! cross_k_tolerance = 1e-4
//! gradient_tolerance = 1e-8
//! max_iterations = 20000
//! initialization = "boundary_extension"   # or "zero"
//!
//! [run]
//! seed = 0
//! deterministic = true
//! ```
//!
//! Every error names the offending field and, when it came from a file, the
//! line it sits on.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use subinf_core::solver::{BoundaryData, Initialization, Side, SolverConfig};
use subinf_core::{GridDomain, GroupSpec, Integrand};
use toml::Spanned;

use crate::failure::Failure;
use crate::fieldio;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    run: RawRun,
    /// Acceptance files carry a `[criterion]` section; problems ignore it.
    #[serde(default, rename = "criterion")]
    _criterion: Option<toml::Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    geometry: Option<Spanned<String>>,
    lower: Option<Spanned<Vec<f64>>>,
    upper: Option<Spanned<Vec<f64>>>,
    h: Option<Spanned<f64>>,
    boundary: Option<Spanned<String>>,
    integrand: Option<Spanned<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    k_max: Option<Spanned<u32>>,
    eps: Option<Spanned<f64>>,
    side: Option<Spanned<String>>,
    cross_k_tolerance: Option<Spanned<f64>>,
    gradient_tolerance: Option<Spanned<f64>>,
    max_iterations: Option<Spanned<usize>>,
    initialization: Option<Spanned<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<Spanned<u64>>,
    deterministic: Option<Spanned<bool>>,
}

/// A value together with the source line it came from, if any.
#[derive(Debug, Clone)]
struct Entry<T> {
    value: T,
    line: Option<usize>,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn entry<T>(&self, s: Option<Spanned<T>>) -> Option<Entry<T>> {
        s.map(|s| {
            let line = Some(line_of(self.0, s.span().start));
            Entry {
                value: s.into_inner(),
                line,
            }
        })
    }
}

/// 1-based line of a byte offset.
pub(crate) fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn field_error(section: &str, key: &str, line: Option<usize>, msg: impl std::fmt::Display) -> Failure {
    match line {
        Some(l) => Failure::Config(format!("line {l}: [{section}] {key}: {msg}")),
        None => Failure::Config(format!("[{section}] {key}: {msg}")),
    }
}

/// Command-line values that replace or supply configuration entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub geometry: Option<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub boundary: Option<String>,
    pub integrand: Option<String>,
    pub eps: Option<f64>,
    pub side: Option<String>,
    pub k_max: Option<u32>,
    pub cross_k_tolerance: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSection {
    pub geometry: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
    pub boundary: String,
    pub integrand: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSection {
    pub k_max: u32,
    pub eps: f64,
    pub side: String,
    pub cross_k_tolerance: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub initialization: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
    pub deterministic: bool,
}

/// Named boundary data.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    /// `c0 + c1 x1 + ... + cn xn`.
    Linear(Vec<f64>),
    Constant(f64),
    /// `|x1|^{4/3} - |x2|^{4/3}` on two-dimensional geometries.
    Aronsson43,
    File(PathBuf),
}

impl BoundarySpec {
    pub fn parse(id: &str, dim: usize) -> Result<Self, String> {
        let id = id.trim();
        let numbers = |s: &str| -> Result<Vec<f64>, String> {
            s.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| format!("`{c}` is not a number")))
                .collect()
        };
        if id == "aronsson43" {
            return if dim == 2 {
                Ok(BoundarySpec::Aronsson43)
            } else {
                Err(format!("aronsson43 needs a two-dimensional geometry, got dimension {dim}"))
            };
        }
        if let Some(rest) = id.strip_prefix("linear:") {
            let c = numbers(rest)?;
            if c.len() != dim + 1 {
                return Err(format!("linear data needs {} coefficients, got {}", dim + 1, c.len()));
            }
            return Ok(BoundarySpec::Linear(c));
        }
        if let Some(rest) = id.strip_prefix("constant:") {
            let c = numbers(rest)?;
            return match c[..] {
                [v] => Ok(BoundarySpec::Constant(v)),
                _ => Err("constant data takes one value".into()),
            };
        }
        if let Some(path) = id.strip_prefix("file:") {
            return Ok(BoundarySpec::File(PathBuf::from(path.trim())));
        }
        Err(format!(
            "`{id}` is not linear:<coefficients>, constant:<c>, aronsson43 or file:<path>"
        ))
    }

    /// Closed-form data, if the boundary is not a file.
    pub fn exact(&self) -> Option<impl Fn(&[f64]) -> f64 + '_> {
        if matches!(self, BoundarySpec::File(_)) {
            return None;
        }
        Some(move |x: &[f64]| match self {
            BoundarySpec::Linear(c) => c[0] + c[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            BoundarySpec::Constant(c) => *c,
            BoundarySpec::Aronsson43 => x[0].abs().powf(4.0 / 3.0) - x[1].abs().powf(4.0 / 3.0),
            BoundarySpec::File(_) => unreachable!(),
        })
    }

    /// Whether the closed form solves the infinity-Laplace equation on
    /// `spec`. Linear data does on groups, where symmetrized second
    /// derivatives of coordinates vanish, but not on Grushin.
    pub fn is_solution(&self, spec: GroupSpec) -> bool {
        match self {
            BoundarySpec::Constant(_) => true,
            BoundarySpec::Linear(_) => spec.is_group(),
            BoundarySpec::Aronsson43 => spec == GroupSpec::Euclidean(2),
            BoundarySpec::File(_) => false,
        }
    }
}

/// A fully resolved and validated problem.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub run: RunSection,
    #[serde(skip)]
    pub spec: GroupSpec,
    #[serde(skip)]
    pub domain: Arc<GridDomain>,
    #[serde(skip)]
    pub boundary: BoundarySpec,
    #[serde(skip)]
    pub boundary_data: BoundaryData,
    #[serde(skip)]
    pub integrand: Integrand,
    #[serde(skip)]
    pub side: Side,
}

/// A command-line value wins over the file entry.
fn pick<T: Clone>(file: Option<Entry<T>>, over: &Option<T>) -> Option<Entry<T>> {
    match over {
        Some(v) => Some(Entry {
            value: v.clone(),
            line: None,
        }),
        None => file,
    }
}

impl ProblemConfig {
    /// Reads a configuration file; relative `file:` paths resolve against
    /// its directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, Failure> {
        let src = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&src, base, overrides).map_err(|f| match f {
            Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(src: &str, base_dir: &Path, overrides: &Overrides) -> Result<Self, Failure> {
        let raw: RawFile = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start));
            let msg = e.message().to_string();
            match line {
                Some(l) => Failure::Config(format!("line {l}: {msg}")),
                None => Failure::Config(msg),
            }
        })?;
        Self::resolve(raw, src, base_dir, overrides)
    }

    /// Builds a configuration from command-line values alone.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self, Failure> {
        Self::resolve(RawFile::default(), "", Path::new("."), overrides)
    }

    fn resolve(raw: RawFile, src: &str, base_dir: &Path, o: &Overrides) -> Result<Self, Failure> {
        let lines = Lines(src);
        let p = raw.problem;
        let geometry = pick(lines.entry(p.geometry), &o.geometry)
            .ok_or_else(|| field_error("problem", "geometry", None, "missing"))?;
        let spec = GroupSpec::parse(&geometry.value).map_err(|e| field_error("problem", "geometry", geometry.line, e))?;
        let n = spec.total_dim();
        let corner = |e: Option<Entry<Vec<f64>>>, key: &str, default: f64| -> Result<Entry<Vec<f64>>, Failure> {
            let e = e.unwrap_or(Entry { value: vec![default; n], line: None });
            if e.value.len() != n {
                return Err(field_error(
                    "problem",
                    key,
                    e.line,
                    format!("{spec} needs {n} coordinates, got {}", e.value.len()),
                ));
            }
            Ok(e)
        };
        let lower = corner(pick(lines.entry(p.lower), &o.lower), "lower", 0.0)?;
        let upper = corner(pick(lines.entry(p.upper), &o.upper), "upper", 1.0)?;
        let h = pick(lines.entry(p.h), &o.h).ok_or_else(|| field_error("problem", "h", None, "missing"))?;
        let domain = GridDomain::new_box(spec, &lower.value, &upper.value, h.value)
            .map(Arc::new)
            .map_err(|e| {
                let line = h.line.or(lower.line).or(upper.line);
                field_error("problem", "h", line, e)
            })?;
        let integrand_e = pick(lines.entry(p.integrand), &o.integrand).unwrap_or(Entry {
            value: "squared_norm".into(),
            line: None,
        });
        let integrand = Integrand::parse(&integrand_e.value)
            .map_err(|e| field_error("problem", "integrand", integrand_e.line, e))?;
        let boundary_e = pick(lines.entry(p.boundary), &o.boundary)
            .ok_or_else(|| field_error("problem", "boundary", None, "missing"))?;
        let boundary =
            BoundarySpec::parse(&boundary_e.value, n).map_err(|e| field_error("problem", "boundary", boundary_e.line, e))?;
        let boundary_data = match &boundary {
            BoundarySpec::File(rel) => {
                let path = base_dir.join(rel);
                let u = fieldio::load(&path, None).map_err(|e| field_error("problem", "boundary", boundary_e.line, e))?;
                if **u.domain() != *domain {
                    return Err(field_error(
                        "problem",
                        "boundary",
                        boundary_e.line,
                        format!("grid of {} does not match the configured box", path.display()),
                    ));
                }
                BoundaryData::from_field(&u)
            }
            other => {
                let g = other.exact().expect("closed-form boundary");
                BoundaryData::from_fn(domain.clone(), g)
                    .map_err(|e| field_error("problem", "boundary", boundary_e.line, e))?
            }
        };

        let s = raw.solver;
        let k_max = pick(lines.entry(s.k_max), &o.k_max).unwrap_or(Entry { value: 256, line: None });
        if k_max.value < 4 {
            return Err(field_error("solver", "k_max", k_max.line, "must be at least 4"));
        }
        let eps = pick(lines.entry(s.eps), &o.eps).unwrap_or(Entry { value: 0.0, line: None });
        if !(eps.value.is_finite() && eps.value >= 0.0) {
            return Err(field_error("solver", "eps", eps.line, "must be finite and nonnegative"));
        }
        let side_e = pick(lines.entry(s.side), &o.side).unwrap_or(Entry {
            value: "lower".into(),
            line: None,
        });
        let side = Side::parse(&side_e.value).map_err(|e| field_error("solver", "side", side_e.line, e))?;
        let positive = |e: Option<Entry<f64>>, key: &str, default: f64| -> Result<f64, Failure> {
            let e = e.unwrap_or(Entry { value: default, line: None });
            if e.value.is_finite() && e.value > 0.0 {
                Ok(e.value)
            } else {
                Err(field_error("solver", key, e.line, "must be positive"))
            }
        };
        let cross_k_tolerance =
            positive(pick(lines.entry(s.cross_k_tolerance), &o.cross_k_tolerance), "cross_k_tolerance", 1e-4)?;
        let gradient_tolerance = positive(lines.entry(s.gradient_tolerance), "gradient_tolerance", 1e-8)?;
        let max_iterations = lines.entry(s.max_iterations).unwrap_or(Entry { value: 20_000, line: None });
        if max_iterations.value == 0 {
            return Err(field_error("solver", "max_iterations", max_iterations.line, "must be positive"));
        }
        let init = lines.entry(s.initialization).unwrap_or(Entry {
            value: "boundary_extension".into(),
            line: None,
        });
        if !matches!(init.value.as_str(), "boundary_extension" | "zero") {
            return Err(field_error(
                "solver",
                "initialization",
                init.line,
                format!("`{}` is not `boundary_extension` or `zero`", init.value),
            ));
        }

        let r = raw.run;
        let seed = pick(lines.entry(r.seed), &o.seed).map_or(0, |e| e.value);
        let deterministic = lines.entry(r.deterministic).map_or(true, |e| e.value);

        Ok(ProblemConfig {
            problem: ProblemSection {
                geometry: spec.to_string(),
                lower: lower.value,
                upper: upper.value,
                h: h.value,
                boundary: boundary_e.value.trim().to_string(),
                integrand: integrand.id(),
            },
            solver: SolverSection {
                k_max: k_max.value,
                eps: eps.value,
                side: side.id().into(),
                cross_k_tolerance,
                gradient_tolerance,
                max_iterations: max_iterations.value,
                initialization: init.value,
            },
            run: RunSection { seed, deterministic },
            spec,
            domain,
            boundary,
            boundary_data,
            integrand,
            side,
        })
    }

    /// Solver settings implied by the `[solver]` section.
    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::dyadic(self.solver.k_max);
        c.cross_k_tolerance = self.solver.cross_k_tolerance;
        c.descent.gradient_tolerance = self.solver.gradient_tolerance;
        c.descent.max_iterations = self.solver.max_iterations;
        c.initialization = match self.solver.initialization.as_str() {
            "zero" => Initialization::Zero,
            _ => Initialization::BoundaryExtension,
        };
        c
    }

    /// The resolved configuration as TOML, defaults expanded.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
