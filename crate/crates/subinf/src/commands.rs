//! Subcommand implementations. Each returns the text for stdout and, when
//! artifacts were written but a tolerance was missed, the failure to exit
//! with.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use subinf_core::ccmetric::build_graph;
use subinf_core::convolution::{inf_convolution, kernel_curvature, semiconvexity_modulus, sup_convolution, KernelSide};
use subinf_core::solver::{aux_solve, infinity_solve, uniqueness_gap, Side, SolveReport, SolverConfig};
use subinf_core::verify::{amle_check, comparison_check, subelliptic_check, viscosity_check, OperatorSpec};
use subinf_core::{GridDomain, GroupSpec, Integrand, ScalarField};

use crate::config::{Overrides, ProblemConfig};
use crate::failure::Failure;
use crate::fieldio;
use crate::manifest::{floats, pairs, Manifest};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, failure: None }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

/// `eps > 0` selects the auxiliary problem, otherwise the infinity problem.
pub fn run_solver(config: &ProblemConfig) -> Result<SolveReport, Failure> {
    let sc = config.solver_config();
    let report = if config.solver.eps > 0.0 {
        aux_solve(&config.boundary_data, &config.integrand, config.solver.eps, config.side, &sc)?
    } else {
        infinity_solve(&config.boundary_data, &config.integrand, &sc)?
    };
    Ok(report)
}

/// Largest interior deviation from the closed-form solution, when the
/// configuration has one.
pub fn exact_error(config: &ProblemConfig, u: &ScalarField) -> Option<f64> {
    if config.solver.eps > 0.0 || !config.boundary.is_solution(config.spec) {
        return None;
    }
    let exact = config.boundary.exact()?;
    let d = u.domain();
    Some(
        d.interior_nodes()
            .iter()
            .map(|&i| (u.values()[i] - exact(&d.coords(i))).abs())
            .fold(0.0, f64::max),
    )
}

pub fn solve(config: &ProblemConfig, out_dir: &Path) -> Result<Outcome, Failure> {
    create_dir(out_dir)?;
    let report = run_solver(config)?;
    let field_path = out_dir.join("solution.field");
    fieldio::save(&field_path, &report.solution)?;

    let mut m = Manifest::new("solve").with_config(config);
    m.set("result", "field", "solution.field");
    m.set("result", "converged", report.converged);
    m.set("result", "residual", report.residual);
    m.set("result", "iterations", report.iterations as i64);
    m.set("result", "k_final", report.levels.last().map_or(0, |l| l.k) as i64);
    m.set("result", "levels", report.levels.iter().map(|l| l.k as i64).collect::<Vec<_>>());
    m.set("result", "level_residuals", floats(report.levels.iter().map(|l| l.residual)));
    m.set("result", "cross_k", pairs(&report.cross_k));
    let error = exact_error(config, &report.solution);
    if let Some(e) = error {
        m.set("result", "max_error", e);
    }
    write_file(&out_dir.join("manifest.toml"), &m.render())?;

    let mut out = String::new();
    writeln!(out, "field     {}", field_path.display()).unwrap();
    writeln!(out, "manifest  {}", out_dir.join("manifest.toml").display()).unwrap();
    writeln!(out, "residual  {:.3e}", report.residual).unwrap();
    writeln!(out, "converged {}", report.converged).unwrap();
    if let Some(e) = error {
        writeln!(out, "max_error {e:.3e}").unwrap();
    }
    let failure = (!report.converged).then(|| {
        Failure::NonConvergence(format!(
            "residual {:.3e}, last cross-k difference {:.3e}",
            report.residual,
            report.cross_k.last().map_or(f64::NAN, |c| c.1)
        ))
    });
    Ok(Outcome { stdout: out, failure })
}

pub struct DistanceArgs {
    pub geometry: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
    pub depth: usize,
    pub from: Vec<f64>,
    pub to: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

fn node_at(d: &GridDomain, x: &[f64], what: &str) -> Result<usize, Failure> {
    if x.len() != d.dim() {
        return Err(Failure::Config(format!("{what}: expected {} coordinates, got {}", d.dim(), x.len())));
    }
    d.nearest_node(x)
        .ok_or_else(|| Failure::Config(format!("{what}: {x:?} is not near an active node")))
}

pub fn distance(a: &DistanceArgs) -> Result<Outcome, Failure> {
    let spec = GroupSpec::parse(&a.geometry).map_err(|e| Failure::Config(format!("geometry: {e}")))?;
    let d = Arc::new(GridDomain::new_box(spec, &a.lower, &a.upper, a.h)?);
    let graph = build_graph(d.clone(), a.depth)?;
    let source = node_at(&d, &a.from, "from")?;
    if let Some(to) = &a.to {
        let target = node_at(&d, to, "to")?;
        let dist = graph.distance(source, target)?;
        return Ok(Outcome::ok(format!("{dist:.16e}\n")));
    }
    let dist = graph.distances_from(source)?;
    let mut header: Vec<String> = (0..d.dim()).map(|i| format!("x{i}")).collect();
    header.push("d_cc".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = d.active_nodes().map(|i| {
        let mut row = d.coords(i);
        row.push(dist[i]);
        row
    });
    let text = fieldio::columns(&header, rows);
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(Outcome::ok(format!("wrote {}\n", path.display())))
        }
        None => Ok(Outcome::ok(text)),
    }
}

pub struct ConvolveArgs {
    pub input: PathBuf,
    pub eps: f64,
    /// `sup` or `inf`.
    pub side: String,
    pub kernel: String,
    pub out: PathBuf,
}

pub fn convolve(a: &ConvolveArgs) -> Result<Outcome, Failure> {
    let u = fieldio::load(&a.input, None)?;
    let kernel = KernelSide::parse(&a.kernel).map_err(|e| Failure::Config(format!("kernel: {e}")))?;
    let report = match a.side.as_str() {
        "sup" => sup_convolution(&u, a.eps, kernel)?,
        "inf" => inf_convolution(&u, a.eps, kernel)?,
        other => return Err(Failure::Config(format!("side: `{other}` is not `sup` or `inf`"))),
    };
    create_dir(&a.out)?;
    fieldio::save(&a.out.join("convolved.field"), &report.output)?;
    let mut argmax = String::from("# node argmax\n");
    for (i, m) in report.argmax.iter().enumerate() {
        if let Some(j) = m {
            writeln!(argmax, "{i} {j}").unwrap();
        }
    }
    write_file(&a.out.join("argmax.dat"), &argmax)?;

    let modulus = semiconvexity_modulus(&report.output);
    let mut m = Manifest::new("convolve");
    m.set("input", "field", a.input.display().to_string());
    m.set("input", "eps", a.eps);
    m.set("input", "side", a.side.clone());
    m.set("input", "kernel", kernel.id());
    m.set("result", "field", "convolved.field");
    m.set("result", "argmax", "argmax.dat");
    m.set("result", "r0", report.r0);
    m.set("result", "shrunken_nodes", report.shrunken.len() as i64);
    m.set("result", "semiconvexity_modulus", modulus);
    m.set("result", "kernel_curvature", kernel_curvature(u.domain(), kernel)?);
    write_file(&a.out.join("manifest.toml"), &m.render())?;
    Ok(Outcome::ok(format!(
        "field    {}\nmodulus  {modulus:.6e}\nshrunken {} nodes\n",
        a.out.join("convolved.field").display(),
        report.shrunken.len()
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Viscosity,
    Comparison,
    Amle,
    Subelliptic,
}

pub struct VerifyArgs {
    pub check: Check,
    pub input: Option<PathBuf>,
    pub other: Option<PathBuf>,
    pub operator: String,
    pub integrand: String,
    pub geometry: Option<String>,
    pub samples: Option<usize>,
    pub trials: usize,
    pub k_max: u32,
    pub tol: Option<f64>,
    pub seed: u64,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref()
        .ok_or_else(|| Failure::Config(format!("--{flag} is required for this check")))
}

fn location(u: &ScalarField, node: Option<usize>) -> String {
    match node {
        Some(i) => format!("node {i} at {:?}", u.domain().coords(i)),
        None => "none".into(),
    }
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome, Failure> {
    let integrand = Integrand::parse(&a.integrand).map_err(|e| Failure::Config(format!("integrand: {e}")))?;
    let op = OperatorSpec::parse(&a.operator, integrand).map_err(|e| Failure::Config(format!("operator: {e}")))?;
    let mut out = String::new();
    let (passed, summary) = match a.check {
        Check::Subelliptic => {
            let spec = match (&a.geometry, &a.input) {
                (Some(g), _) => GroupSpec::parse(g).map_err(|e| Failure::Config(format!("geometry: {e}")))?,
                (None, Some(p)) => fieldio::load(p, None)?.domain().spec(),
                (None, None) => return Err(Failure::Config("--geometry or --input is required".into())),
            };
            let r = subelliptic_check(&op, spec, a.samples.unwrap_or(10_000), a.seed)?;
            writeln!(out, "check subelliptic\ngeometry {spec}\nsamples {}", r.samples).unwrap();
            writeln!(out, "worst_violation {:.6e}", r.worst_violation).unwrap();
            (r.passed, format!("worst violation {:.3e}", r.worst_violation))
        }
        Check::Viscosity => {
            let u = fieldio::load(required(&a.input, "input")?, None)?;
            let h = u.domain().h();
            let tol = a.tol.unwrap_or(10.0 * h * h);
            let r = viscosity_check(&u, &op, a.samples.unwrap_or(64), a.seed);
            let (sub, sub_at) = r.worst_sub();
            let (sup, sup_at) = r.worst_super();
            writeln!(out, "check viscosity\ntested_above {}\ntested_below {}", r.tested_above, r.tested_below).unwrap();
            writeln!(out, "worst_sub {sub:.6e} {}", location(&u, sub_at)).unwrap();
            writeln!(out, "worst_super {sup:.6e} {}", location(&u, sup_at)).unwrap();
            writeln!(out, "tolerance {tol:.6e}").unwrap();
            (
                sub <= tol && sup <= tol,
                format!("sub {sub:.3e}, super {sup:.3e}, tolerance {tol:.3e}"),
            )
        }
        Check::Comparison => {
            let u = fieldio::load(required(&a.input, "input")?, None)?;
            let v = fieldio::load(required(&a.other, "other")?, None)?;
            let tol = a.tol.unwrap_or(1e-6);
            let margin = comparison_check(&u, &v)?;
            writeln!(out, "check comparison\nmargin {margin:.6e}\ntolerance {tol:.6e}").unwrap();
            (margin >= -tol, format!("margin {margin:.3e} below -{tol:.3e}"))
        }
        Check::Amle => {
            let u = fieldio::load(required(&a.input, "input")?, None)?;
            let tol = a.tol.unwrap_or(1e-3);
            let r = amle_check(&u, &integrand, a.trials, &SolverConfig::dyadic(a.k_max), a.seed)?;
            writeln!(out, "check amle\ntested {}\nskipped {}", r.tested, r.skipped).unwrap();
            writeln!(out, "worst_ratio {:.6e}", r.worst_ratio).unwrap();
            if let Some((lo, hi)) = &r.worst_box {
                writeln!(out, "worst_box {lo:?} {hi:?}").unwrap();
            }
            writeln!(out, "tolerance {tol:.6e}").unwrap();
            (r.worst_ratio <= 1.0 + tol, format!("worst ratio {:.6}", r.worst_ratio))
        }
    };
    writeln!(out, "status {}", if passed { "pass" } else { "fail" }).unwrap();
    Ok(Outcome {
        stdout: out,
        failure: (!passed).then(|| Failure::Verification(summary)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// `(eps, gap)` between lower and upper auxiliary solutions.
    Gap,
    /// `(h, max error)` against the closed-form solution.
    Error,
}

pub fn table(config_path: &Path, kind: TableKind, values: &[f64], overrides: &Overrides) -> Result<Outcome, Failure> {
    if values.is_empty() {
        return Err(Failure::Config("--values needs at least one entry".into()));
    }
    let mut rows = Vec::new();
    match kind {
        TableKind::Gap => {
            let config = ProblemConfig::load(config_path, overrides)?;
            let sc = config.solver_config();
            for &eps in values {
                let u = aux_solve(&config.boundary_data, &config.integrand, eps, Side::Lower, &sc)?;
                let v = aux_solve(&config.boundary_data, &config.integrand, eps, Side::Upper, &sc)?;
                rows.push(vec![eps, uniqueness_gap(&u.solution, &v.solution)?]);
            }
            Ok(Outcome::ok(fieldio::columns(&["eps", "gap"], rows)))
        }
        TableKind::Error => {
            for &h in values {
                let mut o = overrides.clone();
                o.h = Some(h);
                let config = ProblemConfig::load(config_path, &o)?;
                let u = run_solver(&config)?.solution;
                let e = exact_error(&config, &u).ok_or_else(|| {
                    Failure::Config(format!(
                        "boundary `{}` has no closed-form solution on {} with eps = {}",
                        config.problem.boundary, config.problem.geometry, config.solver.eps
                    ))
                })?;
                rows.push(vec![h, e]);
            }
            Ok(Outcome::ok(fieldio::columns(&["h", "error"], rows)))
        }
    }
}
