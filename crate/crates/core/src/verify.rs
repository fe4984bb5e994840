//! Empirical checks of ellipticity, viscosity inequalities, comparison and
//! the AMLE property on grid fields.
//!
//! Viscosity tests use a discrete surrogate: a quadratic touches `u` from
//! above at a node when it dominates `u` on every non-exterior node of the
//! radius-2 box around it, with equality at the node.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carnot::GroupSpec;
use crate::error::{invalid, Result};
use crate::fields::{horizontal_gradient, horizontal_hessian, same_domain, Integrand, ScalarField, SymMatrix};
use crate::solver::{infinity_solve, BoundaryData, SolverConfig};

/// A second-order operator `A(x, p, M)`; equations read `A = 0`.
pub trait Operator {
    fn evaluate(&self, x: &[f64], p: &[f64], m: &SymMatrix) -> f64;
}

impl<F: Fn(&[f64], &[f64], &SymMatrix) -> f64> Operator for F {
    fn evaluate(&self, x: &[f64], p: &[f64], m: &SymMatrix) -> f64 {
        self(x, p, m)
    }
}

/// The operators shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    /// `-pᵀMp`.
    InfinityLaplacian,
    /// `-f_p(p)ᵀ M f_p(p)`.
    Aronsson(Integrand),
    /// `min{f(p) - ε, -f_pᵀ M f_p}`.
    AuxLower { integrand: Integrand, eps: f64 },
    /// `max{ε - f(p), -f_pᵀ M f_p}`.
    AuxUpper { integrand: Integrand, eps: f64 },
}

impl OperatorSpec {
    /// Parses `infinity_laplacian`, `aronsson`, `aux_lower:<eps>` or
    /// `aux_upper:<eps>`.
    pub fn parse(id: &str, integrand: Integrand) -> Result<Self> {
        let id = id.trim();
        let eps = |s: &str| -> Result<f64> {
            match s.trim().parse::<f64>() {
                Ok(e) if e.is_finite() && e > 0.0 => Ok(e),
                _ => Err(invalid("operator", alloc::format!("bad eps in `{id}`"))),
            }
        };
        match id {
            "infinity_laplacian" => Ok(OperatorSpec::InfinityLaplacian),
            "aronsson" => Ok(OperatorSpec::Aronsson(integrand)),
            _ => {
                if let Some(e) = id.strip_prefix("aux_lower:") {
                    Ok(OperatorSpec::AuxLower { integrand, eps: eps(e)? })
                } else if let Some(e) = id.strip_prefix("aux_upper:") {
                    Ok(OperatorSpec::AuxUpper { integrand, eps: eps(e)? })
                } else {
                    Err(invalid("operator", alloc::format!("unknown operator `{id}`")))
                }
            }
        }
    }
}

fn weighted(f: &Integrand, p: &[f64], m: &SymMatrix) -> f64 {
    -m.quadratic_form(&f.gradient(p))
}

impl Operator for OperatorSpec {
    fn evaluate(&self, _x: &[f64], p: &[f64], m: &SymMatrix) -> f64 {
        match self {
            OperatorSpec::InfinityLaplacian => -m.quadratic_form(p),
            OperatorSpec::Aronsson(f) => weighted(f, p, m),
            OperatorSpec::AuxLower { integrand, eps } => (integrand.value(p) - eps).min(weighted(integrand, p, m)),
            OperatorSpec::AuxUpper { integrand, eps } => (eps - integrand.value(p)).max(weighted(integrand, p, m)),
        }
    }
}

/// `A(x, Xu, (D²u)*)` at interior nodes, zero elsewhere.
pub fn operator_field(u: &ScalarField, op: &dyn Operator) -> ScalarField {
    let domain = u.domain().clone();
    let grad = horizontal_gradient(u);
    let hess = horizontal_hessian(u);
    let mut values = vec![0.0; domain.len()];
    let mut x = vec![0.0; domain.dim()];
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        values[node] = op.evaluate(&x, grad.at(node), &hess.matrix(node));
    }
    ScalarField::from_values(domain, values).expect("operators are finite on finite input")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubellipticReport {
    pub passed: bool,
    /// Largest `A(x, p, M) - A(x, p, M - E)` observed.
    pub worst_violation: f64,
    pub samples: usize,
}

/// Tests `A(x, p, M) ≤ A(x, p, M - E) + 1e-9` on random `x, p, M` and
/// positive semidefinite `E = BBᵀ`.
pub fn subelliptic_check(op: &dyn Operator, spec: GroupSpec, samples: usize, seed: u64) -> Result<SubellipticReport> {
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let (n, m) = (spec.total_dim(), spec.horizontal_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut x = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut b = vec![0.0; m * m];
    for _ in 0..samples {
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        p.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
        let mut mat = SymMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                mat.set(i, j, rng.random_range(-2.0..2.0));
            }
        }
        b.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let mut e = SymMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                e.set(i, j, (0..m).map(|k| b[i * m + k] * b[j * m + k]).sum());
            }
        }
        let gap = op.evaluate(&x, &p, &mat) - op.evaluate(&x, &p, &mat.sub(&e));
        worst = worst.max(gap);
    }
    Ok(SubellipticReport {
        passed: worst <= 1e-9,
        worst_violation: worst.max(0.0),
        samples,
    })
}

/// Per-node viscosity violations.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityReport {
    /// `max(A, 0)` over quadratics touching from above, per lattice node.
    pub sub_violation: Vec<f64>,
    /// `max(-A, 0)` over quadratics touching from below, per lattice node.
    pub super_violation: Vec<f64>,
    pub tested_above: usize,
    pub tested_below: usize,
}

impl ViscosityReport {
    fn worst(values: &[f64]) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (i, &v) in values.iter().enumerate() {
            if v > best.0 {
                best = (v, Some(i));
            }
        }
        best
    }

    /// Largest subsolution violation and the node attaining it.
    pub fn worst_sub(&self) -> (f64, Option<usize>) {
        Self::worst(&self.sub_violation)
    }

    pub fn worst_super(&self) -> (f64, Option<usize>) {
        Self::worst(&self.super_violation)
    }
}

/// `(Xφ, (D²φ)*)` at `x` for the quadratic with ambient gradient `d` and
/// Hessian `hm` (row-major `n × n`).
fn horizontal_jet(spec: GroupSpec, x: &[f64], d: &[f64], hm: &[f64]) -> (Vec<f64>, SymMatrix) {
    let frame = spec.horizontal_frame();
    let (n, m) = (frame.dim(), frame.fields());
    let a = frame.matrix(x);
    let mut p = vec![0.0; m];
    frame.apply(x, d, &mut p);
    let mut full = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += a[i * n + k] * a[j * n + l] * hm[k * n + l];
                }
                for l in 0..n {
                    s += a[i * n + k] * frame.coefficient_derivative(j, l, k) * d[l];
                }
            }
            full[i * m + j] = s;
        }
    }
    (p, SymMatrix::from_full(m, &full))
}

/// Ambient centered gradient, one-sided half-spread, and Hessian at an
/// interior node.
fn ambient_jet(u: &ScalarField, node: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = u.domain();
    let n = d.dim();
    let h = d.h();
    let v = u.values();
    let mut grad = vec![0.0; n];
    let mut spread = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        let s = d.stride(a);
        let (f, b) = (v[node + s], v[node - s]);
        grad[a] = (f - b) / (2.0 * h);
        spread[a] = ((f - v[node]) / h - (v[node] - b) / h).abs() / 2.0;
        hess[a * n + a] = (f - 2.0 * v[node] + b) / (h * h);
    }
    for a in 0..n {
        for c in (a + 1)..n {
            let corner = |sa: isize, sc: isize| -> Option<f64> {
                let p = d.neighbor(node, a, sa)?;
                let q = d.neighbor(p, c, sc)?;
                d.is_active(q).then(|| v[q])
            };
            let mixed = match (corner(1, 1), corner(1, -1), corner(-1, 1), corner(-1, -1)) {
                (Some(pp), Some(pm), Some(mp), Some(mm)) => (pp - pm - mp + mm) / (4.0 * h * h),
                _ => 0.0,
            };
            hess[a * n + c] = mixed;
            hess[c * n + a] = mixed;
        }
    }
    (grad, spread, hess)
}

/// Non-exterior nodes of the radius-2 box around `node`, with offsets.
fn neighbourhood(u: &ScalarField, node: usize) -> Vec<(usize, Vec<f64>)> {
    let d = u.domain();
    let n = d.dim();
    let h = d.h();
    let centre = d.multi_index(node);
    let mut out = Vec::new();
    let span = 5usize.pow(n as u32);
    for code in 0..span {
        let mut rest = code;
        let mut idx = vec![0usize; n];
        let mut off = vec![0.0; n];
        let mut ok = true;
        for a in 0..n {
            let o = (rest % 5) as isize - 2;
            rest /= 5;
            let j = centre[a] as isize + o;
            if j < 0 || j >= d.shape()[a] as isize {
                ok = false;
                break;
            }
            idx[a] = j as usize;
            off[a] = o as f64 * h;
        }
        if !ok {
            continue;
        }
        let q = d.linear_index(&idx);
        if q != node && d.is_active(q) {
            out.push((q, off));
        }
    }
    out
}

/// Viscosity sub/supersolution audit with `jet_samples` random quadratics
/// per node and direction.
pub fn viscosity_check(u: &ScalarField, op: &dyn Operator, jet_samples: usize, seed: u64) -> ViscosityReport {
    let domain = u.domain().clone();
    let spec = domain.spec();
    let n = domain.dim();
    let h = domain.h();
    let vals = u.values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ViscosityReport {
        sub_violation: vec![0.0; domain.len()],
        super_violation: vec![0.0; domain.len()],
        tested_above: 0,
        tested_below: 0,
    };
    let mut x = vec![0.0; n];
    let mut dg = vec![0.0; n];
    let mut dh = vec![0.0; n * n];
    let mut cand_d = vec![0.0; n];
    let mut cand_h = vec![0.0; n * n];
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        let (grad, spread, hess) = ambient_jet(u, node);
        let hnorm = hess.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hood = neighbourhood(u, node);
        for _ in 0..jet_samples {
            for a in 0..n {
                let r = h.max(spread[a]);
                dg[a] = rng.random_range(-r..=r);
            }
            let lambda = rng.random_range(0.0..=(2.0 * hnorm + 2.0));
            for a in 0..n {
                for c in a..n {
                    let s = rng.random_range(-1.0..=1.0) * 0.5 * (hnorm + 1.0);
                    dh[a * n + c] = s;
                    dh[c * n + a] = s;
                }
                dh[a * n + a] += lambda;
            }
            for (sign, above) in [(1.0, true), (-1.0, false)] {
                for a in 0..n {
                    cand_d[a] = grad[a] + sign * dg[a];
                }
                for k in 0..n * n {
                    cand_h[k] = hess[k] + sign * dh[k];
                }
                let touches = hood.iter().all(|(q, off)| {
                    let mut phi = vals[node];
                    for a in 0..n {
                        phi += cand_d[a] * off[a];
                        for c in 0..n {
                            phi += 0.5 * off[a] * cand_h[a * n + c] * off[c];
                        }
                    }
                    if above {
                        phi >= vals[*q]
                    } else {
                        phi <= vals[*q]
                    }
                });
                if !touches {
                    continue;
                }
                let (p, mat) = horizontal_jet(spec, &x, &cand_d, &cand_h);
                let value = op.evaluate(&x, &p, &mat);
                if above {
                    report.tested_above += 1;
                    report.sub_violation[node] = report.sub_violation[node].max(value);
                } else {
                    report.tested_below += 1;
                    report.super_violation[node] = report.super_violation[node].max(-value);
                }
            }
        }
    }
    report
}

/// `sup_∂(u - v) - sup_Ω(u - v)`; nonnegative when the comparison
/// principle holds.
pub fn comparison_check(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    same_domain(u.domain(), v.domain())?;
    let d = u.domain();
    let diff = |i: usize| u.values()[i] - v.values()[i];
    let sup = |nodes: &[usize]| nodes.iter().map(|&i| diff(i)).fold(f64::NEG_INFINITY, f64::max);
    Ok(sup(d.boundary_nodes()) - sup(d.interior_nodes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmleReport {
    /// Largest `sup_D f(Xu) / max(sup_D f(Xw), floor)` over sampled boxes.
    pub worst_ratio: f64,
    /// Lattice corners of the box attaining `worst_ratio`.
    pub worst_box: Option<(Vec<usize>, Vec<usize>)>,
    pub tested: usize,
    pub skipped: usize,
}

const AMLE_FLOOR: f64 = 1e-12;

fn sup_density(u: &ScalarField, f: &Integrand) -> f64 {
    let g = horizontal_gradient(u);
    u.domain()
        .interior_nodes()
        .iter()
        .map(|&i| f.value(g.at(i)))
        .fold(0.0, f64::max)
}

/// Re-solves on random sub-boxes with boundary data `u` and compares the
/// sup of `f(Xu)` against the re-solved field.
pub fn amle_check(u: &ScalarField, f: &Integrand, trials: usize, config: &SolverConfig, seed: u64) -> Result<AmleReport> {
    let domain = u.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AmleReport {
        worst_ratio: 0.0,
        worst_box: None,
        tested: 0,
        skipped: 0,
    };
    let n = domain.dim();
    for _ in 0..trials {
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for a in 0..n {
            let s = domain.shape()[a];
            let len = rng.random_range(2..s);
            let start = rng.random_range(0..s - len);
            lo[a] = start;
            hi[a] = start + len;
        }
        let interior: usize = (0..n).map(|a| hi[a] - lo[a] - 1).product();
        if interior < 3 {
            report.skipped += 1;
            continue;
        }
        let Ok((sub, parent)) = domain.sub_box(&lo, &hi) else {
            report.skipped += 1;
            continue;
        };
        let sub = Arc::new(sub);
        let local = u.restrict(sub.clone(), &parent)?;
        let solved = infinity_solve(&BoundaryData::from_field(&local), f, config)?;
        let ratio = sup_density(&local, f) / sup_density(&solved.solution, f).max(AMLE_FLOOR);
        report.tested += 1;
        if ratio > report.worst_ratio || report.worst_box.is_none() {
            report.worst_ratio = report.worst_ratio.max(ratio);
            report.worst_box = Some((lo, hi));
        }
    }
    Ok(report)
}
