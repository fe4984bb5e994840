//! Truncated Newton: the exact sparse Hessian of `Ψ` over the free nodes,
//! Jacobi-preconditioned conjugate gradients for the step, and Armijo
//! backtracking.
//!
//! Jacobi scaling makes the inner solve invariant under the node-wise
//! scale disparities `(L / s)^{k-2}` that stall first-order methods at
//! large `k`.

use alloc::vec;
use alloc::vec::Vec;

use super::band::Band;
use super::corners::CornerOperator;
use super::problem::Problem;
use super::DescentParams;
use crate::fields::Integrand;
use crate::math;

const NONE: usize = usize::MAX;
/// Largest `nodes · bandwidth²` handled by the banded factorization;
/// beyond it the step comes from conjugate gradients.
const BAND_WORK: f64 = 2e9;
const PIVOT_FLOOR: f64 = 1e-13;

/// Sparsity pattern of the free-node Hessian.
pub(crate) struct Pattern {
    /// Half bandwidth in free-node order.
    bandwidth: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    /// `(n+1)²` CSR positions per corner, `NONE` where a vertex is pinned.
    corner_pos: Vec<usize>,
}

impl Pattern {
    pub fn new(op: &CornerOperator, len: usize) -> Self {
        let n = op.n;
        let nv = n + 1;
        let mut slot = vec![NONE; len];
        for (k, &y) in op.free.iter().enumerate() {
            slot[y] = k;
        }
        let nf = op.free.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nf];
        let mut verts = vec![0usize; nv];
        for c in 0..op.corners() {
            corner_vertices(op, c, &slot, &mut verts);
            for &a in &verts {
                if a == NONE {
                    continue;
                }
                for &b in &verts {
                    if b != NONE {
                        rows[a].push(b);
                    }
                }
            }
        }
        let mut row_start = Vec::with_capacity(nf + 1);
        let mut cols = Vec::new();
        row_start.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            row_start.push(cols.len());
        }
        let mut corner_pos = Vec::with_capacity(op.corners() * nv * nv);
        for c in 0..op.corners() {
            corner_vertices(op, c, &slot, &mut verts);
            for &a in &verts {
                for &b in &verts {
                    if a == NONE || b == NONE {
                        corner_pos.push(NONE);
                    } else {
                        let row = &cols[row_start[a]..row_start[a + 1]];
                        corner_pos.push(row_start[a] + row.binary_search(&b).expect("pattern covers corner"));
                    }
                }
            }
        }
        let bandwidth = (0..nf)
            .map(|r| cols[row_start[r]..row_start[r + 1]].iter().map(|&c| r.abs_diff(c)).max().unwrap_or(0))
            .max()
            .unwrap_or(0);
        Pattern {
            bandwidth,
            row_start,
            cols,
            corner_pos,
        }
    }
}

fn corner_vertices(op: &CornerOperator, c: usize, slot: &[usize], verts: &mut [usize]) {
    verts[0] = slot[op.base[c]];
    for j in 0..op.n {
        verts[j + 1] = slot[op.nbr[c * op.n + j]];
    }
}

/// `f_pp(g)(x, y)`.
fn second(f: &Integrand, g: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let xy = math::dot(x, y);
    match f {
        Integrand::SquaredNorm => 2.0 * xy,
        Integrand::Power(alpha) => {
            let gg = math::dot(g, g);
            if gg == 0.0 {
                return if *alpha == 2.0 { 2.0 * xy } else { 0.0 };
            }
            alpha * math::pow(gg, 0.5 * alpha - 1.0) * (xy + (alpha - 2.0) * math::dot(g, x) * math::dot(g, y) / gg)
        }
    }
}

/// Assembles the gradient (free nodes) and the Hessian values; returns `Ψ`.
fn assemble(problem: &Problem<'_>, pat: &Pattern, u: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
    let op = problem.op;
    let (n, m) = (op.n, op.m);
    let nv = n + 1;
    let k = problem.k as i32;
    let s = problem.scale;
    let mut full = vec![0.0; u.len()];
    let value = problem.gradient(u, &mut full);
    for (k, &y) in op.free.iter().enumerate() {
        grad[k] = full[y];
    }
    hess.iter_mut().for_each(|v| *v = 0.0);
    let mut g = vec![0.0; m];
    let mut fp = vec![0.0; m];
    // Columns of the local map `vertex values → g`.
    let mut cols = vec![0.0; nv * m];
    let mut dfp = vec![0.0; nv];
    for c in 0..op.corners() {
        op.gradient(c, u, &mut g);
        let r = problem.f.value(&g) / s;
        let rk2 = if k >= 2 { math::powi(r, k - 2) } else { 0.0 };
        let rk1 = math::powi(r, k - 1);
        if rk1 == 0.0 && rk2 == 0.0 {
            continue;
        }
        let cf = &op.coef[c * m * n..(c + 1) * m * n];
        for i in 0..m {
            let mut sum = 0.0;
            for j in 0..n {
                cols[(j + 1) * m + i] = cf[i * n + j];
                sum += cf[i * n + j];
            }
            cols[i] = -sum;
        }
        problem.f.gradient_into(&g, &mut fp);
        for a in 0..nv {
            dfp[a] = math::dot(&fp, &cols[a * m..(a + 1) * m]);
        }
        let pos = &pat.corner_pos[c * nv * nv..(c + 1) * nv * nv];
        let w = op.weight;
        for a in 0..nv {
            for b in 0..nv {
                let p = pos[a * nv + b];
                if p == NONE {
                    continue;
                }
                let mut v = rk1 * second(&problem.f, &g, &cols[a * m..(a + 1) * m], &cols[b * m..(b + 1) * m]) / s;
                if k >= 2 {
                    v += (k - 1) as f64 * rk2 * dfp[a] * dfp[b] / (s * s);
                }
                hess[p] += w * v;
            }
        }
    }
    value
}

fn matvec(pat: &Pattern, hess: &[f64], x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for p in pat.row_start[r]..pat.row_start[r + 1] {
            acc += hess[p] * x[pat.cols[p]];
        }
        *o = acc;
    }
}

/// Exact step from the banded factorization.
fn band_direction(pat: &Pattern, hess: &[f64], grad: &[f64], band: &mut Band, dir: &mut [f64]) {
    band.clear();
    for r in 0..grad.len() {
        for p in pat.row_start[r]..pat.row_start[r + 1] {
            let c = pat.cols[p];
            if c <= r {
                band.add_lower(r, c, hess[p]);
            }
        }
    }
    band.factor(PIVOT_FLOOR);
    for (d, g) in dir.iter_mut().zip(grad) {
        *d = -g;
    }
    band.solve(dir);
}

/// Approximately solves `H d = -g` by preconditioned CG.
fn newton_direction(pat: &Pattern, hess: &[f64], grad: &[f64], forcing: f64, max_cg: usize, dir: &mut [f64]) {
    let nf = grad.len();
    let mut inv = vec![0.0; nf];
    for (r, iv) in inv.iter_mut().enumerate() {
        let row = pat.row_start[r]..pat.row_start[r + 1];
        let d = row.clone().find(|&p| pat.cols[p] == r).map_or(0.0, |p| hess[p]);
        *iv = if d > 0.0 && d.is_finite() { 1.0 / d } else { 0.0 };
    }
    dir.iter_mut().for_each(|v| *v = 0.0);
    let mut res: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut z: Vec<f64> = res.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = math::dot(&res, &z);
    let target = forcing * forcing * rz;
    let mut hp = vec![0.0; nf];
    for _ in 0..max_cg {
        if !(rz > target) {
            break;
        }
        matvec(pat, hess, &p, &mut hp);
        let curv = math::dot(&p, &hp);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rz / curv;
        for i in 0..nf {
            dir[i] += alpha * p[i];
            res[i] -= alpha * hp[i];
        }
        for i in 0..nf {
            z[i] = res[i] * inv[i];
        }
        let rz_new = math::dot(&res, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..nf {
            p[i] = z[i] + beta * p[i];
        }
    }
}

pub(crate) struct Outcome {
    pub iterations: usize,
    pub stalled: bool,
}

/// Runs up to `budget` Newton iterations on the free nodes of `u`.
pub(crate) fn newton(
    problem: &Problem<'_>,
    pat: &Pattern,
    u: &mut [f64],
    params: &DescentParams,
    budget: usize,
    trace: &mut Vec<f64>,
) -> Outcome {
    let free = &problem.op.free;
    let nf = free.len();
    let mut grad = vec![0.0; nf];
    let mut hess = vec![0.0; pat.cols.len()];
    let mut dir = vec![0.0; nf];
    let mut full_dir = vec![0.0; u.len()];
    let mut iterations = 0;
    let max_cg = params.max_cg_iterations.max(1);
    let mut forcing: f64 = 0.5;
    let bw = pat.bandwidth;
    let mut band = (nf as f64 * (bw * bw) as f64 <= BAND_WORK).then(|| Band::zeros(nf, bw));
    while iterations < budget {
        let value = assemble(problem, pat, u, &mut grad, &mut hess);
        match band.as_mut() {
            Some(b) => band_direction(pat, &hess, &grad, b, &mut dir),
            None => newton_direction(pat, &hess, &grad, forcing, max_cg, &mut dir),
        }
        let mut slope = math::dot(&grad, &dir);
        if !(slope < 0.0) {
            // Fall back to the preconditioned gradient.
            for (r, d) in dir.iter_mut().enumerate() {
                let row = pat.row_start[r]..pat.row_start[r + 1];
                let h = row.clone().find(|&p| pat.cols[p] == r).map_or(0.0, |p| hess[p]);
                *d = if h > 0.0 { -grad[r] / h } else { -grad[r] };
            }
            slope = math::dot(&grad, &dir);
            if !(slope < 0.0) {
                return Outcome {
                    iterations,
                    stalled: true,
                };
            }
        }
        for (k, &y) in free.iter().enumerate() {
            full_dir[y] = dir[k];
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..params.max_backtracks {
            let delta = problem.change(u, &full_dir, step);
            if delta.is_finite() && delta <= params.armijo_c1 * step * slope {
                accepted = Some(delta);
                break;
            }
            step *= params.armijo_shrink;
        }
        let Some(delta) = accepted else {
            return Outcome {
                iterations,
                stalled: true,
            };
        };
        iterations += 1;
        for (k, &y) in free.iter().enumerate() {
            u[y] += step * dir[k];
        }
        trace.push(value + delta);
        if delta == 0.0 {
            return Outcome {
                iterations,
                stalled: true,
            };
        }
        if problem.residual(u) <= params.gradient_tolerance {
            break;
        }
        // Tighter inner solves once full steps are accepted.
        forcing = if step == 1.0 { (forcing * 0.1).max(1e-6) } else { 0.5 };
    }
    Outcome {
        iterations,
        stalled: false,
    }
}
