//! Limited-memory BFGS with a Jacobi initial inverse Hessian and Armijo
//! backtracking, over the free nodes.
//!
//! The sufficient-decrease test uses [`Problem::change`], which resolves
//! decreases far below the rounding unit of the energy itself.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::problem::Problem;
use super::DescentParams;
use crate::math;

pub(crate) struct Outcome {
    pub iterations: usize,
    pub stalled: bool,
}

fn precondition(diag: &[f64], free: &[usize], g: &[f64], out: &mut [f64]) {
    for (k, &y) in free.iter().enumerate() {
        let d = diag[y];
        out[k] = if d > 0.0 && d.is_finite() { g[k] / d } else { g[k] };
    }
}

pub(crate) fn lbfgs(
    problem: &Problem<'_>,
    u: &mut [f64],
    params: &DescentParams,
    budget: usize,
    trace: &mut Vec<f64>,
) -> Outcome {
    let free = &problem.op.free;
    let nf = free.len();
    let len = u.len();
    let mut full = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut value = problem.gradient(u, &mut full);
    let mut g: Vec<f64> = free.iter().map(|&y| full[y]).collect();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut dir = vec![0.0; nf];
    let mut full_dir = vec![0.0; len];
    let mut alpha = vec![0.0; params.memory.max(1)];
    let mut iterations = 0;
    let stalled = |iterations| Outcome {
        iterations,
        stalled: true,
    };
    while iterations < budget {
        problem.diagonal(u, &mut diag);
        // Two-loop recursion.
        dir.copy_from_slice(&g);
        for (idx, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * math::dot(s, &dir);
            alpha[idx] = a;
            axpy(-a, y, &mut dir);
        }
        let tmp = dir.clone();
        precondition(&diag, free, &tmp, &mut dir);
        for (idx, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * math::dot(y, &dir);
            axpy(alpha[idx] - b, s, &mut dir);
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = math::dot(&g, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            precondition(&diag, free, &g, &mut dir);
            dir.iter_mut().for_each(|d| *d = -*d);
            slope = math::dot(&g, &dir);
            if !(slope < 0.0) {
                return stalled(iterations);
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
            return stalled(iterations);
        };
        iterations += 1;
        for (k, &y) in free.iter().enumerate() {
            u[y] += step * dir[k];
        }
        problem.gradient(u, &mut full);
        let g_new: Vec<f64> = free.iter().map(|&y| full[y]).collect();
        let s: Vec<f64> = dir.iter().map(|d| step * d).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = math::dot(&s, &yv);
        if sy > 0.0 {
            if pairs.len() == params.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, yv, 1.0 / sy));
        }
        g = g_new;
        value += delta;
        trace.push(value);
        if delta == 0.0 {
            return stalled(iterations);
        }
        if problem.residual(u) <= params.gradient_tolerance {
            break;
        }
    }
    Outcome {
        iterations,
        stalled: false,
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
