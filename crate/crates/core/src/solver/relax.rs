//! Nonlinear Gauss–Seidel: each free node is set to the exact minimizer of
//! the energy along its own coordinate.

use super::problem::{Problem, Stencil};

const LOCAL_TOL: f64 = 1e-14;

/// Root of the monotone map `dt ↦ ψ(dt)` with safeguarded Newton steps.
fn solve_node(problem: &Problem<'_>, st: &mut Stencil, hint: f64) -> f64 {
    let e0 = problem.local(st, 0.0);
    if e0.magnitude == 0.0 || e0.psi.abs() <= LOCAL_TOL * e0.magnitude {
        return 0.0;
    }
    let dir = if e0.psi > 0.0 { -1.0 } else { 1.0 };
    // Newton steps from nearly flat states can be huge; never start wider
    // than the grid-scale hint.
    let newton = (e0.psi / e0.slope).abs();
    let mut step = if e0.slope > 0.0 && newton > 0.0 && newton.is_finite() {
        newton.min(hint)
    } else {
        hint
    };
    // Expand until the sign of ψ flips.
    let mut near = 0.0;
    let mut far = f64::NAN;
    for _ in 0..200 {
        let t = near + dir * step;
        let e = problem.local(st, t);
        if e.magnitude > 0.0 && e.psi.abs() <= LOCAL_TOL * e.magnitude {
            return t;
        }
        if (e.psi > 0.0) != (e0.psi > 0.0) {
            far = t;
            break;
        }
        near = t;
        step *= 2.0;
    }
    if far.is_nan() {
        return near;
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    // ψ(lo) < 0 < ψ(hi).
    let mut t = if dir > 0.0 { lo } else { hi };
    let mut e = problem.local(st, t);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..200 {
        let newton_ok = e.slope > 0.0
            && ((t - hi) * e.slope - e.psi) * ((t - lo) * e.slope - e.psi) < 0.0
            && (2.0 * e.psi).abs() <= (dx_old * e.slope).abs();
        dx_old = dx;
        if newton_ok {
            dx = e.psi / e.slope;
            t -= dx;
        } else {
            dx = 0.5 * (hi - lo);
            t = lo + dx;
        }
        if dx.abs() <= 1e-16 * (1.0 + t.abs()) || hi - lo <= 1e-16 * (1.0 + t.abs()) {
            return t;
        }
        e = problem.local(st, t);
        if e.magnitude == 0.0 || e.psi.abs() <= LOCAL_TOL * e.magnitude {
            return t;
        }
        if e.psi < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
    }
    t
}

/// One symmetric sweep (forward then backward). Returns the largest update.
pub(crate) fn sweep(problem: &Problem<'_>, u: &mut [f64], hint: f64) -> f64 {
    let op = problem.op;
    let mut st = Stencil::new(op.m);
    let mut biggest: f64 = 0.0;
    let order = op.free.iter().chain(op.free.iter().rev());
    for &y in order {
        problem.load(y, u, &mut st);
        let dt = solve_node(problem, &mut st, hint);
        u[y] += dt;
        biggest = biggest.max(dt.abs());
    }
    biggest
}
