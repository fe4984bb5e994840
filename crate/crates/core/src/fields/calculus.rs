use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::field::{HorizontalField, ScalarField, SymMatrix, SymMatrixField};
use super::grid::{GridDomain, NodeKind};
use super::integrand::Integrand;

/// `X_i u = Σ_j a_ij(x) (u(x + h e_j) - u(x - h e_j)) / 2h` at interior nodes.
pub fn horizontal_gradient(u: &ScalarField) -> HorizontalField {
    let domain = u.domain().clone();
    let frame = domain.spec().horizontal_frame();
    let n = domain.dim();
    let vals = u.values();
    let inv = 0.5 / domain.h();
    let mut out = HorizontalField::zeros(domain.clone());
    let mut x = vec![0.0; n];
    let mut d = vec![0.0; n];
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        for (j, dj) in d.iter_mut().enumerate() {
            let s = domain.stride(j);
            *dj = (vals[node + s] - vals[node - s]) * inv;
        }
        frame.apply(&x, &d, out.at_mut(node));
    }
    out
}

/// Ambient first derivatives at every non-exterior node: centered where
/// both axis neighbours exist, one-sided otherwise.
fn ambient_derivatives(domain: &GridDomain, vals: &[f64]) -> Vec<f64> {
    let n = domain.dim();
    let h = domain.h();
    let mut out = vec![0.0; n * domain.len()];
    for node in domain.active_nodes() {
        for a in 0..n {
            let fwd = domain.active_neighbor(node, a, 1);
            let bwd = domain.active_neighbor(node, a, -1);
            out[node * n + a] = match (bwd, fwd) {
                (Some(b), Some(f)) => (vals[f] - vals[b]) / (2.0 * h),
                (None, Some(f)) => one_sided(domain, vals, node, f, a, 1),
                (Some(b), None) => one_sided(domain, vals, node, b, a, -1),
                (None, None) => 0.0,
            };
        }
    }
    out
}

fn one_sided(domain: &GridDomain, vals: &[f64], node: usize, next: usize, axis: usize, dir: isize) -> f64 {
    let h = domain.h();
    let sign = dir as f64;
    match domain.active_neighbor(node, axis, 2 * dir) {
        Some(far) => sign * (-3.0 * vals[node] + 4.0 * vals[next] - vals[far]) / (2.0 * h),
        None => sign * (vals[next] - vals[node]) / h,
    }
}

/// `(D²u)*_ij = ½(X_i X_j + X_j X_i) u` by nested frame-difference
/// applications.
pub fn horizontal_hessian(u: &ScalarField) -> SymMatrixField {
    let domain = u.domain().clone();
    let frame = domain.spec().horizontal_frame();
    let (n, m) = (domain.dim(), frame.fields());
    let d = ambient_derivatives(&domain, u.values());
    let mut w = vec![0.0; m * domain.len()];
    let mut x = vec![0.0; n];
    for node in domain.active_nodes() {
        domain.coords_into(node, &mut x);
        frame.apply(&x, &d[node * n..(node + 1) * n], &mut w[node * m..(node + 1) * m]);
    }
    let inv = 0.5 / domain.h();
    let mut out = SymMatrixField::zeros(domain.clone());
    let mut full = vec![0.0; m * m];
    let mut dw = vec![0.0; n];
    let mut xw = vec![0.0; m];
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        for j in 0..m {
            for (k, dk) in dw.iter_mut().enumerate() {
                *dk = outer_difference(&domain, &w, m, node, j, k, inv);
            }
            frame.apply(&x, &dw, &mut xw);
            for i in 0..m {
                full[i * m + j] = xw[i];
            }
        }
        out.set_matrix(node, &SymMatrix::from_full(m, &full));
    }
    out
}

/// Derivative of `w_j` along axis `k` at an interior node. Values of `w`
/// at boundary nodes carry one-sided errors of a different form, so next
/// to the band the difference uses interior nodes only when it can.
fn outer_difference(domain: &GridDomain, w: &[f64], m: usize, node: usize, j: usize, k: usize, inv: f64) -> f64 {
    let s = domain.stride(k);
    let at = |i: usize| w[i * m + j];
    let interior = |off: isize| {
        domain
            .neighbor(node, k, off)
            .filter(|&i| domain.kind(i) == NodeKind::Interior)
    };
    match (interior(-1), interior(1)) {
        (None, Some(f)) => {
            if let Some(ff) = interior(2) {
                return (-3.0 * at(node) + 4.0 * at(f) - at(ff)) * inv;
            }
        }
        (Some(b), None) => {
            if let Some(bb) = interior(-2) {
                return (3.0 * at(node) - 4.0 * at(b) + at(bb)) * inv;
            }
        }
        _ => {}
    }
    (at(node + s) - at(node - s)) * inv
}

fn contract(domain: &Arc<GridDomain>, mut weights: impl FnMut(usize, &mut [f64]) -> bool, hess: &SymMatrixField) -> (Vec<f64>, Vec<usize>) {
    let m = domain.spec().horizontal_dim();
    let mut values = vec![0.0; domain.len()];
    let mut flagged = Vec::new();
    let mut p = vec![0.0; m];
    for &node in domain.interior_nodes() {
        if !weights(node, &mut p) {
            flagged.push(node);
            continue;
        }
        values[node] = -hess.matrix(node).quadratic_form(&p);
    }
    (values, flagged)
}

/// `-Σ_ij X_i u X_j u (D²u)*_ij` at interior nodes, zero elsewhere.
pub fn infinity_laplacian(u: &ScalarField) -> ScalarField {
    let grad = horizontal_gradient(u);
    let hess = horizontal_hessian(u);
    let domain = u.domain();
    let (values, _) = contract(
        domain,
        |node, p| {
            p.copy_from_slice(grad.at(node));
            true
        },
        &hess,
    );
    ScalarField::from_values(domain.clone(), values).expect("finite input gives finite output")
}

/// Aronsson residual and the interior nodes where `f_pp` is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct AronssonResidual {
    /// `-Σ_ij f_{p_i}(Xu) f_{p_j}(Xu) (D²u)*_ij`; zero at flagged nodes.
    pub residual: ScalarField,
    pub singular: Vec<usize>,
}

pub fn aronsson_residual(u: &ScalarField, f: &Integrand) -> AronssonResidual {
    let grad = horizontal_gradient(u);
    let hess = horizontal_hessian(u);
    let domain = u.domain();
    let (values, singular) = contract(
        domain,
        |node, p| {
            let xu = grad.at(node);
            if f.is_singular(xu) {
                return false;
            }
            f.gradient_into(xu, p);
            true
        },
        &hess,
    );
    AronssonResidual {
        residual: ScalarField::from_values(domain.clone(), values).expect("finite input gives finite output"),
        singular,
    }
}

/// Exact discrete adjoint of [`horizontal_gradient`] for the unweighted
/// node inner product, evaluated at every non-exterior node.
pub fn adjoint_divergence(field: &HorizontalField) -> ScalarField {
    let domain = field.domain().clone();
    let frame = domain.spec().horizontal_frame();
    let (n, m) = (domain.dim(), frame.fields());
    let mut g = vec![0.0; n * domain.len()];
    let mut x = vec![0.0; n];
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        let fi = field.at(node);
        for j in 0..n {
            g[node * n + j] = (0..m).map(|i| frame.coefficient(i, j, &x) * fi[i]).sum();
        }
    }
    let inv = 0.5 / domain.h();
    let mut values = vec![0.0; domain.len()];
    for node in domain.active_nodes() {
        let mut s = 0.0;
        for j in 0..n {
            if let Some(b) = domain.neighbor(node, j, -1) {
                s += g[b * n + j];
            }
            if let Some(f) = domain.neighbor(node, j, 1) {
                s -= g[f * n + j];
            }
        }
        values[node] = s * inv;
    }
    ScalarField::from_values(domain, values).expect("finite input gives finite output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carnot::GroupSpec;

    fn heis() -> Arc<GridDomain> {
        Arc::new(GridDomain::new_box(GroupSpec::Heisenberg, &[-1.0; 3], &[1.0; 3], 0.25).unwrap())
    }

    #[test]
    fn heisenberg_t_has_rotational_gradient() {
        let d = heis();
        let u = ScalarField::from_fn(d.clone(), |x| x[2]).unwrap();
        let g = horizontal_gradient(&u);
        let hess = horizontal_hessian(&u);
        for &node in d.interior_nodes() {
            let x = d.coords(node);
            assert!((g.at(node)[0] + 2.0 * x[1]).abs() < 1e-12);
            assert!((g.at(node)[1] - 2.0 * x[0]).abs() < 1e-12);
            assert!(hess.matrix(node).max_abs() < 1e-10);
        }
        assert!(infinity_laplacian(&u).sup_norm() < 1e-10);
    }

    #[test]
    fn euclidean_quadratic_hessian() {
        let d = Arc::new(GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0; 2], &[1.0; 2], 0.125).unwrap());
        let u = ScalarField::from_fn(d.clone(), |x| x[0] * x[0] + 3.0 * x[0] * x[1]).unwrap();
        let hess = horizontal_hessian(&u);
        for &node in d.interior_nodes() {
            let m = hess.matrix(node);
            assert!((m.get(0, 0) - 2.0).abs() < 1e-10);
            assert!((m.get(0, 1) - 3.0).abs() < 1e-10);
            assert!(m.get(1, 1).abs() < 1e-10);
        }
    }
}
