//! Sup and inf convolutions with the gauge kernel `K(x, y) = d(x⁻¹, y⁻¹)^{2r!}`.
//!
//! With the right kernel `K(x, y) = ‖x·y⁻¹‖^{2r!}`, which is the default;
//! the left kernel uses `‖x⁻¹·y‖^{2r!}` instead. Both agree on abelian
//! groups.
//!
//! ```text
//! u^ε(x) = max_y  u(y) - K(x, y) / 2ε
//! v_ε(x) = min_y  v(y) + K(x, y) / 2ε
//! ```
//!
//! Maxima range over every non-exterior node of the domain.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::carnot::GroupSpec;
use crate::error::{invalid, Error, Result};
use crate::fields::{GridDomain, ScalarField};

/// Which translation-invariance the kernel has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelSide {
    /// `‖x⁻¹·y‖`: left-invariant.
    Left,
    /// `‖x·y⁻¹‖`: right-invariant.
    #[default]
    Right,
}

impl KernelSide {
    pub fn parse(id: &str) -> Result<Self> {
        match id.trim() {
            "left" => Ok(KernelSide::Left),
            "right" => Ok(KernelSide::Right),
            other => Err(invalid("kernel", alloc::format!("`{other}` is not `left` or `right`"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            KernelSide::Left => "left",
            KernelSide::Right => "right",
        }
    }
}

/// Kernel on raw coordinates; `buf` has the ambient dimension.
fn kernel_raw(spec: GroupSpec, side: KernelSide, x: &[f64], y: &[f64], buf: &mut [f64]) -> f64 {
    match spec {
        GroupSpec::Heisenberg => {
            let cross = 2.0 * (x[0] * y[1] - x[1] * y[0]);
            let (dx, dy) = match side {
                KernelSide::Right => (x[0] - y[0], x[1] - y[1]),
                KernelSide::Left => (y[0] - x[0], y[1] - x[1]),
            };
            let dt = match side {
                KernelSide::Right => x[2] - y[2] + cross,
                KernelSide::Left => y[2] - x[2] + cross,
            };
            let horizontal = dx * dx + dy * dy;
            horizontal * horizontal + dt * dt
        }
        _ => {
            for ((b, a), c) in buf.iter_mut().zip(x).zip(y) {
                *b = a - c;
            }
            spec.gauge_power_raw(buf)
        }
    }
}

/// `d(x⁻¹, y⁻¹)^{2r!}` for the chosen side.
pub fn kernel(spec: GroupSpec, side: KernelSide, x: &[f64], y: &[f64]) -> Result<f64> {
    if !spec.is_group() {
        return Err(Error::UnsupportedGeometry("grushin"));
    }
    let n = spec.total_dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len().min(y.len()),
        });
    }
    let mut buf = vec![0.0; n];
    Ok(kernel_raw(spec, side, x, y, &mut buf))
}

fn require_group(domain: &GridDomain) -> Result<()> {
    if domain.spec().is_group() {
        Ok(())
    } else {
        Err(Error::UnsupportedGeometry("grushin"))
    }
}

fn active_coords(domain: &GridDomain) -> (Vec<usize>, Vec<f64>) {
    let n = domain.dim();
    let nodes: Vec<usize> = domain.active_nodes().collect();
    let mut coords = vec![0.0; n * nodes.len()];
    for (k, &node) in nodes.iter().enumerate() {
        domain.coords_into(node, &mut coords[k * n..(k + 1) * n]);
    }
    (nodes, coords)
}

/// Interior nodes whose kernel distance to every boundary node is at least
/// `eps`. The boundary band stands in for the complement of the domain.
pub fn shrink_domain(domain: &GridDomain, eps: f64, side: KernelSide) -> Result<Vec<usize>> {
    require_group(domain)?;
    if !(eps >= 0.0) {
        return Err(invalid("eps", "must be nonnegative"));
    }
    let n = domain.dim();
    let spec = domain.spec();
    let boundary: Vec<Vec<f64>> = domain.boundary_nodes().iter().map(|&b| domain.coords(b)).collect();
    let mut x = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut out = Vec::new();
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        if boundary
            .iter()
            .all(|y| kernel_raw(spec, side, &x, y, &mut buf) >= eps)
        {
            out.push(node);
        }
    }
    Ok(out)
}

/// Result of a sup or inf convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionReport {
    pub output: ScalarField,
    pub epsilon: f64,
    /// Attaining node per lattice node; `None` at exterior nodes.
    pub argmax: Vec<Option<usize>>,
    /// `2 ‖u‖_∞`.
    pub r0: f64,
    /// Interior nodes of `Ω_{(1+4R₀)ε}`.
    pub shrunken: Vec<usize>,
    pub side: KernelSide,
}

pub fn sup_convolution(u: &ScalarField, eps: f64, side: KernelSide) -> Result<ConvolutionReport> {
    let domain = u.domain().clone();
    require_group(&domain)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid("eps", "must be positive and finite"));
    }
    let spec = domain.spec();
    let n = domain.dim();
    let vals = u.values();
    let top = u.max_value();
    let (nodes, coords) = active_coords(&domain);
    let inv = 1.0 / (2.0 * eps);
    let mut out = vec![0.0; domain.len()];
    let mut argmax = vec![None; domain.len()];
    let mut buf = vec![0.0; n];
    for (kx, &x) in nodes.iter().enumerate() {
        let xc = &coords[kx * n..(kx + 1) * n];
        // Only kernels below 2ε(max u - u(x)) can beat y = x.
        let reach = 2.0 * eps * (top - vals[x]);
        let mut best = f64::NEG_INFINITY;
        let mut at = x;
        for (ky, &y) in nodes.iter().enumerate() {
            let k = kernel_raw(spec, side, xc, &coords[ky * n..(ky + 1) * n], &mut buf);
            if k > reach {
                continue;
            }
            let cand = vals[y] - k * inv;
            if cand > best {
                best = cand;
                at = y;
            }
        }
        out[x] = best;
        argmax[x] = Some(at);
    }
    let r0 = 2.0 * u.sup_norm();
    let shrunken = shrink_domain(&domain, (1.0 + 4.0 * r0) * eps, side)?;
    Ok(ConvolutionReport {
        output: ScalarField::from_values(domain, out)?,
        epsilon: eps,
        argmax,
        r0,
        shrunken,
        side,
    })
}

/// `v_ε = -(-v)^ε`, with the same attaining nodes.
pub fn inf_convolution(v: &ScalarField, eps: f64, side: KernelSide) -> Result<ConvolutionReport> {
    let neg = v.map(|a| -a)?;
    let mut report = sup_convolution(&neg, eps, side)?;
    report.output = report.output.map(|a| -a)?;
    Ok(report)
}

/// Most negative centered second difference `Δ²_a u / h²` over interior
/// nodes and axes; `0` when every second difference is nonnegative.
pub fn semiconvexity_modulus(u: &ScalarField) -> f64 {
    let domain = u.domain();
    let vals = u.values();
    let h2 = domain.h() * domain.h();
    let mut worst: f64 = 0.0;
    for &node in domain.interior_nodes() {
        for a in 0..domain.dim() {
            let s = domain.stride(a);
            let d2 = (vals[node + s] - 2.0 * vals[node] + vals[node - s]) / h2;
            worst = worst.min(d2);
        }
    }
    worst
}

/// `C_d`: largest centered second difference of `K(·, y)` over interior
/// nodes, axes and non-exterior `y`.
pub fn kernel_curvature(domain: &Arc<GridDomain>, side: KernelSide) -> Result<f64> {
    require_group(domain)?;
    let spec = domain.spec();
    let n = domain.dim();
    let h = domain.h();
    let (nodes, coords) = active_coords(domain);
    let mut buf = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut xp = vec![0.0; n];
    let mut xm = vec![0.0; n];
    let mut best: f64 = 0.0;
    for &node in domain.interior_nodes() {
        domain.coords_into(node, &mut x);
        for a in 0..n {
            xp.copy_from_slice(&x);
            xm.copy_from_slice(&x);
            xp[a] += h;
            xm[a] -= h;
            for ky in 0..nodes.len() {
                let y = &coords[ky * n..(ky + 1) * n];
                let d2 = kernel_raw(spec, side, &xp, y, &mut buf) - 2.0 * kernel_raw(spec, side, &x, y, &mut buf)
                    + kernel_raw(spec, side, &xm, y, &mut buf);
                best = best.max(d2 / (h * h));
            }
        }
    }
    Ok(best)
}
