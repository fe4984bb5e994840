//! Normalized objective for one `(f, k, ε, side)` level.
//!
//! With a reference scale `s > 0` fixed per run,
//!
//! ```text
//! Ψ(u) = Σ_c w (f_c / s)^k / k  -  σ (ε / s)^{k-1} V Σ_y u_y / (k s)
//! ```
//!
//! equals `(Σ w f^k ∓ ε^{k-1} V Σ u) / (k s^k)`, where `σ = +1` on the lower
//! side and `-1` on the upper side. Node-local quantities use their own
//! scale `L = max(f_c, ε)` over the incident corners instead.

use alloc::vec;
use alloc::vec::Vec;

use super::corners::CornerOperator;
use crate::fields::Integrand;
use crate::math;

pub(crate) struct Problem<'a> {
    pub op: &'a CornerOperator,
    pub f: Integrand,
    pub k: u32,
    pub eps: f64,
    /// `+1` lower, `-1` upper, `0` without source.
    pub sign: f64,
    pub scale: f64,
    /// Grid-scale displacement used by [`Problem::residual`].
    pub length: f64,
}

/// `aᵀ f_pp(g) a`.
#[inline]
fn curvature(f: &Integrand, g: &[f64], a: &[f64]) -> f64 {
    let aa: f64 = a.iter().map(|v| v * v).sum();
    match f {
        Integrand::SquaredNorm => 2.0 * aa,
        Integrand::Power(alpha) => {
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg == 0.0 {
                return if *alpha == 2.0 { 2.0 * aa } else { 0.0 };
            }
            let ga = math::dot(g, a);
            alpha * math::pow(gg, 0.5 * alpha - 1.0) * (aa + (alpha - 2.0) * ga * ga / gg)
        }
    }
}

/// Per-node evaluation: derivative `ψ`, its slope, and the sum of absolute
/// terms, all in local scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalEval {
    pub psi: f64,
    pub slope: f64,
    pub magnitude: f64,
}

/// Cached corner gradients around one node.
pub(crate) struct Stencil {
    g0: Vec<f64>,
    a: Vec<f64>,
    vals: Vec<f64>,
    g: Vec<f64>,
    fp: Vec<f64>,
    count: usize,
}

impl Stencil {
    pub fn new(m: usize) -> Self {
        Stencil {
            g0: Vec::new(),
            a: Vec::new(),
            vals: Vec::new(),
            g: vec![0.0; m],
            fp: vec![0.0; m],
            count: 0,
        }
    }
}

impl Problem<'_> {
    pub fn has_source(&self) -> bool {
        self.sign != 0.0 && self.eps > 0.0
    }

    fn source_ratio(&self, scale: f64) -> f64 {
        if self.has_source() {
            math::powi(self.eps / scale, self.k as i32 - 1)
        } else {
            0.0
        }
    }

    /// `Ψ(u)`; `+∞` when a power overflows.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let (op, k) = (self.op, self.k as i32);
        let mut g = vec![0.0; op.m];
        let mut total = 0.0;
        for c in 0..op.corners() {
            op.gradient(c, u, &mut g);
            total += op.weight * math::powi(self.f.value(&g) / self.scale, k);
        }
        total /= self.k as f64;
        if self.has_source() {
            let sum: f64 = op.free.iter().map(|&y| u[y]).sum();
            total -= self.sign * self.source_ratio(self.scale) * op.volume * sum / (self.k as f64 * self.scale);
        }
        total
    }

    /// `Ψ(u)` and its gradient over the lattice (zero off free nodes).
    pub fn gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let op = self.op;
        let (n, m, k) = (op.n, op.m, self.k as i32);
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; m];
        let mut fp = vec![0.0; m];
        let mut total = 0.0;
        for c in 0..op.corners() {
            op.gradient(c, u, &mut g);
            let r = self.f.value(&g) / self.scale;
            let rk1 = math::powi(r, k - 1);
            total += op.weight * r * rk1;
            if rk1 == 0.0 {
                continue;
            }
            self.f.gradient_into(&g, &mut fp);
            let phi = op.weight * rk1 / self.scale;
            let cf = &op.coef[c * m * n..(c + 1) * m * n];
            let base = op.base[c];
            for j in 0..n {
                let t: f64 = phi * (0..m).map(|i| fp[i] * cf[i * n + j]).sum::<f64>();
                grad[op.nbr[c * n + j]] += t;
                grad[base] -= t;
            }
        }
        total /= self.k as f64;
        if self.has_source() {
            let src = self.sign * self.source_ratio(self.scale) * op.volume / (self.k as f64 * self.scale);
            let mut sum = 0.0;
            for &y in &op.free {
                grad[y] -= src;
                sum += u[y];
            }
            total -= src * sum;
        }
        total
    }

    /// `Ψ(u + t d) - Ψ(u)` for `d` supported on free nodes, evaluated corner
    /// by corner from the exact change of `|g|²`, so that decreases far
    /// below the rounding unit of `Ψ` itself stay resolvable.
    pub fn change(&self, u: &[f64], d: &[f64], t: f64) -> f64 {
        let op = self.op;
        let k = self.k as f64;
        let half_alpha = match self.f {
            Integrand::SquaredNorm => 1.0,
            Integrand::Power(alpha) => 0.5 * alpha,
        };
        let mut g = vec![0.0; op.m];
        let mut dg = vec![0.0; op.m];
        let mut total = 0.0;
        for c in 0..op.corners() {
            op.gradient(c, d, &mut dg);
            if dg.iter().all(|&v| v == 0.0) {
                continue;
            }
            op.gradient(c, u, &mut g);
            let q0 = math::dot(&g, &g);
            let dq = t * (2.0 * math::dot(&g, &dg) + t * math::dot(&dg, &dg));
            let delta = if q0 > 0.0 {
                let r0 = math::pow(q0, half_alpha) / self.scale;
                math::powi(r0, self.k as i32) * math::expm1(k * half_alpha * math::ln_1p(dq / q0))
            } else {
                math::powi(math::pow(dq, half_alpha) / self.scale, self.k as i32)
            };
            total += op.weight * delta / k;
        }
        if self.has_source() {
            let sum: f64 = op.free.iter().map(|&y| d[y]).sum();
            total -= self.sign * self.source_ratio(self.scale) * op.volume * t * sum / (k * self.scale);
        }
        total
    }

    /// Diagonal of the Hessian of `Ψ` at free nodes.
    pub fn diagonal(&self, u: &[f64], diag: &mut [f64]) {
        let op = self.op;
        let (m, k) = (op.m, self.k as i32);
        let mut g = vec![0.0; m];
        let mut fp = vec![0.0; m];
        let s = self.scale;
        for &y in &op.free {
            let mut d = 0.0;
            for slot in op.inc_start[y]..op.inc_start[y + 1] {
                let c = op.inc_corner[slot];
                let a = &op.inc_vec[slot * m..(slot + 1) * m];
                op.gradient(c, u, &mut g);
                let r = self.f.value(&g) / s;
                self.f.gradient_into(&g, &mut fp);
                let fa = math::dot(&fp, a);
                let mut term = math::powi(r, k - 1) * curvature(&self.f, &g, a) / s;
                if k > 1 {
                    term += (k - 1) as f64 * math::powi(r, k - 2) * fa * fa / (s * s);
                }
                d += op.weight * term;
            }
            diag[y] = d;
        }
    }

    /// Loads the incident corner gradients of node `y` at the current `u`.
    pub fn load(&self, y: usize, u: &[f64], st: &mut Stencil) {
        let op = self.op;
        let m = op.m;
        let range = op.inc_start[y]..op.inc_start[y + 1];
        st.count = range.len();
        st.g0.clear();
        st.a.clear();
        st.vals.resize(st.count, 0.0);
        for slot in range {
            op.gradient(op.inc_corner[slot], u, &mut st.g);
            st.g0.extend_from_slice(&st.g);
            st.a.extend_from_slice(&op.inc_vec[slot * m..(slot + 1) * m]);
        }
    }

    /// Local derivative of the energy along node `y` after shifting its
    /// value by `dt` from the loaded state.
    pub fn local(&self, st: &mut Stencil, dt: f64) -> LocalEval {
        let m = self.op.m;
        let k = self.k as i32;
        let w = self.op.weight;
        let mut scale = if self.has_source() { self.eps } else { 0.0 };
        for c in 0..st.count {
            for i in 0..m {
                st.g[i] = st.g0[c * m + i] + dt * st.a[c * m + i];
            }
            let v = self.f.value(&st.g);
            st.vals[c] = v;
            scale = scale.max(v);
        }
        if scale == 0.0 {
            return LocalEval {
                psi: 0.0,
                slope: 0.0,
                magnitude: 0.0,
            };
        }
        let (mut psi, mut slope, mut magnitude) = (0.0, 0.0, 0.0);
        for c in 0..st.count {
            let r = st.vals[c] / scale;
            let rk1 = math::powi(r, k - 1);
            let a = &st.a[c * m..(c + 1) * m];
            for i in 0..m {
                st.g[i] = st.g0[c * m + i] + dt * a[i];
            }
            self.f.gradient_into(&st.g, &mut st.fp);
            let fa = math::dot(&st.fp, a);
            psi += w * rk1 * fa;
            magnitude += w * rk1 * fa.abs();
            let mut sl = rk1 * curvature(&self.f, &st.g, a);
            if k > 1 {
                sl += (k - 1) as f64 * math::powi(r, k - 2) * fa * fa / scale;
            }
            slope += w * sl;
        }
        if self.has_source() {
            let src = self.source_ratio(scale) * self.op.volume / self.k as f64;
            psi -= self.sign * src;
            magnitude += src;
        }
        LocalEval {
            psi,
            slope,
            magnitude,
        }
    }

    /// Largest relative Euler–Lagrange residual over free nodes. At each
    /// node `|ψ|` is compared with `Σ|terms|` in the node's own scale plus
    /// the change of `ψ` over the displacement `length`; nodes whose terms
    /// all vanish at the minimizer are thereby measured by their distance
    /// to it.
    pub fn residual(&self, u: &[f64]) -> f64 {
        let mut st = Stencil::new(self.op.m);
        let mut worst: f64 = 0.0;
        for &y in &self.op.free {
            self.load(y, u, &mut st);
            let e = self.local(&mut st, 0.0);
            let denom = e.magnitude + e.slope * self.length;
            if denom > 0.0 {
                worst = worst.max(e.psi.abs() / denom);
            }
        }
        worst
    }
}
