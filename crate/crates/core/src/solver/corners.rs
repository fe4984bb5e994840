//! Cell-corner discretization of `Σ f(Xu)^k`.
//!
//! Every cell whose `2^n` vertices are non-exterior contributes one
//! horizontal gradient per vertex `v`, built from one-sided differences
//! pointing into the cell:
//!
//! ```text
//! g_i = Σ_j a_ij(v) σ_j (u(v + σ_j e_j) - u(v)) / h
//! ```
//!
//! each with quadrature weight `h^n / 2^n`. Unlike centered differences,
//! this couples every node to all its axis neighbours, so the energy has
//! no checkerboard null space.

use alloc::vec;
use alloc::vec::Vec;

use crate::fields::{GridDomain, Integrand, NodeKind};
use crate::math;

pub(crate) struct CornerOperator {
    pub n: usize,
    pub m: usize,
    pub weight: f64,
    pub volume: f64,
    /// Base vertex per corner.
    pub base: Vec<usize>,
    /// `n` neighbours per corner.
    pub nbr: Vec<usize>,
    /// `m × n` coefficients `a_ij(v) σ_j / h` per corner.
    pub coef: Vec<f64>,
    /// Incidence of free nodes: corner ids and `∂g_c / ∂u_y` (`m` each).
    pub inc_start: Vec<usize>,
    pub inc_corner: Vec<usize>,
    pub inc_vec: Vec<f64>,
    /// Interior nodes in increasing order.
    pub free: Vec<usize>,
}

impl CornerOperator {
    pub fn new(domain: &GridDomain) -> Self {
        let n = domain.dim();
        let frame = domain.spec().horizontal_frame();
        let m = frame.fields();
        let h = domain.h();
        let shape = domain.shape();
        let mut base = Vec::new();
        let mut nbr = Vec::new();
        let mut coef = Vec::new();
        let mut x = vec![0.0; n];
        let cell_shape: Vec<usize> = shape.iter().map(|s| s - 1).collect();
        let cells: usize = cell_shape.iter().product();
        let mut cidx = vec![0usize; n];
        let mut verts = vec![0usize; 1 << n];
        for _ in 0..cells {
            let origin = domain.linear_index(&cidx);
            let mut ok = true;
            for (mask, vert) in verts.iter_mut().enumerate() {
                let mut node = origin;
                for a in 0..n {
                    if mask >> a & 1 == 1 {
                        node += domain.stride(a);
                    }
                }
                *vert = node;
                ok &= domain.kind(node) != NodeKind::Exterior;
            }
            if ok {
                for (mask, &v) in verts.iter().enumerate() {
                    domain.coords_into(v, &mut x);
                    base.push(v);
                    for a in 0..n {
                        nbr.push(verts[mask ^ (1 << a)]);
                    }
                    for i in 0..m {
                        for j in 0..n {
                            let sigma = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                            coef.push(frame.coefficient(i, j, &x) * sigma / h);
                        }
                    }
                }
            }
            crate::fields::increment(&mut cidx, &cell_shape);
        }
        let corners = base.len();
        let free: Vec<usize> = domain.interior_nodes().to_vec();
        let mut is_free = vec![false; domain.len()];
        for &y in &free {
            is_free[y] = true;
        }
        // Incidence lists.
        let mut count = vec![0usize; domain.len() + 1];
        for c in 0..corners {
            if is_free[base[c]] {
                count[base[c]] += 1;
            }
            for j in 0..n {
                let y = nbr[c * n + j];
                if is_free[y] {
                    count[y] += 1;
                }
            }
        }
        let mut inc_start = vec![0usize; domain.len() + 1];
        for y in 0..domain.len() {
            inc_start[y + 1] = inc_start[y] + count[y];
        }
        let total = inc_start[domain.len()];
        let mut fill = inc_start.clone();
        let mut inc_corner = vec![0usize; total];
        let mut inc_vec = vec![0.0; total * m];
        for c in 0..corners {
            let cf = &coef[c * m * n..(c + 1) * m * n];
            let b = base[c];
            if is_free[b] {
                let slot = fill[b];
                fill[b] += 1;
                inc_corner[slot] = c;
                for i in 0..m {
                    inc_vec[slot * m + i] = -(0..n).map(|j| cf[i * n + j]).sum::<f64>();
                }
            }
            for j in 0..n {
                let y = nbr[c * n + j];
                if is_free[y] {
                    let slot = fill[y];
                    fill[y] += 1;
                    inc_corner[slot] = c;
                    for i in 0..m {
                        inc_vec[slot * m + i] = cf[i * n + j];
                    }
                }
            }
        }
        CornerOperator {
            n,
            m,
            weight: domain.cell_volume() / (1u64 << n) as f64,
            volume: domain.cell_volume(),
            base,
            nbr,
            coef,
            inc_start,
            inc_corner,
            inc_vec,
            free,
        }
    }

    pub fn corners(&self) -> usize {
        self.base.len()
    }

    /// Horizontal gradient of corner `c` into `g`.
    #[inline]
    pub fn gradient(&self, c: usize, u: &[f64], g: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let ub = u[self.base[c]];
        let cf = &self.coef[c * m * n..(c + 1) * m * n];
        let nb = &self.nbr[c * n..(c + 1) * n];
        for (i, gi) in g.iter_mut().enumerate().take(m) {
            let mut s = 0.0;
            for j in 0..n {
                s += cf[i * n + j] * (u[nb[j]] - ub);
            }
            *gi = s;
        }
    }

    /// Largest corner value of `f(g_c)`.
    pub fn max_density(&self, u: &[f64], f: &Integrand) -> f64 {
        let mut g = vec![0.0; self.m];
        let mut best: f64 = 0.0;
        for c in 0..self.corners() {
            self.gradient(c, u, &mut g);
            best = best.max(f.value(&g));
        }
        best
    }

    /// `Σ_c w f(g_c)^k`, via logarithms when `f > 1e3`; `+∞` on overflow.
    pub fn gradient_energy(&self, u: &[f64], f: &Integrand, k: u32) -> f64 {
        let mut g = vec![0.0; self.m];
        let mut total = 0.0;
        for c in 0..self.corners() {
            self.gradient(c, u, &mut g);
            let v = f.value(&g);
            let p = if v > 1e3 {
                let l = k as f64 * math::ln(v);
                if l > 709.0 {
                    return f64::INFINITY;
                }
                math::exp(l)
            } else {
                math::powi(v, k as i32)
            };
            total += self.weight * p;
        }
        total
    }
}
