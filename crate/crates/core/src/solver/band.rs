//! Banded `LDLᵀ` for the Newton system.
//!
//! Symmetric positive definite factorizations are accurate relative to the
//! diagonally scaled condition number, so the step stays meaningful at
//! nodes whose entries are many orders of magnitude below the largest.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) struct Band {
    n: usize,
    bw: usize,
    /// Row `i` holds columns `i - bw ..= i`.
    a: Vec<f64>,
}

impl Band {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Band {
            n,
            bw,
            a: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    pub fn clear(&mut self) {
        self.a.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(i, j)` with `j ≤ i`.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        let p = self.at(i, j);
        self.a[p] += v;
    }

    /// Factors in place. Pivots below `rel · A_ii` (including empty rows)
    /// are replaced by `max(A_ii, tiny)`, which leaves rows without
    /// curvature out of the step.
    pub fn factor(&mut self, rel: f64) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut dl = vec![0.0; w];
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let orig = self.a[self.at(i, i)];
            for j in start..i {
                let kstart = start.max(j.saturating_sub(bw));
                let mut sum = self.a[self.at(i, j)];
                for k in kstart..j {
                    sum -= self.a[self.at(i, k)] * self.a[self.at(k, k)] * self.a[self.at(j, k)];
                }
                let dj = self.a[self.at(j, j)];
                let p = self.at(i, j);
                self.a[p] = sum / dj;
                dl[j - start] = self.a[p];
            }
            let mut d = orig;
            for j in start..i {
                let l = dl[j - start];
                d -= l * l * self.a[self.at(j, j)];
            }
            if !(d > rel * orig) || !d.is_finite() {
                d = if orig > 0.0 && orig.is_finite() { orig } else { 1.0 };
            }
            let p = self.at(i, i);
            self.a[p] = d;
        }
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().take(i).skip(start) {
                s -= self.a[self.at(i, j)] * xj;
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.a[self.at(i, i)];
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().take(end).skip(i + 1) {
                s -= self.a[self.at(j, i)] * xj;
            }
            x[i] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 6;
        let mut b = Band::zeros(n, 1);
        for i in 0..n {
            b.add_lower(i, i, 2.0);
            if i > 0 {
                b.add_lower(i, i - 1, -1.0);
            }
        }
        b.factor(1e-14);
        // A x = e_0 + e_5 has solution x = 1.
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        x[n - 1] = 1.0;
        b.solve(&mut x);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn graded_scales_stay_accurate() {
        // diag(1, 1e-60) coupled weakly.
        let mut b = Band::zeros(2, 1);
        b.add_lower(0, 0, 1.0);
        b.add_lower(1, 1, 1e-60);
        b.add_lower(1, 0, 1e-31);
        b.factor(1e-14);
        let mut x = vec![1.0, 1e-60];
        b.solve(&mut x);
        // Exact: [1 c; c d] x = [1, d] with c = 1e-31, d = 1e-60.
        let (c, d) = (1e-31, 1e-60);
        let det = d - c * c;
        let x0 = (d - c * d) / det;
        let x1 = (d - c) / det;
        assert!((x[0] - x0).abs() < 1e-12 * x0.abs());
        assert!((x[1] - x1).abs() < 1e-12 * x1.abs());
    }
}
