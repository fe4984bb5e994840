//! Group law, gauge norm and horizontal frames of the built-in geometries.
//!
//! Points are written in exponential coordinates with first-layer
//! coordinates first. On the Heisenberg group `H¹` a point is `(x, y, t)`
//! with
//!
//! ```text
//! (x, y, t) · (x', y', t') = (x + x', y + y', t + t' + 2(x'y - xy'))
//! X₁ = ∂x - 2y ∂t,   X₂ = ∂y + 2x ∂t
//! ```
//!
//! The Grushin plane carries the frame `X₁ = ∂x`, `X₂ = x ∂y` and has no
//! group law; group operations on it return [`Error::UnsupportedGeometry`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

/// One of the supported Carnot–Carathéodory geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupSpec {
    /// `R^n` with the coordinate frame.
    Euclidean(usize),
    /// The first Heisenberg group `H¹` in coordinates `(x, y, t)`.
    Heisenberg,
    /// The Grushin plane `(x, y)`; not a group.
    Grushin,
}

impl GroupSpec {
    /// Parses `euclidean:<n>`, `heisenberg1` or `grushin`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        match id {
            "heisenberg1" => Ok(GroupSpec::Heisenberg),
            "grushin" => Ok(GroupSpec::Grushin),
            _ => id
                .strip_prefix("euclidean:")
                .and_then(|n| n.trim().parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(GroupSpec::Euclidean)
                .ok_or_else(|| Error::InvalidGeometryId(id.into())),
        }
    }

    pub fn step(&self) -> usize {
        match self {
            GroupSpec::Euclidean(_) => 1,
            GroupSpec::Heisenberg | GroupSpec::Grushin => 2,
        }
    }

    /// Layer dimensions `m_1, ..., m_r`. For Grushin these describe the
    /// bracket structure on the singular line `x = 0`.
    pub fn layer_dims(&self) -> Vec<usize> {
        match self {
            GroupSpec::Euclidean(n) => vec![*n],
            GroupSpec::Heisenberg => vec![2, 1],
            GroupSpec::Grushin => vec![1, 1],
        }
    }

    /// Number of horizontal vector fields `m`.
    pub fn horizontal_dim(&self) -> usize {
        match self {
            GroupSpec::Euclidean(n) => *n,
            GroupSpec::Heisenberg | GroupSpec::Grushin => 2,
        }
    }

    pub fn total_dim(&self) -> usize {
        match self {
            GroupSpec::Euclidean(n) => *n,
            GroupSpec::Heisenberg => 3,
            GroupSpec::Grushin => 2,
        }
    }

    /// `2·r!`: 2 for step 1, 4 for step 2.
    pub fn gauge_exponent(&self) -> u32 {
        2 * factorial(self.step()) as u32
    }

    pub fn is_group(&self) -> bool {
        !matches!(self, GroupSpec::Grushin)
    }

    fn require_group(&self) -> Result<()> {
        if self.is_group() {
            Ok(())
        } else {
            Err(Error::UnsupportedGeometry("grushin"))
        }
    }

    fn check(&self, p: &Point) -> Result<()> {
        if p.dim() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    pub fn origin(&self) -> Point {
        Point(vec![0.0; self.total_dim()])
    }

    pub fn multiply(&self, p: &Point, q: &Point) -> Result<Point> {
        self.require_group()?;
        self.check(p)?;
        self.check(q)?;
        let mut out = vec![0.0; self.total_dim()];
        self.multiply_into(&p.0, &q.0, &mut out);
        Ok(Point(out))
    }

    /// Group product on raw coordinates. Caller guarantees a group spec and
    /// matching lengths.
    pub(crate) fn multiply_into(&self, p: &[f64], q: &[f64], out: &mut [f64]) {
        match self {
            GroupSpec::Heisenberg => {
                out[0] = p[0] + q[0];
                out[1] = p[1] + q[1];
                out[2] = p[2] + q[2] + 2.0 * (q[0] * p[1] - p[0] * q[1]);
            }
            _ => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(q) {
                    *o = a + b;
                }
            }
        }
    }

    pub fn inverse(&self, p: &Point) -> Result<Point> {
        self.require_group()?;
        self.check(p)?;
        Ok(Point(p.0.iter().map(|v| -v).collect()))
    }

    /// `‖p‖^{2r!} = Σ_j (Σ_i p_ij²)^{r!/j}`, computed without roots.
    pub(crate) fn gauge_power_raw(&self, p: &[f64]) -> f64 {
        match self {
            GroupSpec::Heisenberg => {
                let horizontal = p[0] * p[0] + p[1] * p[1];
                horizontal * horizontal + p[2] * p[2]
            }
            _ => p.iter().map(|v| v * v).sum(),
        }
    }

    pub fn gauge_norm(&self, p: &Point) -> Result<f64> {
        self.require_group()?;
        self.check(p)?;
        let power = self.gauge_power_raw(&p.0);
        Ok(match self.step() {
            1 => math::sqrt(power),
            _ => math::sqrt(math::sqrt(power)),
        })
    }

    /// `d(x, y) = ‖x⁻¹·y‖`.
    pub fn gauge_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let xinv = self.inverse(x)?;
        let prod = self.multiply(&xinv, y)?;
        self.gauge_norm(&prod)
    }

    pub fn horizontal_frame(&self) -> HorizontalFrame {
        HorizontalFrame { spec: *self }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Euclidean(n) => write!(f, "euclidean:{n}"),
            GroupSpec::Heisenberg => f.write_str("heisenberg1"),
            GroupSpec::Grushin => f.write_str("grushin"),
        }
    }
}

impl core::str::FromStr for GroupSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GroupSpec::parse(s)
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// A point in exponential coordinates with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Point(coords))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<&[f64]> for Point {
    type Error = Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        Point::new(v.to_vec())
    }
}

/// Coefficients `a_ij(x)` of the horizontal fields `X_i = Σ_j a_ij ∂_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizontalFrame {
    spec: GroupSpec,
}

impl HorizontalFrame {
    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    /// Number of fields `m`.
    pub fn fields(&self) -> usize {
        self.spec.horizontal_dim()
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.spec.total_dim()
    }

    pub fn coefficient(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        match self.spec {
            GroupSpec::Euclidean(_) => (i == j) as u8 as f64,
            GroupSpec::Heisenberg => match (i, j) {
                (0, 0) | (1, 1) => 1.0,
                (0, 2) => -2.0 * x[1],
                (1, 2) => 2.0 * x[0],
                _ => 0.0,
            },
            GroupSpec::Grushin => match (i, j) {
                (0, 0) => 1.0,
                (1, 1) => x[0],
                _ => 0.0,
            },
        }
    }

    /// `∂_k a_ij`, constant for every built-in frame.
    pub fn coefficient_derivative(&self, i: usize, j: usize, k: usize) -> f64 {
        match (self.spec, i, j, k) {
            (GroupSpec::Heisenberg, 0, 2, 1) => -2.0,
            (GroupSpec::Heisenberg, 1, 2, 0) => 2.0,
            (GroupSpec::Grushin, 1, 1, 0) => 1.0,
            _ => 0.0,
        }
    }

    /// Row-major `m × n` coefficient matrix at `x`.
    pub fn matrix(&self, x: &[f64]) -> Vec<f64> {
        let (m, n) = (self.fields(), self.dim());
        let mut out = vec![0.0; m * n];
        self.matrix_into(x, &mut out);
        out
    }

    pub(crate) fn matrix_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..self.fields() {
            for j in 0..n {
                out[i * n + j] = self.coefficient(i, j, x);
            }
        }
    }

    /// `out_i = Σ_j a_ij(x) v_j`: the frame applied to an ambient gradient.
    pub fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.fields()) {
            *o = (0..self.dim()).map(|j| self.coefficient(i, j, x) * v[j]).sum();
        }
    }

    /// Exact endpoint of `γ' = Σ_i c_i X_i(γ)` after time `time` from `x`.
    pub fn flow(&self, x: &[f64], control: &[f64], time: f64) -> Vec<f64> {
        let mut out = x.to_vec();
        match self.spec {
            GroupSpec::Euclidean(_) => {
                for (o, c) in out.iter_mut().zip(control) {
                    *o += time * c;
                }
            }
            GroupSpec::Heisenberg => {
                let (a, b) = (control[0], control[1]);
                out[0] += time * a;
                out[1] += time * b;
                out[2] += time * (2.0 * x[0] * b - 2.0 * x[1] * a);
            }
            GroupSpec::Grushin => {
                let (a, b) = (control[0], control[1]);
                out[0] += time * a;
                out[1] += b * (x[0] * time + 0.5 * a * time * time);
            }
        }
        out
    }
}

pub(crate) fn dims_message(spec: GroupSpec, got: usize) -> alloc::string::String {
    format!("{spec} needs {} coordinates, got {got}", spec.total_dim())
}

#[cfg(test)]
mod tests {
    extern crate std;
    use alloc::string::ToString;
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn heisenberg_product_of_generators() {
        let h = GroupSpec::Heisenberg;
        let r = h.multiply(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(r.coords(), &[1.0, 1.0, -2.0]);
    }

    #[test]
    fn inverse_cancels() {
        let h = GroupSpec::Heisenberg;
        let a = p(&[1.0, 2.0, 3.0]);
        let r = h.multiply(&a, &h.inverse(&a).unwrap()).unwrap();
        assert!(r.coords().iter().all(|c| c.abs() <= 1e-14));
    }

    #[test]
    fn grushin_has_no_group_law() {
        let g = GroupSpec::Grushin;
        let a = p(&[1.0, 2.0]);
        assert!(matches!(g.multiply(&a, &a), Err(Error::UnsupportedGeometry(_))));
        assert!(g.inverse(&a).is_err());
        assert!(g.gauge_norm(&a).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for s in ["euclidean:1", "euclidean:3", "heisenberg1", "grushin"] {
            assert_eq!(GroupSpec::parse(s).unwrap().to_string(), s);
        }
        for bad in ["euclidean:0", "euclid", "heisenberg2", ""] {
            assert!(GroupSpec::parse(bad).is_err());
        }
    }

    #[test]
    fn exponents_follow_step() {
        assert_eq!(GroupSpec::Euclidean(4).gauge_exponent(), 2);
        assert_eq!(GroupSpec::Heisenberg.gauge_exponent(), 4);
        assert_eq!(GroupSpec::Heisenberg.layer_dims().iter().sum::<usize>(), 3);
    }

    #[test]
    fn flows_are_exact() {
        let f = GroupSpec::Heisenberg.horizontal_frame();
        // Integrate by many small Euler steps and compare.
        let x0 = [0.3, -0.7, 0.2];
        let c = [0.6, 0.8];
        let mut x = x0;
        let steps = 200_000;
        let dt = 0.5 / steps as f64;
        for _ in 0..steps {
            let v = [c[0], c[1], -2.0 * x[1] * c[0] + 2.0 * x[0] * c[1]];
            for k in 0..3 {
                x[k] += dt * v[k];
            }
        }
        let exact = f.flow(&x0, &c, 0.5);
        for k in 0..3 {
            assert!((exact[k] - x[k]).abs() < 1e-5);
        }
        let g = GroupSpec::Grushin.horizontal_frame();
        let e = g.flow(&[0.5, 0.0], &[1.0, 1.0], 1.0);
        assert!((e[1] - 1.0).abs() < 1e-15);
    }
}
