use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::grid::{GridDomain, NodeKind};
use crate::error::{Error, Result};

/// One finite value per non-exterior node.
///
/// Stored over the full lattice; exterior slots hold `0.0` and are never
/// exposed through [`ScalarField::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Samples `f` at every non-exterior node.
    pub fn from_fn(domain: Arc<GridDomain>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; domain.dim()];
        let mut values = vec![0.0; domain.len()];
        for node in domain.active_nodes() {
            domain.coords_into(node, &mut x);
            values[node] = f(&x);
        }
        Self::from_values(domain, values)
    }

    /// Full-lattice values; exterior entries are ignored.
    pub fn from_values(domain: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        for (node, v) in values.iter_mut().enumerate() {
            if domain.kind(node) == NodeKind::Exterior {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::IncompleteField { node });
            }
        }
        Ok(ScalarField { domain, values })
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Result<Self> {
        let len = domain.len();
        Self::from_values(domain, vec![c; len])
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn get(&self, node: usize) -> Result<f64> {
        if self.domain.is_active(node) {
            Ok(self.values[node])
        } else {
            Err(Error::OutsideDomain(node))
        }
    }

    /// Full-lattice storage, zero at exterior nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_values(self.domain.clone(), values)
    }

    /// `self + other` on a shared domain.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_domain(&self.domain, &other.domain)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.domain.clone(), values)
    }

    /// `max |u|` over non-exterior nodes.
    pub fn sup_norm(&self) -> f64 {
        self.domain
            .active_nodes()
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.domain
            .active_nodes()
            .map(|i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values at the parent nodes listed by [`GridDomain::sub_box`].
    pub fn restrict(&self, sub: Arc<GridDomain>, parent: &[usize]) -> Result<Self> {
        if parent.len() != sub.len() {
            return Err(Error::DomainMismatch);
        }
        let values = parent.iter().map(|&p| self.values[p]).collect();
        Self::from_values(sub, values)
    }
}

pub(crate) fn same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// `m` values per node; zero outside interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalField {
    domain: Arc<GridDomain>,
    m: usize,
    values: Vec<f64>,
}

impl HorizontalField {
    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let m = domain.spec().horizontal_dim();
        let values = vec![0.0; m * domain.len()];
        HorizontalField { domain, m, values }
    }

    /// Node-major values, `m` per lattice node. Non-interior entries are
    /// reset to zero.
    pub fn from_values(domain: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        let m = domain.spec().horizontal_dim();
        if values.len() != m * domain.len() {
            return Err(Error::DimensionMismatch {
                expected: m * domain.len(),
                got: values.len(),
            });
        }
        for node in 0..domain.len() {
            let slot = &mut values[node * m..(node + 1) * m];
            if domain.kind(node) != NodeKind::Interior {
                slot.iter_mut().for_each(|v| *v = 0.0);
            } else if slot.iter().any(|v| !v.is_finite()) {
                return Err(Error::IncompleteField { node });
            }
        }
        Ok(HorizontalField { domain, m, values })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    pub(crate) fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.m..(node + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Symmetric `dim × dim` matrix stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Symmetric part of a row-major square matrix.
    pub fn from_full(dim: usize, full: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (full[i * dim + j] + full[j * dim + i]));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(self.dim, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.dim, i, j);
        self.packed[k] = v;
    }

    /// `pᵀ M q`.
    pub fn bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += p[i] * self.get(i, j) * q[j];
            }
        }
        s
    }

    pub fn quadratic_form(&self, p: &[f64]) -> f64 {
        self.bilinear(p, p)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().zip(&other.packed).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().zip(&other.packed).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().map(|a| c * a).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }
}

/// One symmetric `m × m` matrix per node; zero outside interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixField {
    domain: Arc<GridDomain>,
    m: usize,
    packed: Vec<f64>,
}

impl SymMatrixField {
    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let m = domain.spec().horizontal_dim();
        let packed = vec![0.0; m * (m + 1) / 2 * domain.len()];
        SymMatrixField { domain, m, packed }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn width(&self) -> usize {
        self.m * (self.m + 1) / 2
    }

    pub fn entry(&self, node: usize, i: usize, j: usize) -> f64 {
        self.packed[node * self.width() + packed_index(self.m, i, j)]
    }

    pub fn matrix(&self, node: usize) -> SymMatrix {
        let w = self.width();
        SymMatrix {
            dim: self.m,
            packed: self.packed[node * w..(node + 1) * w].to_vec(),
        }
    }

    pub(crate) fn set_matrix(&mut self, node: usize, m: &SymMatrix) {
        let w = self.width();
        self.packed[node * w..(node + 1) * w].copy_from_slice(&m.packed);
    }
}
