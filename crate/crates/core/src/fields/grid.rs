use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::carnot::{dims_message, GroupSpec};
use crate::error::{Error, Result};
use crate::math;

/// Classification of a lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Uniform lattice over a box with an interior/boundary/exterior mask.
///
/// Nodes are numbered in row-major order with the last axis fastest.
/// Every interior node has non-exterior axis neighbours on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    spec: GroupSpec,
    lower: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    strides
}

impl GridDomain {
    /// Box `[lower, upper]` with spacing `h`; the outer faces are boundary.
    pub fn new_box(spec: GroupSpec, lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        let n = spec.total_dim();
        if lower.len() != n || upper.len() != n {
            return Err(Error::InvalidGrid(dims_message(spec, lower.len().min(upper.len()))));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing h = {h} must be positive")));
        }
        let mut shape = Vec::with_capacity(n);
        for a in 0..n {
            let (lo, hi) = (lower[a], upper[a]);
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidGrid(format!("axis {a}: need lower < upper")));
            }
            let cells = (hi - lo) / h;
            let rounded = math::round(cells);
            if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: length {} is not a multiple of h = {h}",
                    hi - lo
                )));
            }
            if rounded < 2.0 {
                return Err(Error::InvalidGrid(format!("axis {a}: fewer than 2 cells")));
            }
            shape.push(rounded as usize + 1);
        }
        let strides = strides_for(&shape);
        let len: usize = shape.iter().product();
        let mut kinds = vec![NodeKind::Interior; len];
        let mut idx = vec![0usize; n];
        for kind in kinds.iter_mut() {
            if idx.iter().zip(&shape).any(|(&i, &s)| i == 0 || i + 1 == s) {
                *kind = NodeKind::Boundary;
            }
            increment(&mut idx, &shape);
        }
        Self::assemble(spec, lower.to_vec(), h, shape, strides, kinds)
    }

    /// Arbitrary mask on a lattice. Rejects interior nodes with an exterior
    /// or missing axis neighbour, and masks without interior nodes.
    pub fn from_kinds(
        spec: GroupSpec,
        lower: &[f64],
        h: f64,
        shape: &[usize],
        kinds: Vec<NodeKind>,
    ) -> Result<Self> {
        let n = spec.total_dim();
        if lower.len() != n || shape.len() != n {
            return Err(Error::InvalidGrid(dims_message(spec, lower.len())));
        }
        if !(h.is_finite() && h > 0.0) || lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite corner or spacing".into()));
        }
        let len: usize = shape.iter().product();
        if kinds.len() != len {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries, lattice has {len}",
                kinds.len()
            )));
        }
        let strides = strides_for(shape);
        let domain = Self::assemble(spec, lower.to_vec(), h, shape.to_vec(), strides, kinds)?;
        for &node in &domain.interior {
            for a in 0..n {
                for dir in [-1isize, 1] {
                    match domain.neighbor(node, a, dir) {
                        Some(nb) if domain.kinds[nb] != NodeKind::Exterior => {}
                        _ => {
                            return Err(Error::InvalidGrid(format!(
                                "interior node {node} lacks a neighbour along axis {a}"
                            )))
                        }
                    }
                }
            }
        }
        Ok(domain)
    }

    fn assemble(
        spec: GroupSpec,
        lower: Vec<f64>,
        h: f64,
        shape: Vec<usize>,
        strides: Vec<usize>,
        kinds: Vec<NodeKind>,
    ) -> Result<Self> {
        let interior: Vec<usize> = (0..kinds.len())
            .filter(|&i| kinds[i] == NodeKind::Interior)
            .collect();
        if interior.is_empty() {
            return Err(Error::InvalidGrid("no interior node".into()));
        }
        let boundary = (0..kinds.len())
            .filter(|&i| kinds[i] == NodeKind::Boundary)
            .collect();
        Ok(GridDomain {
            spec,
            lower,
            h,
            shape,
            strides,
            kinds,
            interior,
            boundary,
        })
    }

    /// The box spanned by lattice multi-indices `lo..=hi`, with its own
    /// outer faces as boundary, plus the parent index of each of its nodes.
    pub fn sub_box(&self, lo: &[usize], hi: &[usize]) -> Result<(GridDomain, Vec<usize>)> {
        let n = self.dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: lo.len(),
            });
        }
        for a in 0..n {
            if hi[a] >= self.shape[a] || hi[a] < lo[a] + 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: sub-box needs lo + 2 <= hi < {}",
                    self.shape[a]
                )));
            }
        }
        let lower: Vec<f64> = (0..n).map(|a| self.lower[a] + lo[a] as f64 * self.h).collect();
        let shape: Vec<usize> = (0..n).map(|a| hi[a] - lo[a] + 1).collect();
        let len: usize = shape.iter().product();
        let mut kinds = vec![NodeKind::Interior; len];
        let mut parent = Vec::with_capacity(len);
        let mut idx = vec![0usize; n];
        for kind in kinds.iter_mut() {
            let global: Vec<usize> = (0..n).map(|a| lo[a] + idx[a]).collect();
            let p = self.linear_index(&global);
            if self.kinds[p] == NodeKind::Exterior {
                return Err(Error::OutsideDomain(p));
            }
            parent.push(p);
            if idx.iter().zip(&shape).any(|(&i, &s)| i == 0 || i + 1 == s) {
                *kind = NodeKind::Boundary;
            }
            increment(&mut idx, &shape);
        }
        let strides = strides_for(&shape);
        let sub = Self::assemble(self.spec, lower, self.h, shape, strides, kinds)?;
        Ok((sub, parent))
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.lower[a] + (self.shape[a] - 1) as f64 * self.h)
            .collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of lattice nodes, exterior ones included.
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn is_active(&self, node: usize) -> bool {
        node < self.kinds.len() && self.kinds[node] != NodeKind::Exterior
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Non-exterior nodes in increasing order.
    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.kinds.len()).filter(move |&i| self.kinds[i] != NodeKind::Exterior)
    }

    pub fn active_count(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    /// `h^n`.
    pub fn cell_volume(&self) -> f64 {
        math::powi(self.h, self.dim() as i32)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        self.multi_index_into(node, &mut idx);
        idx
    }

    pub fn multi_index_into(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for a in 0..self.dim() {
            out[a] = rest / self.strides[a];
            rest %= self.strides[a];
        }
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords_into(node, &mut x);
        x
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for a in 0..self.dim() {
            let i = rest / self.strides[a];
            rest %= self.strides[a];
            out[a] = self.lower[a] + i as f64 * self.h;
        }
    }

    /// Lattice neighbour `offset` steps along `axis`, ignoring the mask.
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = (node / self.strides[axis]) % self.shape[axis];
        let j = i as isize + offset;
        if j < 0 || j >= self.shape[axis] as isize {
            return None;
        }
        Some((node as isize + offset * self.strides[axis] as isize) as usize)
    }

    /// Neighbour along `axis` that is non-exterior, if any.
    pub fn active_neighbor(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        self.neighbor(node, axis, offset).filter(|&nb| self.is_active(nb))
    }

    /// Nearest lattice node to `x`, if `x` rounds into the lattice.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let mut node = 0;
        for a in 0..self.dim() {
            let r = math::round((x[a] - self.lower[a]) / self.h);
            if !(r >= 0.0 && r < self.shape[a] as f64) {
                return None;
            }
            node += r as usize * self.strides[a];
        }
        Some(node)
    }
}

pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < shape[a] {
            return;
        }
        idx[a] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_classification() {
        let d = GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        assert_eq!(d.shape(), &[5, 5]);
        assert_eq!(d.interior_nodes().len(), 9);
        assert_eq!(d.boundary_nodes().len(), 16);
        let c = d.linear_index(&[2, 3]);
        assert_eq!(d.coords(c), vec![0.5, 0.75]);
        assert_eq!(d.multi_index(c), vec![2, 3]);
        assert_eq!(d.nearest_node(&[0.49, 0.76]), Some(c));
    }

    #[test]
    fn rejects_bad_boxes() {
        let e = GroupSpec::Euclidean(1);
        assert!(GridDomain::new_box(e, &[0.0], &[1.0], 0.3).is_err());
        assert!(GridDomain::new_box(e, &[0.0], &[1.0], 0.5).is_ok());
        assert!(GridDomain::new_box(e, &[0.0], &[1.0], 1.0).is_err());
        assert!(GridDomain::new_box(e, &[0.0], &[1.0], -0.1).is_err());
    }

    #[test]
    fn mask_requires_neighbours() {
        use NodeKind::*;
        let e = GroupSpec::Euclidean(1);
        let ok = GridDomain::from_kinds(e, &[0.0], 0.5, &[4], alloc::vec![Exterior, Boundary, Interior, Boundary]);
        assert!(ok.is_ok());
        let bad = GridDomain::from_kinds(e, &[0.0], 0.5, &[3], alloc::vec![Exterior, Interior, Boundary]);
        assert!(bad.is_err());
        let none = GridDomain::from_kinds(e, &[0.0], 0.5, &[2], alloc::vec![Boundary, Boundary]);
        assert!(none.is_err());
    }

    #[test]
    fn sub_box_maps_to_parent() {
        let d = GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0, 0.0], &[1.0, 1.0], 0.125).unwrap();
        let (s, parent) = d.sub_box(&[1, 2], &[4, 6]).unwrap();
        assert_eq!(s.shape(), &[4, 5]);
        for node in 0..s.len() {
            assert_eq!(s.coords(node), d.coords(parent[node]));
        }
    }
}
