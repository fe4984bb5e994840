//! Graph approximation of the Carnot–Carathéodory distance.
//!
//! Edges are exact constant-control horizontal flows of time `h|d|` along
//! primitive integer control directions `d` (`|d_i| ≤ depth`; only the unit
//! directions at depth 1), with endpoints snapped to the nearest lattice
//! node. In step-2 geometries depth ≥ 2 adds commutator loops
//! `X₁, X₂, -X₁, -X₂` as single macro-edges realizing pure vertical
//! displacements. Duplicate edges keep their cheapest cost and every edge
//! is symmetrized by averaging its two directed costs.

use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::carnot::GroupSpec;
use crate::error::{invalid, Error, Result};
use crate::fields::{GridDomain, ScalarField};
use crate::math;

/// Symmetric weighted adjacency over the non-exterior nodes of a domain.
#[derive(Debug, Clone)]
pub struct HorizontalGraph {
    domain: Arc<GridDomain>,
    depth: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn directions(m: usize, depth: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if depth <= 1 {
        for i in 0..m {
            for s in [-1, 1] {
                let mut d = vec![0; m];
                d[i] = s;
                out.push(d);
            }
        }
        return out;
    }
    let span = 2 * depth + 1;
    let total = span.pow(m as u32);
    for code in 0..total {
        let mut rest = code;
        let mut d = vec![0i64; m];
        for v in d.iter_mut() {
            *v = (rest % span) as i64 - depth as i64;
            rest /= span;
        }
        let g = d.iter().fold(0, |g, &v| gcd(g, v.unsigned_abs() as usize));
        if g == 1 {
            out.push(d);
        }
    }
    out
}

/// Vertical loop moves `(axis, displacement in lattice steps, cost)`.
fn loop_moves(spec: GroupSpec, h: f64, depth: usize) -> Vec<(usize, i64, f64)> {
    let mut out = Vec::new();
    if spec.step() < 2 || depth < 2 {
        return out;
    }
    for q in 1..=depth as i64 {
        let rise = q as f64 * h;
        // Loop side L: rise 4L² on H¹, L² on Grushin; cost 4L.
        let side = match spec {
            GroupSpec::Heisenberg => 0.5 * math::sqrt(rise),
            _ => math::sqrt(rise),
        };
        let axis = spec.total_dim() - 1;
        out.push((axis, q, 4.0 * side));
        out.push((axis, -q, 4.0 * side));
    }
    out
}

pub fn build_graph(domain: Arc<GridDomain>, depth: usize) -> Result<HorizontalGraph> {
    if depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    if domain.interior_nodes().len() < 2 {
        return Err(invalid("domain", "needs at least 2 interior nodes"));
    }
    let spec = domain.spec();
    let frame = spec.horizontal_frame();
    let h = domain.h();
    let dirs = directions(frame.fields(), depth);
    let loops = loop_moves(spec, h, depth);
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut insert = |a: usize, b: usize, cost: f64| {
        directed
            .entry((a, b))
            .and_modify(|c| *c = c.min(cost))
            .or_insert(cost);
    };
    let mut x = vec![0.0; domain.dim()];
    let mut control = vec![0.0; frame.fields()];
    for node in domain.active_nodes() {
        domain.coords_into(node, &mut x);
        for d in &dirs {
            let len = math::sqrt(d.iter().map(|&v| (v * v) as f64).sum());
            for (c, &v) in control.iter_mut().zip(d) {
                *c = v as f64 / len;
            }
            let time = h * len;
            let end = frame.flow(&x, &control, time);
            if let Some(target) = domain.nearest_node(&end) {
                if target != node && domain.is_active(target) {
                    insert(node, target, time);
                }
            }
        }
        for &(axis, q, cost) in &loops {
            if let Some(target) = domain.neighbor(node, axis, q as isize) {
                if domain.is_active(target) {
                    insert(node, target, cost);
                }
            }
        }
    }
    let mut adjacency = vec![Vec::new(); domain.len()];
    for (&(a, b), &cost) in &directed {
        if a < b {
            let cost = match directed.get(&(b, a)) {
                Some(&back) => 0.5 * (cost + back),
                None => cost,
            };
            adjacency[a].push((b, cost));
            adjacency[b].push((a, cost));
        } else if !directed.contains_key(&(b, a)) {
            adjacency[a].push((b, cost));
            adjacency[b].push((a, cost));
        }
    }
    for list in adjacency.iter_mut() {
        list.sort_by_key(|&(t, _)| t);
    }
    let graph = HorizontalGraph {
        domain,
        depth,
        adjacency,
    };
    graph.check_connected()?;
    Ok(graph)
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl HorizontalGraph {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Sorted `(target, cost)` pairs leaving `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn check_connected(&self) -> Result<()> {
        let start = self.domain.active_nodes().next().ok_or(Error::EmptyRegion)?;
        let mut seen = vec![false; self.domain.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(a) = queue.pop_front() {
            for &(b, _) in &self.adjacency[a] {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        match self.domain.active_nodes().find(|&i| !seen[i]) {
            Some(node) => Err(Error::Disconnected { node }),
            None => Ok(()),
        }
    }

    fn require(&self, node: usize) -> Result<()> {
        if self.domain.is_active(node) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(node))
        }
    }

    /// Dijkstra from `source`, stopping once `stop` is settled or every
    /// remaining label exceeds `limit`. Returns labels and predecessors.
    fn dijkstra(&self, source: usize, stop: Option<usize>, limit: f64) -> (Vec<f64>, Vec<usize>) {
        let len = self.domain.len();
        let mut dist = vec![f64::INFINITY; len];
        let mut prev = vec![usize::MAX; len];
        let mut done = vec![false; len];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State { cost: 0.0, node: source });
        while let Some(State { cost, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            if cost > limit {
                break;
            }
            done[node] = true;
            if Some(node) == stop {
                break;
            }
            for &(next, w) in &self.adjacency[node] {
                let c = cost + w;
                if c < dist[next] || (c == dist[next] && node < prev[next]) {
                    dist[next] = c;
                    prev[next] = node;
                    heap.push(State { cost: c, node: next });
                }
            }
        }
        for i in 0..len {
            if !done[i] {
                dist[i] = f64::INFINITY;
            }
        }
        (dist, prev)
    }

    /// Shortest-path cost between two non-exterior nodes.
    pub fn distance(&self, p: usize, q: usize) -> Result<f64> {
        Ok(self.shortest_path(p, q)?.0)
    }

    /// Shortest-path cost and node sequence from `p` to `q`. The search
    /// always starts at the lower index so that `d(p, q) = d(q, p)` holds
    /// bit for bit.
    pub fn shortest_path(&self, p: usize, q: usize) -> Result<(f64, Vec<usize>)> {
        self.require(p)?;
        self.require(q)?;
        if p > q {
            let (cost, mut path) = self.shortest_path(q, p)?;
            path.reverse();
            return Ok((cost, path));
        }
        let (dist, prev) = self.dijkstra(p, Some(q), f64::INFINITY);
        if !dist[q].is_finite() {
            return Err(Error::Disconnected { node: q });
        }
        let mut path = vec![q];
        let mut at = q;
        while at != p {
            at = prev[at];
            path.push(at);
        }
        path.reverse();
        Ok((dist[q], path))
    }

    /// Distances from `source` to every node (`∞` at exterior nodes).
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        self.require(source)?;
        Ok(self.dijkstra(source, None, f64::INFINITY).0)
    }

    /// `{q : d(center, q) ≤ radius}` in increasing node order.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Vec<usize>> {
        self.require(center)?;
        if !(radius >= 0.0) {
            return Err(invalid("radius", "must be nonnegative"));
        }
        let (dist, _) = self.dijkstra(center, None, radius);
        Ok((0..dist.len()).filter(|&i| dist[i] <= radius).collect())
    }

    /// Largest `|u(a) - u(b)| / cost(a, b)` over edges inside `region`.
    pub fn lipschitz(&self, u: &ScalarField, region: &[usize]) -> Result<f64> {
        crate::fields::same_domain(&self.domain, u.domain())?;
        if region.len() < 2 {
            return Err(Error::EmptyRegion);
        }
        let mut inside = vec![false; self.domain.len()];
        for &node in region {
            self.require(node)?;
            inside[node] = true;
        }
        let vals = u.values();
        let mut best: f64 = 0.0;
        for &a in region {
            for &(b, cost) in &self.adjacency[a] {
                if b > a && inside[b] {
                    best = best.max((vals[a] - vals[b]).abs() / cost);
                }
            }
        }
        Ok(best)
    }
}

pub fn cc_distance(graph: &HorizontalGraph, p: usize, q: usize) -> Result<f64> {
    graph.distance(p, q)
}

pub fn cc_ball(graph: &HorizontalGraph, center: usize, radius: f64) -> Result<Vec<usize>> {
    graph.ball(center, radius)
}

pub fn cc_lipschitz(u: &ScalarField, graph: &HorizontalGraph, region: &[usize]) -> Result<f64> {
    graph.lipschitz(u, region)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one_is_the_lattice() {
        let d = Arc::new(GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0; 2], &[1.0; 2], 0.25).unwrap());
        let g = build_graph(d.clone(), 1).unwrap();
        let c = d.linear_index(&[2, 2]);
        assert_eq!(g.neighbors(c).len(), 4);
        assert!(g.neighbors(c).iter().all(|&(_, w)| (w - 0.25).abs() < 1e-15));
        assert_eq!(directions(2, 2).len(), 16);
    }

    #[test]
    fn heisenberg_reaches_vertical_neighbour() {
        let d = Arc::new(GridDomain::new_box(GroupSpec::Heisenberg, &[-0.5; 3], &[0.5; 3], 0.125).unwrap());
        let g = build_graph(d.clone(), 2).unwrap();
        let o = d.nearest_node(&[0.0; 3]).unwrap();
        let up = d.nearest_node(&[0.0, 0.0, 0.125]).unwrap();
        assert!(g.neighbors(o).iter().any(|&(t, _)| t == up));
        assert!(g.distance(o, up).unwrap() > 0.0);
    }
}
