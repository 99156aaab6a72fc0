//! Float-mode transportation solver and the Wasserstein-1 distance.
//!
//! A primal network simplex on the bipartite transportation graph:
//! northwest-corner initial tree, block-search pricing, potentials
//! recomputed from the root after every pivot. Supports here are at most a
//! few thousand atoms per side, so the O(nodes) refresh is cheap next to
//! pricing.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::measure::{l1, DiscreteMeasure};
use crate::scalar::Scalar;

/// Optimal plan of a balanced transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(source, sink, flow)`; cells with zero flow may appear.
    pub flows: Vec<(usize, usize, f64)>,
}

const MAX_PIVOTS: usize = 20_000_000;

/// Solves `min sum c(i,j) f(i,j)` over nonnegative flows with row sums
/// `supply` and column sums `demand`. Totals must agree to float precision.
pub fn solve_transport<F>(supply: &[f64], demand: &[f64], cost: F) -> Result<TransportPlan>
where
    F: Fn(usize, usize) -> f64,
{
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::ShapeMismatch("empty transport problem".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 * total_s.max(1.0) {
        return Err(Error::MassMismatch {
            source_mass: total_s.to_string(),
            target_mass: total_d.to_string(),
        });
    }

    // Northwest corner: a staircase of m + n - 1 cells, hence a spanning tree.
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    {
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let f = a[i].min(b[j]).max(0.0);
            cells.push((i, j));
            flow.push(f);
            a[i] -= f;
            b[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let nodes = m + n;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, &(i, j)) in cells.iter().enumerate() {
        adjacency[i].push(k);
        adjacency[m + j].push(k);
    }

    let mut parent = vec![usize::MAX; nodes];
    let mut parent_cell = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut potential = vec![0.0f64; nodes];
    let block = ((m * n) as f64).sqrt().ceil().max(32.0) as usize;
    let arcs = m * n;
    let mut cursor = 0usize;
    let mut queue = VecDeque::with_capacity(nodes);

    for _ in 0..MAX_PIVOTS {
        // Tree refresh from the root.
        parent[0] = usize::MAX;
        parent_cell[0] = usize::MAX;
        depth[0] = 0;
        potential[0] = 0.0;
        queue.clear();
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &k in &adjacency[node] {
                if k == parent_cell[node] {
                    continue;
                }
                let (i, j) = cells[k];
                let c = cost(i, j);
                let child = if node < m { m + j } else { i };
                parent[child] = node;
                parent_cell[child] = k;
                depth[child] = depth[node] + 1;
                potential[child] = c - potential[node];
                queue.push_back(child);
            }
        }

        // Block-search pricing.
        let mut entering: Option<(usize, usize)> = None;
        let mut best = 0.0f64;
        let mut scanned = 0usize;
        while scanned < arcs {
            let stop = (scanned + block).min(arcs);
            while scanned < stop {
                let a = cursor;
                cursor += 1;
                if cursor == arcs {
                    cursor = 0;
                }
                scanned += 1;
                let (i, j) = (a / n, a % n);
                let c = cost(i, j);
                let reduced = c - potential[i] - potential[m + j];
                if reduced < best && reduced < -1e-12 * (1.0 + c.abs()) {
                    best = reduced;
                    entering = Some((i, j));
                }
            }
            if entering.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = entering else {
            let total = cells
                .iter()
                .zip(&flow)
                .map(|(&(i, j), f)| f * cost(i, j))
                .sum();
            return Ok(TransportPlan {
                cost: total,
                flows: cells
                    .iter()
                    .zip(&flow)
                    .map(|(&(i, j), &f)| (i, j, f))
                    .collect(),
            });
        };

        // Tree path from source ei to sink ej; cells alternate -, +, -, ...
        let (mut a, mut b) = (ei, m + ej);
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                from_a.push(parent_cell[a]);
                a = parent[a];
            } else {
                from_b.push(parent_cell[b]);
                b = parent[b];
            }
        }
        from_a.extend(from_b.into_iter().rev());
        let path = from_a;

        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 && flow[k] < theta {
                theta = flow[k];
                leaving = k;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flow[k] -= theta;
            } else {
                flow[k] += theta;
            }
        }
        let (li, lj) = cells[leaving];
        adjacency[li].retain(|&k| k != leaving);
        adjacency[m + lj].retain(|&k| k != leaving);
        cells[leaving] = (ei, ej);
        flow[leaving] = theta;
        adjacency[ei].push(leaving);
        adjacency[m + ej].push(leaving);
    }
    Err(Error::InstanceTooLarge(
        "network simplex exceeded its pivot budget".into(),
    ))
}

/// W1 between two weighted point clouds under the L1 ground metric.
pub fn w1_points(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)]) -> Result<f64> {
    let a: Vec<_> = a.iter().filter(|(_, w)| *w > 0.0).collect();
    let b: Vec<_> = b.iter().filter(|(_, w)| *w > 0.0).collect();
    let dim_a = a.first().map(|p| p.0.len()).unwrap_or(0);
    let dim_b = b.first().map(|p| p.0.len()).unwrap_or(0);
    if dim_a != dim_b {
        return Err(Error::DimensionMismatch(dim_a, dim_b));
    }
    if let Some(p) = a.iter().chain(&b).find(|p| p.0.len() != dim_a) {
        return Err(Error::DimensionMismatch(p.0.len(), dim_a));
    }
    let supply: Vec<f64> = a.iter().map(|p| p.1).collect();
    let demand: Vec<f64> = b.iter().map(|p| p.1).collect();
    let plan = solve_transport(&supply, &demand, |i, j| l1(&a[i].0, &b[j].0))?;
    Ok(plan.cost.max(0.0))
}

/// Wasserstein-1 distance between two measures on spaces of equal ambient
/// dimension, ground cost L1 on coordinates.
pub fn wasserstein1<S: Scalar>(mu: &DiscreteMeasure<S>, nu: &DiscreteMeasure<S>) -> Result<f64> {
    if mu.space().dim() != nu.space().dim() {
        return Err(Error::DimensionMismatch(mu.space().dim(), nu.space().dim()));
    }
    w1_points(&mu.points(), &nu.points())
}
