//! Exhaustive reference solvers for tiny instances.
//!
//! The vertices of the transportation polytope `Pi(a, b)` are its basic
//! feasible solutions, and each basis is a spanning tree of the complete
//! bipartite graph on rows and columns. [`transport_by_vertices`] visits
//! every spanning tree, solves it by peeling leaves, keeps the nonnegative
//! solutions and returns the cheapest. It shares no code with the simplex.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

/// Largest number of cells the oracle enumerates subsets of.
pub const MAX_ORACLE_CELLS: usize = 16;

fn is_spanning_tree(cells: &[(usize, usize)], r: usize, c: usize) -> bool {
    let mut parent: Vec<usize> = (0..r + c).collect();
    fn root(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(i, j) in cells {
        let (a, b) = (root(&mut parent, i), root(&mut parent, r + j));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    cells.len() == r + c - 1
}

/// Solves the tree system by repeatedly fixing the only open cell of a line.
fn solve_tree(cells: &[(usize, usize)], a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut row_left = a.to_vec();
    let mut col_left = b.to_vec();
    let mut value: Vec<Option<Rational>> = vec![None; cells.len()];
    let mut open = cells.len();
    while open > 0 {
        let mut progressed = false;
        for k in 0..cells.len() {
            if value[k].is_some() {
                continue;
            }
            let (i, j) = cells[k];
            let row_open = (0..cells.len()).filter(|&l| value[l].is_none() && cells[l].0 == i).count();
            let col_open = (0..cells.len()).filter(|&l| value[l].is_none() && cells[l].1 == j).count();
            let v = if row_open == 1 {
                row_left[i].clone()
            } else if col_open == 1 {
                col_left[j].clone()
            } else {
                continue;
            };
            row_left[i] -= &v;
            col_left[j] -= &v;
            value[k] = Some(v);
            open -= 1;
            progressed = true;
        }
        assert!(progressed, "a spanning tree always has a leaf");
    }
    value.into_iter().map(|v| v.expect("solved")).collect()
}

/// Minimum of `sum c(i, j) x(i, j)` over the vertices of `Pi(a, b)`, with a
/// minimizing vertex.
pub fn transport_by_vertices(
    a: &[Rational],
    b: &[Rational],
    cost: &[Vec<Rational>],
) -> Result<(Rational, Vec<Vec<Rational>>)> {
    let (r, c) = (a.len(), b.len());
    if r == 0 || c == 0 || cost.len() != r || cost.iter().any(|row| row.len() != c) {
        return Err(Error::ShapeMismatch("cost table must be rows x cols".into()));
    }
    if r * c > MAX_ORACLE_CELLS {
        return Err(Error::InstanceTooLarge(format!("{r} x {c} exceeds {MAX_ORACLE_CELLS} cells")));
    }
    if a.iter().sum::<Rational>() != b.iter().sum::<Rational>() {
        return Err(Error::Infeasible);
    }
    let all: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    let mut best: Option<(Rational, Vec<Vec<Rational>>)> = None;
    for mask in 0u32..(1 << all.len()) {
        if mask.count_ones() as usize != r + c - 1 {
            continue;
        }
        let cells: Vec<(usize, usize)> = (0..all.len()).filter(|k| mask >> k & 1 == 1).map(|k| all[k]).collect();
        if !is_spanning_tree(&cells, r, c) {
            continue;
        }
        let x = solve_tree(&cells, a, b);
        if x.iter().any(Signed::is_negative) {
            continue;
        }
        let value: Rational = cells.iter().zip(&x).map(|(&(i, j), v)| &cost[i][j] * v).sum();
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            let mut plan = vec![vec![Rational::zero(); c]; r];
            for (&(i, j), v) in cells.iter().zip(x) {
                plan[i][j] = v;
            }
            best = Some((value, plan));
        }
    }
    best.ok_or(Error::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn birkhoff_square() {
        let h = vec![q(1, 2), q(1, 2)];
        let cost = vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(0, 1)]];
        let (v, plan) = transport_by_vertices(&h, &h, &cost).unwrap();
        assert!(v.is_zero());
        assert_eq!(plan[0][0], q(1, 2));
    }

    #[test]
    fn three_by_three_by_hand() {
        let a = vec![q(1, 3), q(1, 3), q(1, 3)];
        let cost: Vec<Vec<Rational>> = (0..3)
            .map(|i: i64| (0..3).map(|j: i64| q((i - j).abs(), 1)).collect())
            .collect();
        let b = vec![q(1, 1), q(0, 1), q(0, 1)];
        let (v, _) = transport_by_vertices(&a, &b, &cost).unwrap();
        assert_eq!(v, q(1, 1));
        let (v, _) = transport_by_vertices(&a, &a, &cost).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn mass_mismatch_is_infeasible() {
        let cost = vec![vec![q(0, 1)]];
        assert_eq!(transport_by_vertices(&[q(1, 1)], &[q(1, 2)], &cost), Err(Error::Infeasible));
    }
}
