//! Equality-form linear programs and a dense two-phase simplex.
//!
//! Variables are nonnegative; constraints are `sum a_j x_j = b`. Pivoting
//! uses the smallest-index (Bland) rule for both the entering column and
//! ratio-test ties, so the exact-rational solver always terminates. The
//! same code runs in float mode with [`crate::scalar::FLOAT_TOL`] as the
//! zero threshold.

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Row<S = Rational> {
    pub coeffs: Vec<(usize, S)>,
    pub rhs: S,
}

/// Sparse equality constraints over `n_vars` nonnegative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<S = Rational> {
    n_vars: usize,
    rows: Vec<Row<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S = Rational> {
    pub value: S,
    pub x: Vec<S>,
}

impl<S: Scalar> LinearSystem<S> {
    pub fn new(n_vars: usize) -> Self {
        LinearSystem {
            n_vars,
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn rows(&self) -> &[Row<S>] {
        &self.rows
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, S)>, rhs: S) -> Result<()> {
        if let Some(&(j, _)) = coeffs.iter().find(|(j, _)| *j >= self.n_vars) {
            return Err(Error::ShapeMismatch(format!(
                "variable {j} out of range ({} variables)",
                self.n_vars
            )));
        }
        self.rows.push(Row { coeffs, rhs });
        Ok(())
    }

    /// `a_r . x - b_r` for every row.
    pub fn residuals(&self, x: &[S]) -> Vec<S> {
        self.rows
            .iter()
            .map(|row| {
                let lhs: S = row
                    .coeffs
                    .iter()
                    .map(|(j, a)| a.clone() * x[*j].clone())
                    .sum();
                lhs - row.rhs.clone()
            })
            .collect()
    }

    pub fn max_abs_residual(&self, x: &[S]) -> S {
        self.residuals(x)
            .into_iter()
            .map(|r| r.abs())
            .fold(S::zero(), |a, b| if b > a { b } else { a })
    }

    /// Feasibility of `x`: nonnegative and every residual negligible.
    pub fn is_satisfied_by(&self, x: &[S]) -> bool {
        x.len() == self.n_vars
            && x.iter().all(|v| !v.is_strictly_negative())
            && self.residuals(x).iter().all(Scalar::is_negligible)
    }
}

struct Tableau<S> {
    /// `rows x (cols + 1)`; the last entry of each row is its right-hand side.
    t: Vec<Vec<S>>,
    /// Reduced costs; last entry is minus the current objective value.
    d: Vec<S>,
    basis: Vec<usize>,
    cols: usize,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j].clone();
        for v in self.t[r].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() / p.clone();
            }
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let f = row[j].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
        }
        if !self.d[j].is_zero() {
            let f = self.d[j].clone();
            for (v, pv) in self.d.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
        }
        self.basis[r] = j;
    }

    /// Runs primal simplex over columns `0..allowed` until optimal.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let rhs = self.cols;
        loop {
            let Some(j) = (0..allowed).find(|&j| self.d[j].is_strictly_negative()) else {
                return Ok(());
            };
            let mut best: Option<(usize, S)> = None;
            for r in 0..self.t.len() {
                let a = &self.t[r][j];
                if !a.is_strictly_positive() {
                    continue;
                }
                let ratio = self.t[r][rhs].clone() / a.clone();
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        if ratio < bv && !(bv.clone() - ratio.clone()).is_negligible()
                            || ((ratio.clone() - bv.clone()).is_negligible()
                                && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, j);
        }
    }
}

/// Optimizes `objective . x` over `{x >= 0 : sys}`.
pub fn lp_solve<S: Scalar>(
    sys: &LinearSystem<S>,
    objective: &[S],
    sense: Sense,
) -> Result<LpSolution<S>> {
    let n = sys.n_vars;
    if objective.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "objective has {} entries for {n} variables",
            objective.len()
        )));
    }
    let m = sys.rows.len();
    let cols = n + m;

    // Phase 1: one artificial per row, minimize their sum.
    let mut t = Vec::with_capacity(m);
    for (r, row) in sys.rows.iter().enumerate() {
        let mut dense = vec![S::zero(); cols + 1];
        for (j, a) in &row.coeffs {
            dense[*j] = dense[*j].clone() + a.clone();
        }
        dense[cols] = row.rhs.clone();
        if dense[cols].is_negative() {
            for v in dense.iter_mut() {
                *v = -v.clone();
            }
        }
        dense[n + r] = S::one();
        t.push(dense);
    }
    let mut d = vec![S::zero(); cols + 1];
    for row in &t {
        for j in 0..n {
            d[j] = d[j].clone() - row[j].clone();
        }
        d[cols] = d[cols].clone() - row[cols].clone();
    }
    let mut tab = Tableau {
        t,
        d,
        basis: (n..n + m).collect(),
        cols,
    };
    tab.optimize(n)?;
    let infeasibility = -tab.d[cols].clone();
    if infeasibility.is_strictly_positive() {
        return Err(Error::Infeasible);
    }

    // Drive artificials out of the basis; rows that cannot pivot are redundant.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.t[r][j].is_negligible()) {
                tab.pivot(r, j);
                r += 1;
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }

    // Phase 2 on the structural columns.
    let cost: Vec<S> = match sense {
        Sense::Min => objective.to_vec(),
        Sense::Max => objective.iter().map(|c| -c.clone()).collect(),
    };
    let mut d = vec![S::zero(); cols + 1];
    d[..n].clone_from_slice(&cost);
    for (row, &b) in tab.t.iter().zip(&tab.basis) {
        let cb = &cost[b];
        if cb.is_zero() {
            continue;
        }
        for j in 0..n {
            d[j] = d[j].clone() - cb.clone() * row[j].clone();
        }
        d[cols] = d[cols].clone() - cb.clone() * row[cols].clone();
    }
    tab.d = d;
    tab.optimize(n)?;

    let mut x = vec![S::zero(); n];
    for (row, &b) in tab.t.iter().zip(&tab.basis) {
        x[b] = row[cols].clone();
    }
    let value = objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c.clone() * v.clone())
        .sum();
    Ok(LpSolution { value, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    /// Transport polytope rows for an `a x b` instance, variables row-major.
    fn transport_system<S: Scalar>(mu: &[S], nu: &[S]) -> LinearSystem<S> {
        let (a, b) = (mu.len(), nu.len());
        let mut sys = LinearSystem::new(a * b);
        for (i, w) in mu.iter().enumerate() {
            sys.push_row((0..b).map(|j| (i * b + j, S::one())).collect(), w.clone())
                .unwrap();
        }
        for (j, w) in nu.iter().enumerate() {
            sys.push_row((0..a).map(|i| (i * b + j, S::one())).collect(), w.clone())
                .unwrap();
        }
        sys
    }

    #[test]
    fn dirac_marginals_single_point() {
        let sys = transport_system(&[q(1, 1)], &[q(1, 1)]);
        let sol = lp_solve(&sys, &[q(3, 1)], Sense::Min).unwrap();
        assert_eq!(sol.x, vec![q(1, 1)]);
        assert_eq!(sol.value, q(3, 1));
    }

    #[test]
    fn identical_uniform_marginals_cost_zero() {
        let u = [q(1, 2), q(1, 2)];
        let sys = transport_system(&u, &u);
        let cost = [q(0, 1), q(1, 1), q(1, 1), q(0, 1)];
        let sol = lp_solve(&sys, &cost, Sense::Min).unwrap();
        assert_eq!(sol.value, q(0, 1));
        assert_eq!(sol.x, vec![q(1, 2), q(0, 1), q(0, 1), q(1, 2)]);
    }

    #[test]
    fn birkhoff_square_vertices() {
        // Vertices of the 2x2 polytope with (1/2,1/2) marginals are the
        // diagonal and anti-diagonal; costs 0 and 1 respectively.
        let u = [q(1, 2), q(1, 2)];
        let sys = transport_system(&u, &u);
        let cost = [q(0, 1), q(1, 1), q(1, 1), q(0, 1)];
        assert_eq!(lp_solve(&sys, &cost, Sense::Max).unwrap().value, q(1, 1));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut sys = LinearSystem::<Rational>::new(1);
        sys.push_row(vec![(0, q(1, 1))], q(-1, 1)).unwrap();
        assert_eq!(lp_solve(&sys, &[q(1, 1)], Sense::Min), Err(Error::Infeasible));

        let mut sys = LinearSystem::<Rational>::new(2);
        sys.push_row(vec![(0, q(1, 1)), (1, q(-1, 1))], q(0, 1)).unwrap();
        assert_eq!(
            lp_solve(&sys, &[q(1, 1), q(0, 1)], Sense::Max),
            Err(Error::Unbounded)
        );
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let u = [q(1, 3), q(2, 3)];
        let mut sys = transport_system(&u, &u);
        sys.push_row((0..4).map(|j| (j, q(1, 1))).collect(), q(1, 1)).unwrap();
        let sol = lp_solve(&sys, &[q(0, 1), q(1, 1), q(1, 1), q(0, 1)], Sense::Min).unwrap();
        assert_eq!(sol.value, q(0, 1));
        assert!(sys.is_satisfied_by(&sol.x));
    }

    #[test]
    fn float_mode_agrees_with_exact() {
        let mu = [q(1, 5), q(3, 10), q(1, 2)];
        let nu = [q(1, 4), q(1, 4), q(1, 2)];
        let cost: Vec<Rational> = (0..9).map(|k| q(((k * 7) % 5) as i64, 3)).collect();
        let exact = lp_solve(&transport_system(&mu, &nu), &cost, Sense::Min).unwrap();
        let muf: Vec<f64> = mu.iter().map(Scalar::to_f64).collect();
        let nuf: Vec<f64> = nu.iter().map(Scalar::to_f64).collect();
        let costf: Vec<f64> = cost.iter().map(Scalar::to_f64).collect();
        let float = lp_solve(&transport_system(&muf, &nuf), &costf, Sense::Min).unwrap();
        assert!((float.value - Scalar::to_f64(&exact.value)).abs() < 1e-7);
    }
}
