//! Test functionals that are measurable in the first coordinate and
//! Lipschitz in the second, and the finite "stable gap" pseudo-metric they
//! induce between couplings.

pub mod rotation;

use crate::error::{Error, Result};
use crate::measure::{Coupling, DiscreteMeasure, FiniteSpace};
use crate::scalar::{max_of, Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctionKind<S> {
    /// Full table `phi[i][j]` over the product of the two spaces.
    Table(Vec<Vec<S>>),
    /// `f(x) g(y)`.
    Product { f: Vec<S>, g: Vec<S> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<S = Rational> {
    pub kind: TestFunctionKind<S>,
    /// `|phi| <= bound` everywhere.
    pub bound: S,
}

impl<S: Scalar> TestFunction<S> {
    pub fn table(values: Vec<Vec<S>>) -> Self {
        let bound = max_of(values.iter().flatten().map(|v| v.abs())).unwrap_or_else(S::zero);
        TestFunction {
            kind: TestFunctionKind::Table(values),
            bound,
        }
    }

    pub fn product(f: Vec<S>, g: Vec<S>) -> Self {
        let bf = max_of(f.iter().map(|v| v.abs())).unwrap_or_else(S::zero);
        let bg = max_of(g.iter().map(|v| v.abs())).unwrap_or_else(S::zero);
        TestFunction {
            kind: TestFunctionKind::Product { f, g },
            bound: bf * bg,
        }
    }

    /// The indicator of the diagonal `{x = y}` on an `n x n` product.
    pub fn diagonal(n: usize) -> Self {
        TestFunction::table(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { S::one() } else { S::zero() })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn constant(rows: usize, cols: usize, c: S) -> Self {
        TestFunction::product(vec![S::one(); rows], vec![c; cols])
    }

    pub fn shape(&self) -> (usize, usize) {
        match &self.kind {
            TestFunctionKind::Table(t) => (t.len(), t.first().map_or(0, Vec::len)),
            TestFunctionKind::Product { f, g } => (f.len(), g.len()),
        }
    }

    pub fn value(&self, i: usize, j: usize) -> S {
        match &self.kind {
            TestFunctionKind::Table(t) => t[i][j].clone(),
            TestFunctionKind::Product { f, g } => f[i].clone() * g[j].clone(),
        }
    }

    /// `max_j |phi(i, j)|` style sup over the continuous coordinate for a
    /// fixed measurable coordinate.
    fn row_oscillation(&self, i: usize) -> S {
        let (_, cols) = self.shape();
        let vals = (0..cols).map(|j| self.value(i, j));
        let lo = vals.clone().fold(None, |a: Option<S>, v| {
            Some(match a {
                None => v,
                Some(a) => if v < a { v } else { a },
            })
        });
        let hi = max_of(vals);
        match (lo, hi) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => S::zero(),
        }
    }
}

/// `sum_ij P[i][j] phi(i, j)`, exact whenever `S` is.
pub fn eval_test<S: Scalar>(p: &Coupling<S>, phi: &TestFunction<S>) -> Result<S> {
    let (rows, cols) = p.shape();
    if phi.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "test function {:?} vs coupling {:?}",
            phi.shape(),
            (rows, cols)
        )));
    }
    Ok(match &phi.kind {
        TestFunctionKind::Table(t) => p
            .mass()
            .iter()
            .zip(t)
            .flat_map(|(pr, tr)| pr.iter().zip(tr).map(|(a, b)| a.clone() * b.clone()))
            .sum(),
        TestFunctionKind::Product { f, g } => p
            .mass()
            .iter()
            .zip(f)
            .filter(|(_, fi)| !fi.is_zero())
            .map(|(row, fi)| {
                let inner: S = row.iter().zip(g).map(|(a, b)| a.clone() * b.clone()).sum();
                fi.clone() * inner
            })
            .sum(),
    })
}

/// `max_phi |E_P phi - E_Q phi|` over a nonempty family.
pub fn stable_gap<S: Scalar>(
    p: &Coupling<S>,
    q: &Coupling<S>,
    family: &[TestFunction<S>],
) -> Result<S> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch("couplings on different spaces".into()));
    }
    let mut gap = S::zero();
    for phi in family {
        let d = (eval_test(p, phi)? - eval_test(q, phi)?).abs();
        if d > gap {
            gap = d;
        }
    }
    Ok(gap)
}

/// Thresholds of an `levels`-deep dyadic hierarchy: `k / 2^l` for
/// `l = 1..=levels`, `k = 1..=2^l`, first occurrence kept.
pub fn dyadic_thresholds(levels: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for l in 1..=levels {
        let denom = (1u64 << l) as f64;
        for k in 1..=(1u64 << l) {
            let t = k as f64 / denom;
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

/// Products `1{x = a} (x) g` where `a` runs over the atoms of `x_space` and
/// `g` over 1-Lipschitz functions of the `y_space` coordinates: each
/// coordinate `y_c`, then the clipped hinges `max(y_c, t)` at every dyadic
/// threshold `t` (the threshold `1` is the constant function and is only
/// emitted once per atom).
pub fn default_family<S: Scalar>(
    x_space: &FiniteSpace,
    y_space: &FiniteSpace,
    levels: usize,
) -> Vec<TestFunction<S>> {
    let thresholds = dyadic_thresholds(levels);
    let d = y_space.dim();
    let mut gs: Vec<Vec<S>> = Vec::new();
    for c in 0..d {
        gs.push(
            (0..y_space.len())
                .map(|j| S::from_f64(y_space.coord(j)[c]))
                .collect(),
        );
    }
    for c in 0..d {
        for &t in &thresholds {
            if t == 1.0 && c > 0 {
                continue;
            }
            gs.push(
                (0..y_space.len())
                    .map(|j| S::from_f64(y_space.coord(j)[c].max(t)))
                    .collect(),
            );
        }
    }
    let mut family = Vec::with_capacity(x_space.len() * gs.len());
    for a in 0..x_space.len() {
        let f: Vec<S> = (0..x_space.len())
            .map(|i| if i == a { S::one() } else { S::zero() })
            .collect();
        for g in &gs {
            family.push(TestFunction::product(f.clone(), g.clone()));
        }
    }
    family
}

/// Bound on `|E_P phi - E_Q phi|` valid whenever `P` and `Q` agree on
/// `sigma(cells) (x) everything`: `sum_A mu(A) max_j osc_{i in A} phi(i, j)`.
pub fn cell_oscillation_bound<S: Scalar>(
    phi: &TestFunction<S>,
    mu: &DiscreteMeasure<S>,
    cells: &[std::ops::Range<usize>],
) -> S {
    let (_, cols) = phi.shape();
    let mut total = S::zero();
    for cell in cells {
        if cell.len() < 2 {
            continue;
        }
        let mass: S = mu.weights()[cell.clone()].iter().sum();
        if mass.is_zero() {
            continue;
        }
        let osc = match &phi.kind {
            TestFunctionKind::Product { f, g } => {
                let fs = &f[cell.clone()];
                let hi = max_of(fs.iter().cloned()).unwrap_or_else(S::zero);
                let lo = -max_of(fs.iter().map(|v| -v.clone())).unwrap_or_else(S::zero);
                let gmax = max_of(g.iter().map(|v| v.abs())).unwrap_or_else(S::zero);
                (hi - lo) * gmax
            }
            TestFunctionKind::Table(t) => max_of((0..cols).map(|j| {
                let col = t[cell.clone()].iter().map(|r| r[j].clone());
                let hi = max_of(col.clone()).unwrap_or_else(S::zero);
                let lo = -max_of(col.map(|v| -v)).unwrap_or_else(S::zero);
                hi - lo
            }))
            .unwrap_or_else(S::zero),
        };
        total = total + mass * osc;
    }
    total
}

/// Bound on `|E_P phi - E_Q phi|` valid whenever `P` and `Q` share the
/// first marginal `mu`: `sum_i mu(i) osc_j phi(i, j)`.
pub fn row_oscillation_bound<S: Scalar>(phi: &TestFunction<S>, mu: &DiscreteMeasure<S>) -> S {
    mu.weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(i, w)| w.clone() * phi.row_oscillation(i))
        .sum()
}

/// Largest per-function bound over a family.
pub fn family_bound<S: Scalar>(
    family: &[TestFunction<S>],
    bound: impl Fn(&TestFunction<S>) -> S,
) -> S {
    max_of(family.iter().map(bound)).unwrap_or_else(S::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Axis;
    use crate::scalar::q;
    use num_traits::Signed;
    use std::sync::Arc;

    fn two() -> Arc<FiniteSpace> {
        Arc::new(FiniteSpace::labelled(&["a", "b"]).unwrap())
    }

    fn sample() -> Coupling {
        Coupling::new(two(), two(), vec![vec![q(1, 4), q(1, 4)], vec![q(0, 1), q(1, 2)]]).unwrap()
    }

    fn diag() -> Coupling {
        Coupling::new(two(), two(), vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 2)]]).unwrap()
    }

    fn anti() -> Coupling {
        Coupling::new(two(), two(), vec![vec![q(0, 1), q(1, 2)], vec![q(1, 2), q(0, 1)]]).unwrap()
    }

    #[test]
    fn constant_integrates_to_one() {
        let one = TestFunction::constant(2, 2, q(1, 1));
        assert_eq!(eval_test(&sample(), &one).unwrap(), q(1, 1));
    }

    #[test]
    fn diagonal_indicator_on_diagonal_coupling() {
        assert_eq!(eval_test(&diag(), &TestFunction::diagonal(2)).unwrap(), q(1, 1));
    }

    #[test]
    fn product_picks_single_entry() {
        let phi = TestFunction::product(vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]);
        assert_eq!(eval_test(&sample(), &phi).unwrap(), q(1, 4));
    }

    #[test]
    fn shape_mismatch() {
        let phi = TestFunction::<Rational>::diagonal(3);
        assert!(matches!(eval_test(&sample(), &phi), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gap_cases() {
        let fam = vec![TestFunction::diagonal(2)];
        assert_eq!(stable_gap(&sample(), &sample(), &fam).unwrap(), q(0, 1));
        assert_eq!(stable_gap(&diag(), &anti(), &fam).unwrap(), q(1, 1));
        let ones = vec![TestFunction::constant(2, 2, q(1, 1))];
        assert_eq!(stable_gap(&diag(), &sample(), &ones).unwrap(), q(0, 1));
        assert_eq!(stable_gap(&diag(), &anti(), &[]), Err(Error::EmptyFamily));
    }

    #[test]
    fn default_family_layout() {
        let x = FiniteSpace::labelled(&["a", "b"]).unwrap();
        let y = FiniteSpace::labelled(&["u", "v", "w"]).unwrap();
        let fam: Vec<TestFunction<Rational>> = default_family(&x, &y, 1);
        let thresholds = dyadic_thresholds(1);
        assert_eq!(thresholds, vec![0.5, 1.0]);
        assert_eq!(fam.len(), 2 * (1 + thresholds.len()));
        // First member: 1{x = a} (x) y_1.
        assert_eq!(
            fam[0],
            TestFunction::product(vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 2), q(1, 1)])
        );
        // Contains f (x) 1 for each atom indicator, and its value is the row mass.
        let p = Coupling::new(
            Arc::new(x.clone()),
            Arc::new(y.clone()),
            vec![vec![0.25, 0.25, 0.0], vec![0.0, 0.125, 0.375]],
        )
        .unwrap();
        let fam_f: Vec<TestFunction<f64>> = default_family(&x, &y, 1);
        let mu = p.marginal(Axis::Row);
        for a in 0..2 {
            let mut f = vec![0.0; 2];
            f[a] = 1.0;
            let ind = TestFunction::product(f, vec![1.0; 3]);
            assert!(fam_f.contains(&ind));
            assert_eq!(eval_test(&p, &ind).unwrap(), mu.weights()[a]);
        }
    }

    #[test]
    fn bounds_dominate_gaps() {
        let mu = sample().marginal(Axis::Row);
        let fam: Vec<TestFunction<Rational>> = default_family(&two(), &two(), 2);
        for phi in &fam {
            let d = (eval_test(&sample(), phi).unwrap() - eval_test(&diag(), phi).unwrap()).abs();
            assert!(d <= row_oscillation_bound(phi, &mu));
            assert!(d <= cell_oscillation_bound(phi, &mu, &[0..2]));
        }
    }
}
