//! Transport and control problems as linear programs.
//!
//! - Kantorovich values over `Pi(mu, nu)` against an exhaustive search over
//!   Monge maps.
//! - Causal values over the compatible polytope of a `Y` law, and the
//!   unconstrained value over all couplings with that first marginal.
//! - A finite control model whose decision is the action path itself: the
//!   relaxed problem optimizes over compatible joint laws, the pure problem
//!   over adapted maps. Linear objectives give equal values; nonlinear ones
//!   are compared on a grid of mixtures.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::compat::causal_constraints;
use crate::error::{Error, Result};
use crate::extreme::{enumerate_adapted_maps, linear_opt_via_extremes};
use crate::lp::{lp_solve, LinearSystem, Sense};
use crate::measure::{Coupling, DiscreteMeasure, FiniteSpace};
use crate::monge::MongeMap;
use crate::path::{push_adapted, JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::{Rational, Scalar};

/// Largest number of partial assignments [`monge_bruteforce`] may visit.
pub const MAX_MONGE_NODES: u64 = 1 << 22;

/// Largest number of adapted maps the nonlinear relaxed search mixes.
pub const MAX_MIXED_MAPS: usize = 256;

/// Interior mixing weights `k / MIX_GRID` of the nonlinear relaxed search.
pub const MIX_GRID: i64 = 8;

/// Solves the Kantorovich problem `min sum c(i, j) P(i, j)` over `Pi(mu, nu)`.
pub fn kantorovich<S: Scalar>(
    mu: &DiscreteMeasure<S>,
    nu: &DiscreteMeasure<S>,
    cost: impl Fn(usize, usize) -> S,
) -> Result<(S, Coupling<S>)> {
    let (r, c) = (mu.len(), nu.len());
    let mut sys = LinearSystem::new(r * c);
    for i in 0..r {
        sys.push_row((0..c).map(|j| (i * c + j, S::one())).collect(), mu.weight(i).clone())?;
    }
    for j in 0..c {
        sys.push_row((0..r).map(|i| (i * c + j, S::one())).collect(), nu.weight(j).clone())?;
    }
    let objective: Vec<S> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    let sol = lp_solve(&sys, &objective, Sense::Min)?;
    let mass = sol.x.chunks(c).map(<[S]>::to_vec).collect();
    let p = Coupling::new(mu.space().clone(), nu.space().clone(), mass)?;
    Ok((sol.value, p))
}

/// L1 distance between atom coordinates, as an exact rational.
pub fn l1_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> impl Fn(usize, usize) -> Rational {
    let a = mu.space().clone();
    let b = nu.space().clone();
    move |i, j| Rational::from_f64(crate::measure::l1(a.coord(i), b.coord(j)))
}

/// Cheapest map pushing `mu` onto `nu` exactly; `None` when no map does.
/// Branches that overfill a target atom are pruned.
pub fn monge_bruteforce(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: impl Fn(usize, usize) -> Rational,
) -> Result<Option<(Rational, MongeMap)>> {
    let (r, c) = (mu.len(), nu.len());
    struct Search<'a, F> {
        mu: &'a [Rational],
        cost: F,
        c: usize,
        remaining: Vec<Rational>,
        current: Vec<usize>,
        best: Option<(Rational, Vec<usize>)>,
        nodes: u64,
    }
    impl<F: Fn(usize, usize) -> Rational> Search<'_, F> {
        fn run(&mut self, i: usize, acc: Rational) -> Result<()> {
            self.nodes += 1;
            if self.nodes > MAX_MONGE_NODES {
                return Err(Error::InstanceTooLarge(format!(
                    "map search exceeds {MAX_MONGE_NODES} partial assignments"
                )));
            }
            if i == self.mu.len() {
                if self.remaining.iter().all(Zero::is_zero)
                    && self.best.as_ref().is_none_or(|(b, _)| acc < *b)
                {
                    self.best = Some((acc, self.current.clone()));
                }
                return Ok(());
            }
            for j in 0..self.c {
                if self.remaining[j] < self.mu[i] {
                    continue;
                }
                self.remaining[j] -= &self.mu[i];
                self.current.push(j);
                let step = &self.mu[i] * (self.cost)(i, j);
                self.run(i + 1, &acc + step)?;
                self.current.pop();
                self.remaining[j] += &self.mu[i];
            }
            Ok(())
        }
    }
    let mut s = Search {
        mu: mu.weights(),
        cost,
        c,
        remaining: nu.weights().to_vec(),
        current: Vec::with_capacity(r),
        best: None,
        nodes: 0,
    };
    s.run(0, Rational::zero())?;
    match s.best {
        None => Ok(None),
        Some((v, targets)) => Ok(Some((v, MongeMap::new(mu.space().clone(), nu.space().clone(), targets)?))),
    }
}

/// Marginal pairs whose Kantorovich and Monge values are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapFamily {
    /// `mu = nu` uniform on `m` grid atoms.
    Diagonal,
    /// `mu` with masses `(2i + 1) / m^2` on the `m`-point grid, `nu = (3/4, 1/4)`
    /// on the two-point grid.
    Independent,
    /// `mu` uniform on `m` grid atoms, `nu = (1/4, 3/4)` on the two-point grid.
    Granularity,
}

impl GapFamily {
    pub const ALL: [GapFamily; 3] = [GapFamily::Diagonal, GapFamily::Independent, GapFamily::Granularity];

    pub fn name(self) -> &'static str {
        match self {
            GapFamily::Diagonal => "diagonal",
            GapFamily::Independent => "independent",
            GapFamily::Granularity => "granularity",
        }
    }

    pub fn marginals(self, m: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let src = Arc::new(FiniteSpace::midpoint_grid(m)?);
        let two = Arc::new(FiniteSpace::midpoint_grid(2)?);
        let r = |a: i64, b: i64| Rational::from_ratio(a, b);
        Ok(match self {
            GapFamily::Diagonal => (DiscreteMeasure::uniform(src.clone()), DiscreteMeasure::uniform(src)),
            GapFamily::Independent => {
                let m2 = (m * m) as i64;
                let w = (0..m as i64).map(|i| r(2 * i + 1, m2)).collect();
                (DiscreteMeasure::new(src, w)?, DiscreteMeasure::new(two, vec![r(3, 4), r(1, 4)])?)
            }
            GapFamily::Granularity => (
                DiscreteMeasure::uniform(src),
                DiscreteMeasure::new(two, vec![r(1, 4), r(3, 4)])?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub m: usize,
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub kantorovich: Rational,
    /// `None` when no Monge map exists.
    #[serde(serialize_with = "crate::io::ser_opt_rational")]
    pub monge: Option<Rational>,
    #[serde(serialize_with = "crate::io::ser_opt_rational")]
    pub gap: Option<Rational>,
}

/// Kantorovich against best Monge value under the L1 cost, for each `m`.
pub fn monge_gap_study(family: GapFamily, m_list: &[usize]) -> Result<Vec<GapRow>> {
    m_list
        .iter()
        .map(|&m| {
            let (mu, nu) = family.marginals(m)?;
            let (kantorovich, _) = kantorovich(&mu, &nu, l1_cost(&mu, &nu))?;
            let monge = monge_bruteforce(&mu, &nu, l1_cost(&mu, &nu))?.map(|(v, _)| v);
            let gap = monge.as_ref().map(|v| v - &kantorovich);
            Ok(GapRow { m, kantorovich, monge, gap })
        })
        .collect()
}

/// Sparse cost table on pairs of paths; missing entries are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostTable {
    pub entries: BTreeMap<(Path, Path), Rational>,
}

impl CostTable {
    pub fn from_fn(ys: &PathSpace, xs: &PathSpace, f: impl Fn(&[usize], &[usize]) -> Rational) -> Self {
        let mut entries = BTreeMap::new();
        for y in ys.paths() {
            for x in xs.paths() {
                let v = f(&y, &x);
                if !v.is_zero() {
                    entries.insert((y.clone(), x), v);
                }
            }
        }
        CostTable { entries }
    }

    pub fn get(&self, y: &[usize], x: &[usize]) -> Rational {
        self.entries
            .get(&(y.to_vec(), x.to_vec()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn expectation(&self, j: &JointPathLaw) -> Rational {
        j.support().iter().map(|((y, x), w)| w * self.get(y, x)).sum()
    }
}

/// Optimum of `E_P c` over the compatible laws with first marginal `mu`.
pub fn causal_value(
    mu: &PathMeasure,
    x_space: &PathSpace,
    cost: &CostTable,
    sense: Sense,
) -> Result<(Rational, JointPathLaw)> {
    let sys = causal_constraints(mu, x_space)?;
    let objective: Vec<Rational> = sys.vars.iter().map(|(y, x)| cost.get(y, x)).collect();
    let sol = lp_solve(&sys.system, &objective, sense)?;
    Ok((sol.value, sys.law(&sol.x)?))
}

/// Same with the `X` marginal fixed as well.
pub fn causal_value_two_marginal(
    mu: &PathMeasure,
    nu: &PathMeasure,
    cost: &CostTable,
    sense: Sense,
) -> Result<(Rational, JointPathLaw)> {
    let mut sys = causal_constraints(mu, nu.space())?;
    sys.fix_x_marginal(nu)?;
    let objective: Vec<Rational> = sys.vars.iter().map(|(y, x)| cost.get(y, x)).collect();
    let sol = lp_solve(&sys.system, &objective, sense)?;
    Ok((sol.value, sys.law(&sol.x)?))
}

/// Optimum of `E_P c` over all laws with first marginal `mu`: the best `x`
/// for each `y` separately.
pub fn unconstrained_value(
    mu: &PathMeasure,
    x_space: &PathSpace,
    cost: &CostTable,
    sense: Sense,
) -> Result<(Rational, JointPathLaw)> {
    let xs = x_space.paths();
    let mut value = Rational::zero();
    let mut entries = Vec::new();
    for (y, w) in mu.support() {
        let mut best: Option<(Rational, &Path)> = None;
        for x in &xs {
            let c = cost.get(y, x);
            let better = match &best {
                None => true,
                Some((b, _)) => match sense {
                    Sense::Min => c < *b,
                    Sense::Max => c > *b,
                },
            };
            if better {
                best = Some((c, x));
            }
        }
        let (c, x) = best.ok_or(Error::EmptyFamily)?;
        value += w * c;
        entries.push((y.clone(), x.clone(), w.clone()));
    }
    Ok((value, JointPathLaw::new(mu.space().clone(), x_space.clone(), entries)?))
}

/// A functional of the joint law of noise and action paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `E_P c`.
    Linear(CostTable),
    /// `(E_P c)^2`.
    SquareMean(CostTable),
    /// `E_P c - lambda Var_P c`.
    MeanVariance { cost: CostTable, lambda: Rational },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Linear(_) => "linear",
            Objective::SquareMean(_) => "square_mean",
            Objective::MeanVariance { .. } => "mean_variance",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Objective::Linear(_))
    }

    pub fn evaluate(&self, j: &JointPathLaw) -> Rational {
        match self {
            Objective::Linear(c) => c.expectation(j),
            Objective::SquareMean(c) => {
                let m = c.expectation(j);
                &m * &m
            }
            Objective::MeanVariance { cost, lambda } => {
                let m = cost.expectation(j);
                let second: Rational = j
                    .support()
                    .iter()
                    .map(|((y, x), w)| {
                        let v = cost.get(y, x);
                        w * &v * &v
                    })
                    .sum();
                &m - lambda * (second - &m * &m)
            }
        }
    }
}

/// Noise law on `Y` paths, action alphabets, and an objective to maximize
/// or minimize.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlModel {
    pub mu: PathMeasure,
    pub actions: PathSpace,
    pub objective: Objective,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlValues {
    /// Optimum over compatible joint laws (grid search when nonlinear).
    pub relaxed: Rational,
    /// Optimum over adapted maps.
    pub pure: Rational,
    /// `relaxed - pure` for maximization, `pure - relaxed` for minimization.
    pub gap: Rational,
}

fn better(sense: Sense, a: &Rational, b: &Rational) -> bool {
    match sense {
        Sense::Max => a > b,
        Sense::Min => a < b,
    }
}

pub fn control_values(model: &ControlModel) -> Result<ControlValues> {
    let (relaxed, pure) = match &model.objective {
        Objective::Linear(cost) => {
            let f = |y: &[usize], x: &[usize]| cost.get(y, x);
            let (pure, _) = linear_opt_via_extremes(&model.mu, &model.actions, &f, model.sense)?;
            let (relaxed, _) = causal_value(&model.mu, &model.actions, cost, model.sense)?;
            (relaxed, pure)
        }
        objective => {
            let maps = enumerate_adapted_maps(&model.mu, &model.actions)?;
            let laws = maps
                .iter()
                .map(|f| push_adapted(&model.mu, f))
                .collect::<Result<Vec<_>>>()?;
            let mut pure: Option<Rational> = None;
            for l in &laws {
                let v = objective.evaluate(l);
                if pure.as_ref().is_none_or(|p| better(model.sense, &v, p)) {
                    pure = Some(v);
                }
            }
            let pure = pure.ok_or(Error::EmptyFamily)?;
            if laws.len() > MAX_MIXED_MAPS {
                return Err(Error::InstanceTooLarge(format!(
                    "{} adapted maps exceed the mixture limit of {MAX_MIXED_MAPS}",
                    laws.len()
                )));
            }
            let mut relaxed = pure.clone();
            for a in 0..laws.len() {
                for b in a + 1..laws.len() {
                    for k in 1..MIX_GRID {
                        let lambda = Rational::from_ratio(k, MIX_GRID);
                        let mix = JointPathLaw::mixture(&[
                            (lambda.clone(), &laws[a]),
                            (Rational::one() - lambda, &laws[b]),
                        ])?;
                        let v = objective.evaluate(&mix);
                        if better(model.sense, &v, &relaxed) {
                            relaxed = v;
                        }
                    }
                }
            }
            (relaxed, pure)
        }
    };
    let gap = match model.sense {
        Sense::Max => &relaxed - &pure,
        Sense::Min => &pure - &relaxed,
    };
    Ok(ControlValues { relaxed, pure, gap })
}
