//! Approximating a compatible joint law by adapted processes.
//!
//! Step `n` looks at the law of `X_n` given the conditioning pair
//! `(X_{1:n-1}, Y_{1:n})` and replaces it by a Monge map `g_n` from the
//! conditioning space, built with [`crate::monge`] at a chosen partition
//! level. The adapted map is then assembled recursively:
//! `x_n(y_{1:n}) = g_n(x_{1:n-1}(y_{1:n-1}), y_{1:n})`.
//!
//! The conditioning space lists every `X` prefix (including those of zero
//! mass, which the Monge step extends deterministically) times every
//! positive `Y` prefix, ordered `X`-prefix major and `Y`-prefix minor.
//! Dyadic cells therefore group neighbouring `Y` prefixes that share an `X`
//! history, and the quantile pairing inside a cell spreads the conditional
//! law of `X_n` across those neighbours.
//!
//! Incompatible inputs are refused: limits of adapted laws are always
//! compatible, so no schedule could converge to them.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::compat::check_ci;
use crate::error::{Error, Result};
use crate::measure::{Atom, Coupling, FiniteSpace};
use crate::monge::{dyadic_partitions, finest_representable_level, monge_approximate, MongeMap};
use crate::path::{push_adapted, AdaptedMap, JointPathLaw, Path};
use crate::scalar::Rational;
use crate::stable::{default_family, family_bound, row_oscillation_bound, stable_gap};
use crate::transport::w1_points;

/// Depth of the Lipschitz hierarchy in the reported stable gap.
pub const GAP_FAMILY_LEVELS: usize = 1;

/// Partition level used at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// The deepest level at which the step is representable.
    Finest,
    /// Singleton cells at every step.
    Singleton,
    /// Explicit level per step.
    Levels(Vec<usize>),
}

/// The law of `X_n` against its conditioning pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    /// Step, 1-based.
    pub n: usize,
    /// Conditioning atoms `(x_{1:n-1}, y_{1:n})` in space order.
    pub conditioning: Vec<(Path, Path)>,
    /// Rows: conditioning atoms; columns: the step-`n` `X` alphabet.
    pub coupling: Coupling,
}

impl Lift {
    pub fn position(&self, b: &[usize], a: &[usize]) -> Option<usize> {
        find(&self.conditioning, b, a)
    }
}

pub fn lift_problem(j: &JointPathLaw, n: usize) -> Result<Lift> {
    if n == 0 || n > j.horizon() {
        return Err(Error::LevelOutOfRange { level: n, depth: j.horizon() });
    }
    let ys = j.y_space();
    let xs = j.x_space();
    let y_prefixes: Vec<Path> = j.y_marginal().prefix_masses(n).into_keys().collect();
    let conditioning: Vec<(Path, Path)> = xs
        .prefixes(n - 1)
        .into_iter()
        .flat_map(|b| y_prefixes.iter().map(move |a| (b.clone(), a.clone())))
        .collect();
    let dim = xs.alphabets()[..n - 1].iter().map(|s| s.dim()).sum::<usize>()
        + ys.alphabets()[..n].iter().map(|s| s.dim()).sum::<usize>();
    let atoms = conditioning
        .iter()
        .map(|(b, a)| {
            let mut coord = xs.coords(b);
            coord.extend(ys.coords(a));
            let label = format!("{}|{}", xs.labels(b).join(","), ys.labels(a).join(","));
            Atom::new(label, coord)
        })
        .collect();
    let row_space = Arc::new(FiniteSpace::new(dim, atoms)?);
    let col_space = xs.alphabet(n - 1).clone();
    let mut mass = vec![vec![Rational::zero(); col_space.len()]; row_space.len()];
    for ((y, x), w) in j.support() {
        let i = find(&conditioning, &x[..n - 1], &y[..n]).expect("support prefix is listed");
        mass[i][x[n - 1]] += w;
    }
    Ok(Lift {
        n,
        conditioning,
        coupling: Coupling::new(row_space, col_space, mass)?,
    })
}

fn find(conditioning: &[(Path, Path)], b: &[usize], a: &[usize]) -> Option<usize> {
    conditioning
        .binary_search_by(|(pb, pa)| (pb.as_slice(), pa.as_slice()).cmp(&(b, a)))
        .ok()
}

/// Monge map for one step at the requested level; returns the level used.
pub fn one_step_lift(lift: &Lift, level: Option<usize>) -> Result<(MongeMap, usize)> {
    let parts = dyadic_partitions(lift.coupling.row_space().clone());
    let k = match level {
        Some(k) => k.min(parts.depth()),
        None => finest_representable_level(&lift.coupling, &parts)
            .ok_or(Error::Granularity { level: 0, cell: 0 })?,
    };
    let (map, _) = monge_approximate(&lift.coupling, &parts, k)?;
    Ok((map, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedApprox {
    pub map: AdaptedMap,
    pub law: JointPathLaw,
    /// Partition level used at each step.
    pub levels: Vec<usize>,
    /// Stable gap against the input over the default path family.
    pub stable_gap: Rational,
    /// Largest row-oscillation bound over the same family.
    pub bound: Rational,
    /// W1 between the joint laws on the concatenated coordinates.
    pub w1_gap: f64,
}

pub fn approximate_adapted(j: &JointPathLaw, schedule: &Schedule) -> Result<AdaptedApprox> {
    let ci = check_ci(j, &Rational::zero());
    if !ci.ok {
        return Err(Error::NotCompatible(ci.max_violation.to_string()));
    }
    let big_n = j.horizon();
    let mu = j.y_marginal();
    let mut steps: Vec<BTreeMap<Path, usize>> = Vec::with_capacity(big_n);
    let mut levels = Vec::with_capacity(big_n);
    for n in 1..=big_n {
        let lift = lift_problem(j, n)?;
        let requested = match schedule {
            Schedule::Finest => None,
            Schedule::Singleton => Some(usize::MAX),
            Schedule::Levels(ls) => Some(*ls.get(n - 1).ok_or_else(|| {
                Error::ShapeMismatch(format!("schedule has {} levels for {big_n} steps", ls.len()))
            })?),
        };
        let (g, k) = one_step_lift(&lift, requested).map_err(|e| match e {
            Error::Granularity { cell, .. } => Error::Granularity { level: n, cell },
            e => e,
        })?;
        levels.push(k);
        let mut table = BTreeMap::new();
        for a in mu.prefix_masses(n).into_keys() {
            let b: Path = (1..n).map(|s| steps[s - 1][&a[..s]]).collect();
            let i = lift.position(&b, &a).expect("every x prefix is listed");
            table.insert(a, g.targets[i]);
        }
        steps.push(table);
    }
    let map = AdaptedMap::new(j.y_space().clone(), j.x_space().clone(), steps)?;
    let law = push_adapted(&mu, &map)?;
    let (stable_gap, bound) = path_stable_gap(&law, j)?;
    let w1_gap = w1_points(&law.points(), &j.points())?;
    Ok(AdaptedApprox { map, law, levels, stable_gap, bound, w1_gap })
}

/// Stable gap over `1{Y = y} (x) g(X)`, `g` Lipschitz in the `X` coordinates,
/// and the matching row-oscillation bound.
pub fn path_stable_gap(a: &JointPathLaw, b: &JointPathLaw) -> Result<(Rational, Rational)> {
    let cs = JointPathLaw::joint_couplings(&[a, b])?;
    let family = default_family(cs[0].row_space(), cs[0].col_space(), GAP_FAMILY_LEVELS);
    let gap = stable_gap(&cs[0], &cs[1], &family)?;
    let mu = cs[1].marginal(crate::measure::Axis::Row);
    let bound = family_bound(&family, |phi| row_oscillation_bound(phi, &mu));
    Ok((gap, bound))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub stable_gap: Rational,
    pub w1_gap: f64,
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub bound: Rational,
}

/// Runs [`approximate_adapted`] on `family(m)` for each `m`.
pub fn convergence_report(
    family: impl Fn(usize) -> Result<JointPathLaw>,
    m_list: &[usize],
    schedule: &Schedule,
) -> Result<Vec<ConvergenceRow>> {
    m_list
        .iter()
        .map(|&m| {
            let r = approximate_adapted(&family(m)?, schedule)?;
            Ok(ConvergenceRow { m, stable_gap: r.stable_gap, w1_gap: r.w1_gap, bound: r.bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::is_compatible;
    use crate::families::{adapted_threshold, anticipative_coins, independent_product};
    use crate::monge::one_marginal_approx;
    use crate::scalar::q;

    #[test]
    fn adapted_inputs_are_fixed_points() {
        for m in [2, 4, 8] {
            let j = adapted_threshold(m, 2).unwrap();
            for schedule in [Schedule::Singleton, Schedule::Finest] {
                let r = approximate_adapted(&j, &schedule).unwrap();
                assert_eq!(r.law, j);
                assert!(r.stable_gap.is_zero());
                assert_eq!(r.w1_gap, 0.0);
            }
        }
    }

    #[test]
    fn incompatible_inputs_are_refused() {
        assert_eq!(
            approximate_adapted(&anticipative_coins(), &Schedule::Finest),
            Err(Error::NotCompatible("1/2".into()))
        );
    }

    #[test]
    fn independent_bit_alternates() {
        let j = independent_product(4, 1).unwrap();
        let lift = lift_problem(&j, 1).unwrap();
        let (g, k) = one_step_lift(&lift, None).unwrap();
        assert_eq!(g.targets, vec![0, 1, 0, 1]);
        assert_eq!(k, 1);
        assert_eq!(g, one_marginal_approx(&lift.coupling, 1).unwrap());
        let r = approximate_adapted(&j, &Schedule::Finest).unwrap();
        assert!(r.map.steps[0].values().copied().eq([0, 1, 0, 1]));
    }

    #[test]
    fn second_step_does_not_copy_the_first() {
        let j = independent_product(4, 2).unwrap();
        let r = approximate_adapted(&j, &Schedule::Finest).unwrap();
        assert!(is_compatible(&r.law));
        assert!(r.law.is_adapted());
        assert_eq!(r.law.y_marginal(), j.y_marginal());
        // X_2 is spread over both values for each value of X_1.
        let xm = r.law.x_marginal();
        for x in j.x_space().paths() {
            assert_eq!(xm.weight(&x), q(1, 4));
        }
    }

    #[test]
    fn gaps_shrink_with_refinement() {
        let rows = convergence_report(|m| independent_product(m, 2), &[4, 8, 16], &Schedule::Finest).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].w1_gap <= w[0].w1_gap + 1e-12);
        }
        for r in &rows {
            assert!(r.w1_gap > 0.0);
            assert!(r.stable_gap <= r.bound);
        }
    }

    #[test]
    fn lift_rows_carry_the_joint_mass() {
        let j = independent_product(2, 2).unwrap();
        let lift = lift_problem(&j, 2).unwrap();
        assert_eq!(lift.conditioning.len(), 2 * 4);
        assert_eq!(lift.conditioning[0], (vec![0], vec![0, 0]));
        assert_eq!(lift.conditioning[4], (vec![1], vec![0, 0]));
        assert_eq!(*lift.coupling.get(0, 0), q(1, 16));
    }
}
