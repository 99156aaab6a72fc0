//! Monge couplings from nested partitions.
//!
//! Given a coupling `P` with first marginal `mu` and a refining sequence of
//! partitions of the source atoms, level `k` replaces `P` by a Monge coupling
//! `mu(dx) delta_{phi_k(x)}(dy)` that carries exactly the same mass as `P` on
//! every rectangle `A x B` with `A` a level-`k` cell. Inside a cell the map is
//! the quantile (sorted-order) pairing of the cell's atoms with the cell's
//! target measure `P(A x .)`.
//!
//! Atoms cannot be split, so this only works when every cell measure is
//! granular enough for whole source atoms. The canonical regime is `mu`
//! uniform on `m` atoms with `P` a multiple of `1/m` on each cell. Other
//! levels return `Granularity`.

use std::ops::Range;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Axis, Coupling, DiscreteMeasure, SpaceRef};
use crate::scalar::Rational;

/// Nested partitions of `0..n` into contiguous index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    base_space: SpaceRef,
    levels: Vec<Vec<Range<usize>>>,
}

impl PartitionSequence {
    pub fn new(base_space: SpaceRef, levels: Vec<Vec<Range<usize>>>) -> Result<Self> {
        let n = base_space.len();
        if levels.is_empty() {
            return Err(Error::InvalidSpace("partition sequence has no levels".into()));
        }
        for (k, level) in levels.iter().enumerate() {
            let mut next = 0;
            for cell in level {
                if cell.start != next || cell.is_empty() {
                    return Err(Error::InvalidSpace(format!(
                        "level {k} is not a partition of 0..{n} into contiguous nonempty cells"
                    )));
                }
                next = cell.end;
            }
            if next != n {
                return Err(Error::InvalidSpace(format!("level {k} does not cover 0..{n}")));
            }
            if k > 0 {
                let coarse = &levels[k - 1];
                let refines = level
                    .iter()
                    .all(|c| coarse.iter().any(|a| a.start <= c.start && c.end <= a.end));
                if !refines {
                    return Err(Error::InvalidSpace(format!("level {k} does not refine level {}", k - 1)));
                }
            }
        }
        if levels.last().is_some_and(|l| l.iter().any(|c| c.len() != 1)) {
            return Err(Error::InvalidSpace("last level must separate all atoms".into()));
        }
        Ok(PartitionSequence { base_space, levels })
    }

    pub fn base_space(&self) -> &SpaceRef {
        &self.base_space
    }

    pub fn levels(&self) -> &[Vec<Range<usize>>] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Result<&[Range<usize>]> {
        self.levels
            .get(k)
            .map(Vec::as_slice)
            .ok_or(Error::LevelOutOfRange { level: k, depth: self.levels.len() - 1 })
    }

    /// Index of the last level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Repeated halving: each cell of size `s > 1` splits into sizes
/// `ceil(s/2)` and `floor(s/2)`, until every cell is a singleton.
pub fn dyadic_partitions(space: SpaceRef) -> PartitionSequence {
    let n = space.len();
    let mut levels = vec![vec![0..n]];
    while levels.last().unwrap().iter().any(|c| c.len() > 1) {
        let next = levels
            .last()
            .unwrap()
            .iter()
            .flat_map(|c| {
                if c.len() > 1 {
                    let mid = c.start + c.len().div_ceil(2);
                    vec![c.start..mid, mid..c.end]
                } else {
                    vec![c.clone()]
                }
            })
            .collect();
        levels.push(next);
    }
    PartitionSequence { base_space: space, levels }
}

/// Source atoms whose mass straddles a boundary of the target quantiles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    /// Indices relative to the cell.
    pub split_atoms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MongeMap {
    pub from_space: SpaceRef,
    pub to_space: SpaceRef,
    pub targets: Vec<usize>,
}

impl MongeMap {
    pub fn new(from_space: SpaceRef, to_space: SpaceRef, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != from_space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {} source atoms",
                targets.len(),
                from_space.len()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= to_space.len()) {
            return Err(Error::ShapeMismatch(format!("target {t} out of range")));
        }
        Ok(MongeMap { from_space, to_space, targets })
    }

    /// `mu(dx) delta_{phi(x)}(dy)`.
    pub fn coupling(&self, mu: &DiscreteMeasure) -> Result<Coupling> {
        Coupling::from_triplets(
            mu.space().clone(),
            self.to_space.clone(),
            mu.weights()
                .iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, w)| (i, self.targets[i], w.clone())),
        )
    }

    pub fn pushforward(&self, mu: &DiscreteMeasure) -> DiscreteMeasure {
        let mut w = vec![Rational::zero(); self.to_space.len()];
        for (i, m) in mu.weights().iter().enumerate() {
            w[self.targets[i]] += m;
        }
        DiscreteMeasure::new(self.to_space.clone(), w).expect("pushforward of a probability")
    }
}

/// Quantile pairing of source masses with target masses, both in atom order.
///
/// Source atom `i` occupies `[C_{i-1}, C_i)` of the cumulative source mass
/// and goes to the target whose cumulative interval contains it. Zero-mass
/// atoms go to the target at their position. Returns the target index of
/// every source atom, or the atoms that would have to be split.
pub fn cell_transport(source: &[Rational], target: &[Rational]) -> Result<Vec<usize>> {
    let source_mass: Rational = source.iter().sum();
    let target_mass: Rational = target.iter().sum();
    if source_mass != target_mass {
        return Err(Error::MassMismatch {
            source_mass: source_mass.to_string(),
            target_mass: target_mass.to_string(),
        });
    }
    let last_positive = target.iter().rposition(|t| !t.is_zero());
    let mut out = Vec::with_capacity(source.len());
    let mut split = Vec::new();
    let mut j = 0;
    let mut target_hi = target.first().cloned().unwrap_or_else(Rational::zero);
    let mut lo = Rational::zero();
    for (i, s) in source.iter().enumerate() {
        // Advance to the target interval containing `lo`.
        while target_hi <= lo && j + 1 < target.len() {
            j += 1;
            target_hi += &target[j];
        }
        let hi = &lo + s;
        if s.is_zero() {
            out.push(if target_hi > lo { j } else { last_positive.unwrap_or(0) });
        } else {
            if hi > target_hi {
                split.push(i);
            }
            out.push(j);
        }
        lo = hi;
    }
    if split.is_empty() {
        Ok(out)
    } else {
        Err(Error::NotRepresentable(SplitPlan { split_atoms: split }))
    }
}

/// The cell measures `P(A x .)` for the cells of one level.
fn cell_measures(p: &Coupling, cells: &[Range<usize>]) -> Vec<Vec<Rational>> {
    let cols = p.shape().1;
    cells
        .iter()
        .map(|cell| {
            let mut nu = vec![Rational::zero(); cols];
            for row in &p.mass()[cell.clone()] {
                for (j, w) in row.iter().enumerate() {
                    nu[j] += w;
                }
            }
            nu
        })
        .collect()
}

/// Level-`k` Monge approximation of `P` and the coupling it induces.
pub fn monge_approximate(
    p: &Coupling,
    parts: &PartitionSequence,
    k: usize,
) -> Result<(MongeMap, Coupling)> {
    if parts.base_space().len() != p.shape().0 {
        return Err(Error::ShapeMismatch("partition is over a different space".into()));
    }
    let cells = parts.level(k)?;
    let mu = p.marginal(Axis::Row);
    let mut targets = vec![0; mu.len()];
    for (c, (cell, nu)) in cells.iter().zip(cell_measures(p, cells)).enumerate() {
        let assigned = cell_transport(&mu.weights()[cell.clone()], &nu).map_err(|e| match e {
            Error::NotRepresentable(_) => Error::Granularity { level: k, cell: c },
            e => e,
        })?;
        targets[cell.clone()].copy_from_slice(&assigned);
    }
    let map = MongeMap::new(p.row_space().clone(), p.col_space().clone(), targets)?;
    let pk = map.coupling(&mu)?;
    Ok((map, pk))
}

/// Level-`k` Monge map for the dyadic partitions of `P`'s source space.
pub fn one_marginal_approx(p: &Coupling, k: usize) -> Result<MongeMap> {
    let parts = dyadic_partitions(p.row_space().clone());
    monge_approximate(p, &parts, k).map(|(map, _)| map)
}

/// Deepest level at which `monge_approximate` succeeds, if any.
pub fn finest_representable_level(p: &Coupling, parts: &PartitionSequence) -> Option<usize> {
    (0..=parts.depth())
        .rev()
        .find(|&k| monge_approximate(p, parts, k).is_ok())
}

/// Depth of the Lipschitz hierarchy used by [`level_table`].
pub const TABLE_FAMILY_LEVELS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub cells: usize,
    pub representable: bool,
    /// Stable gap against `P` over the default family; `None` when the level
    /// is not representable.
    #[serde(serialize_with = "crate::io::ser_opt_rational")]
    pub stable_gap: Option<Rational>,
    /// Largest cell-oscillation bound over the same family.
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub bound: Rational,
    pub w1_gap: Option<f64>,
}

/// Stable and W1 gaps of the level-`k` approximation, for every level.
pub fn level_table(p: &Coupling, parts: &PartitionSequence) -> Result<Vec<LevelRow>> {
    use crate::stable::{cell_oscillation_bound, default_family, family_bound, stable_gap};
    let family = default_family(p.row_space(), p.col_space(), TABLE_FAMILY_LEVELS);
    let mu = p.marginal(Axis::Row);
    let target = p.points();
    (0..=parts.depth())
        .map(|k| {
            let cells = parts.level(k)?;
            let bound = family_bound(&family, |phi| cell_oscillation_bound(phi, &mu, cells));
            let (representable, stable_gap, w1_gap) = match monge_approximate(p, parts, k) {
                Ok((_, pk)) => (
                    true,
                    Some(stable_gap(&pk, p, &family)?),
                    Some(crate::transport::w1_points(&pk.points(), &target)?),
                ),
                Err(Error::Granularity { .. }) => (false, None, None),
                Err(e) => return Err(e),
            };
            Ok(LevelRow { level: k, cells: cells.len(), representable, stable_gap, bound, w1_gap })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::FiniteSpace;
    use crate::scalar::q;
    use crate::stable::{default_family, eval_test, stable_gap, TestFunction};
    use num_traits::One;
    use std::sync::Arc;

    fn grid(m: usize) -> SpaceRef {
        Arc::new(FiniteSpace::midpoint_grid(m).unwrap())
    }

    fn product(m: usize, nu: Vec<Rational>) -> Coupling {
        let mu = DiscreteMeasure::uniform(grid(m));
        let nu = DiscreteMeasure::new(grid(nu.len()), nu).unwrap();
        Coupling::product(&mu, &nu)
    }

    #[test]
    fn level_table_for_independent_coupling() {
        let p = product(8, vec![q(1, 2), q(1, 2)]);
        let rows = level_table(&p, &dyadic_partitions(grid(8))).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[..3].iter().all(|r| r.representable));
        assert!(!rows[3].representable);
        for r in &rows[..3] {
            assert!(r.stable_gap.as_ref().unwrap() <= &r.bound);
        }
        for w in rows[..3].windows(2) {
            assert!(w[1].stable_gap <= w[0].stable_gap);
        }
    }

    #[test]
    fn dyadic_levels() {
        let p = dyadic_partitions(grid(4));
        assert_eq!(p.levels(), &[vec![0..4], vec![0..2, 2..4], vec![0..1, 1..2, 2..3, 3..4]]);
        let p = dyadic_partitions(grid(1));
        assert_eq!(p.levels(), &[vec![0..1]]);
        let p = dyadic_partitions(grid(5));
        assert_eq!(p.levels()[1], vec![0..3, 3..5]);
        assert!(PartitionSequence::new(grid(5), p.levels().to_vec()).is_ok());
    }

    #[test]
    fn partition_validation() {
        assert!(PartitionSequence::new(grid(2), vec![vec![0..1]]).is_err());
        assert!(PartitionSequence::new(grid(2), vec![vec![0..2]]).is_err());
        assert!(PartitionSequence::new(grid(3), vec![vec![0..2, 2..3], vec![0..1, 1..3], vec![0..1, 1..2, 2..3]]).is_err());
    }

    #[test]
    fn cell_transport_examples() {
        assert_eq!(cell_transport(&[q(1, 4), q(1, 4)], &[q(1, 4), q(1, 4)]).unwrap(), vec![0, 1]);
        assert_eq!(cell_transport(&[q(1, 4), q(1, 4)], &[q(1, 2), q(0, 1)]).unwrap(), vec![0, 0]);
        let src = vec![q(1, 8); 4];
        let tgt = vec![q(3, 8), q(1, 8)];
        let got = cell_transport(&src, &tgt).unwrap();
        assert_eq!(got, vec![0, 0, 0, 1]);
        // Oracle: the monotone assignments among all 16 pushing src onto tgt.
        let monotone: Vec<Vec<usize>> = (0..16u32)
            .map(|bits| (0..4).map(|i| ((bits >> i) & 1) as usize).collect::<Vec<_>>())
            .filter(|a: &Vec<usize>| a.windows(2).all(|w| w[0] <= w[1]))
            .filter(|a| {
                let mut push = vec![q(0, 1); 2];
                for &t in a {
                    push[t] += q(1, 8);
                }
                push == tgt
            })
            .collect();
        assert_eq!(monotone, vec![got]);
    }

    #[test]
    fn cell_transport_failures() {
        assert!(matches!(
            cell_transport(&[q(1, 4)], &[q(1, 2)]),
            Err(Error::MassMismatch { .. })
        ));
        match cell_transport(&[q(1, 4), q(1, 4)], &[q(1, 8), q(3, 8)]) {
            Err(Error::NotRepresentable(plan)) => assert_eq!(plan.split_atoms, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_mass_atoms_and_targets() {
        let got = cell_transport(&[q(0, 1), q(1, 2), q(0, 1)], &[q(0, 1), q(1, 2), q(0, 1)]).unwrap();
        assert_eq!(got, vec![1, 1, 1]);
    }

    #[test]
    fn product_level_one() {
        let p = product(4, vec![q(1, 2), q(1, 2)]);
        let parts = dyadic_partitions(p.row_space().clone());
        let (map, pk) = monge_approximate(&p, &parts, 1).unwrap();
        assert_eq!(map.targets, vec![0, 1, 0, 1]);
        for cell in parts.level(1).unwrap() {
            for y in 0..2 {
                let a: Rational = cell.clone().map(|i| pk.get(i, y).clone()).sum();
                let b: Rational = cell.clone().map(|i| p.get(i, y).clone()).sum();
                assert_eq!(a, q(1, 4));
                assert_eq!(a, b);
            }
        }
        assert_eq!(pk.marginal(Axis::Row), p.marginal(Axis::Row));
        assert_eq!(pk.marginal(Axis::Col), p.marginal(Axis::Col));
        assert_eq!(monge_approximate(&p, &parts, 2).unwrap_err(), Error::Granularity { level: 2, cell: 0 });
        assert_eq!(finest_representable_level(&p, &parts), Some(1));
        assert!(matches!(
            monge_approximate(&p, &parts, 3),
            Err(Error::LevelOutOfRange { level: 3, depth: 2 })
        ));
    }

    #[test]
    fn point_target_is_constant() {
        let p = product(4, vec![q(1, 1)]);
        let parts = dyadic_partitions(p.row_space().clone());
        for k in 0..=parts.depth() {
            let (map, pk) = monge_approximate(&p, &parts, k).unwrap();
            assert_eq!(map.targets, vec![0; 4]);
            assert_eq!(pk, p);
        }
    }

    #[test]
    fn monge_input_is_reproduced() {
        let phi = MongeMap::new(grid(4), grid(3), vec![0, 1, 1, 2]).unwrap();
        let mu = DiscreteMeasure::uniform(grid(4));
        let p = phi.coupling(&mu).unwrap();
        let parts = dyadic_partitions(grid(4));
        let (map, pk) = monge_approximate(&p, &parts, parts.depth()).unwrap();
        assert_eq!(map, phi);
        assert_eq!(pk, p);
        let fam: Vec<TestFunction> = default_family(&grid(4), &grid(3), 2);
        assert!(stable_gap(&pk, &p, &fam).unwrap().is_zero());
        assert_eq!(one_marginal_approx(&p, parts.depth()).unwrap(), phi);
    }

    #[test]
    fn level_zero_is_monotone_rearrangement() {
        let p = product(8, vec![q(1, 4), q(1, 2), q(1, 4)]);
        let map = one_marginal_approx(&p, 0).unwrap();
        // Sorted-CDF matching: atom i goes to the first j with F_nu(j) > i/8.
        let cdf = [q(1, 4), q(3, 4), q(1, 1)];
        let expected: Vec<usize> = (0..8)
            .map(|i| cdf.iter().position(|c| *c > q(i, 8)).unwrap())
            .collect();
        assert_eq!(map.targets, expected);
    }

    #[test]
    fn agreement_on_coarse_cells() {
        let p = product(8, vec![q(1, 4), q(3, 4)]);
        let parts = dyadic_partitions(p.row_space().clone());
        let top = finest_representable_level(&p, &parts).unwrap();
        assert_eq!(top, 1);
        for k in 0..=top {
            let (_, pk) = monge_approximate(&p, &parts, k).unwrap();
            for cell in parts.level(k).unwrap() {
                let f: Vec<Rational> = (0..8).map(|i| if cell.contains(&i) { q(1, 1) } else { q(0, 1) }).collect();
                for y in 0..2 {
                    let mut g = vec![q(0, 1); 2];
                    g[y] = Rational::one();
                    let phi = TestFunction::product(f.clone(), g);
                    assert_eq!(eval_test(&pk, &phi).unwrap(), eval_test(&p, &phi).unwrap());
                }
            }
        }
    }
}
