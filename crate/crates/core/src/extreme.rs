//! Writing a compatible joint law as a finite mixture of adapted laws.
//!
//! For each `Y` path the unit interval is cut into nested pieces: first by
//! the law of `X_1` given `y_1`, then each piece by the law of `X_2` given
//! `(y_{1:2}, x_1)`, and so on, always assigning `X` atoms in canonical
//! order. A point `u` of `[0, 1)` thereby selects `x_n(y_{1:n}, u)` for every
//! step, and for a compatible law that choice depends on `y_{1:n}` only.
//! Cutting `[0, 1)` at the union of all breakpoints leaves intervals on which
//! the selection is one fixed adapted map; the interval lengths are the
//! mixture weights. Incompatible input is rejected with `NotCompatible`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::compat::check_ci;
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::path::{push_adapted, AdaptedMap, JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::Rational;

/// Largest number of adapted maps [`linear_opt_via_extremes`] enumerates.
pub const MAX_ADAPTED_MAPS: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: Rational,
    /// Half-open `[lo, hi)` with `hi - lo = weight`.
    pub interval: (Rational, Rational),
    pub map: AdaptedMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDecomposition {
    pub components: Vec<Component>,
}

/// For one `Y` path: the intervals of `u` and the `X` path each selects.
fn nested_intervals(j: &JointPathLaw, y: &[usize]) -> Vec<(Rational, Rational, Path)> {
    let big_n = j.horizon();
    // Conditional law of X given the full path; for compatible laws the
    // step-n factor depends on y_{1:n} only.
    let mut joint: BTreeMap<&Path, &Rational> = BTreeMap::new();
    for ((yy, x), w) in j.support() {
        if yy.as_slice() == y {
            joint.insert(x, w);
        }
    }
    let mut pieces = vec![(Rational::zero(), Rational::one(), Vec::new())];
    for n in 1..=big_n {
        let mut next = Vec::new();
        for (lo, hi, prefix) in pieces {
            let mut by_atom: BTreeMap<usize, Rational> = BTreeMap::new();
            for (x, w) in &joint {
                if x.starts_with(&prefix) {
                    *by_atom.entry(x[n - 1]).or_insert_with(Rational::zero) += *w;
                }
            }
            let total: Rational = by_atom.values().sum();
            let width = &hi - &lo;
            let mut start = lo.clone();
            for (atom, w) in by_atom {
                let end = &start + &width * w / &total;
                let mut p = prefix.clone();
                p.push(atom);
                next.push((start, end.clone(), p));
                start = end;
            }
        }
        pieces = next;
    }
    pieces
}

pub fn decompose_compatible(j: &JointPathLaw) -> Result<MixtureDecomposition> {
    let ci = check_ci(j, &Rational::zero());
    if !ci.ok {
        return Err(Error::NotCompatible(ci.max_violation.to_string()));
    }
    let mu = j.y_marginal();
    let per_path: BTreeMap<&Path, Vec<(Rational, Rational, Path)>> = mu
        .support()
        .keys()
        .map(|y| (y, nested_intervals(j, y)))
        .collect();
    let mut cuts: BTreeSet<Rational> = per_path
        .values()
        .flat_map(|v| v.iter().map(|(lo, _, _)| lo.clone()))
        .collect();
    cuts.insert(Rational::one());
    let cuts: Vec<Rational> = cuts.into_iter().collect();

    let mut components: Vec<Component> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let mut steps: Vec<BTreeMap<Path, usize>> = vec![BTreeMap::new(); j.horizon()];
        for (y, pieces) in &per_path {
            let (_, _, x) = pieces
                .iter()
                .find(|(a, b, _)| a <= lo && lo < b)
                .expect("pieces cover [0, 1)");
            for (n, table) in steps.iter_mut().enumerate() {
                let prev = table.insert(y[..=n].to_vec(), x[n]);
                debug_assert!(prev.is_none() || prev == Some(x[n]), "compatible laws select adapted maps");
            }
        }
        let map = AdaptedMap::new(j.y_space().clone(), j.x_space().clone(), steps)?;
        match components.last_mut() {
            Some(last) if last.map == map => {
                last.interval.1 = hi.clone();
                last.weight = &last.interval.1 - &last.interval.0;
            }
            _ => components.push(Component {
                weight: hi - lo,
                interval: (lo.clone(), hi.clone()),
                map,
            }),
        }
    }
    Ok(MixtureDecomposition { components })
}

/// `sum_i w_i push_adapted(mu, f_i)`.
pub fn recompose(d: &MixtureDecomposition, mu: &PathMeasure) -> Result<JointPathLaw> {
    let laws = d
        .components
        .iter()
        .map(|c| push_adapted(mu, &c.map))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(Rational, &JointPathLaw)> = d
        .components
        .iter()
        .zip(&laws)
        .map(|(c, l)| (c.weight.clone(), l))
        .collect();
    JointPathLaw::mixture(&parts)
}

/// Number of adapted maps on the positive prefixes of `mu`.
pub fn adapted_map_count(mu: &PathMeasure, x_space: &PathSpace) -> u128 {
    (1..=x_space.horizon()).fold(1u128, |acc, n| {
        let k = x_space.alphabet(n - 1).len() as u128;
        let prefixes = mu.prefix_masses(n).len() as u32;
        acc.saturating_mul(k.saturating_pow(prefixes))
    })
}

/// Every adapted map on the positive prefixes of `mu`, in odometer order.
pub fn enumerate_adapted_maps(mu: &PathMeasure, x_space: &PathSpace) -> Result<Vec<AdaptedMap>> {
    let count = adapted_map_count(mu, x_space);
    if count > MAX_ADAPTED_MAPS {
        return Err(Error::InstanceTooLarge(format!(
            "{count} adapted maps exceed the limit of {MAX_ADAPTED_MAPS}"
        )));
    }
    let slots: Vec<(usize, Path)> = (1..=x_space.horizon())
        .flat_map(|n| mu.prefix_masses(n).into_keys().map(move |a| (n, a)))
        .collect();
    let radix: Vec<usize> = slots.iter().map(|(n, _)| x_space.alphabet(n - 1).len()).collect();
    let mut digits = vec![0usize; slots.len()];
    let mut out = Vec::with_capacity(count as usize);
    loop {
        let mut steps: Vec<BTreeMap<Path, usize>> = vec![BTreeMap::new(); x_space.horizon()];
        for ((n, a), &d) in slots.iter().zip(&digits) {
            steps[n - 1].insert(a.clone(), d);
        }
        out.push(AdaptedMap::new(mu.space().clone(), x_space.clone(), steps)?);
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(out);
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// `sum_y mu(y) c(y, f(y))`.
pub fn adapted_value(
    mu: &PathMeasure,
    f: &AdaptedMap,
    cost: &dyn Fn(&[usize], &[usize]) -> Rational,
) -> Result<Rational> {
    mu.support()
        .iter()
        .map(|(y, w)| Ok(w * cost(y, &f.apply(y)?)))
        .sum()
}

/// Best linear value over adapted laws by exhaustive enumeration; ties go
/// to the first map in odometer order.
pub fn linear_opt_via_extremes(
    mu: &PathMeasure,
    x_space: &PathSpace,
    cost: &dyn Fn(&[usize], &[usize]) -> Rational,
    sense: Sense,
) -> Result<(Rational, AdaptedMap)> {
    let mut best: Option<(Rational, AdaptedMap)> = None;
    for f in enumerate_adapted_maps(mu, x_space)? {
        let v = adapted_value(mu, &f, cost)?;
        let better = match &best {
            None => true,
            Some((b, _)) => match sense {
                Sense::Max => v > *b,
                Sense::Min => v < *b,
            },
        };
        if better {
            best = Some((v, f));
        }
    }
    best.ok_or(Error::EmptyFamily)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::is_compatible;
    use crate::families::{adapted_threshold, anticipative_coins, coin_paths};
    use crate::path::PathMeasure;
    use crate::scalar::q;

    fn coins(n: usize) -> PathSpace {
        coin_paths(n).unwrap()
    }

    #[test]
    fn static_half_half_split() {
        let mu: PathMeasure = PathMeasure::uniform(coins(1));
        let j = JointPathLaw::product(&mu, &PathMeasure::uniform(coins(1))).unwrap();
        let d = decompose_compatible(&j).unwrap();
        assert_eq!(d.components.len(), 2);
        assert_eq!(d.components[0].weight, q(1, 2));
        assert_eq!(d.components[0].map.apply(&[1]).unwrap(), vec![0]);
        assert_eq!(d.components[1].map.apply(&[0]).unwrap(), vec![1]);
        assert_eq!(recompose(&d, &mu).unwrap(), j);
    }

    #[test]
    fn adapted_law_is_a_single_component() {
        let j = adapted_threshold(4, 2).unwrap();
        let d = decompose_compatible(&j).unwrap();
        assert_eq!(d.components.len(), 1);
        assert_eq!(d.components[0].weight, q(1, 1));
        assert_eq!(Some(d.components[0].map.clone()), j.adapted_map());
    }

    #[test]
    fn copy_of_a_random_first_step() {
        let ys = coins(2);
        let entries = ys.paths().into_iter().flat_map(|y| {
            (0..2).map(move |b| (y.clone(), vec![b, b], q(1, 8)))
        });
        let j = JointPathLaw::new(ys.clone(), ys.clone(), entries).unwrap();
        assert_eq!(j.support().len(), 8);
        let d = decompose_compatible(&j).unwrap();
        assert_eq!(d.components.len(), 2);
        assert!(d.components.iter().all(|c| c.weight == q(1, 2)));
        assert_eq!(recompose(&d, &j.y_marginal()).unwrap(), j);
        for c in &d.components {
            let law = push_adapted(&j.y_marginal(), &c.map).unwrap();
            assert!(law.is_adapted() && is_compatible(&law));
        }
    }

    #[test]
    fn two_components_differing_at_one_prefix() {
        let mu: PathMeasure = PathMeasure::uniform(coins(1));
        let f = AdaptedMap::from_fn(coins(1), coins(1), |_| 0).unwrap();
        let g = AdaptedMap::from_fn(coins(1), coins(1), |p| p[0]).unwrap();
        let d = MixtureDecomposition {
            components: vec![
                Component { weight: q(1, 2), interval: (q(0, 1), q(1, 2)), map: f },
                Component { weight: q(1, 2), interval: (q(1, 2), q(1, 1)), map: g },
            ],
        };
        let j = recompose(&d, &mu).unwrap();
        assert_eq!(j.weight(&[0], &[0]), q(1, 2));
        assert_eq!(j.weight(&[1], &[0]), q(1, 4));
        assert_eq!(j.weight(&[1], &[1]), q(1, 4));
    }

    #[test]
    fn refuses_incompatible() {
        assert!(matches!(decompose_compatible(&anticipative_coins()), Err(Error::NotCompatible(_))));
    }

    #[test]
    fn extremes_examples() {
        let mu1: PathMeasure = PathMeasure::uniform(coins(1));
        let (v, f) = linear_opt_via_extremes(&mu1, &coins(1), &|y, x| if x == y { q(1, 1) } else { q(0, 1) }, Sense::Max).unwrap();
        assert_eq!(v, q(1, 1));
        assert_eq!(f.apply(&[1]).unwrap(), vec![1]);

        let (v, _) = linear_opt_via_extremes(&mu1, &coins(1), &|_, _| q(3, 7), Sense::Max).unwrap();
        assert_eq!(v, q(3, 7));

        let mu2: PathMeasure = PathMeasure::uniform(coins(2));
        let (v, _) = linear_opt_via_extremes(&mu2, &coins(2), &|y, x| if x[0] == y[1] { q(1, 1) } else { q(0, 1) }, Sense::Max).unwrap();
        assert_eq!(v, q(1, 2));
        assert_eq!(adapted_map_count(&mu2, &coins(2)), 64);
    }

    #[test]
    fn too_many_maps() {
        let ys = crate::families::grid_paths(8, 3).unwrap();
        let mu: PathMeasure = PathMeasure::uniform(ys);
        assert!(matches!(
            enumerate_adapted_maps(&mu, &coins(3)),
            Err(Error::InstanceTooLarge(_))
        ));
    }
}
