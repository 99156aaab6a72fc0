//! Seeded generators for small random instances.
//!
//! All randomness flows through [`Rng`], ChaCha8 seeded with
//! `seed_from_u64`, so every instance is a pure function of its seed.
//! Weights are small positive integers normalized to rationals.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::CostTable;
use crate::error::Result;
use crate::measure::{DiscreteMeasure, FiniteSpace};
use crate::path::{AdaptedMap, JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::Rational;
use crate::stopping::{RandomizedStoppingTime, StoppingTime, Time};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest horizon and alphabet size drawn by the generators.
pub const MAX_HORIZON: usize = 3;
pub const MAX_ALPHABET: usize = 3;

const Y_LABELS: [&str; MAX_ALPHABET] = ["a", "b", "c"];
const X_LABELS: [&str; MAX_ALPHABET] = ["0", "1", "2"];

/// Positive integer weights in `1..=max` normalized to sum 1.
pub fn random_weights(rng: &mut Rng, k: usize, max: i64) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=max)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| Rational::new(w.into(), total.into())).collect()
}

fn random_space(rng: &mut Rng, n: usize, labels: &[&str]) -> Result<PathSpace> {
    let alphabets = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=labels.len());
            FiniteSpace::labelled(&labels[..k]).map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    PathSpace::new(alphabets)
}

/// `Y` and `X` path spaces over a common random horizon.
pub fn random_spaces(rng: &mut Rng) -> Result<(PathSpace, PathSpace)> {
    let n = rng.gen_range(1..=MAX_HORIZON);
    Ok((random_space(rng, n, &Y_LABELS)?, random_space(rng, n, &X_LABELS)?))
}

/// Random weights on a random nonempty subset of the paths.
pub fn random_path_measure(rng: &mut Rng, space: &PathSpace) -> Result<PathMeasure> {
    let paths = space.paths();
    let mut chosen: Vec<Path> = paths.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
    if chosen.is_empty() {
        chosen.push(paths.choose(rng).expect("nonempty space").clone());
    }
    let w = random_weights(rng, chosen.len(), 4);
    PathMeasure::new(space.clone(), chosen.into_iter().zip(w))
}

/// Uniformly random table on every `Y` prefix.
pub fn random_adapted_map(rng: &mut Rng, ys: &PathSpace, xs: &PathSpace) -> Result<AdaptedMap> {
    let steps = (1..=ys.horizon())
        .map(|n| {
            let k = xs.alphabet(n - 1).len();
            ys.prefixes(n).into_iter().map(|p| (p, rng.gen_range(0..k))).collect()
        })
        .collect();
    AdaptedMap::new(ys.clone(), xs.clone(), steps)
}

/// A map of the full `Y` path, generally not adapted.
fn random_path_map(rng: &mut Rng, ys: &PathSpace, xs: &PathSpace) -> BTreeMap<Path, Path> {
    ys.paths()
        .into_iter()
        .map(|y| {
            let x = (0..xs.horizon()).map(|n| rng.gen_range(0..xs.alphabet(n).len())).collect();
            (y, x)
        })
        .collect()
}

/// How a random joint law was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    /// One adapted map.
    Adapted,
    /// Mixture of adapted maps.
    AdaptedMixture,
    /// `X` independent of `Y`.
    Product,
    /// Mixture of full-path maps.
    PathMixture,
    /// Random weights on random pairs.
    Generic,
    /// Adapted map mixed with a full-path map.
    Perturbed,
}

impl LawKind {
    pub const ALL: [LawKind; 6] = [
        LawKind::Adapted,
        LawKind::AdaptedMixture,
        LawKind::Product,
        LawKind::PathMixture,
        LawKind::Generic,
        LawKind::Perturbed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LawKind::Adapted => "adapted",
            LawKind::AdaptedMixture => "adapted_mixture",
            LawKind::Product => "product",
            LawKind::PathMixture => "path_mixture",
            LawKind::Generic => "generic",
            LawKind::Perturbed => "perturbed",
        }
    }

    /// Whether every law of this kind is compatible by construction.
    pub fn compatible_by_construction(self) -> bool {
        matches!(self, LawKind::Adapted | LawKind::AdaptedMixture | LawKind::Product)
    }
}

fn tabulate(f: &AdaptedMap) -> Result<BTreeMap<Path, Path>> {
    f.y_space.paths().into_iter().map(|y| Ok((y.clone(), f.apply(&y)?))).collect()
}

/// A random joint law of the given kind on fresh random spaces.
pub fn random_law(rng: &mut Rng, kind: LawKind) -> Result<JointPathLaw> {
    let (ys, xs) = random_spaces(rng)?;
    let mu = random_path_measure(rng, &ys)?;
    let maps = match kind {
        LawKind::Adapted => vec![tabulate(&random_adapted_map(rng, &ys, &xs)?)?],
        LawKind::AdaptedMixture => {
            let k = rng.gen_range(2..=3);
            (0..k).map(|_| tabulate(&random_adapted_map(rng, &ys, &xs)?)).collect::<Result<_>>()?
        }
        LawKind::Product => {
            let nu = random_path_measure(rng, &xs)?;
            return JointPathLaw::product(&mu, &nu);
        }
        LawKind::PathMixture => {
            let k = rng.gen_range(1..=3);
            (0..k).map(|_| random_path_map(rng, &ys, &xs)).collect()
        }
        LawKind::Generic => {
            let pairs: Vec<(Path, Path)> = ys
                .paths()
                .into_iter()
                .flat_map(|y| xs.paths().into_iter().map(move |x| (y.clone(), x)))
                .collect();
            let mut chosen: Vec<_> = pairs.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
            if chosen.is_empty() {
                chosen.push(pairs.choose(rng).expect("nonempty").clone());
            }
            let w = random_weights(rng, chosen.len(), 4);
            let entries = chosen.into_iter().zip(w).map(|((y, x), w)| (y, x, w));
            return JointPathLaw::new(ys, xs, entries);
        }
        LawKind::Perturbed => vec![
            tabulate(&random_adapted_map(rng, &ys, &xs)?)?,
            random_path_map(rng, &ys, &xs),
        ],
    };
    let w = random_weights(rng, maps.len(), 4);
    let mut entries = Vec::new();
    for (map, wi) in maps.iter().zip(&w) {
        for (y, m) in mu.support() {
            entries.push((y.clone(), map[y].clone(), m * wi));
        }
    }
    JointPathLaw::new(ys, xs, entries)
}

/// Stops at the first prefix drawn into a random stopping set, else never.
pub fn random_pure_stopping_time(rng: &mut Rng, ys: &PathSpace) -> Result<StoppingTime> {
    let big_n = ys.horizon();
    let mut stop: BTreeMap<Path, bool> = BTreeMap::new();
    for n in 1..=big_n {
        for p in ys.prefixes(n) {
            stop.insert(p, rng.gen_bool(0.4));
        }
    }
    let rule = ys
        .paths()
        .into_iter()
        .map(|y| {
            let t = (1..=big_n).find(|&n| stop[&y[..n]]).map_or(Time::Infinity, Time::At);
            (y, t)
        })
        .collect();
    StoppingTime::new(ys.clone(), rule)
}

/// How a random stopping instance was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauKind {
    Pure,
    /// Mixture of pure stopping times.
    Mixture,
    /// The same time law on every path.
    Independent,
    /// Independent random rows, generally not a randomized stopping time.
    Generic,
}

impl TauKind {
    pub const ALL: [TauKind; 4] = [TauKind::Pure, TauKind::Mixture, TauKind::Independent, TauKind::Generic];

    pub fn name(self) -> &'static str {
        match self {
            TauKind::Pure => "pure",
            TauKind::Mixture => "mixture",
            TauKind::Independent => "independent",
            TauKind::Generic => "generic",
        }
    }
}

pub fn random_tau(rng: &mut Rng, kind: TauKind) -> Result<(RandomizedStoppingTime, PathMeasure)> {
    let n = rng.gen_range(1..=MAX_HORIZON);
    let ys = random_space(rng, n, &Y_LABELS)?;
    let mu = random_path_measure(rng, &ys)?;
    let tau = match kind {
        TauKind::Pure => random_pure_stopping_time(rng, &ys)?.lift(),
        TauKind::Mixture => {
            let k = rng.gen_range(2..=3);
            let w = random_weights(rng, k, 4);
            let sts = (0..k).map(|_| random_pure_stopping_time(rng, &ys)).collect::<Result<Vec<_>>>()?;
            let kernel = ys
                .paths()
                .into_iter()
                .map(|y| {
                    let mut row = vec![Rational::from_integer(0.into()); n + 1];
                    for (st, wi) in sts.iter().zip(&w) {
                        row[st.at(&y)?.slot(n)] += wi;
                    }
                    Ok((y, row))
                })
                .collect::<Result<_>>()?;
            RandomizedStoppingTime::new(ys, kernel)?
        }
        TauKind::Independent => RandomizedStoppingTime::independent(ys, random_weights(rng, n + 1, 4))?,
        TauKind::Generic => {
            let kernel = ys.paths().into_iter().map(|y| (y, random_weights(rng, n + 1, 4))).collect();
            RandomizedStoppingTime::new(ys, kernel)?
        }
    };
    Ok((tau, mu))
}

/// Costs `k / 4` with `k` in `-8..=8` on every pair of paths.
pub fn random_cost(rng: &mut Rng, ys: &PathSpace, xs: &PathSpace) -> CostTable {
    let mut entries = BTreeMap::new();
    for y in ys.paths() {
        for x in xs.paths() {
            let k: i64 = rng.gen_range(-8..=8);
            if k != 0 {
                entries.insert((y.clone(), x), Rational::new(k.into(), 4.into()));
            }
        }
    }
    CostTable { entries }
}

/// Marginals with weights in `1..=5` and costs `k / 2`, `k` in `0..=9`.
pub fn random_transport(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
) -> Result<(DiscreteMeasure, DiscreteMeasure, Vec<Vec<Rational>>)> {
    let mu = DiscreteMeasure::new(Arc::new(FiniteSpace::midpoint_grid(rows)?), random_weights(rng, rows, 5))?;
    let nu = DiscreteMeasure::new(Arc::new(FiniteSpace::midpoint_grid(cols)?), random_weights(rng, cols, 5))?;
    let cost = (0..rows)
        .map(|_| (0..cols).map(|_| Rational::new(rng.gen_range(0i64..=9).into(), 2.into())).collect())
        .collect();
    Ok((mu, nu, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::is_compatible;
    use rand::RngCore;

    #[test]
    fn stream_test_vectors() {
        let cases: [(u64, [u64; 3]); 3] = [
            (0, [0xb585f767a79a3b6c, 0x7746a55fbad8c037, 0xb2fb0d3281e2a6e6]),
            (1, [0x67094cea8ca40db1, 0x149406d8fc0e8e6b, 0x98b82b0336070665]),
            (20240601, [0x4e0dba2d18c04383, 0xd6998c1b86e32b81, 0x0117b5b23d42984a]),
        ];
        for (seed, want) in cases {
            let mut r = rng(seed);
            assert_eq!(want.map(|_| r.next_u64()), want, "seed {seed}");
        }
        let w: Vec<String> = random_weights(&mut rng(0), 4, 6).iter().map(|x| x.to_string()).collect();
        assert_eq!(w, ["5/17", "5/17", "1/17", "6/17"]);
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in LawKind::ALL {
            let a = random_law(&mut rng(7), kind).unwrap();
            let b = random_law(&mut rng(7), kind).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constructive_kinds_are_compatible() {
        let mut r = rng(1);
        for _ in 0..50 {
            for kind in LawKind::ALL.into_iter().filter(|k| k.compatible_by_construction()) {
                assert!(is_compatible(&random_law(&mut r, kind).unwrap()));
            }
        }
    }

    #[test]
    fn stopping_generators() {
        let mut r = rng(2);
        for _ in 0..50 {
            for kind in TauKind::ALL {
                random_tau(&mut r, kind).unwrap();
            }
        }
    }
}
