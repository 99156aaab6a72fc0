//! Discrete-time path spaces and joint laws of `(Y, X)` paths.
//!
//! Paths are stored as vectors of atom indices, one per step. Joint laws
//! keep a sparse support keyed by `(y_path, x_path)`; duplicate pairs are
//! merged and zero weights dropped on construction, so two laws are equal
//! iff they assign the same mass to every pair.
//!
//! The auxiliary variable of the compatibility condition is always the full
//! `Y` path: information beyond `Y` can be folded into the last `Y` step.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{Atom, Coupling, FiniteSpace, SpaceRef};
use crate::scalar::{Rational, Scalar};

pub type Path = Vec<usize>;

/// Per-step alphabets over a horizon `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpace {
    alphabets: Vec<SpaceRef>,
}

impl PathSpace {
    pub fn new(alphabets: Vec<SpaceRef>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::InvalidSpace("horizon must be at least 1".into()));
        }
        if alphabets.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidSpace("empty alphabet".into()));
        }
        Ok(PathSpace { alphabets })
    }

    /// The same alphabet at each of `n` steps.
    pub fn repeated(alphabet: SpaceRef, n: usize) -> Result<Self> {
        PathSpace::new(vec![alphabet; n])
    }

    /// Labelled alphabets with evenly spaced one-dimensional coordinates.
    pub fn labelled<S: AsRef<str>>(labels: &[S], n: usize) -> Result<Self> {
        PathSpace::repeated(Arc::new(FiniteSpace::labelled(labels)?), n)
    }

    pub fn horizon(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[SpaceRef] {
        &self.alphabets
    }

    pub fn alphabet(&self, step: usize) -> &SpaceRef {
        &self.alphabets[step]
    }

    /// Number of paths, saturating.
    pub fn path_count(&self) -> usize {
        self.alphabets
            .iter()
            .fold(1usize, |acc, a| acc.saturating_mul(a.len()))
    }

    /// All prefixes of length `len`, in lexicographic atom order.
    pub fn prefixes(&self, len: usize) -> Vec<Path> {
        let mut out = vec![Vec::new()];
        for a in &self.alphabets[..len] {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..a.len()).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn paths(&self) -> Vec<Path> {
        self.prefixes(self.horizon())
    }

    pub fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() != self.horizon() {
            return Err(Error::ShapeMismatch(format!(
                "path of length {} in horizon {}",
                path.len(),
                self.horizon()
            )));
        }
        for (n, (&i, a)) in path.iter().zip(&self.alphabets).enumerate() {
            if i >= a.len() {
                return Err(Error::ShapeMismatch(format!("step {} index {i} out of range", n + 1)));
            }
        }
        Ok(())
    }

    pub fn labels(&self, path: &[usize]) -> Vec<String> {
        path.iter()
            .zip(&self.alphabets)
            .map(|(&i, a)| a.label(i).to_string())
            .collect()
    }

    pub fn parse_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Path> {
        if labels.len() != self.horizon() {
            return Err(Error::Parse(format!(
                "path of length {} in horizon {}",
                labels.len(),
                self.horizon()
            )));
        }
        labels
            .iter()
            .zip(&self.alphabets)
            .map(|(l, a)| {
                a.position(l.as_ref())
                    .ok_or_else(|| Error::Parse(format!("unknown label {:?}", l.as_ref())))
            })
            .collect()
    }

    /// Concatenated coordinates (the sum metric on the product).
    pub fn coords(&self, path: &[usize]) -> Vec<f64> {
        path.iter()
            .zip(&self.alphabets)
            .flat_map(|(&i, a)| a.coord(i).iter().copied())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.alphabets.iter().map(|a| a.dim()).sum()
    }

    /// A finite space whose atoms are the given paths.
    pub fn path_atoms(&self, paths: &[Path]) -> Result<FiniteSpace> {
        let atoms = paths
            .iter()
            .map(|p| Atom::new(self.labels(p).join(","), self.coords(p)))
            .collect();
        FiniteSpace::new(self.dim(), atoms)
    }
}

fn insert_positive<K: Ord, S: Scalar>(map: &mut BTreeMap<K, S>, key: K, w: S) -> Result<()> {
    if w.is_negative() {
        return Err(Error::NegativeWeight {
            index: map.len(),
            weight: format!("{w:?}"),
        });
    }
    let slot = map.entry(key).or_insert_with(S::zero);
    *slot = slot.clone() + w;
    Ok(())
}

fn check_total<'a, S: Scalar>(weights: impl Iterator<Item = &'a S>) -> Result<()> {
    let total: S = weights.sum();
    if total.is_unit_total() {
        Ok(())
    } else {
        Err(Error::NotNormalized(format!("{total:?}")))
    }
}

/// Probability on `Y` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure<S = Rational> {
    space: PathSpace,
    support: BTreeMap<Path, S>,
}

impl<S: Scalar> PathMeasure<S> {
    pub fn new(space: PathSpace, entries: impl IntoIterator<Item = (Path, S)>) -> Result<Self> {
        let mut support = BTreeMap::new();
        for (p, w) in entries {
            space.check_path(&p)?;
            insert_positive(&mut support, p, w)?;
        }
        support.retain(|_, w: &mut S| !w.is_zero());
        check_total(support.values())?;
        Ok(PathMeasure { space, support })
    }

    /// Independent steps with the given per-step laws.
    pub fn product(space: PathSpace, steps: &[Vec<S>]) -> Result<Self> {
        if steps.len() != space.horizon() {
            return Err(Error::ShapeMismatch("one law per step required".into()));
        }
        let entries: Vec<(Path, S)> = space
            .paths()
            .into_iter()
            .map(|p| {
                let w = p.iter().enumerate().fold(S::one(), |acc, (n, &i)| acc * steps[n][i].clone());
                (p, w)
            })
            .collect();
        PathMeasure::new(space, entries)
    }

    /// Uniform on every path.
    pub fn uniform(space: PathSpace) -> Self {
        let count = space.path_count() as i64;
        let support = space
            .paths()
            .into_iter()
            .map(|p| (p, S::from_ratio(1, count)))
            .collect();
        PathMeasure { space, support }
    }

    pub fn space(&self) -> &PathSpace {
        &self.space
    }

    pub fn support(&self) -> &BTreeMap<Path, S> {
        &self.support
    }

    pub fn weight(&self, path: &[usize]) -> S {
        self.support.get(path).cloned().unwrap_or_else(S::zero)
    }

    /// Mass of all paths extending `prefix`.
    pub fn prefix_mass(&self, prefix: &[usize]) -> S {
        self.support
            .iter()
            .filter(|(p, _)| p.starts_with(prefix))
            .map(|(_, w)| w)
            .sum()
    }

    /// Positive-mass prefixes of length `len`, with their masses.
    pub fn prefix_masses(&self, len: usize) -> BTreeMap<Path, S> {
        let mut out: BTreeMap<Path, S> = BTreeMap::new();
        for (p, w) in &self.support {
            let slot = out.entry(p[..len].to_vec()).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        out
    }
}

/// Probability on `Y` paths times `X` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPathLaw<S = Rational> {
    y_space: PathSpace,
    x_space: PathSpace,
    support: BTreeMap<(Path, Path), S>,
}

impl<S: Scalar> JointPathLaw<S> {
    pub fn new(
        y_space: PathSpace,
        x_space: PathSpace,
        entries: impl IntoIterator<Item = (Path, Path, S)>,
    ) -> Result<Self> {
        if y_space.horizon() != x_space.horizon() {
            return Err(Error::ShapeMismatch("y and x horizons differ".into()));
        }
        let mut support = BTreeMap::new();
        for (y, x, w) in entries {
            y_space.check_path(&y)?;
            x_space.check_path(&x)?;
            insert_positive(&mut support, (y, x), w)?;
        }
        support.retain(|_, w: &mut S| !w.is_zero());
        check_total(support.values())?;
        Ok(JointPathLaw { y_space, x_space, support })
    }

    /// `sum_i lambda_i J_i` for laws on common spaces.
    pub fn mixture(parts: &[(S, &JointPathLaw<S>)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyFamily)?.1;
        let mut entries = Vec::new();
        for (lambda, j) in parts {
            if j.y_space != first.y_space || j.x_space != first.x_space {
                return Err(Error::ShapeMismatch("mixture of laws on different spaces".into()));
            }
            for ((y, x), w) in &j.support {
                entries.push((y.clone(), x.clone(), lambda.clone() * w.clone()));
            }
        }
        JointPathLaw::new(first.y_space.clone(), first.x_space.clone(), entries)
    }

    /// Independent coupling of a `Y` law and an `X` law.
    pub fn product(mu: &PathMeasure<S>, nu: &PathMeasure<S>) -> Result<Self> {
        let entries = mu
            .support()
            .iter()
            .flat_map(|(y, a)| {
                nu.support()
                    .iter()
                    .map(move |(x, b)| (y.clone(), x.clone(), a.clone() * b.clone()))
            })
            .collect::<Vec<_>>();
        JointPathLaw::new(mu.space().clone(), nu.space().clone(), entries)
    }

    pub fn y_space(&self) -> &PathSpace {
        &self.y_space
    }

    pub fn x_space(&self) -> &PathSpace {
        &self.x_space
    }

    pub fn horizon(&self) -> usize {
        self.y_space.horizon()
    }

    pub fn support(&self) -> &BTreeMap<(Path, Path), S> {
        &self.support
    }

    pub fn weight(&self, y: &[usize], x: &[usize]) -> S {
        self.support
            .get(&(y.to_vec(), x.to_vec()))
            .cloned()
            .unwrap_or_else(S::zero)
    }

    /// `Y` marginal.
    pub fn y_marginal(&self) -> PathMeasure<S> {
        let mut support: BTreeMap<Path, S> = BTreeMap::new();
        for ((y, _), w) in &self.support {
            let slot = support.entry(y.clone()).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        PathMeasure { space: self.y_space.clone(), support }
    }

    pub fn x_marginal(&self) -> PathMeasure<S> {
        let mut support: BTreeMap<Path, S> = BTreeMap::new();
        for ((_, x), w) in &self.support {
            let slot = support.entry(x.clone()).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        PathMeasure { space: self.x_space.clone(), support }
    }

    /// Marginal of `(Y^{1:ly}, X^{1:lx})`.
    pub fn prefix_marginal(&self, ly: usize, lx: usize) -> BTreeMap<(Path, Path), S> {
        let mut out: BTreeMap<(Path, Path), S> = BTreeMap::new();
        for ((y, x), w) in &self.support {
            let slot = out
                .entry((y[..ly].to_vec(), x[..lx].to_vec()))
                .or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        out
    }

    pub fn to_f64(&self) -> JointPathLaw<f64> {
        JointPathLaw {
            y_space: self.y_space.clone(),
            x_space: self.x_space.clone(),
            support: self
                .support
                .iter()
                .map(|(k, w)| (k.clone(), w.to_f64()))
                .collect(),
        }
    }

    /// Weighted points in the joint ambient space, for W1.
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        self.support
            .iter()
            .map(|((y, x), w)| {
                let mut c = self.y_space.coords(y);
                c.extend(self.x_space.coords(x));
                (c, w.to_f64())
            })
            .collect()
    }

    /// True iff every `x_n` is a function of `y_{1:n}` on the support.
    pub fn is_adapted(&self) -> bool {
        (1..=self.horizon()).all(|n| {
            let mut seen: BTreeMap<&[usize], usize> = BTreeMap::new();
            self.support.keys().all(|(y, x)| {
                *seen.entry(&y[..n]).or_insert(x[n - 1]) == x[n - 1]
            })
        })
    }

    /// The adapted map realised by the support, if the law is adapted.
    pub fn adapted_map(&self) -> Option<AdaptedMap> {
        if !self.is_adapted() {
            return None;
        }
        let steps = (1..=self.horizon())
            .map(|n| {
                self.support
                    .keys()
                    .map(|(y, x)| (y[..n].to_vec(), x[n - 1]))
                    .collect()
            })
            .collect();
        Some(AdaptedMap {
            y_space: self.y_space.clone(),
            x_space: self.x_space.clone(),
            steps,
        })
    }

    /// Common-space couplings of several laws on the same path spaces.
    ///
    /// Rows are the union of the `Y` paths in any support, columns the union
    /// of the `X` paths, both in lexicographic order.
    pub fn joint_couplings(laws: &[&JointPathLaw<S>]) -> Result<Vec<Coupling<S>>> {
        let first = laws.first().ok_or(Error::EmptyFamily)?;
        let mut ys: Vec<Path> = laws
            .iter()
            .flat_map(|j| j.support.keys().map(|(y, _)| y.clone()))
            .collect();
        let mut xs: Vec<Path> = laws
            .iter()
            .flat_map(|j| j.support.keys().map(|(_, x)| x.clone()))
            .collect();
        ys.sort();
        ys.dedup();
        xs.sort();
        xs.dedup();
        let row_space = Arc::new(first.y_space.path_atoms(&ys)?);
        let col_space = Arc::new(first.x_space.path_atoms(&xs)?);
        laws.iter()
            .map(|j| {
                if j.y_space != first.y_space || j.x_space != first.x_space {
                    return Err(Error::ShapeMismatch("laws on different path spaces".into()));
                }
                let triplets = j.support.iter().map(|((y, x), w)| {
                    (
                        ys.binary_search(y).expect("collected"),
                        xs.binary_search(x).expect("collected"),
                        w.clone(),
                    )
                });
                Coupling::from_triplets(row_space.clone(), col_space.clone(), triplets)
            })
            .collect()
    }
}

/// Which information the `X` prefix is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// The whole `Y` path.
    FullPath,
    /// Only `y_{1:n}`.
    Prefix,
}

/// Law of `x_{1:n}` given some `Y` information.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixConditional<S = Rational> {
    pub conditioning: Path,
    pub dist: BTreeMap<Path, S>,
}

/// Law of `x_{1:n}` given the full path `y` or given `y_{1:n}`.
pub fn prefix_conditional<S: Scalar>(
    j: &JointPathLaw<S>,
    n: usize,
    y: &[usize],
    mode: Conditioning,
) -> Result<PrefixConditional<S>> {
    if n == 0 || n > j.horizon() {
        return Err(Error::LevelOutOfRange { level: n, depth: j.horizon() });
    }
    let conditioning: Path = match mode {
        Conditioning::FullPath => y.to_vec(),
        Conditioning::Prefix => y[..n].to_vec(),
    };
    let mut dist: BTreeMap<Path, S> = BTreeMap::new();
    let mut total = S::zero();
    for ((yy, x), w) in &j.support {
        if yy.starts_with(&conditioning) {
            let slot = dist.entry(x[..n].to_vec()).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
            total = total + w.clone();
        }
    }
    if total.is_zero() {
        return Err(Error::NullPath);
    }
    for w in dist.values_mut() {
        *w = w.clone() / total.clone();
    }
    Ok(PrefixConditional { conditioning, dist })
}

/// `x_n = f_n(y_{1:n})`, tabulated on the prefixes where it is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedMap {
    pub y_space: PathSpace,
    pub x_space: PathSpace,
    /// `steps[n-1]` maps `y_{1:n}` to an atom of the step-`n` `X` alphabet.
    pub steps: Vec<BTreeMap<Path, usize>>,
}

impl AdaptedMap {
    pub fn new(
        y_space: PathSpace,
        x_space: PathSpace,
        steps: Vec<BTreeMap<Path, usize>>,
    ) -> Result<Self> {
        if steps.len() != y_space.horizon() || x_space.horizon() != y_space.horizon() {
            return Err(Error::ShapeMismatch("one table per step required".into()));
        }
        for (n, table) in steps.iter().enumerate() {
            for (prefix, &x) in table {
                if prefix.len() != n + 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "step {} reads a prefix of length {}",
                        n + 1,
                        prefix.len()
                    )));
                }
                if x >= x_space.alphabet(n).len() {
                    return Err(Error::ShapeMismatch(format!("step {} target {x} out of range", n + 1)));
                }
            }
        }
        Ok(AdaptedMap { y_space, x_space, steps })
    }

    /// Builds a map from a rule on prefixes, tabulated on every prefix.
    pub fn from_fn(
        y_space: PathSpace,
        x_space: PathSpace,
        rule: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let steps = (1..=y_space.horizon())
            .map(|n| y_space.prefixes(n).into_iter().map(|p| {
                let x = rule(&p);
                (p, x)
            }).collect())
            .collect();
        AdaptedMap::new(y_space, x_space, steps)
    }

    pub fn apply(&self, y: &[usize]) -> Result<Path> {
        self.steps
            .iter()
            .enumerate()
            .map(|(n, table)| {
                table
                    .get(&y[..=n])
                    .copied()
                    .ok_or_else(|| Error::UndefinedPrefix(y[..=n].to_vec()))
            })
            .collect()
    }

    /// Drops entries for prefixes outside the support of `mu`.
    pub fn restrict<S: Scalar>(&self, mu: &PathMeasure<S>) -> AdaptedMap {
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(n, table)| {
                let prefixes = mu.prefix_masses(n + 1);
                table
                    .iter()
                    .filter(|(p, _)| prefixes.contains_key(*p))
                    .map(|(p, &x)| (p.clone(), x))
                    .collect()
            })
            .collect();
        AdaptedMap {
            y_space: self.y_space.clone(),
            x_space: self.x_space.clone(),
            steps,
        }
    }
}

/// `mu(dy) delta_{f(y)}(dx)`.
pub fn push_adapted<S: Scalar>(mu: &PathMeasure<S>, f: &AdaptedMap) -> Result<JointPathLaw<S>> {
    if mu.space() != &f.y_space {
        return Err(Error::ShapeMismatch("map and measure on different path spaces".into()));
    }
    let entries = mu
        .support()
        .iter()
        .map(|(y, w)| Ok((y.clone(), f.apply(y)?, w.clone())))
        .collect::<Result<Vec<_>>>()?;
    JointPathLaw::new(f.y_space.clone(), f.x_space.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;
    use num_traits::One;

    pub(crate) fn coins(n: usize) -> PathSpace {
        PathSpace::labelled(&["h", "t"], n).unwrap()
    }

    /// Two fair coins with `X_1 = Y_2` and `X_2 = Y_2`.
    fn anticipative() -> JointPathLaw {
        let entries = coins(2)
            .paths()
            .into_iter()
            .map(|y| {
                let x = vec![y[1], y[1]];
                (y, x, q(1, 4))
            })
            .collect::<Vec<_>>();
        JointPathLaw::new(coins(2), coins(2), entries).unwrap()
    }

    #[test]
    fn path_space_enumeration() {
        let s = coins(2);
        assert_eq!(s.paths(), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(s.parse_labels(&["t", "h"]).unwrap(), vec![1, 0]);
        assert!(s.parse_labels(&["x", "h"]).is_err());
        assert!(PathSpace::new(vec![]).is_err());
        assert_eq!(s.coords(&[1, 0]), vec![1.0, 0.0]);
    }

    #[test]
    fn construction_merges_and_validates() {
        let j = JointPathLaw::new(
            coins(1),
            coins(1),
            vec![(vec![0], vec![0], q(1, 4)), (vec![0], vec![0], q(1, 4)), (vec![1], vec![1], q(1, 2))],
        )
        .unwrap();
        assert_eq!(j.support().len(), 2);
        assert_eq!(j.weight(&[0], &[0]), q(1, 2));
        assert!(matches!(
            JointPathLaw::new(coins(1), coins(1), vec![(vec![0], vec![0], q(1, 2))]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            JointPathLaw::new(coins(1), coins(1), vec![(vec![0], vec![0], q(3, 2)), (vec![1], vec![0], q(-1, 2))]),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn y_marginal_cases() {
        let j = JointPathLaw::new(coins(2), coins(2), vec![(vec![0, 1], vec![1, 1], q(1, 1))]).unwrap();
        assert_eq!(j.y_marginal().support().len(), 1);
        assert!(j.y_marginal().weight(&[0, 1]).is_one());

        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let copy = AdaptedMap::from_fn(coins(2), coins(2), |p| p[p.len() - 1]).unwrap();
        let constant = AdaptedMap::from_fn(coins(2), coins(2), |_| 0).unwrap();
        let a = push_adapted(&mu, &copy).unwrap();
        let b = push_adapted(&mu, &constant).unwrap();
        assert_eq!(a.y_marginal(), mu);
        let mix = JointPathLaw::mixture(&[(q(1, 3), &a), (q(2, 3), &b)]).unwrap();
        assert_eq!(mix.y_marginal(), mu);
    }

    #[test]
    fn prefix_conditionals() {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let copy = AdaptedMap::from_fn(coins(2), coins(2), |p| p[p.len() - 1]).unwrap();
        let j = push_adapted(&mu, &copy).unwrap();
        for mode in [Conditioning::FullPath, Conditioning::Prefix] {
            let c = prefix_conditional(&j, 1, &[1, 0], mode).unwrap();
            assert_eq!(c.dist.len(), 1);
            assert!(c.dist[&vec![1]].is_one());
        }

        let prod = JointPathLaw::product(&mu, &PathMeasure::product(coins(2), &[vec![q(1, 3), q(2, 3)], vec![q(1, 2), q(1, 2)]]).unwrap()).unwrap();
        for mode in [Conditioning::FullPath, Conditioning::Prefix] {
            let c = prefix_conditional(&prod, 1, &[0, 1], mode).unwrap();
            assert_eq!(c.dist[&vec![0]], q(1, 3));
            assert_eq!(c.dist[&vec![1]], q(2, 3));
        }

        let anti = anticipative();
        let full = prefix_conditional(&anti, 1, &[0, 1], Conditioning::FullPath).unwrap();
        assert_eq!(full.dist.len(), 1);
        assert!(full.dist[&vec![1]].is_one());
        let pre = prefix_conditional(&anti, 1, &[0, 1], Conditioning::Prefix).unwrap();
        assert_eq!(pre.dist[&vec![0]], q(1, 2));
        assert_eq!(pre.dist[&vec![1]], q(1, 2));

        let point = JointPathLaw::new(coins(2), coins(2), vec![(vec![0, 0], vec![0, 0], q(1, 1))]).unwrap();
        assert_eq!(prefix_conditional(&point, 1, &[1, 1], Conditioning::FullPath), Err(Error::NullPath));
    }

    #[test]
    fn push_adapted_examples() {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let copy = AdaptedMap::from_fn(coins(2), coins(2), |p| p[p.len() - 1]).unwrap();
        let diag = push_adapted(&mu, &copy).unwrap();
        assert!(diag.support().keys().all(|(y, x)| y == x));
        assert!(diag.is_adapted());

        let constant = AdaptedMap::from_fn(coins(2), coins(2), |_| 1).unwrap();
        let c = push_adapted(&mu, &constant).unwrap();
        assert_eq!(c.x_marginal().support().len(), 1);

        let xor = AdaptedMap::from_fn(coins(2), coins(2), |p| if p.len() == 1 { p[0] } else { p[0] ^ p[1] }).unwrap();
        let j = push_adapted(&mu, &xor).unwrap();
        assert_eq!(j.support().len(), 4);
        assert!(j.support().values().all(|w| *w == q(1, 4)));
        for y in coins(2).paths() {
            for n in 1..=2 {
                let c = prefix_conditional(&j, n, &y, Conditioning::Prefix).unwrap();
                assert_eq!(c.dist.len(), 1);
            }
        }
        assert_eq!(j.adapted_map().unwrap().apply(&[1, 1]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn undefined_prefix() {
        let mu: PathMeasure = PathMeasure::uniform(coins(1));
        let partial = AdaptedMap::new(coins(1), coins(1), vec![[(vec![0], 0)].into_iter().collect()]).unwrap();
        assert_eq!(push_adapted(&mu, &partial), Err(Error::UndefinedPrefix(vec![1])));
    }

    #[test]
    fn anticipative_is_not_adapted() {
        assert!(!anticipative().is_adapted());
        assert!(anticipative().adapted_map().is_none());
    }

    #[test]
    fn joint_couplings_share_spaces() {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let a = push_adapted(&mu, &AdaptedMap::from_fn(coins(2), coins(2), |_| 0).unwrap()).unwrap();
        let b = anticipative();
        let cs = JointPathLaw::joint_couplings(&[&a, &b]).unwrap();
        assert_eq!(cs[0].shape(), cs[1].shape());
        assert_eq!(cs[0].shape(), (4, 2));
        assert_eq!(*cs[0].get(0, 0), q(1, 4));
    }
}
