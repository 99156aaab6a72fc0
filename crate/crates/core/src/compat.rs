//! Compatibility of a joint path law: `X` reveals nothing about the future
//! of `Y`.
//!
//! Four independent checkers, each testing a different characterization:
//!
//! - [`check_ci`]: `X_{1:n}` is conditionally independent of `Y` given
//!   `Y_{1:n}`. Violation: total variation between the two conditional laws
//!   of `X_{1:n}`.
//! - [`check_mgale`]: the closed martingales `E[1{Y = y} | Y_{1:t}]` remain
//!   martingales in the joint filtration. Violation: largest one-step drift.
//! - [`check_proj`]: conditioning a function of `Y` on `(Y_{1:n}, X_{1:n})`
//!   gives the same as conditioning on `Y_{1:n}`. Violation: total variation
//!   between the two conditional laws of `Y`.
//! - [`check_reverse`]: conditioning an event of `(Y_{1:n}, X_{1:n})` on
//!   `Y_{1:n}` gives the same as conditioning on `Y`. Violation: largest
//!   pointwise difference.
//!
//! On finite spaces indicators span all bounded functions, so each check is
//! exact. [`causal_constraints`] writes the same condition as a linear
//! system in the unknown weights `P(y, x)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::LinearSystem;
use crate::path::{JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Step, 1-based.
    pub n: usize,
    pub y: Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Path>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport<S = Rational> {
    pub ok: bool,
    pub max_violation: S,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Checker {
    Ci,
    Mgale,
    Proj,
    Reverse,
}

impl Checker {
    pub const ALL: [Checker; 4] = [Checker::Ci, Checker::Mgale, Checker::Proj, Checker::Reverse];

    pub fn name(self) -> &'static str {
        match self {
            Checker::Ci => "ci",
            Checker::Mgale => "mgale",
            Checker::Proj => "proj",
            Checker::Reverse => "reverse",
        }
    }

    pub fn run<S: Scalar>(self, j: &JointPathLaw<S>, tol: &S) -> CheckReport<S> {
        match self {
            Checker::Ci => check_ci(j, tol),
            Checker::Mgale => check_mgale(j, tol),
            Checker::Proj => check_proj(j, tol),
            Checker::Reverse => check_reverse(j, tol),
        }
    }
}

/// Tracks the largest violation and the first place it was attained.
struct Worst<S> {
    value: S,
    witness: Option<Witness>,
}

impl<S: Scalar> Worst<S> {
    fn new() -> Self {
        Worst { value: S::zero(), witness: None }
    }

    fn offer(&mut self, v: S, witness: impl FnOnce() -> Witness) {
        if v > self.value {
            self.value = v;
            self.witness = Some(witness());
        }
    }

    fn finish(self, tol: &S) -> CheckReport<S> {
        let ok = self.value <= *tol;
        CheckReport {
            ok,
            max_violation: self.value,
            witness: if ok { None } else { self.witness },
        }
    }
}

fn add<K: Ord, S: Scalar>(map: &mut BTreeMap<K, S>, key: K, w: &S) {
    let slot = map.entry(key).or_insert_with(S::zero);
    *slot = slot.clone() + w.clone();
}

/// `key -> (sub_key -> mass)` with `key = (y[..ly], x[..lx])` split as asked.
fn nested<S: Scalar>(
    j: &JointPathLaw<S>,
    outer: impl Fn(&Path, &Path) -> Path,
    inner: impl Fn(&Path, &Path) -> Path,
) -> BTreeMap<Path, BTreeMap<Path, S>> {
    let mut out: BTreeMap<Path, BTreeMap<Path, S>> = BTreeMap::new();
    for ((y, x), w) in j.support() {
        add(out.entry(outer(y, x)).or_default(), inner(y, x), w);
    }
    out
}

fn total<S: Scalar>(m: &BTreeMap<Path, S>) -> S {
    m.values().sum()
}

/// Total variation between two unnormalized laws after normalization.
fn tv_normalized<S: Scalar>(a: &BTreeMap<Path, S>, b: &BTreeMap<Path, S>) -> S {
    let (ta, tb) = (total(a), total(b));
    let keys: BTreeSet<&Path> = a.keys().chain(b.keys()).collect();
    let zero = S::zero();
    let sum: S = keys
        .into_iter()
        .map(|k| {
            let pa = a.get(k).unwrap_or(&zero).clone() / ta.clone();
            let pb = b.get(k).unwrap_or(&zero).clone() / tb.clone();
            (pa - pb).abs()
        })
        .sum();
    sum / S::from_ratio(2, 1)
}

/// Concatenation used as a composite map key.
fn key(a: &[usize], b: &[usize]) -> Path {
    let mut k = Vec::with_capacity(a.len() + b.len() + 1);
    k.extend_from_slice(a);
    k.push(usize::MAX);
    k.extend_from_slice(b);
    k
}

fn split_key(k: &[usize]) -> (Path, Path) {
    let pos = k.iter().position(|&v| v == usize::MAX).expect("composite key");
    (k[..pos].to_vec(), k[pos + 1..].to_vec())
}

/// Conditional independence of `X_{1:n}` and `Y` given `Y_{1:n}`.
pub fn check_ci<S: Scalar>(j: &JointPathLaw<S>, tol: &S) -> CheckReport<S> {
    let mut worst = Worst::new();
    for n in 1..=j.horizon() {
        let full = nested(j, |y, _| y.clone(), |_, x| x[..n].to_vec());
        let prefix = nested(j, |y, _| y[..n].to_vec(), |_, x| x[..n].to_vec());
        for (y, law) in &full {
            let v = tv_normalized(law, &prefix[&y[..n]]);
            worst.offer(v, || Witness { n, y: y.clone(), x: None });
        }
    }
    worst.finish(tol)
}

/// One-step martingale property of `t -> P(Y = y | Y_{1:t})` in the joint
/// filtration, for every path `y`.
pub fn check_mgale<S: Scalar>(j: &JointPathLaw<S>, tol: &S) -> CheckReport<S> {
    let mu = j.y_marginal();
    let big_n = j.horizon();
    let mut worst = Worst::new();
    for t in 1..big_n {
        let mu_t = mu.prefix_masses(t);
        let mu_next = mu.prefix_masses(t + 1);
        // (y_{1:t}, x_{1:t}) -> y_{1:t+1} -> mass
        let g = nested(j, |y, x| key(&y[..t], &x[..t]), |y, _| y[..=t].to_vec());
        for (gk, next) in &g {
            let (yt, xt) = split_key(gk);
            let g_mass = total(next);
            for (ybar, w) in mu.support().iter().filter(|(p, _)| p.starts_with(&yt)) {
                let m_t = w.clone() / mu_t[&yt].clone();
                let m_next = w.clone() / mu_next[&ybar[..=t]].clone();
                let reach = next.get(&ybar[..=t]).cloned().unwrap_or_else(S::zero);
                let drift = (reach / g_mass.clone() * m_next - m_t).abs();
                worst.offer(drift, || Witness { n: t, y: ybar.clone(), x: Some(xt.clone()) });
            }
        }
    }
    worst.finish(tol)
}

/// Law of `Y` given `(Y_{1:n}, X_{1:n})` against its law given `Y_{1:n}`.
pub fn check_proj<S: Scalar>(j: &JointPathLaw<S>, tol: &S) -> CheckReport<S> {
    let mut worst = Worst::new();
    for n in 1..=j.horizon() {
        let by_g = nested(j, |y, x| key(&y[..n], &x[..n]), |y, _| y.clone());
        let by_f = nested(j, |y, _| y[..n].to_vec(), |y, _| y.clone());
        for (gk, law) in &by_g {
            let (yn, xn) = split_key(gk);
            let v = tv_normalized(law, &by_f[&yn]);
            worst.offer(v, || Witness { n, y: yn.clone(), x: Some(xn.clone()) });
        }
    }
    worst.finish(tol)
}

/// `P(X_{1:n} = b | Y_{1:n})` against `P(X_{1:n} = b | Y)`, pointwise.
pub fn check_reverse<S: Scalar>(j: &JointPathLaw<S>, tol: &S) -> CheckReport<S> {
    let mut worst = Worst::new();
    let zero = S::zero();
    for n in 1..=j.horizon() {
        let given_prefix = nested(j, |y, _| y[..n].to_vec(), |_, x| x[..n].to_vec());
        let given_path = nested(j, |y, _| y.clone(), |_, x| x[..n].to_vec());
        for (y, law_full) in &given_path {
            let law_prefix = &given_prefix[&y[..n]];
            let (tf, tp) = (total(law_full), total(law_prefix));
            for b in law_prefix.keys() {
                let pf = law_full.get(b).unwrap_or(&zero).clone() / tf.clone();
                let pp = law_prefix[b].clone() / tp.clone();
                worst.offer((pf - pp).abs(), || Witness { n, y: y.clone(), x: Some(b.clone()) });
            }
        }
    }
    worst.finish(tol)
}

pub fn is_compatible<S: Scalar>(j: &JointPathLaw<S>) -> bool {
    check_ci(j, &S::zero()).ok
}

/// The compatible polytope over a fixed `Y` law, in the variables
/// `P(y, x)` for `y` in the support and `x` any `X` path.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSystem<S = Rational> {
    pub mu: PathMeasure<S>,
    pub x_space: PathSpace,
    pub vars: Vec<(Path, Path)>,
    pub system: LinearSystem<S>,
}

impl<S: Scalar> CausalSystem<S> {
    fn index(&self) -> BTreeMap<&(Path, Path), usize> {
        self.vars.iter().enumerate().map(|(i, v)| (v, i)).collect()
    }

    /// Weights of `j` in variable order; fails if `j` leaves the variables.
    pub fn vector(&self, j: &JointPathLaw<S>) -> Result<Vec<S>> {
        let index = self.index();
        let mut x = vec![S::zero(); self.vars.len()];
        for (k, w) in j.support() {
            let i = index
                .get(k)
                .ok_or_else(|| Error::ShapeMismatch(format!("pair {k:?} is not a variable")))?;
            x[*i] = w.clone();
        }
        Ok(x)
    }

    pub fn law(&self, x: &[S]) -> Result<JointPathLaw<S>> {
        JointPathLaw::new(
            self.mu.space().clone(),
            self.x_space.clone(),
            self.vars
                .iter()
                .zip(x)
                .filter(|(_, w)| !w.is_zero())
                .map(|((y, xp), w)| (y.clone(), xp.clone(), w.clone())),
        )
    }

    /// Adds `sum_y P(y, x) = nu(x)` for every `X` path.
    pub fn fix_x_marginal(&mut self, nu: &PathMeasure<S>) -> Result<()> {
        if nu.space() != &self.x_space {
            return Err(Error::ShapeMismatch("x law on a different path space".into()));
        }
        for xp in self.x_space.paths() {
            let coeffs = self
                .vars
                .iter()
                .enumerate()
                .filter(|(_, (_, x))| *x == xp)
                .map(|(i, _)| (i, S::one()))
                .collect();
            self.system.push_row(coeffs, nu.weight(&xp))?;
        }
        Ok(())
    }
}

/// Marginal rows `sum_x P(y, x) = mu(y)` and, for `n < N`, every `X` prefix
/// `b`, `Y` prefix `a` and path `ybar` extending `a`:
///
/// `sum P(y, x) 1{x_{1:n} = b} 1{y_{1:n} = a} (1{y = ybar} - mu(ybar | a)) / mu(a) = 0`.
pub fn causal_constraints<S: Scalar>(mu: &PathMeasure<S>, x_space: &PathSpace) -> Result<CausalSystem<S>> {
    if mu.space().horizon() != x_space.horizon() {
        return Err(Error::ShapeMismatch("y and x horizons differ".into()));
    }
    let x_paths = x_space.paths();
    let vars: Vec<(Path, Path)> = mu
        .support()
        .keys()
        .flat_map(|y| x_paths.iter().map(move |x| (y.clone(), x.clone())))
        .collect();
    let mut system = LinearSystem::new(vars.len());
    let per_y = x_paths.len();
    for (r, w) in mu.support().values().enumerate() {
        system.push_row((r * per_y..(r + 1) * per_y).map(|i| (i, S::one())).collect(), w.clone())?;
    }
    for n in 1..x_space.horizon() {
        for (a, mu_a) in mu.prefix_masses(n) {
            let extensions: Vec<(&Path, &S)> =
                mu.support().iter().filter(|(p, _)| p.starts_with(&a)).collect();
            for b in x_space.prefixes(n) {
                for (ybar, w_bar) in &extensions {
                    let cond = (*w_bar).clone() / mu_a.clone();
                    let coeffs: Vec<(usize, S)> = vars
                        .iter()
                        .enumerate()
                        .filter(|(_, (y, x))| y.starts_with(&a) && x.starts_with(&b))
                        .map(|(i, (y, _))| {
                            let ind = if y == *ybar { S::one() } else { S::zero() };
                            (i, (ind - cond.clone()) / mu_a.clone())
                        })
                        .filter(|(_, c)| !c.is_zero())
                        .collect();
                    system.push_row(coeffs, S::zero())?;
                }
            }
        }
    }
    Ok(CausalSystem { mu: mu.clone(), x_space: x_space.clone(), vars, system })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::path::{push_adapted, AdaptedMap};
    use crate::scalar::q;
    use num_traits::{One, Zero};

    pub(crate) fn coins(n: usize) -> PathSpace {
        PathSpace::labelled(&["h", "t"], n).unwrap()
    }

    pub(crate) fn anticipative() -> JointPathLaw {
        JointPathLaw::new(
            coins(2),
            coins(2),
            coins(2).paths().into_iter().map(|y| (y.clone(), vec![y[1], y[1]], q(1, 4))),
        )
        .unwrap()
    }

    fn adapted() -> JointPathLaw {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let f = AdaptedMap::from_fn(coins(2), coins(2), |p| p[0]).unwrap();
        push_adapted(&mu, &f).unwrap()
    }

    fn product() -> JointPathLaw {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let nu = PathMeasure::product(coins(2), &[vec![q(1, 3), q(2, 3)], vec![q(1, 4), q(3, 4)]]).unwrap();
        JointPathLaw::product(&mu, &nu).unwrap()
    }

    #[test]
    fn checkers_accept_compatible_laws() {
        for j in [adapted(), product()] {
            for c in Checker::ALL {
                let r = c.run(&j, &Rational::zero());
                assert!(r.ok, "{}", c.name());
                assert!(r.max_violation.is_zero());
                assert!(r.witness.is_none());
            }
        }
    }

    #[test]
    fn checkers_reject_anticipation() {
        let j = anticipative();
        for c in Checker::ALL {
            let r = c.run(&j, &Rational::zero());
            assert!(!r.ok, "{}", c.name());
            assert_eq!(r.max_violation, q(1, 2), "{}", c.name());
            assert_eq!(r.witness.unwrap().n, 1);
        }
    }

    #[test]
    fn float_mode_tolerance() {
        let j = anticipative().to_f64();
        assert!(!check_ci(&j, &1e-9).ok);
        assert!(check_ci(&adapted().to_f64(), &1e-9).ok);
    }

    #[test]
    fn constraints_at_horizon_one_fix_the_marginal_only() {
        let mu: PathMeasure = PathMeasure::uniform(coins(1));
        let sys = causal_constraints(&mu, &coins(1)).unwrap();
        assert_eq!(sys.system.rows().len(), 2);
        assert_eq!(sys.vars.len(), 4);
    }

    #[test]
    fn constraints_on_fair_coins() {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let sys = causal_constraints(&mu, &coins(2)).unwrap();
        let prod = sys.vector(&product()).unwrap();
        assert!(sys.system.is_satisfied_by(&prod));
        let anti = sys.vector(&anticipative()).unwrap();
        assert_eq!(sys.system.max_abs_residual(&anti), q(1, 4));
        assert_eq!(sys.law(&prod).unwrap(), product());
    }

    #[test]
    fn x_marginal_rows() {
        let mu: PathMeasure = PathMeasure::uniform(coins(2));
        let mut sys = causal_constraints(&mu, &coins(2)).unwrap();
        let nu = product().x_marginal();
        sys.fix_x_marginal(&nu).unwrap();
        assert!(sys.system.is_satisfied_by(&sys.vector(&product()).unwrap()));
        assert!(!sys.system.is_satisfied_by(&sys.vector(&adapted()).unwrap()));
    }

    #[test]
    fn mixtures_stay_compatible() {
        let (a, b) = (adapted(), product());
        let mix = JointPathLaw::mixture(&[(q(1, 3), &a), (q(2, 3), &b)]).unwrap();
        assert!(is_compatible(&mix));
        let bad = JointPathLaw::mixture(&[(q(1, 2), &a), (q(1, 2), &anticipative())]).unwrap();
        assert!(!is_compatible(&bad));
        assert!(Rational::one() > Rational::zero());
    }
}
