//! Randomized stopping times on the grid `{1, ..., N, inf}`.
//!
//! A randomized stopping time is a kernel from `Y` paths to times whose
//! conditional CDF at `t` depends on `y_{1:t}` only. Such a kernel is a
//! mixture of pure stopping times: with `F_y` the CDF on path `y`, the rule
//! `A(y, u) = min{t : F_y(t) >= u}` is a pure stopping time for every `u`,
//! and `F_y(t)` is the Lebesgue measure of `{u : A(y, u) <= t}`.
//!
//! Times are measured on the bounded scale `t / (1 + t)` with `inf -> 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::adapted::{approximate_adapted, Schedule};
use crate::compat::{CheckReport, Witness};
use crate::error::{Error, Result};
use crate::families::{bit_paths, grid_paths};
use crate::path::{JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::{Rational, Scalar};
use crate::transport::w1_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Time {
    At(usize),
    #[serde(with = "infinity")]
    Infinity,
}

mod infinity {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected \"inf\", got {s:?}")))
        }
    }
}

impl Time {
    /// `t <= n` for a finite step `n`.
    pub fn by(self, n: usize) -> bool {
        matches!(self, Time::At(t) if t <= n)
    }

    /// `t / (1 + t)`, with `inf -> 1`.
    pub fn bounded(self) -> f64 {
        match self {
            Time::At(t) => t as f64 / (1.0 + t as f64),
            Time::Infinity => 1.0,
        }
    }

    /// Index into a kernel row: `t - 1`, or `N` for infinity.
    pub fn slot(self, horizon: usize) -> usize {
        match self {
            Time::At(t) => t - 1,
            Time::Infinity => horizon,
        }
    }

    pub fn from_slot(slot: usize, horizon: usize) -> Time {
        if slot == horizon {
            Time::Infinity
        } else {
            Time::At(slot + 1)
        }
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::At(t) => write!(f, "{t}"),
            Time::Infinity => write!(f, "inf"),
        }
    }
}

/// Kernel from `Y` paths to `{1, ..., N, inf}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedStoppingTime {
    y_space: PathSpace,
    /// `kernel[y][slot]`, `slot = t - 1` or `N` for infinity.
    kernel: BTreeMap<Path, Vec<Rational>>,
}

impl RandomizedStoppingTime {
    pub fn new(y_space: PathSpace, kernel: BTreeMap<Path, Vec<Rational>>) -> Result<Self> {
        let big_n = y_space.horizon();
        for (y, row) in &kernel {
            y_space.check_path(y)?;
            if row.len() != big_n + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "kernel row has {} entries, expected {}",
                    row.len(),
                    big_n + 1
                )));
            }
            if let Some((index, w)) = row.iter().enumerate().find(|(_, w)| w.is_negative()) {
                return Err(Error::NegativeWeight { index, weight: w.to_string() });
            }
            let total: Rational = row.iter().sum();
            if !total.is_one() {
                return Err(Error::NotNormalized(total.to_string()));
            }
        }
        Ok(RandomizedStoppingTime { y_space, kernel })
    }

    /// The same time law on every path.
    pub fn independent(y_space: PathSpace, law: Vec<Rational>) -> Result<Self> {
        let kernel = y_space.paths().into_iter().map(|y| (y, law.clone())).collect();
        RandomizedStoppingTime::new(y_space, kernel)
    }

    pub fn y_space(&self) -> &PathSpace {
        &self.y_space
    }

    pub fn kernel(&self) -> &BTreeMap<Path, Vec<Rational>> {
        &self.kernel
    }

    pub fn horizon(&self) -> usize {
        self.y_space.horizon()
    }

    pub fn row(&self, y: &[usize]) -> Result<&Vec<Rational>> {
        self.kernel.get(y).ok_or_else(|| Error::UndefinedPrefix(y.to_vec()))
    }

    /// `P(tau <= t | Y = y)` for finite `t`.
    pub fn cdf(&self, y: &[usize], t: usize) -> Result<Rational> {
        Ok(self.row(y)?[..t].iter().sum())
    }
}

/// Deterministic rule on `Y` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTime {
    y_space: PathSpace,
    rule: BTreeMap<Path, Time>,
}

impl StoppingTime {
    /// Validates prefix-measurability: paths that share `y_{1:n}` agree on
    /// the time whenever one of them stops by `n`.
    pub fn new(y_space: PathSpace, rule: BTreeMap<Path, Time>) -> Result<Self> {
        let big_n = y_space.horizon();
        for (y, &t) in &rule {
            y_space.check_path(y)?;
            if let Time::At(s) = t {
                if s == 0 || s > big_n {
                    return Err(Error::ShapeMismatch(format!("time {s} outside 1..={big_n}")));
                }
                for (z, &u) in &rule {
                    if z[..s] == y[..s] && u != t {
                        return Err(Error::NotRandomizedSt(format!(
                            "rule stops at {t} on {y:?} but at {u} on {z:?}"
                        )));
                    }
                }
            }
        }
        Ok(StoppingTime { y_space, rule })
    }

    pub fn rule(&self) -> &BTreeMap<Path, Time> {
        &self.rule
    }

    pub fn y_space(&self) -> &PathSpace {
        &self.y_space
    }

    pub fn at(&self, y: &[usize]) -> Result<Time> {
        self.rule.get(y).copied().ok_or_else(|| Error::UndefinedPrefix(y.to_vec()))
    }

    /// Point-mass kernel rows.
    pub fn lift(&self) -> RandomizedStoppingTime {
        let big_n = self.y_space.horizon();
        let kernel = self
            .rule
            .iter()
            .map(|(y, t)| {
                let mut row = vec![Rational::zero(); big_n + 1];
                row[t.slot(big_n)] = Rational::one();
                (y.clone(), row)
            })
            .collect();
        RandomizedStoppingTime { y_space: self.y_space.clone(), kernel }
    }
}

/// Largest spread of `F_y(t)` across paths sharing `y_{1:t}`.
pub fn is_randomized_st(tau: &RandomizedStoppingTime, mu: &PathMeasure) -> Result<CheckReport> {
    let mut max = Rational::zero();
    let mut witness = None;
    for t in 1..=tau.horizon() {
        let mut range: BTreeMap<&[usize], (Rational, Rational, &Path)> = BTreeMap::new();
        for y in mu.support().keys() {
            let f = tau.cdf(y, t)?;
            range
                .entry(&y[..t])
                .and_modify(|(lo, hi, _)| {
                    if f < *lo {
                        *lo = f.clone();
                    }
                    if f > *hi {
                        *hi = f.clone();
                    }
                })
                .or_insert((f.clone(), f, y));
        }
        for (lo, hi, y) in range.into_values() {
            let spread = hi - lo;
            if spread > max {
                max = spread;
                witness = Some(Witness { n: t, y: y.clone(), x: None });
            }
        }
    }
    let ok = max.is_zero();
    Ok(CheckReport { ok, max_violation: max, witness: if ok { None } else { witness } })
}

/// Pure components `(w_i, A(., u_i))` with `sum_i w_i 1{A_i(y) <= t} = F_y(t)`.
pub fn decompose_stopping(
    tau: &RandomizedStoppingTime,
    mu: &PathMeasure,
) -> Result<Vec<(Rational, StoppingTime)>> {
    let report = is_randomized_st(tau, mu)?;
    if !report.ok {
        return Err(Error::NotRandomizedSt(report.max_violation.to_string()));
    }
    let big_n = tau.horizon();
    let mut cuts: BTreeSet<Rational> = BTreeSet::new();
    cuts.insert(Rational::zero());
    cuts.insert(Rational::one());
    for y in mu.support().keys() {
        for t in 1..=big_n {
            let f = tau.cdf(y, t)?;
            if f.is_positive() && f < Rational::one() {
                cuts.insert(f);
            }
        }
    }
    let cuts: Vec<Rational> = cuts.into_iter().collect();
    let mut out: Vec<(Rational, StoppingTime)> = Vec::new();
    for w in cuts.windows(2) {
        // On (w[0], w[1]] the rule is constant; evaluate at the right end.
        let u = &w[1];
        let rule = mu
            .support()
            .keys()
            .map(|y| {
                let t = (1..=big_n)
                    .find(|&t| tau.cdf(y, t).map(|f| f >= *u).unwrap_or(false))
                    .map_or(Time::Infinity, Time::At);
                (y.clone(), t)
            })
            .collect();
        let st = StoppingTime::new(tau.y_space().clone(), rule)?;
        let weight = &w[1] - &w[0];
        match out.last_mut() {
            Some((lw, last)) if *last == st => *lw += weight,
            _ => out.push((weight, st)),
        }
    }
    Ok(out)
}

/// Joint law of `Y` and `H_t = 1{tau <= t}` with `H` on `{0, 1}` per step.
pub fn indicator_process(tau: &RandomizedStoppingTime, mu: &PathMeasure) -> Result<JointPathLaw> {
    let big_n = tau.horizon();
    let mut entries = Vec::new();
    for (y, w) in mu.support() {
        for (slot, p) in tau.row(y)?.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let time = Time::from_slot(slot, big_n);
            let h: Path = (1..=big_n).map(|t| usize::from(time.by(t))).collect();
            entries.push((y.clone(), h, w * p));
        }
    }
    JointPathLaw::new(tau.y_space().clone(), bit_paths(big_n)?, entries)
}

/// First index (1-based) with `h >= 1/2`, else infinity.
pub fn first_crossing<S: Scalar>(h: &[S]) -> Time {
    let half = S::from_ratio(1, 2);
    h.iter()
        .position(|v| *v >= half)
        .map_or(Time::Infinity, |i| Time::At(i + 1))
}

/// W1 between the laws of `(Y, tau)` and `(Y, sigma)` on the bounded time scale.
pub fn stopping_w1(tau: &RandomizedStoppingTime, sigma: &StoppingTime, mu: &PathMeasure) -> Result<f64> {
    let big_n = tau.horizon();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (y, w) in mu.support() {
        let coords = tau.y_space().coords(y);
        for (slot, p) in tau.row(y)?.iter().enumerate() {
            if !p.is_zero() {
                let mut c = coords.clone();
                c.push(Time::from_slot(slot, big_n).bounded());
                a.push((c, (w * p).to_f64()));
            }
        }
        let mut c = coords;
        c.push(sigma.at(y)?.bounded());
        b.push((c, w.to_f64()));
    }
    w1_points(&a, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingApprox {
    pub st: StoppingTime,
    pub w1_gap: f64,
    /// Partition level used at each step of the adapted approximation.
    pub levels: Vec<usize>,
}

/// Adapted approximation of the indicator process, then first crossing.
pub fn approximate_stopping(
    tau: &RandomizedStoppingTime,
    mu: &PathMeasure,
    schedule: &Schedule,
) -> Result<StoppingApprox> {
    let report = is_randomized_st(tau, mu)?;
    if !report.ok {
        return Err(Error::NotRandomizedSt(report.max_violation.to_string()));
    }
    let j = indicator_process(tau, mu)?;
    let approx = approximate_adapted(&j, schedule)?;
    let rule = mu
        .support()
        .keys()
        .map(|y| {
            let h: Vec<Rational> = approx
                .map
                .apply(y)?
                .into_iter()
                .map(|b| Rational::from_integer((b as i64).into()))
                .collect();
            Ok((y.clone(), first_crossing(&h)))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let st = StoppingTime::new(tau.y_space().clone(), rule)?;
    let w1_gap = stopping_w1(tau, &st, mu)?;
    Ok(StoppingApprox { st, w1_gap, levels: approx.levels })
}

/// `Y` uniform on `m` grid atoms at step 1 and two at step 2; `tau` uniform
/// on `{1, 2}` independently of `Y`.
pub fn independent_uniform_family(m: usize) -> Result<(RandomizedStoppingTime, PathMeasure)> {
    let first = grid_paths(m, 1)?.alphabet(0).clone();
    let second = grid_paths(2, 1)?.alphabet(0).clone();
    let ys = PathSpace::new(vec![first, second])?;
    let mu = PathMeasure::uniform(ys.clone());
    let half = Rational::new(1.into(), 2.into());
    let tau = RandomizedStoppingTime::independent(ys, vec![half.clone(), half, Rational::zero()])?;
    Ok((tau, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::is_compatible;
    use crate::families::coin_paths;
    use crate::scalar::q;

    fn coins() -> PathSpace {
        coin_paths(2).unwrap()
    }

    fn mu() -> PathMeasure {
        PathMeasure::uniform(coins())
    }

    fn uniform12() -> RandomizedStoppingTime {
        RandomizedStoppingTime::independent(coins(), vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap()
    }

    fn pure() -> StoppingTime {
        // Stop at 1 on heads, otherwise at 2 on heads, otherwise never.
        let rule = coins()
            .paths()
            .into_iter()
            .map(|y| {
                let t = if y[0] == 0 {
                    Time::At(1)
                } else if y[1] == 0 {
                    Time::At(2)
                } else {
                    Time::Infinity
                };
                (y, t)
            })
            .collect();
        StoppingTime::new(coins(), rule).unwrap()
    }

    fn anticipative() -> RandomizedStoppingTime {
        let rule = coins()
            .paths()
            .into_iter()
            .map(|y| (y.clone(), if y[1] == 0 { vec![q(1, 1), q(0, 1), q(0, 1)] } else { vec![q(0, 1), q(1, 1), q(0, 1)] }))
            .collect();
        RandomizedStoppingTime::new(coins(), rule).unwrap()
    }

    fn half_on_heads() -> RandomizedStoppingTime {
        let rule = coins()
            .paths()
            .into_iter()
            .map(|y| (y.clone(), if y[0] == 0 { vec![q(1, 2), q(1, 2), q(0, 1)] } else { vec![q(0, 1), q(1, 1), q(0, 1)] }))
            .collect();
        RandomizedStoppingTime::new(coins(), rule).unwrap()
    }

    #[test]
    fn verification_examples() {
        assert!(is_randomized_st(&uniform12(), &mu()).unwrap().ok);
        assert!(is_randomized_st(&pure().lift(), &mu()).unwrap().ok);
        let r = is_randomized_st(&anticipative(), &mu()).unwrap();
        assert!(!r.ok);
        assert_eq!(r.max_violation, q(1, 1));
        assert_eq!(r.witness.unwrap().n, 1);
    }

    #[test]
    fn pure_rules_must_be_prefix_measurable() {
        let rule = coins()
            .paths()
            .into_iter()
            .map(|y| (y.clone(), if y[1] == 0 { Time::At(1) } else { Time::At(2) }))
            .collect();
        assert!(matches!(StoppingTime::new(coins(), rule), Err(Error::NotRandomizedSt(_))));
    }

    fn reconstructs(tau: &RandomizedStoppingTime, parts: &[(Rational, StoppingTime)]) {
        let total: Rational = parts.iter().map(|(w, _)| w).sum();
        assert!(total.is_one());
        for y in mu().support().keys() {
            for t in 1..=2 {
                let f: Rational = parts
                    .iter()
                    .filter(|(_, st)| st.at(y).unwrap().by(t))
                    .map(|(w, _)| w)
                    .sum();
                assert_eq!(f, tau.cdf(y, t).unwrap());
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let parts = decompose_stopping(&uniform12(), &mu()).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, q(1, 2));
        assert!(parts[0].1.rule().values().all(|t| *t == Time::At(1)));
        assert!(parts[1].1.rule().values().all(|t| *t == Time::At(2)));
        reconstructs(&uniform12(), &parts);

        let parts = decompose_stopping(&pure().lift(), &mu()).unwrap();
        assert_eq!(parts, vec![(q(1, 1), pure())]);

        let tau = half_on_heads();
        let parts = decompose_stopping(&tau, &mu()).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, q(1, 2));
        assert_eq!(parts[0].1.at(&[0, 1]).unwrap(), Time::At(1));
        assert_eq!(parts[0].1.at(&[1, 0]).unwrap(), Time::At(2));
        assert!(parts[1].1.rule().values().all(|t| *t == Time::At(2)));
        reconstructs(&tau, &parts);

        assert!(matches!(decompose_stopping(&anticipative(), &mu()), Err(Error::NotRandomizedSt(_))));
    }

    #[test]
    fn indicator_processes() {
        for (tau, ok) in [(uniform12(), true), (pure().lift(), true), (anticipative(), false)] {
            let j = indicator_process(&tau, &mu()).unwrap();
            assert_eq!(is_compatible(&j), ok);
            assert!(j.support().keys().all(|(_, h)| h.windows(2).all(|w| w[0] <= w[1])));
        }
        let j = indicator_process(&pure().lift(), &mu()).unwrap();
        assert_eq!(j.weight(&[1, 1], &[0, 0]), q(1, 4));
    }

    #[test]
    fn first_crossing_examples() {
        assert_eq!(first_crossing(&[0.0, 0.0, 1.0, 1.0]), Time::At(3));
        assert_eq!(first_crossing(&[0.0, 0.0]), Time::Infinity);
        assert_eq!(first_crossing(&[0.4, 0.5]), Time::At(2));
        for s in 1..=6 {
            let h: Vec<Rational> = (1..=6).map(|t| if t >= s { q(1, 1) } else { q(0, 1) }).collect();
            assert_eq!(first_crossing(&h), Time::At(s));
        }
    }

    #[test]
    fn approximation_examples() {
        let r = approximate_stopping(&pure().lift(), &mu(), &Schedule::Finest).unwrap();
        assert_eq!(r.st, pure());
        assert_eq!(r.w1_gap, 0.0);

        assert!(matches!(
            approximate_stopping(&anticipative(), &mu(), &Schedule::Finest),
            Err(Error::NotRandomizedSt(_))
        ));

        let mut prev = f64::INFINITY;
        for m in [4, 8, 16] {
            let (tau, mu) = independent_uniform_family(m).unwrap();
            let r = approximate_stopping(&tau, &mu, &Schedule::Finest).unwrap();
            assert!(r.w1_gap <= prev + 1e-12);
            assert!(r.w1_gap > 0.0);
            prev = r.w1_gap;
        }
    }

    #[test]
    fn time_serialization() {
        assert_eq!(serde_json::to_string(&Time::At(2)).unwrap(), "2");
        assert_eq!(serde_json::to_string(&Time::Infinity).unwrap(), "\"inf\"");
        assert_eq!(serde_json::from_str::<Time>("\"inf\"").unwrap(), Time::Infinity);
        assert_eq!(serde_json::from_str::<Time>("3").unwrap(), Time::At(3));
        assert!(Time::At(5) < Time::Infinity);
    }
}
