//! Arithmetic modes.
//!
//! Exact mode uses arbitrary-precision rationals; float mode uses `f64`.
//! Everything that must hold as an identity (reconstructions, marginals,
//! compatibility) is computed with [`Rational`]; optimization values and
//! Wasserstein distances may run in `f64`.

use std::fmt::Debug;
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Tolerance for "is zero" decisions in float mode (LP pivots, feasibility).
pub const FLOAT_TOL: f64 = 1e-9;

/// Tolerance for the normalization check of float-mode measures.
pub const FLOAT_NORM_TOL: f64 = 1e-12;

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Signed
    + for<'a> Sum<&'a Self>
    + Sum<Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    /// Exact conversion for rationals (every finite `f64` is a dyadic rational).
    fn from_f64(x: f64) -> Self;
    fn from_ratio(numer: i64, denom: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Zero test: exact equality for rationals, `|x| <= FLOAT_TOL` for floats.
    fn is_negligible(&self) -> bool;
    /// Normalization test for a weight total.
    fn is_unit_total(&self) -> bool;

    fn is_strictly_positive(&self) -> bool {
        self.is_positive() && !self.is_negligible()
    }

    fn is_strictly_negative(&self) -> bool {
        self.is_negative() && !self.is_negligible()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).is_negligible()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).expect("finite float")
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn is_unit_total(&self) -> bool {
        self.is_one()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= FLOAT_TOL
    }

    fn is_unit_total(&self) -> bool {
        (self - 1.0).abs() <= FLOAT_NORM_TOL
    }
}

/// `p/q` as a rational. Convenience for tests and instance builders.
pub fn q(numer: i64, denom: i64) -> Rational {
    Rational::from_ratio(numer, denom)
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Ok(r) = s.parse::<BigRational>() {
        return Ok(r);
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let numer: BigInt = digits
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational literal {s:?}")))?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(numer, denom);
        return Ok(if negative { -r } else { r });
    }
    Err(Error::Parse(format!("bad rational literal {s:?}")))
}

/// Renders a rational as `p/q` (or `p` when the denominator is 1).
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Total-variation distance between two weight vectors on a common index set.
pub fn total_variation<S: Scalar>(a: &[S], b: &[S]) -> S {
    let sum: S = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.clone() - y.clone()).abs())
        .sum();
    sum / S::from_ratio(2, 1)
}

pub fn max_of<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    values.into_iter().fold(None, |acc, v| match acc {
        None => Some(v),
        Some(a) => Some(if v > a { v } else { a }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse_rational("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), q(-3, 2));
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn formats_as_p_over_q() {
        assert_eq!(format_rational(&q(2, 4)), "1/2");
        assert_eq!(format_rational(&q(0, 3)), "0");
        assert_eq!(format_rational(&q(6, 3)), "2");
    }

    #[test]
    fn float_conversion_is_exact() {
        let r = <Rational as Scalar>::from_f64(0.1);
        assert_eq!(Scalar::to_f64(&r), 0.1);
        assert_ne!(r, q(1, 10));
    }

    #[test]
    fn total_variation_of_point_mass_and_uniform() {
        let tv = total_variation(&[q(1, 1), q(0, 1)], &[q(1, 2), q(1, 2)]);
        assert_eq!(tv, q(1, 2));
    }
}
