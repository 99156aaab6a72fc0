//! Parametrized instance families.
//!
//! The refinement parameter `m` is the number of `Y` atoms per step, placed
//! at the midpoints `(2i + 1) / 2m` of `[0, 1]`; the `Y` law is uniform on
//! them. Larger `m` makes the first marginal closer to nonatomic.

use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::Result;
use crate::measure::{Coupling, DiscreteMeasure, FiniteSpace};
use crate::path::{push_adapted, AdaptedMap, JointPathLaw, PathMeasure, PathSpace};
use crate::scalar::{q, Rational};

/// `n` steps of the `m`-point midpoint grid.
pub fn grid_paths(m: usize, n: usize) -> Result<PathSpace> {
    PathSpace::repeated(Arc::new(FiniteSpace::midpoint_grid(m)?), n)
}

/// `n` steps of `{0, 1}` at coordinates 0 and 1.
pub fn bit_paths(n: usize) -> Result<PathSpace> {
    PathSpace::labelled(&["0", "1"], n)
}

/// `n` fair-coin steps labelled `h`, `t`.
pub fn coin_paths(n: usize) -> Result<PathSpace> {
    PathSpace::labelled(&["h", "t"], n)
}

/// `Y` uniform on the grid, `X` independent fair bits.
pub fn independent_product(m: usize, n: usize) -> Result<JointPathLaw> {
    let mu = PathMeasure::uniform(grid_paths(m, n)?);
    let nu = PathMeasure::uniform(bit_paths(n)?);
    JointPathLaw::product(&mu, &nu)
}

/// `Y` uniform on the grid, `x_n = 1{y_n >= 1/2}`.
pub fn adapted_threshold(m: usize, n: usize) -> Result<JointPathLaw> {
    let mu = PathMeasure::uniform(grid_paths(m, n)?);
    let f = AdaptedMap::from_fn(grid_paths(m, n)?, bit_paths(n)?, |p| {
        usize::from(2 * p[p.len() - 1] >= m)
    })?;
    push_adapted(&mu, &f)
}

/// Two fair coins with `X_1 = X_2 = Y_2`.
pub fn anticipative_coins() -> JointPathLaw {
    let ys = coin_paths(2).expect("two labels");
    JointPathLaw::new(
        ys.clone(),
        ys.clone(),
        ys.paths().into_iter().map(|y| (y.clone(), vec![y[1], y[1]], q(1, 4))),
    )
    .expect("uniform weights")
}

/// Two fair coins and a law on `X` paths that is independent of `Y`.
pub fn coins_with_independent_x() -> JointPathLaw {
    let ys = coin_paths(2).expect("two labels");
    JointPathLaw::product(&PathMeasure::uniform(ys.clone()), &PathMeasure::uniform(ys)).expect("product")
}

/// Couplings with uniform first marginal on `m` grid atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MongeFamily {
    /// `mu (x) nu` with `nu` uniform on two atoms.
    Independent,
    /// Consecutive pairs of atoms `2r, 2r + 1` spread evenly over the two
    /// target atoms `r` and `r + 1` (cyclically) of an `m/2`-point grid.
    Banded,
    /// The identity map onto the same grid.
    Diagonal,
}

impl MongeFamily {
    pub const ALL: [MongeFamily; 3] = [MongeFamily::Independent, MongeFamily::Banded, MongeFamily::Diagonal];

    pub fn name(self) -> &'static str {
        match self {
            MongeFamily::Independent => "independent",
            MongeFamily::Banded => "banded",
            MongeFamily::Diagonal => "diagonal",
        }
    }

    /// The coupling at refinement `m` (even, at least 2).
    pub fn coupling(self, m: usize) -> Result<Coupling> {
        let src = Arc::new(FiniteSpace::midpoint_grid(m)?);
        let mu: DiscreteMeasure = DiscreteMeasure::uniform(src.clone());
        match self {
            MongeFamily::Independent => {
                let nu = DiscreteMeasure::uniform(Arc::new(FiniteSpace::midpoint_grid(2)?));
                Ok(Coupling::product(&mu, &nu))
            }
            MongeFamily::Banded => {
                let h = m / 2;
                let tgt = Arc::new(FiniteSpace::midpoint_grid(h)?);
                let w = Rational::one() / Rational::from_integer((2 * m).into());
                let triplets = (0..m).flat_map(|i| {
                    let r = i / 2;
                    [(i, r, w.clone()), (i, (r + 1) % h, w.clone())]
                });
                Coupling::from_triplets(src, tgt, triplets)
            }
            MongeFamily::Diagonal => {
                let w = Rational::one() / Rational::from_integer(m.into());
                Coupling::from_triplets(src.clone(), src, (0..m).map(|i| (i, i, w.clone())))
            }
        }
    }
}

/// A coupling is Monge iff every row carries at most one positive entry.
pub fn is_monge(p: &Coupling) -> bool {
    p.mass()
        .iter()
        .all(|row| row.iter().filter(|w| !w.is_zero()).count() <= 1)
}
