//! Rotating a discretized standard Gaussian on the plane by `1/n` radians.
//!
//! The identity coupling puts all its mass on the diagonal. A genuine
//! rotation by a nonzero angle fixes only the origin, a null set for the
//! Gaussian, so its diagonal mass is zero for every `n`, even though the
//! rotated couplings converge weakly to the identity. On a grid the rotated
//! points are snapped back to the nearest atom, which fixes some atoms near
//! the centre.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::Result;
use crate::measure::{Atom, FiniteSpace};
use crate::scalar::{Rational, Scalar};
use crate::transport::w1_points;

/// Half-width of the truncation box, in standard deviations.
pub const TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationReport {
    pub n: usize,
    pub grid: usize,
    pub theta: f64,
    /// Diagonal mass of the identity coupling.
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub diag_p: Rational,
    /// Diagonal mass of the un-discretized rotation coupling.
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub diag_exact_rotation: Rational,
    /// Diagonal mass of the snapped rotation coupling.
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub diag_pn: Rational,
    /// Mass of the atoms that the snapped rotation maps to themselves.
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub fixed_mass: Rational,
    /// Fraction of atoms (by count) that the snapped rotation fixes.
    pub fixed_fraction: f64,
    /// W1 between the joint laws of `(X, X)` and `(X, R X)`.
    pub w1_gap: f64,
}

/// `grid x grid` atoms at the cell centres of `[-3, 3]^2`, stored in `[0,1]^2`
/// coordinates, row-major.
pub fn gaussian_grid(grid: usize) -> (Arc<FiniteSpace>, Vec<Rational>) {
    let centre = |i: usize| -TRUNCATION + 2.0 * TRUNCATION * (i as f64 + 0.5) / grid as f64;
    let mut atoms = Vec::with_capacity(grid * grid);
    let mut density = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let (a, b) = (centre(i), centre(j));
            atoms.push(Atom::new(
                format!("r{i}_{j}"),
                vec![(a + TRUNCATION) / (2.0 * TRUNCATION), (b + TRUNCATION) / (2.0 * TRUNCATION)],
            ));
            density.push(Rational::from_f64((-(a * a + b * b) / 2.0).exp()));
        }
    }
    let total: Rational = density.iter().sum();
    let weights = density.into_iter().map(|d| d / &total).collect();
    let space = FiniteSpace::new(2, atoms).expect("grid coordinates lie in the unit square");
    (Arc::new(space), weights)
}

/// Nearest atom to a point given in `[0,1]^2` coordinates, ties to the
/// smaller atom index.
fn snap(space: &FiniteSpace, p: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, atom) in space.atoms().iter().enumerate() {
        let d = (atom.coord[0] - p[0]).abs() + (atom.coord[1] - p[1]).abs();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Snapped image of every atom under rotation by `theta` about the origin.
pub fn snapped_rotation(space: &FiniteSpace, theta: f64) -> Vec<usize> {
    let (s, c) = theta.sin_cos();
    space
        .atoms()
        .iter()
        .map(|atom| {
            let a = atom.coord[0] * 2.0 * TRUNCATION - TRUNCATION;
            let b = atom.coord[1] * 2.0 * TRUNCATION - TRUNCATION;
            let (ra, rb) = (c * a - s * b, s * a + c * b);
            snap(
                space,
                [
                    (ra + TRUNCATION) / (2.0 * TRUNCATION),
                    (rb + TRUNCATION) / (2.0 * TRUNCATION),
                ],
            )
        })
        .collect()
}

/// Diagonal mass of the rotation coupling of a nonatomic planar law: the
/// fixed set of a rotation is either the whole plane or the origin.
pub fn exact_rotation_diagonal(theta: f64) -> Rational {
    let turns = theta / std::f64::consts::TAU;
    if turns == turns.round() {
        Rational::one()
    } else {
        Rational::zero()
    }
}

pub fn rotation_demo(n: usize, grid: usize) -> Result<RotationReport> {
    assert!(n >= 1 && grid >= 2, "rotation_demo needs n >= 1 and grid >= 2");
    let theta = 1.0 / n as f64;
    let (space, weights) = gaussian_grid(grid);
    let image = snapped_rotation(&space, theta);

    let diag_p: Rational = weights.iter().sum();
    let mut fixed_mass = Rational::zero();
    let mut fixed_count = 0usize;
    for (k, &t) in image.iter().enumerate() {
        if t == k {
            fixed_mass += &weights[k];
            fixed_count += 1;
        }
    }
    // Under the snapped coupling the diagonal carries exactly the fixed atoms.
    let diag_pn: Rational = image
        .iter()
        .enumerate()
        .filter(|(k, t)| *k == **t)
        .map(|(k, _)| &weights[k])
        .sum();

    let joint = |target: &dyn Fn(usize) -> usize| -> Vec<(Vec<f64>, f64)> {
        (0..space.len())
            .map(|k| {
                let mut c = space.coord(k).to_vec();
                c.extend_from_slice(space.coord(target(k)));
                (c, weights[k].to_f64())
            })
            .collect()
    };
    let w1_gap = w1_points(&joint(&|k| k), &joint(&|k| image[k]))?;

    Ok(RotationReport {
        n,
        grid,
        theta,
        diag_p,
        diag_exact_rotation: exact_rotation_diagonal(theta),
        diag_pn,
        fixed_mass,
        fixed_fraction: fixed_count as f64 / space.len() as f64,
        w1_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_full_diagonal() {
        for (n, grid) in [(1, 2), (3, 5), (8, 12)] {
            let r = rotation_demo(n, grid).unwrap();
            assert!(r.diag_p.is_one());
            assert!(r.diag_exact_rotation.is_zero());
            assert!(r.diag_pn <= r.fixed_mass);
        }
    }

    #[test]
    fn exact_rotation_only_fixes_the_identity() {
        assert!(exact_rotation_diagonal(0.0).is_one());
        assert!(exact_rotation_diagonal(std::f64::consts::TAU).is_one());
        for n in 1..50 {
            assert!(exact_rotation_diagonal(1.0 / n as f64).is_zero());
        }
    }

    #[test]
    fn small_angle_on_coarse_grid_fixes_everything() {
        let r = rotation_demo(1000, 4).unwrap();
        assert!(r.diag_pn.is_one());
        assert_eq!(r.w1_gap, 0.0);
    }

    #[test]
    fn snapping_breaks_ties_by_atom_order() {
        let (grid, _) = gaussian_grid(2);
        // The centre of the square is equidistant from all four atoms.
        assert_eq!(snap(&grid, [0.5, 0.5]), 0);
    }
}
