//! Finitely supported measures, couplings and kernels on labelled atom sets.
//!
//! Every space embeds its atoms in `[0,1]^d`; distances are L1 on those
//! coordinates, and product spaces use the sum metric (coordinates are
//! concatenated). Atom order is part of a space's identity and is the
//! canonical total order for all quantile constructions.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub label: String,
    pub coord: Vec<f64>,
}

impl Atom {
    pub fn new(label: impl Into<String>, coord: Vec<f64>) -> Self {
        Atom {
            label: label.into(),
            coord,
        }
    }
}

/// Ordered finite set of labelled atoms with ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    dim: usize,
    atoms: Vec<Atom>,
}

pub type SpaceRef = Arc<FiniteSpace>;

impl FiniteSpace {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpace("a space needs at least one atom".into()));
        }
        let mut seen = HashSet::new();
        for atom in &atoms {
            if !seen.insert(atom.label.as_str()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate label {:?}",
                    atom.label
                )));
            }
            if atom.coord.len() != dim {
                return Err(Error::DimensionMismatch(atom.coord.len(), dim));
            }
            if atom.coord.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidSpace(format!(
                    "coordinates of {:?} leave [0,1]^{dim}",
                    atom.label
                )));
            }
        }
        Ok(FiniteSpace { dim, atoms })
    }

    /// One-dimensional space with the given labels evenly spaced on `[0,1]`.
    pub fn labelled<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let n = labels.len();
        let atoms = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let x = if n == 1 {
                    0.5
                } else {
                    i as f64 / (n - 1) as f64
                };
                Atom::new(l.as_ref(), vec![x])
            })
            .collect();
        FiniteSpace::new(1, atoms)
    }

    /// One-dimensional space with atoms `p0, p1, ...` at the given points.
    pub fn line(points: &[f64]) -> Result<Self> {
        let atoms = points
            .iter()
            .enumerate()
            .map(|(i, &x)| Atom::new(format!("p{i}"), vec![x]))
            .collect();
        FiniteSpace::new(1, atoms)
    }

    /// `m` cell midpoints `(2i+1)/(2m)` of the uniform grid on `[0,1]`.
    pub fn midpoint_grid(m: usize) -> Result<Self> {
        let atoms = (0..m)
            .map(|i| Atom::new(format!("g{i}"), vec![(2 * i + 1) as f64 / (2 * m) as f64]))
            .collect();
        FiniteSpace::new(1, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.atoms[i].label
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.atoms[i].coord
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.label == label)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        l1(self.coord(i), self.coord(j))
    }
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn validate_weights<S: Scalar>(weights: &[S]) -> Result<()> {
    for (index, w) in weights.iter().enumerate() {
        if w.is_negative() {
            return Err(Error::NegativeWeight {
                index,
                weight: format!("{w:?}"),
            });
        }
    }
    let total: S = weights.iter().sum();
    if !total.is_unit_total() {
        return Err(Error::NotNormalized(format!("{total:?}")));
    }
    Ok(())
}

/// Probability vector on a [`FiniteSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<S = Rational> {
    space: SpaceRef,
    weights: Vec<S>,
}

impl<S: Scalar> DiscreteMeasure<S> {
    pub fn new(space: SpaceRef, weights: Vec<S>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} atoms",
                weights.len(),
                space.len()
            )));
        }
        validate_weights(&weights)?;
        Ok(DiscreteMeasure { space, weights })
    }

    pub fn dirac(space: SpaceRef, i: usize) -> Self {
        let mut weights = vec![S::zero(); space.len()];
        weights[i] = S::one();
        DiscreteMeasure { space, weights }
    }

    pub fn uniform(space: SpaceRef) -> Self {
        let n = space.len() as i64;
        let weights = vec![S::from_ratio(1, n); space.len()];
        DiscreteMeasure { space, weights }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &S {
        &self.weights[i]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices of atoms with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.weights[i].is_strictly_positive())
            .collect()
    }

    pub fn to_f64(&self) -> DiscreteMeasure<f64> {
        DiscreteMeasure {
            space: self.space.clone(),
            weights: self.weights.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// Weighted points `(coord, mass)` of the positive atoms, for W1.
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        self.support()
            .into_iter()
            .map(|i| (self.space.coord(i).to_vec(), self.weights[i].to_f64()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
}

/// Probability on `row_space x col_space`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<S = Rational> {
    row_space: SpaceRef,
    col_space: SpaceRef,
    mass: Vec<Vec<S>>,
}

impl<S: Scalar> Coupling<S> {
    pub fn new(row_space: SpaceRef, col_space: SpaceRef, mass: Vec<Vec<S>>) -> Result<Self> {
        if mass.len() != row_space.len() || mass.iter().any(|r| r.len() != col_space.len()) {
            return Err(Error::ShapeMismatch(format!(
                "mass matrix does not match {}x{} spaces",
                row_space.len(),
                col_space.len()
            )));
        }
        let flat: Vec<S> = mass.iter().flatten().cloned().collect();
        validate_weights(&flat)?;
        Ok(Coupling {
            row_space,
            col_space,
            mass,
        })
    }

    pub fn from_triplets(
        row_space: SpaceRef,
        col_space: SpaceRef,
        triplets: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Result<Self> {
        let mut mass = vec![vec![S::zero(); col_space.len()]; row_space.len()];
        for (i, j, w) in triplets {
            if i >= row_space.len() || j >= col_space.len() {
                return Err(Error::ShapeMismatch(format!("triplet ({i},{j}) out of range")));
            }
            mass[i][j] = mass[i][j].clone() + w;
        }
        Coupling::new(row_space, col_space, mass)
    }

    pub fn product(mu: &DiscreteMeasure<S>, nu: &DiscreteMeasure<S>) -> Self {
        let mass = mu
            .weights()
            .iter()
            .map(|a| nu.weights().iter().map(|b| a.clone() * b.clone()).collect())
            .collect();
        Coupling {
            row_space: mu.space().clone(),
            col_space: nu.space().clone(),
            mass,
        }
    }

    pub fn row_space(&self) -> &SpaceRef {
        &self.row_space
    }

    pub fn col_space(&self) -> &SpaceRef {
        &self.col_space
    }

    pub fn mass(&self) -> &[Vec<S>] {
        &self.mass
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.mass[i][j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_space.len(), self.col_space.len())
    }

    pub fn transpose(&self) -> Self {
        let (n, m) = self.shape();
        let mass = (0..m)
            .map(|j| (0..n).map(|i| self.mass[i][j].clone()).collect())
            .collect();
        Coupling {
            row_space: self.col_space.clone(),
            col_space: self.row_space.clone(),
            mass,
        }
    }

    pub fn marginal(&self, axis: Axis) -> DiscreteMeasure<S> {
        match axis {
            Axis::Row => DiscreteMeasure {
                space: self.row_space.clone(),
                weights: self.mass.iter().map(|r| r.iter().sum()).collect(),
            },
            Axis::Col => DiscreteMeasure {
                space: self.col_space.clone(),
                weights: (0..self.col_space.len())
                    .map(|j| self.mass.iter().map(|r| &r[j]).sum())
                    .collect(),
            },
        }
    }

    /// Splits the coupling into the `axis` marginal and the conditional
    /// kernel from that axis to the other one. Rows of null atoms are omitted.
    pub fn disintegrate(&self, axis: Axis) -> (DiscreteMeasure<S>, Kernel<S>) {
        let oriented = match axis {
            Axis::Row => self.clone(),
            Axis::Col => self.transpose(),
        };
        let mu = oriented.marginal(Axis::Row);
        let rows = oriented
            .mass
            .iter()
            .zip(mu.weights())
            .map(|(row, total)| {
                if total.is_strictly_positive() {
                    Some(DiscreteMeasure {
                        space: oriented.col_space.clone(),
                        weights: row.iter().map(|w| w.clone() / total.clone()).collect(),
                    })
                } else {
                    None
                }
            })
            .collect();
        let kernel = Kernel {
            from_space: oriented.row_space.clone(),
            to_space: oriented.col_space.clone(),
            rows,
        };
        (mu, kernel)
    }

    /// `mass[i][j] = mu[i] * K[i][j]`; the row marginal is `mu`.
    pub fn compose(mu: &DiscreteMeasure<S>, kernel: &Kernel<S>) -> Result<Self> {
        if mu.space() != kernel.from_space() {
            return Err(Error::ShapeMismatch("measure and kernel live on different spaces".into()));
        }
        let mut mass = Vec::with_capacity(mu.len());
        for (i, w) in mu.weights().iter().enumerate() {
            let row = match kernel.row(i) {
                Some(k) => k.weights().iter().map(|x| w.clone() * x.clone()).collect(),
                None if w.is_zero() => vec![S::zero(); kernel.to_space().len()],
                None => return Err(Error::MissingKernelRow(i)),
            };
            mass.push(row);
        }
        Ok(Coupling {
            row_space: mu.space().clone(),
            col_space: kernel.to_space().clone(),
            mass,
        })
    }

    /// Inverse of [`Coupling::disintegrate`] along `axis`.
    pub fn compose_along(mu: &DiscreteMeasure<S>, kernel: &Kernel<S>, axis: Axis) -> Result<Self> {
        let c = Coupling::compose(mu, kernel)?;
        Ok(match axis {
            Axis::Row => c,
            Axis::Col => c.transpose(),
        })
    }

    /// Positive atoms as points of the product ambient space (coordinates
    /// concatenated, so L1 on them is the sum metric).
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.mass.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                if w.is_strictly_positive() {
                    let mut c = self.row_space.coord(i).to_vec();
                    c.extend_from_slice(self.col_space.coord(j));
                    out.push((c, w.to_f64()));
                }
            }
        }
        out
    }

    pub fn to_f64(&self) -> Coupling<f64> {
        Coupling {
            row_space: self.row_space.clone(),
            col_space: self.col_space.clone(),
            mass: self
                .mass
                .iter()
                .map(|r| r.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }

    /// Triplets `(i, j, w)` of the nonzero entries, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, S)> {
        let mut out = Vec::new();
        for (i, row) in self.mass.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                if !w.is_zero() {
                    out.push((i, j, w.clone()));
                }
            }
        }
        out
    }
}

/// Markov kernel; rows of null atoms may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<S = Rational> {
    from_space: SpaceRef,
    to_space: SpaceRef,
    rows: Vec<Option<DiscreteMeasure<S>>>,
}

impl<S: Scalar> Kernel<S> {
    pub fn new(
        from_space: SpaceRef,
        to_space: SpaceRef,
        rows: Vec<Option<DiscreteMeasure<S>>>,
    ) -> Result<Self> {
        if rows.len() != from_space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} kernel rows for {} atoms",
                rows.len(),
                from_space.len()
            )));
        }
        if rows.iter().flatten().any(|r| r.space() != &to_space) {
            return Err(Error::ShapeMismatch("kernel row on the wrong space".into()));
        }
        Ok(Kernel {
            from_space,
            to_space,
            rows,
        })
    }

    pub fn from_space(&self) -> &SpaceRef {
        &self.from_space
    }

    pub fn to_space(&self) -> &SpaceRef {
        &self.to_space
    }

    pub fn row(&self, i: usize) -> Option<&DiscreteMeasure<S>> {
        self.rows[i].as_ref()
    }

    pub fn rows(&self) -> &[Option<DiscreteMeasure<S>>] {
        &self.rows
    }
}
