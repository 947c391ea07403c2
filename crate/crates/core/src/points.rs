use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// ℓ1 distance between two equal-length slices.
#[inline]
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[inline]
pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// A dense set of points in ℝ^d, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(dim * rows.len());
        for row in rows {
            check_dim(dim, row.as_ref().len())?;
            coords.extend_from_slice(row.as_ref());
        }
        Self::new(dim, coords)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        check_dim(self.dim, p.len())?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("coordinates must be finite"));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        l1_distance(self.point(i), self.point(j))
    }

    pub fn distance_to(&self, i: usize, q: &[f64]) -> f64 {
        l1_distance(self.point(i), q)
    }

    pub fn check_query(&self, q: &[f64]) -> Result<()> {
        check_dim(self.dim, q.len())
    }

    pub fn map_coords(&self, f: impl Fn(f64) -> f64) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointSet { dim: self.dim, coords }
    }
}
