//! Uniform cell-centred grids on `(0, L₁)` or `(0, L₁) × (0, L₂)`.
//!
//! Cells are stored in row-major order: axis 0 has stride 1 and axis 1 has
//! stride `n₁`, so cell `(i, j)` sits at index `j * n₁ + i`.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    counts: [usize; 2],
    extents: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn new(counts: &[usize], extents: &[f64]) -> Result<Self> {
        let dim = counts.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid("dimension must be 1 or 2"));
        }
        if extents.len() != dim {
            return Err(Error::InvalidGrid("one extent per axis is required"));
        }
        let mut g = Grid {
            dim,
            counts: [1, 1],
            extents: [1.0, 1.0],
            spacing: [1.0, 1.0],
        };
        for k in 0..dim {
            if counts[k] < 2 {
                return Err(Error::InvalidGrid("at least two cells per axis"));
            }
            if !(extents[k].is_finite() && extents[k] > 0.0) {
                return Err(Error::InvalidGrid("extents must be positive and finite"));
            }
            g.counts[k] = counts[k];
            g.extents[k] = extents[k];
            g.spacing[k] = extents[k] / counts[k] as f64;
        }
        Ok(g)
    }

    pub fn new_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(&[n], &[length])
    }

    pub fn new_2d(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        Self::new(&[n1, n2], &[l1, l2])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn cell_count(&self) -> usize {
        self.counts().iter().product()
    }

    /// Lebesgue measure of one cell, `∏ h_k`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn domain_measure(&self) -> f64 {
        self.extents().iter().product()
    }

    /// Measure of the boundary: two points in 1D, the perimeter in 2D.
    pub fn boundary_measure(&self) -> f64 {
        match self.dim {
            1 => 2.0,
            _ => 2.0 * (self.extents[0] + self.extents[1]),
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.counts[0]
        }
    }

    #[inline]
    pub fn axis_index(&self, cell: usize, axis: usize) -> usize {
        (cell / self.stride(axis)) % self.counts[axis]
    }

    /// Position of the cell centre; the second coordinate is 0 in 1D.
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (k, xk) in x.iter_mut().enumerate().take(self.dim) {
            *xk = (self.axis_index(cell, k) as f64 + 0.5) * self.spacing[k];
        }
        x
    }

    /// Boundary cells paired with the measure of the boundary face they
    /// touch. Corner cells of a rectangle appear once per adjacent edge.
    pub fn boundary_faces(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        match self.dim {
            1 => {
                out.push((0, 1.0));
                out.push((self.counts[0] - 1, 1.0));
            }
            _ => {
                let (n1, n2) = (self.counts[0], self.counts[1]);
                let (h1, h2) = (self.spacing[0], self.spacing[1]);
                for j in 0..n2 {
                    out.push((j * n1, h2));
                    out.push((j * n1 + n1 - 1, h2));
                }
                for i in 0..n1 {
                    out.push((i, h1));
                    out.push(((n2 - 1) * n1 + i, h1));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_measures() {
        let g = Grid::new_2d(4, 3, 2.0, 1.5).unwrap();
        assert_eq!(g.cell_count(), 12);
        assert_eq!(g.spacing(), &[0.5, 0.5]);
        assert!((g.cell_measure() - 0.25).abs() < 1e-15);
        assert!((g.boundary_measure() - 7.0).abs() < 1e-15);
        let face_total: f64 = g.boundary_faces().iter().map(|(_, m)| m).sum();
        assert!((face_total - g.boundary_measure()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(Grid::new_1d(1, 1.0).is_err());
        assert!(Grid::new_1d(4, 0.0).is_err());
        assert!(Grid::new_1d(4, f64::NAN).is_err());
        assert!(Grid::new(&[2, 2, 2], &[1.0, 1.0, 1.0]).is_err());
        assert!(Grid::new(&[2, 2], &[1.0]).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let g = Grid::new_2d(4, 3, 1.0, 1.0).unwrap();
        assert_eq!(g.axis_index(9, 0), 1);
        assert_eq!(g.axis_index(9, 1), 2);
        let c = g.center(5);
        assert!((c[0] - 0.375).abs() < 1e-15);
        assert!((c[1] - 0.5).abs() < 1e-15);
    }
}
