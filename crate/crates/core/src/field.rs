//! Discrete fields on a [`Grid`].
//!
//! A [`ScalarField`] holds one value per cell. A [`VectorField`] holds one
//! value per cell and axis, collocated with the forward-difference gradient;
//! its component along axis `k` is zero on the last cell layer of that axis,
//! which is the range of the Neumann gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Grid, Result};

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::FieldLength {
                expected: grid.cell_count(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    /// Caller guarantees the length and finiteness invariants.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        assert!(c.is_finite(), "constant field value must be finite");
        ScalarField {
            grid,
            values: vec![c; grid.cell_count()],
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count()).map(|j| f(grid.center(j))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_raw(self.grid, values)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        ScalarField::from_raw(self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a + s * b)
    }

    /// Discrete `L²(Ω)` inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.grid.cell_measure() * dot(&self.values, &other.values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    /// Component-major: axis `k` occupies `data[k*n..(k+1)*n]`.
    data: Vec<f64>,
}

impl VectorField {
    /// Builds a field from per-axis components. Values on the last layer of
    /// each axis are replaced by zero.
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidParameter("one component per axis"));
        }
        let n = grid.cell_count();
        let mut data = Vec::with_capacity(n * grid.dim());
        for c in &components {
            if c.len() != n {
                return Err(Error::FieldLength {
                    expected: n,
                    got: c.len(),
                });
            }
            check_finite(c)?;
            data.extend_from_slice(c);
        }
        project_neumann(&grid, &mut data);
        Ok(VectorField { grid, data })
    }

    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.cell_count() * grid.dim());
        VectorField { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            data: vec![0.0; grid.cell_count() * grid.dim()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        let n = self.grid.cell_count();
        &self.data[axis * n..(axis + 1) * n]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    /// The vector stored at `cell`, padded with zeros to length 2.
    #[inline]
    pub fn at(&self, cell: usize) -> [f64; 2] {
        let n = self.grid.cell_count();
        let mut y = [0.0; 2];
        for (k, yk) in y.iter_mut().enumerate().take(self.grid.dim()) {
            *yk = self.data[k * n + cell];
        }
        y
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        VectorField::from_raw(self.grid, data)
    }

    pub fn add(&self, other: &VectorField) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        VectorField::from_raw(self.grid, data)
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorField::from_raw(self.grid, self.data.iter().map(|v| v * s).collect())
    }

    /// Discrete `[L²(Ω)]^N` inner product.
    pub fn dot(&self, other: &VectorField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.grid.cell_measure() * dot(&self.data, &other.data)
    }
}

pub(crate) fn project_neumann(grid: &Grid, data: &mut [f64]) {
    let n = grid.cell_count();
    for k in 0..grid.dim() {
        let last = grid.counts()[k] - 1;
        for j in 0..n {
            if grid.axis_index(j, k) == last {
                data[k * n + j] = 0.0;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
