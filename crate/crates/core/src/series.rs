use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Samples M₀…M_{len−1} of a matrix-valued path, each stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPath {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixPath {
    pub fn zeros(rows: usize, cols: usize, len: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols * len] }
    }

    pub fn from_matrices(mats: &[DMatrix<f64>]) -> Self {
        let (rows, cols) = mats.first().map_or((0, 0), |m| m.shape());
        let mut data = Vec::with_capacity(rows * cols * mats.len());
        for m in mats {
            assert_eq!(m.shape(), (rows, cols), "inconsistent sample shapes");
            data.extend_from_slice(m.as_slice());
        }
        Self { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.data.len() / (self.rows * self.cols)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, k: usize) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(self.slice(k), self.rows, self.cols)
    }

    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        self.at(k).into_owned()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let s = self.rows * self.cols;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.rows * self.cols;
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn set(&mut self, k: usize, m: &DMatrix<f64>) {
        self.slice_mut(k).copy_from_slice(m.as_slice());
    }

    pub fn last(&self) -> DMatrixView<'_, f64> {
        self.at(self.len() - 1)
    }
}

/// A discretised Cameron-Martin path h₀ = 0, h₁, …, hₙ of ℝ^d values.
///
/// Derivatives live on cell midpoints: h′_{k+½} = (h_{k+1} − h_k)/Δ.
#[derive(Clone, Debug, PartialEq)]
pub struct CmVector {
    grid: Grid,
    dim: usize,
    data: Vec<f64>,
}

impl CmVector {
    pub fn new(grid: Grid, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * grid.n_points() {
            return Err(Error::DimensionMismatch { expected: dim * grid.n_points(), got: data.len() });
        }
        if data[..dim].iter().any(|v| *v != 0.0) {
            return Err(Error::Config("Cameron-Martin paths must start at 0".into()));
        }
        Ok(Self { grid, dim, data })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self { grid, dim, data: vec![0.0; dim * grid.n_points()] }
    }

    /// Samples `f(t) − f(0)` on the grid.
    pub fn from_fn(grid: Grid, dim: usize, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let f0 = f(0.0);
        if f0.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f0.len() });
        }
        let mut data = Vec::with_capacity(dim * grid.n_points());
        for k in 0..grid.n_points() {
            let v = f(grid.time(k)) - &f0;
            data.extend_from_slice(v.as_slice());
        }
        data[..dim].fill(0.0);
        Ok(Self { grid, dim, data })
    }

    /// Straight line t·a.
    pub fn linear(grid: Grid, a: &[f64]) -> Self {
        let v = DVector::from_column_slice(a);
        Self::from_fn(grid, a.len(), |t| v.scale(t)).expect("consistent dimension")
    }

    pub(crate) fn from_raw(grid: Grid, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * grid.n_points());
        Self { grid, dim, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(self.at(k))
    }

    pub fn endpoint(&self) -> &[f64] {
        self.at(self.grid.n_steps())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Midpoint derivative on cell k.
    pub fn derivative(&self, k: usize) -> DVector<f64> {
        let n = self.grid.n_steps() as f64;
        DVector::from_iterator(self.dim, self.at(k + 1).iter().zip(self.at(k)).map(|(a, b)| (a - b) * n))
    }

    /// Flat Cameron-Martin energy ∫|h′|² by the midpoint rule.
    pub fn energy(&self) -> f64 {
        (0..self.grid.n_steps()).map(|k| self.derivative(k).norm_squared()).sum::<f64>() * self.grid.dt()
    }

    pub fn combine(&self, a: f64, other: &CmVector, b: f64) -> Result<CmVector> {
        self.grid.ensure_same(&other.grid)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(CmVector { grid: self.grid, dim: self.dim, data })
    }

    /// Every `factor`-th sample, as a path on the coarse `grid`.
    pub fn subsample(&self, grid: Grid, factor: usize) -> CmVector {
        let mut data = Vec::with_capacity(self.dim * grid.n_points());
        for k in 0..grid.n_points() {
            data.extend_from_slice(self.at(k * factor));
        }
        CmVector { grid, dim: self.dim, data }
    }

    pub fn scale(&self, a: f64) -> CmVector {
        CmVector { grid: self.grid, dim: self.dim, data: self.data.iter().map(|x| a * x).collect() }
    }

    /// Largest pointwise Euclidean distance between two paths.
    pub fn sup_distance(&self, other: &CmVector) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok((0..self.grid.n_points())
            .map(|k| {
                self.at(k).iter().zip(other.at(k)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|k| self.at(k).iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
