//! Brownian driving noise, stochastic development, and the stochastic
//! integrals used by the integration-by-parts engine.
//!
//! Scheme convention: integrals against δβ (Stratonovich) use the midpoint
//! (trapezoid) rule, integrals against dβ (Itô) use left points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::Manifold;
use crate::rng::NoiseStream;
use crate::rolling::{develop_increments, FramePath, Provenance};
use crate::series::{CmVector, MatrixPath};

/// Development steps whose repair exceeds this are rejected.
pub const REPAIR_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct BrownianDraw {
    seed: u64,
    path_index: u64,
    grid: Grid,
    dim: usize,
    increments: Vec<f64>,
    path: Vec<f64>,
}

pub fn sample_brownian(seed: u64, path_index: u64, grid: Grid, dim: usize) -> BrownianDraw {
    let steps = grid.n_steps();
    let sd = grid.dt().sqrt();
    let mut stream = NoiseStream::new(seed, path_index, dim);
    let mut increments = vec![0.0; steps * dim];
    for chunk in increments.chunks_exact_mut(dim) {
        stream.fill_step(chunk);
        chunk.iter_mut().for_each(|v| *v *= sd);
    }
    BrownianDraw::from_increments(grid, dim, increments, seed, path_index)
}

impl BrownianDraw {
    /// A draw with externally supplied increments (used by quadrature oracles).
    pub fn from_increments(grid: Grid, dim: usize, increments: Vec<f64>, seed: u64, path_index: u64) -> Self {
        let mut path = Vec::with_capacity(dim * grid.n_points());
        let mut beta = vec![0.0; dim];
        path.extend_from_slice(&beta);
        for chunk in increments.chunks_exact(dim) {
            beta.iter_mut().zip(chunk).for_each(|(b, c)| *b += c);
            path.extend_from_slice(&beta);
        }
        Self { seed, path_index, grid, dim, increments, path }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn beta(&self, k: usize) -> &[f64] {
        &self.path[k * self.dim..(k + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.beta(self.grid.n_steps())
    }

    pub fn as_cm_path(&self) -> CmVector {
        CmVector::from_raw(self.grid, self.dim, self.path.clone())
    }
}

/// Frame-bundle Brownian motion driven by `b`.
pub fn stochastic_develop(b: &BrownianDraw, m: &Manifold) -> Result<FramePath> {
    if b.dim != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: b.dim });
    }
    develop_increments(m, b.grid, &b.increments, Provenance::Stochastic, Some(REPAIR_LIMIT))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ItoLeft,
    StratonovichMidpoint,
}

/// A vector-valued integrand sampled at grid nodes, with its scheme.
#[derive(Clone, Copy, Debug)]
pub struct StochIntegralSpec<'a> {
    pub samples: &'a [f64],
    pub dim: usize,
    pub scheme: Scheme,
}

/// Σ ⟨f, Δβ_k⟩ with f taken at the left point or the cell average.
pub fn stochastic_integral(spec: StochIntegralSpec<'_>, b: &BrownianDraw) -> Result<f64> {
    let d = spec.dim;
    if d != b.dim {
        return Err(Error::DimensionMismatch { expected: b.dim, got: d });
    }
    if spec.samples.len() != d * b.grid.n_points() {
        return Err(Error::DimensionMismatch { expected: d * b.grid.n_points(), got: spec.samples.len() });
    }
    let mut total = 0.0;
    for k in 0..b.grid.n_steps() {
        let f0 = &spec.samples[k * d..(k + 1) * d];
        let db = b.increment(k);
        total += match spec.scheme {
            Scheme::ItoLeft => f0.iter().zip(db).map(|(f, x)| f * x).sum::<f64>(),
            Scheme::StratonovichMidpoint => {
                let f1 = &spec.samples[(k + 1) * d..(k + 2) * d];
                f0.iter().zip(f1).zip(db).map(|((a, c), x)| 0.5 * (a + c) * x).sum::<f64>()
            }
        };
    }
    Ok(total)
}

/// Itô integral ∫⟨f_s, dβ_s⟩ of node samples f.
pub fn ito_integral(samples: &[f64], b: &BrownianDraw) -> Result<f64> {
    stochastic_integral(StochIntegralSpec { samples, dim: b.dim, scheme: Scheme::ItoLeft }, b)
}

/// Itô integral ∫ M_s dβ_s of a matrix-valued integrand.
pub fn ito_integral_matrix(m: &MatrixPath, b: &BrownianDraw) -> Result<DVector<f64>> {
    let (rows, cols) = m.shape();
    if cols != b.dim || m.len() < b.grid.n_steps() {
        return Err(Error::DimensionMismatch { expected: b.dim, got: cols });
    }
    let mut out = DVector::zeros(rows);
    for k in 0..b.grid.n_steps() {
        out.gemv(1.0, &m.at(k), &DVector::from_column_slice(b.increment(k)), 1.0);
    }
    Ok(out)
}

/// A_s⟨k⟩ = ∫₀ˢ R_ũ(k, δβ) under both schemes.
#[derive(Clone, Debug)]
pub struct CurvatureIntegral {
    pub stratonovich: MatrixPath,
    pub ito: MatrixPath,
    /// Largest entrywise gap between the two schemes.
    pub gap: f64,
    pub tolerance: f64,
}

pub fn curvature_integral(fp: &FramePath, k: &CmVector, b: &BrownianDraw, m: &Manifold) -> Result<CurvatureIntegral> {
    let grid = fp.grid();
    grid.ensure_same(&k.grid())?;
    grid.ensure_same(&b.grid)?;
    let d = m.dim();
    if k.dim() != d || b.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: k.dim() });
    }
    let n = grid.n_steps();
    let mut strat = MatrixPath::zeros(d, d, n + 1);
    let mut ito = MatrixPath::zeros(d, d, n + 1);
    let mut a_s = DMatrix::zeros(d, d);
    let mut a_i = DMatrix::zeros(d, d);
    let mut gap: f64 = 0.0;
    let mut max_dk: f64 = 0.0;
    for j in 0..n {
        let db = b.increment(j);
        let r0 = m.curvature_op(&fp.frame(j), k.at(j), db)?;
        let r1 = m.curvature_op(&fp.frame(j + 1), k.at(j + 1), db)?;
        a_s += (&r0 + r1) * 0.5;
        a_i += r0;
        strat.set(j + 1, &a_s);
        ito.set(j + 1, &a_i);
        gap = gap.max((&a_s - &a_i).amax());
        max_dk = max_dk.max(k.derivative(j).amax());
    }
    // The schemes differ by Σ R(½Δk, Δβ): a Riemann sum of size O(Δ).
    let tolerance = 10.0 * grid.dt() * m.curvature_bound() * (1.0 + max_dk) * (1.0 + (d as f64).sqrt()) + 1e-12;
    if gap > tolerance {
        return Err(Error::SchemeDisagreement { gap, tolerance });
    }
    Ok(CurvatureIntegral { stratonovich: strat, ito, gap, tolerance })
}
