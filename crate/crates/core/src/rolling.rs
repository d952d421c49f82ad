//! Frame paths and the rolling maps between ℝ^d-paths and manifold paths.
//!
//! Development solves dx = u dw, du = −κ x dwᵀ on the embedded frame bundle
//! with a Heun predictor-corrector step followed by re-projection of the
//! point and modified Gram-Schmidt on the frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{Frame, Manifold, Point};
use crate::series::CmVector;

/// Repairs larger than this are counted in the diagnostics.
pub const REPAIR_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Deterministic,
    Stochastic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairStats {
    /// Steps whose repair exceeded `REPAIR_TOLERANCE`.
    pub triggered: usize,
    pub max_magnitude: f64,
}

/// Points x₀…xₙ and orthonormal frames u₀…uₙ along a grid.
#[derive(Clone, Debug)]
pub struct FramePath {
    manifold: Manifold,
    grid: Grid,
    points: Vec<f64>,
    frames: Vec<f64>,
    provenance: Provenance,
    repairs: RepairStats,
}

impl FramePath {
    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn repairs(&self) -> RepairStats {
        self.repairs
    }

    pub fn x(&self, k: usize) -> &[f64] {
        let n = self.manifold.ambient_dim();
        &self.points[k * n..(k + 1) * n]
    }

    pub fn u(&self, k: usize) -> &[f64] {
        let s = self.manifold.ambient_dim() * self.manifold.dim();
        &self.frames[k * s..(k + 1) * s]
    }

    pub fn point(&self, k: usize) -> Point {
        Point(DVector::from_column_slice(self.x(k)))
    }

    pub fn frame(&self, k: usize) -> Frame {
        Frame(DMatrix::from_column_slice(self.manifold.ambient_dim(), self.manifold.dim(), self.u(k)))
    }

    pub fn endpoint(&self) -> &[f64] {
        self.x(self.grid.n_steps())
    }

    /// Largest frame or point constraint violation along the path.
    pub fn max_defect(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|k| self.manifold.point_defect(self.x(k)).max(self.manifold.frame_defect(self.x(k), self.u(k))))
            .fold(0.0, f64::max)
    }
}

/// Reusable buffers for one path.
pub(crate) struct StepScratch {
    ux: Vec<f64>,
    x_bar: Vec<f64>,
    frame: Vec<f64>,
}

impl StepScratch {
    pub fn new(m: &Manifold) -> Self {
        let n = m.ambient_dim();
        Self { ux: vec![0.0; n], x_bar: vec![0.0; n], frame: Vec::with_capacity(n * m.dim()) }
    }
}

/// One Heun step of dx = u dw, du = −κ x dwᵀ with increment `xi`, followed
/// by repair. Returns the repair magnitude.
#[inline]
pub(crate) fn heun_step(m: &Manifold, x: &mut [f64], u: &mut [f64], xi: &[f64], s: &mut StepScratch) -> f64 {
    let n = m.ambient_dim();
    let kappa = m.curvature_sign();
    m.push(u, xi, &mut s.ux);
    if kappa == 0.0 {
        x.iter_mut().zip(&s.ux).for_each(|(a, b)| *a += b);
        return 0.0;
    }
    let xi2: f64 = xi.iter().map(|v| v * v).sum();
    // corrector frame uses x + x̄ = 2x + uξ
    for i in 0..n {
        s.x_bar[i] = 2.0 * x[i] + s.ux[i];
    }
    for (j, xij) in xi.iter().enumerate() {
        let c = &mut u[j * n..(j + 1) * n];
        for i in 0..n {
            c[i] -= 0.5 * kappa * s.x_bar[i] * xij;
        }
    }
    for i in 0..n {
        x[i] += s.ux[i] - 0.5 * kappa * xi2 * x[i];
    }
    let p = m.project_point(x);
    let f = m.repair_frame(x, u, &mut s.frame);
    p.max(f)
}

/// Develop the increments Δw₀…Δw_{n−1} (stored flat) from (o, u₀).
pub(crate) fn develop_increments(
    m: &Manifold,
    grid: Grid,
    increments: &[f64],
    provenance: Provenance,
    repair_limit: Option<f64>,
) -> Result<FramePath> {
    let d = m.dim();
    let n = m.ambient_dim();
    let steps = grid.n_steps();
    if increments.len() != steps * d {
        return Err(Error::DimensionMismatch { expected: steps * d, got: increments.len() });
    }
    let mut points = Vec::with_capacity(n * (steps + 1));
    let mut frames = Vec::with_capacity(n * d * (steps + 1));
    let mut x = m.base_point().0.as_slice().to_vec();
    let mut u = m.base_frame().0.as_slice().to_vec();
    points.extend_from_slice(&x);
    frames.extend_from_slice(&u);
    let mut scratch = StepScratch::new(m);
    let mut repairs = RepairStats::default();
    for k in 0..steps {
        let r = heun_step(m, &mut x, &mut u, &increments[k * d..(k + 1) * d], &mut scratch);
        if !r.is_finite() || repair_limit.is_some_and(|lim| r > lim) {
            return Err(Error::RepairTooLarge { step: k, magnitude: r, limit: repair_limit.unwrap_or(0.0) });
        }
        if r > REPAIR_TOLERANCE {
            repairs.triggered += 1;
        }
        repairs.max_magnitude = repairs.max_magnitude.max(r);
        points.extend_from_slice(&x);
        frames.extend_from_slice(&u);
    }
    Ok(FramePath { manifold: *m, grid, points, frames, provenance, repairs })
}

/// Roll a Cameron-Martin path onto the manifold.
pub fn develop(w: &CmVector, m: &Manifold) -> Result<FramePath> {
    if w.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: w.dim() });
    }
    let d = m.dim();
    let steps = w.grid().n_steps();
    let mut inc = Vec::with_capacity(steps * d);
    for k in 0..steps {
        inc.extend(w.at(k + 1).iter().zip(w.at(k)).map(|(a, b)| a - b));
    }
    develop_increments(m, w.grid(), &inc, Provenance::Deterministic, None)
}

/// Parallel transport of u₀ along the sampled points σ₀ = o, …, σₙ.
pub fn horizontal_lift(sigma: &[Point], m: &Manifold) -> Result<FramePath> {
    if sigma.len() < 2 {
        return Err(Error::Config("a path needs at least two points".into()));
    }
    let grid = Grid::new(sigma.len() - 1)?;
    let n = m.ambient_dim();
    let d = m.dim();
    for p in sigma {
        m.check_point(p)?;
    }
    if (sigma[0].0.clone() - m.base_point().0).amax() > 1e-12 {
        return Err(Error::InvalidPoint { defect: (sigma[0].0.clone() - m.base_point().0).amax() });
    }
    let kappa = m.curvature_sign();
    let mut points = Vec::with_capacity(n * sigma.len());
    let mut frames = Vec::with_capacity(n * d * sigma.len());
    let mut u = m.base_frame().0.as_slice().to_vec();
    let mut u_bar = u.clone();
    let mut dsig = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut repairs = RepairStats::default();
    points.extend_from_slice(sigma[0].0.as_slice());
    frames.extend_from_slice(&u);
    for k in 0..grid.n_steps() {
        let x0 = sigma[k].0.as_slice();
        let x1 = sigma[k + 1].0.as_slice();
        for i in 0..n {
            dsig[i] = x1[i] - x0[i];
        }
        // v′ = −κ⟨σ′, v⟩σ, Heun in the increment form.
        for j in 0..d {
            let c = &u[j * n..(j + 1) * n];
            let p = m.inner(&dsig, c);
            for i in 0..n {
                u_bar[j * n + i] = c[i] - kappa * p * x0[i];
            }
        }
        for j in 0..d {
            let p0 = m.inner(&dsig, &u[j * n..(j + 1) * n]);
            let p1 = m.inner(&dsig, &u_bar[j * n..(j + 1) * n]);
            for i in 0..n {
                u[j * n + i] -= 0.5 * kappa * (p0 * x0[i] + p1 * x1[i]);
            }
        }
        let r = m.repair_frame(x1, &mut u, &mut scratch);
        if r > REPAIR_TOLERANCE {
            repairs.triggered += 1;
        }
        repairs.max_magnitude = repairs.max_magnitude.max(r);
        points.extend_from_slice(x1);
        frames.extend_from_slice(&u);
    }
    Ok(FramePath { manifold: *m, grid, points, frames, provenance: Provenance::Deterministic, repairs })
}

/// w_t = ∫₀ᵗ u⁻¹σ′, accumulated as Σ ½(u_k⁻¹ + u_{k+1}⁻¹)Δσ_k.
pub fn anti_develop(fp: &FramePath) -> Result<CmVector> {
    let m = fp.manifold();
    let d = m.dim();
    let n = m.ambient_dim();
    if fp.max_defect() > 1e-8 {
        return Err(Error::InvalidFrame { defect: fp.max_defect() });
    }
    let mut data = Vec::with_capacity(d * fp.grid.n_points());
    let mut w = vec![0.0; d];
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut dsig = vec![0.0; n];
    data.extend_from_slice(&w);
    for k in 0..fp.grid.n_steps() {
        for i in 0..n {
            dsig[i] = fp.x(k + 1)[i] - fp.x(k)[i];
        }
        m.pull(fp.u(k), &dsig, &mut a);
        m.pull(fp.u(k + 1), &dsig, &mut b);
        for j in 0..d {
            w[j] += 0.5 * (a[j] + b[j]);
        }
        data.extend_from_slice(&w);
    }
    Ok(CmVector::from_raw(fp.grid, d, data))
}

/// ∫|σ′|² by the midpoint rule on chord lengths.
pub fn path_energy(fp: &FramePath) -> f64 {
    let m = fp.manifold();
    let n = m.ambient_dim();
    let mut dsig = vec![0.0; n];
    let mut total = 0.0;
    for k in 0..fp.grid.n_steps() {
        for i in 0..n {
            dsig[i] = fp.x(k + 1)[i] - fp.x(k)[i];
        }
        total += m.inner(&dsig, &dsig);
    }
    total * fp.grid.n_steps() as f64
}
