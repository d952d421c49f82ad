//! Damped parallel transport T′ = −½Ric T, the Gram kernel
//! K_s = T_s Q(s) T₁ᵀ with Q(s) = ∫₀ˢ T⁻¹T⁻ᵀ, and the orthogonal lift
//! J_s = K_s K₁⁻¹ H of a vector field along a frame path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cm_kernel::{integrate_fundamental, SampledField};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{Manifold, VectorField};
use crate::rolling::FramePath;
use crate::series::{CmVector, MatrixPath};

/// Allowed deviation of T·T⁻¹ from the identity.
pub const DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct DampedKernel {
    grid: Grid,
    dim: usize,
    ricci: MatrixPath,
    t: MatrixPath,
    t_inv: MatrixPath,
    gram: MatrixPath,
    k: MatrixPath,
    k1_inv: DMatrix<f64>,
    c_tilde: DMatrix<f64>,
    tu_drift: f64,
    k1_min_eig: f64,
    eig_floor: f64,
}

/// Kernel along a frame path, with Ricci sampled from its frames.
pub fn damped_transport(fp: &FramePath, m: &Manifold) -> Result<DampedKernel> {
    let grid = fp.grid();
    let d = m.dim();
    let mut ricci = MatrixPath::zeros(d, d, grid.n_points());
    for k in 0..grid.n_points() {
        ricci.set(k, &m.ricci_endomorphism(&fp.frame(k))?);
    }
    DampedKernel::from_ricci(grid, ricci, (d as f64 - 1.0) * m.curvature_bound())
}

impl DampedKernel {
    /// `ricci_bound` is (d−1)N, used for the K₁ eigenvalue floor.
    pub fn from_ricci(grid: Grid, ricci: MatrixPath, ricci_bound: f64) -> Result<Self> {
        let (d, _) = ricci.shape();
        if ricci.len() != grid.n_points() {
            return Err(Error::GridMismatch(grid.n_steps(), ricci.len().saturating_sub(1)));
        }
        let mut half = ricci.clone();
        for k in 0..half.len() {
            half.slice_mut(k).iter_mut().for_each(|v| *v *= 0.5);
        }
        let f = integrate_fundamental(&SampledField(half), &grid);
        let (t, t_inv) = (f.s, f.u);
        let n = grid.n_steps();
        let mut tu_drift: f64 = 0.0;
        for k in 0..=n {
            let e = t.at(k) * t_inv.at(k) - DMatrix::<f64>::identity(d, d);
            tu_drift = tu_drift.max(e.amax());
        }
        if tu_drift > DRIFT_LIMIT {
            return Err(Error::IntegrationFailure(format!("T·T⁻¹ drift {tu_drift:.3e}")));
        }
        let mut gram = MatrixPath::zeros(d, d, n + 1);
        let mut q = DMatrix::<f64>::zeros(d, d);
        let mut prev = t_inv.at(0) * t_inv.at(0).transpose();
        let h = grid.dt();
        for k in 0..n {
            let next = t_inv.at(k + 1) * t_inv.at(k + 1).transpose();
            q += (&prev + &next) * (0.5 * h);
            gram.set(k + 1, &q);
            prev = next;
        }
        let t1 = t.matrix(n);
        let mut kpath = MatrixPath::zeros(d, d, n + 1);
        for k in 0..=n {
            kpath.set(k, &(t.at(k) * gram.at(k) * t1.transpose()));
        }
        let k1 = kpath.matrix(n);
        let k1 = (&k1 + k1.transpose()) * 0.5;
        let eig = SymmetricEigen::new(k1);
        let k1_min_eig = eig.eigenvalues.min();
        let eig_floor = (-2.0 * ricci_bound).exp() / 2.0;
        if !(k1_min_eig >= eig_floor) {
            return Err(Error::IntegrationFailure(format!(
                "K₁ eigenvalue {k1_min_eig:.3e} below floor {eig_floor:.3e}"
            )));
        }
        let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
        let k1_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
        // C̃ = Q(1)⁻¹T₁⁻¹ = T₁ᵀK₁⁻¹
        let c_tilde = t1.transpose() * &k1_inv;
        Ok(Self { grid, dim: d, ricci, t, t_inv, gram, k: kpath, k1_inv, c_tilde, tu_drift, k1_min_eig, eig_floor })
    }

    /// Kernel for a constant-curvature model, where Ric = κ(d−1)·I along
    /// every path and the kernel is deterministic. Computed on a grid
    /// `refine` times finer and sampled back onto `grid`.
    pub fn constant_curvature(m: &Manifold, grid: Grid, refine: usize) -> Result<Self> {
        let fine = grid.refine(refine);
        let d = m.dim();
        let ric = DMatrix::identity(d, d) * m.ricci_factor();
        let ricci = MatrixPath::from_matrices(&vec![ric; fine.n_points()]);
        let ker = Self::from_ricci(fine, ricci, (d as f64 - 1.0) * m.curvature_bound())?;
        Ok(ker.subsample(grid, refine.max(1)))
    }

    fn subsample(self, grid: Grid, factor: usize) -> Self {
        if factor == 1 {
            return self;
        }
        let pick = |p: &MatrixPath| {
            let mats: Vec<DMatrix<f64>> = (0..grid.n_points()).map(|k| p.matrix(k * factor)).collect();
            MatrixPath::from_matrices(&mats)
        };
        Self {
            grid,
            dim: self.dim,
            ricci: pick(&self.ricci),
            t: pick(&self.t),
            t_inv: pick(&self.t_inv),
            gram: pick(&self.gram),
            k: pick(&self.k),
            ..self
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ricci(&self) -> &MatrixPath {
        &self.ricci
    }

    pub fn t(&self) -> &MatrixPath {
        &self.t
    }

    pub fn t_inv(&self) -> &MatrixPath {
        &self.t_inv
    }

    pub fn gram(&self) -> &MatrixPath {
        &self.gram
    }

    pub fn k(&self) -> &MatrixPath {
        &self.k
    }

    pub fn k1_inv(&self) -> &DMatrix<f64> {
        &self.k1_inv
    }

    pub fn c_tilde(&self) -> &DMatrix<f64> {
        &self.c_tilde
    }

    pub fn tu_drift(&self) -> f64 {
        self.tu_drift
    }

    pub fn k1_min_eigenvalue(&self) -> f64 {
        self.k1_min_eig
    }

    pub fn eigenvalue_floor(&self) -> f64 {
        self.eig_floor
    }

    /// (sup‖T_s‖, sup‖T_s⁻¹‖) in the operator norm.
    pub fn transport_norms(&self) -> (f64, f64) {
        let sup = |p: &MatrixPath| (0..p.len()).map(|k| p.at(k).into_owned().svd(false, false).singular_values.max()).fold(0.0, f64::max);
        (sup(&self.t), sup(&self.t_inv))
    }

    pub fn k1_inv_norm(&self) -> f64 {
        1.0 / self.k1_min_eig
    }

    /// Z′ = −½Ric Z + h′, Z(0) = 0, by RK4 with h′ constant on each cell.
    pub fn solve_damped(&self, h: &CmVector) -> Result<CmVector> {
        self.grid.ensure_same(&h.grid())?;
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: h.dim() });
        }
        let d = self.dim;
        let dt = self.grid.dt();
        let mut z = DVector::<f64>::zeros(d);
        let mut data = Vec::with_capacity(d * self.grid.n_points());
        data.extend_from_slice(z.as_slice());
        for k in 0..self.grid.n_steps() {
            let f = h.derivative(k);
            let r0 = self.ricci.at(k) * 0.5;
            let r1 = self.ricci.at(k + 1) * 0.5;
            let rm = (&r0 + &r1) * 0.5;
            let k1 = &f - &r0 * &z;
            let k2 = &f - &rm * (&z + &k1 * (0.5 * dt));
            let k3 = &f - &rm * (&z + &k2 * (0.5 * dt));
            let k4 = &f - &r1 * (&z + &k3 * dt);
            z += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
            data.extend_from_slice(z.as_slice());
        }
        Ok(CmVector::from_raw(self.grid, d, data))
    }

    /// ∫₀ˢ T⁻ᵀ v by the trapezoid rule, as a Cameron-Martin path.
    pub fn transported_integral(&self, v: &DVector<f64>) -> CmVector {
        let d = self.dim;
        let dt = self.grid.dt();
        let mut acc = DVector::<f64>::zeros(d);
        let mut data = Vec::with_capacity(d * self.grid.n_points());
        data.extend_from_slice(acc.as_slice());
        let mut prev = self.t_inv.at(0).transpose() * v;
        for k in 0..self.grid.n_steps() {
            let next = self.t_inv.at(k + 1).transpose() * v;
            acc += (&prev + &next) * (0.5 * dt);
            data.extend_from_slice(acc.as_slice());
            prev = next;
        }
        CmVector::from_raw(self.grid, d, data)
    }

    /// Z_α for α = 1…d: the damped solutions driven by h′ = T⁻ᵀe_α.
    pub fn z_basis(&self) -> Result<Vec<CmVector>> {
        (0..self.dim)
            .map(|a| {
                let mut e = DVector::zeros(self.dim);
                e[a] = 1.0;
                self.solve_damped(&self.transported_integral(&e))
            })
            .collect()
    }
}

/// Kernel and Z_α basis on a constant-curvature model. Both are the same
/// for every path, so they are computed once, on a grid refined until it
/// has at least `min_fine_steps` steps, and sampled back.
#[derive(Clone, Debug)]
pub struct DeterministicLift {
    pub kernel: DampedKernel,
    pub z: Vec<CmVector>,
}

pub fn deterministic_lift(m: &Manifold, grid: Grid, min_fine_steps: usize) -> Result<DeterministicLift> {
    let refine = min_fine_steps.div_ceil(grid.n_steps()).max(1);
    let fine = DampedKernel::constant_curvature(m, grid.refine(refine), 1)?;
    let z = fine.z_basis()?.iter().map(|z| z.subsample(grid, refine)).collect();
    Ok(DeterministicLift { kernel: fine.subsample(grid, refine), z })
}

/// Z′ = −½Ric_{u_s}Z + h′ along a frame path.
pub fn solve_damped(h: &CmVector, fp: &FramePath, m: &Manifold) -> Result<CmVector> {
    damped_transport(fp, m)?.solve_damped(h)
}

#[derive(Clone, Debug)]
pub struct LiftResult {
    /// H = u₁⁻¹X(x₁).
    pub h: DVector<f64>,
    /// J_s = K_s K₁⁻¹ H.
    pub j: CmVector,
    /// Φ_s = ∫₀ˢ T⁻ᵀ C̃ H.
    pub phi: CmVector,
    /// The damped solution driven by Φ, computed independently of K.
    pub z_phi: CmVector,
    /// Ambient vectors u_s J_s, one per grid node.
    pub lifted: MatrixPath,
}

pub fn orthogonal_lift(fp: &FramePath, ker: &DampedKernel, x: &VectorField) -> Result<LiftResult> {
    fp.grid().ensure_same(&ker.grid)?;
    let m = fp.manifold();
    x.check(m)?;
    let d = m.dim();
    let n = m.ambient_dim();
    let steps = fp.grid().n_steps();
    let mut xv = vec![0.0; n];
    x.value(m, fp.endpoint(), &mut xv);
    let mut h = DVector::zeros(d);
    m.pull(fp.u(steps), &xv, h.as_mut_slice());
    let w = &ker.k1_inv * &h;
    let mut data = Vec::with_capacity(d * (steps + 1));
    let mut lifted = MatrixPath::zeros(n, 1, steps + 1);
    for k in 0..=steps {
        let jk = ker.k.at(k) * &w;
        data.extend_from_slice(jk.as_slice());
        m.push(fp.u(k), jk.as_slice(), lifted.slice_mut(k));
    }
    data[..d].fill(0.0);
    let j = CmVector::from_raw(fp.grid(), d, data);
    let phi = ker.transported_integral(&(&ker.c_tilde * &h));
    let z_phi = ker.solve_damped(&phi)?;
    Ok(LiftResult { h, j, phi, z_phi, lifted })
}

#[derive(Clone, Copy, Debug)]
pub struct LiftDefect {
    /// Largest cell residual of J′ = −½Ric J + T⁻ᵀC̃H.
    pub max_residual: f64,
    /// sup |J − Z_Φ|.
    pub form_gap: f64,
    /// |J₁ − H|.
    pub endpoint: f64,
}

pub fn verify_lift_ode(res: &LiftResult, ker: &DampedKernel) -> Result<LiftDefect> {
    ker.grid.ensure_same(&res.j.grid())?;
    let forcing = &ker.c_tilde * &res.h;
    let mut max_residual: f64 = 0.0;
    for k in 0..ker.grid.n_steps() {
        let jm = (res.j.vector(k) + res.j.vector(k + 1)) * 0.5;
        let rm = (ker.ricci.at(k) + ker.ricci.at(k + 1)) * 0.25;
        let phi = (ker.t_inv.at(k) + ker.t_inv.at(k + 1)).transpose() * &forcing * 0.5;
        let r = res.j.derivative(k) + rm * jm - phi;
        max_residual = max_residual.max(r.amax());
    }
    let endpoint = (DVector::from_column_slice(res.j.endpoint()) - &res.h).amax();
    Ok(LiftDefect { max_residual, form_gap: res.j.sup_distance(&res.z_phi)?, endpoint })
}
