//! Cameron-Martin calculus for the α-inner product
//! ⟨h,k⟩_α = ∫₀¹ (h′ + αh)·(k′ + αk) dt.
//!
//! With S′ = −αS, S(0) = I and U = S⁻¹ the endpoint map E₁h = h(1) has
//! adjoint (E₁*a)(t) = S(t)G(t)S(1)ᵀa where G(t) = ∫₀ᵗ UUᵀ, and the
//! minimal-norm path ending at a is S(t)G(t)G(1)⁻¹U(1)a.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::series::{CmVector, MatrixPath};

const CONDITION_LIMIT: f64 = 1e12;

/// A continuous matrix-valued coefficient α(t).
pub trait MatrixField {
    fn dim(&self) -> usize;

    /// α at time t_k + θΔ, evaluated from inside cell k. Coefficients with
    /// jumps on grid nodes use the cell to pick the correct side.
    fn eval_in_cell(&self, grid: &Grid, k: usize, theta: f64) -> DMatrix<f64>;
}

/// α(t) given as a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> DMatrix<f64>> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> DMatrix<f64>> MatrixField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_in_cell(&self, grid: &Grid, k: usize, theta: f64) -> DMatrix<f64> {
        (self.f)((k as f64 + theta) * grid.dt())
    }
}

#[derive(Clone, Debug)]
pub struct ConstantField(pub DMatrix<f64>);

impl MatrixField for ConstantField {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn eval_in_cell(&self, _: &Grid, _: usize, _: f64) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// α constant on [bᵢ, bᵢ₊₁) for break points b₀ = 0 < b₁ < … < 1.
#[derive(Clone, Debug)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<DMatrix<f64>>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if breaks.len() != values.len() || breaks.first() != Some(&0.0) {
            return Err(Error::Config("piecewise α needs one value per break, starting at 0".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("break points must increase".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &DMatrix<f64>)> {
        let ends = self.breaks.iter().skip(1).copied().chain(std::iter::once(1.0));
        self.breaks.iter().copied().zip(ends).zip(&self.values).map(|((a, b), v)| (a, b, v))
    }
}

impl MatrixField for PiecewiseConstant {
    fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    fn eval_in_cell(&self, grid: &Grid, k: usize, _: f64) -> DMatrix<f64> {
        let mid = (k as f64 + 0.5) * grid.dt();
        let i = self.breaks.partition_point(|b| *b <= mid) - 1;
        self.values[i].clone()
    }
}

/// α sampled on grid nodes, linearly interpolated inside cells.
#[derive(Clone, Debug)]
pub struct SampledField(pub MatrixPath);

impl MatrixField for SampledField {
    fn dim(&self) -> usize {
        self.0.shape().0
    }

    fn eval_in_cell(&self, _: &Grid, k: usize, theta: f64) -> DMatrix<f64> {
        if theta == 0.0 {
            self.0.matrix(k)
        } else {
            self.0.at(k) * (1.0 - theta) + self.0.at(k + 1) * theta
        }
    }
}

pub(crate) struct Fundamental {
    pub s: MatrixPath,
    pub u: MatrixPath,
    /// ∫₀^{t_k} UUᵀ, integrated in the same RK4 pass.
    pub gram: MatrixPath,
    pub alpha_mid: MatrixPath,
    /// α at the left and right end of each cell, seen from inside it.
    pub alpha_left: MatrixPath,
    pub alpha_right: MatrixPath,
}

/// RK4 for the coupled system S′ = −αS, U′ = Uα, G′ = UUᵀ.
pub(crate) fn integrate_fundamental<A: MatrixField + ?Sized>(alpha: &A, grid: &Grid) -> Fundamental {
    let d = alpha.dim();
    let n = grid.n_steps();
    let h = grid.dt();
    let mut s_path = MatrixPath::zeros(d, d, n + 1);
    let mut u_path = MatrixPath::zeros(d, d, n + 1);
    let mut g_path = MatrixPath::zeros(d, d, n + 1);
    let mut alpha_mid = MatrixPath::zeros(d, d, n);
    let mut alpha_left = MatrixPath::zeros(d, d, n);
    let mut alpha_right = MatrixPath::zeros(d, d, n);
    let mut s = DMatrix::<f64>::identity(d, d);
    let mut u = DMatrix::<f64>::identity(d, d);
    let mut g = DMatrix::<f64>::zeros(d, d);
    s_path.set(0, &s);
    u_path.set(0, &u);
    for k in 0..n {
        let a0 = alpha.eval_in_cell(grid, k, 0.0);
        let am = alpha.eval_in_cell(grid, k, 0.5);
        let a1 = alpha.eval_in_cell(grid, k, 1.0);
        let ks1 = -(&a0 * &s);
        let ku1 = &u * &a0;
        let kg1 = &u * u.transpose();
        let s2 = &s + &ks1 * (0.5 * h);
        let u2 = &u + &ku1 * (0.5 * h);
        let ks2 = -(&am * &s2);
        let ku2 = &u2 * &am;
        let kg2 = &u2 * u2.transpose();
        let s3 = &s + &ks2 * (0.5 * h);
        let u3 = &u + &ku2 * (0.5 * h);
        let ks3 = -(&am * &s3);
        let ku3 = &u3 * &am;
        let kg3 = &u3 * u3.transpose();
        let s4 = &s + &ks3 * h;
        let u4 = &u + &ku3 * h;
        let ks4 = -(&a1 * &s4);
        let ku4 = &u4 * &a1;
        let kg4 = &u4 * u4.transpose();
        s += (ks1 + (ks2 + ks3) * 2.0 + ks4) * (h / 6.0);
        u += (ku1 + (ku2 + ku3) * 2.0 + ku4) * (h / 6.0);
        g += (kg1 + (kg2 + kg3) * 2.0 + kg4) * (h / 6.0);
        s_path.set(k + 1, &s);
        u_path.set(k + 1, &u);
        g_path.set(k + 1, &g);
        alpha_mid.set(k, &am);
        alpha_left.set(k, &a0);
        alpha_right.set(k, &a1);
    }
    Fundamental { s: s_path, u: u_path, gram: g_path, alpha_mid, alpha_left, alpha_right }
}

/// Fundamental solution, its inverse and Gram integral on a grid.
#[derive(Clone, Debug)]
pub struct AlphaKernel {
    grid: Grid,
    dim: usize,
    s: MatrixPath,
    s_inv: MatrixPath,
    gram: MatrixPath,
    alpha_mid: MatrixPath,
    alpha_left: MatrixPath,
    alpha_right: MatrixPath,
    conditions: Vec<f64>,
    gram1_inv: DMatrix<f64>,
}

pub fn solve_fundamental<A: MatrixField + ?Sized>(alpha: &A, grid: Grid) -> Result<AlphaKernel> {
    let d = alpha.dim();
    let f = integrate_fundamental(alpha, &grid);
    let mut conditions = Vec::with_capacity(grid.n_points());
    for k in 0..grid.n_points() {
        let sv = f.s.matrix(k).singular_values();
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let c = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(c <= CONDITION_LIMIT) {
            return Err(Error::SingularFundamental { condition: c });
        }
        conditions.push(c);
    }
    let g1 = f.gram.matrix(grid.n_steps());
    let g1 = (&g1 + g1.transpose()) * 0.5;
    let gram1_inv = g1
        .cholesky()
        .ok_or_else(|| Error::Internal("G(1) is not positive definite".into()))?
        .inverse();
    Ok(AlphaKernel {
        grid,
        dim: d,
        s: f.s,
        s_inv: f.u,
        gram: f.gram,
        alpha_mid: f.alpha_mid,
        alpha_left: f.alpha_left,
        alpha_right: f.alpha_right,
        conditions,
        gram1_inv,
    })
}

impl AlphaKernel {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> &MatrixPath {
        &self.s
    }

    pub fn s_inv(&self) -> &MatrixPath {
        &self.s_inv
    }

    pub fn gram(&self) -> &MatrixPath {
        &self.gram
    }

    pub fn conditions(&self) -> &[f64] {
        &self.conditions
    }

    pub fn max_condition(&self) -> f64 {
        self.conditions.iter().copied().fold(0.0, f64::max)
    }

    /// E₁E₁* = S(1)G(1)S(1)ᵀ.
    pub fn endpoint_gram(&self) -> DMatrix<f64> {
        let s1 = self.s.last();
        s1 * self.gram.last() * s1.transpose()
    }

    fn check(&self, h: &CmVector) -> Result<()> {
        self.grid.ensure_same(&h.grid())?;
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: h.dim() });
        }
        Ok(())
    }

    fn path_from(&self, f: impl Fn(usize) -> DVector<f64>) -> CmVector {
        let mut data = Vec::with_capacity(self.dim * self.grid.n_points());
        for k in 0..self.grid.n_points() {
            data.extend_from_slice(f(k).as_slice());
        }
        data[..self.dim].fill(0.0);
        CmVector::from_raw(self.grid, self.dim, data)
    }
}

/// Weights of the Lagrange interpolant through the nodes `start..start+m`
/// and of its derivative, at position `x` measured in grid steps.
fn lagrange(start: usize, m: usize, x: f64) -> ([f64; 5], [f64; 5]) {
    let mut val = [0.0; 5];
    let mut der = [0.0; 5];
    for i in 0..m {
        let xi = (start + i) as f64;
        let mut p = 1.0;
        let mut dp = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let xj = (start + j) as f64;
            let f = (x - xj) / (xi - xj);
            dp = dp * f + p / (xi - xj);
            p *= f;
        }
        val[i] = p;
        der[i] = dp;
    }
    (val, der)
}

/// Value and derivative of h at `x` (in grid steps) from `m` nearby nodes,
/// written into `val` and `der`.
fn local_jet(h: &CmVector, x: f64, m: usize, val: &mut [f64], der: &mut [f64]) {
    let n = h.grid().n_steps();
    let start = ((x - (m as f64 - 1.0) / 2.0).round().max(0.0) as usize).min(n + 1 - m);
    let (wv, wd) = lagrange(start, m, x);
    let inv_dt = 1.0 / h.grid().dt();
    val.fill(0.0);
    der.fill(0.0);
    for i in 0..m {
        for (a, hk) in h.at(start + i).iter().enumerate() {
            val[a] += wv[i] * hk;
            der[a] += wd[i] * hk * inv_dt;
        }
    }
}

/// h′ + αh at the Simpson points of every cell: left end, midpoint, right end.
fn simpson_samples(h: &CmVector, ker: &AlphaKernel) -> Vec<f64> {
    let d = ker.dim;
    let n = ker.grid.n_steps();
    let mut out = vec![0.0; 3 * d * n];
    let mut val = vec![0.0; d];
    let mut der = vec![0.0; d];
    for c in 0..n {
        for (j, (x, m, a)) in [
            (c as f64, 5, ker.alpha_left.at(c)),
            (c as f64 + 0.5, 4, ker.alpha_mid.at(c)),
            (c as f64 + 1.0, 5, ker.alpha_right.at(c)),
        ]
        .into_iter()
        .enumerate()
        {
            local_jet(h, x, m, &mut val, &mut der);
            let o = &mut out[(3 * c + j) * d..(3 * c + j + 1) * d];
            for r in 0..d {
                o[r] = der[r] + (0..d).map(|q| a[(r, q)] * val[q]).sum::<f64>();
            }
        }
    }
    out
}

/// α-inner product by composite Simpson, with h and h′ at nodes and
/// midpoints from fourth-order Lagrange stencils. Falls back to the
/// midpoint rule on grids with fewer than four cells.
pub fn alpha_inner(h: &CmVector, k: &CmVector, ker: &AlphaKernel) -> Result<f64> {
    ker.check(h)?;
    ker.check(k)?;
    let n = ker.grid.n_steps();
    if n < 4 {
        return alpha_inner_midpoint(h, k, ker);
    }
    let d = ker.dim;
    let hs = simpson_samples(h, ker);
    let ks = if std::ptr::eq(h, k) { hs.clone() } else { simpson_samples(k, ker) };
    let mut total = 0.0;
    for c in 0..n {
        for (j, w) in [1.0, 4.0, 1.0].into_iter().enumerate() {
            let o = (3 * c + j) * d;
            total += w * hs[o..o + d].iter().zip(&ks[o..o + d]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total * ker.grid.dt() / 6.0)
}

/// Midpoint-rule α-inner product with h′ from node differences; second
/// order, kept as a reference.
pub fn alpha_inner_midpoint(h: &CmVector, k: &CmVector, ker: &AlphaKernel) -> Result<f64> {
    ker.check(h)?;
    ker.check(k)?;
    let d = ker.dim;
    let mut total = 0.0;
    let mut hv = DVector::zeros(d);
    let mut kv = DVector::zeros(d);
    for c in 0..ker.grid.n_steps() {
        let a = ker.alpha_mid.at(c);
        let hm = (h.vector(c) + h.vector(c + 1)) * 0.5;
        let km = (k.vector(c) + k.vector(c + 1)) * 0.5;
        hv.copy_from(&h.derivative(c));
        hv.gemv(1.0, &a, &hm, 1.0);
        kv.copy_from(&k.derivative(c));
        kv.gemv(1.0, &a, &km, 1.0);
        total += hv.dot(&kv);
    }
    Ok(total * ker.grid.dt())
}

pub fn alpha_norm(h: &CmVector, ker: &AlphaKernel) -> Result<f64> {
    Ok(alpha_inner(h, h, ker)?.max(0.0).sqrt())
}

/// (E₁*a)(t) = S(t)G(t)S(1)ᵀa.
pub fn endpoint_adjoint(a: &[f64], ker: &AlphaKernel) -> Result<CmVector> {
    if a.len() != ker.dim {
        return Err(Error::DimensionMismatch { expected: ker.dim, got: a.len() });
    }
    let v = ker.s.last().transpose() * DVector::from_column_slice(a);
    Ok(ker.path_from(|k| ker.s.at(k) * (ker.gram.at(k) * &v)))
}

/// The minimal α-norm path with h(1) = a: S(t)G(t)G(1)⁻¹U(1)a.
pub fn minimal_lift(a: &[f64], ker: &AlphaKernel) -> Result<CmVector> {
    if a.len() != ker.dim {
        return Err(Error::DimensionMismatch { expected: ker.dim, got: a.len() });
    }
    let v = &ker.gram1_inv * (ker.s_inv.last() * DVector::from_column_slice(a));
    Ok(ker.path_from(|k| ker.s.at(k) * (ker.gram.at(k) * &v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn flat_kernel_is_trivial() {
        let g = grid(100);
        let ker = solve_fundamental(&ConstantField(DMatrix::zeros(2, 2)), g).unwrap();
        for k in 0..=100 {
            assert_abs_diff_eq!(ker.s().matrix(k), DMatrix::identity(2, 2), epsilon = 1e-15);
            assert_abs_diff_eq!(ker.gram().matrix(k), DMatrix::identity(2, 2) * g.time(k), epsilon = 1e-14);
        }
        let h = endpoint_adjoint(&[1.0, -2.0], &ker).unwrap();
        assert!(h.sup_distance(&CmVector::linear(g, &[1.0, -2.0])).unwrap() < 1e-14);
        let z = endpoint_adjoint(&[0.0, 0.0], &ker).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn inner_product_examples() {
        let g = grid(50);
        let ker = solve_fundamental(&ConstantField(DMatrix::zeros(2, 2)), g).unwrap();
        let h = CmVector::linear(g, &[3.0, 4.0]);
        assert_abs_diff_eq!(alpha_inner(&h, &h, &ker).unwrap(), 25.0, epsilon = 1e-12);
        let e1 = CmVector::linear(g, &[1.0, 0.0]);
        let e2 = CmVector::linear(g, &[0.0, 1.0]);
        assert_eq!(alpha_inner(&e1, &e2, &ker).unwrap(), 0.0);
        let other = CmVector::zeros(grid(10), 2);
        assert!(matches!(alpha_inner(&h, &other, &ker), Err(Error::GridMismatch(..))));
    }

    #[test]
    fn scalar_closed_forms() {
        let c = 0.5;
        let g = grid(1000);
        let ker = solve_fundamental(&ConstantField(DMatrix::identity(1, 1) * c), g).unwrap();
        for k in 0..=1000 {
            let t = g.time(k);
            assert!((ker.s().matrix(k)[(0, 0)] - (-c * t).exp()).abs() < 1e-12);
        }
        let adj = endpoint_adjoint(&[1.0], &ker).unwrap();
        let lift = minimal_lift(&[1.0], &ker).unwrap();
        for k in 0..=1000 {
            let t = g.time(k);
            let exact_adj = (-c * t).exp() * ((2.0 * c * t).exp() - 1.0) / (2.0 * c) * (-c as f64).exp();
            let exact_lift = (-c * t).exp() * ((2.0 * c * t).exp() - 1.0) / ((2.0 * c).exp() - 1.0) * c.exp();
            assert!((adj.at(k)[0] - exact_adj).abs() < 1e-8);
            assert!((lift.at(k)[0] - exact_lift).abs() < 1e-8);
        }
        assert!((lift.endpoint()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_of_lift_matches_endpoint_gram() {
        let g = grid(1000);
        let ker = solve_fundamental(&ConstantField(DMatrix::identity(2, 2) * 0.5), g).unwrap();
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let h = minimal_lift(a.as_slice(), &ker).unwrap();
        let gram_inv = ker.endpoint_gram().try_inverse().unwrap();
        let expected = a.dot(&(gram_inv * &a));
        assert!((alpha_inner(&h, &h, &ker).unwrap() - expected).abs() < 1e-6);
    }

    /// Piecewise-constant α has the exact product-of-exponentials solution.
    #[test]
    fn piecewise_constant_matches_exponential_product() {
        let mut rng = StdRng::seed_from_u64(3);
        let g = grid(1000);
        let breaks = vec![0.0, 0.25, 0.6];
        let values: Vec<DMatrix<f64>> =
            (0..3).map(|_| DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
        let alpha = PiecewiseConstant::new(breaks, values).unwrap();
        let ker = solve_fundamental(&alpha, g).unwrap();
        let mut exact = DMatrix::identity(3, 3);
        for (a, b, v) in alpha.pieces() {
            exact = (v * -(b - a)).exp() * exact;
        }
        assert!((ker.s().matrix(1000) - exact).amax() < 1e-8);
        let prod = ker.s().matrix(1000) * ker.s_inv().matrix(1000);
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn singular_fundamental_is_rejected() {
        let alpha = ConstantField(DMatrix::from_diagonal(&DVector::from_vec(vec![40.0, -40.0])));
        assert!(matches!(solve_fundamental(&alpha, grid(2000)), Err(Error::SingularFundamental { .. })));
    }

    #[test]
    fn simpson_is_fourth_order_and_midpoint_second() {
        let alpha = FnField::new(2, |t: f64| DMatrix::from_row_slice(2, 2, &[0.5 + t, -0.3, 0.8 * t.sin(), 1.2]));
        let path = |g: Grid| CmVector::from_fn(g, 2, |t| DVector::from_vec(vec![t.sin(), t * t - 0.2 * t])).unwrap();
        let err = |n: usize, mid: bool| {
            let g = grid(n);
            let ker = solve_fundamental(&alpha, g).unwrap();
            let h = path(g);
            let adj = endpoint_adjoint(&[0.7, -1.1], &ker).unwrap();
            let lhs = 0.7 * h.endpoint()[0] - 1.1 * h.endpoint()[1];
            let rhs = if mid { alpha_inner_midpoint(&h, &adj, &ker) } else { alpha_inner(&h, &adj, &ker) };
            (lhs - rhs.unwrap()).abs()
        };
        let mid = err(100, true) / err(200, true);
        assert!((mid - 4.0).abs() < 0.05, "{mid}");
        let simpson = err(50, false) / err(100, false);
        assert!(simpson > 12.0, "{simpson}");
    }

    #[test]
    fn tiny_grids_fall_back_to_midpoint() {
        let g = grid(3);
        let ker = solve_fundamental(&ConstantField(DMatrix::identity(1, 1)), g).unwrap();
        let h = CmVector::linear(g, &[1.0]);
        assert_eq!(alpha_inner(&h, &h, &ker).unwrap(), alpha_inner_midpoint(&h, &h, &ker).unwrap());
    }
}
