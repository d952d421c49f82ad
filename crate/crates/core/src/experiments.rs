//! Reusable experiment drivers shared by the acceptance suite and the CLI.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cm_kernel::{alpha_inner, alpha_norm, endpoint_adjoint, minimal_lift, solve_fundamental, ConstantField, FnField};
use crate::cylinder::CylinderFunction;
use crate::damped::{damped_transport, deterministic_lift, orthogonal_lift, verify_lift_ode};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ibp::{map_paths, McSettings, PathLift, KERNEL_FINE_STEPS};
use crate::manifold::{Kind, Manifold, VectorField};
use crate::rolling::{develop_increments, Provenance};
use crate::series::CmVector;
use crate::stats::{loglog_slope, Estimate};
use crate::submersion::{structure_residual, BaseField, StructureReport, SubmersionCase};
use crate::stochastic::{sample_brownian, stochastic_develop, BrownianDraw};

/// A convergence series for plotting.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Sweep {
    pub label: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Least-squares slope of log y against log x.
    pub slope: f64,
}

impl Sweep {
    pub fn new(label: &str, x_label: &str, y_label: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        let slope = if x.len() >= 2 { loglog_slope(&x, &y) } else { f64::NAN };
        Sweep { label: label.into(), x_label: x_label.into(), y_label: y_label.into(), x, y, slope }
    }
}

/// Sum groups of `factor` consecutive d-dimensional increments.
pub fn coarsen(increments: &[f64], dim: usize, factor: usize) -> Vec<f64> {
    increments
        .chunks(dim * factor)
        .flat_map(|block| (0..dim).map(move |a| block.iter().skip(a).step_by(dim).sum::<f64>()))
        .collect()
}

/// E[z₁] for Brownian motion on the unit S² started at the pole z = 1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HeatMoment {
    pub n_steps: usize,
    pub estimate: Estimate,
    pub exact: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

/// Ê[z₁] against e^{−1}, with tolerance 3·SE + 5Δ.
pub fn heat_moment(n_steps: usize, mc: &McSettings) -> Result<HeatMoment> {
    let m = Manifold::sphere(2)?;
    let grid = Grid::new(n_steps)?;
    let z = map_paths(mc.n_paths, mc.workers, |i| {
        let b = sample_brownian(mc.seed, i, grid, 2);
        Ok(stochastic_develop(&b, &m)?.endpoint()[2])
    })?;
    let estimate = Estimate::from_samples(&z);
    let exact = (-1.0f64).exp();
    let tolerance = 3.0 * estimate.se + 5.0 * grid.dt();
    Ok(HeatMoment { n_steps, estimate, exact, tolerance, verdict: (estimate.mean - exact).abs() <= tolerance })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakOrder {
    pub levels: Vec<usize>,
    /// E[z₁⁽ⁿ⁾ − z₁⁽²ⁿ⁾] with both developments driven by the same path.
    pub coupled: Vec<Estimate>,
    /// Ê[z₁⁽ⁿ⁾] − e^{−1}.
    pub errors: Vec<Estimate>,
    pub order: f64,
}

/// Weak order of the Heun development on S² from coupled level differences.
/// Coarse levels run without the repair limit, which only guards the
/// production grids.
pub fn weak_order(levels: &[usize], mc: &McSettings) -> Result<WeakOrder> {
    let m = Manifold::sphere(2)?;
    let finest = 2 * levels.iter().copied().max().unwrap_or(1);
    let fine = Grid::new(finest)?;
    for &n in levels {
        if finest % n != 0 {
            return Err(Error::Config(format!("level {n} does not divide {finest}")));
        }
    }
    let per_path = map_paths(mc.n_paths, mc.workers, |i| {
        let b = sample_brownian(mc.seed, i, fine, 2);
        let mut out = Vec::with_capacity(2 * levels.len());
        for &n in levels {
            for level in [n, 2 * n] {
                let coarse = coarsen(b.increments(), 2, finest / level);
                let fp = develop_increments(&m, Grid::new(level)?, &coarse, Provenance::Stochastic, None)?;
                out.push(fp.endpoint()[2]);
            }
        }
        Ok(out)
    })?;
    let exact = (-1.0f64).exp();
    let mut coupled = Vec::new();
    let mut errors = Vec::new();
    for j in 0..levels.len() {
        let a: Vec<f64> = per_path.iter().map(|v| v[2 * j]).collect();
        let b: Vec<f64> = per_path.iter().map(|v| v[2 * j + 1]).collect();
        coupled.push(Estimate::paired_difference(&a, &b));
        errors.push(Estimate::from_samples(&a.iter().map(|z| z - exact).collect::<Vec<_>>()));
    }
    let x: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = coupled.iter().map(|e| e.mean.abs()).collect();
    Ok(WeakOrder { levels: levels.to_vec(), coupled, errors, order: -loglog_slope(&x, &y) })
}

impl WeakOrder {
    pub fn sweep(&self) -> Sweep {
        Sweep::new(
            "Heun development on S^2, weak error",
            "n_steps",
            "|E[z(n)] - E[z(2n)]|",
            self.levels.iter().map(|&n| n as f64).collect(),
            self.coupled.iter().map(|e| e.mean.abs()).collect(),
        )
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-scale..scale))
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// α(t) = A₀ + A₁ sin(ωt), the smooth random coefficient of the kernel suite.
struct RandomAlpha {
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    omega: f64,
}

impl RandomAlpha {
    fn draw(rng: &mut ChaCha8Rng, d: usize) -> Self {
        RandomAlpha { a0: random_matrix(rng, d, 1.0), a1: random_matrix(rng, d, 1.0), omega: rng.random_range(1.0..4.0) }
    }

    fn field(&self) -> FnField<impl Fn(f64) -> DMatrix<f64> + '_> {
        FnField::new(self.a0.nrows(), move |t: f64| &self.a0 + &self.a1 * (self.omega * t).sin())
    }
}

/// A smooth random path with h(0) = 0.
fn random_path(rng: &mut ChaCha8Rng, grid: Grid, d: usize, vanish_at_end: bool) -> Result<CmVector> {
    let c = DMatrix::from_fn(d, 3, |_, _| rng.random_range(-1.0..1.0));
    let k = rng.random_range(1..4) as f64;
    CmVector::from_fn(grid, d, move |t| {
        let basis = if vanish_at_end {
            DVector::from_vec(vec![(std::f64::consts::PI * t).sin(), (k * std::f64::consts::PI * t).sin(), t * (1.0 - t)])
        } else {
            DVector::from_vec(vec![t, (2.0 * t).sin(), (3.0 * t).cos()])
        };
        &c * basis
    })
}

/// sup |minimal_lift(a) − t·a| for α = 0.
pub fn flat_reduction(n_steps: usize, dim: usize, seed: u64) -> Result<f64> {
    let grid = Grid::new(n_steps)?;
    let a = random_vec(&mut ChaCha8Rng::seed_from_u64(seed), dim);
    let flat = solve_fundamental(&ConstantField(DMatrix::zeros(dim, dim)), grid)?;
    minimal_lift(&a, &flat)?.sup_distance(&CmVector::linear(grid, &a))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Adjointness {
    pub n_steps: usize,
    pub cases: usize,
    /// max over cases of |⟨h(1),a⟩ − ⟨h,E₁*a⟩_α| at n and at 2n.
    pub error: f64,
    pub error_doubled: f64,
    pub ratio: f64,
    pub verdict: bool,
}

/// Adjointness of E₁* under random smooth α, h and a.
pub fn adjointness(n_steps: usize, dim: usize, cases: usize, seed: u64) -> Result<Adjointness> {
    let grid = Grid::new(n_steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = [0.0f64; 2];
    for _ in 0..cases {
        let alpha = RandomAlpha::draw(&mut rng, dim);
        let a = random_vec(&mut rng, dim);
        let path_seed: u64 = rng.random();
        for (g, err) in [grid, grid.refine(2)].into_iter().zip(errors.iter_mut()) {
            let ker = solve_fundamental(&alpha.field(), g)?;
            let h = random_path(&mut ChaCha8Rng::seed_from_u64(path_seed), g, dim, false)?;
            let lhs: f64 = h.endpoint().iter().zip(&a).map(|(x, y)| x * y).sum();
            *err = err.max((lhs - alpha_inner(&h, &endpoint_adjoint(&a, &ker)?, &ker)?).abs());
        }
    }
    let ratio = errors[0] / errors[1];
    Ok(Adjointness { n_steps, cases, error: errors[0], error_doubled: errors[1], ratio, verdict: errors[0] <= 1e-6 && ratio >= 4.0 })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Minimality {
    pub cases: usize,
    pub competitors: usize,
    /// max of ‖h*‖_α − ‖k‖_α over all competitors k with k(1) = a.
    pub margin: f64,
    pub verdict: bool,
}

/// The minimal lift against random competitors with the same endpoint.
pub fn minimality(n_steps: usize, dim: usize, cases: usize, competitors: usize, seed: u64) -> Result<Minimality> {
    let grid = Grid::new(n_steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = f64::NEG_INFINITY;
    for _ in 0..cases {
        let alpha = RandomAlpha::draw(&mut rng, dim);
        let a = random_vec(&mut rng, dim);
        let ker = solve_fundamental(&alpha.field(), grid)?;
        let best = minimal_lift(&a, &ker)?;
        let best_norm = alpha_norm(&best, &ker)?;
        for _ in 0..competitors {
            let scale = 10f64.powf(rng.random_range(-3.0..1.0));
            let v = random_path(&mut rng, grid, dim, true)?;
            let k = best.combine(1.0, &v, scale)?;
            margin = margin.max(best_norm - alpha_norm(&k, &ker)?);
        }
    }
    Ok(Minimality { cases, competitors, margin, verdict: margin <= 1e-9 })
}

/// Error of S(1) for α(t) = 1 + ½cos 3t against exp(−1 − sin(3)/6).
pub fn rk4_sweep(levels: &[usize]) -> Result<Sweep> {
    let exact = (-(1.0 + (3.0f64).sin() / 6.0)).exp();
    let alpha = FnField::new(1, |t: f64| DMatrix::from_element(1, 1, 1.0 + 0.5 * (3.0 * t).cos()));
    let errors: Vec<f64> = levels
        .iter()
        .map(|&n| Ok((solve_fundamental(&alpha, Grid::new(n)?)?.s().last()[(0, 0)] - exact).abs()))
        .collect::<Result<_>>()?;
    Ok(Sweep::new(
        "RK4 fundamental solution, scalar closed form",
        "n_steps",
        "|S(1) - exact|",
        levels.iter().map(|&n| n as f64).collect(),
        errors,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSuite {
    pub flat_error: f64,
    pub adjointness: Adjointness,
    pub minimality: Minimality,
    pub rk4: Sweep,
    pub verdict: bool,
}

/// Flat reduction, adjointness, minimality and the RK4 order together.
pub fn kernel_suite(n_steps: usize, dim: usize, cases: usize, competitors: usize, seed: u64, rk4_levels: &[usize]) -> Result<KernelSuite> {
    let flat_error = flat_reduction(n_steps, dim, seed)?;
    let adj = adjointness(n_steps, dim, cases, seed.wrapping_add(1))?;
    let min = minimality(n_steps, dim, cases, competitors, seed.wrapping_add(2))?;
    let rk4 = rk4_sweep(rk4_levels)?;
    let verdict = flat_error <= 1e-10 && adj.verdict && min.verdict && (rk4.slope + 4.0).abs() <= 0.3;
    Ok(KernelSuite { flat_error, adjointness: adj, minimality: min, rk4, verdict })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DampedBounds {
    pub manifold: Manifold,
    pub n_paths: usize,
    pub sup_t: f64,
    pub sup_t_inv: f64,
    pub k1_inv_norm: f64,
    /// e^{(d−1)N/2}(1 + 1e−6).
    pub transport_bound: f64,
    /// e^{(d−1)N}(1 + 1e−6).
    pub k1_inv_bound: f64,
    /// On S²: sup |T_s − e^{−s/2}I| and |K₁ − (1 − e^{−1})I|.
    pub closed_form_t: Option<f64>,
    pub closed_form_k1: Option<f64>,
    pub verdict: bool,
}

/// Damped transport bounds along sampled Brownian frame paths.
pub fn damped_bounds(m: &Manifold, n_steps: usize, mc: &McSettings) -> Result<DampedBounds> {
    let grid = Grid::new(n_steps)?;
    let d = m.dim();
    let per_path = map_paths(mc.n_paths, mc.workers, |i| {
        let b = sample_brownian(mc.seed, i, grid, d);
        let fp = stochastic_develop(&b, m)?;
        let ker = damped_transport(&fp, m)?;
        let (t, ti) = ker.transport_norms();
        let mut cf = (0.0f64, 0.0f64);
        if m.kind() == Kind::Sphere && d == 2 {
            for k in 0..=n_steps {
                let e = DMatrix::<f64>::identity(2, 2) * (-0.5 * grid.time(k)).exp();
                cf.0 = cf.0.max((ker.t().at(k) - e).amax());
            }
            cf.1 = (ker.k().last() - DMatrix::<f64>::identity(2, 2) * (1.0 - (-1.0f64).exp())).amax();
        }
        Ok([t, ti, ker.k1_inv_norm(), cf.0, cf.1])
    })?;
    let max = |j: usize| per_path.iter().map(|v| v[j]).fold(0.0, f64::max);
    let lam = (d as f64 - 1.0) * m.curvature_bound();
    let transport_bound = (0.5 * lam).exp() * (1.0 + 1e-6);
    let k1_inv_bound = lam.exp() * (1.0 + 1e-6);
    let sphere = m.kind() == Kind::Sphere && d == 2;
    let (closed_form_t, closed_form_k1) = if sphere { (Some(max(3)), Some(max(4))) } else { (None, None) };
    let mut verdict = max(0) <= transport_bound && max(1) <= transport_bound && max(2) <= k1_inv_bound;
    if sphere {
        verdict &= max(3) <= 1e-6 && max(4) <= 1e-6;
    }
    Ok(DampedBounds {
        manifold: *m,
        n_paths: mc.n_paths,
        sup_t: max(0),
        sup_t_inv: max(1),
        k1_inv_norm: max(2),
        transport_bound,
        k1_inv_bound,
        closed_form_t,
        closed_form_k1,
        verdict,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftConsistency {
    pub manifold: Manifold,
    pub field: VectorField,
    pub n_paths: usize,
    /// max over paths of |u₁J₁ − X(x₁)| at the finest level.
    pub endpoint_error: f64,
    /// Mean over paths of sup|J − Z_Φ| per level.
    pub form_gap: Sweep,
    pub order: f64,
    pub verdict: bool,
}

/// Endpoint condition of the lift and convergence of the K-form against
/// the ODE form, on coupled developments at each level.
pub fn lift_consistency(m: &Manifold, x: &VectorField, levels: &[usize], mc: &McSettings) -> Result<LiftConsistency> {
    x.check(m)?;
    let d = m.dim();
    let finest = levels.iter().copied().max().unwrap_or(1);
    if levels.iter().any(|&n| finest % n != 0) {
        return Err(Error::Config("levels must divide the finest level".into()));
    }
    let fine = Grid::new(finest)?;
    let per_path = map_paths(mc.n_paths, mc.workers, |i| {
        let b = sample_brownian(mc.seed, i, fine, d);
        let mut gaps = Vec::with_capacity(levels.len());
        let mut endpoint: f64 = 0.0;
        for &n in levels {
            let grid = Grid::new(n)?;
            let bn = BrownianDraw::from_increments(grid, d, coarsen(b.increments(), d, finest / n), mc.seed, i);
            let fp = stochastic_develop(&bn, m)?;
            let ker = damped_transport(&fp, m)?;
            let res = orthogonal_lift(&fp, &ker, x)?;
            let def = verify_lift_ode(&res, &ker)?;
            gaps.push(def.form_gap);
            let mut xv = vec![0.0; m.ambient_dim()];
            x.value(m, fp.endpoint(), &mut xv);
            let u1j1 = res.lifted.slice(n);
            endpoint = endpoint.max(xv.iter().zip(u1j1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        gaps.push(endpoint);
        Ok(gaps)
    })?;
    let l = levels.len();
    let mean_gap: Vec<f64> = (0..l).map(|j| per_path.iter().map(|v| v[j]).sum::<f64>() / per_path.len() as f64).collect();
    let endpoint_error = per_path.iter().map(|v| v[l]).fold(0.0, f64::max);
    let form_gap = Sweep::new("K-form vs ODE-form of the lift", "n_steps", "mean sup|J - Z_phi|", levels.iter().map(|&n| n as f64).collect(), mean_gap);
    let order = -form_gap.slope;
    Ok(LiftConsistency {
        manifold: *m,
        field: x.clone(),
        n_paths: mc.n_paths,
        endpoint_error,
        verdict: endpoint_error <= 1e-8 && order >= 1.7,
        form_gap,
        order,
    })
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PathInvariants {
    pub n_paths: usize,
    /// max |X̃(fg) − X̃f·g − f·X̃g|.
    pub derivation: f64,
    /// max |X̃(af+bg) − aX̃f − bX̃g|.
    pub linearity: f64,
    /// max |Σ c_α X^{Z_α}f − X^{Z_Φ}f| with Z_Φ solved directly.
    pub superposition: f64,
    /// max |X̃1|.
    pub constants: f64,
    pub verdict: bool,
}

/// Per-path algebraic identities of X̃ on sampled paths.
pub fn path_invariants(
    m: &Manifold,
    x: &VectorField,
    f: &CylinderFunction,
    g: &CylinderFunction,
    n_steps: usize,
    mc: &McSettings,
) -> Result<PathInvariants> {
    x.check(m)?;
    let grid = Grid::new(n_steps)?;
    let lift = deterministic_lift(m, grid, KERNEL_FINE_STEPS)?;
    let (a, b) = (0.8, -1.7);
    let fg = f.product(g);
    let lin = f.combine(a, g, b);
    let one = CylinderFunction::constant(1.0);
    let (bf, bg, bfg, blin, bone) = (f.bind(m, grid)?, g.bind(m, grid)?, fg.bind(m, grid)?, lin.bind(m, grid)?, one.bind(m, grid)?);
    let per_path = map_paths(mc.n_paths, mc.workers, |i| {
        let bm = sample_brownian(mc.seed, i, grid, m.dim());
        let fp = stochastic_develop(&bm, m)?;
        let pl = PathLift::new(&fp, &bm, &lift.kernel, &lift.z, Some(x))?;
        let (xf, xg) = (pl.xtilde(&bf), pl.xtilde(&bg));
        let (fv, gv) = (bf.value(&fp), bg.value(&fp));
        let derivation = (pl.xtilde(&bfg) - xf * gv - fv * xg).abs();
        let linearity = (pl.xtilde(&blin) - a * xf - b * xg).abs();
        let phi = lift.kernel.transported_integral(pl.coefficients());
        let z_phi = lift.kernel.solve_damped(&phi)?;
        let direct = bf.directional(&fp, m, |k| z_phi.at(k).to_vec());
        let by_basis: f64 = (0..m.dim()).map(|al| pl.coefficients()[al] * pl.along_basis(&bf, al)).sum();
        Ok([derivation, linearity, (by_basis - direct).abs(), pl.xtilde(&bone).abs()])
    })?;
    let max = |j: usize| per_path.iter().map(|v| v[j]).fold(0.0, f64::max);
    let inv = PathInvariants {
        n_paths: mc.n_paths,
        derivation: max(0),
        linearity: max(1),
        superposition: max(2),
        constants: max(3),
        verdict: false,
    };
    Ok(PathInvariants { verdict: [inv.derivation, inv.linearity, inv.superposition, inv.constants].iter().all(|v| *v <= 1e-10), ..inv })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmersionSweep {
    pub case: SubmersionCase,
    pub n_points: usize,
    /// Worst values over the sampled points.
    pub max_abs_rho: f64,
    pub max_rho_error: f64,
    pub linearity: f64,
    pub homogeneity: f64,
    pub locality: f64,
    pub rows: Vec<StructureReport>,
    pub verdict: bool,
}

/// Structure checks of ρ at uniformly drawn points of [−1.5,1.5]²×[−3,3].
/// ρ must vanish for the product case; linearity, homogeneity and locality
/// must hold to 1e−5 in both cases.
pub fn submersion_sweep(case: SubmersionCase, field: &BaseField, n_points: usize, seed: u64) -> Result<SubmersionSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_points)
        .map(|_| {
            let y = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0)];
            structure_residual(case, field, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&StructureReport) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let max_abs_rho = worst(|r| r.rho.abs());
    let max_rho_error = worst(|r| (r.rho - r.rho_analytic).abs());
    let (linearity, homogeneity, locality) = (worst(|r| r.linearity), worst(|r| r.homogeneity), worst(|r| r.locality));
    let flat_ok = case != SubmersionCase::Product || max_abs_rho <= 1e-6;
    let verdict = flat_ok && linearity <= 1e-5 && homogeneity <= 1e-5 && locality <= 1e-5;
    Ok(SubmersionSweep { case, n_points, max_abs_rho, max_rho_error, linearity, homogeneity, locality, rows, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarsen_sums_blocks() {
        let inc = [1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0];
        assert_eq!(coarsen(&inc, 2, 2), vec![3.0, 30.0, 7.0, 70.0]);
        assert_eq!(coarsen(&inc, 2, 1), inc.to_vec());
    }

    #[test]
    fn sweep_slope() {
        let s = Sweep::new("t", "x", "y", vec![1.0, 2.0, 4.0], vec![1.0, 0.25, 0.0625]);
        assert!((s.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_reduction_is_exact() {
        assert!(flat_reduction(1000, 3, 4).unwrap() <= 1e-10);
    }

    #[test]
    fn rk4_order() {
        let s = rk4_sweep(&[4, 8, 16, 32]).unwrap();
        assert!((s.slope + 4.0).abs() < 0.3, "{}", s.slope);
    }

    #[test]
    fn invariants_on_a_few_paths() {
        let m = Manifold::sphere(2).unwrap();
        let f = CylinderFunction::linear(0.5, vec![1.0, 0.0, 0.3]);
        let g = CylinderFunction::single(1.0, vec![0.2, 0.4, 1.0], 0.0, crate::cylinder::Profile::Tanh);
        let x = VectorField::Rotational { k: vec![0.0, 1.0, 0.5] };
        let mc = McSettings { n_paths: 8, seed: 1, workers: Some(1) };
        assert!(path_invariants(&m, &x, &f, &g, 400, &mc).unwrap().verdict);
    }
}
