//! The orthogonal lift X̃ acting on cylinder functions, its transpose
//!
//!   X̃^{tr}g = −X̃g + g·Σ_α c_α ∫⟨T⁻ᵀe_α, dβ⟩ − g·Σ_α ⟨X^{Z_α}(C̃H̃), e_α⟩,
//!
//! with c = C̃H̃, and Monte Carlo checks of E[X̃f·g] = E[f·X̃^{tr}g].
//!
//! Under parallel curvature the last term splits into a part from ∇X at
//! the endpoint and a part from the frame rotation A₁⟨Z_α⟩; the sign of
//! each is a `Convention`, fixed by the small-step oracle.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{BoundCylinder, CylinderFunction};
use crate::damped::{deterministic_lift, DampedKernel};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{Kind, Manifold, VectorField};
use crate::rolling::FramePath;
use crate::series::CmVector;
use crate::stats::Estimate;
use crate::stochastic::{sample_brownian, stochastic_develop, BrownianDraw};

/// Fine steps used for the deterministic kernel of constant-curvature runs.
pub const KERNEL_FINE_STEPS: usize = 4000;

/// Signs of the ∇X part and of the curvature part of the divergence term:
/// III = nabla_sign·P + epsilon·Q with
/// P = −Σ⟨C̃u₁⁻¹∇_{u₁Z_α(1)}X, e_α⟩ and Q = −Σ⟨C̃A₁⟨Z_α⟩H̃, e_α⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct Convention {
    pub nabla_sign: i8,
    pub epsilon: i8,
}

impl Default for Convention {
    fn default() -> Self {
        Self::DERIVED
    }
}

impl Convention {
    /// The signs obtained from the frame variation ∇ũ = ũ(−A⟨h⟩).
    pub const DERIVED: Convention = Convention { nabla_sign: 1, epsilon: 1 };

    pub fn all() -> [Convention; 4] {
        [
            Convention { nabla_sign: 1, epsilon: 1 },
            Convention { nabla_sign: 1, epsilon: -1 },
            Convention { nabla_sign: -1, epsilon: 1 },
            Convention { nabla_sign: -1, epsilon: -1 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.nabla_sign.abs() != 1 || self.epsilon.abs() != 1 {
            return Err(Error::Config("convention signs must be +1 or -1".into()));
        }
        Ok(())
    }

    pub fn apply(&self, p: f64, q: f64) -> f64 {
        f64::from(self.nabla_sign) * p + f64::from(self.epsilon) * q
    }

    pub fn label(&self) -> String {
        format!("nabla_sign={:+}, epsilon={:+}", self.nabla_sign, self.epsilon)
    }
}

/// Which stochastic integral serves as the divergence of X^{Z_α}.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "kebab-case")]
pub enum AdaptedIntegral {
    /// ∫⟨T⁻ᵀe_α, dβ⟩.
    #[default]
    Transported,
    /// ∫⟨Z_α′, dβ⟩.
    Derivative,
}

/// Everything the engine needs about one sampled path.
pub struct PathLift<'a> {
    m: Manifold,
    fp: &'a FramePath,
    b: &'a BrownianDraw,
    ker: &'a DampedKernel,
    z: &'a [CmVector],
    h_tilde: DVector<f64>,
    coeffs: DVector<f64>,
}

impl<'a> PathLift<'a> {
    pub fn new(
        fp: &'a FramePath,
        b: &'a BrownianDraw,
        ker: &'a DampedKernel,
        z: &'a [CmVector],
        x: Option<&VectorField>,
    ) -> Result<Self> {
        let m = *fp.manifold();
        let grid = fp.grid();
        grid.ensure_same(&b.grid())?;
        grid.ensure_same(&ker.grid())?;
        if z.len() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), got: z.len() });
        }
        let mut h_tilde = DVector::zeros(m.dim());
        if let Some(x) = x {
            x.check(&m)?;
            let mut v = vec![0.0; m.ambient_dim()];
            x.value(&m, fp.endpoint(), &mut v);
            m.pull(fp.u(grid.n_steps()), &v, h_tilde.as_mut_slice());
        }
        let coeffs = ker.c_tilde() * &h_tilde;
        Ok(Self { m, fp, b, ker, z, h_tilde, coeffs })
    }

    pub fn h_tilde(&self) -> &DVector<f64> {
        &self.h_tilde
    }

    /// c = C̃H̃.
    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Z_Φ(t_k) = Σ_α c_α Z_α(t_k).
    pub fn z_phi(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m.dim()];
        for (a, z) in self.z.iter().enumerate() {
            let c = self.coeffs[a];
            out.iter_mut().zip(z.at(k)).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    pub fn xtilde(&self, f: &BoundCylinder<'_>) -> f64 {
        f.directional(self.fp, &self.m, |k| self.z_phi(k))
    }

    /// X^{Z_α} f.
    pub fn along_basis(&self, f: &BoundCylinder<'_>, alpha: usize) -> f64 {
        f.directional(self.fp, &self.m, |k| self.z[alpha].at(k).to_vec())
    }

    /// δ_α = ∫⟨T⁻ᵀe_α, dβ⟩ (Itô), for every α.
    pub fn transported_integrals(&self) -> DVector<f64> {
        let d = self.m.dim();
        let mut out = DVector::zeros(d);
        for k in 0..self.fp.grid().n_steps() {
            let db = DVector::from_column_slice(self.b.increment(k));
            out.gemv(1.0, &self.ker.t_inv().at(k), &db, 1.0);
        }
        out
    }

    /// ∫⟨Z_α′, dβ⟩ (Itô) with Z_α′ = −½Ric Z_α + T⁻ᵀe_α at left points.
    pub fn derivative_integrals(&self) -> DVector<f64> {
        let d = self.m.dim();
        let mut out = self.transported_integrals();
        for a in 0..d {
            let mut acc = 0.0;
            for k in 0..self.fp.grid().n_steps() {
                let zk = DVector::from_column_slice(self.z[a].at(k));
                let rz = self.ker.ricci().at(k) * zk;
                acc -= 0.5 * rz.dot(&DVector::from_column_slice(self.b.increment(k)));
            }
            out[a] += acc;
        }
        out
    }

    /// P = −Σ_α ⟨C̃u₁⁻¹∇_{u₁Z_α(1)}X, e_α⟩.
    pub fn nabla_part(&self, x: &VectorField) -> f64 {
        let n = self.m.ambient_dim();
        let d = self.m.dim();
        let last = self.fp.grid().n_steps();
        let u1 = self.fp.u(last);
        let x1 = self.fp.endpoint();
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut y = DVector::zeros(d);
        let mut total = 0.0;
        for a in 0..d {
            self.m.push(u1, self.z[a].at(last), &mut v);
            x.covariant(&self.m, x1, &v, &mut w);
            self.m.pull(u1, &w, y.as_mut_slice());
            total += self.ker.c_tilde().row(a).dot(&y.transpose());
        }
        -total
    }

    /// Q = −Σ_α ⟨C̃A₁⟨Z_α⟩H̃, e_α⟩ with A₁ as a Stratonovich sum; also
    /// returns the Itô (left-point) value for the scheme-agreement check.
    pub fn curvature_part(&self) -> (f64, f64) {
        let d = self.m.dim();
        if self.m.curvature_sign() == 0.0 {
            return (0.0, 0.0);
        }
        let mut r = vec![0.0; d * d];
        let mut mid = vec![0.0; d];
        let (mut strat, mut ito) = (0.0, 0.0);
        for a in 0..d {
            let mut a_s = nalgebra::DMatrix::<f64>::zeros(d, d);
            let mut a_i = nalgebra::DMatrix::<f64>::zeros(d, d);
            for k in 0..self.fp.grid().n_steps() {
                let db = self.b.increment(k);
                let (z0, z1) = (self.z[a].at(k), self.z[a].at(k + 1));
                for i in 0..d {
                    mid[i] = 0.5 * (z0[i] + z1[i]);
                }
                self.m.curvature_coords(&mid, db, &mut r);
                a_s += nalgebra::DMatrixView::from_slice(&r, d, d);
                self.m.curvature_coords(z0, db, &mut r);
                a_i += nalgebra::DMatrixView::from_slice(&r, d, d);
            }
            strat += self.ker.c_tilde().row(a).dot(&(a_s * &self.h_tilde).transpose());
            ito += self.ker.c_tilde().row(a).dot(&(a_i * &self.h_tilde).transpose());
        }
        (-strat, -ito)
    }
}

/// X̃f = Σ_α ⟨C̃H̃, e_α⟩ X^{Z_α} f along one path.
pub fn xtilde_apply(f: &CylinderFunction, fp: &FramePath, ker: &DampedKernel, x: &VectorField) -> Result<f64> {
    let z = ker.z_basis()?;
    let b = BrownianDraw::from_increments(fp.grid(), fp.manifold().dim(), vec![0.0; fp.grid().n_steps() * fp.manifold().dim()], 0, 0);
    let pl = PathLift::new(fp, &b, ker, &z, Some(x))?;
    let bound = f.bind(fp.manifold(), fp.grid())?;
    Ok((0..z.len()).map(|a| pl.coefficients()[a] * pl.along_basis(&bound, a)).sum())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DivergenceTerm {
    pub nabla_part: f64,
    pub curvature_part: f64,
    pub value: f64,
}

fn require_parallel_curvature(m: &Manifold) -> Result<()> {
    // every built-in model has constant curvature, hence ∇R = 0
    match m.kind() {
        Kind::Euclidean | Kind::Sphere | Kind::Hyperbolic => Ok(()),
    }
}

/// −Σ_α ⟨X^{Z_α}(C̃H̃), e_α⟩ under the given sign convention.
pub fn divergence_term(
    fp: &FramePath,
    ker: &DampedKernel,
    b: &BrownianDraw,
    x: &VectorField,
    conv: Convention,
) -> Result<DivergenceTerm> {
    require_parallel_curvature(fp.manifold())?;
    conv.validate()?;
    let z = ker.z_basis()?;
    let pl = PathLift::new(fp, b, ker, &z, Some(x))?;
    let p = pl.nabla_part(x);
    let (q, _) = pl.curvature_part();
    Ok(DivergenceTerm { nabla_part: p, curvature_part: q, value: conv.apply(p, q) })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TransposeTerms {
    pub minus_xg: f64,
    pub ito: f64,
    pub divergence: DivergenceTerm,
    pub total: f64,
}

/// X̃^{tr}g along one path, term by term (the last two already multiplied by g).
pub fn transpose_apply(
    g: &CylinderFunction,
    fp: &FramePath,
    ker: &DampedKernel,
    b: &BrownianDraw,
    x: &VectorField,
    conv: Convention,
) -> Result<TransposeTerms> {
    require_parallel_curvature(fp.manifold())?;
    conv.validate()?;
    let z = ker.z_basis()?;
    let pl = PathLift::new(fp, b, ker, &z, Some(x))?;
    let bound = g.bind(fp.manifold(), fp.grid())?;
    let gv = bound.value(fp);
    let minus_xg = -pl.xtilde(&bound);
    let ito = gv * pl.coefficients().dot(&pl.transported_integrals());
    let p = pl.nabla_part(x);
    let (q, _) = pl.curvature_part();
    let divergence = DivergenceTerm { nabla_part: gv * p, curvature_part: gv * q, value: gv * conv.apply(p, q) };
    Ok(TransposeTerms { minus_xg, ito, divergence, total: minus_xg + ito + divergence.value })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Evaluate `f` for every path index, in parallel, preserving order.
pub fn map_paths<T: Send>(n_paths: usize, workers: Option<usize>, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let run = || (0..n_paths as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct IbpCheck {
    pub manifold: Manifold,
    pub n_steps: usize,
    pub mc: McSettings,
    pub field: VectorField,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    #[serde(default)]
    pub convention: Convention,
    /// Additive allowance; defaults to 0 on flat space and 5Δ·scale otherwise.
    #[serde(default)]
    pub bias_allowance: Option<f64>,
    /// Compare both sides with exact Gaussian expectations (flat space only).
    #[serde(default = "yes")]
    pub exact_oracle: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct AdaptedCheck {
    pub manifold: Manifold,
    pub n_steps: usize,
    pub mc: McSettings,
    /// Index α of the direction Z_α.
    pub direction: usize,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    #[serde(default)]
    pub integral: AdaptedIntegral,
    #[serde(default)]
    pub bias_allowance: Option<f64>,
    /// Extra absolute tolerance against the exact flat values.
    #[serde(default = "default_oracle_tolerance")]
    pub oracle_tolerance: f64,
}

fn yes() -> bool {
    true
}

fn default_oracle_tolerance() -> f64 {
    1e-3
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub minus_xg: Estimate,
    pub ito: Estimate,
    pub divergence: Estimate,
    pub nabla_part: Estimate,
    pub curvature_part: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alternative {
    pub label: String,
    pub rhs: Estimate,
    /// |LHS − RHS| in combined standard errors.
    pub gap_in_se: f64,
    pub verdict: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExactComparison {
    pub value: f64,
    pub lhs_ok: bool,
    pub rhs_ok: bool,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub repairs_triggered: usize,
    pub max_repair: f64,
    pub max_scheme_gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IbpReport {
    pub kind: String,
    pub manifold: String,
    pub label: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub difference: Estimate,
    pub terms: TermBreakdown,
    pub combined_se: f64,
    pub bias_allowance: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub alternatives: Vec<Alternative>,
    pub exact: Option<ExactComparison>,
    pub diagnostics: Diagnostics,
}

struct PathSample {
    f: f64,
    g: f64,
    xf: f64,
    xg: f64,
    ito: f64,
    alt_ito: f64,
    p: f64,
    q: f64,
    scheme_gap: f64,
    repairs: usize,
    max_repair: f64,
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

struct Sides {
    lhs: Vec<f64>,
    minus_xg: Vec<f64>,
    ito: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn assemble(
    kind: &str,
    label: String,
    m: &Manifold,
    grid: Grid,
    mc: &McSettings,
    sides: &Sides,
    rhs_of: &dyn Fn(usize, &dyn Fn(f64, f64) -> f64) -> Vec<f64>,
    primary: &dyn Fn(f64, f64) -> f64,
    alternatives: Vec<(String, Box<dyn Fn(f64, f64) -> f64>)>,
    bias_allowance: Option<f64>,
    diagnostics: Diagnostics,
) -> IbpReport {
    let lhs = Estimate::from_samples(&sides.lhs);
    let rhs_samples = rhs_of(0, primary);
    let rhs = Estimate::from_samples(&rhs_samples);
    let combined = (lhs.se * lhs.se + rhs.se * rhs.se).sqrt();
    let bias = bias_allowance.unwrap_or_else(|| {
        if m.kind() == Kind::Euclidean {
            0.0
        } else {
            5.0 * grid.dt() * rms(&sides.lhs).max(rms(&rhs_samples))
        }
    });
    let tolerance = 3.0 * combined + bias;
    let div: Vec<f64> = sides.p.iter().zip(&sides.q).map(|(p, q)| primary(*p, *q)).collect();
    let terms = TermBreakdown {
        minus_xg: Estimate::from_samples(&sides.minus_xg),
        ito: Estimate::from_samples(&sides.ito),
        divergence: Estimate::from_samples(&div),
        nabla_part: Estimate::from_samples(&sides.p),
        curvature_part: Estimate::from_samples(&sides.q),
    };
    let alternatives = alternatives
        .into_iter()
        .map(|(label, rule)| {
            let r = Estimate::from_samples(&rhs_of(1, &*rule));
            let comb = (lhs.se * lhs.se + r.se * r.se).sqrt();
            let gap = (lhs.mean - r.mean).abs();
            Alternative { label, rhs: r, gap_in_se: gap / comb, verdict: gap <= 3.0 * comb + bias }
        })
        .collect();
    IbpReport {
        kind: kind.into(),
        manifold: m.name(),
        label,
        n_paths: mc.n_paths,
        n_steps: grid.n_steps(),
        seed: mc.seed,
        lhs,
        rhs,
        difference: Estimate::paired_difference(&sides.lhs, &rhs_samples),
        terms,
        combined_se: combined,
        bias_allowance: bias,
        tolerance,
        verdict: (lhs.mean - rhs.mean).abs() <= tolerance,
        alternatives,
        exact: None,
        diagnostics,
    }
}

fn collect_diagnostics(samples: &[PathSample]) -> Diagnostics {
    Diagnostics {
        repairs_triggered: samples.iter().map(|s| s.repairs).sum(),
        max_repair: samples.iter().map(|s| s.max_repair).fold(0.0, f64::max),
        max_scheme_gap: samples.iter().map(|s| s.scheme_gap).fold(0.0, f64::max),
    }
}

fn sample_paths(
    m: &Manifold,
    grid: Grid,
    mc: &McSettings,
    f: &CylinderFunction,
    g: &CylinderFunction,
    field: Option<&VectorField>,
    direction: Option<usize>,
) -> Result<Vec<PathSample>> {
    let lift = deterministic_lift(m, grid, KERNEL_FINE_STEPS)?;
    let bf = f.bind(m, grid)?;
    let bg = g.bind(m, grid)?;
    map_paths(mc.n_paths, mc.workers, |i| {
        let b = sample_brownian(mc.seed, i, grid, m.dim());
        let fp = stochastic_develop(&b, m)?;
        let pl = PathLift::new(&fp, &b, &lift.kernel, &lift.z, field)?;
        let (fv, gv) = (bf.value(&fp), bg.value(&fp));
        let rep = fp.repairs();
        let mut s = PathSample {
            f: fv,
            g: gv,
            xf: 0.0,
            xg: 0.0,
            ito: 0.0,
            alt_ito: 0.0,
            p: 0.0,
            q: 0.0,
            scheme_gap: 0.0,
            repairs: rep.triggered,
            max_repair: rep.max_magnitude,
        };
        match (field, direction) {
            (Some(x), _) => {
                s.xf = pl.xtilde(&bf);
                s.xg = pl.xtilde(&bg);
                s.ito = pl.coefficients().dot(&pl.transported_integrals());
                s.p = pl.nabla_part(x);
                let (q, q_ito) = pl.curvature_part();
                s.q = q;
                s.scheme_gap = (q - q_ito).abs();
            }
            (None, Some(a)) => {
                s.xf = pl.along_basis(&bf, a);
                s.xg = pl.along_basis(&bg, a);
                s.ito = pl.transported_integrals()[a];
                s.alt_ito = pl.derivative_integrals()[a];
            }
            (None, None) => return Err(Error::Internal("nothing to differentiate along".into())),
        }
        Ok(s)
    })
}

/// Two-sided Monte Carlo check of E[X̃f·g] = E[f·X̃^{tr}g].
pub fn mc_ibp_check(check: &IbpCheck) -> Result<IbpReport> {
    let m = check.manifold;
    let grid = Grid::new(check.n_steps)?;
    check.convention.validate()?;
    check.field.check(&m)?;
    require_parallel_curvature(&m)?;
    let samples = sample_paths(&m, grid, &check.mc, &check.f, &check.g, Some(&check.field), None)?;
    let sides = Sides {
        lhs: samples.iter().map(|s| s.xf * s.g).collect(),
        minus_xg: samples.iter().map(|s| -s.f * s.xg).collect(),
        ito: samples.iter().map(|s| s.f * s.g * s.ito).collect(),
        p: samples.iter().map(|s| s.f * s.g * s.p).collect(),
        q: samples.iter().map(|s| s.f * s.g * s.q).collect(),
    };
    let rhs_of = |_: usize, rule: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        (0..samples.len()).map(|i| sides.minus_xg[i] + sides.ito[i] + rule(sides.p[i], sides.q[i])).collect()
    };
    let conv = check.convention;
    let alternatives = Convention::all()
        .into_iter()
        .map(|c| (c.label(), Box::new(move |p: f64, q: f64| c.apply(p, q)) as Box<dyn Fn(f64, f64) -> f64>))
        .collect();
    let mut report = assemble(
        "non-adapted",
        format!("{} on {}", check.field.name(), m.name()),
        &m,
        grid,
        &check.mc,
        &sides,
        &rhs_of,
        &move |p, q| conv.apply(p, q),
        alternatives,
        check.bias_allowance,
        collect_diagnostics(&samples),
    );
    if m.kind() == Kind::Euclidean && check.exact_oracle {
        let exact = crate::oracle::flat_exact(&m, &check.f, &check.g, crate::oracle::FlatDirection::Lift(&check.field))?;
        attach_exact(&mut report, exact, 0.0);
    }
    Ok(report)
}

/// Quadrature rounding allowed on top of the statistical tolerance.
const EXACT_ROUNDING: f64 = 1e-12;

fn attach_exact(report: &mut IbpReport, exact: f64, extra: f64) {
    let lhs_ok = (report.lhs.mean - exact).abs() <= 3.0 * report.lhs.se + extra + EXACT_ROUNDING;
    let rhs_ok = (report.rhs.mean - exact).abs() <= 3.0 * report.rhs.se + extra + EXACT_ROUNDING;
    report.exact = Some(ExactComparison { value: exact, lhs_ok, rhs_ok, tolerance: extra });
    report.verdict = report.verdict && lhs_ok && rhs_ok;
}

/// Two-sided check of the adapted formula for X^{Z_α}.
pub fn adapted_ibp_check(check: &AdaptedCheck) -> Result<IbpReport> {
    let m = check.manifold;
    let grid = Grid::new(check.n_steps)?;
    if check.direction >= m.dim() {
        return Err(Error::Config(format!("direction {} out of range for {}", check.direction, m.name())));
    }
    let samples = sample_paths(&m, grid, &check.mc, &check.f, &check.g, None, Some(check.direction))?;
    let (primary, other) = match check.integral {
        AdaptedIntegral::Transported => (0, 1),
        AdaptedIntegral::Derivative => (1, 0),
    };
    let pick = |s: &PathSample, which: usize| if which == 0 { s.ito } else { s.alt_ito };
    let sides = Sides {
        lhs: samples.iter().map(|s| s.xf * s.g).collect(),
        minus_xg: samples.iter().map(|s| -s.f * s.xg).collect(),
        ito: samples.iter().map(|s| s.f * s.g * pick(s, primary)).collect(),
        p: vec![0.0; samples.len()],
        q: vec![0.0; samples.len()],
    };
    let alt_ito: Vec<f64> = samples.iter().map(|s| s.f * s.g * pick(s, other)).collect();
    let rhs_of = |which: usize, _: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let ito = if which == 0 { &sides.ito } else { &alt_ito };
        (0..samples.len()).map(|i| sides.minus_xg[i] + ito[i]).collect()
    };
    let other_label = match check.integral {
        AdaptedIntegral::Transported => "derivative integral",
        AdaptedIntegral::Derivative => "transported integral",
    };
    let flat = m.kind() == Kind::Euclidean;
    let bias = check.bias_allowance.or(if flat { Some(check.oracle_tolerance) } else { None });
    let mut report = assemble(
        "adapted",
        format!("Z_{} on {}", check.direction + 1, m.name()),
        &m,
        grid,
        &check.mc,
        &sides,
        &rhs_of,
        &|_, _| 0.0,
        vec![(other_label.to_string(), Box::new(|_: f64, _: f64| 0.0) as Box<dyn Fn(f64, f64) -> f64>)],
        bias,
        collect_diagnostics(&samples),
    );
    if flat {
        let exact = crate::oracle::flat_exact(&m, &check.f, &check.g, crate::oracle::FlatDirection::Basis(check.direction))?;
        attach_exact(&mut report, exact, check.oracle_tolerance);
    }
    Ok(report)
}
