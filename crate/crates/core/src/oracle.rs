//! Independent reference values for the integration-by-parts checks.
//!
//! On flat space every quantity is a function of finitely many Gaussian
//! increments, so both sides are computed exactly by tensor Gauss–Hermite
//! quadrature. On curved models the same is done for a short geodesic
//! chain: the lift, its divergence and all derivatives are obtained by
//! finite differences of the chain map, never from the engine formulas.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderFunction, PathView};
use crate::damped::{deterministic_lift, DeterministicLift};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ibp::{Convention, PathLift, KERNEL_FINE_STEPS};
use crate::manifold::{Kind, Manifold, VectorField};
use crate::rng::NoiseStream;
use crate::rolling::{develop_increments, FramePath, Provenance};
use crate::stats::Estimate;
use crate::stochastic::BrownianDraw;

/// Probabilists' Gauss–Hermite rule with `q` nodes: weights sum to one and
/// Σ wᵢ p(zᵢ) = E[p(Z)] for polynomials of degree < 2q.
pub fn gauss_hermite(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(q, q);
    for k in 1..q {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// E[F(Z)] for Z standard normal in ℝ^dim, by the tensor rule.
pub fn gaussian_expectation(dim: usize, q: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut total = 0.0;
    for_each_node(dim, q, |w, z| total += w * f(z));
    total
}

/// Visit every node of the tensor rule with its weight.
pub fn for_each_node(dim: usize, q: usize, mut f: impl FnMut(f64, &[f64])) {
    let (nodes, weights) = gauss_hermite(q);
    let mut idx = vec![0usize; dim];
    let mut z = vec![nodes[0]; dim];
    loop {
        let w: f64 = idx.iter().map(|&i| weights[i]).product();
        if w > 1e-300 {
            f(w, &z);
        }
        let mut j = 0;
        loop {
            if j == dim {
                return;
            }
            idx[j] += 1;
            if idx[j] < q {
                z[j] = nodes[idx[j]];
                break;
            }
            idx[j] = 0;
            z[j] = nodes[0];
            j += 1;
        }
    }
}

/// Path known only at a few grid nodes, with the identity frame.
struct SparsePath {
    nodes: Vec<usize>,
    points: Vec<Vec<f64>>,
    frame: Vec<f64>,
}

impl PathView for SparsePath {
    fn x(&self, k: usize) -> &[f64] {
        let i = self.nodes.binary_search(&k).expect("cylinder slot missing from sparse path");
        &self.points[i]
    }

    fn u(&self, _k: usize) -> &[f64] {
        &self.frame
    }
}

/// The smallest grid carrying every sampling time.
fn common_grid(times: &[f64]) -> Result<Grid> {
    for n in 1..=100_000 {
        let g = Grid::new(n)?;
        if times.iter().all(|&t| g.index_of(t).is_ok()) {
            return Ok(g);
        }
    }
    Err(Error::Config("sampling times have no common grid".into()))
}

#[derive(Clone, Copy, Debug)]
pub enum FlatDirection<'a> {
    /// The orthogonal lift X̃ of a vector field.
    Lift(&'a VectorField),
    /// The adapted direction Z_α(s) = s·e_α.
    Basis(usize),
}

/// Number of tensor nodes the flat oracle would use.
fn nodes_per_axis(dim: usize) -> usize {
    let budget = 2.0e6_f64;
    (budget.powf(1.0 / dim as f64).floor() as usize).clamp(6, 40)
}

/// Exact E[Xf·g] and E[f·X^{tr}g] on flat space, X being either the
/// orthogonal lift of a field or an adapted basis direction.
pub fn flat_exact_sides(m: &Manifold, f: &CylinderFunction, g: &CylinderFunction, dir: FlatDirection<'_>) -> Result<(f64, f64)> {
    if m.kind() != Kind::Euclidean {
        return Err(Error::Config("the exact oracle needs flat space".into()));
    }
    f.validate(m)?;
    g.validate(m)?;
    match dir {
        FlatDirection::Lift(x) => x.check(m)?,
        FlatDirection::Basis(a) if a >= m.dim() => return Err(Error::Config(format!("direction {a} out of range"))),
        FlatDirection::Basis(_) => {}
    }
    let d = m.dim();
    let mut times = f.times();
    times.extend(g.times());
    times.push(1.0);
    let grid = common_grid(&times)?;
    let mut nodes: Vec<usize> = times.iter().map(|&t| grid.index_of(t)).collect::<Result<_>>()?;
    nodes.sort_unstable();
    nodes.dedup();
    let bf = f.bind(m, grid)?;
    let bg = g.bind(m, grid)?;
    let steps: Vec<f64> = nodes
        .iter()
        .scan(0usize, |prev, &k| {
            let dt = grid.time(k) - grid.time(*prev);
            *prev = k;
            Some(dt.sqrt())
        })
        .collect();
    let dim = nodes.len() * d;
    let q = nodes_per_axis(dim);
    let mut frame = vec![0.0; d * d];
    for i in 0..d {
        frame[i * d + i] = 1.0;
    }
    let mut path = SparsePath { nodes: nodes.clone(), points: vec![vec![0.0; d]; nodes.len()], frame };
    let mut x1 = vec![0.0; d];
    let mut lhs_rhs = [0.0; 2];
    for (side, acc) in lhs_rhs.iter_mut().enumerate() {
        *acc = gaussian_expectation(dim, q, |z| {
            let mut b = vec![0.0; d];
            for (i, s) in steps.iter().enumerate() {
                for a in 0..d {
                    b[a] += s * z[i * d + a];
                }
                path.points[i].copy_from_slice(&b);
            }
            let h: Vec<f64> = match dir {
                FlatDirection::Lift(x) => {
                    x.value(m, &b, &mut x1);
                    x1.clone()
                }
                FlatDirection::Basis(a) => (0..d).map(|i| if i == a { 1.0 } else { 0.0 }).collect(),
            };
            let along = |k: usize| h.iter().map(|v| grid.time(k) * v).collect::<Vec<_>>();
            if side == 0 {
                bf.directional(&path, m, along) * bg.value(&path)
            } else {
                let weight = match dir {
                    FlatDirection::Lift(x) => h.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() - x.divergence(m, &b),
                    FlatDirection::Basis(a) => b[a],
                };
                bf.value(&path) * (-bg.directional(&path, m, along) + bg.value(&path) * weight)
            }
        });
    }
    Ok((lhs_rhs[0], lhs_rhs[1]))
}

/// The common exact value of both sides on flat space.
pub fn flat_exact(m: &Manifold, f: &CylinderFunction, g: &CylinderFunction, dir: FlatDirection<'_>) -> Result<f64> {
    let (l, r) = flat_exact_sides(m, f, g, dir)?;
    Ok(0.5 * (l + r))
}


/// Largest chain length the oracle accepts.
pub const MAX_CHAIN_STEPS: usize = 3;
const INNER_STEP: f64 = 1e-4;
const OUTER_STEP: f64 = 1e-3;
/// Quadrature nodes lighter than this are skipped when the chain breaks down.
const NEGLIGIBLE_WEIGHT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum OracleMethod {
    Quadrature {
        #[serde(default)]
        nodes_per_axis: Option<usize>,
    },
    MonteCarlo { n_samples: usize, seed: u64 },
}

impl Default for OracleMethod {
    fn default() -> Self {
        OracleMethod::Quadrature { nodes_per_axis: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct GeodesicOracle {
    pub manifold: Manifold,
    pub n_small: usize,
    pub field: VectorField,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    #[serde(default)]
    pub method: OracleMethod,
    /// Allowed |LHS − RHS| for quadrature runs.
    #[serde(default = "default_quadrature_tolerance")]
    pub tolerance: f64,
}

fn default_quadrature_tolerance() -> f64 {
    1e-4
}

/// Weighted normal equations of Y ≈ a·P + b·Q, where Y is the chain's own
/// divergence correction −Σ_α ∂_{V_α}c_α and P, Q are the two parts of the
/// engine's divergence term on the same chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignMoments {
    pub pp: f64,
    pub pq: f64,
    pub qq: f64,
    pub py: f64,
    pub qy: f64,
    pub yy: f64,
    pub weight: f64,
}

impl SignMoments {
    fn add(&mut self, w: f64, y: f64, p: f64, q: f64) {
        self.pp += w * p * p;
        self.pq += w * p * q;
        self.qq += w * q * q;
        self.py += w * p * y;
        self.qy += w * q * y;
        self.yy += w * y * y;
        self.weight += w;
    }

    pub fn merge(&self, o: &SignMoments) -> SignMoments {
        SignMoments {
            pp: self.pp + o.pp,
            pq: self.pq + o.pq,
            qq: self.qq + o.qq,
            py: self.py + o.py,
            qy: self.qy + o.qy,
            yy: self.yy + o.yy,
            weight: self.weight + o.weight,
        }
    }

    /// Least-squares coefficients; a column with no signal gets `None`.
    pub fn fit(&self) -> SignFit {
        let scale = self.yy.max(f64::MIN_POSITIVE);
        let p_on = self.pp > 1e-10 * scale;
        let q_on = self.qq > 1e-10 * scale;
        let (a, b) = match (p_on, q_on) {
            (true, true) => {
                let det = self.pp * self.qq - self.pq * self.pq;
                if det <= 1e-12 * self.pp * self.qq {
                    (None, None)
                } else {
                    (
                        Some((self.qq * self.py - self.pq * self.qy) / det),
                        Some((self.pp * self.qy - self.pq * self.py) / det),
                    )
                }
            }
            (true, false) => (Some(self.py / self.pp), None),
            (false, true) => (None, Some(self.qy / self.qq)),
            (false, false) => (None, None),
        };
        let (ca, cb) = (a.unwrap_or(0.0), b.unwrap_or(0.0));
        let resid = self.yy - 2.0 * (ca * self.py + cb * self.qy)
            + ca * ca * self.pp
            + 2.0 * ca * cb * self.pq
            + cb * cb * self.qq;
        SignFit { nabla_coeff: a, epsilon_coeff: b, relative_residual: (resid.max(0.0) / scale).sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignFit {
    pub nabla_coeff: Option<f64>,
    pub epsilon_coeff: Option<f64>,
    /// RMS misfit relative to RMS(Y).
    pub relative_residual: f64,
}

impl SignFit {
    /// The convention given by the signs of both coefficients, each of
    /// which must be clearly away from zero.
    pub fn convention(&self) -> Result<Convention> {
        let sign = |c: Option<f64>, what: &str| match c {
            Some(v) if v.abs() >= 0.5 => Ok(if v > 0.0 { 1 } else { -1 }),
            Some(v) => Err(Error::Config(format!("{what} coefficient {v:.3} does not fix a sign"))),
            None => Err(Error::Config(format!("no field in the pool exercises the {what} part"))),
        };
        Ok(Convention { nabla_sign: sign(self.nabla_coeff, "nabla")?, epsilon: sign(self.epsilon_coeff, "curvature")? })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub manifold: String,
    pub field: String,
    pub n_small: usize,
    pub method: OracleMethod,
    pub evaluations: usize,
    pub skipped_weight: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub difference: Estimate,
    pub tolerance: f64,
    /// Exact Gaussian value on flat space.
    pub exact: Option<f64>,
    pub moments: SignMoments,
    pub fit: SignFit,
    /// E[Y] against E[P] and E[Q], the chain's divergence correction and
    /// the engine's two parts.
    pub mean_y: f64,
    pub mean_p: f64,
    pub mean_q: f64,
    pub verdict: bool,
}

/// The n-step geodesic chain driven by standard normals z, with all
/// derivatives taken by finite differences of the chain map.
struct Chain<'a> {
    m: Manifold,
    grid: Grid,
    field: &'a VectorField,
    lift: &'a DeterministicLift,
    f: crate::cylinder::BoundCylinder<'a>,
    g: crate::cylinder::BoundCylinder<'a>,
    sqrt_dt: f64,
}

struct NodeValues {
    lhs: f64,
    rhs: f64,
    y: f64,
    p: f64,
    q: f64,
}

fn fd4(h: f64, mut f: impl FnMut(f64) -> Result<DVector<f64>>) -> Result<DVector<f64>> {
    let a = f(2.0 * h)?;
    let b = f(h)?;
    let c = f(-h)?;
    let e = f(-2.0 * h)?;
    Ok((-a + b * 8.0 - c * 8.0 + e) / (12.0 * h))
}

fn fd4_scalar(h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
}

impl Chain<'_> {
    fn nd(&self) -> usize {
        self.grid.n_steps() * self.m.dim()
    }

    fn run(&self, z: &[f64]) -> Result<FramePath> {
        let xi: Vec<f64> = z.iter().map(|v| v * self.sqrt_dt).collect();
        develop_increments(&self.m, self.grid, &xi, Provenance::Stochastic, None)
    }

    fn shifted(z: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        z.iter().zip(dir).map(|(a, b)| a + t * b).collect()
    }

    fn ambient_nodes(&self, z: &[f64]) -> Result<DVector<f64>> {
        let fp = self.run(z)?;
        let n = self.m.ambient_dim();
        let mut out = DVector::zeros(self.grid.n_steps() * n);
        for k in 1..=self.grid.n_steps() {
            out.rows_mut((k - 1) * n, n).copy_from_slice(fp.x(k));
        }
        Ok(out)
    }

    /// Node displacements in the frames of the chain at z, per unit z.
    fn jacobian(&self, z: &[f64], fp: &FramePath) -> Result<DMatrix<f64>> {
        let (d, n, nd) = (self.m.dim(), self.m.ambient_dim(), self.nd());
        let mut jac = DMatrix::zeros(nd, nd);
        let mut e = vec![0.0; nd];
        let mut col = vec![0.0; d];
        for j in 0..nd {
            e.fill(0.0);
            e[j] = 1.0;
            let dx = fd4(INNER_STEP, |t| self.ambient_nodes(&Self::shifted(z, &e, t)))?;
            for k in 1..=self.grid.n_steps() {
                self.m.pull(fp.u(k), &dx.as_slice()[(k - 1) * n..k * n], &mut col);
                for a in 0..d {
                    jac[((k - 1) * d + a, j)] = col[a];
                }
            }
        }
        Ok(jac)
    }

    /// V_α = J⁻¹ vec(Z_α(s₁), …, Z_α(s_n)) for every α.
    fn basis_fields(&self, z: &[f64]) -> Result<Vec<DVector<f64>>> {
        let fp = self.run(z)?;
        let lu = self.jacobian(z, &fp)?.lu();
        let d = self.m.dim();
        (0..d)
            .map(|a| {
                let mut rhs = DVector::zeros(self.nd());
                for k in 1..=self.grid.n_steps() {
                    rhs.rows_mut((k - 1) * d, d).copy_from_slice(self.lift.z[a].at(k));
                }
                lu.solve(&rhs).ok_or(Error::SingularFundamental { condition: f64::INFINITY })
            })
            .collect()
    }

    /// c = C̃u_n⁻¹X(x_n).
    fn coefficients(&self, z: &[f64]) -> Result<DVector<f64>> {
        let fp = self.run(z)?;
        let n = self.grid.n_steps();
        let mut v = vec![0.0; self.m.ambient_dim()];
        self.field.value(&self.m, fp.x(n), &mut v);
        let mut h = DVector::zeros(self.m.dim());
        self.m.pull(fp.u(n), &v, h.as_mut_slice());
        Ok(self.lift.kernel.c_tilde() * h)
    }

    fn evaluate(&self, z: &[f64]) -> Result<NodeValues> {
        let d = self.m.dim();
        let nd = self.nd();
        let fp = self.run(z)?;
        let va = self.basis_fields(z)?;
        let c = self.coefficients(z)?;
        let mut e = vec![0.0; nd];
        let mut div = vec![0.0; d];
        for j in 0..nd {
            e.fill(0.0);
            e[j] = 1.0;
            let dv = fd4(OUTER_STEP, |t| {
                let vs = self.basis_fields(&Self::shifted(z, &e, t))?;
                Ok(DVector::from_iterator(d, vs.iter().map(|v| v[j])))
            })?;
            for a in 0..d {
                div[a] += dv[a];
            }
        }
        let zv = DVector::from_column_slice(z);
        let mut skorokhod = 0.0;
        let mut y = 0.0;
        let mut v = DVector::zeros(nd);
        for a in 0..d {
            skorokhod += c[a] * (va[a].dot(&zv) - div[a]);
            let dc = fd4_scalar(OUTER_STEP, |t| Ok(self.coefficients(&Self::shifted(z, va[a].as_slice(), t))?[a]))?;
            y -= dc;
            v.axpy(c[a], &va[a], 1.0);
        }
        let along = |b: &crate::cylinder::BoundCylinder<'_>| {
            fd4_scalar(OUTER_STEP, |t| Ok(b.value(&self.run(&Self::shifted(z, v.as_slice(), t))?)))
        };
        let (xf, xg) = (along(&self.f)?, along(&self.g)?);
        let (fv, gv) = (self.f.value(&fp), self.g.value(&fp));
        let xi: Vec<f64> = z.iter().map(|v| v * self.sqrt_dt).collect();
        let b = BrownianDraw::from_increments(self.grid, d, xi, 0, 0);
        let pl = PathLift::new(&fp, &b, &self.lift.kernel, &self.lift.z, Some(self.field))?;
        let p = pl.nabla_part(self.field);
        let (q, _) = pl.curvature_part();
        let values = NodeValues { lhs: xf * gv, rhs: fv * (-xg + gv * (skorokhod + y)), y, p, q };
        if [values.lhs, values.rhs, values.y].iter().all(|v| v.is_finite()) {
            Ok(values)
        } else {
            Err(Error::IntegrationFailure("non-finite chain derivative".into()))
        }
    }
}

/// Both sides of the integration-by-parts identity for the n_small-step
/// geodesic chain, computed without the engine's transpose formula.
pub fn geodesic_oracle_ibp(cfg: &GeodesicOracle) -> Result<OracleReport> {
    let m = cfg.manifold;
    if cfg.n_small > MAX_CHAIN_STEPS {
        return Err(Error::CostGuard(cfg.n_small));
    }
    let grid = Grid::new(cfg.n_small)?;
    cfg.field.check(&m)?;
    let lift = deterministic_lift(&m, grid, KERNEL_FINE_STEPS)?;
    let chain = Chain {
        m,
        grid,
        field: &cfg.field,
        lift: &lift,
        f: cfg.f.bind(&m, grid)?,
        g: cfg.g.bind(&m, grid)?,
        sqrt_dt: grid.dt().sqrt(),
    };
    let nd = chain.nd();
    let mut moments = SignMoments::default();
    let mut sums = [0.0; 5];
    let mut skipped = 0.0;
    let mut evaluations = 0;
    let mut first_error = None;
    let (lhs, rhs, difference) = match cfg.method {
        OracleMethod::Quadrature { nodes_per_axis } => {
            let q = nodes_per_axis.unwrap_or(match nd {
                0..=4 => 14,
                5 | 6 => 7,
                _ => 4,
            });
            for_each_node(nd, q, |w, z| {
                evaluations += 1;
                match chain.evaluate(z) {
                    Ok(v) => {
                        moments.add(w, v.y, v.p, v.q);
                        for (s, x) in sums.iter_mut().zip([v.lhs, v.rhs, v.y, v.p, v.q]) {
                            *s += w * x;
                        }
                    }
                    Err(e) if w < NEGLIGIBLE_WEIGHT => {
                        skipped += w;
                        let _ = e;
                    }
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            });
            if let Some(e) = first_error {
                return Err(e);
            }
            let est = |v| Estimate { mean: v, se: 0.0, n: evaluations };
            (est(sums[0]), est(sums[1]), est(sums[0] - sums[1]))
        }
        OracleMethod::MonteCarlo { n_samples, seed } => {
            let mut l = Vec::with_capacity(n_samples);
            let mut r = Vec::with_capacity(n_samples);
            let w = 1.0 / n_samples as f64;
            let mut z = vec![0.0; nd];
            for i in 0..n_samples as u64 {
                let mut stream = NoiseStream::new(seed, i, nd);
                stream.fill_step(&mut z);
                let v = chain.evaluate(&z)?;
                evaluations += 1;
                moments.add(w, v.y, v.p, v.q);
                for (s, x) in sums.iter_mut().zip([v.lhs, v.rhs, v.y, v.p, v.q]) {
                    *s += w * x;
                }
                l.push(v.lhs);
                r.push(v.rhs);
            }
            (Estimate::from_samples(&l), Estimate::from_samples(&r), Estimate::paired_difference(&l, &r))
        }
    };
    let exact = if m.kind() == Kind::Euclidean {
        Some(flat_exact(&m, &cfg.f, &cfg.g, FlatDirection::Lift(&cfg.field))?)
    } else {
        None
    };
    let tol = match cfg.method {
        OracleMethod::Quadrature { .. } => cfg.tolerance,
        OracleMethod::MonteCarlo { .. } => 3.0 * difference.se,
    };
    let mut verdict = difference.mean.abs() <= tol;
    if let Some(e) = exact {
        let slack = |s: &Estimate| tol.max(3.0 * s.se);
        verdict &= (lhs.mean - e).abs() <= slack(&lhs) && (rhs.mean - e).abs() <= slack(&rhs);
    }
    Ok(OracleReport {
        manifold: m.name(),
        field: cfg.field.name().into(),
        n_small: cfg.n_small,
        method: cfg.method,
        evaluations,
        skipped_weight: skipped,
        lhs,
        rhs,
        difference,
        tolerance: tol,
        exact,
        moments,
        fit: moments.fit(),
        mean_y: sums[2],
        mean_p: sums[3],
        mean_q: sums[4],
        verdict,
    })
}

/// Pool the sign moments of several oracle runs and read off the convention.
pub fn select_convention(reports: &[OracleReport]) -> Result<(Convention, SignFit)> {
    let pooled = reports.iter().fold(SignMoments::default(), |acc, r| acc.merge(&r.moments));
    let fit = pooled.fit();
    Ok((fit.convention()?, fit))
}
