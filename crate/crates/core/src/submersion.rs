//! Minimal lifts through a Riemannian submersion ℝ³ → ℝ² and the residual
//! ρ = div_g X̂ − div_h X ∘ π, which should depend only on X̂ at the point.
//!
//! Total metric g = diag(h₁, h₂, w²) with h₁, h₂ functions of the base
//! coordinates, base metric h = diag(h₁, h₂), π the projection onto the
//! first two coordinates. For the warped case ρ = X̂(log w).

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-difference step of `divergence_volume`.
pub const FD_STEP: f64 = 1e-4;
const NOISE_FLOOR: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "kebab-case")]
pub enum SubmersionCase {
    /// w ≡ 1.
    Product,
    /// w = 2 + cos y₁ + ½y₂² + 0.3 sin y₃.
    Warped,
}

fn h1(x: &[f64]) -> f64 {
    (0.3 * x[1]).exp()
}

fn h2(x: &[f64]) -> f64 {
    1.0 + 0.5 * x[0].sin().powi(2)
}

impl SubmersionCase {
    pub fn warp(&self, y: &[f64]) -> f64 {
        match self {
            SubmersionCase::Product => 1.0,
            SubmersionCase::Warped => 2.0 + y[0].cos() + 0.5 * y[1] * y[1] + 0.3 * y[2].sin(),
        }
    }

    /// ∂₁ log w, ∂₂ log w by hand.
    pub fn log_warp_gradient(&self, y: &[f64]) -> [f64; 2] {
        match self {
            SubmersionCase::Product => [0.0, 0.0],
            SubmersionCase::Warped => {
                let w = self.warp(y);
                [-y[0].sin() / w, y[1] / w]
            }
        }
    }

    pub fn total_metric(&self, y: &[f64]) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(h1(y), h2(y), self.warp(y).powi(2)))
    }

    pub fn base_metric(&self, x: &[f64]) -> Matrix2<f64> {
        Matrix2::from_diagonal(&Vector2::new(h1(x), h2(x)))
    }

    /// π_* at any point.
    pub fn projection_jacobian(&self) -> Matrix2x3<f64> {
        Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    }
}

/// v̂ = π_*^{tr}(π_*π_*^{tr})⁻¹v with π_*^{tr} = g⁻¹π_*ᵀh the metric adjoint.
pub fn pseudo_lift(case: SubmersionCase, y: &[f64; 3], v: &[f64; 2]) -> Result<[f64; 3]> {
    let p = case.projection_jacobian();
    let smin = p.singular_values().min();
    if smin <= 1e-8 {
        return Err(Error::RankDeficient(smin));
    }
    let g = case.total_metric(y);
    let h = case.base_metric(&y[..2]);
    let g_inv = g.try_inverse().ok_or(Error::RankDeficient(0.0))?;
    let adj = g_inv * p.transpose() * h;
    let gram = (p * adj).try_inverse().ok_or(Error::RankDeficient(0.0))?;
    let lifted = adj * (gram * Vector2::new(v[0], v[1]));
    Ok([lifted[0], lifted[1], lifted[2]])
}

/// (1/√det g)·Σᵢ ∂ᵢ(√det g Xⁱ) by fourth-order central differences.
pub fn divergence_volume<const N: usize>(sqrt_det: impl Fn(&[f64; N]) -> f64, x: impl Fn(&[f64; N]) -> [f64; N], at: &[f64; N], step: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..N {
        let flux = |t: f64| {
            let mut p = *at;
            p[i] += t;
            sqrt_det(&p) * x(&p)[i]
        };
        total += (-flux(2.0 * step) + 8.0 * flux(step) - 8.0 * flux(-step) + flux(-2.0 * step)) / (12.0 * step);
    }
    total / sqrt_det(at)
}

/// Base vector fields on ℝ².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum BaseField {
    Constant { c: [f64; 2] },
    /// X(x) = A x + b, rows of A given in order.
    Affine { a: [[f64; 2]; 2], b: [f64; 2] },
    /// X(x) = (sin x₂, x₁ cos x₁).
    Swirl,
}

impl BaseField {
    pub fn value(&self, x: &[f64]) -> [f64; 2] {
        match self {
            BaseField::Constant { c } => *c,
            BaseField::Affine { a, b } => [
                a[0][0] * x[0] + a[0][1] * x[1] + b[0],
                a[1][0] * x[0] + a[1][1] * x[1] + b[1],
            ],
            BaseField::Swirl => [x[1].sin(), x[0] * x[0].cos()],
        }
    }
}

/// A base field combination Σ aᵢXᵢ.
fn combo<'a>(terms: &'a [(f64, &'a BaseField)]) -> impl Fn(&[f64]) -> [f64; 2] + 'a {
    move |x| {
        terms.iter().fold([0.0; 2], |acc, (a, f)| {
            let v = f.value(x);
            [acc[0] + a * v[0], acc[1] + a * v[1]]
        })
    }
}

fn divergence_pair(case: SubmersionCase, field: &dyn Fn(&[f64]) -> [f64; 2], y: &[f64; 3], step: f64) -> Result<(f64, f64)> {
    let total_sqrt = |p: &[f64; 3]| case.total_metric(p).determinant().sqrt();
    let base_sqrt = |p: &[f64; 2]| case.base_metric(p).determinant().sqrt();
    pseudo_lift(case, y, &field(&y[..2]))?;
    let lifted = |p: &[f64; 3]| pseudo_lift(case, p, &field(&p[..2])).unwrap_or([f64::NAN; 3]);
    let total = divergence_volume(total_sqrt, lifted, y, step);
    if !total.is_finite() {
        return Err(Error::RankDeficient(0.0));
    }
    let base = divergence_volume(base_sqrt, |p: &[f64; 2]| field(p), &[y[0], y[1]], step);
    Ok((total, base))
}

/// ρ(m) for the field, rejecting steps where the difference quotient is
/// dominated by rounding.
fn rho(case: SubmersionCase, field: &dyn Fn(&[f64]) -> [f64; 2], y: &[f64; 3]) -> Result<(f64, f64, f64)> {
    let (dt, db) = divergence_pair(case, field, y, FD_STEP)?;
    let (dt2, db2) = divergence_pair(case, field, y, 2.0 * FD_STEP)?;
    let r = dt - db;
    if ((dt2 - db2) - r).abs() > NOISE_FLOOR * (1.0 + r.abs()) {
        return Err(Error::NoiseFloor(format!("difference quotient unstable at {y:?}")));
    }
    Ok((r, dt, db))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StructureReport {
    pub point: [f64; 3],
    pub div_total: f64,
    pub div_base: f64,
    pub rho: f64,
    /// X̂(log w), the hand-derived value.
    pub rho_analytic: f64,
    /// |ρ(aX̂+bŶ) − aρ(X̂) − bρ(Ŷ)| for a fixed companion field Y.
    pub linearity: f64,
    /// |ρ(2X̂) − 2ρ(X̂)|.
    pub homogeneity: f64,
    /// |ρ(X̂) − ρ(Ĉ)| with C the constant field equal to X at π(m).
    pub locality: f64,
}

/// ρ at m with its linearity, homogeneity and locality residuals.
pub fn structure_residual(case: SubmersionCase, x: &BaseField, m: &[f64; 3]) -> Result<StructureReport> {
    let companion = BaseField::Swirl;
    let (a, b) = (0.7, -1.3);
    let (r, dt, db) = rho(case, &combo(&[(1.0, x)]), m)?;
    let (ry, _, _) = rho(case, &combo(&[(1.0, &companion)]), m)?;
    let (rxy, _, _) = rho(case, &combo(&[(a, x), (b, &companion)]), m)?;
    let (r2, _, _) = rho(case, &combo(&[(2.0, x)]), m)?;
    let frozen = BaseField::Constant { c: x.value(&m[..2]) };
    let (rc, _, _) = rho(case, &combo(&[(1.0, &frozen)]), m)?;
    let v = x.value(&m[..2]);
    let grad = case.log_warp_gradient(m);
    Ok(StructureReport {
        point: *m,
        div_total: dt,
        div_base: db,
        rho: r,
        rho_analytic: v[0] * grad[0] + v[1] * grad[1],
        linearity: (rxy - a * r - b * ry).abs(),
        homogeneity: (r2 - 2.0 * r).abs(),
        locality: (r - rc).abs(),
    })
}

/// CSV rows `y1,y2,y3,div_total,div_base,rho,rho_analytic`.
pub fn structure_csv(reports: &[StructureReport]) -> String {
    let mut out = String::from("y1,y2,y3,div_total,div_base,rho,rho_analytic\n");
    for r in reports {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.point[0], r.point[1], r.point[2], r.div_total, r.div_base, r.rho, r.rho_analytic
        ));
    }
    out
}
