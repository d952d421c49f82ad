//! Constant-curvature model spaces in embedded coordinates.
//!
//! The sphere sits in ℝ^{d+1} with base point at the last coordinate axis; the
//! hyperbolic space is the upper sheet of the hyperboloid ⟨x,x⟩ = −1 in
//! Minkowski space ℝ^{1,d} with base point e₀. Frames are stored column-major
//! as ambient × d matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Euclidean,
    Sphere,
    Hyperbolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub DVector<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame(pub DMatrix<f64>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(try_from = "ManifoldSpec", into = "ManifoldSpec")]
pub struct Manifold {
    kind: Kind,
    dim: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: Kind,
    pub dim: usize,
}

impl TryFrom<ManifoldSpec> for Manifold {
    type Error = Error;
    fn try_from(s: ManifoldSpec) -> Result<Self> {
        Manifold::new(s.kind, s.dim)
    }
}

impl From<Manifold> for ManifoldSpec {
    fn from(m: Manifold) -> Self {
        ManifoldSpec { kind: m.kind, dim: m.dim }
    }
}

impl Manifold {
    pub fn new(kind: Kind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidManifold("dimension must be at least 1".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(Kind::Euclidean, dim)
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        Self::new(Kind::Sphere, dim)
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        Self::new(Kind::Hyperbolic, dim)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            Kind::Euclidean => self.dim,
            _ => self.dim + 1,
        }
    }

    /// Sectional curvature κ.
    pub fn curvature_sign(&self) -> f64 {
        match self.kind {
            Kind::Euclidean => 0.0,
            Kind::Sphere => 1.0,
            Kind::Hyperbolic => -1.0,
        }
    }

    /// The bound N with ‖R‖ ≤ N.
    pub fn curvature_bound(&self) -> f64 {
        self.curvature_sign().abs()
    }

    /// Ric = κ(d−1)·I for the model spaces.
    pub fn ricci_factor(&self) -> f64 {
        self.curvature_sign() * (self.dim as f64 - 1.0)
    }

    pub fn name(&self) -> String {
        match self.kind {
            Kind::Euclidean => format!("R^{}", self.dim),
            Kind::Sphere => format!("S^{}", self.dim),
            Kind::Hyperbolic => format!("H^{}", self.dim),
        }
    }

    /// Ambient inner product: Euclidean, or Minkowski for the hyperboloid.
    #[inline]
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        if self.kind == Kind::Hyperbolic {
            s - 2.0 * a[0] * b[0]
        } else {
            s
        }
    }

    pub fn base_point(&self) -> Point {
        let mut x = DVector::zeros(self.ambient_dim());
        match self.kind {
            Kind::Euclidean => {}
            Kind::Sphere => x[self.dim] = 1.0,
            Kind::Hyperbolic => x[0] = 1.0,
        }
        Point(x)
    }

    pub fn base_frame(&self) -> Frame {
        let n = self.ambient_dim();
        let mut u = DMatrix::zeros(n, self.dim);
        let shift = usize::from(self.kind == Kind::Hyperbolic);
        for j in 0..self.dim {
            u[(j + shift, j)] = 1.0;
        }
        Frame(u)
    }

    pub fn point_defect(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Euclidean => 0.0,
            Kind::Sphere => (self.inner(x, x) - 1.0).abs(),
            Kind::Hyperbolic => {
                if x[0] <= 0.0 {
                    f64::INFINITY
                } else {
                    (self.inner(x, x) + 1.0).abs()
                }
            }
        }
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        self.check_len(x.0.len())?;
        let defect = self.point_defect(x.0.as_slice());
        if defect > 1e-10 {
            return Err(Error::InvalidPoint { defect });
        }
        Ok(())
    }

    pub fn tangent_defect(&self, x: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            Kind::Euclidean => 0.0,
            _ => self.inner(x, v).abs(),
        }
    }

    /// Largest deviation of `u` from an orthonormal tangent frame at `x`.
    pub fn frame_defect(&self, x: &[f64], u: &[f64]) -> f64 {
        let n = self.ambient_dim();
        let mut defect: f64 = 0.0;
        for i in 0..self.dim {
            let ui = &u[i * n..(i + 1) * n];
            defect = defect.max(self.tangent_defect(x, ui));
            for j in 0..=i {
                let g = self.inner(ui, &u[j * n..(j + 1) * n]);
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g - target).abs());
            }
        }
        defect
    }

    pub fn check_frame(&self, x: &Point, u: &Frame) -> Result<()> {
        self.check_point(x)?;
        if u.0.nrows() != self.ambient_dim() || u.0.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim() * self.dim,
                got: u.0.len(),
            });
        }
        let defect = self.frame_defect(x.0.as_slice(), u.0.as_slice());
        if defect > 1e-10 {
            return Err(Error::InvalidFrame { defect });
        }
        Ok(())
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got });
        }
        Ok(())
    }

    fn check_coords(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    /// Frame coordinates u⁻¹v of an ambient tangent vector.
    #[inline]
    pub fn pull(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.ambient_dim();
        for (j, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.inner(&u[j * n..(j + 1) * n], v);
        }
    }

    /// Ambient vector u·a.
    #[inline]
    pub fn push(&self, u: &[f64], a: &[f64], out: &mut [f64]) {
        let n = self.ambient_dim();
        out[..n].fill(0.0);
        for (j, aj) in a.iter().enumerate().take(self.dim) {
            for (o, uj) in out.iter_mut().zip(&u[j * n..(j + 1) * n]) {
                *o += uj * aj;
            }
        }
    }

    /// The pulled-back curvature u⁻¹R(ua, ub)u as a d×d matrix.
    pub fn curvature_op(&self, u: &Frame, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coords(a.len())?;
        self.check_coords(b.len())?;
        let n = self.ambient_dim();
        if u.0.nrows() != n || u.0.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: n * self.dim, got: u.0.len() });
        }
        let us = u.0.as_slice();
        let k = self.curvature_sign();
        let mut ua = vec![0.0; n];
        let mut ub = vec![0.0; n];
        self.push(us, a, &mut ua);
        self.push(us, b, &mut ub);
        let mut r = DMatrix::zeros(self.dim, self.dim);
        let mut rc = vec![0.0; n];
        let mut col = vec![0.0; self.dim];
        for j in 0..self.dim {
            let c = &us[j * n..(j + 1) * n];
            let bc = self.inner(&ub, c);
            let ac = self.inner(&ua, c);
            for i in 0..n {
                rc[i] = k * (bc * ua[i] - ac * ub[i]);
            }
            self.pull(us, &rc, &mut col);
            r.column_mut(j).copy_from_slice(&col);
        }
        Ok(r)
    }

    /// Closed form κ(abᵀ − baᵀ) of the curvature in frame coordinates,
    /// written column-major into `out`; agrees with `curvature_op` for any
    /// orthonormal frame.
    #[inline]
    pub fn curvature_coords(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let k = self.curvature_sign();
        for j in 0..d {
            for i in 0..d {
                out[j * d + i] = k * (a[i] * b[j] - b[i] * a[j]);
            }
        }
    }

    /// Ric_u(c) = Σᵢ R_u(c, eᵢ)eᵢ.
    pub fn ricci_endomorphism(&self, u: &Frame) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let mut ric = DMatrix::zeros(d, d);
        let mut ei = vec![0.0; d];
        let mut c = vec![0.0; d];
        for j in 0..d {
            c.fill(0.0);
            c[j] = 1.0;
            for i in 0..d {
                ei.fill(0.0);
                ei[i] = 1.0;
                let r = self.curvature_op(u, &c, &ei)?;
                ric.column_mut(j).axpy(1.0, &r.column(i), 1.0);
            }
        }
        Ok(ric)
    }

    pub fn divergence(&self, field: &VectorField, x: &Point) -> Result<f64> {
        field.check(self)?;
        self.check_len(x.0.len())?;
        Ok(field.divergence(self, x.0.as_slice()))
    }

    pub fn exp_map(&self, x: &Point, v: &DVector<f64>) -> Result<Point> {
        self.check_point(x)?;
        self.check_len(v.len())?;
        let xs = x.0.as_slice();
        let vs = v.as_slice();
        let defect = self.tangent_defect(xs, vs);
        if defect > 1e-10 * (1.0 + v.norm()) {
            return Err(Error::NotTangent { defect });
        }
        let r = self.inner(vs, vs).max(0.0).sqrt();
        let out = match self.kind {
            Kind::Euclidean => &x.0 + v,
            _ if r == 0.0 => x.0.clone(),
            Kind::Sphere => x.0.scale(r.cos()) + v.scale(r.sin() / r),
            Kind::Hyperbolic => x.0.scale(r.cosh()) + v.scale(r.sinh() / r),
        };
        let mut p = Point(out);
        self.project_point(p.0.as_mut_slice());
        Ok(p)
    }

    /// Renormalise a point onto the model; returns the size of the correction.
    pub fn project_point(&self, x: &mut [f64]) -> f64 {
        let q = match self.kind {
            Kind::Euclidean => return 0.0,
            Kind::Sphere => self.inner(x, x),
            Kind::Hyperbolic => -self.inner(x, x),
        };
        if !(q > 0.0) || (self.kind == Kind::Hyperbolic && x[0] <= 0.0) {
            return f64::INFINITY;
        }
        let s = q.sqrt();
        x.iter_mut().for_each(|v| *v /= s);
        (s - 1.0).abs()
    }

    /// Project `u` onto the tangent space at `x` and re-orthonormalise by
    /// modified Gram-Schmidt; returns the largest entry change.
    pub fn repair_frame(&self, x: &[f64], u: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let n = self.ambient_dim();
        scratch.clear();
        scratch.extend_from_slice(u);
        if self.kind != Kind::Euclidean {
            let xx = self.inner(x, x);
            for j in 0..self.dim {
                let c = &mut u[j * n..(j + 1) * n];
                let p = self.inner(c, x) / xx;
                c.iter_mut().zip(x).for_each(|(ci, xi)| *ci -= p * xi);
            }
        }
        for j in 0..self.dim {
            let (done, rest) = u.split_at_mut(j * n);
            let c = &mut rest[..n];
            for i in 0..j {
                let prev = &done[i * n..(i + 1) * n];
                let p = self.inner(c, prev);
                c.iter_mut().zip(prev).for_each(|(ci, pi)| *ci -= p * pi);
            }
            let norm = self.inner(c, c).max(0.0).sqrt();
            if norm > 0.0 {
                c.iter_mut().for_each(|ci| *ci /= norm);
            }
        }
        u.iter().zip(scratch.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Catalog of analytic vector fields, addressable by name in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorField {
    /// X(w) = w on ℝ^d.
    Identity,
    /// X ≡ c on ℝ^d.
    Constant { c: Vec<f64> },
    /// X(x) = k × x on S².
    Rotational { k: Vec<f64> },
    /// X(x) = c − ⟨c,x⟩x on S^d.
    Projected { c: Vec<f64> },
    /// tanh(r)·∂_r on H^d, with r the distance to the base point.
    RadialTanh,
}

impl VectorField {
    pub fn name(&self) -> &'static str {
        match self {
            VectorField::Identity => "identity",
            VectorField::Constant { .. } => "constant",
            VectorField::Rotational { .. } => "rotational",
            VectorField::Projected { .. } => "projected",
            VectorField::RadialTanh => "radial-tanh",
        }
    }

    pub fn check(&self, m: &Manifold) -> Result<()> {
        let ok = match self {
            VectorField::Identity => m.kind() == Kind::Euclidean,
            VectorField::Constant { c } => m.kind() == Kind::Euclidean && c.len() == m.dim(),
            VectorField::Rotational { k } => m.kind() == Kind::Sphere && m.dim() == 2 && k.len() == 3,
            VectorField::Projected { c } => m.kind() == Kind::Sphere && c.len() == m.ambient_dim(),
            VectorField::RadialTanh => m.kind() == Kind::Hyperbolic,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedField { field: self.name().into(), manifold: m.name() })
        }
    }

    /// Ambient value X(x). The caller must have called `check`.
    pub fn value(&self, m: &Manifold, x: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Identity => out.copy_from_slice(x),
            VectorField::Constant { c } => out.copy_from_slice(c),
            VectorField::Rotational { k } => cross(k, x, out),
            VectorField::Projected { c } => {
                let p = m.inner(c, x);
                for i in 0..x.len() {
                    out[i] = c[i] - p * x[i];
                }
            }
            VectorField::RadialTanh => {
                out.copy_from_slice(x);
                out[0] -= 1.0 / x[0];
            }
        }
    }

    /// Covariant derivative ∇_v X at x, as an ambient tangent vector.
    pub fn covariant(&self, m: &Manifold, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Identity => out.copy_from_slice(v),
            VectorField::Constant { .. } => out.fill(0.0),
            VectorField::Rotational { k } => {
                cross(k, v, out);
                let p = m.inner(out, x);
                out.iter_mut().zip(x).for_each(|(o, xi)| *o -= p * xi);
            }
            VectorField::Projected { c } => {
                let p = m.inner(c, x);
                out.iter_mut().zip(v).for_each(|(o, vi)| *o = -p * vi);
            }
            VectorField::RadialTanh => {
                let x0 = x[0];
                let s = v[0] / (x0 * x0);
                for i in 0..x.len() {
                    out[i] = v[i] - s * x0 * x[i];
                }
                out[0] += s;
            }
        }
    }

    pub fn divergence(&self, m: &Manifold, x: &[f64]) -> f64 {
        let d = m.dim() as f64;
        match self {
            VectorField::Identity => d,
            VectorField::Constant { .. } | VectorField::Rotational { .. } => 0.0,
            VectorField::Projected { c } => -d * m.inner(c, x),
            VectorField::RadialTanh => d - 1.0 + 1.0 / (x[0] * x[0]),
        }
    }

    /// Sup of |X| over the manifold, if finite.
    pub fn sup_norm(&self) -> Option<f64> {
        let n = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            VectorField::Identity => None,
            VectorField::Constant { c } | VectorField::Projected { c } => Some(n(c)),
            VectorField::Rotational { k } => Some(n(k)),
            VectorField::RadialTanh => Some(1.0),
        }
    }
}

#[inline]
fn cross(a: &[f64], b: &[f64], out: &mut [f64]) {
    out[0] = a[1] * b[2] - a[2] * b[1];
    out[1] = a[2] * b[0] - a[0] * b[2];
    out[2] = a[0] * b[1] - a[1] * b[0];
}
