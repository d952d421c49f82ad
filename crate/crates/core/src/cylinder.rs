//! Smooth cylinder functions f = F(Σ_{s₁}, …, Σ_{sₙ}).
//!
//! F is a sum of terms, each a coefficient times a product of profiles
//! φ(⟨c, x_t⟩ + b) of ambient-linear coordinates, with φ one of identity,
//! tanh, sin, cos.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{Kind, Manifold};
use crate::rolling::FramePath;
use crate::series::CmVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Linear,
    Tanh,
    Sin,
    Cos,
}

impl Profile {
    #[inline]
    fn eval(self, a: f64) -> (f64, f64) {
        match self {
            Profile::Linear => (a, 1.0),
            Profile::Tanh => {
                let t = a.tanh();
                (t, 1.0 - t * t)
            }
            Profile::Sin => a.sin_cos(),
            Profile::Cos => {
                let (s, c) = a.sin_cos();
                (c, -s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub time: f64,
    pub c: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub profile: Profile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct CylinderFunction {
    pub terms: Vec<Term>,
}

/// Points and frames at grid nodes, as seen by a cylinder function.
pub trait PathView {
    fn x(&self, k: usize) -> &[f64];
    fn u(&self, k: usize) -> &[f64];
}

impl PathView for FramePath {
    fn x(&self, k: usize) -> &[f64] {
        FramePath::x(self, k)
    }

    fn u(&self, k: usize) -> &[f64] {
        FramePath::u(self, k)
    }
}

impl CylinderFunction {
    pub fn constant(v: f64) -> Self {
        Self { terms: vec![Term { coeff: v, factors: vec![] }] }
    }

    /// A single factor φ(⟨c, x_t⟩ + offset).
    pub fn single(time: f64, c: Vec<f64>, offset: f64, profile: Profile) -> Self {
        Self { terms: vec![Term { coeff: 1.0, factors: vec![Factor { time, c, offset, profile }] }] }
    }

    /// ⟨c, x_t⟩.
    pub fn linear(time: f64, c: Vec<f64>) -> Self {
        Self::single(time, c, 0.0, Profile::Linear)
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term { coeff: a.coeff * b.coeff, factors });
            }
        }
        Self { terms }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let scale = |t: &Term, s: f64| Term { coeff: t.coeff * s, factors: t.factors.clone() };
        let mut terms: Vec<Term> = self.terms.iter().map(|t| scale(t, a)).collect();
        terms.extend(other.terms.iter().map(|t| scale(t, b)));
        Self { terms }
    }

    /// Distinct partition times in increasing order.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.terms.iter().flat_map(|t| t.factors.iter().map(|f| f.time)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn validate(&self, m: &Manifold) -> Result<()> {
        for f in self.terms.iter().flat_map(|t| &t.factors) {
            if f.c.len() != m.ambient_dim() {
                return Err(Error::DimensionMismatch { expected: m.ambient_dim(), got: f.c.len() });
            }
            if !(f.time > 0.0 && f.time <= 1.0) {
                return Err(Error::Config(format!("partition time {} outside (0, 1]", f.time)));
            }
        }
        Ok(())
    }

    /// Resolve partition times to grid indices.
    pub fn bind(&self, m: &Manifold, grid: Grid) -> Result<BoundCylinder<'_>> {
        self.validate(m)?;
        let mut index = Vec::new();
        for t in &self.terms {
            let mut idx = Vec::with_capacity(t.factors.len());
            for f in &t.factors {
                idx.push(grid.index_of(f.time)?);
            }
            index.push(idx);
        }
        Ok(BoundCylinder { f: self, index })
    }

    /// Upper bound on sup|F| when finite on the model.
    pub fn sup_bound(&self, m: &Manifold) -> Option<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let mut p = t.coeff.abs();
            for f in &t.factors {
                p *= match f.profile {
                    Profile::Linear if m.kind() == Kind::Sphere => {
                        f.c.iter().map(|v| v * v).sum::<f64>().sqrt() + f.offset.abs()
                    }
                    Profile::Linear => return None,
                    _ => 1.0,
                };
            }
            total += p;
        }
        Some(total)
    }
}

pub struct BoundCylinder<'a> {
    f: &'a CylinderFunction,
    index: Vec<Vec<usize>>,
}

impl BoundCylinder<'_> {
    pub fn function(&self) -> &CylinderFunction {
        self.f
    }

    /// Grid indices used, sorted and distinct.
    pub fn indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.index.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn value<P: PathView + ?Sized>(&self, p: &P) -> f64 {
        let mut total = 0.0;
        for (t, idx) in self.f.terms.iter().zip(&self.index) {
            let mut prod = t.coeff;
            for (f, &k) in t.factors.iter().zip(idx) {
                prod *= f.profile.eval(dot(&f.c, p.x(k)) + f.offset).0;
            }
            total += prod;
        }
        total
    }

    /// Σ_j ∂F/∂a_j · dir(j, k_j), where a_j = ⟨c_j, x⟩ + b_j and `dir`
    /// returns ⟨c_j, v⟩ for the ambient displacement v at node k_j.
    pub fn derivative_with<P: PathView + ?Sized>(&self, p: &P, mut dir: impl FnMut(&[f64], usize) -> f64) -> f64 {
        let mut total = 0.0;
        let mut vals = Vec::new();
        let mut ders = Vec::new();
        for (t, idx) in self.f.terms.iter().zip(&self.index) {
            vals.clear();
            ders.clear();
            for (f, &k) in t.factors.iter().zip(idx) {
                let (v, dv) = f.profile.eval(dot(&f.c, p.x(k)) + f.offset);
                vals.push(v);
                ders.push(dv);
            }
            for (j, (f, &k)) in t.factors.iter().zip(idx).enumerate() {
                let mut prod = t.coeff * ders[j];
                for (i, v) in vals.iter().enumerate() {
                    if i != j {
                        prod *= v;
                    }
                }
                if prod != 0.0 {
                    total += prod * dir(&f.c, k);
                }
            }
        }
        total
    }

    /// X^h f = Σᵢ ⟨u_{sᵢ}⁻¹ gradᵢF, h(sᵢ)⟩ for h given at grid nodes.
    pub fn directional<P: PathView + ?Sized>(&self, p: &P, m: &Manifold, h: impl Fn(usize) -> Vec<f64>) -> f64 {
        let n = m.ambient_dim();
        let mut v = vec![0.0; n];
        self.derivative_with(p, |c, k| {
            m.push(p.u(k), &h(k), &mut v);
            dot(c, &v)
        })
    }

    /// Frame-coordinate gradient at slot index `k`: u_kᵀ∇F restricted to
    /// the factors sampled at k.
    pub fn slot_gradient<P: PathView + ?Sized>(&self, p: &P, m: &Manifold, k: usize) -> Vec<f64> {
        let d = m.dim();
        let n = m.ambient_dim();
        let mut amb = vec![0.0; n];
        let mut one = vec![0.0; d];
        (0..d)
            .map(|a| {
                one.fill(0.0);
                one[a] = 1.0;
                m.push(p.u(k), &one, &mut amb);
                self.derivative_with(p, |c, j| if j == k { dot(c, &amb) } else { 0.0 })
            })
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// X^h f along a frame path.
pub fn directional_derivative(f: &CylinderFunction, fp: &FramePath, h: &CmVector) -> Result<f64> {
    let m = fp.manifold();
    fp.grid().ensure_same(&h.grid())?;
    if h.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: h.dim() });
    }
    let b = f.bind(m, fp.grid())?;
    Ok(b.directional(fp, m, |k| h.at(k).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{sample_brownian, stochastic_develop};
    use nalgebra::DVector;
    use rand::prelude::*;

    fn sample_function() -> CylinderFunction {
        let a = CylinderFunction::single(0.5, vec![1.0, -0.5, 0.3], 0.2, Profile::Tanh);
        let b = CylinderFunction::single(1.0, vec![0.2, 0.9, -0.4], -0.1, Profile::Sin);
        let c = CylinderFunction::single(1.0, vec![-0.7, 0.1, 0.5], 0.0, Profile::Cos);
        a.product(&b).combine(2.0, &c.product(&CylinderFunction::linear(0.5, vec![0.0, 1.0, 1.0])), -0.5)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = Manifold::sphere(2).unwrap();
        let g = Grid::new(400).unwrap();
        let f = sample_function();
        let mut rng = StdRng::seed_from_u64(1);
        for i in 0..20 {
            let fp = stochastic_develop(&sample_brownian(3, i, g, 2), &m).unwrap();
            let bound = f.bind(&m, g).unwrap();
            for &k in &bound.indices() {
                let grad = bound.slot_gradient(&fp, &m, k);
                let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                // move the slot point along the geodesic with initial velocity u_k a
                let mut v = vec![0.0; 3];
                m.push(fp.u(k), &a, &mut v);
                let eps = 1e-5;
                let shifted = |s: f64| {
                    let y = m.exp_map(&fp.point(k), &DVector::from_vec(v.clone()).scale(s)).unwrap();
                    let mut pts: Vec<Vec<f64>> = (0..=400).map(|j| fp.x(j).to_vec()).collect();
                    pts[k] = y.0.as_slice().to_vec();
                    struct P(Vec<Vec<f64>>);
                    impl PathView for P {
                        fn x(&self, k: usize) -> &[f64] {
                            &self.0[k]
                        }
                        fn u(&self, _: usize) -> &[f64] {
                            unreachable!()
                        }
                    }
                    bound.value(&P(pts))
                };
                let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
                let an: f64 = grad.iter().zip(&a).map(|(x, y)| x * y).sum();
                assert!((fd - an).abs() < 1e-5, "{fd} {an}");
            }
        }
    }

    #[test]
    fn directional_examples() {
        let m = Manifold::euclidean(2).unwrap();
        let g = Grid::new(10).unwrap();
        let fp = stochastic_develop(&sample_brownian(1, 0, g, 2), &m).unwrap();
        let f = CylinderFunction::linear(1.0, vec![2.0, -1.0]);
        let zero = CmVector::zeros(g, 2);
        assert_eq!(directional_derivative(&f, &fp, &zero).unwrap(), 0.0);
        let h = CmVector::from_fn(g, 2, |t| DVector::from_vec(vec![t * t, 3.0 * t])).unwrap();
        assert!((directional_derivative(&f, &fp, &h).unwrap() - (2.0 - 3.0)).abs() < 1e-14);
        let off = CylinderFunction::linear(0.55, vec![1.0, 0.0]);
        assert!(matches!(directional_derivative(&off, &fp, &h), Err(Error::PartitionOffGrid(_))));
    }

    /// Flat Cameron-Martin shift: F(w + tδ) − F(w) over t.
    #[test]
    fn flat_shift_finite_difference() {
        let m = Manifold::euclidean(2).unwrap();
        let g = Grid::new(20).unwrap();
        let b = sample_brownian(5, 5, g, 2);
        let f = CylinderFunction::single(1.0, vec![0.4, -1.1], 0.3, Profile::Tanh)
            .product(&CylinderFunction::single(1.0, vec![1.0, 0.5], 0.0, Profile::Cos));
        let a = [0.7, -0.2];
        let h = CmVector::linear(g, &a);
        let fp = stochastic_develop(&b, &m).unwrap();
        let exact = directional_derivative(&f, &fp, &h).unwrap();
        let t = 1e-4;
        let shifted = crate::stochastic::BrownianDraw::from_increments(
            g,
            2,
            b.increments().chunks(2).flat_map(|c| [c[0] + t * a[0] / 20.0, c[1] + t * a[1] / 20.0]).collect(),
            0,
            0,
        );
        let fps = stochastic_develop(&shifted, &m).unwrap();
        let bound = f.bind(&m, g).unwrap();
        let fd = (bound.value(&fps) - bound.value(&fp)) / t;
        assert!((fd - exact).abs() < 10.0 * t + 1e-6);
    }

    #[test]
    fn sup_bounds() {
        let s2 = Manifold::sphere(2).unwrap();
        let r2 = Manifold::euclidean(3).unwrap();
        let f = sample_function();
        assert!(f.sup_bound(&s2).is_some());
        assert!(f.sup_bound(&r2).is_none());
        assert_eq!(CylinderFunction::constant(2.0).sup_bound(&r2), Some(2.0));
    }
}
