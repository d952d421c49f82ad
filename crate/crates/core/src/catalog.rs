//! Fixed test cases: bounded smooth cylinder functions paired with vector
//! fields or adapted directions.

use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderFunction, Profile};
use crate::manifold::{Manifold, VectorField};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IbpCase {
    pub name: String,
    pub manifold: Manifold,
    pub field: VectorField,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
}

fn single(t: f64, c: &[f64], b: f64, p: Profile) -> CylinderFunction {
    CylinderFunction::single(t, c.to_vec(), b, p)
}

/// Five flat cases on ℝ², sampling times in {½, 1}.
pub fn flat_cases() -> Vec<IbpCase> {
    let m = Manifold::euclidean(2).expect("valid model");
    let constant = VectorField::Constant { c: vec![1.0, -0.5] };
    let case = |name: &str, field: &VectorField, f: CylinderFunction, g: CylinderFunction| IbpCase {
        name: name.into(),
        manifold: m,
        field: field.clone(),
        f,
        g,
    };
    vec![
        case(
            "constant field, f = g = tanh of the endpoint",
            &constant,
            single(1.0, &[0.8, 0.3], 0.0, Profile::Tanh),
            single(1.0, &[0.8, 0.3], 0.0, Profile::Tanh),
        ),
        case(
            "identity field, two times",
            &VectorField::Identity,
            single(0.5, &[0.7, -0.4], 0.2, Profile::Sin),
            single(1.0, &[0.3, 0.9], -0.1, Profile::Cos),
        ),
        case(
            "constant field, product f, g = 1",
            &constant,
            single(0.5, &[0.6, 0.2], 0.1, Profile::Tanh).product(&single(1.0, &[-0.3, 0.5], 0.0, Profile::Sin)),
            CylinderFunction::constant(1.0),
        ),
        case(
            "identity field, f = 1",
            &VectorField::Identity,
            CylinderFunction::constant(1.0),
            single(0.5, &[0.5, 0.5], 0.0, Profile::Cos),
        ),
        case(
            "constant field, sums of profiles",
            &VectorField::Constant { c: vec![-0.4, 0.9] },
            single(1.0, &[0.2, -0.6], 0.3, Profile::Cos).combine(1.0, &single(0.5, &[0.9, 0.1], 0.0, Profile::Tanh), 0.5),
            single(0.5, &[0.4, 0.4], -0.2, Profile::Sin),
        ),
    ]
}

/// The unit-sphere cases: a Killing field and a gradient field, each
/// paired with f and g sampled at two times.
pub fn sphere_cases() -> Vec<IbpCase> {
    let m = Manifold::sphere(2).expect("valid model");
    let f = single(1.0, &[0.9, -0.5, 0.4], 0.2, Profile::Tanh);
    let g = single(0.5, &[0.3, 0.8, -0.6], 0.1, Profile::Cos);
    vec![
        IbpCase { name: "rotational field on S^2".into(), manifold: m, field: VectorField::Rotational { k: vec![0.3, -0.5, 1.0] }, f: f.clone(), g: g.clone() },
        IbpCase { name: "projected-constant field on S^2".into(), manifold: m, field: VectorField::Projected { c: vec![0.4, -1.0, 0.8] }, f, g },
    ]
}

/// Functions for the oracle chains: sampled on the two-step grid.
pub fn oracle_functions(m: &Manifold) -> (CylinderFunction, CylinderFunction) {
    let n = m.ambient_dim();
    let c1: Vec<f64> = [0.7, -0.4, 0.5][..n].to_vec();
    let c2: Vec<f64> = [0.3, 0.9, -0.2][..n].to_vec();
    (single(0.5, &c1, 0.2, Profile::Sin), single(1.0, &c2, -0.1, Profile::Cos))
}
