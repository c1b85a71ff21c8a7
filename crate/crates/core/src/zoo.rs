//! Fixed collections of test fields with known structure.

use std::f64::consts::TAU;

use crate::fields::{lift_eigenfunction, make_harmonic_poly, make_torus_eigen, sin_torus, Field, Part, Trig};
use crate::geom::Cube;

/// A harmonic field with a center for frequency and growth checks.
#[derive(Clone, Debug)]
pub struct HarmonicEntry {
    pub name: String,
    pub field: Field<f64>,
    pub center: Vec<f64>,
}

fn entry(name: &str, field: Field<f64>, center: Vec<f64>) -> HarmonicEntry {
    HarmonicEntry { name: name.to_string(), field, center }
}

pub fn harmonic_zoo() -> Vec<HarmonicEntry> {
    let mut zoo = Vec::new();
    for (k, part) in [(1, Part::Re), (3, Part::Im), (6, Part::Re), (10, Part::Im)] {
        zoo.push(entry(
            &format!("poly_n2_k{k}_{part:?}").to_lowercase(),
            make_harmonic_poly(2, k, part).expect("valid degree"),
            vec![0.0, 0.0],
        ));
    }
    for k in [2, 5, 8] {
        zoo.push(entry(
            &format!("poly_n3_k{k}"),
            make_harmonic_poly(3, k, Part::Re).expect("valid degree"),
            vec![0.0; 3],
        ));
    }
    zoo.push(entry("poly_n2_k4_offcenter", make_harmonic_poly(2, 4, Part::Re).unwrap(), vec![0.3, -0.2]));
    zoo.push(entry("constant_n2", Field::Constant { dim: 2, value: 1.5 }, vec![0.1, 0.2]));
    zoo.push(entry(
        "affine_n3",
        Field::Affine { coeffs: vec![1.0, -2.0, 0.5], offset: 0.25 },
        vec![0.0; 3],
    ));
    zoo.push(entry(
        "saddle_n3",
        Field::Quadric { diag: vec![1.0, 1.0, -2.0], offset: 0.0 },
        vec![0.0; 3],
    ));
    zoo.push(entry("sinh_k3", Field::SinhMode { k: 3.0 }, vec![0.5, 0.5]));
    zoo.push(entry(
        "lift_sin_torus_m1",
        lift_eigenfunction(&sin_torus(2, 1).unwrap()).unwrap(),
        vec![0.4, 0.3, 0.1],
    ));
    zoo.push(entry(
        "lift_torus_m12_nodal",
        lift_eigenfunction(&make_torus_eigen(vec![1, 2], vec![Trig::Sin, Trig::Cos]).unwrap()).unwrap(),
        vec![std::f64::consts::PI, 1.0, 0.0],
    ));
    zoo
}

/// A field and a cube for zero-set measurements.
#[derive(Clone, Debug)]
pub struct NodalEntry {
    pub name: String,
    pub field: Field<f64>,
    pub cube: Cube<f64>,
    pub exact: Option<f64>,
}

pub fn nodal_zoo() -> Vec<NodalEntry> {
    let sq = Cube::from_bounds(-1.0, 1.0, 2).unwrap();
    let cb = Cube::from_bounds(-1.0, 1.0, 3).unwrap();
    let torus2 = Cube::from_bounds(0.0, TAU, 2).unwrap();
    let torus3 = Cube::from_bounds(0.0, TAU, 3).unwrap();
    let pi = std::f64::consts::PI;
    let nodal = |f: &Field<f64>| f.metadata().nodal_per_period;
    let t2 = make_torus_eigen(vec![2, 3], vec![Trig::Sin, Trig::Cos]).unwrap();
    let t3 = sin_torus(3, 1).unwrap();
    vec![
        NodalEntry {
            name: "circle_r05".into(),
            field: Field::Quadric { diag: vec![1.0, 1.0], offset: -0.25 },
            cube: sq.clone(),
            exact: Some(pi),
        },
        NodalEntry {
            name: "sphere_r05".into(),
            field: Field::Quadric { diag: vec![1.0, 1.0, 1.0], offset: -0.25 },
            cube: cb.clone(),
            exact: Some(pi),
        },
        NodalEntry {
            name: "plane_x1_n3".into(),
            field: Field::Affine { coeffs: vec![1.0, 0.0, 0.0], offset: 0.0 },
            cube: cb.clone(),
            exact: Some(4.0),
        },
        NodalEntry {
            name: "poly_n2_k3".into(),
            field: make_harmonic_poly(2, 3, Part::Re).unwrap(),
            cube: sq.clone(),
            exact: None,
        },
        NodalEntry {
            name: "poly_n3_k2".into(),
            field: make_harmonic_poly(3, 2, Part::Im).unwrap(),
            cube: cb,
            exact: Some(8.0),
        },
        NodalEntry {
            name: "torus_n2_m23_sc".into(),
            exact: nodal(&t2),
            field: t2,
            cube: torus2,
        },
        NodalEntry {
            name: "torus_n3_m111".into(),
            exact: nodal(&t3),
            field: t3,
            cube: torus3,
        },
    ]
}
