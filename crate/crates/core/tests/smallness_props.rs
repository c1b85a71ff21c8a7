use nodal_core::fields::Field;
use nodal_core::geom::Cube;
use nodal_core::growth::SupConfig;
use nodal_core::smallness::{smallness_bound_check, smallness_experiment, Face, Family};

fn unit_square() -> Cube<f64> {
    Cube::new(vec![0.5, 0.5], 0.5).unwrap()
}

const BOTTOM: Face = Face { axis: 1, upper: false };

fn sinh_members() -> Vec<(f64, Field<f64>)> {
    Family::Sinh { k_values: (4..=16).map(f64::from).collect() }.members().unwrap()
}

#[test]
fn interior_size_falls_with_cauchy_data() {
    let rep = smallness_experiment(&sinh_members(), &unit_square(), BOTTOM, "sinh", &SupConfig::coarse()).unwrap();
    assert!(rep.samples.windows(2).all(|w| w[0].epsilon >= w[1].epsilon));
    assert!(
        rep.samples.windows(2).all(|w| w[1].sup_half <= w[0].sup_half * (1.0 + 1e-9)),
        "{:?}",
        rep.samples
    );
    assert!(rep.fitted_alpha > 0.0 && rep.fitted_alpha < 1.0);
    let check = smallness_bound_check(&rep, rep.envelope_c, rep.fitted_alpha).unwrap();
    assert!(check.holds, "{:?}", check.slack);
}

#[test]
fn normalization_removes_amplitude() {
    let cfg = SupConfig::coarse();
    let plain = smallness_experiment(&sinh_members(), &unit_square(), BOTTOM, "sinh", &cfg).unwrap();
    for factor in [1e-3, 7.0, -250.0] {
        let scaled: Vec<(f64, Field<f64>)> = sinh_members()
            .into_iter()
            .map(|(p, u)| (p, Field::Scaled { factor, inner: Box::new(u) }))
            .collect();
        let rep = smallness_experiment(&scaled, &unit_square(), BOTTOM, "sinh", &cfg).unwrap();
        assert!((rep.fitted_alpha - plain.fitted_alpha).abs() < 1e-9, "{factor}");
        for (a, b) in rep.samples.iter().zip(&plain.samples) {
            assert!((a.epsilon - b.epsilon).abs() <= 1e-9 * b.epsilon);
            assert!((a.sup_half - b.sup_half).abs() <= 1e-9 * b.sup_half);
        }
    }
}

#[test]
fn too_few_members_are_rejected() {
    let members = Family::Sinh { k_values: vec![1.0, 2.0, 3.0] }.members().unwrap();
    assert!(smallness_experiment(&members, &unit_square(), BOTTOM, "sinh", &SupConfig::coarse()).is_err());
}
