use nodal_core::geom::{
    farthest_min_distance, point_set_width, regular_simplex_relative_width, simplex_metrics, Cube, Simplex,
    SphereSearchConfig,
};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subdivision_tiles_the_cube(
        n in 2usize..=3,
        a in 1usize..=5,
        half in 0.01f64..10.0,
        c in point(3),
    ) {
        let q = Cube::new(c[..n].to_vec(), half).unwrap();
        let kids = q.subdivide(a).unwrap();
        prop_assert_eq!(kids.len(), a.pow(n as u32));
        let total: f64 = kids.iter().map(Cube::volume).sum();
        prop_assert!((total - q.volume()).abs() <= 1e-12 * q.volume());
        for (i, k) in kids.iter().enumerate() {
            prop_assert_eq!(q.locate_child(a, k.center()), Some(i));
            prop_assert!(q.contains(k.center()));
        }
    }

    #[test]
    fn width_never_drops_when_a_vertex_is_added(
        pts in prop::collection::vec(point(2), 3..6),
        extra in point(2),
    ) {
        let cfg = SphereSearchConfig::default();
        let before = point_set_width(&pts, &cfg);
        let mut more = pts.clone();
        more.push(extra);
        let after = point_set_width(&more, &cfg);
        prop_assert!(after >= before - 1e-9 * (1.0 + before), "{} -> {}", before, after);
    }

    #[test]
    fn width_never_drops_in_three_dimensions(
        pts in prop::collection::vec(point(3), 4..6),
        extra in point(3),
    ) {
        let cfg = SphereSearchConfig { directions: 1024, refine_top: 4 };
        let before = point_set_width(&pts, &cfg);
        let mut more = pts.clone();
        more.push(extra);
        let after = point_set_width(&more, &cfg);
        prop_assert!(after >= before - 1e-6 * (1.0 + before), "{} -> {}", before, after);
    }

    #[test]
    fn farthest_min_distance_is_bounded(
        n in 2usize..=3,
        centers in prop::collection::vec(point(3), 1..6),
        x0 in point(3),
        radius in 0.05f64..3.0,
    ) {
        let centers: Vec<Vec<f64>> = centers.into_iter().map(|c| c[..n].to_vec()).collect();
        let x0 = &x0[..n];
        let cfg = SphereSearchConfig { directions: 512, refine_top: 4 };
        let r = farthest_min_distance(&centers, x0, radius, &cfg).unwrap();
        let reach = centers.iter().map(|c| dist(c, x0)).fold(0.0, f64::max);
        prop_assert!(r.value <= radius + reach + 1e-12);
        prop_assert!((dist(&r.witness, x0) - radius).abs() <= 1e-9 * (1.0 + radius));
        let direct = centers.iter().map(|c| dist(c, &r.witness)).fold(f64::INFINITY, f64::min);
        prop_assert!((direct - r.value).abs() <= 1e-12 * (1.0 + direct));
    }
}

#[test]
fn regular_simplices_hit_the_width_ratio() {
    for n in 2..=4 {
        let s = Simplex::<f64>::regular(n).unwrap();
        let m = simplex_metrics(&s);
        let want = regular_simplex_relative_width(n);
        assert!((m.relative_width - want).abs() < 1e-4, "n={n}: {} vs {want}", m.relative_width);
    }
}

#[test]
fn equilateral_triangle_width_is_its_height() {
    let s = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
    let m = simplex_metrics(&s);
    assert!((m.width - 3f64.sqrt() / 2.0).abs() < 1e-9);
    assert!((m.diam - 1.0).abs() < 1e-15);
}
