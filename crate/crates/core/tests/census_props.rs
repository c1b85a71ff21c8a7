use nodal_core::census::{
    extract_wide_simplex, recursion_exponent, simulate_bad_cube_tree, subcube_census, CensusConfig, SpawnPolicy,
};
use nodal_core::fields::{make_harmonic_poly, Part};
use nodal_core::geom::Cube;
use nodal_core::growth::{CubeGrid, SupConfig};
use proptest::prelude::*;

fn light_census() -> CensusConfig {
    CensusConfig {
        grid: CubeGrid { centers_per_axis: 3, radii_count: 3, min_radius_fraction: 1.0 / 8.0 },
        sup: SupConfig::coarse(),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Exact width of a triangle: twice the area over the longest side.
fn triangle_width(p: &[f64], q: &[f64], r: &[f64]) -> f64 {
    let area2 = ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])).abs();
    let longest = dist(p, q).max(dist(q, r)).max(dist(p, r));
    area2 / longest
}

#[test]
fn exponent_moves_the_right_way() {
    let cs = [0.25, 0.5, 1.0, 2.0, 3.0];
    for a in [2u64, 3, 9, 27] {
        let alphas: Vec<f64> = cs
            .iter()
            .filter(|&&c| c < 4.0 * a as f64 - 1.0)
            .map(|&c| recursion_exponent(a, c).unwrap().alpha)
            .collect();
        assert!(alphas.windows(2).all(|w| w[1] < w[0]), "A={a}: {alphas:?}");
    }
    for c in cs {
        let alphas: Vec<f64> = [2u64, 3, 9, 27].iter().map(|&a| recursion_exponent(a, c).unwrap().alpha).collect();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]), "c={c}: {alphas:?}");
    }
    let m = recursion_exponent(8, 3.0).unwrap();
    assert_eq!(m.alpha_exact, Some((5, 2)));
    assert!(m.all_levels_hold() && m.majorant_monotone());
}

#[test]
fn tree_bounds_hold_for_many_seeds() {
    for seed in 0..120u64 {
        let a0 = 1 + seed % 4;
        let n = 2 + (seed % 2) as usize;
        let t = simulate_bad_cube_tree(a0, n, 12, (seed % 3) as u32, seed, SpawnPolicy::Uniform).unwrap();
        assert!(t.holds, "seed {seed}: {:?}", t.levels.last());
    }
    for policy in [SpawnPolicy::Zero, SpawnPolicy::Max] {
        assert!(simulate_bad_cube_tree(2, 2, 20, 0, 0, policy).unwrap().holds);
    }
}

#[test]
fn central_neighbours_are_genuinely_bad_at_a_nine() {
    // Sup of |Re z^k| on a disk sits on its boundary circle; sample it densely.
    let k = 6;
    let sup_on_disk = |cx: f64, cy: f64, r: f64| {
        (0..200_000)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 200_000.0;
                let (x, y) = (cx + r * t.cos(), cy + r * t.sin());
                let (m, a) = ((x * x + y * y).sqrt(), y.atan2(x));
                (m.powi(k) * (k as f64 * a).cos()).abs()
            })
            .fold(0.0, f64::max)
    };
    let side = 2.0 / 9.0;
    let (x, y) = (-side / 2.0, -side / 2.0);
    let r = side * 2f64.sqrt();
    let n = (sup_on_disk(x, y, 2.0 * r) / sup_on_disk(x, y, r)).log2();
    // The threshold is N(Q)/(1+c) = 6/1.5.
    assert!(n > 4.0 + 0.3, "{n}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn census_is_monotone_on_shared_lattices(
        k in 1u32..=8,
        a in 2usize..=4,
        cx in -0.5f64..0.5,
        cy in -0.5f64..0.5,
    ) {
        let u = make_harmonic_poly(2, k, Part::Re).unwrap();
        let q = Cube::new(vec![cx, cy], 1.0).unwrap();
        let rep = subcube_census(&u, &q, a, 0.5, 1.0, &light_census()).unwrap();
        prop_assert_eq!(rep.monotonicity_violations, 0);
        prop_assert_eq!(rep.bad_count, rep.subcubes.iter().filter(|s| s.bad).count());
        prop_assert!(rep.subcubes.iter().all(|s| s.index <= rep.parent_index));
        prop_assert_eq!(rep.witnesses.len(), rep.bad_count);
    }

    #[test]
    fn greedy_simplex_is_feasible_and_starts_at_the_diameter(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 3..8),
    ) {
        let q = Cube::new(vec![0.0, 0.0], 1.0).unwrap();
        let w = extract_wide_simplex(&pts, &q).unwrap();
        let diam = (0..pts.len())
            .flat_map(|i| (i + 1..pts.len()).map(move |j| (i, j)))
            .map(|(i, j)| dist(&pts[i], &pts[j]))
            .fold(0.0, f64::max);
        prop_assert!((dist(&pts[w.vertices[0]], &pts[w.vertices[1]]) - diam).abs() <= 1e-15);
        if !w.degenerate {
            let mut best = 0.0f64;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    for l in j + 1..pts.len() {
                        let (p, r, s) = (&pts[i], &pts[j], &pts[l]);
                        let d = dist(p, r).max(dist(r, s)).max(dist(p, s));
                        if d > 0.0 {
                            let a = (triangle_width(p, r, s) / d).min(d / q.diam());
                            best = best.max(a);
                        }
                    }
                }
            }
            prop_assert!(w.achieved_a <= best + 1e-6, "{} > {}", w.achieved_a, best);
        }
    }
}
