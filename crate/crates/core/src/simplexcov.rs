//! Covering of an enlarged barycentric ball by the vertex balls of a simplex,
//! and the enlargement `δ(t)` of vertex balls about the barycenter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{
    farthest_min_distance, regular_simplex_relative_width, simplex_metrics, Simplex, SphereSearchConfig,
};
use crate::scalar::{dist, Real};

/// Fractions of `ρ(1+c₁)` re-checked inside the critical sphere.
const INTERIOR_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringCheck<T> {
    pub holds: bool,
    pub rho: T,
    /// `ρ - max_{|y-x₀| = ρ(1+c₁)} min_i |y - x_i|`.
    pub margin: T,
    /// The same margin at the interior radii.
    pub interior_margins: Vec<T>,
    pub witness: Vec<T>,
}

/// `B(x₀, ρ(1+c₁)) ⊂ ∪ B(x_i, ρ)` with `ρ = K diam S`.
pub fn covering_check<T: Real>(s: &Simplex<T>, k: T, c1: T) -> Result<CoveringCheck<T>> {
    covering_check_with(s, k, c1, &SphereSearchConfig::default())
}

pub fn covering_check_with<T: Real>(s: &Simplex<T>, k: T, c1: T, cfg: &SphereSearchConfig) -> Result<CoveringCheck<T>> {
    if crate::geom::affine_rank(s.vertices()) < s.dim() {
        return Err(Error::DegenerateInput("covering check needs a nondegenerate simplex".into()));
    }
    if !(k > T::zero()) || c1 < T::zero() {
        return invalid(format!("need K > 0 and c1 >= 0, got K={k}, c1={c1}"));
    }
    let rho = k * s.diam();
    let x0 = s.barycenter();
    let outer = rho * (T::one() + c1);
    let top = farthest_min_distance(s.vertices(), &x0, outer, cfg)?;
    let margin = rho - top.value;
    let interior_margins = INTERIOR_FRACTIONS
        .iter()
        .map(|&f| Ok(rho - farthest_min_distance(s.vertices(), &x0, outer * T::lit(f), cfg)?.value))
        .collect::<Result<Vec<T>>>()?;
    let holds = margin >= T::zero() && interior_margins.iter().all(|&m| m >= T::zero());
    Ok(CoveringCheck {
        holds,
        rho,
        margin,
        interior_margins,
        witness: top.witness,
    })
}

/// Largest `c₁` passing [`covering_check`] at scale `K`, by bisection to `tol`.
/// Zero if even `c₁ = 0` fails.
pub fn max_enlargement<T: Real>(s: &Simplex<T>, k: T, tol: T, cfg: &SphereSearchConfig) -> Result<T> {
    if !covering_check_with(s, k, T::zero(), cfg)?.holds {
        return Ok(T::zero());
    }
    // A point of the outer sphere opposite every vertex lies beyond all vertex balls
    // once ρ(1+c₁) exceeds ρ + max |x_i - x₀|.
    let x0 = s.barycenter();
    let reach = s.vertices().iter().map(|v| dist(v, &x0)).fold(T::zero(), T::max);
    let (mut lo, mut hi) = (T::zero(), reach / (k * s.diam()) + tol);
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if covering_check_with(s, k, mid, cfg)?.holds {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringConstants<T> {
    pub a: T,
    pub n: usize,
    /// Chosen scale multiplier, at least `2/a`.
    pub k: T,
    pub c1: T,
    /// Minimum margin over the sampled shapes at the chosen `(K, c₁)`.
    pub certified_margin: T,
    /// `(K, worst-shape c₁)` over the tested grid.
    pub table: Vec<(T, T)>,
    pub shapes: usize,
    pub seed: u64,
}

/// Multipliers of `2/a` tried for `K`.
pub const K_GRID: [f64; 6] = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0];
const BISECTION_TOL: f64 = 1e-7;

fn random_simplex(rng: &mut ChaCha8Rng, regular: &Simplex<f64>, index: usize) -> Simplex<f64> {
    // Alternate between perturbed regular simplices and Gaussian ones so that
    // floors near the regular width still get accepted samples.
    let noise = Uniform::new(0.0, 0.5).expect("valid range");
    let sigma = if index.is_multiple_of(2) { noise.sample(rng) } else { f64::INFINITY };
    let vertices = regular
        .vertices()
        .iter()
        .map(|v| {
            v.iter()
                .map(|&x| {
                    let g: f64 = StandardNormal.sample(rng);
                    if sigma.is_finite() {
                        x + sigma * g
                    } else {
                        g
                    }
                })
                .collect()
        })
        .collect();
    Simplex::new(vertices).expect("n + 1 vertices")
}

/// Regular simplex plus `shape_samples` rejection-sampled simplices with `w(S) ≥ a`.
pub fn covering_shapes(a: f64, n: usize, shape_samples: usize, seed: u64) -> Result<Vec<Simplex<f64>>> {
    let regular = Simplex::<f64>::regular(n)?;
    let mut shapes = vec![regular.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 2000 * shape_samples.max(1);
    let mut tried = 0;
    while shapes.len() < shape_samples + 1 {
        if tried >= budget {
            return Err(Error::DegenerateInput(format!(
                "only {} of {shape_samples} simplices with relative width >= {a} found",
                shapes.len() - 1
            )));
        }
        let s = random_simplex(&mut rng, &regular, tried);
        tried += 1;
        if simplex_metrics(&s).relative_width >= a {
            shapes.push(s);
        }
    }
    Ok(shapes)
}

pub fn covering_constants(a: f64, n: usize, shape_samples: usize, seed: u64) -> Result<CoveringConstants<f64>> {
    if n < 2 {
        return invalid(format!("dimension must be at least 2, got {n}"));
    }
    let w_max = regular_simplex_relative_width(n);
    if !(a > 0.0) || a > w_max + 1e-12 {
        return invalid(format!("a must lie in (0, {w_max}] for n = {n}, got {a}"));
    }
    let shapes = covering_shapes(a, n, shape_samples, seed)?;
    let cfg = SphereSearchConfig::default();
    let mut table = Vec::with_capacity(K_GRID.len());
    for &m in &K_GRID {
        let k = 2.0 / a * m;
        let worst = shapes
            .par_iter()
            .map(|s| max_enlargement(s, k, BISECTION_TOL, &cfg))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        table.push((k, worst));
    }
    let &(k, c1) = table
        .iter()
        .fold(&table[0], |best, t| if t.1 > best.1 { t } else { best });
    let certified_margin = shapes
        .iter()
        .map(|s| covering_check_with(s, k, c1, &cfg).map(|c| c.margin))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(CoveringConstants {
        a,
        n,
        k,
        c1,
        certified_margin,
        table,
        shapes: shapes.len(),
        seed,
    })
}

/// `δ = |x_i - x₀| / (ρ t)`, the least `δ` with `B(x_i, ρt) ⊂ B(x₀, ρt(1+δ))`.
pub fn delta_of_t<T: Real>(s: &Simplex<T>, i: usize, rho: T, t: T) -> Result<T> {
    if !(rho > T::zero() && t > T::zero()) {
        return invalid(format!("need rho > 0 and t > 0, got rho={rho}, t={t}"));
    }
    let v = s
        .vertices()
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("vertex index {i} out of range")))?;
    Ok(dist(v, &s.barycenter()) / (rho * t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> Simplex<f64> {
        Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap()
    }

    /// Root of `4s² - (2h/d)s + (h/d)² - 4 = 0` with `h = d/√3`, minus one.
    fn equilateral_oracle() -> f64 {
        let hd = 1.0 / 3f64.sqrt();
        let (a, b, c) = (4.0, -2.0 * hd, hd * hd - 4.0);
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a) - 1.0
    }

    #[test]
    fn equilateral_covering() {
        let s = equilateral();
        assert!(covering_check(&s, 2.0, 0.1).unwrap().holds);
        assert!(!covering_check(&s, 2.0, 10.0).unwrap().holds);
        let c1 = max_enlargement(&s, 2.0, 1e-8, &SphereSearchConfig::default()).unwrap();
        assert!((c1 - equilateral_oracle()).abs() < 1e-4, "{c1} vs {}", equilateral_oracle());
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let s = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(covering_check(&s, 2.0, 0.1).is_err());
    }

    #[test]
    fn constants_for_regular_width() {
        let a = regular_simplex_relative_width(2);
        let cc = covering_constants(a, 2, 0, 1).unwrap();
        assert!(cc.k >= 2.0 / a - 1e-12);
        assert!(cc.c1 > 0.0 && cc.certified_margin >= 0.0);
        assert!(covering_constants(0.9, 2, 4, 1).is_err());
    }

    #[test]
    fn thin_floor_needs_larger_k() {
        let thin = covering_constants(0.01, 2, 3, 5).unwrap();
        let wide = covering_constants(0.5, 2, 3, 5).unwrap();
        assert!(thin.c1 < wide.c1 && thin.k > wide.k);
    }

    #[test]
    fn delta_closed_forms() {
        let s = Simplex::<f64>::regular(2).unwrap();
        let r = dist(&s.vertices()[0], &s.barycenter());
        assert!((delta_of_t(&s, 0, r, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let d1 = delta_of_t(&s, 1, 0.3, 1.5).unwrap();
        let d2 = delta_of_t(&s, 1, 0.3, 3.0).unwrap();
        assert!((d1 - 2.0 * d2).abs() < 1e-15);
        let point = Simplex::new(vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(delta_of_t(&point, 0, 1.0, 1.0).unwrap(), 0.0);
    }
}
