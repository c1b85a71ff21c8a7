//! Euclidean primitives: axis-aligned cubes and boxes, balls, simplices,
//! subdivision, widths and the sphere max–min distance search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::NelderMead;
use crate::scalar::{dist, dot, norm, Real};

/// Closed axis-aligned cube `center ± half_side` in every coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube<T> {
    center: Vec<T>,
    half_side: T,
}

impl<T: Real> Cube<T> {
    pub fn new(center: Vec<T>, half_side: T) -> Result<Self> {
        if center.len() < 2 {
            return invalid(format!("cube dimension must be at least 2, got {}", center.len()));
        }
        if !(half_side > T::zero()) || !half_side.is_finite() {
            return invalid(format!("cube half_side must be positive, got {half_side}"));
        }
        Ok(Self { center, half_side })
    }

    /// The cube `[lo, hi]^n`.
    pub fn from_bounds(lo: T, hi: T, n: usize) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(vec![(lo + hi) / two; n], (hi - lo) / two)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn half_side(&self) -> T {
        self.half_side
    }

    pub fn side(&self) -> T {
        self.half_side * T::lit(2.0)
    }

    pub fn diam(&self) -> T {
        self.side() * T::from_usize_lossy(self.dim()).sqrt()
    }

    pub fn lower(&self, axis: usize) -> T {
        self.center[axis] - self.half_side
    }

    pub fn upper(&self, axis: usize) -> T {
        self.center[axis] + self.half_side
    }

    pub fn volume(&self) -> T {
        self.side().powi(self.dim() as i32)
    }

    /// Homothety about the center (the `ρQ` of the text).
    pub fn scaled(&self, rho: T) -> Self {
        Self {
            center: self.center.clone(),
            half_side: self.half_side * rho,
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(&xi, &ci)| (xi - ci).abs() <= self.half_side)
    }

    /// Partition into `a^n` equal children, listed with the last axis varying fastest.
    pub fn subdivide(&self, a: usize) -> Result<Vec<Self>> {
        if a == 0 {
            return invalid("subdivision factor must be at least 1");
        }
        if a == 1 {
            return Ok(vec![self.clone()]);
        }
        let n = self.dim();
        let count = a
            .checked_pow(n as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("{a}^{n} subcubes overflow")))?;
        let child_half = self.half_side / T::from_usize_lossy(a);
        let child_side = child_half * T::lit(2.0);
        let mut out = Vec::with_capacity(count);
        for flat in 0..count {
            let idx = unflatten(flat, a, n);
            let center = (0..n)
                .map(|k| {
                    self.lower(k) + child_side * T::from_usize_lossy(idx[k]) + child_half
                })
                .collect();
            out.push(Self {
                center,
                half_side: child_half,
            });
        }
        Ok(out)
    }

    /// Index of the child (of an `a`-fold subdivision) owning `x`.
    ///
    /// Children are half-open `[lo, hi)` on every axis except on the parent's
    /// upper faces, which belong to the last child along that axis.
    pub fn locate_child(&self, a: usize, x: &[T]) -> Option<usize> {
        if a == 0 || !self.contains(x) {
            return None;
        }
        let side = self.side();
        let mut flat = 0;
        for (k, &xk) in x.iter().enumerate() {
            let t = (xk - self.lower(k)) / side * T::from_usize_lossy(a);
            let mut i = t.floor().to_usize().unwrap_or(0);
            if i >= a {
                i = a - 1;
            }
            flat = flat * a + i;
        }
        Some(flat)
    }

    /// Axis-aligned face of the cube as a degenerate box.
    pub fn face(&self, axis: usize, upper: bool) -> AxisBox<T> {
        let mut b = AxisBox::from(self);
        let v = if upper { self.upper(axis) } else { self.lower(axis) };
        b.lo[axis] = v;
        b.hi[axis] = v;
        b
    }
}

pub(crate) fn unflatten(mut flat: usize, a: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0; n];
    for k in (0..n).rev() {
        idx[k] = flat % a;
        flat /= a;
    }
    idx
}

/// Axis-aligned box with possibly coinciding bounds (faces, edges).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> From<&Cube<T>> for AxisBox<T> {
    fn from(c: &Cube<T>) -> Self {
        let n = c.dim();
        Self {
            lo: (0..n).map(|k| c.lower(k)).collect(),
            hi: (0..n).map(|k| c.upper(k)).collect(),
        }
    }
}

/// Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    center: Vec<T>,
    radius: T,
}

impl<T: Real> Ball<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        if center.is_empty() {
            return invalid("ball center must be nonempty");
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `rB`: same center, radius multiplied by `r`.
    pub fn scaled(&self, r: T) -> Self {
        Self {
            center: self.center.clone(),
            radius: self.radius * r,
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        dist(x, &self.center) <= self.radius
    }
}

/// A region over which suprema are taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region<T> {
    Ball(Ball<T>),
    Box(AxisBox<T>),
}

impl<T: Real> Region<T> {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball(b) => b.dim(),
            Region::Box(b) => b.lo.len(),
        }
    }

    /// Nearest point of the region (Euclidean projection).
    pub fn project(&self, x: &mut [T]) {
        match self {
            Region::Ball(b) => {
                let d = dist(x, &b.center);
                if d > b.radius {
                    let s = b.radius / d;
                    for (xi, &ci) in x.iter_mut().zip(&b.center) {
                        *xi = ci + (*xi - ci) * s;
                    }
                }
            }
            Region::Box(b) => {
                for ((xi, &lo), &hi) in x.iter_mut().zip(&b.lo).zip(&b.hi) {
                    *xi = xi.max(lo).min(hi);
                }
            }
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            Region::Ball(b) => dist(x, &b.center) <= b.radius * (T::one() + T::lit(1e-12)),
            Region::Box(b) => x
                .iter()
                .zip(&b.lo)
                .zip(&b.hi)
                .all(|((&xi, &lo), &hi)| xi >= lo && xi <= hi),
        }
    }

    /// Length scale of the region (diameter).
    pub fn extent(&self) -> T {
        match self {
            Region::Ball(b) => b.radius * T::lit(2.0),
            Region::Box(b) => dist(&b.lo, &b.hi),
        }
    }
}

impl<T: Real> From<Ball<T>> for Region<T> {
    fn from(b: Ball<T>) -> Self {
        Region::Ball(b)
    }
}

impl<T: Real> From<&Cube<T>> for Region<T> {
    fn from(c: &Cube<T>) -> Self {
        Region::Box(AxisBox::from(c))
    }
}

impl<T: Real> From<Cube<T>> for Region<T> {
    fn from(c: Cube<T>) -> Self {
        Region::Box(AxisBox::from(&c))
    }
}

/// Simplex given by its vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simplex<T> {
    vertices: Vec<Vec<T>>,
}

impl<T: Real> Simplex<T> {
    /// Requires `n + 1` vertices in `R^n`.
    pub fn new(vertices: Vec<Vec<T>>) -> Result<Self> {
        let n = vertices.first().map(Vec::len).unwrap_or(0);
        if n == 0 {
            return invalid("simplex needs vertices");
        }
        if vertices.iter().any(|v| v.len() != n) {
            return invalid("simplex vertices must share one dimension");
        }
        if vertices.len() != n + 1 {
            return invalid(format!(
                "simplex in R^{n} needs {} vertices, got {}",
                n + 1,
                vertices.len()
            ));
        }
        Ok(Self { vertices })
    }

    /// Regular simplex with unit edge, barycenter at the origin.
    pub fn regular(n: usize) -> Result<Self> {
        if n < 1 {
            return invalid("dimension must be positive");
        }
        // Standard basis of R^{n+1} lies on the hyperplane sum = 1, edge sqrt(2);
        // express it in an orthonormal basis of that hyperplane.
        let m = n + 1;
        let pts: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let bary = 1.0 / m as f64;
        let centered: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().map(|&v| v - bary).collect())
            .collect();
        let basis = orthonormal_basis(&centered[1..].iter().map(|p| {
            p.iter().zip(&centered[0]).map(|(a, b)| a - b).collect::<Vec<f64>>()
        }).collect::<Vec<_>>(), 1e-12);
        debug_assert_eq!(basis.len(), n);
        let scale = 1.0 / 2f64.sqrt();
        let vertices = centered
            .iter()
            .map(|p| basis.iter().map(|b| T::lit(dot(p, b) * scale)).collect())
            .collect();
        Self::new(vertices)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<T>] {
        &self.vertices
    }

    pub fn barycenter(&self) -> Vec<T> {
        centroid(&self.vertices)
    }

    pub fn diam(&self) -> T {
        diameter(&self.vertices)
    }
}

pub(crate) fn centroid<T: Real>(points: &[Vec<T>]) -> Vec<T> {
    let n = points[0].len();
    let inv = T::one() / T::from_usize_lossy(points.len());
    (0..n)
        .map(|k| points.iter().map(|p| p[k]).sum::<T>() * inv)
        .collect()
}

pub(crate) fn diameter<T: Real>(points: &[Vec<T>]) -> T {
    let mut d = T::zero();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max(dist(&points[i], &points[j]));
        }
    }
    d
}

/// Gram–Schmidt on `vectors`, dropping those whose residual is below `tol` times their norm.
pub(crate) fn orthonormal_basis<T: Real>(vectors: &[Vec<T>], tol: f64) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let scale = norm(v);
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                for (ri, &bi) in r.iter_mut().zip(b) {
                    *ri -= c * bi;
                }
            }
        }
        let rn = norm(&r);
        if rn > T::lit(tol) * scale && rn > T::zero() {
            r.iter_mut().for_each(|x| *x /= rn);
            basis.push(r);
        }
    }
    basis
}

/// Dimension of the affine hull of `points`, with tolerance relative to their diameter.
pub fn affine_rank<T: Real>(points: &[Vec<T>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let diffs: Vec<Vec<T>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(&a, &b)| a - b).collect())
        .collect();
    let d = diameter(points);
    if d == T::zero() {
        return 0;
    }
    // Residual relative to each vector; collinear-within-rounding sets collapse.
    orthonormal_basis(&diffs, 1e-9).len()
}

/// Knobs for the direction searches (width, max–min distance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereSearchConfig {
    /// Number of sampled directions.
    pub directions: usize,
    /// Best samples refined by local search.
    pub refine_top: usize,
}

impl Default for SphereSearchConfig {
    fn default() -> Self {
        Self {
            directions: 4096,
            refine_top: 8,
        }
    }
}

/// Deterministic, roughly uniform directions on `S^{n-1}`.
///
/// Equally spaced angles for `n = 2`, a Fibonacci lattice for `n = 3`,
/// seeded Gaussian samples otherwise. With `half = true` only one of each
/// antipodal pair is produced in the planar case.
pub fn sphere_directions<T: Real>(n: usize, count: usize, half: bool) -> Vec<Vec<T>> {
    let count = count.max(1);
    match n {
        1 => vec![vec![T::one()], vec![-T::one()]],
        2 => {
            let span = if half { std::f64::consts::PI } else { std::f64::consts::TAU };
            (0..count)
                .map(|i| {
                    let th = span * i as f64 / count as f64;
                    vec![T::lit(th.cos()), T::lit(th.sin())]
                })
                .collect()
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let th = golden * i as f64;
                    vec![T::lit(r * th.cos()), T::lit(r * th.sin()), T::lit(z)]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1ec_7105 ^ n as u64);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let s = norm(&v);
                    v.iter().map(|&x| T::lit(x / s)).collect()
                })
                .collect()
        }
    }
}

/// Area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    // |S^{n-1}| = 2 π^{n/2} / Γ(n/2), via the recursion |S^{n+1}| = 2π |S^{n-1}| / n.
    let (mut area, mut k) = if n.is_multiple_of(2) { (2.0 * std::f64::consts::PI, 2) } else { (2.0, 1) };
    while k < n {
        area *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    area
}

fn normalize<T: Real>(d: &[T]) -> Vec<T> {
    let s = norm(d);
    if s == T::zero() {
        return d.to_vec();
    }
    d.iter().map(|&x| x / s).collect()
}

fn directional_extent<T: Real>(points: &[Vec<T>], d: &[T]) -> T {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for p in points {
        let v = dot(p, d);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Width of a point set: minimum over unit directions of its directional extent.
///
/// Returns exactly zero when the points do not span `R^n`.
pub fn point_set_width<T: Real>(points: &[Vec<T>], cfg: &SphereSearchConfig) -> T {
    let n = points.first().map(Vec::len).unwrap_or(0);
    if n == 0 || affine_rank(points) < n {
        return T::zero();
    }
    let dirs = sphere_directions::<T>(n, cfg.directions.max(8), true);
    let mut scored: Vec<(T, usize)> = dirs
        .iter()
        .enumerate()
        .map(|(i, d)| (directional_extent(points, d), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let spacing = T::lit((sphere_area(n) / cfg.directions.max(8) as f64).powf(1.0 / (n - 1) as f64));
    let nm = NelderMead::default();
    let mut best = scored[0].0;
    for &(_, i) in scored.iter().take(cfg.refine_top.max(1)) {
        let f = |d: &[T]| directional_extent(points, &normalize(d));
        let (x, v) = nm.minimize(f, &dirs[i], spacing);
        // polish from the refined point with a smaller simplex
        let (_, v2) = nm.minimize(f, &x, spacing * T::lit(1e-3));
        best = best.min(v).min(v2);
    }
    best
}

/// Diameter, width, relative width and barycenter of a simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexMetrics<T> {
    pub diam: T,
    pub width: T,
    pub relative_width: T,
    pub barycenter: Vec<T>,
}

pub fn simplex_metrics<T: Real>(s: &Simplex<T>) -> SimplexMetrics<T> {
    simplex_metrics_with(s, &SphereSearchConfig::default())
}

pub fn simplex_metrics_with<T: Real>(s: &Simplex<T>, cfg: &SphereSearchConfig) -> SimplexMetrics<T> {
    let diam = s.diam();
    let width = point_set_width(s.vertices(), cfg);
    let relative_width = if diam > T::zero() { (width / diam).min(T::one()) } else { T::zero() };
    SimplexMetrics {
        diam,
        width,
        relative_width,
        barycenter: s.barycenter(),
    }
}

/// Width ratio of the regular `n`-simplex, the largest relative width attainable.
pub fn regular_simplex_relative_width(n: usize) -> f64 {
    let n = n as f64;
    if (n as usize) % 2 == 1 {
        (2.0 / (n + 1.0)).sqrt()
    } else {
        (2.0 * (n + 1.0)).sqrt() / (n * (n + 2.0)).sqrt()
    }
}

/// Result of the sphere max–min distance search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarthestMinDistance<T> {
    pub value: T,
    pub witness: Vec<T>,
    /// Heuristic bound on how much the sampled maximum may underestimate the true one.
    pub gap_bound: T,
}

fn min_distance<T: Real>(centers: &[Vec<T>], y: &[T]) -> T {
    centers
        .iter()
        .map(|c| dist(c, y))
        .fold(T::infinity(), T::min)
}

/// `max_{|y - x0| = R} min_i |y - centers_i|`, by sphere sampling plus local ascent.
pub fn farthest_min_distance<T: Real>(
    centers: &[Vec<T>],
    x0: &[T],
    radius: T,
    cfg: &SphereSearchConfig,
) -> Result<FarthestMinDistance<T>> {
    if centers.is_empty() {
        return invalid("farthest_min_distance needs at least one center");
    }
    if !(radius > T::zero()) {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    let n = x0.len();
    if centers.iter().any(|c| c.len() != n) {
        return invalid("center dimension mismatch");
    }
    let point_at = |d: &[T]| -> Vec<T> {
        let u = normalize(d);
        x0.iter().zip(&u).map(|(&c, &ui)| c + radius * ui).collect()
    };
    let m = cfg.directions.max(8);
    let dirs = sphere_directions::<T>(n, m, false);
    let mut scored: Vec<(T, usize)> = dirs
        .iter()
        .enumerate()
        .map(|(i, d)| (min_distance(centers, &point_at(d)), i))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let spacing = (sphere_area(n) / m as f64).powf(1.0 / (n.max(2) - 1) as f64);
    let nm = NelderMead::default();
    let mut best_val = scored[0].0;
    let mut best_dir = dirs[scored[0].1].clone();
    for &(_, i) in scored.iter().take(cfg.refine_top.max(1)) {
        let f = |d: &[T]| -min_distance(centers, &point_at(d));
        let (x, v) = nm.minimize(f, &dirs[i], T::lit(spacing));
        let (x2, v2) = nm.minimize(f, &x, T::lit(spacing * 1e-3));
        let (x, v) = if v2 < v { (x2, v2) } else { (x, v) };
        if -v > best_val {
            best_val = -v;
            best_dir = x;
        }
    }
    let witness = point_at(&best_dir);
    let value = min_distance(centers, &witness);
    // 1-Lipschitz objective: the sampling mesh radius bounds the miss before refinement.
    let gap_bound = radius * T::lit(spacing);
    Ok(FarthestMinDistance {
        value,
        witness,
        gap_bound,
    })
}
