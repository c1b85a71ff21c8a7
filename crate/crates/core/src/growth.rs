//! Frequency function, sup norms, doubling indices of balls and cubes, and
//! checkers for the growth inequalities relating them.
//!
//! Sup ratios are always formed as differences of `log2` magnitudes so that
//! high-degree fields never overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::Field;
use crate::geom::{Ball, Cube, Region};
use crate::quadrature::{gauss_legendre, QuadratureConfig, QuadratureScheme, SphereQuadrature};
use crate::scalar::{dist, dot, norm, Real};

/// Something whose absolute value can be maximized over a region.
pub trait Objective<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient_into(&self, x: &[T], out: &mut [T]);
}

impl<T: Real> Objective<T> for Field<T> {
    fn dim(&self) -> usize {
        Field::dim(self)
    }

    fn value(&self, x: &[T]) -> T {
        Field::value(self, x)
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        Field::gradient_into(self, x, out)
    }
}

/// Wraps a plain function; the gradient is taken by central differences.
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
    pub step: f64,
}

impl<T: Real, F: Fn(&[T]) -> T + Sync> Objective<T> for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[T]) -> T {
        (self.f)(x)
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let h = T::lit(self.step);
        let mut y = x.to_vec();
        for k in 0..self.dim {
            y[k] = x[k] + h;
            let fp = (self.f)(&y);
            y[k] = x[k] - h;
            let fm = (self.f)(&y);
            y[k] = x[k];
            out[k] = (fp - fm) / (h + h);
        }
    }
}

/// Lattice and refinement knobs for sup norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupConfig {
    /// Points per axis of the coarse lattice (forced odd).
    pub lattice_per_axis: usize,
    /// Cap on total lattice points; the per-axis count shrinks to respect it.
    pub max_lattice_points: usize,
    /// Fraction of best lattice points used as ascent starts.
    pub refine_fraction: f64,
    pub max_refine_starts: usize,
    pub ascent_iterations: usize,
}

impl Default for SupConfig {
    fn default() -> Self {
        Self {
            lattice_per_axis: 33,
            max_lattice_points: 33 * 33 * 33,
            refine_fraction: 0.01,
            max_refine_starts: 16,
            ascent_iterations: 200,
        }
    }
}

impl SupConfig {
    /// Lighter lattice for bulk work such as cube censuses.
    pub fn coarse() -> Self {
        Self {
            lattice_per_axis: 17,
            max_lattice_points: 17 * 17 * 17,
            refine_fraction: 0.01,
            max_refine_starts: 4,
            ascent_iterations: 120,
        }
    }
}

/// `sup |u|` over a region with the point attaining the sampled value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupNorm<T> {
    pub value: T,
    pub log2_value: T,
    /// Sign of `u` at the witness.
    pub sign: i8,
    pub lower_witness: Vec<T>,
    pub gap_bound: T,
    pub lattice_per_axis: usize,
}

fn axis_points<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    if hi <= lo || count <= 1 {
        return vec![(lo + hi) / T::lit(2.0)];
    }
    let step = (hi - lo) / T::from_usize_lossy(count - 1);
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * T::from_usize_lossy(i) })
        .collect()
}

fn region_bounds<T: Real>(region: &Region<T>) -> (Vec<T>, Vec<T>) {
    match region {
        Region::Ball(b) => (
            b.center().iter().map(|&c| c - b.radius()).collect(),
            b.center().iter().map(|&c| c + b.radius()).collect(),
        ),
        Region::Box(b) => (b.lo.clone(), b.hi.clone()),
    }
}

fn lattice<T: Real>(region: &Region<T>, cfg: &SupConfig) -> (Vec<Vec<T>>, usize, T) {
    let (lo, hi) = region_bounds(region);
    let n = lo.len();
    let active = lo.iter().zip(&hi).filter(|(l, h)| h > l).count().max(1);
    let mut per_axis = cfg.lattice_per_axis.max(3);
    while per_axis > 3 && per_axis.pow(active as u32) > cfg.max_lattice_points {
        per_axis -= 1;
    }
    if per_axis.is_multiple_of(2) {
        per_axis -= 1;
    }
    let axes: Vec<Vec<T>> = (0..n).map(|k| axis_points(lo[k], hi[k], per_axis)).collect();
    let mut spacing = T::zero();
    for k in 0..n {
        if hi[k] > lo[k] {
            let s = (hi[k] - lo[k]) / T::from_usize_lossy(per_axis - 1);
            spacing += s * s;
        }
    }
    let total: usize = axes.iter().map(Vec::len).product();
    let mut pts = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let p: Vec<T> = (0..n).map(|k| axes[k][idx[k]]).collect();
        if region.contains(&p) {
            pts.push(p);
        }
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    if let Region::Ball(b) = region {
        if pts.is_empty() {
            pts.push(b.center().to_vec());
        }
    }
    (pts, per_axis, spacing.sqrt())
}

/// Zeroes gradient components that would leave the region at active constraints.
fn feasible_direction<T: Real>(region: &Region<T>, x: &[T], g: &mut [T]) {
    match region {
        Region::Ball(b) => {
            let rel: Vec<T> = x.iter().zip(b.center()).map(|(&a, &c)| a - c).collect();
            let r = norm(&rel);
            if r >= b.radius() * (T::one() - T::lit(1e-12)) && r > T::zero() {
                let out = dot(g, &rel) / r;
                if out > T::zero() {
                    for (gi, &ri) in g.iter_mut().zip(&rel) {
                        *gi -= out * ri / r;
                    }
                }
            }
        }
        Region::Box(bx) => {
            for k in 0..g.len() {
                if bx.hi[k] <= bx.lo[k] || (x[k] >= bx.hi[k] && g[k] > T::zero()) || (x[k] <= bx.lo[k] && g[k] < T::zero()) {
                    g[k] = T::zero();
                }
            }
        }
    }
}

/// Projected ascent of `|u|` with normalized steps (scale invariant in `u`).
fn ascend<T: Real, O: Objective<T> + ?Sized>(
    obj: &O,
    region: &Region<T>,
    start: &[T],
    step0: T,
    iterations: usize,
) -> (Vec<T>, T, T) {
    let n = start.len();
    let mut x = start.to_vec();
    region.project(&mut x);
    let mut fx = obj.value(&x);
    let mut g = vec![T::zero(); n];
    let mut best_grad = T::zero();
    let min_step = step0 * T::lit(1e-12);
    let mut s = step0;
    for _ in 0..iterations {
        obj.gradient_into(&x, &mut g);
        best_grad = best_grad.max(norm(&g));
        let sign = if fx < T::zero() { -T::one() } else { T::one() };
        g.iter_mut().for_each(|v| *v *= sign);
        feasible_direction(region, &x, &mut g);
        let gn = norm(&g);
        if !(gn > T::zero()) || !gn.is_finite() {
            break;
        }
        let mut moved = false;
        while s >= min_step {
            let mut y: Vec<T> = x.iter().zip(&g).map(|(&xi, &gi)| xi + s * gi / gn).collect();
            region.project(&mut y);
            let fy = obj.value(&y);
            if fy.abs() > fx.abs() {
                x = y;
                fx = fy;
                s = (s * T::lit(1.5)).min(step0);
                moved = true;
                break;
            }
            s *= T::lit(0.5);
        }
        if !moved {
            break;
        }
    }
    (x, fx, best_grad)
}

/// Sup norm over a ball or box: coarse lattice plus ascent from the best points.
pub fn sup_norm<T: Real, O: Objective<T> + ?Sized>(u: &O, region: &Region<T>, cfg: &SupConfig) -> SupNorm<T> {
    sup_norm_seeded(u, region, cfg, &[])
}

/// As [`sup_norm`], with extra candidate starting points (projected into the region).
pub fn sup_norm_seeded<T: Real, O: Objective<T> + ?Sized>(
    u: &O,
    region: &Region<T>,
    cfg: &SupConfig,
    seeds: &[Vec<T>],
) -> SupNorm<T> {
    let (pts, per_axis, spacing) = lattice(region, cfg);
    let mut scored: Vec<(T, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (u.value(p).abs(), i))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let starts = ((scored.len() as f64 * cfg.refine_fraction).ceil() as usize)
        .clamp(1, cfg.max_refine_starts.max(1));

    let mut candidates: Vec<Vec<T>> = scored.iter().take(starts).map(|&(_, i)| pts[i].clone()).collect();
    for s in seeds {
        let mut p = s.clone();
        region.project(&mut p);
        candidates.push(p);
    }
    let step0 = if spacing > T::zero() { spacing } else { region.extent().max(T::lit(1e-6)) };

    let mut best_x = pts.get(scored[0].1).cloned().unwrap_or_else(|| candidates[0].clone());
    let mut best_v = u.value(&best_x);
    let mut grad_scale = T::zero();
    for c in &candidates {
        let v0 = u.value(c);
        if v0.abs() > best_v.abs() {
            best_v = v0;
            best_x = c.clone();
        }
        let (x, v, g) = ascend(u, region, c, step0, cfg.ascent_iterations);
        grad_scale = grad_scale.max(g);
        if v.abs() > best_v.abs() {
            best_v = v;
            best_x = x;
        }
    }
    let value = best_v.abs();
    SupNorm {
        value,
        log2_value: value.log2(),
        sign: if best_v < T::zero() { -1 } else { 1 },
        lower_witness: best_x,
        gap_bound: grad_scale * spacing / T::lit(2.0),
        lattice_per_axis: per_axis,
    }
}

fn degenerate_threshold<T: Real>() -> T {
    T::lit(1e-300).max(T::min_positive_value())
}

/// `H(r)` with an error indicator from a half-resolution rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HEstimate<T> {
    pub value: T,
    pub error_estimate: T,
    pub scheme: QuadratureScheme,
}

/// `∫_{|x - p| = r} u² dS` with a prebuilt rule.
pub fn h_integral<T: Real>(u: &Field<T>, p: &[T], r: T, quad: &SphereQuadrature<T>) -> Result<T> {
    if !(r > T::zero()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let h = quad.integrate(p, r, |x| {
        let v = u.value(x);
        v * v
    });
    if !(h > degenerate_threshold()) {
        return Err(Error::DegenerateField(format!("H({r}) = {h} vanishes on the sphere")));
    }
    Ok(h)
}

pub fn sphere_norm_h<T: Real>(u: &Field<T>, p: &[T], r: T, cfg: &QuadratureConfig) -> Result<HEstimate<T>> {
    let n = u.dim();
    let fine = SphereQuadrature::new(n, cfg);
    let coarse = SphereQuadrature::coarse(n, cfg);
    let value = h_integral(u, p, r, &fine)?;
    let rough = h_integral(u, p, r, &coarse)?;
    Ok(HEstimate {
        value,
        error_estimate: (value - rough).abs(),
        scheme: fine.scheme().clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate<T> {
    pub value: T,
    /// Step in `log r`.
    pub step: T,
    /// Difference between the Richardson value and the plain central difference.
    pub extrapolation_gap: T,
}

/// `β = (r/2) d log H / dr = ½ d log H / d log r`, by Richardson-extrapolated
/// central differences in `log r`.
pub fn frequency_beta<T: Real>(
    u: &Field<T>,
    p: &[T],
    r: T,
    quad: &SphereQuadrature<T>,
    log_step: T,
) -> Result<BetaEstimate<T>> {
    if !(r > T::zero()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let lh = |s: T| -> Result<T> { Ok(h_integral(u, p, r * s.exp(), quad)?.ln()) };
    let h = log_step;
    let half = h / T::lit(2.0);
    let d1 = (lh(h)? - lh(-h)?) / (h + h);
    let d2 = (lh(half)? - lh(-half)?) / h;
    let rich = (T::lit(4.0) * d2 - d1) / T::lit(3.0);
    Ok(BetaEstimate {
        value: rich / T::lit(2.0),
        step: h,
        extrapolation_gap: ((rich - d2) / T::lit(2.0)).abs(),
    })
}

pub const DEFAULT_LOG_STEP: f64 = 1e-3;

/// Sampled `r ↦ (H(r), β(r))` about a center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile<T> {
    pub center: Vec<T>,
    pub radii: Vec<T>,
    pub h_values: Vec<T>,
    pub beta_values: Vec<T>,
    pub quadrature: QuadratureScheme,
}

impl<T: Real> FrequencyProfile<T> {
    pub fn compute(u: &Field<T>, center: &[T], radii: &[T], cfg: &QuadratureConfig) -> Result<Self> {
        if radii.is_empty() {
            return invalid("profile needs at least one radius");
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("profile radii must be strictly increasing");
        }
        let quad = SphereQuadrature::new(u.dim(), cfg);
        let rows: Vec<Result<(T, T)>> = radii
            .par_iter()
            .map(|&r| {
                let h = h_integral(u, center, r, &quad)?;
                let b = frequency_beta(u, center, r, &quad, T::lit(DEFAULT_LOG_STEP))?;
                Ok((h, b.value))
            })
            .collect();
        let mut h_values = Vec::with_capacity(radii.len());
        let mut beta_values = Vec::with_capacity(radii.len());
        for row in rows {
            let (h, b) = row?;
            h_values.push(h);
            beta_values.push(b);
        }
        Ok(Self {
            center: center.to_vec(),
            radii: radii.to_vec(),
            h_values,
            beta_values,
            quadrature: quad.scheme().clone(),
        })
    }
}

/// `N(x, r) = log2(sup_{B(x,2r)} |u| / sup_{B(x,r)} |u|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub sup_inner: SupNorm<T>,
    pub sup_outer: SupNorm<T>,
    pub index: T,
}

pub fn doubling_index_ball<T: Real>(u: &Field<T>, x: &[T], r: T, cfg: &SupConfig) -> Result<DoublingReport<T>> {
    doubling_index_ball_seeded(u, x, r, cfg, &[])
}

pub(crate) fn doubling_index_ball_seeded<T: Real>(
    u: &Field<T>,
    x: &[T],
    r: T,
    cfg: &SupConfig,
    seeds: &[Vec<T>],
) -> Result<DoublingReport<T>> {
    let inner_ball = Ball::new(x.to_vec(), r)?;
    let inner_seeds: Vec<Vec<T>> = seeds.iter().filter(|s| inner_ball.contains(s)).cloned().collect();
    let inner = sup_norm_seeded(u, &Region::Ball(inner_ball.clone()), cfg, &inner_seeds);
    if !(inner.value > degenerate_threshold()) {
        return Err(Error::DegenerateField(format!("u vanishes on B({x:?}, {r})")));
    }
    // B ⊂ 2B: the inner witness is a valid candidate for the outer sup.
    let mut outer_seeds = seeds.to_vec();
    outer_seeds.push(inner.lower_witness.clone());
    let outer = sup_norm_seeded(u, &Region::Ball(inner_ball.scaled(T::lit(2.0))), cfg, &outer_seeds);
    let index = (outer.log2_value - inner.log2_value).max(T::zero());
    Ok(DoublingReport {
        center: x.to_vec(),
        radius: r,
        sup_inner: inner,
        sup_outer: outer,
        index,
    })
}

/// Centers lattice and radii ladder used to approximate `N(Q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubeGrid {
    /// Centers per axis, faces included; odd counts include the cube center.
    pub centers_per_axis: usize,
    /// Radii `diam · f^{j/m}`, `j = 0..m`, covering `(f · diam, diam]`.
    pub radii_count: usize,
    pub min_radius_fraction: f64,
}

impl Default for CubeGrid {
    fn default() -> Self {
        Self {
            centers_per_axis: 3,
            radii_count: 6,
            min_radius_fraction: 1.0 / 64.0,
        }
    }
}

impl CubeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.centers_per_axis == 0 || self.radii_count == 0 {
            return invalid("cube grid must have at least one center and one radius");
        }
        if !(self.min_radius_fraction > 0.0 && self.min_radius_fraction < 1.0) {
            return invalid("min_radius_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn centers<T: Real>(&self, q: &Cube<T>) -> Vec<Vec<T>> {
        let n = q.dim();
        let axes: Vec<Vec<T>> = (0..n)
            .map(|k| axis_points(q.lower(k), q.upper(k), self.centers_per_axis))
            .collect();
        let total = self.centers_per_axis.pow(n as u32);
        (0..total)
            .map(|flat| {
                let idx = crate::geom::unflatten(flat, self.centers_per_axis, n);
                (0..n).map(|k| axes[k][idx[k]]).collect()
            })
            .collect()
    }

    pub fn radii<T: Real>(&self, q: &Cube<T>) -> Vec<T> {
        let d = q.diam();
        let f = T::lit(self.min_radius_fraction);
        let m = T::from_usize_lossy(self.radii_count);
        (0..self.radii_count)
            .map(|j| d * f.powf(T::from_usize_lossy(j) / m))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSample<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub index: T,
}

/// Lattice approximation of `N(Q) = sup_{x ∈ Q, r ∈ (0, diam Q)} N(x, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeIndexReport<T> {
    pub cube: Cube<T>,
    pub index: T,
    pub argmax_center: Vec<T>,
    pub argmax_radius: T,
    pub grid: CubeGrid,
    pub samples: Vec<IndexSample<T>>,
}

impl<T: Real> CubeIndexReport<T> {
    /// Index restricted to samples admissible for a subcube `q`
    /// (center in `q`, radius at most `diam q`). Never exceeds `self.index`.
    pub fn restricted(&self, q: &Cube<T>) -> Option<T> {
        let d = q.diam();
        self.samples
            .iter()
            .filter(|s| q.contains(&s.center) && s.radius <= d)
            .map(|s| s.index)
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
    }
}

pub fn doubling_index_cube<T: Real>(
    u: &Field<T>,
    q: &Cube<T>,
    grid: &CubeGrid,
    cfg: &SupConfig,
) -> Result<CubeIndexReport<T>> {
    grid.validate()?;
    let centers = grid.centers(q);
    let radii = grid.radii(q);
    let jobs: Vec<(usize, usize)> = (0..centers.len())
        .flat_map(|c| (0..radii.len()).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<T>> = jobs
        .par_iter()
        .map(|&(c, r)| Ok(doubling_index_ball(u, &centers[c], radii[r], cfg)?.index))
        .collect();
    let mut samples = Vec::with_capacity(jobs.len());
    let mut best: Option<usize> = None;
    for (i, (res, &(c, r))) in results.into_iter().zip(&jobs).enumerate() {
        let index = res?;
        if best.is_none_or(|b: usize| index > samples_index(&samples, b)) {
            best = Some(i);
        }
        samples.push(IndexSample {
            center: centers[c].clone(),
            radius: radii[r],
            index,
        });
    }
    let b = best.expect("grid is nonempty");
    Ok(CubeIndexReport {
        cube: q.clone(),
        index: samples[b].index,
        argmax_center: samples[b].center.clone(),
        argmax_radius: samples[b].radius,
        grid: grid.clone(),
        samples,
    })
}

fn samples_index<T: Real>(samples: &[IndexSample<T>], i: usize) -> T {
    samples[i].index
}

/// Both sides of the doubling growth sandwich with `C = 0`.
///
/// `lower_slack = log_t R - N(x,ρ)(1-ε)` and `upper_slack = N(x,tρ)(1+ε) - log_t R`
/// where `R = sup_{B(x,tρ)} |u| / sup_{B(x,ρ)} |u|`; a negative slack is the
/// additive constant `C` that would be needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport<T> {
    pub center: Vec<T>,
    pub rho: T,
    pub t: T,
    pub epsilon: T,
    pub index_inner: T,
    pub index_outer: T,
    pub log_t_ratio: T,
    pub lower_slack: T,
    pub upper_slack: T,
    /// Whether `N(x, ρ)` exceeds the index floor, i.e. the `C = 0` form applies.
    pub above_floor: bool,
}

impl<T: Real> SandwichReport<T> {
    pub fn implied_c_lower(&self) -> T {
        (-self.lower_slack).max(T::zero())
    }

    pub fn implied_c_upper(&self) -> T {
        (-self.upper_slack).max(T::zero())
    }

    pub fn holds(&self, tol: T) -> bool {
        self.lower_slack >= -tol && self.upper_slack >= -tol
    }
}

pub fn check_growth_sandwich<T: Real>(
    u: &Field<T>,
    x: &[T],
    rho: T,
    t: T,
    epsilon: T,
    index_floor: T,
    cfg: &SupConfig,
) -> Result<SandwichReport<T>> {
    if !(t > T::lit(2.0)) {
        return invalid(format!("t must exceed 2, got {t}"));
    }
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let inner = doubling_index_ball(u, x, rho, cfg)?;
    let seeds = vec![inner.sup_inner.lower_witness.clone(), inner.sup_outer.lower_witness.clone()];
    let outer = doubling_index_ball_seeded(u, x, rho * t, cfg, &seeds)?;
    let log_t_ratio = (outer.sup_inner.log2_value - inner.sup_inner.log2_value) / t.log2();
    Ok(SandwichReport {
        center: x.to_vec(),
        rho,
        t,
        epsilon,
        index_inner: inner.index,
        index_outer: outer.index,
        log_t_ratio,
        lower_slack: log_t_ratio - inner.index * (T::one() - epsilon),
        upper_slack: outer.index * (T::one() + epsilon) - log_t_ratio,
        above_floor: inner.index > index_floor,
    })
}

/// `|log(H(r2)/H(r1)) - 2 ∫ β d log r|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogIntegralReport<T> {
    pub log_ratio: T,
    pub integral: T,
    pub residual: T,
    pub beta_evaluations: usize,
}

pub fn check_log_integral<T: Real>(
    u: &Field<T>,
    p: &[T],
    r1: T,
    r2: T,
    cfg: &QuadratureConfig,
) -> Result<LogIntegralReport<T>> {
    if !(r1 > T::zero() && r1 < r2) {
        return invalid(format!("need 0 < r1 < r2, got r1={r1}, r2={r2}"));
    }
    let quad = SphereQuadrature::new(u.dim(), cfg);
    let log_ratio = (h_integral(u, p, r2, &quad)? / h_integral(u, p, r1, &quad)?).ln();
    let (gx, gw) = gauss_legendre::<T>(8);
    let mut evals = 0usize;
    let step = T::lit(DEFAULT_LOG_STEP);
    let mut beta_at = |s: T| -> Result<T> {
        evals += 1;
        Ok(frequency_beta(u, p, s.exp(), &quad, step)?.value)
    };
    let panel = |a: T, b: T, beta: &mut dyn FnMut(T) -> Result<T>| -> Result<T> {
        let mid = (a + b) / T::lit(2.0);
        let half = (b - a) / T::lit(2.0);
        let mut acc = T::zero();
        for (&x, &w) in gx.iter().zip(&gw) {
            acc += w * beta(mid + half * x)?;
        }
        Ok(acc * half)
    };
    let tol = T::lit(1e-11);
    let mut stack = vec![(r1.ln(), r2.ln(), 0usize)];
    let mut total = T::zero();
    while let Some((a, b, depth)) = stack.pop() {
        let whole = panel(a, b, &mut beta_at)?;
        let m = (a + b) / T::lit(2.0);
        let left = panel(a, m, &mut beta_at)?;
        let right = panel(m, b, &mut beta_at)?;
        if (left + right - whole).abs() <= tol * (b - a) || depth >= 8 {
            total += left + right;
        } else {
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
    }
    let integral = T::lit(2.0) * total;
    Ok(LogIntegralReport {
        log_ratio,
        integral,
        residual: (log_ratio - integral).abs(),
        beta_evaluations: evals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVerdict {
    Holds,
    Violated,
    BelowIndexFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterShiftReport<T> {
    pub index_first: T,
    pub index_shifted: T,
    pub ratio: T,
    pub verdict: ShiftVerdict,
}

/// `N(x2, Cρ) / N(x1, ρ)` against the `99/100` threshold.
pub fn check_center_shift<T: Real>(
    u: &Field<T>,
    x1: &[T],
    x2: &[T],
    rho: T,
    big_c: T,
    index_floor: T,
    cfg: &SupConfig,
) -> Result<CenterShiftReport<T>> {
    if !(dist(x1, x2) < rho) {
        return invalid("center shift requires |x1 - x2| < rho");
    }
    let first = doubling_index_ball(u, x1, rho, cfg)?.index;
    let shifted = doubling_index_ball(u, x2, big_c * rho, cfg)?.index;
    let ratio = if first > T::zero() { shifted / first } else { T::nan() };
    let verdict = if !(first > index_floor) {
        ShiftVerdict::BelowIndexFloor
    } else if ratio >= T::lit(0.99) {
        ShiftVerdict::Holds
    } else {
        ShiftVerdict::Violated
    };
    Ok(CenterShiftReport {
        index_first: first,
        index_shifted: shifted,
        ratio,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lift_eigenfunction, make_harmonic_poly, sin_torus, Part};

    fn quad(n: usize) -> SphereQuadrature<f64> {
        SphereQuadrature::new(n, &QuadratureConfig::default())
    }

    #[test]
    fn h_of_constant_on_circle() {
        let u = Field::Constant { dim: 2, value: 1.0 };
        let h = sphere_norm_h(&u, &[0.0, 0.0], 2.0, &QuadratureConfig::default()).unwrap();
        assert!((h.value - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(h.error_estimate < 1e-12);
    }

    #[test]
    fn h_doubling_ratio_for_cubic() {
        let u = make_harmonic_poly::<f64>(2, 3, Part::Re).unwrap();
        let q = quad(2);
        let r = 0.6;
        let ratio = h_integral(&u, &[0.0, 0.0], 2.0 * r, &q).unwrap() / h_integral(&u, &[0.0, 0.0], r, &q).unwrap();
        assert!((ratio - 128.0).abs() < 1e-10, "{ratio}");
    }

    #[test]
    fn h_of_linear_on_two_sphere() {
        let u = make_harmonic_poly::<f64>(3, 1, Part::Re).unwrap();
        let h = h_integral(&u, &[0.0; 3], 1.0, &quad(3)).unwrap();
        let oracle = 4.0 * std::f64::consts::PI / 3.0;
        assert!((h - oracle).abs() < 1e-12);
    }

    #[test]
    fn h_vanishing_is_an_error() {
        let u = Field::Constant { dim: 2, value: 0.0 };
        assert!(matches!(h_integral(&u, &[0.0, 0.0], 1.0, &quad(2)), Err(Error::DegenerateField(_))));
    }

    #[test]
    fn beta_of_homogeneous_field() {
        let u = make_harmonic_poly::<f64>(2, 4, Part::Re).unwrap();
        let b = frequency_beta(&u, &[0.0, 0.0], 0.7, &quad(2), 1e-3).unwrap();
        assert!((b.value - 4.5).abs() < 1e-6, "{}", b.value);
        let c = Field::Constant { dim: 3, value: 2.0 };
        let b = frequency_beta(&c, &[0.0; 3], 0.7, &quad(3), 1e-3).unwrap();
        assert!((b.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn beta_at_torus_maximum_tends_to_vanishing_order_zero() {
        let u = sin_torus::<f64>(2, 1).unwrap();
        let p = [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2];
        let b = frequency_beta(&u, &p, 0.05, &quad(2), 1e-3).unwrap();
        assert!((b.value - 0.5).abs() < 0.05, "{}", b.value);
    }

    #[test]
    fn sup_of_homogeneous_on_ball() {
        let u = make_harmonic_poly::<f64>(2, 7, Part::Re).unwrap();
        let s = sup_norm(&u, &Region::Ball(Ball::new(vec![0.0, 0.0], 0.8).unwrap()), &SupConfig::default());
        assert!((s.value - 0.8f64.powi(7)).abs() < 1e-14);
        assert_eq!(s.value, u.value(&s.lower_witness).abs());
    }

    #[test]
    fn sup_of_linear_on_square() {
        let u = make_harmonic_poly::<f64>(2, 1, Part::Re).unwrap();
        let q = Cube::from_bounds(-1.0, 1.0, 2).unwrap();
        let s = sup_norm(&u, &Region::from(&q), &SupConfig::default());
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn sup_of_torus_mode() {
        let u = crate::fields::make_torus_eigen::<f64>(vec![2, 3], vec![crate::fields::Trig::Sin; 2]).unwrap();
        let q = Cube::from_bounds(0.0, std::f64::consts::TAU, 2).unwrap();
        let s = sup_norm(&u, &Region::from(&q), &SupConfig::default());
        assert!((s.value - 1.0).abs() < 1e-9, "{}", s.value);
    }

    #[test]
    fn doubling_index_exact_for_homogeneous() {
        let u = make_harmonic_poly::<f64>(2, 6, Part::Re).unwrap();
        for r in [0.1, 0.5, 1.3] {
            let d = doubling_index_ball(&u, &[0.0, 0.0], r, &SupConfig::default()).unwrap();
            assert!((d.index - 6.0).abs() < 1e-9, "r={r}: {}", d.index);
        }
    }

    #[test]
    fn doubling_index_of_constant_is_zero() {
        let u = Field::Constant { dim: 2, value: -3.0 };
        let d = doubling_index_ball(&u, &[0.2, 0.1], 0.5, &SupConfig::default()).unwrap();
        assert_eq!(d.index, 0.0);
    }

    #[test]
    fn doubling_index_away_from_zero_is_small() {
        let u = make_harmonic_poly::<f64>(2, 6, Part::Re).unwrap();
        let d = doubling_index_ball(&u, &[1.0, 0.0], 0.01, &SupConfig::default()).unwrap();
        assert!(d.index > 0.0 && d.index < 0.2, "{}", d.index);
        // direct-sampling oracle: Taylor bound log2((1 + 2kr) / (1 + kr)) up to curvature
        let taylor = ((1.0 + 12.0 * 0.01) / (1.0 + 6.0 * 0.01f64)).log2();
        assert!((d.index - taylor).abs() < 0.02, "{} vs {taylor}", d.index);
    }

    #[test]
    fn zero_inner_sup_is_degenerate() {
        let u = Field::Constant { dim: 2, value: 0.0 };
        assert!(doubling_index_ball(&u, &[0.0, 0.0], 1.0, &SupConfig::default()).is_err());
    }

    #[test]
    fn cube_index_contains_origin() {
        let u = make_harmonic_poly::<f64>(2, 5, Part::Re).unwrap();
        let q = Cube::from_bounds(-1.0, 1.0, 2).unwrap();
        let rep = doubling_index_cube(&u, &q, &CubeGrid::default(), &SupConfig::coarse()).unwrap();
        assert!(rep.index >= 5.0 - 1e-9, "{}", rep.index);
    }

    #[test]
    fn cube_index_of_linear_is_at_most_one() {
        let u = make_harmonic_poly::<f64>(2, 1, Part::Re).unwrap();
        for q in [Cube::from_bounds(-1.0, 1.0, 2).unwrap(), Cube::new(vec![3.0, -1.0], 0.2).unwrap()] {
            let rep = doubling_index_cube(&u, &q, &CubeGrid::default(), &SupConfig::coarse()).unwrap();
            assert!(rep.index <= 1.0 + 1e-9, "{}", rep.index);
        }
    }

    #[test]
    fn restricted_index_is_monotone() {
        let u = make_harmonic_poly::<f64>(2, 4, Part::Im).unwrap();
        let q = Cube::from_bounds(-1.0, 1.0, 2).unwrap();
        let grid = CubeGrid { centers_per_axis: 5, ..CubeGrid::default() };
        let rep = doubling_index_cube(&u, &q, &grid, &SupConfig::coarse()).unwrap();
        for child in q.subdivide(2).unwrap() {
            let sub = rep.restricted(&child).unwrap();
            assert!(sub <= rep.index);
        }
    }

    #[test]
    fn sandwich_for_homogeneous_field() {
        let u = make_harmonic_poly::<f64>(2, 8, Part::Re).unwrap();
        let rep = check_growth_sandwich(&u, &[0.0, 0.0], 0.1, 4.0, 0.1, 1.0, &SupConfig::default()).unwrap();
        assert!((rep.log_t_ratio - 8.0).abs() < 1e-9);
        assert!((rep.lower_slack - 0.8).abs() < 1e-8);
        assert!(rep.holds(1e-9) && rep.above_floor);
    }

    #[test]
    fn sandwich_for_constant() {
        let u = Field::Constant { dim: 2, value: 1.0 };
        let rep = check_growth_sandwich(&u, &[0.3, 0.3], 0.2, 3.0, 0.5, 1.0, &SupConfig::default()).unwrap();
        assert_eq!(rep.log_t_ratio, 0.0);
        assert!(rep.holds(0.0) && !rep.above_floor);
    }

    #[test]
    fn sandwich_for_lift_on_nodal_set() {
        let u = lift_eigenfunction(&sin_torus::<f64>(2, 1).unwrap()).unwrap();
        let x = [std::f64::consts::PI, 1.0, 0.0];
        let rep = check_growth_sandwich(&u, &x, 0.05, 4.0, 0.25, 1.0, &SupConfig::default()).unwrap();
        assert!(rep.lower_slack >= 0.0 && rep.upper_slack >= 0.0, "{rep:?}");
    }

    #[test]
    fn sandwich_rejects_bad_parameters() {
        let u = Field::Constant { dim: 2, value: 1.0 };
        assert!(check_growth_sandwich(&u, &[0.0, 0.0], 0.1, 2.0, 0.5, 1.0, &SupConfig::default()).is_err());
        assert!(check_growth_sandwich(&u, &[0.0, 0.0], 0.1, 3.0, 1.0, 1.0, &SupConfig::default()).is_err());
    }

    #[test]
    fn log_integral_identity() {
        let cfg = QuadratureConfig::default();
        let u = make_harmonic_poly::<f64>(2, 5, Part::Im).unwrap();
        let rep = check_log_integral(&u, &[0.0, 0.0], 0.2, 0.9, &cfg).unwrap();
        assert!(rep.residual < 1e-8, "{rep:?}");
        let c = Field::Constant { dim: 2, value: 1.0 };
        assert!(check_log_integral(&c, &[0.0, 0.0], 0.2, 0.9, &cfg).unwrap().residual < 1e-8);
        let lift = lift_eigenfunction(&sin_torus::<f64>(2, 1).unwrap()).unwrap();
        let rep = check_log_integral(&lift, &[0.4, 0.3, 0.1], 0.1, 1.0, &cfg).unwrap();
        assert!(rep.residual < 1e-4, "{rep:?}");
        assert!(check_log_integral(&c, &[0.0, 0.0], 0.9, 0.2, &cfg).is_err());
    }

    #[test]
    fn center_shift_identity_and_gate() {
        let cfg = SupConfig::default();
        let u = make_harmonic_poly::<f64>(2, 10, Part::Re).unwrap();
        let rep = check_center_shift(&u, &[0.0, 0.0], &[0.0, 0.0], 0.2, 1.0, 1.0, &cfg).unwrap();
        assert_eq!(rep.ratio, 1.0);
        let rho = 0.1;
        // sup over B(x, r) of |Re z^k| is (|x| + r)^k, so the shifted index is closed form
        let rep = check_center_shift(&u, &[0.0, 0.0], &[0.5 * rho, 0.0], rho, 4.0, 1.0, &cfg).unwrap();
        let exact = (0.85f64 / 0.45).log2();
        assert!((rep.ratio - exact).abs() < 1e-9, "{rep:?}");
        assert_eq!(rep.verdict, ShiftVerdict::Violated);
        let rep = check_center_shift(&u, &[0.0, 0.0], &[0.5 * rho, 0.0], rho, 64.0, 1.0, &cfg).unwrap();
        assert!(rep.ratio >= 0.99 && rep.verdict == ShiftVerdict::Holds, "{rep:?}");
        let lin = make_harmonic_poly::<f64>(2, 1, Part::Re).unwrap();
        let rep = check_center_shift(&lin, &[0.0, 0.0], &[0.05, 0.0], 0.1, 4.0, 2.0, &cfg).unwrap();
        assert_eq!(rep.verdict, ShiftVerdict::BelowIndexFloor);
        assert!(check_center_shift(&lin, &[0.0, 0.0], &[1.0, 0.0], 0.1, 4.0, 2.0, &cfg).is_err());
    }

    #[test]
    fn profile_is_flat_for_homogeneous_field() {
        let u = make_harmonic_poly::<f64>(3, 3, Part::Re).unwrap();
        let prof = FrequencyProfile::compute(&u, &[0.0; 3], &[0.25, 0.5, 1.0], &QuadratureConfig::default()).unwrap();
        for b in &prof.beta_values {
            assert!((b - 4.0).abs() < 1e-6, "{b}");
        }
        assert!(FrequencyProfile::compute(&u, &[0.0; 3], &[0.5, 0.25], &QuadratureConfig::default()).is_err());
    }
}
