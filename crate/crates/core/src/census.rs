//! Doubling-index censuses over cube subdivisions, the counting recursion
//! behind the nodal-volume exponent, and wide-simplex extraction.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::Field;
use crate::geom::{diameter, orthonormal_basis, simplex_metrics, Cube, Simplex};
use crate::growth::{doubling_index_ball, doubling_index_cube, CubeGrid, CubeIndexReport, SupConfig};
use crate::scalar::{dot, norm, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule<T> {
    /// Bad iff index `> max(N(Q)/(1+c), N₀)`; bound `½ A^{n-1}`.
    Relative { c: T, index_floor: T },
    /// Bad iff index `> N/2` among cubes meeting the central hyperplane; bound `ε A^{n-1}`.
    Hyperplane { level: T, epsilon: T },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcubeIndex<T> {
    /// Multi-index of the subcube, last axis varying fastest.
    pub position: Vec<usize>,
    pub cube: Cube<T>,
    pub index: T,
    pub bad: bool,
    pub argmax_center: Vec<T>,
    pub argmax_radius: T,
}

/// A subcube whose sampled index exceeds the threshold, kept for inspection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness<T> {
    pub position: Vec<usize>,
    pub center: Vec<T>,
    pub radius: T,
    pub index: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport<T> {
    pub parent: Cube<T>,
    pub subdivision: usize,
    pub rule: ThresholdRule<T>,
    /// `N(Q)` on the union of the parent and subcube lattices.
    pub parent_index: T,
    pub threshold: T,
    pub subcubes: Vec<SubcubeIndex<T>>,
    pub bad_count: usize,
    pub bound: T,
    /// `bad_count < bound`.
    pub verdict: bool,
    pub witnesses: Vec<Witness<T>>,
    /// Good subcubes whose own sampled sub-subcubes exceed the threshold (always 0
    /// on a shared lattice; nonzero would indicate a sampling bug).
    pub monotonicity_violations: usize,
}

impl<T: Real> CensusReport<T> {
    /// Indices as an `A × A` matrix for planar parents (rows along the first axis).
    pub fn index_matrix(&self) -> Option<Vec<Vec<T>>> {
        if self.parent.dim() != 2 && !matches!(self.rule, ThresholdRule::Hyperplane { .. }) {
            return None;
        }
        let a = self.subdivision;
        let mut rows = vec![Vec::with_capacity(a); self.subcubes.len().div_ceil(a)];
        for (i, s) in self.subcubes.iter().enumerate() {
            rows[i / a].push(s.index);
        }
        Some(rows)
    }
}

/// Lattice and sup settings for censuses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusConfig {
    pub grid: CubeGrid,
    pub sup: SupConfig,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self {
            grid: CubeGrid::default(),
            sup: SupConfig {
                lattice_per_axis: 9,
                max_lattice_points: 729,
                refine_fraction: 0.01,
                max_refine_starts: 3,
                ascent_iterations: 80,
            },
        }
    }
}

fn max_index<T: Real>(reports: &[CubeIndexReport<T>]) -> T {
    reports.iter().map(|r| r.index).fold(T::zero(), T::max)
}

fn child_reports<T: Real>(u: &Field<T>, cubes: &[Cube<T>], cfg: &CensusConfig) -> Result<Vec<CubeIndexReport<T>>> {
    cubes
        .par_iter()
        .map(|q| doubling_index_cube(u, q, &cfg.grid, &cfg.sup))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn assemble<T: Real>(
    parent: &Cube<T>,
    a: usize,
    rule: ThresholdRule<T>,
    parent_index: T,
    threshold: T,
    bound: T,
    positions: Vec<Vec<usize>>,
    reports: Vec<CubeIndexReport<T>>,
) -> CensusReport<T> {
    let mut subcubes = Vec::with_capacity(reports.len());
    let mut witnesses = Vec::new();
    let mut violations = 0;
    for (position, rep) in positions.into_iter().zip(reports) {
        let bad = rep.index > threshold;
        if bad {
            witnesses.push(Witness {
                position: position.clone(),
                center: rep.argmax_center.clone(),
                radius: rep.argmax_radius,
                index: rep.index,
            });
        } else if let Ok(parts) = rep.cube.subdivide(2) {
            violations += parts
                .iter()
                .filter(|p| rep.restricted(p).is_some_and(|v| v > threshold))
                .count();
        }
        subcubes.push(SubcubeIndex {
            position,
            cube: rep.cube.clone(),
            index: rep.index,
            bad,
            argmax_center: rep.argmax_center,
            argmax_radius: rep.argmax_radius,
        });
    }
    let bad_count = witnesses.len();
    CensusReport {
        parent: parent.clone(),
        subdivision: a,
        rule,
        parent_index,
        threshold,
        subcubes,
        bad_count,
        bound,
        verdict: T::from_usize_lossy(bad_count) < bound,
        witnesses,
        monotonicity_violations: violations,
    }
}

/// Counts the `A^n` subcubes of `Q` whose index exceeds `max(N(Q)/(1+c), N₀)`.
pub fn subcube_census<T: Real>(
    u: &Field<T>,
    q: &Cube<T>,
    a: usize,
    c: T,
    index_floor: T,
    cfg: &CensusConfig,
) -> Result<CensusReport<T>> {
    if a < 2 {
        return invalid(format!("subdivision factor must be at least 2, got {a}"));
    }
    if !(c > T::zero()) {
        return invalid(format!("c must be positive, got {c}"));
    }
    let n = q.dim();
    let children = q.subdivide(a)?;
    let reports = child_reports(u, &children, cfg)?;
    let own = doubling_index_cube(u, q, &cfg.grid, &cfg.sup)?;
    // Every subcube sample is admissible for Q, so N(Q) dominates them all.
    let parent_index = own.index.max(max_index(&reports));
    let threshold = (parent_index / (T::one() + c)).max(index_floor);
    let bound = T::from_usize_lossy(a.pow(n as u32 - 1)) / T::lit(2.0);
    let positions = (0..children.len()).map(|f| crate::geom::unflatten(f, a, n)).collect();
    Ok(assemble(
        q,
        a,
        ThresholdRule::Relative { c, index_floor },
        parent_index,
        threshold,
        bound,
        positions,
        reports,
    ))
}

/// Counts subcubes meeting the central hyperplane `{x_n = center_n}` with index `> N/2`.
pub fn hyperplane_census<T: Real>(
    u: &Field<T>,
    q: &Cube<T>,
    a1: usize,
    level: T,
    epsilon: T,
    cfg: &CensusConfig,
) -> Result<CensusReport<T>> {
    if a1 < 3 || a1.is_multiple_of(2) {
        return invalid(format!("A1 must be odd and at least 3, got {a1}"));
    }
    if !(epsilon > T::zero()) {
        return invalid("epsilon must be positive");
    }
    let n = q.dim();
    // With A1 odd the central hyperplane lies inside the middle layer only.
    let mid = a1 / 2;
    let all = q.subdivide(a1)?;
    let (positions, layer): (Vec<Vec<usize>>, Vec<Cube<T>>) = all
        .into_iter()
        .enumerate()
        .map(|(f, c)| (crate::geom::unflatten(f, a1, n), c))
        .filter(|(p, _)| p[n - 1] == mid)
        .unzip();
    let reports = child_reports(u, &layer, cfg)?;
    let parent_index = max_index(&reports);
    let threshold = level / T::lit(2.0);
    let bound = epsilon * T::from_usize_lossy(a1.pow(n as u32 - 1));
    Ok(assemble(
        q,
        a1,
        ThresholdRule::Hyperplane { level, epsilon },
        parent_index,
        threshold,
        bound,
        positions,
        reports,
    ))
}

/// Exponent `α = log(4A)/log(1+c)` of the bad-level recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionModel {
    pub a: u64,
    pub c: f64,
    pub alpha: f64,
    /// `α` as a fraction when `4A` and `1 + c` are powers of two.
    pub alpha_exact: Option<(i64, i64)>,
    pub levels: Vec<MajorantLevel>,
}

/// Level `j` of the majorant `F̄((1+c)^j N₀) = (4A)^j F̄(N₀)`, in logs relative to `F̄(N₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantLevel {
    pub j: u32,
    pub log_majorant: f64,
    pub log_power_bound: f64,
    /// Checked symbolically with `ln(4A)` and `ln(1+c)` as independent units.
    pub holds_exact: bool,
    pub holds_float: bool,
}

pub const MAJORANT_LEVELS: u32 = 64;

fn exact_power_of_two(x: f64) -> Option<i64> {
    if x > 0.0 && x.is_finite() {
        let (m, e) = frexp(x);
        (m == 0.5).then_some(e as i64 - 1)
    } else {
        None
    }
}

fn frexp(x: f64) -> (f64, i32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        return (x, 0);
    }
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022u64 << 52));
    (m, exp - 1022)
}

/// Linear form `l·ln(4A) + m·ln(1+c)` with rational coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
struct LogForm {
    l: Ratio<i128>,
    m: Ratio<i128>,
}

impl LogForm {
    /// Multiplication by `α`, using `α·ln(1+c) = ln(4A)`; defined on pure `ln(1+c)` multiples.
    fn times_alpha(self) -> Option<Self> {
        (self.l == Ratio::from_integer(0)).then_some(LogForm { l: self.m, m: self.l })
    }

    fn dominates(&self, other: &Self) -> bool {
        self.m == other.m && self.l >= other.l
    }
}

pub fn recursion_exponent(a: u64, c: f64) -> Result<RecursionModel> {
    if a < 2 {
        return invalid(format!("A must be at least 2, got {a}"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return invalid(format!("c must be positive, got {c}"));
    }
    let four_a = 4.0 * a as f64;
    let alpha = four_a.log2() / (1.0 + c).log2();
    if !(alpha > 1.0) {
        return invalid(format!("alpha = {alpha} is not above 1; need c < 4A - 1"));
    }
    let alpha_exact = match (exact_power_of_two(four_a), exact_power_of_two(1.0 + c)) {
        (Some(p), Some(q)) => {
            let r = Ratio::new(p, q);
            Some((*r.numer(), *r.denom()))
        }
        _ => None,
    };
    let zero = Ratio::from_integer(0);
    let levels = (0..=MAJORANT_LEVELS)
        .map(|j| {
            let jj = Ratio::from_integer(j as i128);
            let majorant = LogForm { l: jj, m: zero };
            let holds_exact = LogForm { l: zero, m: jj }
                .times_alpha()
                .is_some_and(|bound| bound.dominates(&majorant));
            let log_majorant = j as f64 * four_a.ln();
            let log_power_bound = alpha * (j as f64 * (1.0 + c).ln());
            MajorantLevel {
                j,
                log_majorant,
                log_power_bound,
                holds_exact,
                holds_float: log_majorant <= log_power_bound * (1.0 + 1e-12) + 1e-12,
            }
        })
        .collect();
    Ok(RecursionModel { a, c, alpha, alpha_exact, levels })
}

impl RecursionModel {
    pub fn all_levels_hold(&self) -> bool {
        self.levels.iter().all(|l| l.holds_exact && l.holds_float)
    }

    /// `F̄` is increasing in `N`: consecutive log-majorants strictly increase.
    pub fn majorant_monotone(&self) -> bool {
        self.levels.windows(2).all(|w| w[0].log_majorant < w[1].log_majorant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnPolicy {
    Zero,
    Max,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeLevel {
    pub level: u32,
    /// Bad cubes at this level.
    pub count: u128,
    /// `K_{j₀} (½(2A₀+1)^{n-1})^{j-j₀}`.
    pub bound: f64,
    /// Hyperplane-chain count `M_k` and its bound `M_0((2A₀+1)^{n-1} - 1)^k`.
    pub chain_count: u128,
    pub chain_bound: f64,
    /// `M_k / (2A₀+1)^{(n-1)k}` against `(1 - (2A₀+1)^{-(n-1)})^k`.
    pub chain_fraction: f64,
    pub chain_decay: f64,
    pub approximated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSimulation {
    pub a0: u64,
    pub n: usize,
    pub j0: u32,
    pub seed: u64,
    pub policy: SpawnPolicy,
    /// Largest number of bad children per bad cube, `⌊½(2A₀+1)^{n-1}⌋`.
    pub cap: u64,
    pub levels: Vec<TreeLevel>,
    pub holds: bool,
}

pub const MAX_TREE_DEPTH: u32 = 20;
const EXACT_DRAWS: u128 = 1 << 20;

/// Sum of `count` independent uniform draws on `0..=cap`; normal approximation
/// (clamped to the feasible range) once `count` is large.
fn spawn(rng: &mut ChaCha8Rng, count: u128, cap: u64, policy: SpawnPolicy) -> (u128, bool) {
    match policy {
        SpawnPolicy::Zero => (0, false),
        SpawnPolicy::Max => (count.saturating_mul(cap as u128), false),
        SpawnPolicy::Uniform if count <= EXACT_DRAWS => {
            ((0..count).map(|_| rng.random_range(0..=cap) as u128).sum(), false)
        }
        SpawnPolicy::Uniform => {
            let k = count as f64;
            let c = cap as f64;
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let s = k * c / 2.0 + z * (k * c * (c + 2.0) / 12.0).sqrt();
            let max = count.saturating_mul(cap as u128);
            ((s.round().max(0.0) as u128).min(max), true)
        }
    }
}

pub fn simulate_bad_cube_tree(
    a0: u64,
    n: usize,
    depth: u32,
    j0: u32,
    seed: u64,
    policy: SpawnPolicy,
) -> Result<TreeSimulation> {
    if depth > MAX_TREE_DEPTH {
        return invalid(format!("tree depth must be at most {MAX_TREE_DEPTH}, got {depth}"));
    }
    if n < 2 {
        return invalid("tree dimension must be at least 2");
    }
    if a0 == 0 {
        return invalid("A0 must be positive");
    }
    if j0 > depth {
        return invalid("j0 must not exceed depth");
    }
    let branching = ((2 * a0 + 1) as u128).pow(n as u32 - 1);
    let factor = branching as f64 / 2.0;
    let cap = (branching / 2) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain_rng = ChaCha8Rng::seed_from_u64(seed);
    chain_rng.set_stream(1);
    let (mut k, mut m) = (1u128, 1u128);
    let mut levels = Vec::new();
    let mut holds = true;
    for j in j0..=depth {
        let steps = (j - j0) as i32;
        let bound = factor.powi(steps);
        let chain_bound = (branching as f64 - 1.0).powi(steps);
        let chain_fraction = m as f64 / (branching as f64).powi(steps);
        let chain_decay = (1.0 - 1.0 / branching as f64).powi(steps);
        let tol = 1e-12 * bound.max(1.0);
        let ok = (k as f64) <= bound + tol
            && (m as f64) <= chain_bound * (1.0 + 1e-12)
            && chain_fraction <= chain_decay * (1.0 + 1e-12);
        holds &= ok;
        let (next_k, ak) = spawn(&mut rng, k, cap, policy);
        let (next_m, am) = spawn(&mut chain_rng, m, (branching - 1) as u64, policy);
        levels.push(TreeLevel {
            level: j,
            count: k,
            bound,
            chain_count: m,
            chain_bound,
            chain_fraction,
            chain_decay,
            approximated: ak || am,
        });
        k = next_k;
        m = next_m;
    }
    Ok(TreeSimulation { a0, n, j0, seed, policy, cap, levels, holds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WideSimplex<T> {
    pub simplex: Option<Simplex<T>>,
    /// Indices into the input point list.
    pub vertices: Vec<usize>,
    pub relative_width: T,
    /// `diam(S) / diam(q)`.
    pub diameter_ratio: T,
    /// `min(relative_width, diameter_ratio)`.
    pub achieved_a: T,
    pub degenerate: bool,
}

fn distance_to_hull<T: Real>(basis: &[Vec<T>], origin: &[T], p: &[T]) -> T {
    let mut r: Vec<T> = p.iter().zip(origin).map(|(&a, &b)| a - b).collect();
    for b in basis {
        let c = dot(&r, b);
        r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri -= c * bi);
    }
    norm(&r)
}

/// Greedy wide simplex: farthest pair, then repeatedly the point farthest from the affine hull.
pub fn extract_wide_simplex<T: Real>(points: &[Vec<T>], q: &Cube<T>) -> Result<WideSimplex<T>> {
    let n = q.dim();
    if points.len() < n + 1 {
        return invalid(format!("need at least {} points, got {}", n + 1, points.len()));
    }
    if points.iter().any(|p| p.len() != n) {
        return invalid("point dimension mismatch");
    }
    let mut best = (T::neg_infinity(), 0, 0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = crate::scalar::dist(&points[i], &points[j]);
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let diam = best.0;
    let mut chosen = vec![best.1, best.2];
    let tol = diam * T::lit(1e-9);
    let mut degenerate = !(diam > T::zero());
    while chosen.len() < n + 1 && !degenerate {
        let origin = &points[chosen[0]];
        let diffs: Vec<Vec<T>> = chosen[1..]
            .iter()
            .map(|&i| points[i].iter().zip(origin).map(|(&a, &b)| a - b).collect())
            .collect();
        let basis = orthonormal_basis(&diffs, 1e-12);
        let (d, idx) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (distance_to_hull(&basis, origin, p), i))
            .fold((T::neg_infinity(), 0), |acc, x| if x.0 > acc.0 { x } else { acc });
        if d <= tol {
            degenerate = true;
        } else {
            chosen.push(idx);
        }
    }
    if degenerate {
        return Ok(WideSimplex {
            simplex: None,
            vertices: chosen,
            relative_width: T::zero(),
            diameter_ratio: diam.max(T::zero()) / q.diam(),
            achieved_a: T::zero(),
            degenerate: true,
        });
    }
    let s = Simplex::new(chosen.iter().map(|&i| points[i].clone()).collect())?;
    let metrics = simplex_metrics(&s);
    let diameter_ratio = diameter(s.vertices()) / q.diam();
    Ok(WideSimplex {
        simplex: Some(s),
        vertices: chosen,
        relative_width: metrics.relative_width,
        diameter_ratio,
        achieved_a: metrics.relative_width.min(diameter_ratio),
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaVerdict {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck<T> {
    pub vertex_radius: T,
    pub vertex_indices: Vec<T>,
    pub barycenter_radius: T,
    pub barycenter_index: T,
    pub target: T,
    pub verdict: LemmaVerdict,
}

/// Whether vertex indices `> N` on balls of radius `(K/2) diam S` force
/// `N(x₀, C diam S) > N(1 + c)` at the barycenter.
pub fn simplex_lemma_check<T: Real>(
    u: &Field<T>,
    s: &Simplex<T>,
    level: T,
    c: T,
    k: T,
    big_c: T,
    cfg: &SupConfig,
) -> Result<LemmaCheck<T>> {
    if !(c > T::zero() && k > T::zero() && big_c > T::zero()) {
        return invalid("c, K and C must be positive");
    }
    let diam = s.diam();
    if !(diam > T::zero()) {
        return invalid("simplex has zero diameter");
    }
    let vertex_radius = k / T::lit(2.0) * diam;
    let vertex_indices = s
        .vertices()
        .iter()
        .map(|v| Ok(doubling_index_ball(u, v, vertex_radius, cfg)?.index))
        .collect::<Result<Vec<T>>>()?;
    let barycenter_radius = big_c * diam;
    let barycenter_index = doubling_index_ball(u, &s.barycenter(), barycenter_radius, cfg)?.index;
    let target = level * (T::one() + c);
    let verdict = if vertex_indices.iter().any(|&v| !(v > level)) {
        LemmaVerdict::NotApplicable
    } else if barycenter_index > target {
        LemmaVerdict::Holds
    } else {
        LemmaVerdict::Violated
    };
    Ok(LemmaCheck {
        vertex_radius,
        vertex_indices,
        barycenter_radius,
        barycenter_index,
        target,
        verdict,
    })
}
