//! Estimators of the zero-set measure `H^{n-1}({u = 0} ∩ Q)`: piecewise-linear
//! marching on a Kuhn triangulation and Cauchy–Crofton line counting.
//!
//! Both estimators read vertices with `u = 0` (after snapping round-off zeros)
//! as positive. A zero set lying exactly on grid facets is then counted once,
//! from its negative side, and a zero set on `∂Q` counts with weight one half
//! on average, which is the half-open `[0, 2π)^n` convention for tori.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::Field;
use crate::fit::fit_log_log;
use crate::geom::Cube;
use crate::growth::{doubling_index_cube, CubeGrid, SupConfig};
use crate::scalar::{compensated_sum, norm, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodalMethod {
    Marching,
    Crofton,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodalStatus {
    Ok,
    /// `u ≡ 0` on the cube; the measure is undefined and `value` is `+∞`.
    IdenticallyZero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalEstimate<T> {
    pub cube: Cube<T>,
    pub method: NodalMethod,
    pub value: T,
    /// Grid depth for marching, line count for Crofton.
    pub resolution: u64,
    /// `|E_d - E_{d-1}|` for marching, the Monte Carlo standard error for Crofton.
    pub error_indicator: T,
    pub seed: Option<u64>,
    /// Calibrated kinematic constant (Crofton only).
    pub kinematic_constant: Option<T>,
    pub status: NodalStatus,
}

impl<T: Real> NodalEstimate<T> {
    fn undefined(cube: &Cube<T>, method: NodalMethod, resolution: u64, seed: Option<u64>) -> Self {
        Self {
            cube: cube.clone(),
            method,
            value: T::infinity(),
            resolution,
            error_indicator: T::infinity(),
            seed,
            kinematic_constant: None,
            status: NodalStatus::IdenticallyZero,
        }
    }
}

const SNAP: f64 = 1e-9;
const PROBE_RATIO: f64 = 0.25;
pub const MAX_MARCHING_DEPTH_2D: u32 = 12;
pub const MAX_MARCHING_DEPTH_3D: u32 = 8;

type P3<T> = [T; 3];

fn lerp<T: Real>(a: &P3<T>, b: &P3<T>, t: T) -> P3<T> {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn sub<T: Real>(a: &P3<T>, b: &P3<T>) -> P3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross_norm<T: Real>(a: &P3<T>, b: &P3<T>) -> T {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    norm(&c)
}

/// Kuhn simplices of the unit `n`-cube as corner bitmasks.
fn kuhn_simplices(n: usize) -> Vec<Vec<usize>> {
    let perms: Vec<Vec<usize>> = match n {
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    };
    perms
        .into_iter()
        .map(|p| {
            let mut masks = vec![0usize];
            let mut m = 0usize;
            for axis in p {
                m |= 1 << axis;
                masks.push(m);
            }
            masks
        })
        .collect()
}

/// Zero section of the linear interpolant on one simplex, as a segment
/// (two points) or a planar polygon in cyclic order (three or four points).
fn simplex_section<T: Real>(pts: &[P3<T>], vals: &[T], out: &mut Vec<P3<T>>) {
    out.clear();
    let neg: Vec<bool> = vals.iter().map(|&v| v < T::zero()).collect();
    let k = neg.iter().filter(|&&b| b).count();
    if k == 0 || k == vals.len() {
        return;
    }
    let cut = |i: usize, j: usize| lerp(&pts[i], &pts[j], vals[i] / (vals[i] - vals[j]));
    if vals.len() == 3 {
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            if neg[i] != neg[j] {
                out.push(cut(i, j));
            }
        }
        return;
    }
    let (a, b): (Vec<usize>, Vec<usize>) = (0..4).partition(|&i| neg[i]);
    let (lone, rest) = match (a.len(), b.len()) {
        (1, _) => (a[0], b),
        (_, 1) => (b[0], a),
        _ => {
            let (p, q) = (a, b);
            out.push(cut(p[0], q[0]));
            out.push(cut(p[0], q[1]));
            out.push(cut(p[1], q[1]));
            out.push(cut(p[1], q[0]));
            return;
        }
    };
    for j in rest {
        out.push(cut(lone, j));
    }
}

fn section_measure<T: Real>(poly: &[P3<T>]) -> T {
    match poly.len() {
        2 => norm(&sub(&poly[1], &poly[0])),
        3 => cross_norm(&sub(&poly[1], &poly[0]), &sub(&poly[2], &poly[0])) / T::lit(2.0),
        4 => cross_norm(&sub(&poly[2], &poly[0]), &sub(&poly[3], &poly[1])) / T::lit(2.0),
        _ => T::zero(),
    }
}

struct Marcher<'a, T: Real> {
    u: &'a Field<T>,
    n: usize,
    lo: Vec<T>,
    h: T,
    cells: usize,
    values: Vec<T>,
    snap_scale: T,
    simplices: Vec<Vec<usize>>,
}

impl<'a, T: Real> Marcher<'a, T> {
    fn new(u: &'a Field<T>, q: &Cube<T>, depth: u32) -> Self {
        let n = q.dim();
        let cells = 1usize << depth;
        let lo: Vec<T> = (0..n).map(|k| q.lower(k)).collect();
        let h = q.side() / T::from_usize_lossy(cells);
        let stride = cells + 1;
        let total = stride.pow(n as u32);
        let values: Vec<T> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut x = vec![T::zero(); n];
                let mut rem = flat;
                for k in (0..n).rev() {
                    x[k] = lo[k] + h * T::from_usize_lossy(rem % stride);
                    rem /= stride;
                }
                u.value(&x)
            })
            .collect();
        let vmax = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut m = Self {
            u,
            n,
            lo,
            h,
            cells,
            values,
            snap_scale: vmax * T::lit(1e-6),
            simplices: kuhn_simplices(n),
        };
        m.snap_grid();
        m
    }

    fn max_abs(&self) -> T {
        self.snap_scale / T::lit(1e-6)
    }

    /// Snapped value: round-off zeros (relative to `h |∇u|`) become exact zeros.
    fn snap(&self, x: &[T], v: T, h: T) -> T {
        if v != T::zero() && v.abs() <= self.snap_scale {
            let g = norm(&self.u.gradient(x));
            if v.abs() <= T::lit(SNAP) * h * g {
                return T::zero();
            }
        }
        v
    }

    fn point(&self, idx: &[usize]) -> Vec<T> {
        (0..self.n).map(|k| self.lo[k] + self.h * T::from_usize_lossy(idx[k])).collect()
    }

    fn snap_grid(&mut self) {
        let stride = self.cells + 1;
        let n = self.n;
        let snapped: Vec<T> = self
            .values
            .par_iter()
            .enumerate()
            .map(|(flat, &v)| {
                if v == T::zero() || v.abs() > self.snap_scale {
                    return v;
                }
                let mut idx = vec![0usize; n];
                let mut rem = flat;
                for k in (0..n).rev() {
                    idx[k] = rem % stride;
                    rem /= stride;
                }
                self.snap(&self.point(&idx), v, self.h)
            })
            .collect();
        self.values = snapped;
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * (self.cells + 1) + i)
    }

    /// Measure contribution of the cell with lower corner index `base`.
    fn cell(&self, base: &[usize], sink: &mut Option<&mut Vec<Vec<P3<T>>>>, buf: &mut Vec<P3<T>>) -> T {
        let n = self.n;
        let corners = 1usize << n;
        let mut pts = [[T::zero(); 3]; 8];
        let mut vals = [T::zero(); 8];
        let mut idx = [0usize; 3];
        for c in 0..corners {
            for k in 0..n {
                idx[k] = base[k] + ((c >> k) & 1);
            }
            let p = self.point(&idx[..n]);
            pts[c][..n].copy_from_slice(&p);
            vals[c] = self.values[self.flat(&idx[..n])];
        }
        let any_neg = vals[..corners].iter().any(|&v| v < T::zero());
        let all_neg = vals[..corners].iter().all(|&v| v < T::zero());
        if any_neg && !all_neg {
            return self.sections(&pts[..corners], &vals[..corners], sink, buf);
        }
        let (mn, mx) = vals[..corners]
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
        let small = vals[..corners].iter().fold(T::infinity(), |m, v| m.min(v.abs()));
        if small < T::lit(PROBE_RATIO) * (mx - mn) {
            self.probe(&pts[0], sink, buf)
        } else {
            T::zero()
        }
    }

    fn sections(&self, pts: &[P3<T>], vals: &[T], sink: &mut Option<&mut Vec<Vec<P3<T>>>>, buf: &mut Vec<P3<T>>) -> T {
        let mut total = T::zero();
        let mut sp = [[T::zero(); 3]; 4];
        let mut sv = [T::zero(); 4];
        for s in &self.simplices {
            for (i, &m) in s.iter().enumerate() {
                sp[i] = pts[m];
                sv[i] = vals[m];
            }
            simplex_section(&sp[..s.len()], &sv[..s.len()], buf);
            if !buf.is_empty() {
                total += section_measure(buf);
                if let Some(out) = sink.as_deref_mut() {
                    out.push(buf.clone());
                }
            }
        }
        total
    }

    /// One level of refinement for a cell without a vertex sign change.
    fn probe(&self, lower: &P3<T>, sink: &mut Option<&mut Vec<Vec<P3<T>>>>, buf: &mut Vec<P3<T>>) -> T {
        let n = self.n;
        let h2 = self.h / T::lit(2.0);
        let side = 3usize;
        let count = side.pow(n as u32);
        let mut sub_vals = vec![T::zero(); count];
        let mut sub_pts = vec![[T::zero(); 3]; count];
        for (f, (sv, sp)) in sub_vals.iter_mut().zip(sub_pts.iter_mut()).enumerate() {
            let mut rem = f;
            let mut x = vec![T::zero(); n];
            for k in (0..n).rev() {
                x[k] = lower[k] + h2 * T::from_usize_lossy(rem % side);
                rem /= side;
            }
            sp[..n].copy_from_slice(&x);
            *sv = self.snap(&x, self.u.value(&x), h2);
        }
        let mut total = T::zero();
        let corners = 1usize << n;
        let mut pts = [[T::zero(); 3]; 8];
        let mut vals = [T::zero(); 8];
        for child in 0..corners {
            for c in 0..corners {
                let mut f = 0usize;
                for k in 0..n {
                    f = f * side + ((child >> k) & 1) + ((c >> k) & 1);
                }
                pts[c] = sub_pts[f];
                vals[c] = sub_vals[f];
            }
            total += self.sections(&pts[..corners], &vals[..corners], sink, buf);
        }
        total
    }

    fn slab(&self, i0: usize, mut sink: Option<&mut Vec<Vec<P3<T>>>>) -> T {
        let n = self.n;
        let mut buf = Vec::with_capacity(4);
        let inner = self.cells.pow(n as u32 - 1);
        let mut acc = Vec::with_capacity(inner);
        let mut base = vec![0usize; n];
        base[0] = i0;
        for f in 0..inner {
            let mut rem = f;
            for k in (1..n).rev() {
                base[k] = rem % self.cells;
                rem /= self.cells;
            }
            acc.push(self.cell(&base, &mut sink, &mut buf));
        }
        compensated_sum(acc)
    }

    fn measure(&self) -> T {
        let slabs: Vec<T> = (0..self.cells).into_par_iter().map(|i| self.slab(i, None)).collect();
        compensated_sum(slabs)
    }
}

fn check_marching<T: Real>(q: &Cube<T>, depth: u32) -> Result<()> {
    let n = q.dim();
    if n >= 4 {
        return Err(Error::Unsupported(format!("marching needs n in {{2, 3}}, got n = {n}; use crofton")));
    }
    let cap = if n == 2 { MAX_MARCHING_DEPTH_2D } else { MAX_MARCHING_DEPTH_3D };
    if depth == 0 || depth > cap {
        return invalid(format!("marching depth must lie in 1..={cap} for n = {n}, got {depth}"));
    }
    Ok(())
}

fn marching_value<T: Real>(u: &Field<T>, q: &Cube<T>, depth: u32) -> Option<T> {
    let m = Marcher::new(u, q, depth);
    if !(m.max_abs() > T::zero()) {
        return None;
    }
    Some(m.measure())
}

/// PL zero-set measure on a uniform `2^depth` grid.
pub fn nodal_measure_marching<T: Real>(u: &Field<T>, q: &Cube<T>, depth: u32) -> Result<NodalEstimate<T>> {
    check_marching(q, depth)?;
    if u.dim() != q.dim() {
        return invalid(format!("field dimension {} does not match cube dimension {}", u.dim(), q.dim()));
    }
    let Some(value) = marching_value(u, q, depth) else {
        return Ok(NodalEstimate::undefined(q, NodalMethod::Marching, depth as u64, None));
    };
    let coarse = marching_value(u, q, depth - 1).unwrap_or(value);
    let floor = value.abs() * T::lit(1e-12);
    Ok(NodalEstimate {
        cube: q.clone(),
        method: NodalMethod::Marching,
        value,
        resolution: depth as u64,
        error_indicator: (value - coarse).abs().max(floor),
        seed: None,
        kinematic_constant: None,
        status: NodalStatus::Ok,
    })
}

/// Zero-set segments of a planar field, for rendering.
pub fn nodal_segments_2d<T: Real>(u: &Field<T>, q: &Cube<T>, depth: u32) -> Result<Vec<[[T; 2]; 2]>> {
    if q.dim() != 2 {
        return invalid("segments are only produced for planar fields");
    }
    check_marching(q, depth)?;
    let m = Marcher::new(u, q, depth);
    let mut polys = Vec::new();
    for i in 0..m.cells {
        m.slab(i, Some(&mut polys));
    }
    Ok(polys
        .into_iter()
        .filter(|p| p.len() == 2)
        .map(|p| [[p[0][0], p[0][1]], [p[1][0], p[1][1]]])
        .collect())
}

/// Steps per line used by the sign scan.
pub const SCAN_STEPS: usize = 2048;
const CHUNK: u64 = 4096;
const CALIBRATION_LINES: u64 = 1 << 20;
const CALIBRATION_SEED: u64 = 0x6b69_6e65_6d61;

#[derive(Clone, Copy, Debug)]
struct Line {
    point: [f64; 8],
    dir: [f64; 8],
}

fn generate_line(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Line {
    let mut dir = [0.0; 8];
    loop {
        for d in dir.iter_mut().take(n) {
            *d = rng.sample(StandardNormal);
        }
        let r = norm(&dir[..n]);
        if r > 1e-12 {
            dir[..n].iter_mut().for_each(|d| *d /= r);
            break;
        }
    }
    let mut off = [0.0; 8];
    loop {
        for o in off.iter_mut().take(n) {
            *o = rng.sample(StandardNormal);
        }
        let along: f64 = (0..n).map(|k| off[k] * dir[k]).sum();
        (0..n).for_each(|k| off[k] -= along * dir[k]);
        let r = norm(&off[..n]);
        if r > 1e-12 {
            let rho = radius * rng.random::<f64>().powf(1.0 / (n as f64 - 1.0));
            off[..n].iter_mut().for_each(|o| *o *= rho / r);
            break;
        }
    }
    Line { point: off, dir }
}

/// Parameter interval of the line inside the cube centered at the origin.
fn clip(line: &Line, n: usize, half: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..n {
        let (p, d) = (line.point[k], line.dir[k]);
        if d.abs() < 1e-300 {
            if p.abs() > half {
                return None;
            }
            continue;
        }
        let a = (-half - p) / d;
        let b = (half - p) / d;
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 > t0).then_some((t0, t1))
}

struct LineScan<'a, T: Real> {
    u: &'a Field<T>,
    center: &'a [T],
    half: T,
}

impl<T: Real> LineScan<'_, T> {
    fn at(&self, line: &Line, t: f64) -> Vec<T> {
        let mut x = vec![T::zero(); self.center.len()];
        self.at_into(line, t, &mut x);
        x
    }

    fn at_into(&self, line: &Line, t: f64, out: &mut [T]) {
        for (k, o) in out.iter_mut().enumerate() {
            let c = self.center[k] + T::lit(line.point[k] + t * line.dir[k]);
            // clip rounding must not leave the closed cube
            *o = c.max(self.center[k] - self.half).min(self.center[k] + self.half);
        }
    }

    /// Sign of `u` with values below the snap threshold counted as zero (positive).
    /// Only negative values can flip, so the gradient is needed for those alone.
    fn negative(&self, x: &[T], step: T, grad: &mut [T]) -> bool {
        let v = self.u.value(x);
        if !(v < T::zero()) {
            return false;
        }
        self.u.gradient_into(x, grad);
        -v > T::lit(SNAP) * step * norm(grad)
    }

    /// Sign changes along the clipped line, zero counted as positive.
    fn count(&self, line: &Line) -> u64 {
        let n = self.center.len();
        let Some((t0, t1)) = clip(line, n, self.half.as_f64()) else {
            return 0;
        };
        let dt = (t1 - t0) / SCAN_STEPS as f64;
        let step = T::lit(dt);
        let mut x = vec![T::zero(); n];
        let mut grad = vec![T::zero(); n];
        self.at_into(line, t0, &mut x);
        let mut prev = self.negative(&x, step, &mut grad);
        let mut changes = 0;
        for i in 1..=SCAN_STEPS {
            let t = if i == SCAN_STEPS { t1 } else { t0 + dt * i as f64 };
            self.at_into(line, t, &mut x);
            let neg = self.negative(&x, step, &mut grad);
            if neg != prev {
                changes += 1;
            }
            prev = neg;
        }
        changes
    }

    /// Zero locations along the clipped line, refined by bisection.
    fn roots(&self, line: &Line, tol: f64) -> Vec<Vec<T>> {
        let half = self.half.as_f64();
        let Some((t0, t1)) = clip(line, self.center.len(), half) else {
            return Vec::new();
        };
        let dt = (t1 - t0) / SCAN_STEPS as f64;
        let step = T::lit(dt);
        let mut grad = vec![T::zero(); self.center.len()];
        let mut neg_at = |t: f64| self.negative(&self.at(line, t), step, &mut grad);
        let mut out = Vec::new();
        let mut a = t0;
        let mut na = neg_at(a);
        for i in 1..=SCAN_STEPS {
            let b = if i == SCAN_STEPS { t1 } else { t0 + dt * i as f64 };
            let nb = neg_at(b);
            if na != nb {
                let (mut lo, mut hi) = (a, b);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if neg_at(mid) == na {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push(self.at(line, 0.5 * (lo + hi)));
            }
            a = b;
            na = nb;
        }
        out
    }
}

fn line_chunks(lines: u64) -> Vec<(u64, u64)> {
    (0..lines.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(lines - c * CHUNK)))
        .collect()
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Integer count totals `(Σ c, Σ c²)`: exact, hence independent of scheduling.
fn crofton_counts<F: Fn(&Line) -> u64 + Sync>(n: usize, radius: f64, lines: u64, seed: u64, count: F) -> (u64, u64) {
    line_chunks(lines)
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut rng = chunk_rng(seed, chunk);
            let (mut s, mut s2) = (0u64, 0u64);
            for _ in 0..len {
                let c = count(&generate_line(&mut rng, n, radius));
                s += c;
                s2 += c * c;
            }
            (s, s2)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn mean_and_se(sum: u64, sum2: u64, lines: u64) -> (f64, f64) {
    let m = lines as f64;
    let mean = sum as f64 / m;
    let var = (sum2 as f64 / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Kinematic constant `κ_n` with `H^{n-1} = κ_n R^{n-1} E[#crossings]` for
/// lines drawn from the disk of radius `R` orthogonal to a uniform direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicCalibration {
    pub dim: usize,
    pub constant: f64,
    pub relative_error: f64,
    pub lines: u64,
    pub seed: u64,
}

/// Calibrates against `u = x_1` on `[-1, 1]^n`, whose zero set has measure
/// `2^{n-1}`. Counts for an affine field are exact from the clipped endpoints.
pub fn kinematic_calibration(n: usize) -> KinematicCalibration {
    static CACHE: OnceLock<Mutex<HashMap<usize, KinematicCalibration>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("calibration cache poisoned").get(&n) {
        return *c;
    }
    let radius = (n as f64).sqrt();
    let (s, s2) = crofton_counts(n, radius, CALIBRATION_LINES, CALIBRATION_SEED, |line| {
        match clip(line, n, 1.0) {
            Some((t0, t1)) => {
                let a = line.point[0] + t0 * line.dir[0];
                let b = line.point[0] + t1 * line.dir[0];
                u64::from((a < 0.0) != (b < 0.0))
            }
            None => 0,
        }
    });
    let (mean, se) = mean_and_se(s, s2, CALIBRATION_LINES);
    let area = 2f64.powi(n as i32 - 1);
    let cal = KinematicCalibration {
        dim: n,
        constant: area / (radius.powi(n as i32 - 1) * mean),
        relative_error: se / mean,
        lines: CALIBRATION_LINES,
        seed: CALIBRATION_SEED,
    };
    cache.lock().expect("calibration cache poisoned").insert(n, cal);
    cal
}

pub const MIN_CROFTON_LINES: u64 = 1000;

/// Cauchy–Crofton estimate from `lines` random lines through the bounding ball of `q`.
pub fn nodal_measure_crofton<T: Real>(u: &Field<T>, q: &Cube<T>, lines: u64, seed: u64) -> Result<NodalEstimate<T>> {
    let n = q.dim();
    if lines < MIN_CROFTON_LINES {
        return invalid(format!("crofton needs at least {MIN_CROFTON_LINES} lines, got {lines}"));
    }
    if n > 8 {
        return Err(Error::Unsupported(format!("crofton supports n <= 8, got {n}")));
    }
    if u.dim() != n {
        return invalid(format!("field dimension {} does not match cube dimension {}", u.dim(), n));
    }
    if identically_zero(u, q) {
        return Ok(NodalEstimate::undefined(q, NodalMethod::Crofton, lines, Some(seed)));
    }
    let half = q.half_side().as_f64();
    let radius = half * (n as f64).sqrt();
    let scan = LineScan { u, center: q.center(), half: q.half_side() };
    let (s, s2) = crofton_counts(n, radius, lines, seed, |line| scan.count(line));
    let (mean, se) = mean_and_se(s, s2, lines);
    let cal = kinematic_calibration(n);
    let scale = cal.constant * radius.powi(n as i32 - 1);
    let value = scale * mean;
    let rel = if mean > 0.0 { se / mean } else { 0.0 };
    let err = value * (rel * rel + cal.relative_error * cal.relative_error).sqrt();
    Ok(NodalEstimate {
        cube: q.clone(),
        method: NodalMethod::Crofton,
        value: T::lit(value),
        resolution: lines,
        error_indicator: T::lit(err.max(scale * se)),
        seed: Some(seed),
        kinematic_constant: Some(T::lit(cal.constant)),
        status: NodalStatus::Ok,
    })
}

/// Zeros of `u` along the first `lines` Crofton lines for `seed`, for inspection.
pub fn crofton_line_zeros<T: Real>(u: &Field<T>, q: &Cube<T>, lines: u64, seed: u64) -> Vec<Vec<T>> {
    let n = q.dim();
    let radius = q.half_side().as_f64() * (n as f64).sqrt();
    let scan = LineScan { u, center: q.center(), half: q.half_side() };
    let mut out = Vec::new();
    for (chunk, len) in line_chunks(lines) {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..len {
            out.extend(scan.roots(&generate_line(&mut rng, n, radius), 1e-10));
        }
    }
    out
}

fn identically_zero<T: Real>(u: &Field<T>, q: &Cube<T>) -> bool {
    let n = q.dim();
    let per = 9usize;
    let total = per.pow(n as u32);
    (0..total).all(|flat| {
        let idx = crate::geom::unflatten(flat, per, n);
        let x: Vec<T> = (0..n)
            .map(|k| q.lower(k) + q.side() * T::from_usize_lossy(idx[k]) / T::from_usize_lossy(per - 1))
            .collect();
        u.value(&x) == T::zero()
    })
}

/// Resolution knobs for nodal measurements driven by other experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub method: NodalMethod,
    pub depth: u32,
    pub lines: u64,
    pub seed: u64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            method: NodalMethod::Marching,
            depth: 8,
            lines: 100_000,
            seed: 1,
        }
    }
}

/// Marching when requested and supported, Crofton otherwise.
pub fn nodal_measure<T: Real>(u: &Field<T>, q: &Cube<T>, cfg: &MeasureConfig) -> Result<NodalEstimate<T>> {
    match cfg.method {
        NodalMethod::Marching if q.dim() <= 3 => nodal_measure_marching(u, q, cfg.depth),
        _ => nodal_measure_crofton(u, q, cfg.lines, cfg.seed),
    }
}

/// One point of the empirical `F(N)` scatter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThvPoint<T> {
    pub index: T,
    pub density: T,
    pub nodal: NodalEstimate<T>,
}

pub fn thv_datapoint<T: Real>(
    u: &Field<T>,
    q: &Cube<T>,
    grid: &CubeGrid,
    sup: &SupConfig,
    measure: &MeasureConfig,
) -> Result<ThvPoint<T>> {
    let nodal = nodal_measure(u, q, measure)?;
    let index = match doubling_index_cube(u, q, grid, sup) {
        Ok(rep) => rep.index,
        Err(Error::DegenerateField(_)) if nodal.status == NodalStatus::IdenticallyZero => T::nan(),
        Err(e) => return Err(e),
    };
    let density = nodal.value / q.diam().powi(q.dim() as i32 - 1);
    Ok(ThvPoint { index, density, nodal })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    /// `(λ, measured volume)` pairs.
    pub points: Vec<(T, T)>,
    pub fitted_exponent: T,
    pub intercept: T,
    pub fit_residual: T,
    pub estimates: Vec<NodalEstimate<T>>,
}

pub const MIN_FAMILY: usize = 4;
pub const MIN_SPREAD: f64 = 8.0;

/// Fits `log V` against `log λ` for eigenfunctions measured on `[0, 2π]^n`.
pub fn yau_scaling_fit<T: Real>(family: &[Field<T>], cfg: &MeasureConfig) -> Result<ScalingFit<T>> {
    if family.len() < MIN_FAMILY {
        return Err(Error::DegenerateInput(format!(
            "scaling fit needs at least {MIN_FAMILY} eigenfunctions, got {}",
            family.len()
        )));
    }
    let mut lambdas = Vec::with_capacity(family.len());
    for (i, f) in family.iter().enumerate() {
        lambdas.push(f.eigenvalue().ok_or_else(|| {
            Error::InvalidArgument(format!("family member {i} is not an eigenfunction"))
        })?);
    }
    let lo = lambdas.iter().copied().fold(T::infinity(), T::min);
    let hi = lambdas.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi >= lo * T::lit(MIN_SPREAD)) {
        return Err(Error::DegenerateInput(format!(
            "eigenvalues must span a factor of at least {MIN_SPREAD}, got [{lo}, {hi}]"
        )));
    }
    let mut estimates = Vec::with_capacity(family.len());
    for f in family {
        let q = Cube::from_bounds(T::zero(), T::TAU(), f.dim())?;
        let est = nodal_measure(f, &q, cfg)?;
        if est.status != NodalStatus::Ok || !(est.value > T::zero()) {
            return Err(Error::DegenerateField("family member has no measurable zero set".into()));
        }
        estimates.push(est);
    }
    let volumes: Vec<T> = estimates.iter().map(|e| e.value).collect();
    let fit = fit_log_log(&lambdas, &volumes)?;
    Ok(ScalingFit {
        points: lambdas.into_iter().zip(volumes).collect(),
        fitted_exponent: fit.slope,
        intercept: fit.intercept,
        fit_residual: fit.residual,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::sin_torus;
    use std::f64::consts::PI;

    fn circle() -> Field<f64> {
        Field::Quadric { diag: vec![1.0, 1.0], offset: -0.25 }
    }

    fn unit(n: usize) -> Cube<f64> {
        Cube::from_bounds(-1.0, 1.0, n).unwrap()
    }

    #[test]
    fn circle_length() {
        let e = nodal_measure_marching(&circle(), &unit(2), 8).unwrap();
        assert!((e.value - PI).abs() / PI < 5e-3, "{}", e.value);
        assert!(e.error_indicator < 1e-2);
    }

    #[test]
    fn plane_patch_is_exact() {
        let u = Field::Affine { coeffs: vec![1.0, 0.0, 0.0], offset: 0.0 };
        for depth in [1, 3] {
            let e = nodal_measure_marching(&u, &unit(3), depth).unwrap();
            assert!((e.value - 4.0).abs() < 1e-12, "{}", e.value);
        }
    }

    #[test]
    fn tilted_plane_area() {
        let u = Field::Affine { coeffs: vec![1.0, 1.0, 0.0], offset: 0.0 };
        let e = nodal_measure_marching(&u, &unit(3), 4).unwrap();
        assert!((e.value - 4.0 * 2f64.sqrt()).abs() < 1e-12, "{}", e.value);
    }

    #[test]
    fn torus_lines_on_grid() {
        let u = sin_torus::<f64>(2, 4).unwrap();
        let q = Cube::from_bounds(0.0, std::f64::consts::TAU, 2).unwrap();
        let e = nodal_measure_marching(&u, &q, 8).unwrap();
        assert!((e.value - 32.0 * PI).abs() / (32.0 * PI) < 1e-2, "{}", e.value);
    }

    #[test]
    fn marching_rejects_high_dimension() {
        let u = Field::Constant { dim: 4, value: 1.0 };
        assert!(matches!(nodal_measure_marching(&u, &unit(4), 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_field_is_undefined() {
        let u = Field::Constant { dim: 2, value: 0.0 };
        let e = nodal_measure_marching(&u, &unit(2), 4).unwrap();
        assert_eq!(e.status, NodalStatus::IdenticallyZero);
        assert!(e.value.is_infinite());
    }

    #[test]
    fn calibration_matches_closed_form() {
        // κ_n = ω_{n-1} / E|cos|, with E|cos| the mean of |d·e| over the sphere
        for (n, exact) in [(2usize, PI), (3, 2.0 * PI)] {
            let c = kinematic_calibration(n);
            assert!((c.constant - exact).abs() / exact < 5.0 * c.relative_error + 1e-3, "n={n}: {}", c.constant);
        }
    }

    #[test]
    fn crofton_hyperplane_and_empty() {
        for n in [2, 3] {
            let mut coeffs = vec![0.0; n];
            coeffs[0] = 1.0;
            let u = Field::Affine { coeffs, offset: 0.0 };
            let e = nodal_measure_crofton(&u, &unit(n), 100_000, 7).unwrap();
            let exact = 2f64.powi(n as i32 - 1);
            assert!((e.value - exact).abs() / exact < 0.02, "n={n}: {}", e.value);
        }
        let u = Field::Affine { coeffs: vec![1.0, 0.0], offset: 2.0 };
        let q = Cube::from_bounds(0.0, 1.0, 2).unwrap();
        assert_eq!(nodal_measure_crofton(&u, &q, 5_000, 3).unwrap().value, 0.0);
    }

    #[test]
    fn crofton_is_deterministic() {
        let a = nodal_measure_crofton(&circle(), &unit(2), 20_000, 11).unwrap();
        let b = nodal_measure_crofton(&circle(), &unit(2), 20_000, 11).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!((a.value - PI).abs() / PI < 0.03);
    }

    #[test]
    fn crofton_rejects_few_lines() {
        assert!(nodal_measure_crofton(&circle(), &unit(2), 999, 1).is_err());
    }

    #[test]
    fn line_zeros_lie_on_zero_set() {
        let zs = crofton_line_zeros(&circle(), &unit(2), 50, 5);
        assert!(!zs.is_empty());
        for z in zs {
            assert!(circle().value(&z).abs() < 1e-9);
        }
    }

    #[test]
    fn segments_cover_circle() {
        let segs = nodal_segments_2d(&circle(), &unit(2), 6).unwrap();
        let total: f64 = segs.iter().map(|s| ((s[1][0] - s[0][0]).powi(2) + (s[1][1] - s[0][1]).powi(2)).sqrt()).sum();
        let e = nodal_measure_marching(&circle(), &unit(2), 6).unwrap();
        assert!((total - e.value).abs() < 1e-12);
    }

    #[test]
    fn yau_fit_rejects_constant_spectrum() {
        let f = sin_torus::<f64>(2, 2).unwrap();
        let fam = vec![f.clone(), f.clone(), f.clone(), f];
        assert!(matches!(yau_scaling_fit(&fam, &MeasureConfig::default()), Err(Error::DegenerateInput(_))));
    }
}
