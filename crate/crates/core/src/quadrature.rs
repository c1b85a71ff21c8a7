//! Gauss–Legendre rules and product quadrature on spheres `S^{n-1}`.

use serde::{Deserialize, Serialize};

use crate::scalar::{compensated_sum, Real};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    let m = order.max(1);
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    // Newton on P_m in f64, starting from the Tricomi approximation.
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[m - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[m - 1 - i] = T::lit(w);
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    (nodes, weights)
}

/// Node counts for the sphere rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Trapezoid nodes on the circle when `n = 2`.
    pub circle_nodes: usize,
    /// Polar Gauss nodes for the first polar angle when `n >= 3`.
    pub polar_nodes: usize,
    /// Azimuthal trapezoid nodes when `n >= 3`.
    pub azimuth_nodes: usize,
    /// Polar nodes for each additional angle when `n >= 4`.
    pub extra_polar_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            circle_nodes: 256,
            polar_nodes: 64,
            azimuth_nodes: 128,
            extra_polar_nodes: 24,
        }
    }
}

impl QuadratureConfig {
    fn halved(&self) -> Self {
        Self {
            circle_nodes: (self.circle_nodes / 2).max(4),
            polar_nodes: (self.polar_nodes / 2).max(2),
            azimuth_nodes: (self.azimuth_nodes / 2).max(4),
            extra_polar_nodes: (self.extra_polar_nodes / 2).max(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub name: String,
    pub nodes: usize,
}

/// Product rule on the unit sphere: unit vectors plus weights summing to `|S^{n-1}|`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature<T> {
    dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
    scheme: QuadratureScheme,
}

fn circle_rule(m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let w = std::f64::consts::TAU / m as f64;
    let pts = (0..m)
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / m as f64;
            vec![th.cos(), th.sin()]
        })
        .collect();
    (pts, vec![w; m])
}

/// Rule for `∫_{-1}^{1} (1 - z²)^{(d-3)/2} g(z) dz`, exact for polynomial `g` of high degree.
fn polar_rule(d: usize, count: usize) -> (Vec<f64>, Vec<f64>) {
    if d % 2 == 1 {
        let (z, w) = gauss_legendre::<f64>(count);
        let p = ((d - 3) / 2) as i32;
        let w = z.iter().zip(&w).map(|(&z, &w)| w * (1.0 - z * z).powi(p)).collect();
        (z, w)
    } else {
        // Gauss–Chebyshev of the second kind absorbs the sqrt(1 - z²) factor.
        let p = ((d - 4) / 2) as i32;
        let h = std::f64::consts::PI / (count + 1) as f64;
        let mut z = Vec::with_capacity(count);
        let mut w = Vec::with_capacity(count);
        for i in 1..=count {
            let a = i as f64 * h;
            let zi = a.cos();
            z.push(zi);
            w.push(h * a.sin() * a.sin() * (1.0 - zi * zi).powi(p));
        }
        (z, w)
    }
}

fn build_rule(n: usize, cfg: &QuadratureConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    if n == 2 {
        return circle_rule(cfg.circle_nodes);
    }
    let (mut pts, mut wts) = circle_rule(cfg.azimuth_nodes);
    for d in 3..=n {
        let count = if d == 3 { cfg.polar_nodes } else { cfg.extra_polar_nodes };
        let (z, zw) = polar_rule(d, count);
        let mut np = Vec::with_capacity(pts.len() * z.len());
        let mut nw = Vec::with_capacity(pts.len() * z.len());
        for (&zi, &wi) in z.iter().zip(&zw) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for (p, &w) in pts.iter().zip(&wts) {
                let mut q: Vec<f64> = p.iter().map(|&c| c * s).collect();
                q.push(zi);
                np.push(q);
                nw.push(w * wi);
            }
        }
        pts = np;
        wts = nw;
    }
    (pts, wts)
}

impl<T: Real> SphereQuadrature<T> {
    pub fn new(dim: usize, cfg: &QuadratureConfig) -> Self {
        assert!(dim >= 2, "sphere quadrature needs dimension >= 2");
        let (pts, wts) = build_rule(dim, cfg);
        let name = if dim == 2 {
            "periodic-trapezoid".to_string()
        } else {
            format!("gauss-legendre-product-s{}", dim - 1)
        };
        Self {
            dim,
            scheme: QuadratureScheme { name, nodes: wts.len() },
            points: pts.iter().flatten().map(|&v| T::lit(v)).collect(),
            weights: wts.iter().map(|&w| T::lit(w)).collect(),
        }
    }

    /// Same scheme with every node count halved; used for error indicators.
    pub fn coarse(dim: usize, cfg: &QuadratureConfig) -> Self {
        Self::new(dim, &cfg.halved())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> &QuadratureScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `∫_{|x - center| = r} f(x) dS`.
    pub fn integrate<F: Fn(&[T]) -> T>(&self, center: &[T], r: T, f: F) -> T {
        let n = self.dim;
        let mut x = vec![T::zero(); n];
        let terms = self.weights.iter().enumerate().map(|(i, &w)| {
            let p = &self.points[i * n..(i + 1) * n];
            for k in 0..n {
                x[k] = center[k] + r * p[k];
            }
            w * f(&x)
        });
        compensated_sum(terms.collect::<Vec<_>>()) * r.powi(n as i32 - 1)
    }
}
