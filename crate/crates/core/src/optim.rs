//! Derivative-free local minimization used by the width and covering searches.

use crate::scalar::Real;

pub(crate) struct NelderMead<T> {
    pub max_iter: usize,
    pub ftol: T,
    pub xtol: T,
}

impl<T: Real> Default for NelderMead<T> {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            ftol: T::lit(1e-15),
            xtol: T::lit(1e-13),
        }
    }
}

impl<T: Real> NelderMead<T> {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex of size `step`.
    pub fn minimize<F>(&self, f: F, x0: &[T], step: T) -> (Vec<T>, T)
    where
        F: Fn(&[T]) -> T,
    {
        let n = x0.len();
        let mut pts: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step;
            pts.push(p);
        }
        let mut vals: Vec<T> = pts.iter().map(|p| f(p)).collect();

        let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
        for _ in 0..self.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            let spread = (vals[n] - vals[0]).abs();
            let size = pts[1..]
                .iter()
                .map(|p| crate::scalar::dist(p, &pts[0]))
                .fold(T::zero(), T::max);
            if spread <= self.ftol * (T::one() + vals[0].abs()) && size <= self.xtol {
                break;
            }
            if size <= self.xtol * T::lit(1e-3) {
                break;
            }

            let mut centroid = vec![T::zero(); n];
            for p in &pts[..n] {
                for (c, &v) in centroid.iter_mut().zip(p) {
                    *c += v;
                }
            }
            let inv = T::one() / T::from_usize_lossy(n);
            centroid.iter_mut().for_each(|c| *c *= inv);

            let along = |t: T| -> Vec<T> {
                centroid
                    .iter()
                    .zip(&pts[n])
                    .map(|(&c, &w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = f(&xr);
            if fr < vals[0] {
                let xe = along(gamma);
                let fe = f(&xe);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
            } else {
                let (xc, fc) = if fr < vals[n] {
                    let xc = along(rho);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = f(&xc);
                    (xc, fc)
                };
                if fc < vals[n].min(fr) {
                    pts[n] = xc;
                    vals[n] = fc;
                } else {
                    let best = pts[0].clone();
                    for i in 1..=n {
                        for (v, &b) in pts[i].iter_mut().zip(&best) {
                            *v = b + sigma * (*v - b);
                        }
                        vals[i] = f(&pts[i]);
                    }
                }
            }
        }
        let best = (0..=n)
            .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        (pts[best].clone(), vals[best])
    }
}
