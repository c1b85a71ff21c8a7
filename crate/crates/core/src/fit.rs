//! Least-squares power laws `y ≈ C x^p` fitted on log–log axes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit<T> {
    pub slope: T,
    /// Natural-log intercept, so `C = exp(intercept)`.
    pub intercept: T,
    /// Root-mean-square residual in natural-log units.
    pub residual: T,
}

impl<T: Real> LogLogFit<T> {
    pub fn prefactor(&self) -> T {
        self.intercept.exp()
    }

    pub fn predict(&self, x: T) -> T {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn fit_log_log<T: Real>(xs: &[T], ys: &[T]) -> Result<LogLogFit<T>> {
    if xs.len() != ys.len() {
        return invalid(format!("fit needs equal lengths, got {} and {}", xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return invalid("fit needs at least two points");
    }
    if xs.iter().chain(ys).any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return invalid("log-log fit needs positive finite values");
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let m = T::from_usize_lossy(lx.len());
    let mx = lx.iter().copied().sum::<T>() / m;
    let my = ly.iter().copied().sum::<T>() / m;
    let sxx: T = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if !(sxx > T::zero()) {
        return invalid("fit abscissae have zero spread");
    }
    let sxy: T = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: T = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (ss / m).sqrt(),
    })
}
