//! Propagation of smallness from Cauchy data on a cube face to the
//! concentric half cube: measured exponents and envelope checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{Field, Part};
use crate::fit::fit_log_log;
use crate::geom::{AxisBox, Cube, Region};
use crate::growth::{sup_norm, FnObjective, SupConfig};
use crate::scalar::{norm, Real};

/// Axis-aligned face `{x_axis = lower/upper bound}` of a cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn of<T: Real>(&self, q: &Cube<T>) -> Result<AxisBox<T>> {
        if self.axis >= q.dim() {
            return invalid(format!("face axis {} out of range for dimension {}", self.axis, q.dim()));
        }
        Ok(q.face(self.axis, self.upper))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyData<T> {
    pub sup_value: T,
    /// `sup_F r |∇u|` with `r` the side of the cube.
    pub sup_scaled_gradient: T,
}

impl<T: Real> CauchyData<T> {
    pub fn epsilon(&self) -> T {
        self.sup_value.max(self.sup_scaled_gradient)
    }
}

pub fn cauchy_data_on_face<T: Real>(u: &Field<T>, q: &Cube<T>, face: Face, cfg: &SupConfig) -> Result<CauchyData<T>> {
    let region = Region::Box(face.of(q)?);
    let r = q.side();
    let value = sup_norm(u, &region, cfg).value;
    let grad = FnObjective {
        dim: q.dim(),
        f: |x: &[T]| r * norm(&u.gradient(x)),
        step: 1e-7 * r.as_f64(),
    };
    let gradient = sup_norm(&grad, &region, cfg).value;
    Ok(CauchyData {
        sup_value: value,
        sup_scaled_gradient: gradient,
    })
}

/// Parameterized harmonic families with a closed-form normalization on `[0, 1]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `sin(kx) sinh(ky) / sinh(k)`.
    Sinh { k_values: Vec<f64> },
    /// `Im (x + iy)^k`, vanishing on `{y = 0}`.
    HarmonicIm { degrees: Vec<u32> },
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Sinh { .. } => "sinh",
            Family::HarmonicIm { .. } => "harmonic_im",
        }
    }

    pub fn members<T: Real>(&self) -> Result<Vec<(T, Field<T>)>> {
        match self {
            Family::Sinh { k_values } => Ok(k_values
                .iter()
                .map(|&k| (T::lit(k), Field::SinhMode { k: T::lit(k) }))
                .collect()),
            Family::HarmonicIm { degrees } => degrees
                .iter()
                .map(|&d| Ok((T::lit(d as f64), crate::fields::make_harmonic_poly(2, d, Part::Im)?)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessSample<T> {
    pub parameter: T,
    pub epsilon: T,
    pub sup_half: T,
    /// Normalizing factor `1 / sup_q |u|` applied to the member.
    pub normalization: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport<T> {
    pub cube: Cube<T>,
    pub face: Face,
    pub family: String,
    /// Sorted by `ε` decreasing.
    pub samples: Vec<SmallnessSample<T>>,
    /// Parameters of members dropped because `ε = 0`.
    pub excluded: Vec<T>,
    pub fitted_alpha: T,
    pub fitted_c: T,
    /// `max_i sup_i / ε_i^α` at the fitted `α`.
    pub envelope_c: T,
    pub fit_residual: T,
}

pub const MIN_MEMBERS: usize = 4;

fn measure_member<T: Real>(
    parameter: T,
    u: &Field<T>,
    q: &Cube<T>,
    face: Face,
    cfg: &SupConfig,
) -> Result<Option<SmallnessSample<T>>> {
    let sup_q = sup_norm(u, &Region::from(q), cfg).value;
    if !(sup_q > T::zero()) {
        return Ok(None);
    }
    let normalization = T::one() / sup_q;
    let v = Field::Scaled { factor: normalization, inner: Box::new(u.clone()) };
    let epsilon = cauchy_data_on_face(&v, q, face, cfg)?.epsilon();
    if !(epsilon > T::zero()) {
        return Ok(None);
    }
    let half = q.scaled(T::lit(0.5));
    let sup_half = sup_norm(&v, &Region::from(&half), cfg).value;
    Ok(Some(SmallnessSample { parameter, epsilon, sup_half, normalization }))
}

pub fn smallness_experiment<T: Real>(
    members: &[(T, Field<T>)],
    q: &Cube<T>,
    face: Face,
    family: &str,
    cfg: &SupConfig,
) -> Result<SmallnessReport<T>> {
    if members.len() < MIN_MEMBERS {
        return Err(Error::DegenerateInput(format!(
            "smallness experiment needs at least {MIN_MEMBERS} members, got {}",
            members.len()
        )));
    }
    face.of(q)?;
    let measured = members
        .par_iter()
        .map(|(p, u)| measure_member(*p, u, q, face, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    for ((p, _), m) in members.iter().zip(measured) {
        match m {
            Some(s) if s.sup_half > T::zero() => samples.push(s),
            _ => excluded.push(*p),
        }
    }
    if samples.len() < 2 {
        return Err(Error::DegenerateInput("fewer than two members with positive Cauchy data".into()));
    }
    samples.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap_or(std::cmp::Ordering::Equal));
    let eps: Vec<T> = samples.iter().map(|s| s.epsilon).collect();
    let sups: Vec<T> = samples.iter().map(|s| s.sup_half).collect();
    let fit = fit_log_log(&eps, &sups)?;
    let envelope_c = samples
        .iter()
        .map(|s| s.sup_half / s.epsilon.powf(fit.slope))
        .fold(T::zero(), T::max);
    Ok(SmallnessReport {
        cube: q.clone(),
        face,
        family: family.to_string(),
        samples,
        excluded,
        fitted_alpha: fit.slope,
        fitted_c: fit.prefactor(),
        envelope_c,
        fit_residual: fit.residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck<T> {
    pub c: T,
    pub alpha: T,
    /// `C ε_i^α - sup_i` per sample.
    pub slack: Vec<T>,
    pub holds: bool,
}

pub fn smallness_bound_check<T: Real>(report: &SmallnessReport<T>, c: T, alpha: T) -> Result<BoundCheck<T>> {
    if report.samples.is_empty() {
        return invalid("bound check needs a nonempty report");
    }
    let slack: Vec<T> = report
        .samples
        .iter()
        .map(|s| c * s.epsilon.powf(alpha) - s.sup_half)
        .collect();
    // Relative rounding allowance for the envelope constant, which is tight at one sample.
    let holds = slack
        .iter()
        .zip(&report.samples)
        .all(|(&sl, s)| sl >= -T::lit(1e-12) * s.sup_half);
    Ok(BoundCheck { c, alpha, slack, holds })
}
