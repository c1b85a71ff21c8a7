//! Explicit harmonic functions and flat-torus Laplace eigenfunctions with
//! closed-form gradients and exact ground-truth metadata.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Real or imaginary part of `(x_1 + i x_2)^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Re,
    Im,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    HarmonicPoly,
    TorusEigen,
    LiftedEigen,
    Custom,
}

/// Evaluable scalar field. The serialized form is the human-readable
/// descriptor used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field<T> {
    /// `Re` or `Im` of `(x_1 + i x_2)^degree` on `R^dim`.
    HarmonicPoly { dim: usize, degree: u32, part: Part },
    /// `prod_j trig_j(m_j x_j)` on the flat torus `[0, 2π]^n`.
    TorusEigen { modes: Vec<i64>, parity: Vec<Trig> },
    /// `φ(x) exp(sqrt(λ) t)` on `R^{n+1}`, `t` being the last coordinate.
    Lifted { base: Box<Field<T>> },
    Constant { dim: usize, value: T },
    /// `coeffs · x + offset`.
    Affine { coeffs: Vec<T>, offset: T },
    /// `Σ diag_j x_j² + offset`.
    Quadric { diag: Vec<T>, offset: T },
    /// `sin(k x) sinh(k y) / sinh(k)`, harmonic on `R^2`.
    SinhMode { k: T },
    Scaled { factor: T, inner: Box<Field<T>> },
    /// `x ↦ inner(factor · x)`.
    Dilated { factor: T, inner: Box<Field<T>> },
}

/// Ground truths known in closed form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMetadata<T> {
    pub degree: Option<u32>,
    pub eigenvalue: Option<T>,
    /// Constant value of the frequency about the origin.
    pub frequency_at_origin: Option<T>,
    /// Doubling index about the origin, equal for every radius.
    pub doubling_at_origin: Option<T>,
    /// `H^{n-1}` of the zero set per fundamental domain `[0, 2π)^n`.
    pub nodal_per_period: Option<T>,
}

/// Bounds applied to configured fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldLimits {
    /// Largest polynomial degree / mode number accepted.
    pub max_degree: u32,
}

impl Default for FieldLimits {
    fn default() -> Self {
        Self { max_degree: 16 }
    }
}

pub fn make_harmonic_poly<T: Real>(n: usize, k: u32, part: Part) -> Result<Field<T>> {
    if n < 2 {
        return invalid(format!("harmonic polynomial needs dimension >= 2, got {n}"));
    }
    Ok(Field::HarmonicPoly { dim: n, degree: k, part })
}

pub fn make_torus_eigen<T: Real>(modes: Vec<i64>, parity: Vec<Trig>) -> Result<Field<T>> {
    if modes.len() != parity.len() {
        return invalid("modes and parity must have equal length");
    }
    if modes.len() < 2 {
        return invalid("torus eigenfunction needs dimension >= 2");
    }
    if modes.iter().all(|&m| m == 0) {
        return invalid("mode vector must be nonzero");
    }
    if modes.iter().zip(&parity).any(|(&m, &p)| m == 0 && p == Trig::Sin) {
        return Err(Error::DegenerateField("sin(0 x) factor makes the field vanish identically".into()));
    }
    Ok(Field::TorusEigen { modes, parity })
}

/// `sin(m x_1) ... sin(m x_n)`.
pub fn sin_torus<T: Real>(n: usize, m: i64) -> Result<Field<T>> {
    make_torus_eigen(vec![m; n], vec![Trig::Sin; n])
}

pub fn lift_eigenfunction<T: Real>(phi: &Field<T>) -> Result<Field<T>> {
    match phi.eigenvalue() {
        Some(l) if l > T::zero() => Ok(Field::Lifted { base: Box::new(phi.clone()) }),
        Some(_) => invalid("lift needs a positive eigenvalue"),
        None => Err(Error::MissingEigenvalue),
    }
}

#[inline]
fn cpow<T: Real>(re: T, im: T, k: u32) -> (T, T) {
    let (mut ar, mut ai) = (T::one(), T::zero());
    let (mut br, mut bi) = (re, im);
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            let t = ar * br - ai * bi;
            ai = ar * bi + ai * br;
            ar = t;
        }
        let t = br * br - bi * bi;
        bi = T::lit(2.0) * br * bi;
        br = t;
        e >>= 1;
    }
    (ar, ai)
}

#[inline]
fn trig_value<T: Real>(p: Trig, a: T) -> T {
    match p {
        Trig::Sin => a.sin(),
        Trig::Cos => a.cos(),
    }
}

#[inline]
fn trig_deriv<T: Real>(p: Trig, a: T) -> T {
    match p {
        Trig::Sin => a.cos(),
        Trig::Cos => -a.sin(),
    }
}

impl<T: Real> Field<T> {
    pub fn dim(&self) -> usize {
        match self {
            Field::HarmonicPoly { dim, .. } | Field::Constant { dim, .. } => *dim,
            Field::TorusEigen { modes, .. } => modes.len(),
            Field::Lifted { base } => base.dim() + 1,
            Field::Affine { coeffs, .. } => coeffs.len(),
            Field::Quadric { diag, .. } => diag.len(),
            Field::SinhMode { .. } => 2,
            Field::Scaled { inner, .. } | Field::Dilated { inner, .. } => inner.dim(),
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            Field::HarmonicPoly { .. } => FieldKind::HarmonicPoly,
            Field::TorusEigen { .. } => FieldKind::TorusEigen,
            Field::Lifted { .. } => FieldKind::LiftedEigen,
            _ => FieldKind::Custom,
        }
    }

    /// Whether the field is harmonic (`Δu = 0`) by construction.
    pub fn is_harmonic(&self) -> bool {
        match self {
            Field::HarmonicPoly { .. } | Field::Lifted { .. } | Field::Constant { .. } => true,
            Field::Affine { .. } | Field::SinhMode { .. } => true,
            Field::Quadric { diag, .. } => diag.iter().copied().sum::<T>() == T::zero(),
            Field::TorusEigen { .. } => false,
            Field::Scaled { inner, .. } | Field::Dilated { inner, .. } => inner.is_harmonic(),
        }
    }

    /// `λ` with `Δφ + λφ = 0`, if the field is an eigenfunction.
    pub fn eigenvalue(&self) -> Option<T> {
        match self {
            Field::TorusEigen { modes, .. } => {
                Some(modes.iter().map(|&m| T::lit((m * m) as f64)).sum())
            }
            Field::Scaled { inner, .. } => inner.eigenvalue(),
            Field::Dilated { factor, inner } => inner.eigenvalue().map(|l| l * *factor * *factor),
            _ => None,
        }
    }

    pub fn metadata(&self) -> FieldMetadata<T> {
        match self {
            Field::HarmonicPoly { dim, degree, .. } => FieldMetadata {
                degree: Some(*degree),
                eigenvalue: None,
                frequency_at_origin: Some(T::lit((2 * *degree as usize + dim - 1) as f64) / T::lit(2.0)),
                doubling_at_origin: Some(T::lit(*degree as f64)),
                nodal_per_period: None,
            },
            Field::Constant { dim, .. } => FieldMetadata {
                degree: Some(0),
                frequency_at_origin: Some(T::lit((dim - 1) as f64) / T::lit(2.0)),
                doubling_at_origin: Some(T::zero()),
                ..Default::default()
            },
            Field::TorusEigen { modes, .. } => {
                let n = modes.len() as i32;
                let lines: i64 = modes.iter().map(|m| 2 * m.abs()).sum();
                FieldMetadata {
                    eigenvalue: self.eigenvalue(),
                    nodal_per_period: Some(T::lit(lines as f64) * T::TAU().powi(n - 1)),
                    ..Default::default()
                }
            }
            Field::Lifted { base } => FieldMetadata {
                eigenvalue: None,
                ..base.metadata()
            },
            _ => FieldMetadata::default(),
        }
    }

    pub fn value(&self, x: &[T]) -> T {
        match self {
            Field::HarmonicPoly { degree, part, .. } => {
                let (re, im) = cpow(x[0], x[1], *degree);
                match part {
                    Part::Re => re,
                    Part::Im => im,
                }
            }
            Field::TorusEigen { modes, parity } => modes
                .iter()
                .zip(parity)
                .zip(x)
                .fold(T::one(), |acc, ((&m, &p), &xi)| acc * trig_value(p, T::lit(m as f64) * xi)),
            Field::Lifted { base } => {
                let n = base.dim();
                let l = base.eigenvalue().unwrap_or_else(T::zero);
                base.value(&x[..n]) * (l.sqrt() * x[n]).exp()
            }
            Field::Constant { value, .. } => *value,
            Field::Affine { coeffs, offset } => {
                coeffs.iter().zip(x).fold(*offset, |acc, (&c, &xi)| acc + c * xi)
            }
            Field::Quadric { diag, offset } => {
                diag.iter().zip(x).fold(*offset, |acc, (&c, &xi)| acc + c * xi * xi)
            }
            Field::SinhMode { k } => (*k * x[0]).sin() * (*k * x[1]).sinh() / k.sinh(),
            Field::Scaled { factor, inner } => *factor * inner.value(x),
            Field::Dilated { factor, inner } => {
                let y: Vec<T> = x.iter().map(|&v| v * *factor).collect();
                inner.value(&y)
            }
        }
    }

    /// Closed-form gradient written into `out` (length `dim`).
    pub fn gradient_into(&self, x: &[T], out: &mut [T]) {
        match self {
            Field::HarmonicPoly { degree, part, .. } => {
                out.iter_mut().for_each(|g| *g = T::zero());
                if *degree == 0 {
                    return;
                }
                let k = T::lit(*degree as f64);
                let (re, im) = cpow(x[0], x[1], degree - 1);
                let (dr, di) = (k * re, k * im);
                match part {
                    Part::Re => {
                        out[0] = dr;
                        out[1] = -di;
                    }
                    Part::Im => {
                        out[0] = di;
                        out[1] = dr;
                    }
                }
            }
            Field::TorusEigen { modes, parity } => {
                let n = modes.len();
                let vals: Vec<T> = (0..n)
                    .map(|j| trig_value(parity[j], T::lit(modes[j] as f64) * x[j]))
                    .collect();
                for j in 0..n {
                    let m = T::lit(modes[j] as f64);
                    let mut g = m * trig_deriv(parity[j], m * x[j]);
                    for (i, &v) in vals.iter().enumerate() {
                        if i != j {
                            g *= v;
                        }
                    }
                    out[j] = g;
                }
            }
            Field::Lifted { base } => {
                let n = base.dim();
                let s = base.eigenvalue().unwrap_or_else(T::zero).sqrt();
                let e = (s * x[n]).exp();
                base.gradient_into(&x[..n], &mut out[..n]);
                out[..n].iter_mut().for_each(|g| *g *= e);
                out[n] = s * base.value(&x[..n]) * e;
            }
            Field::Constant { .. } => out.iter_mut().for_each(|g| *g = T::zero()),
            Field::Affine { coeffs, .. } => out.copy_from_slice(coeffs),
            Field::Quadric { diag, .. } => {
                for ((g, &c), &xi) in out.iter_mut().zip(diag).zip(x) {
                    *g = T::lit(2.0) * c * xi;
                }
            }
            Field::SinhMode { k } => {
                let d = k.sinh();
                out[0] = *k * (*k * x[0]).cos() * (*k * x[1]).sinh() / d;
                out[1] = *k * (*k * x[0]).sin() * (*k * x[1]).cosh() / d;
            }
            Field::Scaled { factor, inner } => {
                inner.gradient_into(x, out);
                out.iter_mut().for_each(|g| *g *= *factor);
            }
            Field::Dilated { factor, inner } => {
                let y: Vec<T> = x.iter().map(|&v| v * *factor).collect();
                inner.gradient_into(&y, out);
                out.iter_mut().for_each(|g| *g *= *factor);
            }
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Checks degree / mode caps and nested consistency.
    pub fn validate(&self, limits: &FieldLimits) -> Result<()> {
        match self {
            Field::HarmonicPoly { dim, degree, .. } => {
                if *dim < 2 {
                    return invalid("harmonic_poly.dim must be >= 2");
                }
                if *degree > limits.max_degree {
                    return invalid(format!(
                        "harmonic_poly.degree {degree} exceeds cap {}",
                        limits.max_degree
                    ));
                }
                Ok(())
            }
            Field::TorusEigen { modes, parity } => {
                make_torus_eigen::<T>(modes.clone(), parity.clone())?;
                if modes.iter().any(|m| m.unsigned_abs() > limits.max_degree as u64) {
                    return invalid(format!("torus_eigen.modes exceed cap {}", limits.max_degree));
                }
                Ok(())
            }
            Field::Lifted { base } => {
                base.validate(limits)?;
                lift_eigenfunction(base).map(|_| ())
            }
            Field::Constant { dim, .. } if *dim < 1 => invalid("constant.dim must be positive"),
            Field::Affine { coeffs, .. } if coeffs.is_empty() => invalid("affine.coeffs must be nonempty"),
            Field::Quadric { diag, .. } if diag.is_empty() => invalid("quadric.diag must be nonempty"),
            Field::SinhMode { k } if !(*k > T::zero()) => invalid("sinh_mode.k must be positive"),
            Field::Scaled { inner, .. } | Field::Dilated { inner, .. } => inner.validate(limits),
            _ => Ok(()),
        }
    }
}

/// Second-order central-difference Laplacian at `x`.
pub fn laplacian_residual<T: Real>(u: &Field<T>, x: &[T], h: T) -> T {
    let mut y = x.to_vec();
    let center = u.value(x);
    let mut acc = T::zero();
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = u.value(&y);
        y[j] = x[j] - h;
        let fm = u.value(&y);
        y[j] = x[j];
        acc += fp - T::lit(2.0) * center + fm;
    }
    acc / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_harmonic_poly() {
        let u = make_harmonic_poly::<f64>(2, 1, Part::Re).unwrap();
        assert_eq!(u.value(&[0.3, -0.7]), 0.3);
        assert_eq!(u.gradient(&[0.3, -0.7]), vec![1.0, 0.0]);
    }

    #[test]
    fn quadratic_in_three_dims() {
        let u = make_harmonic_poly::<f64>(3, 2, Part::Re).unwrap();
        let x = [0.4, -1.1, 2.0];
        assert!((u.value(&x) - (0.16 - 1.21)).abs() < 1e-15);
        assert!(laplacian_residual(&u, &x, 1e-3).abs() < 1e-8);
    }

    #[test]
    fn homogeneity_ratio_degree_five() {
        let u = make_harmonic_poly::<f64>(2, 5, Part::Re).unwrap();
        // sup over B(0, r) = r^k, attained at angle 0
        assert!((u.value(&[2.0, 0.0]) / u.value(&[1.0, 0.0]) - 32.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_below_two_rejected() {
        assert!(make_harmonic_poly::<f64>(1, 3, Part::Re).is_err());
    }

    #[test]
    fn torus_eigenvalues() {
        let u = make_torus_eigen::<f64>(vec![1, 1], vec![Trig::Sin, Trig::Sin]).unwrap();
        assert_eq!(u.eigenvalue(), Some(2.0));
        let per = u.metadata().nodal_per_period.unwrap();
        assert!((per - 8.0 * std::f64::consts::PI).abs() < 1e-12);
        let v = make_torus_eigen::<f64>(vec![3, 4], vec![Trig::Cos, Trig::Sin]).unwrap();
        assert_eq!(v.eigenvalue(), Some(25.0));
        let w = sin_torus::<f64>(3, 2).unwrap();
        assert_eq!(w.eigenvalue(), Some(12.0));
        let tau = std::f64::consts::TAU;
        assert!((w.metadata().nodal_per_period.unwrap() - 3.0 * 4.0 * tau * tau).abs() < 1e-9);
    }

    #[test]
    fn zero_mode_vector_rejected() {
        assert!(make_torus_eigen::<f64>(vec![0, 0], vec![Trig::Cos, Trig::Cos]).is_err());
    }

    #[test]
    fn torus_eigen_equation() {
        let u = make_torus_eigen::<f64>(vec![1, 1], vec![Trig::Sin, Trig::Sin]).unwrap();
        let x = [0.3, 0.7];
        let lap = laplacian_residual(&u, &x, 1e-4);
        assert!((lap + 2.0 * u.value(&x)).abs() < 1e-6, "{lap}");
    }

    #[test]
    fn lift_of_sine() {
        let phi = make_torus_eigen::<f64>(vec![1, 0], vec![Trig::Sin, Trig::Cos]).unwrap();
        assert_eq!(phi.eigenvalue(), Some(1.0));
        let u = lift_eigenfunction(&phi).unwrap();
        let x = [0.9, 0.2, 0.4];
        assert!((u.value(&x) - 0.9f64.sin() * 0.4f64.exp()).abs() < 1e-15);
        assert!(laplacian_residual(&u, &x, 1e-4).abs() < 1e-4);
        // t = 0 slice reproduces φ
        assert_eq!(u.value(&[0.9, 0.2, 0.0]), phi.value(&[0.9, 0.2]));
    }

    #[test]
    fn lift_requires_eigenvalue() {
        let u = make_harmonic_poly::<f64>(2, 3, Part::Re).unwrap();
        assert_eq!(lift_eigenfunction(&u), Err(Error::MissingEigenvalue));
    }

    #[test]
    fn laplacian_of_square() {
        let u: Field<f64> = Field::Quadric { diag: vec![1.0, 0.0], offset: 0.0 };
        assert!((laplacian_residual(&u, &[0.37, -2.0], 1e-3) - 2.0).abs() < 1e-6);
        let k3 = make_harmonic_poly::<f64>(2, 3, Part::Im).unwrap();
        assert!(laplacian_residual(&k3, &[0.37, -0.9], 1e-3).abs() < 1e-6);
    }

    #[test]
    fn degree_cap_enforced() {
        let u = make_harmonic_poly::<f64>(2, 20, Part::Re).unwrap();
        assert!(u.validate(&FieldLimits::default()).is_err());
        assert!(u.validate(&FieldLimits { max_degree: 24 }).is_ok());
    }

    #[test]
    fn descriptor_round_trip() {
        let u = lift_eigenfunction(&sin_torus::<f64>(2, 3).unwrap()).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        let back: Field<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn works_in_single_precision() {
        let u = make_harmonic_poly::<f32>(2, 4, Part::Re).unwrap();
        assert!((u.value(&[1.0f32, 0.0]) - 1.0).abs() < 1e-6);
    }
}
