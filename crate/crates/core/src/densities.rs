//! Closed-form densities: gamma marginals and the bivariate and trivariate
//! members of the family. Everything is computed in log form.

use serde::Serialize;

use crate::divisibility::{btilde_all, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::polynomial::{AffineModel, SubsetMask};
use crate::specialfn::{
    gamma_p, horn_phi3_sum, lauricella_fi_sum, lauricella_fii_sum, ln_gamma, pfq_sum, SeriesControl,
};

/// A density evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityPoint {
    pub x: Vec<f64>,
    pub logpdf: f64,
    pub pdf: f64,
}

impl DensityPoint {
    pub fn new(x: Vec<f64>, logpdf: f64) -> Self {
        Self { x, pdf: logpdf.exp(), logpdf }
    }
}

/// Log density of the gamma law with scale `p` and shape `shape`.
pub fn gamma_marginal_logpdf(p: f64, shape: f64, x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - shape * p.ln() - x / p - ln_gamma(shape)
}

pub fn gamma_marginal_cdf(p: f64, shape: f64, x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    gamma_p(shape, x / p)
}

/// Inverse of [`gamma_marginal_cdf`] in `x`, for `u ∈ [0, 1]`.
pub fn gamma_marginal_quantile(p: f64, shape: f64, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::arg(format!("probability {u} outside [0, 1]")));
    }
    if !(p > 0.0 && shape > 0.0) {
        return Err(Error::arg("gamma scale and shape must be > 0"));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(f64::INFINITY);
    }
    let lg = ln_gamma(shape);
    // Small-u start from P(a, y) ≈ y^a / Γ(a+1), otherwise Wilson–Hilferty.
    let small = ((u.ln() + ln_gamma(shape + 1.0)) / shape).exp();
    let mut y = if small < 0.5 * shape.max(0.5) {
        small
    } else {
        let z = normal_quantile(u);
        let t = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * shape.sqrt());
        (shape * t * t * t).max(small.min(shape))
    };
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..300 {
        let f = gamma_p(shape, y) - u;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = ((shape - 1.0) * y.ln() - y - lg).exp();
        let mut next = y - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * y.max(1.0) };
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y {
            y = next;
            break;
        }
        y = next;
    }
    Ok(p * y)
}

/// Standard normal quantile (Acklam's rational approximation, ~1e-9), used
/// only as a starting value.
fn normal_quantile(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if u < 0.02425 {
        tail((-2.0 * u.ln()).sqrt())
    } else if u > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - u).ln()).sqrt())
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `c = (p1 p2 − p12) / p12²`, which must be ≥ 0 (zero is the independent case).
pub fn bivariate_c(p1: f64, p2: f64, p12: f64) -> Result<f64> {
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::precondition(format!("p1 = {p1}, p2 = {p2} must be > 0")));
    }
    if !(p12 > 0.0) {
        return Err(Error::Existence(format!("p12 = {p12} must be > 0")));
    }
    let c = (p1 * p2 - p12) / (p12 * p12);
    if c < 0.0 {
        return Err(Error::Existence(format!("c = (p1 p2 - p12)/p12^2 = {c} < 0")));
    }
    Ok(c)
}

fn positive_point(x: &[f64], n: usize) -> Result<bool> {
    if x.len() != n {
        return Err(Error::arg(format!("expected a point of dimension {n}, got {}", x.len())));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("point has NaN coordinates"));
    }
    Ok(x.iter().all(|&v| v > 0.0 && v.is_finite()))
}

fn bivariate_coeffs(model: &AffineModel) -> Result<(f64, f64, f64)> {
    if model.dim() != 2 {
        return Err(Error::arg(format!("bivariate density needs n = 2, got n = {}", model.dim())));
    }
    let poly = model.poly();
    Ok((poly.linear(0), poly.linear(1), poly.top()))
}

/// Log density of `γ(P, λ)` for `n = 2`, `λ_1 = λ_2 = λ`.
pub fn bivariate_gamma_logpdf(model: &AffineModel, x: &[f64], ctl: &SeriesControl) -> Result<f64> {
    let (p1, p2, p12) = bivariate_coeffs(model)?;
    if !model.shapes().is_pure() {
        return Err(Error::arg("bivariate gamma density needs lambda_1 = lambda_2 = lambda"));
    }
    let c = bivariate_c(p1, p2, p12)?;
    if !positive_point(x, 2)? {
        return Ok(f64::NEG_INFINITY);
    }
    let lambda = model.lambda();
    let (x1, x2) = (x[0], x[1]);
    let series = pfq_sum(&[], &[lambda], c * x1 * x2, ctl)?;
    Ok(-lambda * p12.ln() - 2.0 * ln_gamma(lambda) - (p2 / p12) * x1 - (p1 / p12) * x2
        + (lambda - 1.0) * (x1.ln() + x2.ln())
        + series.ln_abs)
}

/// Log density of the multisensor law `(P, λ, λ, λ2)`: only the second
/// coordinate carries an extra shape.
pub fn multisensor_logpdf(
    p1: f64,
    p2: f64,
    p12: f64,
    lambda: f64,
    lambda2: f64,
    x: &[f64],
    ctl: &SeriesControl,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda2 >= lambda) {
        return Err(Error::arg(format!("need lambda2 >= lambda > 0, got {lambda2}, {lambda}")));
    }
    let c = bivariate_c(p1, p2, p12)?;
    if !positive_point(x, 2)? {
        return Ok(f64::NEG_INFINITY);
    }
    let (x1, x2) = (x[0], x[1]);
    let series = horn_phi3_sum(lambda2 - lambda, lambda2, c * (p12 / p2) * x2, c * x1 * x2, ctl)?;
    Ok(-lambda * p12.ln() - (lambda2 - lambda) * p2.ln() - ln_gamma(lambda) - ln_gamma(lambda2)
        + (lambda - 1.0) * x1.ln()
        + (lambda2 - 1.0) * x2.ln()
        - (p2 / p12) * x1
        - (p1 / p12) * x2
        + series.ln_abs)
}

/// Log density of the bivariate multi-factor law `(P, (λ, λ1, λ2))`.
pub fn bifactor_logpdf(model: &AffineModel, x: &[f64], ctl: &SeriesControl) -> Result<f64> {
    let (p1, p2, p12) = bivariate_coeffs(model)?;
    let c = bivariate_c(p1, p2, p12)?;
    if !positive_point(x, 2)? {
        return Ok(f64::NEG_INFINITY);
    }
    let lambda = model.lambda();
    let (l1, l2) = (model.lambdas()[0], model.lambdas()[1]);
    let (x1, x2) = (x[0], x[1]);
    let series = lauricella_fi_sum(
        l1 - lambda,
        l2 - lambda,
        lambda,
        c * (p12 / p1) * x1,
        c * (p12 / p2) * x2,
        c * x1 * x2,
        ctl,
    )?;
    Ok(-lambda * p12.ln() - (l1 - lambda) * p1.ln() - (l2 - lambda) * p2.ln() - ln_gamma(l1) - ln_gamma(l2)
        + (l1 - 1.0) * x1.ln()
        + (l2 - 1.0) * x2.ln()
        - (p2 / p12) * x1
        - (p1 / p12) * x2
        + series.ln_abs)
}

/// Log density of `γ(P, λ)` for `n = 3`, `λ_i = λ`.
///
/// Requires `p_i, p_ij, p_123 > 0` and `b̃_ij, b̃_123 ≥ 0`.
pub fn trivariate_gamma_logpdf(model: &AffineModel, x: &[f64], ctl: &SeriesControl) -> Result<f64> {
    if model.dim() != 3 {
        return Err(Error::arg(format!("trivariate density needs n = 3, got n = {}", model.dim())));
    }
    if !model.shapes().is_pure() {
        return Err(Error::arg("trivariate gamma density needs lambda_i = lambda"));
    }
    let poly = model.poly();
    let n = 3;
    for s in SubsetMask::all(n).filter(|s| !s.is_empty()) {
        let v = poly.coeff(s);
        if !(v > 0.0) {
            return Err(Error::precondition(format!("p_{{{s}}} = {v} must be > 0")));
        }
    }
    let dual = poly.dual_polynomial()?;
    let b = btilde_all(&dual);
    let bt = |idx: &[usize]| -> Result<f64> {
        let s = SubsetMask::from_indices(n, idx)?;
        let v = b.get(s);
        if v < -DEFAULT_TOL {
            return Err(Error::precondition(format!("b~_{{{s}}} = {v} must be >= 0")));
        }
        Ok(v.max(0.0))
    };
    let (b12, b13, b23, b123) = (bt(&[0, 1])?, bt(&[0, 2])?, bt(&[1, 2])?, bt(&[0, 1, 2])?);
    if !positive_point(x, 3)? {
        return Ok(f64::NEG_INFINITY);
    }
    let lambda = model.lambda();
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let series = lauricella_fii_sum(
        lambda,
        lambda,
        b13 * x1 * x3 * b23 * x2 * x3,
        b123 * x1 * x2 * x3,
        b12 * x1 * x2,
        b13 * x1 * x3 + b23 * x2 * x3,
        ctl,
    )?;
    let linear: f64 = (0..n).map(|i| dual.get(SubsetMask::singleton(n, i)) * x[i]).sum();
    Ok(-lambda * poly.top().ln() - 3.0 * ln_gamma(lambda)
        + linear
        + (lambda - 1.0) * (x1.ln() + x2.ln() + x3.ln())
        + series.ln_abs)
}

/// Closed-form log density for the supported shapes: any `n = 1`, any
/// `n = 2` model, and the pure `n = 3` model.
pub fn model_logpdf(model: &AffineModel, x: &[f64], ctl: &SeriesControl) -> Result<f64> {
    match model.dim() {
        1 => {
            positive_point(x, 1)?;
            Ok(gamma_marginal_logpdf(model.poly().linear(0), model.lambdas()[0], x[0]))
        }
        2 if model.shapes().is_pure() => bivariate_gamma_logpdf(model, x, ctl),
        2 => bifactor_logpdf(model, x, ctl),
        3 if model.shapes().is_pure() => trivariate_gamma_logpdf(model, x, ctl),
        n => Err(Error::arg(format!(
            "no closed-form density for n = {n}{}",
            if n == 3 { " with unequal shapes" } else { "" }
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{AffinePolynomial, ShapeParams};

    fn model2(p1: f64, p2: f64, p12: f64, lambda: f64, l1: f64, l2: f64) -> AffineModel {
        AffineModel::new(
            AffinePolynomial::bivariate(p1, p2, p12).unwrap(),
            ShapeParams::new(lambda, vec![l1, l2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gamma_marginal() {
        assert!((gamma_marginal_logpdf(1.0, 1.0, 1.0) + 1.0).abs() < 1e-15);
        assert_eq!(gamma_marginal_logpdf(1.0, 1.0, 0.0), f64::NEG_INFINITY);
        assert_eq!(gamma_marginal_logpdf(1.0, 1.0, -1.0), f64::NEG_INFINITY);
        // scale 2, shape 3: x^2 e^{-x/2} / (2^3 · 2)
        let x: f64 = 1.7;
        let direct = (x * x * (-x / 2.0).exp() / 16.0).ln();
        assert!((gamma_marginal_logpdf(2.0, 3.0, x) - direct).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &(p, a) in &[(1.0, 1.0), (2.0, 3.0), (0.5, 0.2), (3.0, 50.0), (1.0, 0.05)] {
            for &u in &[1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.999, 1.0 - 1e-10] {
                let x = gamma_marginal_quantile(p, a, u).unwrap();
                let back = gamma_marginal_cdf(p, a, x);
                assert!((back - u).abs() <= 1e-12 * u.max(1e-3), "p={p} a={a} u={u}: {back}");
            }
        }
        // Exponential: closed form.
        let x = gamma_marginal_quantile(2.0, 1.0, 0.75).unwrap();
        assert!((x - 2.0 * 4f64.ln()).abs() < 1e-13);
        assert_eq!(gamma_marginal_quantile(1.0, 2.0, 0.0).unwrap(), 0.0);
        assert!(gamma_marginal_quantile(1.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn existence_gate() {
        let m = model2(1.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        let ctl = SeriesControl::default();
        assert!(matches!(bivariate_gamma_logpdf(&m, &[1.0, 1.0], &ctl), Err(Error::Existence(_))));
        let m = model2(1.0, 1.0, 0.5, 1.0, 1.0, 1.0);
        assert_eq!(bivariate_gamma_logpdf(&m, &[0.0, 1.0], &ctl).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn independence_limit() {
        let ctl = SeriesControl::default();
        let (p1, p2, lambda) = (1.5, 0.7, 1.3);
        let m = model2(p1, p2, p1 * p2 * (1.0 - 1e-8), lambda, lambda, lambda);
        let x = [0.8, 2.1];
        let got = bivariate_gamma_logpdf(&m, &x, &ctl).unwrap();
        let prod = gamma_marginal_logpdf(p1, lambda, x[0]) + gamma_marginal_logpdf(p2, lambda, x[1]);
        assert!((got.exp() / prod.exp() - 1.0).abs() < 1e-6);
        // At c = 0 the formula is the product exactly.
        let m = model2(p1, p2, p1 * p2, lambda, 2.0, 3.0);
        let got = bifactor_logpdf(&m, &x, &ctl).unwrap();
        let prod = gamma_marginal_logpdf(p1, 2.0, x[0]) + gamma_marginal_logpdf(p2, 3.0, x[1]);
        assert!((got - prod).abs() < 1e-13);
    }

    #[test]
    fn reductions_between_bivariate_forms() {
        let ctl = SeriesControl::default();
        let (p1, p2, p12, lambda) = (1.0, 2.0, 0.9, 0.8);
        let x = [1.3, 0.4];
        let pure = bivariate_gamma_logpdf(&model2(p1, p2, p12, lambda, lambda, lambda), &x, &ctl).unwrap();
        let ms = multisensor_logpdf(p1, p2, p12, lambda, lambda, &x, &ctl).unwrap();
        assert!((pure - ms).abs() < 1e-12);
        let ms = multisensor_logpdf(p1, p2, p12, lambda, 2.5, &x, &ctl).unwrap();
        let bf = bifactor_logpdf(&model2(p1, p2, p12, lambda, lambda, 2.5), &x, &ctl).unwrap();
        assert!((ms - bf).abs() < 1e-12);
    }

    #[test]
    fn swap_symmetry() {
        let ctl = SeriesControl::default();
        let a = bifactor_logpdf(&model2(1.2, 0.6, 0.5, 0.9, 1.4, 2.2), &[0.7, 1.9], &ctl).unwrap();
        let b = bifactor_logpdf(&model2(0.6, 1.2, 0.5, 0.9, 2.2, 1.4), &[1.9, 0.7], &ctl).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn trivariate_hypotheses() {
        let ctl = SeriesControl::default();
        let s = ShapeParams::uniform(3, 1.0).unwrap();
        // p_123 = 0
        let p = AffinePolynomial::new(3, vec![1.0, 1.0, 1.0, 0.5, 1.0, 0.5, 0.5, 0.0]).unwrap();
        let m = AffineModel::new(p, s.clone()).unwrap();
        assert!(matches!(trivariate_gamma_logpdf(&m, &[1.0; 3], &ctl), Err(Error::Precondition(_))));
        let p = AffinePolynomial::product(&[1.0, 1.0, 1.0]).unwrap();
        let m = AffineModel::new(p, s).unwrap();
        let got = trivariate_gamma_logpdf(&m, &[0.5, 1.0, 2.0], &ctl).unwrap();
        assert!((got + 3.5).abs() < 1e-13);
    }
}
