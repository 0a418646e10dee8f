//! Kendall's τ and Spearman's ρ of the bivariate Laplace copula: closed
//! hypergeometric forms, quadrature of the defining integrals, and rank
//! statistics of samples.

use serde::Serialize;

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::polynomial::{CoeffMap, SubsetMask};
use crate::quadrature::{integrate_box, Axis, QuadControl};
use crate::sampling::{sample_copula, RngSpec};
use crate::specialfn::{pfq_sum, SeriesControl, SeriesSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependenceResult {
    pub value: f64,
    pub method: Method,
    /// Truncation or quadrature error estimate, or the standard error for
    /// Monte Carlo.
    pub est_error: f64,
    /// For ρ in closed form: |first form − second form|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<f64>,
}

/// Above this `r12` the unit-argument summation settings are used.
const NEAR_UNIT: f64 = 0.95;
/// Tolerance for the agreement of the two ρ series forms.
pub const RHO_FORMS_TOL: f64 = 1e-10;

fn check_params(r12: f64, lambda: f64, l1: f64, l2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r12) {
        return Err(Error::arg(format!("r12 = {r12} outside [0, 1]")));
    }
    if !(lambda > 0.0 && l1 >= lambda && l2 >= lambda && l1.is_finite() && l2.is_finite()) {
        return Err(Error::arg(format!(
            "need lambda_i >= lambda > 0, got lambda = {lambda}, lambda_1 = {l1}, lambda_2 = {l2}"
        )));
    }
    Ok(())
}

fn series(upper: &[f64], lower: &[f64], r: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    let ctl = if r > NEAR_UNIT { ctl.unit_argument() } else { *ctl };
    pfq_sum(upper, lower, r, &ctl).map_err(|e| match e {
        Error::Domain(m) if r == 1.0 => Error::domain(format!("3F2 at r12 = 1 does not converge: {m}")),
        other => other,
    })
}

/// Kendall's τ from the three-term ₃F₂ expression.
pub fn kendall_tau_closed(r12: f64, lambda: f64, l1: f64, l2: f64, ctl: &SeriesControl) -> Result<DependenceResult> {
    check_params(r12, lambda, l1, l2)?;
    if r12 == 0.0 {
        return Ok(DependenceResult { value: 0.0, method: Method::ClosedForm, est_error: 0.0, discrepancy: None });
    }
    let (d1, d2) = (2.0 * l1 + 1.0, 2.0 * l2 + 1.0);
    let f1 = series(&[2.0 * lambda, 1.0, 1.0], &[d1, d2], r12, ctl)?;
    let f2 = series(&[2.0 * lambda + 1.0, 1.0, 2.0], &[d1 + 1.0, d2 + 1.0], r12, ctl)?;
    let f3 = series(&[2.0 * lambda + 2.0, 2.0, 2.0], &[d1 + 2.0, d2 + 2.0], r12, ctl)?;
    let a = 4.0 * lambda / (d1 * d2) * r12;
    let b = lambda * lambda / (d1 * d2 * (l1 + 1.0) * (l2 + 1.0)) * r12 * r12;
    let (v1, v2, v3) = (f1.value(), f2.value(), f3.value());
    let value = 1.0 - v1 + a * v2 - b * v3;
    let est_error = v1 * f1.est_error + a * v2 * f2.est_error + b * v3 * f3.est_error + 8.0 * f64::EPSILON * v1;
    Ok(DependenceResult { value, method: Method::ClosedForm, est_error, discrepancy: None })
}

/// Spearman's ρ as `3[₃F₂(1,1,λ; 2λ1+1, 2λ2+1; r) − 1]`, cross-checked
/// against the shifted form `3λ r/((2λ1+1)(2λ2+1)) ₃F₂(1,2,λ+1; 2λ1+2, 2λ2+2; r)`.
pub fn spearman_rho_closed(r12: f64, lambda: f64, l1: f64, l2: f64, ctl: &SeriesControl) -> Result<DependenceResult> {
    check_params(r12, lambda, l1, l2)?;
    if r12 == 0.0 {
        return Ok(DependenceResult { value: 0.0, method: Method::ClosedForm, est_error: 0.0, discrepancy: Some(0.0) });
    }
    let (d1, d2) = (2.0 * l1 + 1.0, 2.0 * l2 + 1.0);
    let f = series(&[1.0, 1.0, lambda], &[d1, d2], r12, ctl)?;
    let g = series(&[1.0, 2.0, lambda + 1.0], &[d1 + 1.0, d2 + 1.0], r12, ctl)?;
    let first = 3.0 * (f.value() - 1.0);
    let second = 3.0 * lambda * r12 / (d1 * d2) * g.value();
    Ok(DependenceResult {
        value: first,
        method: Method::ClosedForm,
        est_error: 3.0 * f.value() * f.est_error + 4.0 * f64::EPSILON * f.value(),
        discrepancy: Some((first - second).abs()),
    })
}

/// Closed forms from a bivariate copula's parameters.
pub fn kendall_tau_of(c: &CopulaModel, ctl: &SeriesControl) -> Result<DependenceResult> {
    let r = c.r12()?;
    kendall_tau_closed(r, c.lambda(), c.lambdas()[0], c.lambdas()[1], ctl)
}

pub fn spearman_rho_of(c: &CopulaModel, ctl: &SeriesControl) -> Result<DependenceResult> {
    let r = c.r12()?;
    spearman_rho_closed(r, c.lambda(), c.lambdas()[0], c.lambdas()[1], ctl)
}

/// The copula with its two coordinates exchanged.
fn swapped(c: &CopulaModel) -> Result<CopulaModel> {
    let mut alpha = CoeffMap::zeros(2);
    alpha.set(SubsetMask::empty(2), 1.0);
    alpha.set(SubsetMask::full(2), c.alpha().get(SubsetMask::full(2)));
    CopulaModel::from_parts(alpha, c.lambda(), vec![c.lambdas()[1], c.lambdas()[0]])
}

fn unit_square() -> [Axis; 2] {
    [Axis::new(0.0, 1.0), Axis::new(0.0, 1.0)]
}

/// `τ = 1 − 4 ∬ ∂C/∂u ∂C/∂v`.
pub fn kendall_tau_quadrature(c: &CopulaModel, ctl: &QuadControl) -> Result<DependenceResult> {
    if c.dim() != 2 {
        return Err(Error::arg("Kendall's tau needs a bivariate copula"));
    }
    let s = swapped(c)?;
    let r =
        integrate_box(|v| Ok(c.conditional_cdf(v[0], v[1])? * s.conditional_cdf(v[1], v[0])?), &unit_square(), ctl)?;
    Ok(DependenceResult {
        value: 1.0 - 4.0 * r.value,
        method: Method::Quadrature,
        est_error: 4.0 * r.error,
        discrepancy: None,
    })
}

/// `ρ_S = 12 ∬ C − 3`.
pub fn spearman_rho_quadrature(c: &CopulaModel, ctl: &QuadControl) -> Result<DependenceResult> {
    if c.dim() != 2 {
        return Err(Error::arg("Spearman's rho needs a bivariate copula"));
    }
    let r = integrate_box(|v| c.cdf(v), &unit_square(), ctl)?;
    Ok(DependenceResult {
        value: 12.0 * r.value - 3.0,
        method: Method::Quadrature,
        est_error: 12.0 * r.error,
        discrepancy: None,
    })
}

/// 0-based ranks; ties broken by position.
fn ranks(values: impl Iterator<Item = f64>) -> Vec<usize> {
    let v: Vec<f64> = values.collect();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank;
    }
    r
}

/// Sample Kendall's τ in `O(n log n)`, with the standard error of its
/// Hoeffding projection: `τ̂ = mean c_i`, `Var τ̂ ≈ 4 var(c_i)/n`, where `c_i`
/// is point `i`'s share of concordant minus discordant pairs.
pub fn kendall_tau_sample(data: &[(f64, f64)]) -> Result<DependenceResult> {
    let n = data.len();
    if n < 3 {
        return Err(Error::arg("Kendall's tau needs at least 3 points"));
    }
    let a = ranks(data.iter().map(|p| p.0));
    let b = ranks(data.iter().map(|p| p.1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| a[i]);
    // Fenwick tree over b-ranks of points already visited (smaller a).
    let mut tree = vec![0u32; n + 1];
    let mut lower = vec![0usize; n];
    for &i in &order {
        let mut k = b[i];
        let mut count = 0usize;
        while k > 0 {
            count += tree[k] as usize;
            k &= k - 1;
        }
        lower[i] = count;
        let mut k = b[i] + 1;
        while k <= n {
            tree[k] += 1;
            k += k & k.wrapping_neg();
        }
    }
    let m = (n - 1) as f64;
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let conc = (2 * lower[i] + n - 1 - a[i] - b[i]) as f64;
            (2.0 * conc - m) / m
        })
        .collect();
    let mean = c.iter().sum::<f64>() / n as f64;
    let var = c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Ok(DependenceResult {
        value: mean,
        method: Method::MonteCarlo,
        est_error: (4.0 * var / n as f64).sqrt(),
        discrepancy: None,
    })
}

fn spearman_of(data: &[(f64, f64)]) -> f64 {
    let n = data.len() as f64;
    let a = ranks(data.iter().map(|p| p.0));
    let b = ranks(data.iter().map(|p| p.1));
    let d2: f64 = a.iter().zip(&b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Number of batches behind the Spearman standard error.
pub const RHO_BATCHES: usize = 100;

/// Sample Spearman's ρ; the standard error comes from batch means over
/// [`RHO_BATCHES`] consecutive batches.
pub fn spearman_rho_sample(data: &[(f64, f64)]) -> Result<DependenceResult> {
    let n = data.len();
    if n < 10 * RHO_BATCHES {
        return Err(Error::arg(format!("Spearman's rho needs at least {} points", 10 * RHO_BATCHES)));
    }
    let value = spearman_of(data);
    let size = n / RHO_BATCHES;
    let batch: Vec<f64> = (0..RHO_BATCHES).map(|k| spearman_of(&data[k * size..(k + 1) * size])).collect();
    let mean = batch.iter().sum::<f64>() / RHO_BATCHES as f64;
    let var = batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (RHO_BATCHES as f64 - 1.0);
    Ok(DependenceResult {
        value,
        method: Method::MonteCarlo,
        est_error: (var / RHO_BATCHES as f64).sqrt(),
        discrepancy: None,
    })
}

fn copula_draws(c: &CopulaModel, n: usize, rng: RngSpec) -> Result<Vec<(f64, f64)>> {
    if c.dim() != 2 {
        return Err(Error::arg("rank statistics need a bivariate copula"));
    }
    let mut gen = rng.generator();
    (0..n).map(|_| sample_copula(c, &mut gen).map(|v| (v[0], v[1]))).collect()
}

/// Kendall's τ of `n` copula draws.
pub fn kendall_tau_monte_carlo(c: &CopulaModel, n: usize, rng: RngSpec) -> Result<DependenceResult> {
    kendall_tau_sample(&copula_draws(c, n, rng)?)
}

pub fn spearman_rho_monte_carlo(c: &CopulaModel, n: usize, rng: RngSpec) -> Result<DependenceResult> {
    spearman_rho_sample(&copula_draws(c, n, rng)?)
}
