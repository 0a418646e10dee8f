//! Numeric oracles shared by the test suites and `gammacop validate`:
//! Laplace transforms of densities by quadrature, finite-difference
//! derivatives, goodness-of-fit statistics, two classical integral
//! identities, and a report that runs all checks on a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::copulas::CopulaModel;
use crate::densities::{gamma_marginal_logpdf, gamma_marginal_quantile, model_logpdf};
use crate::dependence::{
    kendall_tau_monte_carlo, kendall_tau_of, kendall_tau_quadrature, spearman_rho_of, spearman_rho_quadrature,
    RHO_FORMS_TOL,
};
use crate::divisibility::{check_infinite_divisibility, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::polynomial::{AffineModel, SubsetMask};
use crate::quadrature::{integrate, integrate_box, integrate_tensor, Axis, QuadControl, QuadResult};
use crate::sampling::RngSpec;
use crate::specialfn::{horn_phi3, lauricella_fi, lauricella_fii, ln_beta, ln_gamma, pfq, pfq_sum, SeriesControl};

/// Per-axis tail mass cut off by truncation boxes.
pub const TAIL_MASS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub target: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `|computed − target| ≤ tolerance · max(1, |target|)`.
    pub fn relative(name: impl Into<String>, target: f64, computed: f64, tolerance: f64) -> Self {
        let ok = (computed - target).abs() <= tolerance * target.abs().max(1.0);
        Self::with_status(name, target, computed, tolerance, ok)
    }

    /// Passes when `|computed − target| ≤ tolerance`.
    pub fn absolute(name: impl Into<String>, target: f64, computed: f64, tolerance: f64) -> Self {
        let ok = (computed - target).abs() <= tolerance;
        Self::with_status(name, target, computed, tolerance, ok)
    }

    /// Passes when `computed ≥ target − tolerance`.
    pub fn at_least(name: impl Into<String>, target: f64, computed: f64, tolerance: f64) -> Self {
        let ok = computed >= target - tolerance;
        Self::with_status(name, target, computed, tolerance, ok)
    }

    pub fn boolean(name: impl Into<String>, ok: bool, note: Option<String>) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        let mut c = Self::with_status(name, 1.0, v, 0.0, ok);
        c.note = note;
        c
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            target: f64::NAN,
            computed: f64::NAN,
            tolerance: f64::NAN,
            status: Status::Skipped,
            note: Some(reason.into()),
        }
    }

    pub fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self {
            name: name.into(),
            target: f64::NAN,
            computed: f64::NAN,
            tolerance: f64::NAN,
            status: Status::Fail,
            note: Some(err.to_string()),
        }
    }

    fn with_status(name: impl Into<String>, target: f64, computed: f64, tolerance: f64, ok: bool) -> Self {
        Self {
            name: name.into(),
            target,
            computed,
            tolerance,
            status: if ok { Status::Pass } else { Status::Fail },
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl ValidationReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.overall = self.checks.iter().all(Check::passed);
    }

    fn push_result(&mut self, name: &str, r: Result<Check>) {
        match r {
            Ok(c) => self.push(c),
            Err(e) => self.push(Check::failed(name, &e)),
        }
    }

    fn extend(&mut self, name: &str, r: Result<Vec<Check>>) {
        match r {
            Ok(cs) => cs.into_iter().for_each(|c| self.push(c)),
            Err(e) => self.push(Check::failed(name, &e)),
        }
    }
}

/// Which closed-form operation each registered check exercises.
pub const CHECK_REGISTRY: &[(&str, &str)] = &[
    ("divisibility", "check_infinite_divisibility"),
    ("basis_identity", "fgm_coefficients"),
    ("density_normalization", "bivariate_gamma_logpdf"),
    ("density_normalization", "bifactor_logpdf"),
    ("density_laplace", "bivariate_gamma_logpdf"),
    ("density_laplace", "multisensor_logpdf"),
    ("density_laplace", "bifactor_logpdf"),
    ("density_marginal", "gamma_marginal_logpdf"),
    ("density3_normalization", "trivariate_gamma_logpdf"),
    ("density3_laplace", "trivariate_gamma_logpdf"),
    ("density3_kibble_moran", "trivariate_gamma_logpdf"),
    ("copula_margins", "copula_cdf"),
    ("copula_rectangles", "copula_cdf"),
    ("copula_composition", "build_copula"),
    ("copula_frechet", "copula_cdf"),
    ("copula_pdf_fd", "copula_pdf2"),
    ("copula_conditional_fd", "conditional_cdf"),
    ("copula_pdf_normalization", "copula_pdf2"),
    ("assembled_margins", "assembled_cdf"),
    ("assembled_pdf", "assembled_logpdf"),
    ("tau_closed_vs_quadrature", "kendall_tau_closed"),
    ("tau_closed_vs_quadrature", "kendall_tau_quadrature"),
    ("rho_closed_vs_quadrature", "spearman_rho_closed"),
    ("rho_closed_vs_quadrature", "spearman_rho_quadrature"),
    ("rho_forms", "spearman_rho_closed"),
    ("tau_monte_carlo", "sample_copula"),
    ("reduction_fi_phi3", "lauricella_FI"),
    ("reduction_phi3_0f1", "horn_phi3"),
    ("reduction_fii_f2", "lauricella_FII"),
    ("pfq_sum_rule", "pfq"),
    ("hladik", "hladik_pair_check"),
    ("beta_series", "beta_series_check"),
];

/// Options of [`run_full_validation`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationOptions {
    pub series: SeriesControl,
    /// Adds the trivariate density quadratures and a Monte-Carlo τ check.
    pub full: bool,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { series: SeriesControl::default(), full: false, seed: 20_240_601 }
    }
}

/// `∫ e^{−θ·x} f(x) dx` over a box, `f` given as a log density.
pub fn laplace_of_density<F: FnMut(&[f64]) -> Result<f64>>(
    mut logpdf: F,
    theta: &[f64],
    axes: &[Axis],
    ctl: &QuadControl,
) -> Result<QuadResult> {
    if theta.len() != axes.len() {
        return Err(Error::arg("theta and box dimensions differ"));
    }
    integrate_box(
        |x| {
            let lp = logpdf(x)?;
            let dot: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            Ok((lp - dot).exp())
        },
        axes,
        ctl,
    )
}

/// As [`laplace_of_density`] with the fixed tensor rule, for 3-D boxes.
pub fn laplace_of_density_tensor<F: FnMut(&[f64]) -> Result<f64>>(
    mut logpdf: F,
    theta: &[f64],
    axes: &[Axis],
    panels: usize,
) -> Result<QuadResult> {
    if theta.len() != axes.len() {
        return Err(Error::arg("theta and box dimensions differ"));
    }
    integrate_tensor(
        |x| {
            let lp = logpdf(x)?;
            let dot: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            Ok((lp - dot).exp())
        },
        axes,
        panels,
    )
}

/// Box axes with a square-root map so `x^{shape−1}`, shape > 1, stays smooth.
pub fn tensor_box(marginals: &[(f64, f64)], tail: f64) -> Result<Vec<Axis>> {
    marginals
        .iter()
        .map(|&(p, shape)| {
            let hi = gamma_marginal_quantile(p, shape, 1.0 - tail)?;
            Ok(Axis { lo: 0.0, hi, power: if shape < 1.0 { 1.0 / shape } else { 2.0 } })
        })
        .collect()
}

/// Box from the gamma marginals' `1 − tail` quantiles.
pub fn truncation_box(marginals: &[(f64, f64)], tail: f64) -> Result<Vec<Axis>> {
    marginals
        .iter()
        .map(|&(p, shape)| Ok(Axis::gamma_like(gamma_marginal_quantile(p, shape, 1.0 - tail)?, shape)))
        .collect()
}

/// Laplace transform of `γ(P, Λ)`: `P(θ)^{−λ} Π (1 + p_i θ_i)^{−(λ_i − λ)}`.
pub fn model_laplace(model: &AffineModel, theta: &[f64]) -> Result<f64> {
    let p = model.poly().evaluate(theta)?;
    if !(p > 0.0) {
        return Err(Error::domain(format!("P(theta) = {p} is not positive")));
    }
    let mut ln = -model.lambda() * p.ln();
    for (&(pi, li), &t) in model.marginal_params().iter().zip(theta) {
        ln -= (li - model.lambda()) * (1.0 + pi * t).ln();
    }
    Ok(ln.exp())
}

/// The composition `φ(φ_1^{-1}(v_1), …, φ_n^{-1}(v_n))` with `φ` the Laplace
/// transform of `γ(P, Λ)` and `φ_i^{-1}(v) = (v^{−1/λ_i} − 1)/p_i`.
pub fn laplace_composition(model: &AffineModel, v: &[f64]) -> Result<f64> {
    let theta: Vec<f64> =
        model.marginal_params().iter().zip(v).map(|(&(p, l), &x)| (x.powf(-1.0 / l) - 1.0) / p).collect();
    model_laplace(model, &theta)
}

/// Mixed partial `∂_S f(v)` by nested central differences with one
/// Richardson step (`O(h⁴)`).
pub fn mixed_partial_fd<F: Fn(&[f64]) -> Result<f64>>(f: F, v: &[f64], coords: &[usize], h: f64) -> Result<f64> {
    let diff = |step: f64| -> Result<f64> {
        let k = coords.len();
        let mut acc = 0.0;
        let mut point = v.to_vec();
        for signs in 0..(1u32 << k) {
            let mut sign = 1.0;
            for (j, &c) in coords.iter().enumerate() {
                if signs >> j & 1 == 1 {
                    point[c] = v[c] + step;
                } else {
                    point[c] = v[c] - step;
                    sign = -sign;
                }
            }
            acc += sign * f(&point)?;
        }
        Ok(acc / (2.0 * step).powi(k as i32))
    };
    let coarse = diff(h)?;
    let fine = diff(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Asymptotic Kolmogorov distribution tail `Q(t) = 2 Σ (−1)^{k−1} e^{−2k²t²}`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test: `(D, p-value)`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// Pearson χ² test: `(statistic, degrees of freedom, p-value)`, with
/// `df = cells − 1 − fitted`.
pub fn chi_square_test(observed: &[f64], expected: &[f64], fitted: usize) -> Result<(f64, usize, f64)> {
    if observed.len() != expected.len() || observed.len() < fitted + 2 {
        return Err(Error::arg("chi-square test needs matching cell vectors"));
    }
    if let Some(e) = expected.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::arg(format!("expected cell count {e} must be > 0")));
    }
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = observed.len() - 1 - fitted;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((stat, df, dist.sf(stat)))
}

/// `∫_0^∞ e^{−st} t^{λ−1} ₀F₁(;λ;at)/Γ(λ) dt = s^{−λ} e^{a/s}`.
pub fn hladik_pair_check(lam: f64, a: f64, s: f64, tol: f64, series: &SeriesControl) -> Result<Check> {
    if !(lam > 0.0 && a >= 0.0 && s > 0.0) {
        return Err(Error::arg("hladik check needs lambda > 0, a >= 0, s > 0"));
    }
    let target = (-lam * s.ln() + a / s).exp();
    // The integrand peaks near a/s²; beyond `hi` it is below e^{-60} of the total.
    let hi = 4.0 * a / (s * s) + 2.0 * (lam + 60.0) / s;
    let lg = ln_gamma(lam);
    let q = QuadControl { rel_tol: (0.01 * tol).max(1e-13), abs_tol: 0.0, max_intervals: 2000 };
    let r = integrate_box(
        |t| {
            let f = pfq_sum(&[], &[lam], a * t[0], series)?;
            Ok((-s * t[0] + (lam - 1.0) * t[0].ln() + f.ln_abs - lg).exp())
        },
        &[Axis::gamma_like(hi, lam)],
        &q,
    )?;
    let rel = (r.value - target).abs() / target;
    let mut c = Check::absolute(format!("hladik(lambda={lam}, a={a}, s={s})"), 0.0, rel, tol);
    c.target = target;
    c.computed = r.value;
    Ok(c)
}

/// `∫_0^1 e^{δu} u^{α−1}(1−u)^{β−1} du = B(α,β) ₁F₁(α; α+β; δ)`.
pub fn beta_series_check(alpha: f64, beta: f64, delta: f64, tol: f64, series: &SeriesControl) -> Result<Check> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::arg("beta check needs alpha, beta > 0"));
    }
    let target = ln_beta(alpha, beta).exp() * pfq(&[alpha], &[alpha + beta], delta, series)?;
    let q = QuadControl { rel_tol: (0.01 * tol).max(1e-14), abs_tol: 0.0, max_intervals: 2000 };
    let f = |u: f64, one_minus: f64| ((alpha - 1.0) * u.ln() + (beta - 1.0) * one_minus.ln() + delta * u).exp();
    let left = integrate_box(|x| Ok(f(x[0], 1.0 - x[0])), &[Axis::gamma_like(0.5, alpha)], &q)?;
    let right = integrate_box(|y| Ok(f(1.0 - y[0], y[0])), &[Axis::gamma_like(0.5, beta)], &q)?;
    let value = left.value + right.value;
    let mut c = Check::relative(format!("beta_series(alpha={alpha}, beta={beta}, delta={delta})"), target, value, tol);
    // Relative in the strict sense.
    let ok = (value - target).abs() <= tol * target.abs();
    c.status = if ok { Status::Pass } else { Status::Fail };
    Ok(c)
}

/// Grid of the integral identity checks, with their tolerances.
pub const HLADIK_GRID: &[(f64, f64, f64, f64)] = &[
    (1.0, 0.0, 2.0, 1e-10),
    (0.7, 0.0, 1.3, 1e-10),
    (1.5, 2.0, 3.0, 1e-8),
    (0.6, 1.0, 0.8, 1e-8),
    (2.0, 20.0, 1.0, 1e-6),
];
pub const BETA_GRID: &[(f64, f64, f64, f64)] = &[
    (2.0, 3.0, 0.0, 1e-10),
    (0.5, 0.7, 0.0, 1e-10),
    (2.0, 3.0, 1.7, 1e-10),
    (0.6, 1.4, 2.5, 1e-9),
    (2.0, 3.0, -4.0, 1e-9),
];

/// The integral identity checks over their example grids.
pub fn identity_checks(series: &SeriesControl) -> Vec<Check> {
    let mut out = Vec::new();
    for &(l, a, s, tol) in HLADIK_GRID {
        out.push(hladik_pair_check(l, a, s, tol, series).unwrap_or_else(|e| Check::failed("hladik", &e)));
    }
    for &(a, b, d, tol) in BETA_GRID {
        out.push(beta_series_check(a, b, d, tol, series).unwrap_or_else(|e| Check::failed("beta_series", &e)));
    }
    out
}

/// Reduction identities of the multi-index series on a 50-point grid.
pub fn reduction_checks(series: &SeriesControl) -> Result<Vec<Check>> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst_fi: f64 = 0.0;
    let mut worst_phi: f64 = 0.0;
    let mut worst_fii: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..50 {
        let b = rng.random_range(0.2..4.0);
        let c = rng.random_range(0.2..4.0);
        let z1 = rng.random_range(0.0..5.0);
        let z2 = rng.random_range(0.0..5.0);
        let z3 = rng.random_range(0.0..5.0);
        let fi = lauricella_fi(0.0, b, c, z1, z2, z3, series)?;
        let phi = horn_phi3(b, b + c, z2, z3, series)?;
        worst_fi = worst_fi.max((fi - phi).abs() / phi);
        let phi0 = horn_phi3(0.0, b + c, z1, z3, series)?;
        let f01 = pfq(&[], &[b + c], z3, series)?;
        worst_phi = worst_phi.max((phi0 - f01).abs() / f01);
        let fii = lauricella_fii(b, b, 0.0, z2, 0.0, 0.0, series)?;
        let f02 = pfq(&[], &[b, b], z2, series)?;
        worst_fii = worst_fii.max((fii - f02).abs() / f02);
        // Kummer: ₁F₁(a;b;z) = e^z ₁F₁(b−a;b;−z)
        let k1 = pfq(&[c], &[b + c + 0.5], z1, series)?;
        let k2 = z1.exp() * pfq(&[b + 0.5], &[b + c + 0.5], -z1, series)?;
        worst_sum = worst_sum.max((k1 - k2).abs() / k1);
    }
    Ok(vec![
        Check::absolute("reduction_fi_phi3", 0.0, worst_fi, 1e-10),
        Check::absolute("reduction_phi3_0f1", 0.0, worst_phi, 1e-10),
        Check::absolute("reduction_fii_f2", 0.0, worst_fii, 1e-10),
        Check::absolute("pfq_sum_rule", 0.0, worst_sum, 1e-9),
    ])
}

/// `Σ_T α_T Π_{t∈T}(u_t − 1) Π_{t∉T} u_t = P(θ)` with `u = 1 + p θ`.
pub fn basis_identity_error(model: &AffineModel, theta: &[f64]) -> Result<f64> {
    let poly = model.poly();
    let n = poly.dim();
    let alpha = poly.fgm_coefficients()?;
    let u: Vec<f64> = (0..n).map(|i| 1.0 + poly.linear(i) * theta[i]).collect();
    let mut sum = 0.0;
    for t in SubsetMask::all(n) {
        let mut prod = alpha.get(t);
        for (i, &ui) in u.iter().enumerate() {
            prod *= if t.contains(i) { ui - 1.0 } else { ui };
        }
        sum += prod;
    }
    let p = poly.evaluate(theta)?;
    Ok((sum - p).abs() / p.abs().max(1e-300))
}

fn density_checks(model: &AffineModel, opts: &ValidationOptions) -> Result<Vec<Check>> {
    let n = model.dim();
    let mut out = Vec::new();
    let series = opts.series;
    let marg = model.marginal_params();
    let axes = truncation_box(&marg, TAIL_MASS)?;
    match n {
        2 => {
            let tol = if model.shapes().is_pure() { 1e-6 } else { 1e-5 };
            let q = QuadControl { rel_tol: 1e-9, abs_tol: 1e-13, max_intervals: 400 };
            let lp = |x: &[f64]| model_logpdf(model, x, &series);
            let norm = laplace_of_density(lp, &[0.0, 0.0], &axes, &q)?;
            out.push(Check::relative("density_normalization", 1.0, norm.value, tol));
            for theta in [[0.3, 0.7], [1.1, 0.2]] {
                let got = laplace_of_density(lp, &theta, &axes, &q)?;
                let want = model_laplace(model, &theta)?;
                out.push(Check::relative(format!("density_laplace(theta={theta:?})"), want, got.value, tol));
            }
            // Marginal of the first coordinate.
            let (p1, l1) = marg[0];
            let mut worst: f64 = 0.0;
            for &u in &[0.2, 0.5, 0.9] {
                let x1 = gamma_marginal_quantile(p1, l1, u)?;
                let r = integrate_box(|y| Ok(lp(&[x1, y[0]])?.exp()), &axes[1..], &q)?;
                let want = gamma_marginal_logpdf(p1, l1, x1).exp();
                worst = worst.max((r.value - want).abs() / want);
            }
            out.push(Check::absolute("density_marginal", 0.0, worst, tol));
        }
        3 if model.shapes().is_pure() => {
            if !opts.full {
                out.push(Check::skipped("density3_normalization", "3-D quadrature runs with --full"));
                out.push(Check::skipped("density3_laplace", "3-D quadrature runs with --full"));
            } else {
                let axes = tensor_box(&marg, TAIL_MASS)?;
                let lp = |x: &[f64]| model_logpdf(model, x, &series);
                let norm = laplace_of_density_tensor(lp, &[0.0; 3], &axes, 2)?;
                out.push(Check::relative("density3_normalization", 1.0, norm.value, 1e-3));
                let theta = [0.2, 0.4, 0.6];
                let got = laplace_of_density_tensor(lp, &theta, &axes, 2)?;
                out.push(Check::relative("density3_laplace", model_laplace(model, &theta)?, got.value, 1e-3));
            }
            if let Some(c) = kibble_moran_check(model, &series)? {
                out.push(c);
            }
        }
        _ => out.push(Check::skipped("density", format!("no closed-form density for this model (n = {n})"))),
    }
    Ok(out)
}

/// When every pair `b̃_ij` vanishes the trivariate density is
/// `p₁₂₃^{−λ}/Γ(λ)³ e^{p̃·x} (x₁x₂x₃)^{λ−1} ₀F₂(;λ,λ; b̃₁₂₃x₁x₂x₃)`.
pub fn kibble_moran_check(model: &AffineModel, series: &SeriesControl) -> Result<Option<Check>> {
    if model.dim() != 3 || !model.shapes().is_pure() {
        return Ok(None);
    }
    let report = check_infinite_divisibility(model.poly(), DEFAULT_TOL)?;
    let pairs = [0b011u32, 0b101, 0b110];
    if !report.divisible
        || pairs
            .iter()
            .any(|&b| SubsetMask::new(b, 3).ok().and_then(|s| report.btilde_of(s)).unwrap_or(1.0).abs() > 1e-12)
    {
        return Ok(None);
    }
    let poly = model.poly();
    let top = poly.top();
    let lam = model.lambda();
    let b123 = report.btilde_of(SubsetMask::full(3)).unwrap_or(0.0);
    let ptilde: Vec<f64> = (0..3).map(|i| -poly.coeff(SubsetMask::singleton(3, i).complement()) / top).collect();
    let mut worst: f64 = 0.0;
    for x in [[0.3, 0.5, 0.7], [1.0, 2.0, 1.5], [2.5, 0.4, 3.0], [4.0, 4.0, 4.0], [0.05, 6.0, 1.0]] {
        let prod = x[0] * x[1] * x[2];
        let want = -lam * top.ln() - 3.0 * ln_gamma(lam)
            + ptilde.iter().zip(&x).map(|(p, xi)| p * xi).sum::<f64>()
            + (lam - 1.0) * prod.ln()
            + pfq(&[], &[lam, lam], b123 * prod, series)?.ln();
        let got = model_logpdf(model, &x, series)?;
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    Ok(Some(Check::absolute("density3_kibble_moran", 0.0, worst, 1e-10)))
}

fn random_unit_point(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(1e-3..1.0)).collect()
}

fn copula_checks(model: &AffineModel, c: &CopulaModel, opts: &ValidationOptions) -> Result<Vec<Check>> {
    let n = c.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    // Groundedness and margins, exact.
    let mut exact = true;
    for _ in 0..100 {
        let v = random_unit_point(&mut rng, n);
        for i in 0..n {
            let mut m = vec![1.0; n];
            m[i] = v[i];
            exact &= c.cdf(&m)? == v[i];
            let mut z = v.clone();
            z[i] = 0.0;
            exact &= c.cdf(&z)? == 0.0;
        }
    }
    exact &= c.cdf(&vec![1.0; n])? == 1.0;
    out.push(Check::boolean("copula_margins", exact, None));
    let worst = c.min_rectangle_mass(10_000, opts.seed ^ 0xa5a5)?;
    out.push(Check::at_least("copula_rectangles", 0.0, worst, 1e-12));
    let mut worst_comp: f64 = 0.0;
    let mut frechet = true;
    for _ in 0..100 {
        let v = random_unit_point(&mut rng, n);
        let cv = c.cdf(&v)?;
        let phi = laplace_composition(model, &v)?;
        worst_comp = worst_comp.max((cv - phi).abs() / phi);
        let lower = (v.iter().sum::<f64>() - n as f64 + 1.0).max(0.0);
        let upper = v.iter().cloned().fold(1.0, f64::min);
        frechet &= cv >= lower - 1e-15 && cv <= upper + 1e-15;
    }
    out.push(Check::absolute("copula_composition", 0.0, worst_comp, 1e-12));
    out.push(Check::boolean("copula_frechet", frechet, None));
    // Pairwise correlations lie in [0, 1].
    let mut in_range = true;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = model.poly().pair_correlation(i, j)?;
            in_range &= (-1e-12..=1.0 + 1e-12).contains(&r);
        }
    }
    out.push(Check::boolean("pair_correlations_in_unit_interval", in_range, None));
    // Copula density against finite differences of the cdf.
    let mut worst_pdf: f64 = 0.0;
    let mut worst_cond: f64 = 0.0;
    let all: Vec<usize> = (0..n).collect();
    for _ in 0..20 {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let fd = mixed_partial_fd(|x| c.cdf(x), &v, &all, 1e-3)?;
        let an = c.pdf(&v)?;
        worst_pdf = worst_pdf.max((fd - an).abs() / an.abs().max(1e-3));
        if n == 2 {
            let fd = mixed_partial_fd(|x| c.cdf(x), &v, &[0], 1e-3)?;
            worst_cond = worst_cond.max((fd - c.conditional_cdf(v[0], v[1])?).abs());
        }
    }
    out.push(Check::absolute("copula_pdf_fd", 0.0, worst_pdf, if n == 2 { 1e-6 } else { 1e-5 }));
    if n == 2 {
        out.push(Check::absolute("copula_conditional_fd", 0.0, worst_cond, 1e-6));
        let q = QuadControl { rel_tol: 1e-10, abs_tol: 1e-13, max_intervals: 400 };
        let mass = integrate_box(|v| c.pdf(v), &[Axis::new(0.0, 1.0), Axis::new(0.0, 1.0)], &q)?;
        out.push(Check::relative("copula_pdf_normalization", 1.0, mass.value, 1e-8));
    }
    // Sklar assembly with the model's own gamma marginals.
    let d = crate::copulas::AssembledDistribution::new(c.clone(), model.marginal_params())?;
    let mut worst_marg: f64 = 0.0;
    for i in 0..n {
        let (p, a) = model.marginal_params()[i];
        let x = gamma_marginal_quantile(p, a, 0.4)?;
        let mut pt = vec![f64::INFINITY; n];
        pt[i] = x;
        worst_marg = worst_marg.max((d.cdf(&pt)? - 0.4).abs());
    }
    out.push(Check::absolute("assembled_margins", 0.0, worst_marg, 1e-12));
    let x: Vec<f64> =
        model.marginal_params().iter().map(|&(p, a)| gamma_marginal_quantile(p, a, 0.45)).collect::<Result<_>>()?;
    let fd = mixed_partial_fd(|y| d.cdf(y), &x, &all, 1e-3)?;
    let got = d.logpdf(&x)?.exp();
    out.push(Check::relative("assembled_pdf", fd, got, if n == 2 { 1e-6 } else { 1e-5 }));
    Ok(out)
}

fn copula_group(model: &AffineModel, opts: &ValidationOptions) -> Result<Vec<Check>> {
    let c = CopulaModel::build(model)?;
    let mut out = copula_checks(model, &c, opts)?;
    if c.dim() == 2 {
        out.extend(dependence_checks(&c, opts)?);
    }
    Ok(out)
}

fn dependence_checks(c: &CopulaModel, opts: &ValidationOptions) -> Result<Vec<Check>> {
    let q = QuadControl { rel_tol: 1e-11, abs_tol: 1e-14, max_intervals: 500 };
    let tc = kendall_tau_of(c, &opts.series)?;
    let tq = kendall_tau_quadrature(c, &q)?;
    let rc = spearman_rho_of(c, &opts.series)?;
    let rq = spearman_rho_quadrature(c, &q)?;
    let mut out = vec![
        Check::absolute("tau_closed_vs_quadrature", tc.value, tq.value, 1e-6),
        Check::absolute("rho_closed_vs_quadrature", rc.value, rq.value, 1e-8),
        Check::absolute("rho_forms", 0.0, rc.discrepancy.unwrap_or(0.0), RHO_FORMS_TOL),
        Check::at_least("dependence_nonnegative", 0.0, tc.value.min(rc.value), 1e-12),
    ];
    if opts.full {
        let mc = kendall_tau_monte_carlo(c, 200_000, RngSpec::new(opts.seed))?;
        let mut chk = Check::absolute("tau_monte_carlo", tc.value, mc.value, 3.0 * mc.est_error);
        chk.note = Some(format!("standard error {:e}", mc.est_error));
        out.push(chk);
    } else {
        out.push(Check::skipped("tau_monte_carlo", "Monte-Carlo checks run with --full"));
    }
    Ok(out)
}

/// Runs every applicable check on `model`. Failures are recorded, not thrown.
pub fn run_full_validation(model: &AffineModel, opts: &ValidationOptions) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new(), overall: true };
    let divisible = match check_infinite_divisibility(model.poly(), DEFAULT_TOL) {
        Ok(r) => {
            let note = (!r.divisible).then(|| {
                let v: Vec<String> = r.violations.iter().map(|s| format!("{{{s}}}")).collect();
                format!("violations at {}", v.join(", "))
            });
            report.push(Check::boolean("divisibility", r.divisible, note));
            r.divisible
        }
        Err(e) => {
            report.push(Check::failed("divisibility", &e));
            false
        }
    };
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let basis = (0..5)
        .map(|_| {
            let theta: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(0.0..3.0)).collect();
            basis_identity_error(model, &theta)
        })
        .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)));
    report.push_result("basis_identity", basis.map(|w| Check::absolute("basis_identity", 0.0, w, 1e-12)));
    // Check groups are independent; results are appended in a fixed order.
    let groups: Vec<Result<Vec<Check>>> = std::thread::scope(|scope| {
        let density = scope.spawn(|| if divisible { density_checks(model, opts) } else { Ok(Vec::new()) });
        let copula = scope.spawn(|| if divisible { copula_group(model, opts) } else { Ok(Vec::new()) });
        let reductions = scope.spawn(|| reduction_checks(&opts.series));
        let identities = scope.spawn(|| Ok(identity_checks(&opts.series)));
        [density, copula, reductions, identities]
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("check thread panicked".into()))))
            .collect()
    });
    if !divisible {
        for name in ["density", "copula", "dependence"] {
            report.push(Check::skipped(name, "model is not infinitely divisible"));
        }
    }
    for (name, g) in ["density", "copula", "series_reductions", "identities"].into_iter().zip(groups) {
        report.extend(name, g);
    }
    report.push_result(
        "integral",
        integrate(|x| x, 0.0, 1.0, &QuadControl::default())
            .map(|r| Check::absolute("quadrature_self_test", 0.5, r.value, 1e-15)),
    );
    report
}

/// Writes the copula cdf and pdf on the grid `((k + ½)/m)ⁿ`, with the
/// model log density at the matching gamma quantiles when it exists.
pub fn emit_grid<W: std::io::Write>(model: &AffineModel, m: usize, series: &SeriesControl, out: &mut W) -> Result<()> {
    let n = model.dim();
    if n > 4 || m == 0 {
        return Err(Error::arg("grids are limited to n <= 4 and m >= 1"));
    }
    let c = CopulaModel::build(model)?;
    let marg = model.marginal_params();
    let mut header: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    header.extend(["cdf".into(), "pdf".into()]);
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("logpdf".into());
    writeln!(out, "{}", header.join(","))?;
    let mut idx = vec![0usize; n];
    loop {
        let v: Vec<f64> = idx.iter().map(|&k| (k as f64 + 0.5) / m as f64).collect();
        let x: Vec<f64> =
            v.iter().zip(&marg).map(|(&u, &(p, a))| gamma_marginal_quantile(p, a, u)).collect::<Result<_>>()?;
        let lp = match model_logpdf(model, &x, series) {
            Ok(l) => l,
            Err(Error::Argument(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        let mut row: Vec<String> = v.iter().map(|z| format!("{z:.16e}")).collect();
        row.push(format!("{:.16e}", c.cdf(&v)?));
        row.push(format!("{:.16e}", c.pdf(&v)?));
        row.extend(x.iter().map(|z| format!("{z:.16e}")));
        row.push(format!("{lp:.16e}"));
        writeln!(out, "{}", row.join(","))?;
        let mut a = n;
        loop {
            if a == 0 {
                return Ok(());
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
        }
    }
}
