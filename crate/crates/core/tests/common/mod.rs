//! Shared test support: independent oracles and model generators.
#![allow(dead_code)]

use gammacop::copulas::CopulaModel;
use gammacop::divisibility::check_infinite_divisibility;
use gammacop::polynomial::{AffineModel, AffinePolynomial, ShapeParams};
use rand::Rng;

/// Product in the square-free algebra `R[z_1..z_n]/(z_i²)`, dense by mask.
pub fn subset_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let size = a.len();
    let mut out = vec![0.0; size];
    for s in 0..size {
        let mut t = s;
        loop {
            out[s] += a[t] * b[s ^ t];
            if t == 0 {
                break;
            }
            t = (t - 1) & s;
        }
    }
    out
}

/// `Σ_{k≥1} x^k / k`, i.e. `−log(1 − x)`, for `x` without constant term.
pub fn neg_log_one_minus(x: &[f64], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; x.len()];
    let mut power = x.to_vec();
    for k in 1..=n {
        for (a, p) in acc.iter_mut().zip(&power) {
            *a += p / k as f64;
        }
        power = subset_mul(&power, x);
    }
    acc
}

/// `exp(x) = Σ x^k / k!` for `x` without constant term.
pub fn subset_exp(x: &[f64], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; x.len()];
    acc[0] = 1.0;
    let mut power = acc.clone();
    let mut fact = 1.0;
    for k in 1..=n {
        power = subset_mul(&power, x);
        fact *= k as f64;
        for (a, p) in acc.iter_mut().zip(&power) {
            *a += p / fact;
        }
    }
    acc
}

/// `b̃_S` through the exponential formula: coefficients of `−log(1 − u)` with
/// `u = Σ_{T≠∅} p̃_T z^T`. Also returns the same sum with `|p̃|`, a scale for
/// relative comparisons.
pub fn btilde_oracle(dual: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = dual.to_vec();
    u[0] = 0.0;
    let abs: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    (neg_log_one_minus(&u, n), neg_log_one_minus(&abs, n))
}

/// Polynomial whose `b̃` are the given values: inverts the exponential
/// formula, `u = 1 − exp(−b̃)`, then `p_S = p̃_{S̄} / p̃_{[n]}`.
pub fn polynomial_from_btilde(b: &[f64], n: usize) -> Option<Vec<f64>> {
    let neg: Vec<f64> = b.iter().map(|x| -x).collect();
    let e = subset_exp(&neg, n);
    let full = (1usize << n) - 1;
    let mut dual: Vec<f64> = e.iter().map(|x| -x).collect();
    dual[0] = -1.0;
    let top_dual = dual[full];
    if top_dual >= 0.0 || top_dual.is_nan() {
        return None;
    }
    Some((0..=full).map(|s| dual[full ^ s] / top_dual).collect())
}

/// A random infinitely divisible model with all coefficients positive.
/// `multi` draws `λ_i ≥ λ`; otherwise all shapes equal `λ`.
pub fn random_divisible_model<R: Rng>(rng: &mut R, n: usize, multi: bool) -> AffineModel {
    loop {
        let size = 1usize << n;
        let mut b = vec![0.0; size];
        for (s, slot) in b.iter_mut().enumerate().skip(1) {
            *slot = if s.count_ones() == 1 { -rng.random_range(0.4..2.5) } else { rng.random_range(0.0..0.8) };
        }
        let Some(p) = polynomial_from_btilde(&b, n) else { continue };
        if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            continue;
        }
        let Ok(poly) = AffinePolynomial::new(n, p) else { continue };
        let lambda = rng.random_range(0.3..3.0);
        let lambdas: Vec<f64> =
            (0..n).map(|_| if multi { lambda * (1.0 + rng.random_range(0.0..2.0)) } else { lambda }).collect();
        let Ok(shapes) = ShapeParams::new(lambda, lambdas) else { continue };
        let Ok(model) = AffineModel::new(poly, shapes) else { continue };
        let ok = check_infinite_divisibility(model.poly(), 1e-12).map(|r| r.divisible).unwrap_or(false);
        if ok && CopulaModel::build(&model).is_ok() {
            return model;
        }
    }
}

pub fn model2(p1: f64, p2: f64, p12: f64, lambda: f64, l1: f64, l2: f64) -> AffineModel {
    AffineModel::new(AffinePolynomial::bivariate(p1, p2, p12).unwrap(), ShapeParams::new(lambda, vec![l1, l2]).unwrap())
        .unwrap()
}

/// Bivariate copula with correlation parameter `r`: `p_1 = p_2 = 1`, `p_12 = 1 − r`.
pub fn copula_with_r(r: f64, lambda: f64, l1: f64, l2: f64) -> CopulaModel {
    CopulaModel::build(&model2(1.0, 1.0, 1.0 - r, lambda, l1, l2)).unwrap()
}

/// `(a)_k` for `k = 0..len` by plain products.
pub fn poch_table(a: f64, len: usize) -> Vec<f64> {
    let mut t = vec![1.0; len];
    for k in 1..len {
        t[k] = t[k - 1] * (a + (k - 1) as f64);
    }
    t
}

pub fn fact_table(len: usize) -> Vec<f64> {
    poch_table(1.0, len)
}

/// Direct partial sum of `pFq` over `k < terms`, term by term.
pub fn naive_pfq(upper: &[f64], lower: &[f64], z: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    let mut t = 1.0;
    for k in 0..terms {
        sum += t;
        let kf = k as f64;
        t *= z / (kf + 1.0);
        for &a in upper {
            t *= a + kf;
        }
        for &b in lower {
            t /= b + kf;
        }
    }
    sum
}

/// Box sum of Horn's `Φ₃(a; b; x, y)`.
pub fn naive_phi3(a: f64, b: f64, x: f64, y: f64, m: usize) -> f64 {
    let pa = poch_table(a, m);
    let pb = poch_table(b, 2 * m);
    let f = fact_table(m);
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            sum += pa[i] / pb[i + j] * x.powi(i as i32) / f[i] * y.powi(j as i32) / f[j];
        }
    }
    sum
}

/// Box sum of `F_I(a, b, c; z₁, z₂, z₃)`.
pub fn naive_fi(a: f64, b: f64, c: f64, z: [f64; 3], m: usize) -> f64 {
    let (pa, pb, pc) = (poch_table(a, m), poch_table(b, m), poch_table(c, m));
    let pac = poch_table(a + c, 2 * m);
    let pbc = poch_table(b + c, 2 * m);
    let f = fact_table(m);
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                sum += pa[i] * pb[j] * pc[k] / (pac[i + k] * pbc[j + k]) * z[0].powi(i as i32) / f[i]
                    * z[1].powi(j as i32)
                    / f[j]
                    * z[2].powi(k as i32)
                    / f[k];
            }
        }
    }
    sum
}

/// Box sum of `F_II(λ₁, λ₂; z₁..z₄)`.
pub fn naive_fii(l1: f64, l2: f64, z: [f64; 4], m: usize) -> f64 {
    let p1 = poch_table(l1, 3 * m);
    let p2 = poch_table(l2, 4 * m);
    let f = fact_table(m);
    let pw = |x: f64, k: usize| x.powi(k as i32) / f[k];
    let mut sum = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    sum += pw(z[0], a) * pw(z[1], b) * pw(z[2], c) * pw(z[3], d) / (p1[a + b + c] * p2[2 * a + b + d]);
                }
            }
        }
    }
    sum
}

/// `C(v) = φ(φ_1^{-1}(v_1), …)` straight from the model's Laplace transform.
pub fn composition(model: &AffineModel, v: &[f64]) -> f64 {
    let marg = model.marginal_params();
    let theta: Vec<f64> = marg.iter().zip(v).map(|(&(p, l), &x)| (x.powf(-1.0 / l) - 1.0) / p).collect();
    let poly = model.poly();
    let n = model.dim();
    let mut value = 0.0;
    for s in 0..(1usize << n) {
        let mut t = poly.coeffs().as_slice()[s];
        for (i, th) in theta.iter().enumerate() {
            if s >> i & 1 == 1 {
                t *= th;
            }
        }
        value += t;
    }
    let mut ln = -model.lambda() * value.ln();
    for (&(p, l), th) in marg.iter().zip(&theta) {
        ln -= (l - model.lambda()) * (1.0 + p * th).ln();
    }
    ln.exp()
}

/// `C(hi) − …` by inclusion–exclusion over the box corners.
pub fn box_mass(c: &CopulaModel, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    let mut m = 0.0;
    for corner in 0..(1u32 << n) {
        let mut v = vec![0.0; n];
        let mut lows = 0;
        for i in 0..n {
            if corner >> i & 1 == 1 {
                v[i] = lo[i];
                lows += 1;
            } else {
                v[i] = hi[i];
            }
        }
        let sign = if lows % 2 == 0 { 1.0 } else { -1.0 };
        m += sign * c.cdf(&v).unwrap();
    }
    m
}
