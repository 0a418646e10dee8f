//! Laplace copulas of multivariate and multi-factor gamma laws, and Sklar
//! assembly with arbitrary gamma marginals.
//!
//! ```text
//! C(v) = Π v_i · K(v)^{−λ},   K(v) = 1 + Σ_{|T|≥2} α_T Π_{t∈T} w_t,   w_t = 1 − v_t^{1/λ_t}
//! ```
//!
//! Mixed partial derivatives are analytic for every `n`: `K` is multilinear
//! in `w`, so `∂_B K = Π_{i∈B} w_i' · Σ_{T⊇B} α_T Π_{t∈T∖B} w_t`, and the
//! outer power is differentiated over set partitions (Faà di Bruno).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::densities::{gamma_marginal_cdf, gamma_marginal_logpdf};
use crate::divisibility::{check_infinite_divisibility, for_each_partition, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::polynomial::{AffineModel, CoeffMap, SubsetMask};
use crate::specialfn::pochhammer;

/// Random rectangles tested when a model is admitted without the divisibility gate.
pub const FORCED_RECTANGLES: usize = 10_000;
/// Most negative rectangle mass tolerated by that test.
pub const RECTANGLE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CopulaModel {
    n: usize,
    alpha: CoeffMap,
    /// Non-zero `(T, α_T)` with `|T| ≥ 2`.
    terms: Vec<(u32, f64)>,
    lambda: f64,
    lambdas: Vec<f64>,
    forced: bool,
}

impl CopulaModel {
    /// The copula of `γ(P, Λ)`; the model must pass the divisibility test.
    pub fn build(model: &AffineModel) -> Result<Self> {
        let report = check_infinite_divisibility(model.poly(), DEFAULT_TOL)?;
        if !report.divisible {
            let bad: Vec<String> = report.violations.iter().map(|s| format!("{{{s}}}")).collect();
            return Err(Error::Model(format!("not infinitely divisible (violations at {})", bad.join(", "))));
        }
        let c = Self::from_model_unchecked(model, false)?;
        c.check_corners().map_err(|e| match e {
            Error::Model(m) => Error::Numeric(format!("kernel check failed on a divisible model: {m}")),
            other => other,
        })?;
        Ok(c)
    }

    /// Skips the divisibility gate; the kernel must then be positive at every
    /// corner and [`FORCED_RECTANGLES`] random rectangles must carry mass
    /// `≥ −RECTANGLE_TOL`.
    pub fn build_forced(model: &AffineModel) -> Result<Self> {
        let c = Self::from_model_unchecked(model, true)?;
        c.check_corners()?;
        let worst = c.min_rectangle_mass(FORCED_RECTANGLES, 0x5eed)?;
        if worst < -RECTANGLE_TOL {
            return Err(Error::Model(format!("rectangle with negative mass {worst:e}")));
        }
        Ok(c)
    }

    /// Direct construction from FGM coefficients (`α_∅ = 1`, singletons 0).
    pub fn from_parts(alpha: CoeffMap, lambda: f64, lambdas: Vec<f64>) -> Result<Self> {
        let n = alpha.dim();
        if lambdas.len() != n {
            return Err(Error::arg(format!("{} shapes for dimension {n}", lambdas.len())));
        }
        if !(lambda > 0.0) || lambdas.iter().any(|&l| !(l >= lambda) || !l.is_finite()) {
            return Err(Error::arg("need lambda_i >= lambda > 0"));
        }
        if alpha.get(SubsetMask::empty(n)) != 1.0 || (0..n).any(|i| alpha.get(SubsetMask::singleton(n, i)) != 0.0) {
            return Err(Error::arg("alpha must have alpha_{} = 1 and zero singletons"));
        }
        let terms = alpha.iter().filter(|(t, a)| t.len() >= 2 && *a != 0.0).map(|(t, a)| (t.bits(), a)).collect();
        let c = Self { n, alpha, terms, lambda, lambdas, forced: true };
        c.check_corners()?;
        Ok(c)
    }

    fn from_model_unchecked(model: &AffineModel, forced: bool) -> Result<Self> {
        let alpha = model.poly().fgm_coefficients()?;
        let mut c = Self::from_parts_raw(alpha, model.lambda(), model.lambdas().to_vec());
        c.forced = forced;
        Ok(c)
    }

    fn from_parts_raw(alpha: CoeffMap, lambda: f64, lambdas: Vec<f64>) -> Self {
        let terms = alpha.iter().filter(|(t, a)| t.len() >= 2 && *a != 0.0).map(|(t, a)| (t.bits(), a)).collect();
        Self { n: alpha.dim(), alpha, terms, lambda, lambdas, forced: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> &CoeffMap {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Whether the divisibility gate was skipped.
    pub fn is_forced(&self) -> bool {
        self.forced
    }

    /// `r_12 = −α_12` of a bivariate copula.
    pub fn r12(&self) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::arg("r12 needs a bivariate copula"));
        }
        Ok(-self.alpha.get(SubsetMask::full(2)))
    }

    /// Kernel values at the `2^n` corners, `K(W) = Σ_{T⊆W} α_T` (zeta transform).
    pub fn corner_kernels(&self) -> Vec<f64> {
        let mut z = self.alpha.as_slice().to_vec();
        for i in 0..self.n {
            let bit = 1usize << i;
            for m in 0..z.len() {
                if m & bit != 0 {
                    z[m] += z[m ^ bit];
                }
            }
        }
        z
    }

    fn check_corners(&self) -> Result<()> {
        for (m, k) in self.corner_kernels().into_iter().enumerate() {
            if !(k > 0.0) {
                let s = SubsetMask::new(m as u32, self.n)?;
                return Err(Error::Model(format!("kernel is {k} <= 0 at corner w = 1 on {{{s}}}")));
            }
        }
        Ok(())
    }

    /// Smallest inclusion–exclusion mass over `count` random rectangles.
    pub fn min_rectangle_mass(&self, count: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        let mut lo = vec![0.0; self.n];
        let mut hi = vec![0.0; self.n];
        for _ in 0..count {
            for i in 0..self.n {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                lo[i] = a.min(b);
                hi[i] = a.max(b);
            }
            worst = worst.min(self.rectangle_mass(&lo, &hi)?);
        }
        Ok(worst)
    }

    /// `Σ_{corners} ± C(corner)` over the box `[lo, hi]`.
    pub fn rectangle_mass(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let mut corner = vec![0.0; self.n];
        let mut mass = 0.0;
        for m in 0..(1usize << self.n) {
            let mut lows = 0;
            for i in 0..self.n {
                if m >> i & 1 == 1 {
                    corner[i] = hi[i];
                } else {
                    corner[i] = lo[i];
                    lows += 1;
                }
            }
            let c = self.cdf(&corner)?;
            mass += if lows % 2 == 0 { c } else { -c };
        }
        Ok(mass)
    }

    fn check_unit(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::arg(format!("expected {} coordinates, got {}", self.n, v.len())));
        }
        if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::arg(format!("coordinate {x} outside [0, 1]")));
        }
        Ok(())
    }

    fn check_interior(&self, v: &[f64]) -> Result<()> {
        self.check_unit(v)?;
        if let Some(x) = v.iter().find(|&&x| x == 0.0 || x == 1.0) {
            return Err(Error::domain(format!("coordinate {x} on the boundary of (0, 1)")));
        }
        Ok(())
    }

    /// `w_t = 1 − v_t^{1/λ_t}`.
    fn w(&self, i: usize, v: f64) -> f64 {
        if v == 1.0 {
            0.0
        } else if v == 0.0 {
            1.0
        } else {
            -(v.ln() / self.lambdas[i]).exp_m1()
        }
    }

    /// `dw_t/dv_t = −(1/λ_t) v_t^{1/λ_t − 1}`.
    fn dw(&self, i: usize, v: f64) -> f64 {
        let l = self.lambdas[i];
        if v == 1.0 {
            -1.0 / l
        } else {
            -((1.0 / l - 1.0) * v.ln()).exp() / l
        }
    }

    fn kernel_w(&self, w: &[f64]) -> f64 {
        let mut k = 1.0;
        for &(t, a) in &self.terms {
            let mut prod = a;
            let mut bits = t;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                prod *= w[i];
                bits &= bits - 1;
            }
            k += prod;
        }
        k
    }

    /// The kernel `K(v)`.
    pub fn kernel(&self, v: &[f64]) -> Result<f64> {
        self.check_unit(v)?;
        let w: Vec<f64> = v.iter().enumerate().map(|(i, &x)| self.w(i, x)).collect();
        Ok(self.kernel_w(&w))
    }

    /// `C(v)`. Exact zero when some `v_i = 0`; exact `v_j` when all others are 1.
    pub fn cdf(&self, v: &[f64]) -> Result<f64> {
        self.check_unit(v)?;
        if v.contains(&0.0) {
            return Ok(0.0);
        }
        let mut prod = 1.0;
        let mut w = [0.0; 16];
        for (i, &x) in v.iter().enumerate() {
            prod *= x;
            w[i] = self.w(i, x);
        }
        let k = self.kernel_w(&w[..self.n]);
        if k == 1.0 {
            return Ok(prod);
        }
        Ok((prod * k.powf(-self.lambda)).clamp(0.0, 1.0))
    }

    /// Bivariate copula density (closed form).
    pub fn pdf2(&self, v: &[f64]) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::arg("pdf2 needs a bivariate copula"));
        }
        self.check_interior(v)?;
        Ok(self.pdf2_unchecked(v[0], v[1]))
    }

    fn pdf2_unchecked(&self, v1: f64, v2: f64) -> f64 {
        let r = -self.alpha.get(SubsetMask::full(2));
        let (l1, l2, lambda) = (self.lambdas[0], self.lambdas[1], self.lambda);
        let (w1, w2) = (self.w(0, v1), self.w(1, v2));
        let (a1, a2) = (1.0 - w1, 1.0 - w2);
        let beta1 = 1.0 - lambda / l1;
        let k = 1.0 - r * w1 * w2;
        let g1 = 1.0 - r * w2 * (1.0 - beta1 * a1);
        let bracket = k * g1 - (lambda + 1.0) * r * w1 * a2 * g1 / l2 + k * r * (1.0 - beta1 * a1) * a2 / l2;
        k.powf(-lambda - 2.0) * bracket
    }

    /// `∂C/∂v1 (v1, v2)`: the cdf of `V2` given `V1 = v1`.
    pub fn conditional_cdf(&self, v1: f64, v2: f64) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::arg("conditional_cdf needs a bivariate copula"));
        }
        self.check_unit(&[v1, v2])?;
        if v1 == 0.0 || v1 == 1.0 {
            return Err(Error::domain(format!("conditioning value {v1} on the boundary of (0, 1)")));
        }
        if v2 == 0.0 {
            return Ok(0.0);
        }
        if v2 == 1.0 {
            return Ok(1.0);
        }
        Ok(self.conditional_unchecked(v1, v2).clamp(0.0, 1.0))
    }

    fn conditional_unchecked(&self, v1: f64, v2: f64) -> f64 {
        let r = -self.alpha.get(SubsetMask::full(2));
        let (w1, w2) = (self.w(0, v1), self.w(1, v2));
        let a1 = 1.0 - w1;
        let beta1 = 1.0 - self.lambda / self.lambdas[0];
        let k = 1.0 - r * w1 * w2;
        let g1 = 1.0 - r * w2 * (1.0 - beta1 * a1);
        v2 * k.powf(-self.lambda - 1.0) * g1
    }

    /// Mixed partial `∂_S C(v)` for `v ∈ (0, 1]^n`.
    pub fn partial(&self, v: &[f64], s: SubsetMask) -> Result<f64> {
        self.check_unit(v)?;
        if s.dim() != self.n {
            return Err(Error::arg("subset dimension does not match the copula"));
        }
        if let Some(i) = s.iter().find(|&i| v[i] == 0.0) {
            return Err(Error::domain(format!("v_{} = 0 in a differentiated coordinate", i + 1)));
        }
        if v.contains(&0.0) {
            return Ok(0.0);
        }
        Ok(self.partial_unchecked(v, s.bits()))
    }

    pub(crate) fn partial_unchecked(&self, v: &[f64], s: u32) -> f64 {
        let n = self.n;
        let w: Vec<f64> = (0..n).map(|i| self.w(i, v[i])).collect();
        let dw: Vec<f64> = (0..n).map(|i| if s >> i & 1 == 1 { self.dw(i, v[i]) } else { 0.0 }).collect();
        // dk[B] = ∂_B K for B ⊆ S (indexed by the mask).
        let mut dk = vec![0.0; 1usize << n];
        let mut b = s;
        loop {
            let mut sum = if b == 0 { 1.0 } else { 0.0 };
            for &(t, a) in &self.terms {
                if t & b != b {
                    continue;
                }
                let mut prod = a;
                let mut rest = t & !b;
                while rest != 0 {
                    prod *= w[rest.trailing_zeros() as usize];
                    rest &= rest - 1;
                }
                sum += prod;
            }
            let mut scale = 1.0;
            let mut bits = b;
            while bits != 0 {
                scale *= dw[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            dk[b as usize] = scale * sum;
            if b == 0 {
                break;
            }
            b = (b - 1) & s;
        }
        let k = dk[0];
        let card = s.count_ones() as usize;
        // f^{(m)}(K) = (−1)^m (λ)_m K^{−λ−m}
        let fder: Vec<f64> = (0..=card)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * pochhammer(self.lambda, m) * k.powf(-self.lambda - m as f64)
            })
            .collect();
        let all = (1u32 << n) - 1;
        let mut total = 0.0;
        let mut a = s;
        loop {
            // ∂_{S∖A} Π v_i = Π_{i ∉ S∖A} v_i
            let mut vprod = 1.0;
            let keep = all & !(s & !a);
            let mut bits = keep;
            while bits != 0 {
                vprod *= v[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            let dh = if a == 0 {
                fder[0]
            } else {
                let mut acc = 0.0;
                let mask = SubsetMask::new(a, n).expect("mask within dimension");
                for_each_partition(mask, |blocks| {
                    let mut prod = fder[blocks.len()];
                    for &blk in blocks {
                        prod *= dk[blk as usize];
                    }
                    acc += prod;
                });
                acc
            };
            total += vprod * dh;
            if a == 0 {
                break;
            }
            a = (a - 1) & s;
        }
        total
    }

    /// Copula density `∂_{[n]} C(v)` on the open cube; closed form for
    /// `n = 2`.
    pub fn pdf(&self, v: &[f64]) -> Result<f64> {
        self.check_interior(v)?;
        if self.n == 2 {
            return Ok(self.pdf2_unchecked(v[0], v[1]));
        }
        Ok(self.partial_unchecked(v, SubsetMask::full(self.n).bits()))
    }

    /// Rosenblatt step: the cdf of `V_{k+1}` at `x` given `V_1..V_k = prefix`,
    /// i.e. `∂_{1..k} C(prefix, x, 1, …) / ∂_{1..k} C(prefix, 1, …)`.
    pub fn rosenblatt_conditional(&self, prefix: &[f64], x: f64) -> Result<f64> {
        let k = prefix.len();
        if k == 0 || k >= self.n {
            return Err(Error::arg(format!("conditioning prefix of length {k} in dimension {}", self.n)));
        }
        if prefix.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::domain("conditioning values must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::arg(format!("coordinate {x} outside [0, 1]")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if x == 1.0 {
            return Ok(1.0);
        }
        let mut v = vec![1.0; self.n];
        v[..k].copy_from_slice(prefix);
        let s = (1u32 << k) - 1;
        let den = self.partial_unchecked(&v, s);
        v[k] = x;
        let num = self.partial_unchecked(&v, s);
        if !(den > 0.0) {
            return Err(Error::Numeric(format!("conditional density {den} is not positive")));
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    pub(crate) fn conditional2_unchecked(&self, v1: f64, v2: f64) -> f64 {
        self.conditional_unchecked(v1, v2)
    }
}

/// A copula coupled with gamma marginals `(scale, shape)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledDistribution {
    copula: CopulaModel,
    marginals: Vec<(f64, f64)>,
}

impl AssembledDistribution {
    pub fn new(copula: CopulaModel, marginals: Vec<(f64, f64)>) -> Result<Self> {
        if marginals.len() != copula.dim() {
            return Err(Error::arg(format!(
                "{} marginals for a copula of dimension {}",
                marginals.len(),
                copula.dim()
            )));
        }
        if marginals.iter().any(|&(p, a)| !(p > 0.0 && a > 0.0 && p.is_finite() && a.is_finite())) {
            return Err(Error::arg("marginal scales and shapes must be finite and > 0"));
        }
        Ok(Self { copula, marginals })
    }

    pub fn copula(&self) -> &CopulaModel {
        &self.copula
    }

    pub fn marginals(&self) -> &[(f64, f64)] {
        &self.marginals
    }

    fn uniforms(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.marginals.len() {
            return Err(Error::arg(format!("expected {} coordinates, got {}", self.marginals.len(), x.len())));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::arg("point has NaN coordinates"));
        }
        Ok(x.iter().zip(&self.marginals).map(|(&xi, &(p, a))| gamma_marginal_cdf(p, a, xi)).collect())
    }

    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        let v = self.uniforms(x)?;
        self.copula.cdf(&v)
    }

    /// `log c(F(x)) + Σ log f_i(x_i)`.
    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        let v = self.uniforms(x)?;
        if x.iter().any(|&xi| !(xi > 0.0) || xi.is_infinite()) {
            return Ok(f64::NEG_INFINITY);
        }
        let v: Vec<f64> = v.into_iter().map(|u| u.max(f64::MIN_POSITIVE)).collect();
        let c = if self.copula.dim() == 2 {
            self.copula.pdf2_unchecked(v[0], v[1])
        } else {
            self.copula.partial_unchecked(&v, SubsetMask::full(self.copula.dim()).bits())
        };
        let marg: f64 = x.iter().zip(&self.marginals).map(|(&xi, &(p, a))| gamma_marginal_logpdf(p, a, xi)).sum();
        Ok(c.ln() + marg)
    }
}
