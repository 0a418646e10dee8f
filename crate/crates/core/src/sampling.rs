//! Random variates: gamma marginals, bivariate `γ(P, λ)` as a negative
//! binomial mixture of independent gamma pairs, multi-factor laws as
//! `X = Y + Z`, and copula draws by conditional inversion.
//!
//! The generator is ChaCha20 keyed by `(seed, stream)`; draws are bit-exact
//! reproducible for a fixed pair.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::copulas::CopulaModel;
use crate::densities::{bivariate_c, gamma_marginal_quantile};
use crate::error::{Error, Result};
use crate::polynomial::AffineModel;
use crate::specialfn::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn generator(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Gamma variate with scale `p` (Marsaglia–Tsang; shapes below one are
/// boosted by `U^{1/shape}`).
pub fn sample_gamma<R: Rng + ?Sized>(p: f64, shape: f64, rng: &mut R) -> f64 {
    debug_assert!(p > 0.0 && shape > 0.0);
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        let g = standard_gamma(shape + 1.0, rng);
        return p * (g.ln() + u.ln() / shape).exp().max(f64::MIN_POSITIVE);
    }
    p * standard_gamma(shape, rng)
}

fn standard_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// Mixture sampler for bivariate `γ(P, λ)`:
///
/// ```text
/// K ~ NegBin:  w_k = (1 − r)^λ (λ)_k r^k / k!,   r = 1 − p12/(p1 p2)
/// X1 | K ~ Gamma(λ + K, scale p12/p2),   X2 | K ~ Gamma(λ + K, scale p12/p1)
/// ```
///
/// The weights are checked on construction against the term-by-term
/// expansion of the density's `₀F₁` factor.
#[derive(Clone, Debug)]
pub struct BivariateGammaSampler {
    lambda: f64,
    r: f64,
    scales: (f64, f64),
    cumulative: Vec<f64>,
    last_weight: f64,
}

/// Tail mass left out of the weight table.
const WEIGHT_TAIL: f64 = 1e-14;
const MAX_TABLE: usize = 50_000_000;

impl BivariateGammaSampler {
    pub fn new(model: &AffineModel) -> Result<Self> {
        if model.dim() != 2 || !model.shapes().is_pure() {
            return Err(Error::arg("bivariate gamma sampler needs n = 2 and lambda_1 = lambda_2 = lambda"));
        }
        let poly = model.poly();
        let (p1, p2, p12) = (poly.linear(0), poly.linear(1), poly.top());
        let c = bivariate_c(p1, p2, p12)?;
        let lambda = model.lambda();
        let r = 1.0 - p12 / (p1 * p2);
        if !(r < 1.0) {
            return Err(Error::domain("r12 = 1 has no mixture representation"));
        }
        let w0 = (lambda * (1.0 - r).ln()).exp();
        let mut cumulative = vec![w0];
        let mut w = w0;
        let mut sum = w0;
        let mut k = 0usize;
        loop {
            let kf = k as f64;
            let ratio = (lambda + kf) * r / (kf + 1.0);
            // Geometric tail bound once the ratio stays below one.
            if ratio < 1.0 && w * ratio / (1.0 - ratio) < WEIGHT_TAIL {
                break;
            }
            if cumulative.len() >= MAX_TABLE {
                return Err(Error::Numeric(format!("mixture table exceeds {MAX_TABLE} entries (r12 = {r})")));
            }
            w *= ratio;
            sum += w;
            cumulative.push(sum);
            k += 1;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Numeric(format!("mixture weights sum to {sum}, not 1")));
        }
        // Term-by-term match with the density expansion:
        // p12^{-λ} c^k Γ(λ+k)² (s1 s2)^{λ+k} / (Γ(λ)² (λ)_k k!)
        let (s1, s2) = (p12 / p2, p12 / p1);
        let mut prev = 0.0;
        for (j, &cum) in cumulative.iter().enumerate().take(50) {
            let weight = cum - prev;
            prev = cum;
            let jf = j as f64;
            let ln_poch = ln_gamma(lambda + jf) - ln_gamma(lambda);
            let ln_c = if j == 0 { 0.0 } else { jf * c.ln() };
            let ln_term = -lambda * p12.ln() + ln_c + 2.0 * ln_gamma(lambda + jf) + (lambda + jf) * (s1 * s2).ln()
                - 2.0 * ln_gamma(lambda)
                - ln_poch
                - ln_gamma(jf + 1.0);
            let term = ln_term.exp();
            if weight > 1e-300 && (weight - term).abs() > 1e-9 * term.max(1e-300) + 1e-15 {
                return Err(Error::Numeric(format!("mixture weight {j} is {weight}, expansion gives {term}")));
            }
        }
        Ok(Self { lambda, r, scales: (s1, s2), cumulative, last_weight: w })
    }

    pub fn mixture_table_len(&self) -> usize {
        self.cumulative.len()
    }

    /// Mixing index by inversion of the tabulated cdf.
    fn mixing_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.sample(Open01);
        let k = self.cumulative.partition_point(|&c| c < u);
        if k < self.cumulative.len() {
            return k;
        }
        // Beyond the table: continue the recurrence.
        let mut k = self.cumulative.len() - 1;
        let mut w = self.last_weight;
        let mut cum = self.cumulative[k];
        while cum < u && w > 0.0 {
            let kf = k as f64;
            w *= (self.lambda + kf) * self.r / (kf + 1.0);
            cum += w;
            k += 1;
        }
        k
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let k = self.mixing_index(rng) as f64;
        let shape = self.lambda + k;
        [sample_gamma(self.scales.0, shape, rng), sample_gamma(self.scales.1, shape, rng)]
    }
}

/// Samples `γ(P, Λ)` exactly for `n = 2` as `Y + Z`. For `n = 3` it draws
/// gamma marginals joined by the Laplace copula, which is a different law
/// with the same marginals.
#[derive(Clone, Debug)]
pub enum MultifactorSampler {
    Bivariate { y: BivariateGammaSampler, extra: Vec<(f64, f64)> },
    Copula { copula: CopulaModel, marginals: Vec<(f64, f64)> },
}

impl MultifactorSampler {
    pub fn new(model: &AffineModel) -> Result<Self> {
        match model.dim() {
            2 => {
                let pure = AffineModel::new(
                    model.poly().clone(),
                    crate::polynomial::ShapeParams::uniform(2, model.lambda())?,
                )?;
                let y = BivariateGammaSampler::new(&pure)?;
                let extra = model.marginal_params().into_iter().map(|(p, l)| (p, l - model.lambda())).collect();
                Ok(Self::Bivariate { y, extra })
            }
            3 => Ok(Self::Copula { copula: CopulaModel::build(model)?, marginals: model.marginal_params() }),
            n => Err(Error::arg(format!("no sampler for n = {n}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::Bivariate { y, extra } => {
                let mut x = y.sample(rng).to_vec();
                for (xi, &(p, shape)) in x.iter_mut().zip(extra) {
                    if shape > 0.0 {
                        *xi += sample_gamma(p, shape, rng);
                    }
                }
                Ok(x)
            }
            Self::Copula { copula, marginals } => {
                let v = sample_copula3(copula, rng)?;
                v.iter().zip(marginals).map(|(&u, &(p, shape))| gamma_marginal_quantile(p, shape, u)).collect()
            }
        }
    }
}

/// Where [`draw`] samples: the model itself or its Laplace copula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSpace {
    Gamma,
    Copula,
}

/// `count` draws, row-major with `model.dim()` columns.
pub fn draw(model: &AffineModel, space: SampleSpace, count: usize, rng_spec: RngSpec) -> Result<Vec<f64>> {
    let mut rng = rng_spec.generator();
    let d = model.dim();
    let mut out = Vec::with_capacity(count * d);
    match (space, d) {
        (SampleSpace::Gamma, 1) => {
            let (p, a) = model.marginal_params()[0];
            out.extend((0..count).map(|_| sample_gamma(p, a, &mut rng)));
        }
        (SampleSpace::Gamma, _) => {
            let s = MultifactorSampler::new(model)?;
            for _ in 0..count {
                out.extend(s.sample(&mut rng)?);
            }
        }
        (SampleSpace::Copula, 1) => out.extend((0..count).map(|_| rng.random::<f64>())),
        (SampleSpace::Copula, 2) => {
            let c = CopulaModel::build(model)?;
            for _ in 0..count {
                out.extend(sample_copula(&c, &mut rng)?);
            }
        }
        (SampleSpace::Copula, 3) => {
            let c = CopulaModel::build(model)?;
            for _ in 0..count {
                out.extend(sample_copula3(&c, &mut rng)?);
            }
        }
        (SampleSpace::Copula, d) => return Err(Error::arg(format!("no copula sampler for n = {d}"))),
    }
    Ok(out)
}

/// Root tolerance of the conditional inversions.
pub const ROOT_TOL: f64 = 1e-12;

/// Solves `g(x) = target` on `[0, 1]` for a non-decreasing `g` with
/// `g(0) = 0`, `g(1) = 1`: secant steps kept inside a shrinking bracket, with
/// bisection whenever a step fails to halve it.
pub fn invert_unit<G: FnMut(f64) -> Result<f64>>(mut g: G, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut flo, mut fhi) = (-target, 1.0 - target);
    let mut bisect = false;
    for _ in 0..200 {
        let width = hi - lo;
        if width <= ROOT_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mut x = if bisect || fhi == flo { 0.5 * (lo + hi) } else { lo - flo * width / (fhi - flo) };
        let margin = 0.01 * width;
        if !(x > lo + margin && x < hi - margin) {
            x = x.clamp(lo + margin, hi - margin);
        }
        let fx = g(x)? - target;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        bisect = hi - lo > 0.5 * width;
    }
    Err(Error::Numeric(format!("conditional inversion did not converge for target {target} (bracket [{lo}, {hi}])")))
}

/// Bivariate copula draw: `U1` uniform, then `V2` solving `∂C/∂v1(U1, V2) = U2`.
pub fn sample_copula<R: Rng + ?Sized>(c: &CopulaModel, rng: &mut R) -> Result<[f64; 2]> {
    if c.dim() != 2 {
        return Err(Error::arg("sample_copula needs a bivariate copula"));
    }
    let u1: f64 = rng.sample(Open01);
    let t: f64 = rng.sample(Open01);
    let v2 = invert_unit(|x| Ok(c.conditional2_unchecked(u1, x)), t)?;
    Ok([u1, v2])
}

/// Trivariate copula draw by the Rosenblatt transform.
pub fn sample_copula3<R: Rng + ?Sized>(c: &CopulaModel, rng: &mut R) -> Result<[f64; 3]> {
    if c.dim() != 3 {
        return Err(Error::arg("sample_copula3 needs a trivariate copula"));
    }
    let u1: f64 = rng.sample(Open01);
    let t2: f64 = rng.sample(Open01);
    let t3: f64 = rng.sample(Open01);
    let s1 = 0b001;
    let s12 = 0b011;
    let den = c.partial_unchecked(&[u1, 1.0, 1.0], s1);
    let v2 = invert_unit(|x| Ok(c.partial_unchecked(&[u1, x, 1.0], s1) / den), t2)?;
    let den = c.partial_unchecked(&[u1, v2, 1.0], s12);
    if !(den > 0.0) {
        return Err(Error::Numeric(format!("conditional density {den} at ({u1}, {v2}) is not positive")));
    }
    let v3 = invert_unit(|x| Ok(c.partial_unchecked(&[u1, v2, x], s12) / den), t3)?;
    Ok([u1, v2, v3])
}
