//! Series special functions: Pochhammer symbols, the generalized
//! hypergeometric `pFq`, the Horn function `Φ₃`, and two generalized
//! Lauricella functions `F_I` (triple series) and `F_II` (quadruple series).
//!
//! All series are summed from term-ratio recurrences; no Gamma function is
//! called per term. Terms and partial sums are carried as `mantissa ·
//! e^scale` so that arguments producing terms beyond `f64` range still yield
//! a finite logarithm of the sum. While nothing overflows the scale stays at
//! zero and the arithmetic is plain floating point.
//!
//! The multi-index functions are summed as a lower-dimensional outer series
//! whose coefficients multiply inner `₀F₁`/`₁F₁` values: an index that only
//! enters through one Pochhammer shift collapses into such an inner function.
//!
//! ```text
//! Φ₃(a;b;x,y)         = Σ_m (a)_m x^m / ((b)_m m!) · ₀F₁(;b+m;y)
//! F_I(a,b,c;z1,z2,z3) = Σ_k (c)_k z3^k / ((a+c)_k (b+c)_k k!) · ₁F₁(a;a+c+k;z1) · ₁F₁(b;b+c+k;z2)
//! F_II(l1,l2;z1..z4)  = Σ_{m1,m2} z1^m1 z2^m2 / (m1! m2! (l1)_{m1+m2} (l2)_{2m1+m2})
//!                         · ₀F₁(;l1+m1+m2;z3) · ₀F₁(;l2+2m1+m2;z4)
//! ```

use crate::error::{Error, Result};

/// Tolerance and truncation policy shared by every series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesControl {
    /// Stop once terms fall below `rel_tol · |sum| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Term budget per summation index.
    pub max_terms: usize,
    /// Consecutive sub-tolerance terms required before stopping.
    pub tail_window: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-300, max_terms: 400, tail_window: 5 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_terms == 0 || self.tail_window == 0 {
            return Err(Error::arg(format!("invalid series control {self:?}")));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    /// Settings for slowly converging series at (or near) unit argument:
    /// tail window at least 20 and a budget of at least 10^5 terms.
    pub fn unit_argument(mut self) -> Self {
        self.tail_window = self.tail_window.max(20);
        self.max_terms = self.max_terms.max(100_000);
        self
    }

    /// Reads `GAMMACOP_MAX_TERMS`, if set, as a `max_terms` override.
    pub fn from_env() -> Result<Self> {
        let mut ctl = Self::default();
        if let Ok(raw) = std::env::var("GAMMACOP_MAX_TERMS") {
            ctl.max_terms = raw
                .trim()
                .parse()
                .map_err(|_| Error::arg(format!("GAMMACOP_MAX_TERMS=\"{raw}\" is not a positive integer")))?;
            ctl.validate()?;
        }
        Ok(ctl)
    }
}

/// A summed series: `sign · exp(ln_abs)`, with a relative error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesSum {
    pub ln_abs: f64,
    pub sign: f64,
    /// Estimated relative truncation error.
    pub est_error: f64,
    pub terms: usize,
}

impl SeriesSum {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    fn from_scaled(s: Scaled, est_error: f64, terms: usize) -> Self {
        Self { ln_abs: s.ln_abs(), sign: s.mant.signum() * (s.mant != 0.0) as i32 as f64, est_error, terms }
    }

    fn scaled(&self) -> Scaled {
        if self.sign == 0.0 {
            Scaled::ZERO
        } else {
            Scaled { mant: self.sign, scale: self.ln_abs }
        }
    }
}

/// `mant · e^scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Scaled {
    mant: f64,
    scale: f64,
}

const RENORM_HI: f64 = 1e150;
const RENORM_LO: f64 = 1e-150;

impl Scaled {
    pub(crate) const ZERO: Scaled = Scaled { mant: 0.0, scale: 0.0 };
    pub(crate) const ONE: Scaled = Scaled { mant: 1.0, scale: 0.0 };

    #[inline]
    fn normalized(mant: f64, scale: f64) -> Scaled {
        let a = mant.abs();
        if a > RENORM_HI || (a < RENORM_LO && a != 0.0) {
            Scaled { mant: mant.signum(), scale: scale + a.ln() }
        } else {
            Scaled { mant, scale }
        }
    }

    #[inline]
    fn mul(self, r: f64) -> Scaled {
        Self::normalized(self.mant * r, self.scale)
    }

    #[inline]
    fn mul_scaled(self, o: Scaled) -> Scaled {
        Self::normalized(self.mant * o.mant, self.scale + o.scale)
    }

    #[inline]
    fn add(self, o: Scaled) -> Scaled {
        if o.mant == 0.0 {
            return self;
        }
        if self.mant == 0.0 {
            return o;
        }
        if self.scale == o.scale {
            return Self::normalized(self.mant + o.mant, self.scale);
        }
        if self.scale > o.scale {
            Self::normalized(self.mant + o.mant * (o.scale - self.scale).exp(), self.scale)
        } else {
            Self::normalized(self.mant * (self.scale - o.scale).exp() + o.mant, o.scale)
        }
    }

    fn ln_abs(self) -> f64 {
        if self.mant == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mant.abs().ln() + self.scale
        }
    }

    fn abs(self) -> Scaled {
        Scaled { mant: self.mant.abs(), scale: self.scale }
    }

    /// `|self| / |other|` as a plain float.
    #[inline]
    fn ratio_to(self, other: Scaled) -> f64 {
        if self.mant == 0.0 {
            return 0.0;
        }
        if other.mant == 0.0 {
            return f64::INFINITY;
        }
        if self.scale == other.scale {
            (self.mant / other.mant).abs()
        } else {
            (self.ln_abs() - other.ln_abs()).exp()
        }
    }

    fn to_f64(self) -> f64 {
        if self.scale == 0.0 {
            self.mant
        } else {
            self.mant * self.scale.exp()
        }
    }
}

/// Tracks the stopping rule: `tail_window` consecutive terms below
/// `rel_tol · |sum| + abs_tol`, and a tail bound below the same threshold.
struct Stopper {
    ctl: SeriesControl,
    quiet: usize,
    prev: Option<Scaled>,
}

impl Stopper {
    fn new(ctl: SeriesControl) -> Self {
        Self { ctl, quiet: 0, prev: None }
    }

    /// Feeds the latest term (or diagonal sum) and the running sum; returns the
    /// estimated absolute tail relative to `|sum|` once the series may stop.
    ///
    /// `ratio_bound`, when known, bounds all later term ratios; otherwise the
    /// observed ratio of the last two terms is used.
    fn feed(
        &mut self,
        term: Scaled,
        sum: Scaled,
        ratio_bound: Option<f64>,
        algebraic_excess: Option<(f64, usize)>,
    ) -> Option<f64> {
        let rel = term.ratio_to(sum);
        let small = rel <= self.ctl.rel_tol || term.abs().to_f64() <= self.ctl.abs_tol;
        let observed = self.prev.map(|p| term.ratio_to(p));
        self.prev = Some(term);
        if small {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        if self.quiet < self.ctl.tail_window {
            return None;
        }
        if rel == 0.0 {
            return Some(0.0);
        }
        if let Some((excess, k)) = algebraic_excess {
            // Terms ~ C k^{-(excess+1)}: tail ≈ t_k · k / excess.
            let est = rel * k as f64 / excess;
            return (est <= self.ctl.rel_tol).then_some(est);
        }
        let rho = match (ratio_bound, observed) {
            (Some(b), Some(o)) => b.max(o),
            (Some(b), None) => b,
            (None, Some(o)) => o,
            (None, None) => return None,
        };
        if rho < 1.0 {
            let est = rel * rho / (1.0 - rho);
            if est <= self.ctl.rel_tol.max(self.ctl.abs_tol) || term.abs().to_f64() <= self.ctl.abs_tol {
                return Some(est);
            }
        }
        None
    }
}

/// Rising factorial `(a)_k = a (a+1) ⋯ (a+k−1)`, with `(a)_0 = 1`.
///
/// For `a > 0` and a product that would overflow, the value is taken from
/// log-Gamma instead (and is then `+∞` only if the true value is).
pub fn pochhammer(a: f64, k: usize) -> f64 {
    let mut prod = 1.0;
    for j in 0..k {
        prod *= a + j as f64;
        if !prod.is_finite() && a > 0.0 {
            return ln_pochhammer(a, k).exp();
        }
    }
    prod
}

/// `ln (a)_k = ln Γ(a+k) − ln Γ(a)` for `a > 0`.
pub fn ln_pochhammer(a: f64, k: usize) -> f64 {
    debug_assert!(a > 0.0);
    if k == 0 {
        return 0.0;
    }
    if k < 32 {
        let mut s = 0.0;
        for j in 0..k {
            s += (a + j as f64).ln();
        }
        return s;
    }
    ln_gamma(a + k as f64) - ln_gamma(a)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `ln B(α, β)`.
pub fn ln_beta(alpha: f64, beta: f64) -> f64 {
    ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// `pFq(α; β; z) = Σ_k Π(α_i)_k / Π(β_j)_k · z^k / k!`.
pub fn pfq(upper: &[f64], lower: &[f64], z: f64, ctl: &SeriesControl) -> Result<f64> {
    let s = pfq_sum(upper, lower, z, ctl)?;
    let v = s.value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("pFq overflows f64 (ln value {})", s.ln_abs)))
    }
}

/// [`pfq`] returning the log-scaled sum and its error estimate.
pub fn pfq_sum(upper: &[f64], lower: &[f64], z: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    ctl.validate()?;
    if upper.iter().chain(lower).any(|p| !p.is_finite()) || !z.is_finite() {
        return Err(Error::arg("pFq parameters and argument must be finite"));
    }
    // A non-positive integer upper parameter -m truncates the series after m.
    let terminates_at = upper.iter().filter(|&&a| is_nonpositive_integer(a)).map(|&a| (-a) as usize).min();
    for &b in lower {
        if is_nonpositive_integer(b) {
            let pole = (-b) as usize;
            if terminates_at.is_none_or(|m| m > pole) {
                return Err(Error::domain(format!("lower parameter {b} is a non-positive integer")));
            }
        }
    }
    if z == 0.0 {
        return Ok(SeriesSum { ln_abs: 0.0, sign: 1.0, est_error: 0.0, terms: 1 });
    }
    let p = upper.len();
    let q = lower.len();
    let mut algebraic = None;
    let mut ratio_limit = Some(0.0);
    if terminates_at.is_none() {
        if p > q + 1 {
            return Err(Error::domain(format!("{p}F{q} diverges for z != 0")));
        }
        if p == q + 1 {
            let az = z.abs();
            if az > 1.0 {
                return Err(Error::domain(format!("{p}F{q} diverges for |z| = {az} > 1")));
            }
            if az == 1.0 {
                let excess: f64 = lower.iter().sum::<f64>() - upper.iter().sum::<f64>();
                if !(excess > 0.0) {
                    return Err(Error::domain(format!(
                        "{p}F{q} at |z| = 1 needs positive parameter excess, got {excess}"
                    )));
                }
                algebraic = Some(excess);
                ratio_limit = None;
            } else {
                ratio_limit = Some(az);
            }
        }
    }
    let max_terms = ctl.max_terms;
    let mut term = Scaled::ONE;
    let mut sum = Scaled::ONE;
    let mut stop = Stopper::new(*ctl);
    for k in 0..max_terms {
        let kf = k as f64;
        let mut r = z / (kf + 1.0);
        for &a in upper {
            r *= a + kf;
        }
        for &b in lower {
            r /= b + kf;
        }
        term = term.mul(r);
        sum = sum.add(term);
        if terminates_at.is_some_and(|m| k + 1 >= m) {
            return Ok(SeriesSum::from_scaled(sum, 0.0, k + 2));
        }
        let bound = ratio_limit.map(|lim| lim.max(r.abs()));
        if let Some(est) = stop.feed(term, sum, bound, algebraic.map(|e| (e, k + 1))) {
            return Ok(SeriesSum::from_scaled(sum, est, k + 2));
        }
    }
    Err(Error::Convergence {
        what: format!("{p}F{q} at z = {z}"),
        partial: sum.to_f64(),
        est_error: term.ratio_to(sum),
        terms: max_terms,
    })
}

/// Horn's confluent function `Φ₃(a; b; x, y) = Σ_{m,n} (a)_m / (b)_{m+n} · x^m/m! · y^n/n!`.
pub fn horn_phi3(a: f64, b: f64, x: f64, y: f64, ctl: &SeriesControl) -> Result<f64> {
    finite(horn_phi3_sum(a, b, x, y, ctl)?, "Φ₃")
}

pub fn horn_phi3_sum(a: f64, b: f64, x: f64, y: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    ctl.validate()?;
    if is_nonpositive_integer(b) {
        return Err(Error::domain(format!("Φ₃ needs b not a non-positive integer, got {b}")));
    }
    let mut coeff = Scaled::ONE;
    let mut sum = Scaled::ZERO;
    let mut inner_err: f64 = 0.0;
    let mut stop = Stopper::new(*ctl);
    for m in 0..ctl.max_terms {
        let mf = m as f64;
        if m > 0 {
            coeff = coeff.mul((a + mf - 1.0) * x / ((b + mf - 1.0) * mf));
        }
        let term = if coeff.mant == 0.0 {
            Scaled::ZERO
        } else {
            let inner = pfq_sum(&[], &[b + mf], y, ctl)?;
            inner_err = inner_err.max(inner.est_error);
            coeff.mul_scaled(inner.scaled())
        };
        sum = sum.add(term);
        if let Some(est) = stop.feed(term, sum, None, None) {
            return Ok(SeriesSum::from_scaled(sum, est + inner_err, m + 1));
        }
    }
    Err(convergence("Φ₃", sum, ctl.max_terms))
}

/// The triple series
/// `F_I(a,b,c;z) = Σ (a)_{m1}(b)_{m2}(c)_{m3} / ((a+c)_{m1+m3}(b+c)_{m2+m3}) · z1^{m1} z2^{m2} z3^{m3} / (m1! m2! m3!)`.
pub fn lauricella_fi(a: f64, b: f64, c: f64, z1: f64, z2: f64, z3: f64, ctl: &SeriesControl) -> Result<f64> {
    finite(lauricella_fi_sum(a, b, c, z1, z2, z3, ctl)?, "F_I")
}

pub fn lauricella_fi_sum(a: f64, b: f64, c: f64, z1: f64, z2: f64, z3: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    ctl.validate()?;
    if is_nonpositive_integer(a + c) || is_nonpositive_integer(b + c) {
        return Err(Error::domain("F_I needs a+c and b+c not non-positive integers"));
    }
    let mut coeff = Scaled::ONE;
    let mut sum = Scaled::ZERO;
    let mut inner_err: f64 = 0.0;
    let mut stop = Stopper::new(*ctl);
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        if k > 0 {
            let j = kf - 1.0;
            coeff = coeff.mul((c + j) * z3 / ((a + c + j) * (b + c + j) * kf));
        }
        let term = if coeff.mant == 0.0 {
            Scaled::ZERO
        } else {
            let f1 = pfq_sum(&[a], &[a + c + kf], z1, ctl)?;
            let f2 = pfq_sum(&[b], &[b + c + kf], z2, ctl)?;
            inner_err = inner_err.max(f1.est_error + f2.est_error);
            coeff.mul_scaled(f1.scaled()).mul_scaled(f2.scaled())
        };
        sum = sum.add(term);
        if let Some(est) = stop.feed(term, sum, None, None) {
            return Ok(SeriesSum::from_scaled(sum, est + inner_err, k + 1));
        }
    }
    Err(convergence("F_I", sum, ctl.max_terms))
}

/// The quadruple series
/// `F_II(λ1,λ2;z) = Σ 1/((λ1)_{m1+m2+m3} (λ2)_{2m1+m2+m4}) · Π z_i^{m_i}/m_i!`.
pub fn lauricella_fii(l1: f64, l2: f64, z1: f64, z2: f64, z3: f64, z4: f64, ctl: &SeriesControl) -> Result<f64> {
    finite(lauricella_fii_sum(l1, l2, z1, z2, z3, z4, ctl)?, "F_II")
}

pub fn lauricella_fii_sum(
    l1: f64,
    l2: f64,
    z1: f64,
    z2: f64,
    z3: f64,
    z4: f64,
    ctl: &SeriesControl,
) -> Result<SeriesSum> {
    ctl.validate()?;
    if !(l1 > 0.0) || !(l2 > 0.0) {
        return Err(Error::domain(format!("F_II needs l1, l2 > 0, got {l1}, {l2}")));
    }
    // ₀F₁(;l1+i;z3) and ₀F₁(;l2+j;z4), filled on demand.
    let mut g: Vec<SeriesSum> = Vec::new();
    let mut h: Vec<SeriesSum> = Vec::new();
    let mut inner_err: f64 = 0.0;
    let fill = |table: &mut Vec<SeriesSum>, base: f64, z: f64, upto: usize, err: &mut f64| -> Result<()> {
        while table.len() <= upto {
            let s = pfq_sum(&[], &[base + table.len() as f64], z, ctl)?;
            *err = err.max(s.est_error);
            table.push(s);
        }
        Ok(())
    };
    // col[m1] = A(m1, d − m1) on diagonal d.
    let mut col: Vec<Scaled> = vec![Scaled::ONE];
    let mut sum = Scaled::ZERO;
    let mut stop = Stopper::new(*ctl);
    let max_degree = 2 * ctl.max_terms;
    for d in 0..max_degree {
        if d > 0 {
            let df = d as f64;
            // New column m1 = d from A(d−1, 0).
            let last = col[d - 1];
            let m = df - 1.0;
            let next = last.mul(z1 / (df * (l1 + m) * (l2 + 2.0 * m) * (l2 + 2.0 * m + 1.0)));
            // Step m2 → m2 + 1 in the existing columns.
            for (m1, a) in col.iter_mut().enumerate() {
                let m2 = (d - 1 - m1) as f64;
                let m1f = m1 as f64;
                *a = a.mul(z2 / ((m2 + 1.0) * (l1 + m1f + m2) * (l2 + 2.0 * m1f + m2)));
            }
            col.push(next);
        }
        fill(&mut g, l1, z3, d, &mut inner_err)?;
        fill(&mut h, l2, z4, 2 * d, &mut inner_err)?;
        let mut diag = Scaled::ZERO;
        for (m1, a) in col.iter().enumerate() {
            if a.mant == 0.0 {
                continue;
            }
            diag = diag.add(a.mul_scaled(h[d + m1].scaled()));
        }
        let term = diag.mul_scaled(g[d].scaled());
        sum = sum.add(term);
        if let Some(est) = stop.feed(term, sum, None, None) {
            return Ok(SeriesSum::from_scaled(sum, est + inner_err, d + 1));
        }
    }
    Err(convergence("F_II", sum, max_degree))
}

fn finite(s: SeriesSum, what: &str) -> Result<f64> {
    let v = s.value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{what} overflows f64 (ln value {})", s.ln_abs)))
    }
}

fn convergence(what: &str, sum: Scaled, terms: usize) -> Error {
    Error::Convergence { what: what.to_string(), partial: sum.to_f64(), est_error: f64::NAN, terms }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn pochhammer_basics() {
        assert_eq!(pochhammer(3.7, 0), 1.0);
        assert_eq!(pochhammer(-2.5, 0), 1.0);
        assert_eq!(pochhammer(1.0, 6), 720.0);
        assert_eq!(pochhammer(-2.0, 3), 0.0);
        assert_eq!(pochhammer(-0.5, 2), -0.5 * 0.5);
        for &(a, k) in &[(0.7, 5usize), (2.5, 40), (10.0, 100)] {
            let lg = (ln_gamma(a + k as f64) - ln_gamma(a)).exp();
            assert!(close(pochhammer(a, k), lg, 1e-12), "({a})_{k}");
        }
        // Overflowing product falls back to log-Gamma.
        assert!(pochhammer(50.0, 400).is_infinite());
        assert!(close(ln_pochhammer(50.0, 400), ln_gamma(450.0) - ln_gamma(50.0), 1e-14));
    }

    #[test]
    fn pfq_small_cases() {
        assert_eq!(pfq(&[1.3, 2.0], &[0.5], 0.0, &ctl()).unwrap(), 1.0);
        // ₀F₁(;1;1) = Σ 1/(k!)², brute force.
        let mut brute = 0.0;
        let mut f = 1.0;
        for k in 0..200 {
            if k > 0 {
                f *= k as f64;
            }
            brute += 1.0 / (f * f);
        }
        assert!(close(pfq(&[], &[1.0], 1.0, &ctl()).unwrap(), brute, 1e-14));
        // ₁F₀(a;;z) = (1−z)^{−a}
        assert!(close(pfq(&[2.5], &[], 0.3, &ctl()).unwrap(), 0.7f64.powf(-2.5), 1e-12));
        // ₁F₁(a;a;z) = e^z
        assert!(close(pfq(&[1.7], &[1.7], -3.0, &ctl()).unwrap(), (-3.0f64).exp(), 1e-11));
        // Terminating: ₂F₁(−2, b; c; z) polynomial.
        let v = pfq(&[-2.0, 1.5], &[-3.0], 0.5, &ctl()).unwrap();
        let exact = 1.0 + (-2.0 * 1.5 / -3.0) * 0.5 + (-2.0 * -1.0 * 1.5 * 2.5) / (-3.0 * -2.0) * 0.25 / 2.0;
        assert!(close(v, exact, 1e-14));
        assert_eq!(pfq(&[1.0, 1.0, 0.8], &[3.0, 4.0], 0.0, &ctl()).unwrap(), 1.0);
    }

    #[test]
    fn pfq_domain_errors() {
        assert!(matches!(pfq(&[1.0], &[-2.0], 0.5, &ctl()), Err(Error::Domain(_))));
        assert!(matches!(pfq(&[1.0, 1.0, 1.0], &[2.0], 0.1, &ctl()), Err(Error::Domain(_))));
        assert!(matches!(pfq(&[1.0, 1.0], &[2.0], 1.5, &ctl()), Err(Error::Domain(_))));
        assert!(matches!(pfq(&[1.0, 1.0], &[2.0], 1.0, &ctl()), Err(Error::Domain(_))));
        let tight = SeriesControl { max_terms: 5, ..ctl() };
        assert!(matches!(pfq(&[], &[1.0], 50.0, &tight), Err(Error::Convergence { .. })));
    }

    #[test]
    fn pfq_unit_argument() {
        // ₂F₁(a,b;c;1) = Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b)), excess 2.5
        let (a, b, c) = (0.5, 1.0, 4.0);
        let exact = (ln_gamma(c) + ln_gamma(c - a - b) - ln_gamma(c - a) - ln_gamma(c - b)).exp();
        let ctl = SeriesControl::default().with_rel_tol(1e-10).unit_argument();
        let v = pfq_sum(&[a, b], &[c], 1.0, &ctl).unwrap();
        assert!(close(v.value(), exact, 1e-8), "{} vs {exact}", v.value());
    }

    #[test]
    fn pfq_log_space() {
        // ₀F₁(;1;z) ~ e^{2√z}/(2√π z^{1/4}); at z = 1e6 the terms exceed 1e280.
        let z = 1e6f64;
        let ctl = SeriesControl::default().with_max_terms(10_000);
        let s = pfq_sum(&[], &[1.0], z, &ctl).unwrap();
        let asym = 2.0 * z.sqrt() - 0.5 * (4.0 * std::f64::consts::PI).ln() - 0.25 * z.ln();
        assert!((s.ln_abs - asym).abs() < 1e-3, "{} vs {asym}", s.ln_abs);
        assert!(pfq(&[], &[1.0], z, &ctl).is_err());
    }

    #[test]
    fn phi3_reductions() {
        let c = ctl();
        assert_eq!(horn_phi3(0.7, 1.9, 0.0, 0.0, &c).unwrap(), 1.0);
        let y = 2.3;
        let f01 = pfq(&[], &[1.9], y, &c).unwrap();
        assert!(close(horn_phi3(0.7, 1.9, 0.0, y, &c).unwrap(), f01, 1e-13));
        assert!(close(horn_phi3(0.0, 1.9, 4.0, y, &c).unwrap(), f01, 1e-13));
        // y = 0 row: ₁F₁(a; b; x)
        let f11 = pfq(&[0.7], &[1.9], 1.4, &c).unwrap();
        assert!(close(horn_phi3(0.7, 1.9, 1.4, 0.0, &c).unwrap(), f11, 1e-13));
        assert!(matches!(horn_phi3(1.0, -1.0, 1.0, 1.0, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn fi_reductions() {
        let c = ctl();
        assert_eq!(lauricella_fi(0.5, 0.7, 1.2, 0.0, 0.0, 0.0, &c).unwrap(), 1.0);
        let (b, cc, z1, z2, z3) = (0.7, 1.2, 3.0, 1.1, 2.5);
        let fi = lauricella_fi(0.0, b, cc, z1, z2, z3, &c).unwrap();
        let phi = horn_phi3(b, b + cc, z2, z3, &c).unwrap();
        assert!(close(fi, phi, 1e-12));
        let fi = lauricella_fi(0.5, b, cc, z1, 0.0, 0.0, &c).unwrap();
        assert!(close(fi, pfq(&[0.5], &[0.5 + cc], z1, &c).unwrap(), 1e-13));
    }

    #[test]
    fn fii_reductions() {
        let c = ctl();
        let l = 1.4;
        assert_eq!(lauricella_fii(l, l, 0.0, 0.0, 0.0, 0.0, &c).unwrap(), 1.0);
        // z2 only: Σ z^k / ((λ)_k (λ)_k k!) = ₀F₂(;λ,λ;z)
        let z = 3.3;
        let f02 = pfq(&[], &[l, l], z, &c).unwrap();
        assert!(close(lauricella_fii(l, l, 0.0, z, 0.0, 0.0, &c).unwrap(), f02, 1e-13));
        // z3 only: ₀F₁(;λ1;z)
        let f01 = pfq(&[], &[l], z, &c).unwrap();
        assert!(close(lauricella_fii(l, 2.0, 0.0, 0.0, z, 0.0, &c).unwrap(), f01, 1e-13));
        // z4 only: ₀F₁(;λ2;z)
        let f01 = pfq(&[], &[2.0], z, &c).unwrap();
        assert!(close(lauricella_fii(l, 2.0, 0.0, 0.0, 0.0, z, &c).unwrap(), f01, 1e-13));
        assert!(lauricella_fii(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, &c).is_err());
    }

    #[test]
    fn env_override() {
        // Only exercised through the parser; the variable itself is left untouched.
        let ctl = SeriesControl::default().with_max_terms(7);
        assert_eq!(ctl.max_terms, 7);
        assert!(SeriesControl { max_terms: 0, ..ctl }.validate().is_err());
        assert!(SeriesControl { rel_tol: 0.0, ..ctl }.validate().is_err());
    }
}
