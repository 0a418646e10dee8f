//! Subset-indexed affine polynomials `P(θ) = Σ_T p_T θ^T` with `p_∅ = 1`,
//! their shape parameters, and the coefficient maps derived from them.
//!
//! Coefficients are stored densely, one slot per subset of `[n]`, with the
//! subset encoded as a bit mask (bit `i` set when coordinate `i` belongs to
//! the subset, coordinates being 0-based internally and 1-based in files).

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Largest supported dimension; every subset of `[n]` fits in one `u32`.
pub const MAX_DIM: usize = 16;

/// A subset `T ⊆ [n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask {
    bits: u32,
    n: u8,
}

impl SubsetMask {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_dim(n)?;
        if (bits as u64) >= (1u64 << n) {
            return Err(Error::arg(format!("mask {bits:#b} does not fit dimension {n}")));
        }
        Ok(Self { bits, n: n as u8 })
    }

    /// Builds a mask from 0-based coordinate indices.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        check_dim(n)?;
        let mut bits = 0u32;
        for &i in indices {
            if i >= n {
                return Err(Error::arg(format!("index {i} out of range for dimension {n}")));
            }
            bits |= 1 << i;
        }
        Ok(Self { bits, n: n as u8 })
    }

    pub fn empty(n: usize) -> Self {
        Self { bits: 0, n: n as u8 }
    }

    pub fn full(n: usize) -> Self {
        Self { bits: full_bits(n), n: n as u8 }
    }

    pub fn singleton(n: usize, i: usize) -> Self {
        debug_assert!(i < n);
        Self { bits: 1 << i, n: n as u8 }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn dim(self) -> usize {
        self.n as usize
    }

    /// Cardinality `|T|`.
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < self.dim() && self.bits & (1 << i) != 0
    }

    /// `T̄ = [n] \ T`.
    pub fn complement(self) -> Self {
        Self { bits: !self.bits & full_bits(self.dim()), n: self.n }
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.bits & !other.bits == 0
    }

    /// 0-based members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..32usize).filter(move |&i| bits & (1 << i) != 0)
    }

    /// Every subset of `[n]`, in increasing bit order.
    pub fn all(n: usize) -> impl Iterator<Item = SubsetMask> {
        (0..(1u32 << n)).map(move |bits| SubsetMask { bits, n: n as u8 })
    }

    /// Parses a file key: comma-separated, strictly increasing 1-based indices;
    /// the empty string is the empty set.
    pub fn parse_key(key: &str, n: usize) -> Result<Self> {
        let trimmed = key.trim();
        if trimmed.is_empty() {
            return Ok(Self::empty(n));
        }
        let mut bits = 0u32;
        let mut last = 0usize;
        for part in trimmed.split(',') {
            let idx: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("subset key \"{key}\": \"{part}\" is not an index")))?;
            if idx == 0 || idx > n {
                return Err(Error::Parse(format!("subset key \"{key}\": index {idx} outside 1..={n}")));
            }
            if idx <= last {
                return Err(Error::Parse(format!("subset key \"{key}\": indices must be sorted and distinct")));
            }
            last = idx;
            bits |= 1 << (idx - 1);
        }
        Ok(Self { bits, n: n as u8 })
    }
}

impl fmt::Display for SubsetMask {
    /// Formats as the file key, e.g. `1,3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
            first = false;
        }
        Ok(())
    }
}

fn full_bits(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::arg(format!("dimension must be in 1..={MAX_DIM}, got {n}")));
    }
    Ok(())
}

/// A real value for every subset of `[n]`, stored densely by mask.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffMap {
    n: usize,
    values: Vec<f64>,
}

impl CoeffMap {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; 1 << n] }
    }

    pub fn from_dense(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if values.len() != 1 << n {
            return Err(Error::arg(format!(
                "expected {} coefficients for dimension {n}, got {}",
                1usize << n,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, t: SubsetMask) -> f64 {
        self.values[t.bits() as usize]
    }

    pub fn set(&mut self, t: SubsetMask, value: f64) {
        self.values[t.bits() as usize] = value;
    }

    /// Dense view indexed by mask bits.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        let n = self.n;
        self.values.iter().enumerate().map(move |(b, &v)| (SubsetMask { bits: b as u32, n: n as u8 }, v))
    }

    /// Reorders coordinates: coordinate `i` of `self` becomes coordinate `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for (t, v) in self.iter() {
            let bits = t.iter().fold(0u32, |acc, i| acc | (1 << perm[i]));
            out.values[bits as usize] = v;
        }
        out
    }
}

/// `P(θ) = Σ_T p_T θ^T` with `p_∅ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePolynomial {
    coeffs: CoeffMap,
}

impl AffinePolynomial {
    /// Dense constructor; `coeffs[0]` must be exactly 1.
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        let coeffs = CoeffMap::from_dense(n, coeffs)?;
        if coeffs.values[0] != 1.0 {
            return Err(Error::arg(format!("constant term must be 1, got {}", coeffs.values[0])));
        }
        if let Some((t, v)) = coeffs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::arg(format!("coefficient p_{{{t}}} is not finite ({v})")));
        }
        Ok(Self { coeffs })
    }

    /// Sparse constructor; absent coefficients are 0, the constant term is 1.
    pub fn from_sparse(n: usize, entries: &[(SubsetMask, f64)]) -> Result<Self> {
        check_dim(n)?;
        let mut values = vec![0.0; 1 << n];
        values[0] = 1.0;
        for &(t, v) in entries {
            if t.dim() != n {
                return Err(Error::arg(format!("subset {{{t}}} has dimension {} != {n}", t.dim())));
            }
            values[t.bits() as usize] = v;
        }
        Self::new(n, values)
    }

    /// `Π (1 + p_i θ_i)`: the independence polynomial.
    pub fn product(scales: &[f64]) -> Result<Self> {
        let n = scales.len();
        check_dim(n)?;
        let mut values = vec![1.0; 1 << n];
        for (bits, v) in values.iter_mut().enumerate() {
            for (i, &p) in scales.iter().enumerate() {
                if bits & (1 << i) != 0 {
                    *v *= p;
                }
            }
        }
        Self::new(n, values)
    }

    /// `Π (1 + p_i θ_i) − β p^{[n]} θ^{[n]}`.
    pub fn product_with_top_shift(scales: &[f64], beta: f64) -> Result<Self> {
        let mut poly = Self::product(scales)?;
        let top = poly.coeffs.values.len() - 1;
        poly.coeffs.values[top] *= 1.0 - beta;
        Ok(poly)
    }

    /// Bivariate `1 + p1 θ1 + p2 θ2 + p12 θ1 θ2`.
    pub fn bivariate(p1: f64, p2: f64, p12: f64) -> Result<Self> {
        Self::new(2, vec![1.0, p1, p2, p12])
    }

    pub fn dim(&self) -> usize {
        self.coeffs.n
    }

    pub fn coeff(&self, t: SubsetMask) -> f64 {
        self.coeffs.get(t)
    }

    /// `p_i` for the 0-based coordinate `i`.
    pub fn linear(&self, i: usize) -> f64 {
        self.coeffs.values[1 << i]
    }

    /// `p_{[n]}`.
    pub fn top(&self) -> f64 {
        *self.coeffs.values.last().expect("non-empty")
    }

    pub fn coeffs(&self) -> &CoeffMap {
        &self.coeffs
    }

    /// `Σ_T p_T Π_{t∈T} θ_t`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::arg(format!(
                "theta has length {}, polynomial has dimension {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(eval_multilinear(self.coeffs.as_slice(), theta))
    }

    /// `P(−(1/p)·1_T)`: each coordinate in `T` set to `−1/p_i`, the rest to 0.
    pub fn eval_at_corner(&self, t: SubsetMask) -> Result<f64> {
        if t.dim() != self.dim() {
            return Err(Error::arg("subset dimension does not match polynomial"));
        }
        let mut theta = vec![0.0; self.dim()];
        for i in t.iter() {
            let p = self.linear(i);
            if p == 0.0 {
                return Err(Error::domain(format!("p_{} = 0, corner {{{t}}} undefined", i + 1)));
            }
            theta[i] = -1.0 / p;
        }
        // Only subsets of T contribute.
        let mut sum = 0.0;
        let tb = t.bits();
        let mut sub = tb;
        loop {
            let coeff = self.coeffs.values[sub as usize];
            if coeff != 0.0 {
                let mut prod = coeff;
                let mut b = sub;
                while b != 0 {
                    let i = b.trailing_zeros() as usize;
                    prod *= theta[i];
                    b &= b - 1;
                }
                sum += prod;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & tb;
        }
        Ok(sum)
    }

    /// FGM coefficients `α_T = (−1)^{|T|} P(−(1/p)·1_T)`.
    ///
    /// `α_∅ = 1` and `α_{i} = 0` are set exactly.
    pub fn fgm_coefficients(&self) -> Result<CoeffMap> {
        let n = self.dim();
        let mut alpha = CoeffMap::zeros(n);
        alpha.values[0] = 1.0;
        for t in SubsetMask::all(n).filter(|t| t.len() >= 2) {
            let sign = if t.len() % 2 == 0 { 1.0 } else { -1.0 };
            alpha.set(t, sign * self.eval_at_corner(t)?);
        }
        for i in 0..n {
            if self.linear(i) == 0.0 {
                return Err(Error::domain(format!("p_{} = 0", i + 1)));
            }
        }
        Ok(alpha)
    }

    /// Dual coefficients `p̃_T = −p_{T̄} / p_{[n]}`.
    ///
    /// The result is a raw coefficient map, not a normalized polynomial:
    /// its constant term is `p̃_∅ = −p_{[n]}/p_{[n]} = −1`.
    pub fn dual_polynomial(&self) -> Result<CoeffMap> {
        let top = self.top();
        if !(top > 0.0) {
            return Err(Error::domain(format!("p_[n] must be > 0, got {top}")));
        }
        let n = self.dim();
        let mut dual = CoeffMap::zeros(n);
        for t in SubsetMask::all(n) {
            dual.set(t, -self.coeff(t.complement()) / top);
        }
        Ok(dual)
    }

    /// `r_ij = −P(−(1/p)·1_{i,j})`, 0-based indices.
    pub fn pair_correlation(&self, i: usize, j: usize) -> Result<f64> {
        let t = SubsetMask::from_indices(self.dim(), &[i, j])?;
        Ok(-self.eval_at_corner(t)?)
    }

    /// The polynomial of the margin on `coords` (the others' θ set to 0).
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        let m = coords.len();
        check_dim(m)?;
        let mut values = vec![0.0; 1 << m];
        for (bits, v) in values.iter_mut().enumerate() {
            let mut full = 0u32;
            for (k, &c) in coords.iter().enumerate() {
                if c >= self.dim() {
                    return Err(Error::arg(format!("coordinate {c} out of range")));
                }
                if bits & (1 << k) != 0 {
                    full |= 1 << c;
                }
            }
            *v = self.coeffs.values[full as usize];
        }
        Self::new(m, values)
    }

    /// Relabels coordinates: old coordinate `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(Error::arg("permutation length mismatch"));
        }
        Ok(Self { coeffs: self.coeffs.permuted(perm) })
    }
}

/// Evaluates a dense multilinear coefficient vector at `theta` in `O(2^n)`.
pub(crate) fn eval_multilinear(coeffs: &[f64], theta: &[f64]) -> f64 {
    let mut monomial = vec![1.0; coeffs.len()];
    let mut sum = coeffs[0];
    for bits in 1..coeffs.len() {
        let low = bits.trailing_zeros() as usize;
        monomial[bits] = monomial[bits & (bits - 1)] * theta[low];
        sum += coeffs[bits] * monomial[bits];
    }
    sum
}

/// Shape parameters `Λ = (λ, λ_1, …, λ_n)` with `λ_i ≥ λ > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeParams {
    lambda: f64,
    lambdas: Vec<f64>,
}

impl ShapeParams {
    pub fn new(lambda: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::arg(format!("lambda must be finite and > 0, got {lambda}")));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() || l < lambda {
                return Err(Error::arg(format!("lambda_{} = {l} must be finite and >= lambda = {lambda}", i + 1)));
            }
        }
        Ok(Self { lambda, lambdas })
    }

    /// The pure multivariate gamma case `λ_i = λ`.
    pub fn uniform(n: usize, lambda: f64) -> Result<Self> {
        Self::new(lambda, vec![lambda; n])
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn is_pure(&self) -> bool {
        self.lambdas.iter().all(|&l| l == self.lambda)
    }
}

/// The pair `(P, Λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineModel {
    poly: AffinePolynomial,
    shapes: ShapeParams,
}

impl AffineModel {
    pub fn new(poly: AffinePolynomial, shapes: ShapeParams) -> Result<Self> {
        let n = poly.dim();
        if shapes.lambdas.len() != n {
            return Err(Error::arg(format!("{} shape parameters for dimension {n}", shapes.lambdas.len())));
        }
        for i in 0..n {
            let p = poly.linear(i);
            if !(p > 0.0) {
                return Err(Error::arg(format!("p_{} must be > 0, got {p}", i + 1)));
            }
        }
        Ok(Self { poly, shapes })
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn poly(&self) -> &AffinePolynomial {
        &self.poly
    }

    pub fn shapes(&self) -> &ShapeParams {
        &self.shapes
    }

    pub fn lambda(&self) -> f64 {
        self.shapes.lambda
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.shapes.lambdas
    }

    /// Marginal gamma laws `(scale p_i, shape λ_i)`.
    pub fn marginal_params(&self) -> Vec<(f64, f64)> {
        (0..self.dim()).map(|i| (self.poly.linear(i), self.shapes.lambdas[i])).collect()
    }

    /// Parses the JSON model format:
    /// `{"n": 2, "coeffs": {"1": 1.0, "2": 1.0, "1,2": 0.5}, "lambda": 1.5, "lambdas": [2.0, 3.0]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Parse("model must be a JSON object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "n" | "coeffs" | "lambda" | "lambdas") {
                return Err(Error::Parse(format!("unknown key \"{key}\"")));
            }
        }
        let n = obj
            .get("n")
            .ok_or_else(|| Error::Parse("missing key \"n\"".into()))?
            .as_u64()
            .ok_or_else(|| Error::Parse("\"n\" must be a positive integer".into()))? as usize;
        if n == 0 || n > MAX_DIM {
            return Err(Error::Parse(format!("\"n\" must be in 1..={MAX_DIM}, got {n}")));
        }
        let coeffs = obj
            .get("coeffs")
            .ok_or_else(|| Error::Parse("missing key \"coeffs\"".into()))?
            .as_object()
            .ok_or_else(|| Error::Parse("\"coeffs\" must be an object".into()))?;
        let mut values = vec![0.0; 1 << n];
        values[0] = 1.0;
        for (key, v) in coeffs {
            let t = SubsetMask::parse_key(key, n)?;
            let x = v.as_f64().ok_or_else(|| Error::Parse(format!("coeffs[\"{key}\"] is not a number")))?;
            if t.is_empty() && x != 1.0 {
                return Err(Error::Parse(format!("coeffs[\"{key}\"]: constant term must be 1.0, got {x}")));
            }
            if !x.is_finite() {
                return Err(Error::Parse(format!("coeffs[\"{key}\"] is not finite")));
            }
            values[t.bits() as usize] = x;
        }
        for i in 0..n {
            if !(values[1 << i] > 0.0) {
                return Err(Error::Parse(format!(
                    "coeffs[\"{}\"]: p_{} must be > 0, got {}",
                    i + 1,
                    i + 1,
                    values[1 << i]
                )));
            }
        }
        let lambda = obj
            .get("lambda")
            .ok_or_else(|| Error::Parse("missing key \"lambda\"".into()))?
            .as_f64()
            .ok_or_else(|| Error::Parse("\"lambda\" must be a number".into()))?;
        if !(lambda > 0.0) {
            return Err(Error::Parse(format!("\"lambda\" must be > 0, got {lambda}")));
        }
        let lambdas = match obj.get("lambdas") {
            None | Some(Value::Null) => vec![lambda; n],
            Some(Value::Array(items)) => {
                if items.len() != n {
                    return Err(Error::Parse(format!("\"lambdas\" has {} entries, expected {n}", items.len())));
                }
                let mut out = Vec::with_capacity(n);
                for (i, item) in items.iter().enumerate() {
                    let l = item.as_f64().ok_or_else(|| Error::Parse(format!("lambdas[{i}] is not a number")))?;
                    if l < lambda {
                        return Err(Error::Parse(format!("lambdas[{i}] = {l} is smaller than lambda = {lambda}")));
                    }
                    out.push(l);
                }
                out
            }
            Some(_) => return Err(Error::Parse("\"lambdas\" must be an array".into())),
        };
        let poly = AffinePolynomial::new(n, values).map_err(|e| Error::Parse(e.to_string()))?;
        let shapes = ShapeParams::new(lambda, lambdas).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(poly, shapes).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Canonical JSON form: non-zero coefficients only, keys sorted by subset
    /// size then lexicographically, `lambdas` always present.
    pub fn to_json_value(&self) -> Value {
        let n = self.dim();
        let mut entries: BTreeMap<(usize, Vec<usize>), (String, f64)> = BTreeMap::new();
        for (t, v) in self.poly.coeffs().iter() {
            if t.is_empty() || v == 0.0 {
                continue;
            }
            entries.insert((t.len(), t.iter().collect()), (t.to_string(), v));
        }
        let mut coeffs = Map::new();
        for (_, (key, v)) in entries {
            coeffs.insert(key, Value::from(v));
        }
        let mut obj = Map::new();
        obj.insert("n".into(), Value::from(n as u64));
        obj.insert("coeffs".into(), Value::Object(coeffs));
        obj.insert("lambda".into(), Value::from(self.lambda()));
        obj.insert("lambdas".into(), Value::Array(self.lambdas().iter().map(|&l| Value::from(l)).collect()));
        Value::Object(obj)
    }
}
