//! Infinite-divisibility test for `γ(P, λ)`.
//!
//! With the dual coefficients `p̃_T = −p_{T̄}/p_{[n]}`, define for each
//! non-empty `S`
//!
//! ```text
//! b̃_S = Σ_{k=1}^{|S|} (k−1)! Σ_{partitions of S into k blocks} Π_{blocks T} p̃_T
//! ```
//!
//! The law is infinitely divisible iff `p̃_i < 0` for every `i` and
//! `b̃_S ≥ 0` for every `|S| ≥ 2` (the latter checked as `b̃_S ≥ −tol`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polynomial::{AffinePolynomial, CoeffMap, SubsetMask};

/// Default tolerance for `b̃_S ≥ −tol`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Visits every set partition of `s` (as block masks), each exactly once,
/// using restricted-growth strings over the members of `s`.
pub fn for_each_partition<F: FnMut(&[u32])>(s: SubsetMask, mut visit: F) {
    let members: Vec<usize> = s.iter().collect();
    if members.is_empty() {
        return;
    }
    let mut blocks: Vec<u32> = Vec::with_capacity(members.len());
    grow(&members, 0, &mut blocks, None, &mut visit);
}

/// Visits the partitions of `s` into exactly `k` blocks.
fn for_each_partition_k<F: FnMut(&[u32])>(s: SubsetMask, k: usize, mut visit: F) {
    let members: Vec<usize> = s.iter().collect();
    let mut blocks: Vec<u32> = Vec::with_capacity(k);
    grow(&members, 0, &mut blocks, Some(k), &mut visit);
}

fn grow<F: FnMut(&[u32])>(members: &[usize], pos: usize, blocks: &mut Vec<u32>, target: Option<usize>, visit: &mut F) {
    if pos == members.len() {
        if target.is_none_or(|k| blocks.len() == k) {
            visit(blocks);
        }
        return;
    }
    let remaining = members.len() - pos;
    let bit = 1u32 << members[pos];
    if let Some(k) = target {
        // Not enough elements left to open the missing blocks.
        if blocks.len() + remaining < k {
            return;
        }
    }
    for b in 0..blocks.len() {
        blocks[b] |= bit;
        grow(members, pos + 1, blocks, target, visit);
        blocks[b] &= !bit;
    }
    if target.is_none_or(|k| blocks.len() < k) {
        blocks.push(bit);
        grow(members, pos + 1, blocks, target, visit);
        blocks.pop();
    }
}

/// All partitions of `s` into `k` non-empty blocks; there are `S(|s|, k)` of
/// them (Stirling numbers of the second kind).
pub fn partitions(s: SubsetMask, k: usize) -> Result<Vec<Vec<SubsetMask>>> {
    if k == 0 || k > s.len() {
        return Err(Error::arg(format!("k = {k} outside 1..={} for subset {{{s}}}", s.len())));
    }
    let n = s.dim();
    let mut out = Vec::new();
    for_each_partition_k(s, k, |blocks| {
        out.push(blocks.iter().map(|&b| SubsetMask::new(b, n).expect("block within dimension")).collect());
    });
    Ok(out)
}

/// `b̃_S` by direct enumeration of the partitions of `s`.
pub fn btilde(dual: &CoeffMap, s: SubsetMask) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::arg("b̃ is defined for non-empty subsets only"));
    }
    if s.dim() != dual.dim() {
        return Err(Error::arg("subset dimension does not match the coefficient map"));
    }
    let values = dual.as_slice();
    let mut factorial = vec![1.0f64; s.len() + 1];
    for k in 1..factorial.len() {
        factorial[k] = factorial[k - 1] * k as f64;
    }
    let mut sum = 0.0;
    for_each_partition(s, |blocks| {
        let prod: f64 = blocks.iter().map(|&b| values[b as usize]).product();
        sum += factorial[blocks.len() - 1] * prod;
    });
    Ok(sum)
}

/// `b̃_S` for every subset at once.
///
/// `g_k(S)`, the partition sum restricted to `k` blocks, satisfies
/// `g_k(S) = Σ_{B ∋ min S, B ⊊ S} p̃_B g_{k−1}(S \ B)` (the block holding the
/// smallest member is chosen first), so each partition is counted once and all
/// subsets cost `O(n 3^n)` in total.
pub fn btilde_all(dual: &CoeffMap) -> CoeffMap {
    let n = dual.dim();
    let size = 1usize << n;
    let p = dual.as_slice();
    // g[k-1][S]
    let mut g = vec![vec![0.0f64; size]; n];
    for s in 1..size {
        g[0][s] = p[s];
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        // B = low ∪ sub with sub ⊊ rest.
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let block = low | sub;
            let remainder = s ^ block;
            let pb = p[block];
            if pb == 0.0 {
                continue;
            }
            let max_k = (s.count_ones() as usize).min(n);
            for k in 1..max_k {
                let prev = g[k - 1][remainder];
                if prev != 0.0 {
                    g[k][s] += pb * prev;
                }
            }
        }
    }
    let mut out = vec![0.0; size];
    for (s, slot) in out.iter_mut().enumerate().skip(1) {
        let mut factorial = 1.0;
        let mut total = 0.0;
        for (k, gk) in g.iter().enumerate().take(s.count_ones() as usize) {
            if k > 0 {
                factorial *= k as f64;
            }
            total += factorial * gk[s];
        }
        *slot = total;
    }
    CoeffMap::from_dense(n, out).expect("dimension already validated")
}

/// Outcome of the divisibility test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivisibilityReport {
    #[serde(skip)]
    pub dual: CoeffMap,
    /// `(S, b̃_S)` for every `|S| ≥ 2`, in increasing mask order.
    #[serde(skip)]
    pub btilde: Vec<(SubsetMask, f64)>,
    /// `p̃_i < 0` for all `i`.
    pub singleton_ok: bool,
    /// `b̃_S ≥ −tol` for all `|S| ≥ 2`.
    pub btilde_ok: bool,
    pub divisible: bool,
    pub tol: f64,
    /// Subsets violating one of the two conditions.
    #[serde(skip)]
    pub violations: Vec<SubsetMask>,
}

impl DivisibilityReport {
    pub fn btilde_of(&self, s: SubsetMask) -> Option<f64> {
        self.btilde.iter().find(|(t, _)| *t == s).map(|&(_, v)| v)
    }
}

/// Runs the test. Hypothesis violations (`p_i ≤ 0`, `p_[n] ≤ 0`) are errors,
/// distinct from a negative verdict.
pub fn check_infinite_divisibility(poly: &AffinePolynomial, tol: f64) -> Result<DivisibilityReport> {
    let n = poly.dim();
    for i in 0..n {
        if !(poly.linear(i) > 0.0) {
            return Err(Error::precondition(format!("p_{} = {} must be > 0", i + 1, poly.linear(i))));
        }
    }
    if !(poly.top() > 0.0) {
        return Err(Error::precondition(format!("p_[n] = {} must be > 0", poly.top())));
    }
    if !(tol >= 0.0) {
        return Err(Error::arg("tolerance must be >= 0"));
    }
    let dual = poly.dual_polynomial()?;
    let all = btilde_all(&dual);
    let mut violations = Vec::new();
    let mut singleton_ok = true;
    for i in 0..n {
        let s = SubsetMask::singleton(n, i);
        if !(dual.get(s) < 0.0) {
            singleton_ok = false;
            violations.push(s);
        }
    }
    let mut btilde = Vec::new();
    let mut btilde_ok = true;
    for s in SubsetMask::all(n).filter(|s| s.len() >= 2) {
        let b = all.get(s);
        if !(b >= -tol) {
            btilde_ok = false;
            violations.push(s);
        }
        btilde.push((s, b));
    }
    Ok(DivisibilityReport {
        dual,
        btilde,
        singleton_ok,
        btilde_ok,
        divisible: singleton_ok && btilde_ok,
        tol,
        violations,
    })
}
