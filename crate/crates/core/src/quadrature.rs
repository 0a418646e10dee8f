//! Adaptive Gauss–Kronrod (10/21 point) integration, and nested box
//! integrals built from it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525094799,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of subintervals per one-dimensional integral.
    pub max_intervals: usize,
}

impl Default for QuadControl {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_intervals: 500 }
    }
}

impl QuadControl {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

fn gk21<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !result.is_finite() {
        return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok((result, err))
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// `∫_a^b f` where the integrand may fail.
pub fn integrate_fallible<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    ctl: &QuadControl,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::arg("integration bounds must be finite"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v, e) = gk21(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut evals = 21;
    loop {
        if total_err <= ctl.abs_tol.max(ctl.rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= ctl.max_intervals {
            return Err(Error::Convergence {
                what: format!("quadrature on [{a}, {b}]"),
                partial: total,
                est_error: total_err,
                terms: evals,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating point resolution: accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult { value, error, evals })
}

pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, ctl: &QuadControl) -> Result<QuadResult> {
    integrate_fallible(|x| Ok(f(x)), a, b, ctl)
}

/// One axis of a box integral: `[lo, hi]` sampled through
/// `x = lo + (hi − lo) s^power`, `s ∈ [0, 1]`. A power `q > 1` absorbs an
/// integrable `(x − lo)^{1/q − 1}` singularity at the lower end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub power: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, power: 1.0 }
    }

    /// Axis for a gamma-like integrand `x^{shape−1}` near zero.
    pub fn gamma_like(hi: f64, shape: f64) -> Self {
        Self { lo: 0.0, hi, power: (1.0 / shape).max(1.0) }
    }

    fn map(&self, s: f64) -> (f64, f64) {
        let w = self.hi - self.lo;
        if self.power == 1.0 {
            (self.lo + w * s, w)
        } else {
            (self.lo + w * s.powf(self.power), w * self.power * s.powf(self.power - 1.0))
        }
    }
}

/// Nested integral of `f` over a box given axis by axis (outermost first).
pub fn integrate_box<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    axes: &[Axis],
    ctl: &QuadControl,
) -> Result<QuadResult> {
    if axes.is_empty() {
        return Err(Error::arg("box integral needs at least one axis"));
    }
    let mut point = vec![0.0; axes.len()];
    nested(&mut f, axes, 0, &mut point, ctl)
}

fn nested(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    axes: &[Axis],
    level: usize,
    point: &mut Vec<f64>,
    ctl: &QuadControl,
) -> Result<QuadResult> {
    let axis = axes[level];
    let mut inner_err = 0.0f64;
    let mut inner_evals = 0usize;
    let last = level + 1 == axes.len();
    let outer = integrate_fallible(
        |s| {
            let (x, jac) = axis.map(s);
            if jac == 0.0 {
                return Ok(0.0);
            }
            point[level] = x;
            if last {
                inner_evals += 1;
                Ok(jac * f(point)?)
            } else {
                let r = nested(f, axes, level + 1, point, ctl)?;
                inner_err = inner_err.max(jac * r.error);
                inner_evals += r.evals;
                Ok(jac * r.value)
            }
        },
        0.0,
        1.0,
        ctl,
    )?;
    Ok(QuadResult { value: outer.value, error: outer.error + inner_err, evals: inner_evals.max(outer.evals) })
}

/// Tensor product of composite 21-point Kronrod rules, `panels` per axis.
/// The error estimate is the gap to the embedded 10-point Gauss product.
pub fn integrate_tensor<F: FnMut(&[f64]) -> Result<f64>>(mut f: F, axes: &[Axis], panels: usize) -> Result<QuadResult> {
    if axes.is_empty() || panels == 0 {
        return Err(Error::arg("tensor rule needs at least one axis and one panel"));
    }
    // (x, Kronrod weight, Gauss weight) per node, Jacobian included.
    let grids: Vec<Vec<(f64, f64, f64)>> = axes
        .iter()
        .map(|axis| {
            let h = 0.5 / panels as f64;
            let mut g = Vec::with_capacity(21 * panels);
            for k in 0..panels {
                let c = (2 * k + 1) as f64 * h;
                let mut push = |s: f64, wk: f64, wg: f64| {
                    let (x, jac) = axis.map(s);
                    g.push((x, wk * h * jac, wg * h * jac));
                };
                push(c, WGK[10], 0.0);
                for j in 0..10 {
                    let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
                    push(c - h * XGK[j], WGK[j], wg);
                    push(c + h * XGK[j], WGK[j], wg);
                }
            }
            g
        })
        .collect();
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let (mut resk, mut resg) = (0.0, 0.0);
    let mut evals = 0usize;
    'outer: loop {
        let mut wk = 1.0;
        let mut wg = 1.0;
        for a in 0..d {
            let (x, k, g) = grids[a][idx[a]];
            point[a] = x;
            wk *= k;
            wg *= g;
        }
        if wk != 0.0 {
            let v = f(&point)?;
            evals += 1;
            resk += wk * v;
            resg += wg * v;
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < grids[a].len() {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    Ok(QuadResult { value: resk, error: (resk - resg).abs(), evals })
}
