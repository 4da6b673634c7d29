//! Scalar quadrature and 1D search helpers shared by the response and
//! certificate modules.

use crate::error::{BdfError, Result};
use gauss_quad::GaussLegendre;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

const MAX_PIECES: usize = 4000;

/// Integral of `f` over `[a, b]` to absolute error `tol`, or to roundoff
/// level where `tol` is finer than a few ulps of the integral.
///
/// Runs double-exponential quadrature on each piece and keeps splitting the
/// piece with the largest error estimate until the summed estimate is small
/// enough. The number of pieces is bounded, so the cost is too.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let rule = |lo: f64, hi: f64| {
        let out = quadrature::double_exponential::integrate(f, lo, hi, tol);
        Piece { lo, hi, value: out.integral, err: out.error_estimate }
    };
    let mut heap = BinaryHeap::new();
    heap.push(rule(a, b));
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        // below a few ulps of the integral bisection cannot improve anything
        let floor = 64.0 * f64::EPSILON * heap.iter().map(|p| p.value.abs()).sum::<f64>();
        if err <= tol.max(floor) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.lo + worst.hi);
        if heap.len() + 2 > MAX_PIECES || worst.hi - worst.lo <= 1e-12 * (1.0 + worst.lo.abs()) {
            return Err(BdfError::Quadrature { estimate: err });
        }
        heap.push(rule(worst.lo, m));
        heap.push(rule(m, worst.hi));
    }
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integral of `f` over `[a, ∞)` via `x = a + (1 - t)/t`. Infinity maps to
/// `t = 0`, where algebraic tails keep full relative precision.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<f64> {
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        f(a + (1.0 - t) / t) / (t * t)
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// Integral of `f` over `[a, ∞)` for `a > 0` when `f(u) ~ u^{-1-p}`, via
/// `u = a t^{-1/p}`, which turns that tail into a bounded integrand on `(0, 1]`.
pub fn integrate_power_tail<F: Fn(f64) -> f64>(f: &F, a: f64, p: f64, tol: f64) -> Result<f64> {
    if !(a > 0.0 && p > 0.0) {
        return Err(BdfError::InvalidArgument(format!("power tail needs a > 0 and p > 0, got a={a}, p={p}")));
    }
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let u = a * t.powf(-1.0 / p);
        f(u) * u / (p * t)
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("positive");
    GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w))
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
/// Returns `(x, f(x))` once the bracket is narrower than `width`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > width {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd { (c, fc) } else { (d, fd) }
}

/// Maximize `f` on `[a, b]`: coarse scan with `grid` points, then golden
/// refinement inside the bracket around the best sample. Ties go to the
/// largest abscissa.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, grid: usize, width: f64) -> (f64, f64) {
    let h = (b - a) / grid as f64;
    let mut best = (a, f(a));
    for i in 1..=grid {
        let x = a + h * i as f64;
        let v = f(x);
        if v >= best.1 {
            best = (x, v);
        }
    }
    let lo = (best.0 - h).max(a);
    let hi = (best.0 + h).min(b);
    let refined = golden_max(&mut f, lo, hi, width);
    if refined.1 >= best.1 { refined } else { best }
}
