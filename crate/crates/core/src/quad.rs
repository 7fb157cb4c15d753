//! Fixed-order Gauss-Legendre rules, adaptive bisection on top of them, and
//! geometric panel summation for integrals over `[a, inf)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate { value: self.value + rhs.value, err: self.err + rhs.err }
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        self.value += rhs.value;
        self.err += rhs.err;
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (_, d) = legendre(n, z);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[a, b]`.
    #[inline]
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    /// Also returns `sum |w f|` over the panel, the roundoff scale of the sum.
    #[inline]
    fn integrate_with_scale<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        let mut mag = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = w * f(c + h * x);
            acc += v;
            mag += v.abs();
        }
        (acc * h, mag * h.abs())
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Knobs for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { tol_abs: 1e-12, tol_rel: 1e-12, max_depth: 48 }
    }
}

/// Adaptive bisection: a panel is accepted once the rule on the panel and on
/// its two halves agree within the panel's share of the tolerance.
///
/// The error estimate is the sum of the accepted `|whole - halves|`
/// differences. Panels hitting `max_depth` are accepted as they are and
/// contribute their difference to the estimate.
pub fn adaptive<F: Fn(f64) -> f64>(rule: &GaussLegendre, f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Estimate {
    if a == b {
        return Estimate::default();
    }
    let (whole, mag) = rule.integrate_with_scale(&f, a, b);
    let tol = opts.tol_abs.max(opts.tol_rel * whole.abs());
    let floor = 64.0 * f64::EPSILON;
    let mut out = Estimate::default();
    let mut stack = vec![(a, b, whole, mag, 0u32)];
    let width = (b - a).abs();
    while let Some((lo, hi, est, mag, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (l, lm) = rule.integrate_with_scale(&f, lo, mid);
        let (r, rm) = rule.integrate_with_scale(&f, mid, hi);
        let halves = l + r;
        let diff = (halves - est).abs();
        let share = tol * (hi - lo).abs() / width;
        let roundoff = floor * (lm + rm).max(mag);
        if diff <= share.max(roundoff) || depth >= opts.max_depth || !diff.is_finite() {
            out.value += halves;
            out.err += diff.max(roundoff);
        } else {
            stack.push((lo, mid, l, lm, depth + 1));
            stack.push((mid, hi, r, rm, depth + 1));
        }
    }
    out
}

/// Integral over `[a, inf)` summed over geometric panels `[a 2^j, a 2^{j+1}]`.
///
/// Stops once a panel contributes less than `tol_rel * |sum| + tol_abs` and
/// the panel sums are contracting; the geometric remainder
/// `last * q / (1 - q)` is folded into the error so the returned
/// `value + err` over-estimates integrals of nonnegative decreasing
/// integrands. Returns [`Error::Divergence`] if contraction never sets in.
pub fn to_infinity<F: Fn(f64) -> f64>(rule: &GaussLegendre, f: F, a: f64, opts: AdaptiveOptions) -> Result<Estimate> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain { op: "to_infinity", value: a });
    }
    const MAX_PANELS: usize = 1000;
    let mut total = Estimate::default();
    let mut lo = a;
    let mut prev: Option<f64> = None;
    let mut contracting = 0usize;
    for panel in 0..MAX_PANELS {
        let hi = 2.0 * lo;
        if !hi.is_finite() {
            break;
        }
        let inner = AdaptiveOptions { tol_abs: opts.tol_abs * 1e-2, ..opts };
        let p = adaptive(rule, &f, lo, hi, inner);
        total += p;
        let mag = p.value.abs();
        if let Some(pm) = prev {
            let q = if pm > 0.0 { mag / pm } else { 0.0 };
            if q < 0.95 {
                contracting += 1;
            } else {
                contracting = 0;
            }
            let small = mag <= opts.tol_rel * total.value.abs() + opts.tol_abs;
            if small && contracting >= 3 {
                let rem = if q < 1.0 { mag * q / (1.0 - q) } else { mag };
                total.err += rem;
                return Ok(total);
            }
            if panel > 200 && contracting == 0 {
                return Err(Error::Divergence { panels: panel + 1, ratio: q });
            }
        }
        prev = Some(mag);
        lo = hi;
    }
    Err(Error::Divergence { panels: MAX_PANELS, ratio: 1.0 })
}
