//! Oscillatory Fourier integrals over the whole line by period pairing.
//!
//! `int f(xi) cos(x xi) dxi` and `int f(xi) sin(x xi) dxi` are folded onto
//! `[0, inf)`, rescaled to unit frequency with `g(u) = h(u / |x|) / |x|`, and
//! cut into periods of length `2 pi`. On each period the four mirrored
//! quarter-period samples are combined before quadrature,
//!
//! ```text
//! I_k = int_0^{pi/2} cos v [g(a+v) - g(a+pi-v) - g(a+pi+v) + g(a+2pi-v)] dv,
//! ```
//!
//! so the integrand that reaches the quadrature rule is already of the size
//! of `g''` instead of `g`. The remaining period sum is finished in one of
//! two ways:
//!
//! * extrapolation (default): after `2 K0` periods the rest is
//!   `sum_{k>=K} J(k)` with `J(k) = int_0^{2pi} (1 - cos v) g''(a_k + v) dv`,
//!   an integral of constant sign, evaluated by Euler-Maclaurin. The spread
//!   between the estimates at `K0` and `2 K0` goes into the error.
//! * direct: periods are summed until a period is below `tol_abs` and the
//!   envelope tail `4 |x|^{-2} int_{2 pi K/|x|}^inf G` is too. Without an
//!   envelope, three consecutive small periods plus one Aitken pass.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::quad::{adaptive, to_infinity, AdaptiveOptions, Estimate, GaussLegendre};

type RealFn<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;
type JetFn<'a> = Box<dyn Fn(f64) -> [f64; 3] + Send + Sync + 'a>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    General,
}

/// A real integrand on the line, with optional analytic jet `[f, f', f'']`
/// and an optional nonincreasing envelope `G >= |f''|` on `(0, inf)`.
pub struct OscIntegrand<'a> {
    f: RealFn<'a>,
    jet: Option<JetFn<'a>>,
    envelope: Option<RealFn<'a>>,
    parity: Parity,
}

impl<'a> OscIntegrand<'a> {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        Self { f: Box::new(f), jet: None, envelope: None, parity: Parity::General }
    }

    pub fn even(f: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        Self { parity: Parity::Even, ..Self::new(f) }
    }

    pub fn odd(f: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        Self { parity: Parity::Odd, ..Self::new(f) }
    }

    pub fn with_jet(mut self, jet: impl Fn(f64) -> [f64; 3] + Send + Sync + 'a) -> Self {
        self.jet = Some(Box::new(jet));
        self
    }

    pub fn with_envelope(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        self.envelope = Some(Box::new(g));
        self
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        (self.f)(xi)
    }

    pub fn envelope(&self) -> Option<&(dyn Fn(f64) -> f64 + Send + Sync + 'a)> {
        self.envelope.as_deref()
    }

    pub fn has_jet(&self) -> bool {
        self.jet.is_some()
    }

    /// `G(a) >= G(b)` for every consecutive pair of the (sorted) samples.
    /// True when no envelope is attached.
    pub fn envelope_is_monotone(&self, samples: &[f64]) -> bool {
        let Some(g) = self.envelope() else { return true };
        let mut pts: Vec<f64> = samples.iter().copied().filter(|y| *y > 0.0).collect();
        pts.sort_by(f64::total_cmp);
        pts.windows(2).all(|w| g(w[0]) >= g(w[1]))
    }

    fn fd_jet(&self, xi: f64) -> [f64; 3] {
        let d = 1e-3 * xi.abs().max(1e-3);
        let f0 = self.eval(xi);
        let fp = self.eval(xi + d);
        let fm = self.eval(xi - d);
        [f0, (fp - fm) / (2.0 * d), (fp - 2.0 * f0 + fm) / (d * d)]
    }

    fn jet_at(&self, xi: f64) -> [f64; 3] {
        match &self.jet {
            Some(j) => j(xi),
            None => self.fd_jet(xi),
        }
    }
}

/// Knobs for the period-pairing integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingConfig {
    /// Gauss-Legendre nodes per quarter-period panel.
    pub quad_order: usize,
    /// Hard cap on the number of periods.
    pub k_max: usize,
    /// Truncation tolerance for the period sum.
    pub tol_abs: f64,
    /// Absolute tolerance for each period's quadrature.
    pub quad_tol: f64,
    /// Finish the sum with the Euler-Maclaurin tail instead of summing on.
    pub use_extrapolation: bool,
    /// `K0`: periods summed before the first tail estimate.
    pub direct_periods: usize,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            quad_order: 16,
            k_max: 1_000_000,
            tol_abs: 1e-6,
            quad_tol: 1e-8,
            use_extrapolation: true,
            direct_periods: 64,
        }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_order < 8 {
            return Err(Error::InvalidParams(format!("quad_order must be >= 8, got {}", self.quad_order)));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidParams("k_max must be >= 1".into()));
        }
        if !(self.tol_abs > 0.0) || !(self.quad_tol > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        if self.direct_periods < 1 {
            return Err(Error::InvalidParams("direct_periods must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscResult {
    pub value: f64,
    pub err_est: f64,
    pub k_used: usize,
}

#[derive(Clone, Copy)]
enum Transform {
    Cos,
    Sin,
}

/// The folded half-line function and its unit-frequency rescaling.
struct Folded<'a, 'b> {
    g: &'b OscIntegrand<'a>,
    kind: Transform,
    s: f64,
}

impl Folded<'_, '_> {
    #[inline]
    fn fold(&self, xi: f64) -> f64 {
        let f = &self.g;
        match (self.kind, f.parity) {
            (Transform::Cos, Parity::Even) | (Transform::Sin, Parity::Odd) => 2.0 * f.eval(xi),
            (Transform::Cos, Parity::Odd) | (Transform::Sin, Parity::Even) => 0.0,
            (Transform::Cos, Parity::General) => f.eval(xi) + f.eval(-xi),
            (Transform::Sin, Parity::General) => f.eval(xi) - f.eval(-xi),
        }
    }

    /// `[h, h', h'']` of the folded function.
    fn fold_jet(&self, xi: f64) -> [f64; 3] {
        let f = &self.g;
        let even_part = matches!(self.kind, Transform::Cos);
        match f.parity {
            Parity::Even | Parity::Odd => {
                let vanishes =
                    matches!((self.kind, f.parity), (Transform::Cos, Parity::Odd) | (Transform::Sin, Parity::Even));
                if vanishes {
                    return [0.0; 3];
                }
                let j = f.jet_at(xi);
                [2.0 * j[0], 2.0 * j[1], 2.0 * j[2]]
            }
            Parity::General => {
                let p = f.jet_at(xi);
                let m = f.jet_at(-xi);
                if even_part {
                    [p[0] + m[0], p[1] - m[1], p[2] + m[2]]
                } else {
                    [p[0] - m[0], p[1] + m[1], p[2] - m[2]]
                }
            }
        }
    }

    #[inline]
    fn g(&self, u: f64) -> f64 {
        self.fold(u / self.s) / self.s
    }

    fn gd1(&self, u: f64) -> f64 {
        self.fold_jet(u / self.s)[1] / (self.s * self.s)
    }

    fn gd2(&self, u: f64) -> f64 {
        self.fold_jet(u / self.s)[2] / (self.s * self.s * self.s)
    }
}

struct Pairing<'a, 'b, 'c> {
    h: Folded<'a, 'b>,
    rule: GaussLegendre,
    cfg: &'c PairingConfig,
    /// Start of period zero.
    a0: f64,
}

impl Pairing<'_, '_, '_> {
    fn quad_opts(&self) -> AdaptiveOptions {
        AdaptiveOptions { tol_abs: self.cfg.quad_tol * 1e-2, tol_rel: 1e-12, max_depth: 40 }
    }

    fn period(&self, k: usize) -> Estimate {
        let a = self.a0 + TAU * k as f64;
        let h = &self.h;
        let comb = |v: f64| v.cos() * (h.g(a + v) - h.g(a + PI - v) - h.g(a + PI + v) + h.g(a + TAU - v));
        adaptive(&self.rule, comb, 0.0, FRAC_PI_2, self.quad_opts())
    }

    /// `J(kappa) = int_0^{2pi} (1 - cos v) g''(a0 + 2 pi kappa + v) dv`.
    fn j(&self, kappa: f64) -> Estimate {
        let b = self.a0 + TAU * kappa;
        adaptive(&self.rule, |v: f64| (1.0 - v.cos()) * self.h.gd2(b + v), 0.0, TAU, self.quad_opts())
    }

    /// Euler-Maclaurin estimate of `sum_{k >= kk} J(k)`.
    fn tail(&self, kk: usize) -> Estimate {
        let c = kk as f64 - 0.5;
        let b = self.a0 + TAU * c;
        let int = adaptive(&self.rule, |v: f64| (1.0 - v.cos()) * self.h.gd1(b + v), 0.0, TAU, self.quad_opts());
        let delta = 0.25;
        let jp = self.j(c + delta);
        let jm = self.j(c - delta);
        let slope = (jp.value - jm.value) / (2.0 * delta);
        Estimate { value: -int.value / TAU + slope / 24.0, err: int.err / TAU + (jp.err + jm.err) / (48.0 * delta) }
    }

    fn extrapolated(&self, head: Estimate) -> Result<OscResult> {
        let k1 = (2 * self.cfg.direct_periods).min(self.cfg.k_max).max(2);
        let k0 = k1 / 2;
        let mut sum = head;
        let mut at_k0 = Estimate::default();
        for k in 0..k1 {
            if k == k0 {
                at_k0 = sum;
            }
            sum += self.period(k);
        }
        let t0 = self.tail(k0);
        let t1 = self.tail(k1);
        let e0 = at_k0.value + t0.value;
        let e1 = sum.value + t1.value;
        let err = (e1 - e0).abs() + sum.err + t1.err;
        if !e1.is_finite() {
            return Err(Error::NoConvergence { value: e1, err_est: err, k_used: k1 });
        }
        Ok(OscResult { value: e1, err_est: err, k_used: k1 })
    }

    fn direct(&self, head: Estimate, envelope: Option<&(dyn Fn(f64) -> f64 + Send + Sync + '_)>) -> Result<OscResult> {
        let tol = self.cfg.tol_abs;
        let mut sum = head;
        let mut partial = Vec::with_capacity(4);
        let mut small = 0usize;
        for k in 0..self.cfg.k_max {
            let ik = self.period(k);
            sum += ik;
            if k == 0 {
                continue;
            }
            let is_small = ik.value.abs() < tol;
            match envelope {
                Some(g) => {
                    if is_small {
                        let tb = 4.0 * tail_bound(g, self.h.s, k)?;
                        if tb < tol {
                            return Ok(OscResult { value: sum.value, err_est: sum.err + tb, k_used: k + 1 });
                        }
                    }
                }
                None => {
                    partial.push(sum.value);
                    if partial.len() > 3 {
                        partial.remove(0);
                    }
                    small = if is_small { small + 1 } else { 0 };
                    if small >= 3 {
                        let (s0, s1, s2) = (partial[0], partial[1], partial[2]);
                        let den = s2 - 2.0 * s1 + s0;
                        let acc = if den != 0.0 && den.is_finite() { s2 - (s2 - s1).powi(2) / den } else { s2 };
                        let acc =
                            if acc.is_finite() && (acc - s2).abs() <= (s2 - s1).abs().max(tol) { acc } else { s2 };
                        return Ok(OscResult {
                            value: acc,
                            err_est: sum.err + (acc - s2).abs() + (s2 - s1).abs(),
                            k_used: k + 1,
                        });
                    }
                }
            }
        }
        let tail = match envelope {
            Some(g) => 4.0 * tail_bound(g, self.h.s, self.cfg.k_max).unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        };
        Err(Error::NoConvergence { value: sum.value, err_est: sum.err + tail, k_used: self.cfg.k_max })
    }
}

fn transform(g: &OscIntegrand<'_>, x: f64, cfg: &PairingConfig, kind: Transform) -> Result<OscResult> {
    cfg.validate()?;
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain { op: "oscillatory transform", value: x });
    }
    let vanishes = matches!((kind, g.parity), (Transform::Cos, Parity::Odd) | (Transform::Sin, Parity::Even));
    if vanishes {
        return Ok(OscResult { value: 0.0, err_est: 0.0, k_used: 0 });
    }
    let s = x.abs();
    let h = Folded { g, kind, s };
    let (a0, head) = match kind {
        Transform::Cos => (0.0, Estimate::default()),
        Transform::Sin => {
            let rule = GaussLegendre::new(cfg.quad_order);
            let opts = AdaptiveOptions { tol_abs: cfg.quad_tol * 1e-2, tol_rel: 1e-12, max_depth: 40 };
            (FRAC_PI_2, adaptive(&rule, |u: f64| u.sin() * h.g(u), 0.0, FRAC_PI_2, opts))
        }
    };
    let p = Pairing { h, rule: GaussLegendre::new(cfg.quad_order), cfg, a0 };
    let r = if cfg.use_extrapolation { p.extrapolated(head)? } else { p.direct(head, g.envelope())? };
    let sign = match kind {
        Transform::Sin => x.signum(),
        Transform::Cos => 1.0,
    };
    Ok(OscResult { value: sign * r.value, ..r })
}

/// `int_R f(xi) cos(x xi) dxi` by period pairing.
pub fn cos_transform(g: &OscIntegrand<'_>, x: f64, cfg: &PairingConfig) -> Result<OscResult> {
    transform(g, x, cfg, Transform::Cos)
}

/// `int_R f(xi) sin(x xi) dxi` by period pairing, with the block
/// `[-pi/2, pi/2]` (in `x xi`) integrated directly.
pub fn sin_transform(g: &OscIntegrand<'_>, x: f64, cfg: &PairingConfig) -> Result<OscResult> {
    transform(g, x, cfg, Transform::Sin)
}

/// The paired period contributions `I_k`, `k = 0..count`, of
/// [`cos_transform`]; their sum is the transform.
pub fn cos_period_terms(g: &OscIntegrand<'_>, x: f64, cfg: &PairingConfig, count: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain { op: "cos_period_terms", value: x });
    }
    let h = Folded { g, kind: Transform::Cos, s: x.abs() };
    let p = Pairing { h, rule: GaussLegendre::new(cfg.quad_order), cfg, a0: 0.0 };
    Ok((0..count).map(|k| p.period(k).value).collect())
}

/// `|x|^{-2} int_{2 pi K / |x|}^inf G(y) dy`, returned as value plus
/// quadrature error so that it over-estimates the integral.
pub fn tail_bound(g: &(dyn Fn(f64) -> f64 + Send + Sync + '_), x: f64, k: usize) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain { op: "tail_bound", value: x });
    }
    if k == 0 {
        return Err(Error::InvalidParams("tail_bound needs K >= 1".into()));
    }
    let s = x.abs();
    let lo = TAU * k as f64 / s;
    let rule = GaussLegendre::new(16);
    let opts = AdaptiveOptions { tol_abs: 1e-300, tol_rel: 1e-10, max_depth: 30 };
    let e = to_infinity(&rule, g, lo, opts)?;
    Ok((e.value + e.err) / (s * s))
}

/// Plain adaptive quadrature of `f(xi) cos(x xi)` (or `sin`) on
/// `[-extent, extent]`, panel by panel at half periods.
pub fn reference_integral(f: &dyn Fn(f64) -> f64, x: f64, extent: f64, sine: bool) -> Result<Estimate> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain { op: "reference_integral", value: x });
    }
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::Domain { op: "reference_integral", value: extent });
    }
    let rule = GaussLegendre::new(16);
    Ok(reference_range(&rule, f, x, 0.0, extent, sine, 1e-13))
}

/// `int_{[lo, hi] and [-hi, -lo]}` of the oscillating integrand.
fn reference_range(
    rule: &GaussLegendre,
    f: &dyn Fn(f64) -> f64,
    x: f64,
    lo: f64,
    hi: f64,
    sine: bool,
    tol: f64,
) -> Estimate {
    let w = |xi: f64| if sine { (x * xi).sin() } else { (x * xi).cos() };
    let both = |xi: f64| f(xi) * w(xi) + f(-xi) * w(-xi);
    let step = PI / x.abs();
    let opts = AdaptiveOptions { tol_abs: tol, tol_rel: 1e-12, max_depth: 40 };
    let mut out = Estimate::default();
    let mut a = lo;
    while a < hi {
        let b = (a + step).min(hi);
        out += adaptive(rule, both, a, b, opts);
        a = b;
    }
    out
}

/// Knobs for [`reference_transform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    pub extent0: f64,
    pub extent_max: f64,
    pub tol: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { extent0: 16.0, extent_max: 1e5, tol: 1e-8 }
    }
}

/// Reference transform with extent doubling: stops once both
/// `|I(2 Xi) - I(Xi)|` and the tail bound `2 (|f(Xi)| + |f(-Xi)|) / |x|` are
/// below `tol`, and fails with [`Error::NotStabilized`] if that
/// never happens up to `extent_max`.
pub fn reference_transform(f: &dyn Fn(f64) -> f64, x: f64, sine: bool, cfg: &ReferenceConfig) -> Result<OscResult> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain { op: "reference_transform", value: x });
    }
    let rule = GaussLegendre::new(16);
    let qtol = cfg.tol * 1e-3;
    let mut extent = cfg.extent0.max(4.0 * PI / x.abs());
    let mut acc = reference_range(&rule, f, x, 0.0, extent, sine, qtol);
    let mut panels = (extent * x.abs() / PI).ceil() as usize;
    let mut change = f64::NAN;
    while 2.0 * extent <= cfg.extent_max {
        let add = reference_range(&rule, f, x, extent, 2.0 * extent, sine, qtol);
        panels += (extent * x.abs() / PI).ceil() as usize;
        acc += add;
        extent *= 2.0;
        // second mean value bound on the remaining tail for monotone |f|
        let tail = 2.0 * (f(extent).abs() + f(-extent).abs()) / x.abs();
        change = add.value.abs().max(tail);
        if change < cfg.tol {
            return Ok(OscResult { value: acc.value, err_est: acc.err + change, k_used: panels });
        }
    }
    Err(Error::NotStabilized { extent, change })
}
