//! Transition densities `p_t(x) = (2 pi)^{-1} int exp(-t eta(xi)) exp(-i x xi) dxi`
//! and the validators built on them (mass, semigroup, characteristic
//! function).
//!
//! With `phi = exp(-t eta) = f1 + i f2`, `f1` even and `f2` odd,
//! `p_t(x) = (2 pi)^{-1} [int f1(xi) cos(x xi) dxi + int f2(xi) sin(x xi) dxi]`.
//! Both transforms go through [`crate::oscint`]; `f2` vanishes for the
//! symmetric kinds.
//!
//! Near `x = 0` the densities of this family blow up like
//! `1 / (|x| polylog)`, and a noticeable share of the mass can sit below any
//! practical grid floor. The validators therefore take that share from the
//! Fourier side: `int_{-a}^{a} p_t = pi^{-1} int f1(xi) sin(a xi) / xi dxi`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lower_envelope, upper_envelope, EnvelopeParams};
use crate::error::{Error, Result};
use crate::oscint::{cos_transform, reference_transform, sin_transform, OscIntegrand, PairingConfig, ReferenceConfig};
use crate::quad::GaussLegendre;
use crate::symbol::LevySymbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pairing,
    Reference,
    Auto,
    /// Below the grid floor: envelope bracket instead of quadrature.
    Envelope,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pairing => "pairing",
            Method::Reference => "reference",
            Method::Auto => "auto",
            Method::Envelope => "envelope",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairing" => Ok(Method::Pairing),
            "reference" => Ok(Method::Reference),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidParams(format!("unknown method {other:?} (pairing, reference, auto)"))),
        }
    }
}

/// Fitted upper/lower envelopes used below the grid floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorEnvelope {
    pub upper: EnvelopeParams,
    pub lower: EnvelopeParams,
}

/// Evaluation knobs shared by every density entry point.
#[derive(Clone)]
pub struct DensityConfig {
    pub method: Method,
    /// Quadrature tolerance.
    pub tol: f64,
    /// Period-sum truncation tolerance.
    pub tail_tol: f64,
    pub pairing: PairingConfig,
    pub reference_extent_max: f64,
    /// Smallest `|x|` evaluated by quadrature.
    pub floor: f64,
    pub floor_envelope: Option<FloorEnvelope>,
    /// Nonincreasing majorant of `|f1''|` handed to the integrator.
    pub envelope_g: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tol: 1e-8,
            tail_tol: 1e-6,
            pairing: PairingConfig::default(),
            reference_extent_max: 1e6,
            floor: 1e-6,
            floor_envelope: None,
            envelope_g: None,
        }
    }
}

impl fmt::Debug for DensityConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityConfig")
            .field("method", &self.method)
            .field("tol", &self.tol)
            .field("tail_tol", &self.tail_tol)
            .field("pairing", &self.pairing)
            .field("floor", &self.floor)
            .field("floor_envelope", &self.floor_envelope)
            .field("envelope_g", &self.envelope_g.is_some())
            .finish()
    }
}

impl DensityConfig {
    pub fn with_method(mut self, m: Method) -> Self {
        self.method = m;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn pairing_config(&self) -> PairingConfig {
        PairingConfig { quad_tol: self.tol, tol_abs: self.tail_tol, ..self.pairing }
    }
}

/// One batch request.
#[derive(Debug, Clone)]
pub struct DensityQuery {
    pub symbol: LevySymbol,
    pub t: f64,
    pub xs: Vec<f64>,
    pub method: Method,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub x: f64,
    pub t: f64,
    pub p: f64,
    pub err_est: f64,
    pub method_used: Method,
    pub k_used: usize,
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("time t must be positive and finite, got {t}")))
    }
}

/// `method = auto` resolution: the reference path only when `phi` is
/// absolutely integrable with room to spare.
pub fn resolve_method(symbol: &LevySymbol, t: f64, m: Method) -> Method {
    match m {
        Method::Auto if symbol.params.n == 1 && t >= 2.0 => Method::Reference,
        Method::Auto => Method::Pairing,
        other => other,
    }
}

fn f1_integrand(symbol: LevySymbol, t: f64) -> OscIntegrand<'static> {
    OscIntegrand::even(move |xi| symbol.char_fn(t, xi).re).with_jet(move |xi| match symbol.char_fn_jet(t, xi) {
        Ok([a, b, c]) => [a.re, b.re, c.re],
        Err(_) => [symbol.char_fn(t, xi).re, 0.0, 0.0],
    })
}

fn f2_integrand(symbol: LevySymbol, t: f64) -> OscIntegrand<'static> {
    OscIntegrand::odd(move |xi| symbol.char_fn(t, xi).im).with_jet(move |xi| match symbol.char_fn_jet(t, xi) {
        Ok([a, b, c]) => [a.im, b.im, c.im],
        Err(_) => [symbol.char_fn(t, xi).im, 0.0, 0.0],
    })
}

/// Density at one point. Under `Method::Auto` a reference evaluation that
/// does not stabilize falls back to pairing.
pub fn density(symbol: &LevySymbol, t: f64, x: f64, cfg: &DensityConfig) -> Result<DensityResult> {
    check_t(t)?;
    if x == 0.0 {
        return Err(Error::Singularity { xi: 0.0 });
    }
    if !x.is_finite() {
        return Err(Error::Domain { op: "density", value: x });
    }
    if x.abs() < cfg.floor {
        let Some(fe) = cfg.floor_envelope else {
            return Err(Error::BelowFloor { x, floor: cfg.floor });
        };
        if symbol.is_subordinator() && x < 0.0 {
            return Ok(DensityResult { x, t, p: 0.0, err_est: 0.0, method_used: Method::Envelope, k_used: 0 });
        }
        let hi = upper_envelope(&fe.upper, t, x);
        let lo = lower_envelope(&fe.lower, t, x).min(hi);
        return Ok(DensityResult {
            x,
            t,
            p: 0.5 * (hi + lo),
            err_est: 0.5 * (hi - lo),
            method_used: Method::Envelope,
            k_used: 0,
        });
    }
    let resolved = resolve_method(symbol, t, cfg.method);
    if resolved == Method::Reference {
        match reference_density(symbol, t, x, cfg) {
            Err(Error::NotStabilized { .. }) if cfg.method == Method::Auto => {}
            other => return other,
        }
    }
    pairing_density(symbol, t, x, cfg)
}

fn reference_density(symbol: &LevySymbol, t: f64, x: f64, cfg: &DensityConfig) -> Result<DensityResult> {
    let sym = *symbol;
    let rc = ReferenceConfig { extent0: 16.0, extent_max: cfg.reference_extent_max, tol: cfg.tol };
    let c = reference_transform(&move |xi| sym.char_fn(t, xi).re, x, false, &rc)?;
    let (sv, se, sk) = if symbol.symmetric() {
        (0.0, 0.0, 0)
    } else {
        let s = reference_transform(&move |xi| sym.char_fn(t, xi).im, x, true, &rc)?;
        (s.value, s.err_est, s.k_used)
    };
    Ok(DensityResult {
        x,
        t,
        p: (c.value + sv) / TAU,
        err_est: (c.err_est + se) / TAU,
        method_used: Method::Reference,
        k_used: c.k_used.max(sk),
    })
}

fn pairing_density(symbol: &LevySymbol, t: f64, x: f64, cfg: &DensityConfig) -> Result<DensityResult> {
    let sym = *symbol;
    let pc = cfg.pairing_config();
    let mut f1 = f1_integrand(sym, t);
    if let Some(g) = cfg.envelope_g.clone() {
        f1 = f1.with_envelope(move |y| g(y));
    }
    let c = cos_transform(&f1, x, &pc)?;
    let (sv, se, sk) = if symbol.symmetric() {
        (0.0, 0.0, 0)
    } else {
        let mut f2 = f2_integrand(sym, t);
        if let Some(g) = cfg.envelope_g.clone() {
            f2 = f2.with_envelope(move |y| g(y));
        }
        let s = sin_transform(&f2, x, &pc)?;
        (s.value, s.err_est, s.k_used)
    };
    Ok(DensityResult {
        x,
        t,
        p: (c.value + sv) / TAU,
        err_est: (c.err_est + se) / TAU,
        method_used: Method::Pairing,
        k_used: c.k_used.max(sk),
    })
}

/// Densities over a batch of points, in input order. Points fail
/// individually.
pub fn density_grid(query: &DensityQuery, cfg: &DensityConfig) -> Vec<Result<DensityResult>> {
    let cfg = DensityConfig { method: query.method, tol: query.tol, ..cfg.clone() };
    query.xs.par_iter().map(|&x| density(&query.symbol, query.t, x, &cfg)).collect()
}

/// `int_{-a}^{a} p_t(x) dx` from the Fourier side.
pub fn window_mass(symbol: &LevySymbol, t: f64, a: f64, cfg: &DensityConfig) -> Result<(f64, f64)> {
    check_t(t)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain { op: "window_mass", value: a });
    }
    let sym = *symbol;
    let f = OscIntegrand::odd(move |xi| sym.char_fn(t, xi).re / xi).with_jet(move |xi| {
        let [r0, r1, r2] = match sym.char_fn_jet(t, xi) {
            Ok([a, b, c]) => [a.re, b.re, c.re],
            Err(_) => [sym.char_fn(t, xi).re, 0.0, 0.0],
        };
        let i1 = 1.0 / xi;
        [r0 * i1, (r1 - r0 * i1) * i1, (r2 - 2.0 * r1 * i1 + 2.0 * r0 * i1 * i1) * i1]
    });
    let r = sin_transform(&f, a, &cfg.pairing_config())?;
    Ok((r.value / PI, r.err_est / PI))
}

/// Log-spaced quadrature grid for mass-type integrals of `p_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub panels_per_decade: usize,
    pub order: usize,
}

impl Default for MassGrid {
    fn default() -> Self {
        Self { x_min: 1e-6, x_max: 1e4, panels_per_decade: 3, order: 16 }
    }
}

impl MassGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_max > self.x_min && self.x_max.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "mass grid needs 0 < x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.panels_per_decade < 1 || self.order < 4 {
            return Err(Error::InvalidParams("mass grid needs >= 1 panel per decade and order >= 4".into()));
        }
        Ok(())
    }

    /// Nodes `x` and weights `w` with `int_{x_min}^{x_max} f ~ sum w f(x)`.
    fn nodes(&self, order: usize) -> (Vec<f64>, Vec<f64>) {
        let rule = GaussLegendre::new(order);
        let (l0, l1) = (self.x_min.ln(), self.x_max.ln());
        let decades = (l1 - l0) / std::f64::consts::LN_10;
        let panels = ((decades * self.panels_per_decade as f64).ceil() as usize).max(1);
        let h = (l1 - l0) / panels as f64;
        let mut xs = Vec::with_capacity(panels * order);
        let mut ws = Vec::with_capacity(panels * order);
        for k in 0..panels {
            let c = l0 + h * (k as f64 + 0.5);
            for (z, w) in rule.nodes().iter().zip(rule.weights()) {
                let x = (c + 0.5 * h * z).exp();
                xs.push(x);
                ws.push(0.5 * h * w * x);
            }
        }
        (xs, ws)
    }
}

/// Total mass of `p_t` with its pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassReport {
    pub mass: f64,
    /// Bracket width: quadrature, window and tail uncertainties.
    pub err: f64,
    pub window: f64,
    pub body: f64,
    pub tail: f64,
}

/// Large-x tail `int_b^inf p` from a constant fitted on `[b/4, b]` against
/// the upper-envelope shape.
fn tail_beyond(symbol: &LevySymbol, t: f64, b: f64, cfg: &DensityConfig) -> Result<(f64, f64)> {
    let eps = symbol.params.eps;
    let (shape, integral): (Box<dyn Fn(f64) -> f64 + Sync>, f64) = if eps < 1.0 {
        (Box::new(move |x: f64| x.powf(-1.0 - eps)), b.powf(-eps) / eps)
    } else {
        (Box::new(|x: f64| x.ln_1p() / (x * x)), b.ln_1p() / b + (1.0 / b).ln_1p())
    };
    let xs: Vec<f64> = (0..5).map(|i| b * 4f64.powf(-(i as f64) / 4.0)).collect();
    let ratios: Vec<f64> =
        xs.par_iter().map(|&x| density(symbol, t, x, cfg).map(|d| d.p / shape(x))).collect::<Result<_>>()?;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::EnvelopeConstantsMissing("large-x tail fit produced no finite constant".into()));
    }
    let head = ratios[0].max(0.0);
    Ok((head * integral, (hi - lo) * integral))
}

fn half_line_sides(symbol: &LevySymbol) -> f64 {
    if symbol.is_subordinator() {
        1.0
    } else {
        2.0
    }
}

/// `int p_t(x) w(x) dx` over `x_min <= |x| <= x_max` (positive side only for
/// subordinators), with the per-node density errors.
fn weighted_body(
    symbol: &LevySymbol,
    t: f64,
    grid: &MassGrid,
    order: usize,
    cfg: &DensityConfig,
    w: &(dyn Fn(f64) -> Complex64 + Sync),
) -> Result<(Complex64, f64)> {
    let (xs, ws) = grid.nodes(order);
    let both = !symbol.is_subordinator();
    let parts: Vec<(Complex64, f64)> = xs
        .par_iter()
        .zip(ws.par_iter())
        .map(|(&x, &wt)| {
            let d = density(symbol, t, x, cfg)?;
            let weight = if both { w(x) + w(-x) } else { w(x) };
            Ok((weight * (d.p * wt), d.err_est * wt * if both { 2.0 } else { 1.0 }))
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(a, e), (b, f)| (a + b, e + f)))
}

/// `int_R p_t(x) w(x) dx` for a bounded weight that is ~1 near zero.
fn weighted_mass(
    symbol: &LevySymbol,
    t: f64,
    grid: &MassGrid,
    cfg: &DensityConfig,
    w: &(dyn Fn(f64) -> Complex64 + Sync),
) -> Result<(Complex64, f64, MassReport)> {
    check_t(t)?;
    grid.validate()?;
    let cfg = &validator_config(cfg);
    let (win, win_err) = window_mass(symbol, t, grid.x_min, cfg)?;
    let (body, body_err) = weighted_body(symbol, t, grid, grid.order, cfg, w)?;
    let (coarse, _) = weighted_body(symbol, t, grid, grid.order / 2 + 2, cfg, w)?;
    let (tail, tail_err) = tail_beyond(symbol, t, grid.x_max, cfg)?;
    let sides = half_line_sides(symbol);
    let tail_w = if sides == 2.0 { 0.5 * (w(grid.x_max) + w(-grid.x_max)) } else { w(grid.x_max) };
    let value = w(0.0) * win + body + tail_w * (sides * tail);
    let err = win_err + body_err + (body - coarse).norm() + sides * (tail_err + tail * (tail_w - w(0.0)).norm());
    let report = MassReport { mass: value.re, err, window: win, body: body.re, tail: sides * tail };
    Ok((value, err, report))
}

/// Total mass of `p_t`: Fourier window on `(-x_min, x_min)`, log-spaced
/// Gauss-Legendre panels on `[x_min, x_max]` and a fitted large-x tail.
pub fn normalization(symbol: &LevySymbol, t: f64, grid: &MassGrid, cfg: &DensityConfig) -> Result<MassReport> {
    let one = |_: f64| Complex64::new(1.0, 0.0);
    weighted_mass(symbol, t, grid, cfg, &one).map(|r| r.2)
}

/// `|int p_t(x) exp(i xi x) dx - exp(-t eta(xi))|` on the mass grid.
pub fn cf_roundtrip(symbol: &LevySymbol, t: f64, xi: f64, grid: &MassGrid, cfg: &DensityConfig) -> Result<f64> {
    let w = move |x: f64| Complex64::new(0.0, xi * x).exp();
    let (v, _, _) = weighted_mass(symbol, t, grid, cfg, &w)?;
    Ok((v - symbol.char_fn(t, xi)).norm())
}

/// Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "pchip needs at least two matching points");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
            return Self { x, y, d };
        }
        for i in 1..n - 1 {
            if del[i - 1] * del[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if v.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && v.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                v
            }
        };
        d[0] = end(h[0], h[1], del[0], del[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        Self { x, y, d }
    }

    /// Interpolated value; `None` outside the data range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let n = self.x.len();
        if !(t >= self.x[0] && t <= self.x[n - 1]) {
            return None;
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }
}

/// Samples of `p_t` on a log grid, interpolated as `x p(x)` in `ln x`.
struct SampledDensity {
    interp: Pchip,
    x_min: f64,
    x_max: f64,
    /// `int_0^{x_min} p_t` (one side).
    near: f64,
    near_err: f64,
}

impl SampledDensity {
    fn build(symbol: &LevySymbol, t: f64, xs: &[f64], cfg: &DensityConfig, stride: usize) -> Result<Self> {
        let pick: Vec<f64> = xs.iter().copied().step_by(stride).collect();
        let ps: Vec<f64> =
            pick.par_iter().map(|&x| density(symbol, t, x, cfg).map(|d| d.p * x)).collect::<Result<_>>()?;
        let lx: Vec<f64> = pick.iter().map(|x| x.ln()).collect();
        let x_min = pick[0];
        let (m, e) = window_mass(symbol, t, x_min, cfg)?;
        let near = if symbol.is_subordinator() { m } else { 0.5 * m };
        Ok(Self { interp: Pchip::new(lx, ps), x_min, x_max: *pick.last().unwrap(), near, near_err: e })
    }

    /// `p_t(y)` for `y > 0` inside the grid, zero beyond it.
    fn p(&self, y: f64) -> f64 {
        if y < self.x_min || y > self.x_max {
            return 0.0;
        }
        self.interp.eval(y.ln()).unwrap_or(0.0) / y
    }
}

/// `int_0^{b} p1(y) F(y) dy`, with `p1` singular at 0 and `F` smooth:
/// the piece below `p1.x_min` is `F(0) * mass`, the rest is integrated in
/// `ln y`.
fn singular_piece(p1: &SampledDensity, f: &dyn Fn(f64) -> f64, b: f64, rule: &GaussLegendre) -> (f64, f64) {
    let near = f(0.0) * p1.near;
    let err = (f(0.0) * p1.near_err).abs() + (f(p1.x_min) - f(0.0)).abs() * p1.near;
    if b <= p1.x_min {
        return (f(0.0) * p1.near, err);
    }
    let (l0, l1) = (p1.x_min.ln(), b.ln());
    let panels = ((l1 - l0) * 4.0).ceil().max(1.0) as usize;
    let h = (l1 - l0) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let a = l0 + h * k as f64;
        acc += rule.integrate(
            |w| {
                let y = w.exp();
                p1.p(y) * y * f(y)
            },
            a,
            a + h,
        );
    }
    (near + acc, err)
}

fn convolve_at(p1: &SampledDensity, p2: &SampledDensity, x: f64, symmetric: bool, rule: &GaussLegendre) -> (f64, f64) {
    let half = 0.5 * x;
    let (a, ea) = singular_piece(p1, &|y| p2.p(x - y), half, rule);
    let (b, eb) = singular_piece(p2, &|z| p1.p(x - z), half, rule);
    if !symmetric {
        return (a + b, ea + eb);
    }
    let top = p1.x_max.max(p2.x_max);
    let (c, ec) = singular_piece(p1, &|y| p2.p(x + y), top, rule);
    let (d, ed) = singular_piece(p2, &|z| p1.p(x + z), top, rule);
    (a + b + c + d, ea + eb + ec + ed)
}

/// Grid for [`convolution_check`]: samples at `per_decade` log-spaced points
/// on `[x_min, x_max]`, comparison at the points of `probes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub per_decade: usize,
    pub probes: Vec<f64>,
    pub tol: f64,
}

impl Default for ConvolutionGrid {
    fn default() -> Self {
        Self { x_min: 1e-6, x_max: 50.0, per_decade: 24, probes: vec![0.2, 0.5, 1.0, 2.0, 4.0], tol: 1e-3 }
    }
}

/// Outcome of one semigroup check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub max_abs_dev: f64,
    pub err_est: f64,
    pub points: Vec<(f64, f64, f64)>,
}

/// Validators integrate many densities, so an absolute noise floor matters
/// more than per-point cost: `auto` means pairing here.
fn validator_config(cfg: &DensityConfig) -> DensityConfig {
    let method = match cfg.method {
        Method::Auto => Method::Pairing,
        m => m,
    };
    DensityConfig { method, ..cfg.clone() }
}

/// Compares `p_{t1} * p_{t2}` with `p_{t1 + t2}` at the probe points.
///
/// The convolution integral is split at `x/2` so each half has one
/// singular endpoint; the mass below the sample floor comes from
/// [`window_mass`]. The error estimate is the change when every other
/// sample is dropped; it must stay below `grid.tol`.
pub fn convolution_check(
    symbol: &LevySymbol,
    t1: f64,
    t2: f64,
    grid: &ConvolutionGrid,
    cfg: &DensityConfig,
) -> Result<ConvolutionReport> {
    check_t(t1)?;
    check_t(t2)?;
    if !(grid.x_min > 0.0 && grid.x_max > grid.x_min) || grid.per_decade < 4 {
        return Err(Error::InvalidParams("convolution grid needs 0 < x_min < x_max and >= 4 points per decade".into()));
    }
    let cfg = &validator_config(cfg);
    let decades = (grid.x_max / grid.x_min).log10();
    let n = (decades * grid.per_decade as f64).ceil() as usize;
    // odd count so the coarse grid keeps both ends
    let n = n + (n % 2 == 1) as usize;
    let xs: Vec<f64> = (0..=n).map(|i| grid.x_min * (grid.x_max / grid.x_min).powf(i as f64 / n as f64)).collect();
    let rule = GaussLegendre::new(16);
    let symmetric = !symbol.is_subordinator();
    let fine1 = SampledDensity::build(symbol, t1, &xs, cfg, 1)?;
    let fine2 = if t2 == t1 { None } else { Some(SampledDensity::build(symbol, t2, &xs, cfg, 1)?) };
    let coarse1 = SampledDensity::build(symbol, t1, &xs, cfg, 2)?;
    let coarse2 = if t2 == t1 { None } else { Some(SampledDensity::build(symbol, t2, &xs, cfg, 2)?) };
    let f2 = fine2.as_ref().unwrap_or(&fine1);
    let c2 = coarse2.as_ref().unwrap_or(&coarse1);
    let direct: Vec<DensityResult> =
        grid.probes.par_iter().map(|&x| density(symbol, t1 + t2, x, cfg)).collect::<Result<_>>()?;
    let mut max_dev = 0.0f64;
    let mut err = 0.0f64;
    let mut points = Vec::with_capacity(direct.len());
    for d in &direct {
        let x = d.x.abs();
        let (fine, qe) = convolve_at(&fine1, f2, x, symmetric, &rule);
        let (coarse, _) = convolve_at(&coarse1, c2, x, symmetric, &rule);
        let dev = (fine - d.p).abs();
        max_dev = max_dev.max(dev);
        err = err.max((fine - coarse).abs() + qe + d.err_est);
        points.push((d.x, fine, d.p));
    }
    if err > grid.tol {
        return Err(Error::GridTooCoarse { err_est: err, tol: grid.tol });
    }
    Ok(ConvolutionReport { max_abs_dev: max_dev, err_est: err, points })
}
