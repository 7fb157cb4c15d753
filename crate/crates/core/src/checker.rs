//! Grid certification of the growth assumptions on a symbol, with fitted
//! constants, plus derivative and Bernstein-property self-tests.
//!
//! Upper set, for `|xi| >= 1` unless noted:
//!
//! * `eta_1 >= alpha_eps s_n^eps`
//! * `|eta_2| <= c |xi|^eps` (`|xi| <= 1`), `c s_n^{eps-1} r_{n-1}^{-1}`
//! * `|eta'| <= c |xi|^{eps-1}`, `c s_n^{eps-1} r_{n-1}^{-1} (1+|xi|)^{-1}`
//! * `|eta''| <= c |xi|^{eps-2}`, `c s_n^{eps-1} r_{n-1}^{-1} (1+|xi|)^{-2}`
//!
//! Lower set (real, even symbols):
//!
//! * `eta <= alpha_0 s_n^eps`
//! * `-eta'' >= c s_{n-1}^{eps-1} r_{n-1}^{-1} (1+|xi|)^{-2}`
//!
//! Constants are grid extrema; nothing is randomized, so reports are
//! byte-for-byte reproducible.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterlog::{d2s_raw, ds_raw, r_raw, s_raw, IterLogParams};
use crate::symbol::{second_derivative_lower, LevySymbol, SymbolKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

/// `count` points on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn log(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count, spacing: Spacing::Log }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 1 || !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParams(format!("bad grid {self:?}")));
        }
        if self.spacing == Spacing::Log && !(self.min > 0.0) {
            return Err(Error::InvalidParams("log grid needs min > 0".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let m = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let f = i as f64 / m;
                match self.spacing {
                    Spacing::Log => self.min * (self.max / self.min).powf(f),
                    Spacing::Linear => self.min + (self.max - self.min) * f,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub xi: f64,
    pub id: String,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Fitted {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_eta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_d1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_d2: Option<f64>,
    /// Lower constant for `-eta''`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_neg_d2: Option<f64>,
    /// Same constant implied by the certified `B_0` bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_b0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub schema_version: u32,
    pub kind: &'static str,
    pub symbol: String,
    pub grid: Grid,
    /// Grid on which the growth (`alpha`) inequality was fitted.
    pub alpha_grid: Grid,
    pub fitted: Fitted,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
    pub pass: bool,
}

/// Domains for [`check_upper_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperCheckConfig {
    /// Majorant grid.
    pub grid: Grid,
    /// Grid for `eta_1 >= alpha_eps s_n^eps`.
    pub alpha_grid: Grid,
    /// Fitted `alpha_eps` below this counts as not positive.
    pub alpha_floor: f64,
}

impl Default for UpperCheckConfig {
    fn default() -> Self {
        Self { grid: Grid::log(1e-6, 1e6, 400), alpha_grid: Grid::log(1.0, 1e6, 400), alpha_floor: 1e-3 }
    }
}

/// Domains for [`check_lower_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerCheckConfig {
    /// Grid for `eta <= alpha_0 s_n^eps`.
    pub grid: Grid,
    /// Grid for the `-eta''` lower bound.
    pub d2_grid: Grid,
}

impl Default for LowerCheckConfig {
    fn default() -> Self {
        Self { grid: Grid::log(1e-6, 1e6, 400), d2_grid: Grid::log(1.0, 1e6, 400) }
    }
}

#[inline]
fn tower_factor(params: IterLogParams, xi: f64) -> f64 {
    let IterLogParams { n, eps } = params;
    s_raw(n, xi).powf(eps - 1.0) / r_raw(n - 1, xi)
}

fn eta2_shape(params: IterLogParams, xi: f64) -> f64 {
    if xi <= 1.0 {
        xi.powf(params.eps)
    } else {
        tower_factor(params, xi)
    }
}

fn d1_shape(params: IterLogParams, xi: f64) -> f64 {
    if xi <= 1.0 {
        xi.powf(params.eps - 1.0)
    } else {
        tower_factor(params, xi) / (1.0 + xi)
    }
}

fn d2_shape(params: IterLogParams, xi: f64) -> f64 {
    if xi <= 1.0 {
        xi.powf(params.eps - 2.0)
    } else {
        tower_factor(params, xi) / ((1.0 + xi) * (1.0 + xi))
    }
}

/// `s_{n-1}^{eps-1} r_{n-1}^{-1} (1+xi)^{-2}` with `s_0(xi) = xi`.
fn neg_d2_lower_shape(params: IterLogParams, xi: f64) -> f64 {
    let IterLogParams { n, eps } = params;
    s_raw(n - 1, xi).powf(eps - 1.0) / (r_raw(n - 1, xi) * (1.0 + xi) * (1.0 + xi))
}

fn arg_extreme(v: &[(f64, f64)], max: bool) -> (f64, f64) {
    v.iter().copied().fold((f64::NAN, if max { f64::NEG_INFINITY } else { f64::INFINITY }), |acc, (x, r)| {
        let better = if max { r > acc.1 } else { r < acc.1 };
        if better || r.is_nan() && !acc.1.is_nan() {
            (x, r)
        } else {
            acc
        }
    })
}

/// Fits the upper-set constants on the declared grids.
pub fn check_upper_assumptions(symbol: &LevySymbol, cfg: &UpperCheckConfig) -> Result<AssumptionReport> {
    cfg.grid.validate()?;
    cfg.alpha_grid.validate()?;
    let params = symbol.params;
    let mut violations = Vec::new();

    let ratios: Vec<(f64, f64)> = cfg
        .alpha_grid
        .points()
        .par_iter()
        .map(|&xi| (xi, symbol.eta_parts(xi).0 / s_raw(params.n, xi).powf(params.eps)))
        .collect();
    let (xa, alpha) = arg_extreme(&ratios, false);
    if !(alpha >= cfg.alpha_floor) || !alpha.is_finite() {
        violations.push(Violation { xi: xa, id: "eta1_lower".into(), margin: alpha });
    }

    let rows: Vec<Result<(f64, f64, f64, f64)>> = cfg
        .grid
        .points()
        .par_iter()
        .map(|&xi| {
            let j = symbol.eta(xi)?;
            let e2 = j.value.im.abs() / eta2_shape(params, xi);
            let d1 = j.d1.re.abs().max(j.d1.im.abs()) / d1_shape(params, xi);
            let d2 = j.d2.re.abs().max(j.d2.im.abs()) / d2_shape(params, xi);
            Ok((xi, e2, d1, d2))
        })
        .collect();
    let rows: Vec<(f64, f64, f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let pick = |f: fn(&(f64, f64, f64, f64)) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.0, f(r))).collect() };
    let mut fitted = Fitted { alpha_eps: Some(alpha), ..Default::default() };
    for (id, col, slot) in [
        ("eta2_upper", pick(|r| r.1), &mut fitted.c_eta2),
        ("d1_upper", pick(|r| r.2), &mut fitted.c_d1),
        ("d2_upper", pick(|r| r.3), &mut fitted.c_d2),
    ] {
        let (x, c) = arg_extreme(&col, true);
        *slot = Some(c);
        if !c.is_finite() || c < 0.0 {
            violations.push(Violation { xi: x, id: id.into(), margin: c });
        }
    }
    let pass = violations.is_empty();
    Ok(AssumptionReport {
        schema_version: SCHEMA_VERSION,
        kind: "upper",
        symbol: symbol.to_string(),
        grid: cfg.grid,
        alpha_grid: cfg.alpha_grid,
        fitted,
        violations,
        notes: vec![],
        pass,
    })
}

/// Fits the lower-set constants; real, even symbols only.
pub fn check_lower_assumptions(symbol: &LevySymbol, cfg: &LowerCheckConfig) -> Result<AssumptionReport> {
    if !symbol.symmetric() {
        return Err(Error::NotSymmetric(symbol.to_string()));
    }
    cfg.grid.validate()?;
    cfg.d2_grid.validate()?;
    let params = symbol.params;
    let mut violations = Vec::new();
    let up: Vec<(f64, f64)> = cfg
        .grid
        .points()
        .par_iter()
        .map(|&xi| (xi, symbol.value(xi).re / s_raw(params.n, xi).powf(params.eps)))
        .collect();
    let (xa, alpha0) = arg_extreme(&up, true);
    if !alpha0.is_finite() || !(alpha0 > 0.0) {
        violations.push(Violation { xi: xa, id: "eta_upper".into(), margin: alpha0 });
    }
    let rows: Vec<Result<(f64, f64, Option<f64>)>> = cfg
        .d2_grid
        .points()
        .par_iter()
        .map(|&xi| {
            let j = symbol.eta(xi)?;
            let shape = neg_d2_lower_shape(params, xi);
            let b0 = match symbol.kind {
                SymbolKind::SymmetricIterLog => Some(second_derivative_lower(params, xi)?.certified / shape),
                _ => None,
            };
            Ok((xi, -j.d2.re / shape, b0))
        })
        .collect();
    let rows: Vec<(f64, f64, Option<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let col: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let (xl, c_low) = arg_extreme(&col, false);
    if !(c_low > 0.0) || !c_low.is_finite() {
        violations.push(Violation { xi: xl, id: "neg_d2_lower".into(), margin: c_low });
    }
    let c_b0 = rows.iter().filter_map(|r| r.2).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    for r in &rows {
        if let Some(b) = r.2 {
            if r.1 < b * (1.0 - 1e-12) {
                violations.push(Violation { xi: r.0, id: "b0_consistency".into(), margin: r.1 - b });
            }
        }
    }
    let pass = violations.is_empty();
    Ok(AssumptionReport {
        schema_version: SCHEMA_VERSION,
        kind: "lower",
        symbol: symbol.to_string(),
        grid: cfg.grid,
        alpha_grid: cfg.d2_grid,
        fitted: Fitted { alpha_0: Some(alpha0), c_neg_d2: Some(c_low), c_b0, ..Default::default() },
        violations,
        notes: vec!["-eta'' shape uses s_{n-1}^{eps-1}; the upper set uses s_n^{eps-1}".into()],
        pass,
    })
}

/// Constants of the upper set, as needed for the `G` envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperFit {
    pub alpha_eps: f64,
    pub c_d1: f64,
    pub c_d2: f64,
}

impl UpperFit {
    pub fn from_report(r: &AssumptionReport) -> Result<Self> {
        let f = r.fitted;
        match (f.alpha_eps, f.c_d1, f.c_d2) {
            (Some(a), Some(c1), Some(c2)) if a > 0.0 && c1.is_finite() && c2.is_finite() => {
                Ok(Self { alpha_eps: a, c_d1: c1, c_d2: c2 })
            }
            _ => Err(Error::EnvelopeConstantsMissing(format!("upper report for {} has no usable constants", r.symbol))),
        }
    }

    /// `G(xi) = 2 exp(-t alpha_eps s_n^eps) (t^2 g_3^2 + t g_4)`, made
    /// nonincreasing across `xi = 1` by clamping the small-xi branch from
    /// below with the value at 1. The factor 2 covers `|Re(u v)| <= ...`
    /// for the two-term `phi''`.
    pub fn envelope_g(&self, params: IterLogParams, t: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        let f = *self;
        let raw = move |xi: f64| {
            let g1 = f.alpha_eps * s_raw(params.n, xi).powf(params.eps);
            let g3 = f.c_d1 * d1_shape(params, xi);
            let g4 = f.c_d2 * d2_shape(params, xi);
            2.0 * (-t * g1).exp() * (t * t * g3 * g3 + t * g4)
        };
        let at_one = raw(1.0);
        Arc::new(move |xi: f64| if xi < 1.0 { raw(xi).max(at_one) } else { raw(xi) })
    }
}

/// Worst relative mismatch between analytic and central-difference jets.
pub fn derivative_selftest(symbol: &LevySymbol, grid: &Grid) -> Result<f64> {
    grid.validate()?;
    let errs: Vec<Result<f64>> = grid
        .points()
        .par_iter()
        .map(|&xi| {
            let j = symbol.eta(xi)?;
            let h = xi * 1e-6 + 1e-9;
            let fd1 = (symbol.value(xi + h) - symbol.value(xi - h)) / (2.0 * h);
            let fd2 = (symbol.eta(xi + h)?.d1 - symbol.eta(xi - h)?.d1) / (2.0 * h);
            let e1 = (fd1 - j.d1).norm() / j.d1.norm();
            let e2 = (fd2 - j.d2).norm() / j.d2.norm().max(j.d1.norm() / xi.abs());
            Ok(e1.max(e2))
        })
        .collect();
    errs.into_iter().try_fold(0.0f64, |m, e| Ok(m.max(e?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeSign {
    pub xi: f64,
    pub order: u32,
    pub value: f64,
    pub err: f64,
    /// `None` when the difference noise swamps the value.
    pub ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub schema_version: u32,
    pub params: IterLogParams,
    pub max_order: u32,
    pub rows: Vec<DerivativeSign>,
    pub inconclusive: usize,
    pub pass: bool,
}

/// `psi, psi', psi''` for `psi = s_n^eps` on `(0, inf)`.
fn psi_jet(params: IterLogParams, x: f64) -> [f64; 3] {
    let IterLogParams { n, eps } = params;
    let s = s_raw(n, x);
    let s1 = ds_raw(n, x);
    let s2 = d2s_raw(n, x);
    let p = s.powf(eps);
    [p, eps * p / s * s1, eps * (eps - 1.0) * p / (s * s) * s1 * s1 + eps * p / s * s2]
}

/// Central `m`-th difference of `f` at `x` with step `h`.
fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, m: u32, h: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=m {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (m as f64 / 2.0 - j as f64) * h);
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(m as i32)
}

/// Alternating signs `(-1)^{k+1} psi^{(k)} >= 0`, `k = 1..=max_order`.
///
/// Orders 1 and 2 are analytic; higher orders are central differences of
/// `psi''` with steps `h = xi/10` and `h/2`. The Richardson combination is
/// the value and the step change is its error; a point is inconclusive when
/// the error is at least a third of the value.
pub fn bernstein_spotcheck(params: IterLogParams, max_order: u32, grid: &[f64]) -> Result<BernsteinReport> {
    if !(1..=6).contains(&max_order) {
        return Err(Error::InvalidParams(format!("max_order must be in 1..=6, got {max_order}")));
    }
    if let Some(&bad) = grid.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain { op: "bernstein_spotcheck", value: bad });
    }
    let d2 = move |x: f64| psi_jet(params, x)[2];
    let mut rows = Vec::new();
    for &xi in grid {
        let jet = psi_jet(params, xi);
        for k in 1..=max_order {
            let (value, err) = if k <= 2 {
                (jet[k as usize], 0.0)
            } else {
                let m = k - 2;
                let h = 0.1 * xi;
                let a = central_difference(&d2, xi, m, h);
                let b = central_difference(&d2, xi, m, 0.5 * h);
                ((4.0 * b - a) / 3.0, (a - b).abs())
            };
            let want = if k % 2 == 1 { 1.0 } else { -1.0 };
            let ok = if err * 3.0 >= value.abs() { None } else { Some(want * value > 0.0) };
            rows.push(DerivativeSign { xi, order: k, value, err, ok });
        }
    }
    let inconclusive = rows.iter().filter(|r| r.ok.is_none()).count();
    let pass = rows.iter().all(|r| r.ok != Some(false));
    Ok(BernsteinReport { schema_version: SCHEMA_VERSION, params, max_order, rows, inconclusive, pass })
}
