//! Lévy symbols built from the iterated-logarithm tower.
//!
//! Three families are provided:
//!
//! * [`SymbolKind::SubordinatorChain`]: `eta(xi) = psi(-i xi)` for the
//!   Bernstein function `psi = s_n^eps`, evaluated through the complex
//!   recursion `u_1 = ln(1 - i xi)`, `u_{k+1} = ln(1 + u_k)` and
//!   `eta = u_n^eps`. These are symbols of subordinators, so the densities
//!   live on `[0, inf)`.
//! * [`SymbolKind::SymmetricIterLog`]: `eta(xi) = s_n(|xi|)^eps`, real and
//!   even.
//! * [`SymbolKind::SubordinatedSquare`]: `eta(xi) = s_n(xi^2)^eps`, real and
//!   even. This one is a test instance: for `n = 1, eps = 1` the density is
//!   the Laplace density `exp(-|x|)/2`.
//!
//! Sign convention: the characteristic function is
//! `E exp(i xi X_t) = exp(-t eta(xi))` with `eta` the complex value returned
//! by [`LevySymbol::value`]. [`LevySymbol::eta_parts`] reports
//! `(eta_1, eta_2) = (Re eta, -Im eta)`, so that `ln(1 - i xi)` splits as
//! `(ln(1 + xi^2)/2, atan xi)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterlog::{d2s_raw, ds_raw, s_raw, IterLogParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    SubordinatorChain,
    SymmetricIterLog,
    SubordinatedSquare,
}

impl SymbolKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SymbolKind::SubordinatorChain => "chain",
            SymbolKind::SymmetricIterLog => "sym",
            SymbolKind::SubordinatedSquare => "sq",
        }
    }
}

/// Value and first two derivatives of a symbol at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolJet {
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

impl SymbolJet {
    fn real(value: f64, d1: f64, d2: f64) -> Self {
        Self { value: value.into(), d1: d1.into(), d2: d2.into() }
    }
}

/// An immutable, evaluable Lévy symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySymbol {
    pub params: IterLogParams,
    pub kind: SymbolKind,
}

/// Principal `ln(1 + w)` with full accuracy for small `w`.
#[inline]
fn ln_1p_complex(w: Complex64) -> Complex64 {
    let a = w.re;
    let b = w.im;
    let re = 0.5 * (a * (2.0 + a) + b * b).ln_1p();
    let im = b.atan2(1.0 + a);
    Complex64::new(re, im)
}

/// `ln(1 - i xi)`.
#[inline]
fn first_level(xi: f64) -> Complex64 {
    let ax = xi.abs();
    let re = if ax > 1e150 { ax.ln() + 0.5 * (ax * ax).recip().ln_1p() } else { 0.5 * (xi * xi).ln_1p() };
    Complex64::new(re, -xi.atan())
}

/// Principal power `u^eps = exp(eps (ln|u| + i arg u))`.
#[inline]
fn principal_pow(u: Complex64, eps: f64) -> Complex64 {
    if eps == 1.0 {
        return u;
    }
    if u.re == 0.0 && u.im == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let log = Complex64::new(u.re.hypot(u.im).ln(), u.im.atan2(u.re));
    (log * eps).exp()
}

/// `u_n` and its first two derivatives, from `u_1 = ln(1 - i xi)` and
/// `u_{k+1} = ln(1 + u_k)` on the principal branch.
///
/// Each level checks `Re(1 + u_k) > 0`; a violation means the recursion left
/// the right half-plane and is reported instead of silently wrapping.
pub fn chain_jet(n: u32, xi: f64) -> Result<SymbolJet> {
    if n == 0 {
        return Err(Error::InvalidParams("depth n must be >= 1".into()));
    }
    if !xi.is_finite() {
        return Err(Error::Domain { op: "chain_jet", value: xi });
    }
    let one_minus = Complex64::new(1.0, -xi);
    let inv = one_minus.inv();
    let mut u = first_level(xi);
    let mut d1 = Complex64::new(0.0, -1.0) * inv;
    let mut d2 = inv * inv;
    for level in 1..n as usize {
        let w = Complex64::new(1.0 + u.re, u.im);
        if !(w.re > 0.0) {
            return Err(Error::BranchViolation { level, xi, re: w.re });
        }
        let q = d1 / w;
        d2 = d2 / w - q * q;
        d1 = q;
        u = ln_1p_complex(u);
    }
    Ok(SymbolJet { value: u, d1, d2 })
}

#[inline]
fn chain_value(n: u32, xi: f64) -> Complex64 {
    let mut u = first_level(xi);
    for _ in 1..n {
        u = ln_1p_complex(u);
    }
    u
}

/// Jet of `F(y) = s_n(y)^eps` in `y > 0` (or `y >= 0` when `eps = 1`).
#[inline]
fn power_tower_jet(n: u32, eps: f64, y: f64) -> (f64, f64, f64) {
    let s = s_raw(n, y);
    let s1 = ds_raw(n, y);
    let s2 = d2s_raw(n, y);
    if eps == 1.0 {
        return (s, s1, s2);
    }
    let p = s.powf(eps);
    let pm1 = p / s;
    let pm2 = pm1 / s;
    (p, eps * pm1 * s1, eps * (eps - 1.0) * pm2 * s1 * s1 + eps * pm1 * s2)
}

/// Lower bound data for `-psi''` of the Bernstein function `psi = s_n^eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDerivativeBound {
    /// `-psi''(xi)` computed analytically.
    pub neg_d2: f64,
    /// `B_0(xi) = s_n'(xi) (1 + xi)^{-1}`.
    pub b0: f64,
    /// Certified lower bound: `B_0` for `eps = 1`, `eps s_{n-1}^{eps-1} B_0`
    /// otherwise (with `s_0(xi) = xi`).
    pub certified: f64,
}

/// `-psi''` of `psi = s_n^eps` together with its certified lower bound.
///
/// For `eps = 1`, `-s_n'' = sum_{k=0}^{n-1} B_k` with
/// `B_k = s_n' s_{k+1}'`, so `-s_n'' >= B_0` and the inequality is strict for
/// `n >= 2`.
pub fn second_derivative_lower(params: IterLogParams, xi: f64) -> Result<SecondDerivativeBound> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::Domain { op: "second_derivative_lower", value: xi });
    }
    let n = params.n;
    let eps = params.eps;
    let b0 = ds_raw(n, xi) / (1.0 + xi);
    let (_, _, d2) = power_tower_jet(n, eps, xi);
    let certified = if eps == 1.0 { b0 } else { eps * s_raw(n - 1, xi).powf(eps - 1.0) * b0 };
    Ok(SecondDerivativeBound { neg_d2: -d2, b0, certified })
}

impl LevySymbol {
    pub fn new(kind: SymbolKind, n: u32, eps: f64) -> Result<Self> {
        Ok(Self { params: IterLogParams::new(n, eps)?, kind })
    }

    pub fn chain(n: u32, eps: f64) -> Result<Self> {
        Self::new(SymbolKind::SubordinatorChain, n, eps)
    }

    pub fn symmetric_iterlog(n: u32, eps: f64) -> Result<Self> {
        Self::new(SymbolKind::SymmetricIterLog, n, eps)
    }

    pub fn subordinated_square(n: u32, eps: f64) -> Result<Self> {
        Self::new(SymbolKind::SubordinatedSquare, n, eps)
    }

    /// True iff `eta` is real and even.
    pub fn symmetric(&self) -> bool {
        !matches!(self.kind, SymbolKind::SubordinatorChain)
    }

    /// True iff the law is carried by `[0, inf)`.
    pub fn is_subordinator(&self) -> bool {
        matches!(self.kind, SymbolKind::SubordinatorChain)
    }

    /// Complex value `eta(xi)`; total on finite `xi`.
    #[inline]
    pub fn value(&self, xi: f64) -> Complex64 {
        let IterLogParams { n, eps } = self.params;
        match self.kind {
            SymbolKind::SubordinatorChain => {
                if xi == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                principal_pow(chain_value(n, xi), eps)
            }
            SymbolKind::SymmetricIterLog => pow_real(s_raw(n, xi.abs()), eps).into(),
            SymbolKind::SubordinatedSquare => pow_real(s_raw(n, xi * xi), eps).into(),
        }
    }

    /// Value with first and second derivatives.
    ///
    /// Fails with [`Error::Singularity`] where a derivative does not exist:
    /// at `xi = 0` for `eps < 1` and for the `|xi|`-kink of
    /// `SymmetricIterLog`.
    pub fn eta(&self, xi: f64) -> Result<SymbolJet> {
        if !xi.is_finite() {
            return Err(Error::Domain { op: "eta", value: xi });
        }
        let IterLogParams { n, eps } = self.params;
        match self.kind {
            SymbolKind::SubordinatorChain => {
                let j = chain_jet(n, xi)?;
                if eps == 1.0 {
                    return Ok(j);
                }
                if xi == 0.0 {
                    return Err(Error::Singularity { xi });
                }
                let value = principal_pow(j.value, eps);
                let q = j.d1 / j.value;
                let d1 = value * q * eps;
                let d2 = value * eps * (q * q * (eps - 1.0) + j.d2 / j.value);
                Ok(SymbolJet { value, d1, d2 })
            }
            SymbolKind::SymmetricIterLog => {
                if xi == 0.0 {
                    return Err(Error::Singularity { xi });
                }
                let (v, d1, d2) = power_tower_jet(n, eps, xi.abs());
                Ok(SymbolJet::real(v, d1 * xi.signum(), d2))
            }
            SymbolKind::SubordinatedSquare => {
                if xi == 0.0 && eps < 1.0 {
                    return Err(Error::Singularity { xi });
                }
                let (v, f1, f2) = power_tower_jet(n, eps, xi * xi);
                Ok(SymbolJet::real(v, 2.0 * xi * f1, 4.0 * xi * xi * f2 + 2.0 * f1))
            }
        }
    }

    /// `(eta_1, eta_2) = (Re eta, -Im eta)`; `eta_2` is odd and vanishes for
    /// symmetric kinds.
    pub fn eta_parts(&self, xi: f64) -> (f64, f64) {
        let v = self.value(xi);
        (v.re, -v.im + 0.0)
    }

    /// Characteristic function `exp(-t eta(xi))`.
    #[inline]
    pub fn char_fn(&self, t: f64, xi: f64) -> Complex64 {
        (-t * self.value(xi)).exp()
    }

    /// `phi = exp(-t eta)` with `phi' = -t eta' phi` and
    /// `phi'' = (t^2 eta'^2 - t eta'') phi`.
    pub fn char_fn_jet(&self, t: f64, xi: f64) -> Result<[Complex64; 3]> {
        let j = self.eta(xi)?;
        let phi = (-t * j.value).exp();
        let d1 = -t * j.d1 * phi;
        let d2 = (t * t * j.d1 * j.d1 - t * j.d2) * phi;
        Ok([phi, d1, d2])
    }
}

#[inline]
fn pow_real(s: f64, eps: f64) -> f64 {
    if eps == 1.0 {
        s
    } else {
        s.powf(eps)
    }
}

impl fmt::Display for LevySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:n={},eps={:?}", self.kind.tag(), self.params.n, self.params.eps)
    }
}

impl FromStr for LevySymbol {
    type Err = Error;

    /// Parses `"chain:n=2,eps=1.0"`, `"sym:n=2,eps=0.5"` or `"sq:n=1,eps=1.0"`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse { spec: spec.to_string(), reason: reason.to_string() };
        let (kind, rest) = spec.trim().split_once(':').ok_or_else(|| bad("expected <kind>:n=<n>,eps=<eps>"))?;
        let kind = match kind.trim() {
            "chain" => SymbolKind::SubordinatorChain,
            "sym" => SymbolKind::SymmetricIterLog,
            "sq" => SymbolKind::SubordinatedSquare,
            other => return Err(bad(&format!("unknown kind {other:?} (expected chain, sym or sq)"))),
        };
        let mut n = None;
        let mut eps = None;
        for part in rest.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value pairs"))?;
            match k.trim() {
                "n" => n = Some(v.trim().parse::<u32>().map_err(|e| bad(&e.to_string()))?),
                "eps" => eps = Some(v.trim().parse::<f64>().map_err(|e| bad(&e.to_string()))?),
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        let n = n.ok_or_else(|| bad("missing n"))?;
        let eps = eps.ok_or_else(|| bad("missing eps"))?;
        LevySymbol::new(kind, n, eps)
    }
}

#[cfg(test)]
// frozen high-precision oracle values
#[allow(clippy::approx_constant, clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::quad::{adaptive, AdaptiveOptions, GaussLegendre};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, LN_2};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    fn all_symbols() -> Vec<LevySymbol> {
        let mut v = Vec::new();
        for kind in [SymbolKind::SubordinatorChain, SymbolKind::SymmetricIterLog, SymbolKind::SubordinatedSquare] {
            for n in 1..=3 {
                for eps in [0.5, 0.7, 1.0] {
                    v.push(LevySymbol::new(kind, n, eps).unwrap());
                }
            }
        }
        v
    }

    #[test]
    fn chain_jet_at_zero() {
        let j = chain_jet(1, 0.0).unwrap();
        assert_eq!(j.value, Complex64::new(0.0, 0.0));
        assert!(close(j.d1, Complex64::new(0.0, -1.0), 1e-15));
        // ln(1 - i xi) = -i xi + xi^2 / 2 + O(xi^3)
        assert!(close(j.d2, Complex64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn chain_jet_values() {
        // high-precision principal logs
        let u1 = Complex64::new(0.34657359027997264, -0.7853981633974483);
        assert!(close(chain_jet(1, 1.0).unwrap().value, u1, 1e-15));
        let u2 = Complex64::new(0.44396840780909732, -0.52801732186091321);
        let j2 = chain_jet(2, 1.0).unwrap();
        assert!(close(j2.value, u2, 1e-15));
        assert!(close(j2.d1, Complex64::new(0.43865733064901261, -0.11546293442091926), 1e-13));
        assert!(close(j2.d2, Complex64::new(-0.34068576262107436, 0.37835745773893081), 1e-13));
    }

    #[test]
    fn eta_examples() {
        let c = LevySymbol::chain(1, 1.0).unwrap();
        let (e1, e2) = c.eta_parts(1.0);
        assert!((e1 - 0.5 * LN_2).abs() < 1e-15);
        assert!((e2 - FRAC_PI_4).abs() < 1e-15);
        assert!((e1 - 0.3465736).abs() < 1e-7 && (e2 - 0.7853982).abs() < 1e-7);
        assert_eq!(c.eta_parts(0.0), (0.0, 0.0));

        let s = LevySymbol::symmetric_iterlog(1, 1.0).unwrap();
        assert!((s.value(-3.0).re - 4f64.ln()).abs() < 1e-15);
        assert_eq!(s.eta_parts(2.5).1, 0.0);

        let c2 = LevySymbol::chain(2, 0.5).unwrap();
        assert_eq!(c2.value(0.0), Complex64::new(0.0, 0.0));
        assert!(matches!(c2.eta(0.0), Err(Error::Singularity { .. })));
    }

    /// The modulus/argument expansion of `(ln(1 + eta^n))^eps` in terms of
    /// `eta^n_1`, `eta^n_2`, used as an independent oracle.
    fn expanded_chain_parts(n: u32, eps: f64, xi: f64) -> (f64, f64) {
        let mut e1 = 0.5 * (1.0 + xi * xi).ln();
        let mut e2 = xi.atan();
        if n == 1 {
            let m = (e1 * e1 + e2 * e2).powf(0.5 * eps);
            let a = eps * (e2 / e1).atan();
            return if eps == 1.0 { (e1, e2) } else { (m * a.cos(), m * a.sin()) };
        }
        for _ in 1..n - 1 {
            let l = 0.5 * ((1.0 + e1).powi(2) + e2 * e2).ln();
            let a = (e2 / (1.0 + e1)).atan();
            e1 = l;
            e2 = a;
        }
        let l = 0.5 * ((1.0 + e1).powi(2) + e2 * e2).ln();
        let a = (e2 / (1.0 + e1)).atan();
        let m = (l * l + a * a).powf(0.5 * eps);
        let ang = eps * (a / l).atan();
        (m * ang.cos(), m * ang.sin())
    }

    #[test]
    fn fractional_power_matches_expanded_formulas() {
        for n in 1..=4 {
            for eps in [0.3, 0.5, 0.9, 1.0] {
                let sym = LevySymbol::chain(n, eps).unwrap();
                for &xi in &[0.01, 0.5, 1.0, 3.0, 100.0, 1e5] {
                    let (a1, a2) = sym.eta_parts(xi);
                    let (b1, b2) = expanded_chain_parts(n, eps, xi);
                    assert!((a1 - b1).abs() < 1e-12 * b1.abs().max(1e-3), "n={n} eps={eps} xi={xi}");
                    assert!((a2 - b2).abs() < 1e-12 * b2.abs().max(1e-3), "n={n} eps={eps} xi={xi}");
                }
            }
        }
    }

    #[test]
    fn second_derivative_lower_examples() {
        let p1 = IterLogParams::new(1, 1.0).unwrap();
        for &xi in &[0.1, 1.0, 10.0] {
            let b = second_derivative_lower(p1, xi).unwrap();
            let exact = (1.0 + xi).powi(-2);
            assert!((b.neg_d2 - exact).abs() < 1e-15);
            assert!((b.b0 - exact).abs() < 1e-15);
        }
        let p2 = IterLogParams::new(2, 1.0).unwrap();
        let b = second_derivative_lower(p2, 1.0).unwrap();
        // A_1 = ((1 + ln 2) 2)^{-1}, B_0 = A_1 / 2, B_1 = A_1^2
        let a1 = 1.0 / ((1.0 + LN_2) * 2.0);
        assert!((b.b0 - 0.14765402728741031).abs() < 1e-15);
        assert!((b.neg_d2 - (a1 * 0.5 + a1 * a1)).abs() < 1e-15);
        assert!(b.neg_d2 > b.b0);

        let p3 = IterLogParams::new(3, 1.0).unwrap();
        let h = 1e-4;
        let fd = -(ds_raw(3, 10.0 + h) - ds_raw(3, 10.0 - h)) / (2.0 * h);
        let b = second_derivative_lower(p3, 10.0).unwrap();
        assert!((b.neg_d2 - fd).abs() < 1e-6 * fd);
        assert!(second_derivative_lower(p3, 0.0).is_err());
    }

    #[test]
    fn gamma_characteristic_function() {
        // E exp(i xi G) for G ~ Gamma(2, 1), by direct quadrature of the density
        let sym = LevySymbol::chain(1, 1.0).unwrap();
        let rule = GaussLegendre::new(16);
        let o = AdaptiveOptions { tol_abs: 1e-13, tol_rel: 1e-13, max_depth: 40 };
        for &xi in &[0.3, 1.0, 4.0] {
            let re = adaptive(&rule, |x: f64| (xi * x).cos() * x * (-x).exp(), 0.0, 80.0, o).value;
            let im = adaptive(&rule, |x: f64| (xi * x).sin() * x * (-x).exp(), 0.0, 80.0, o).value;
            let cf = sym.char_fn(2.0, xi);
            assert!(close(cf, Complex64::new(re, im), 1e-11), "xi={xi}");
            assert!(close(cf, Complex64::new(1.0, -xi).powi(-2), 1e-14));
        }
    }

    #[test]
    fn parse_and_display() {
        let s: LevySymbol = "chain:n=2,eps=1.0".parse().unwrap();
        assert_eq!(s, LevySymbol::chain(2, 1.0).unwrap());
        assert_eq!(s.to_string(), "chain:n=2,eps=1.0");
        let s: LevySymbol = "sym:n=2,eps=0.5".parse().unwrap();
        assert!(s.symmetric());
        let s: LevySymbol = "sq:n=1,eps=1.0".parse().unwrap();
        assert_eq!(s.kind, SymbolKind::SubordinatedSquare);
        assert!("foo:n=1,eps=1".parse::<LevySymbol>().is_err());
        assert!("chain:n=0,eps=1".parse::<LevySymbol>().is_err());
        assert!("chain:n=1".parse::<LevySymbol>().is_err());
        assert!("chain:n=1,eps=2".parse::<LevySymbol>().is_err());
    }

    #[test]
    fn jets_match_finite_differences() {
        let grid: Vec<f64> = (0..200).map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / 199.0)).collect();
        for sym in all_symbols() {
            for &xi in &grid {
                let j = sym.eta(xi).unwrap();
                let h = xi * 1e-6 + 1e-9;
                let fd1 = (sym.value(xi + h) - sym.value(xi - h)) / (2.0 * h);
                let fd2 = (sym.eta(xi + h).unwrap().d1 - sym.eta(xi - h).unwrap().d1) / (2.0 * h);
                let e1 = (fd1 - j.d1).norm() / j.d1.norm();
                let e2 = (fd2 - j.d2).norm() / j.d2.norm().max(j.d1.norm() / xi);
                assert!(e1 < 1e-6, "{sym} xi={xi} d1 err {e1}");
                assert!(e2 < 1e-6, "{sym} xi={xi} d2 err {e2}");
            }
        }
    }

    proptest! {
        #[test]
        fn hermitian_symmetry(idx in 0usize..27, xi in -1e6f64..1e6) {
            let sym = all_symbols()[idx];
            let a = sym.value(-xi);
            let b = sym.value(xi).conj();
            prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
            if sym.symmetric() {
                prop_assert_eq!(sym.value(xi).im, 0.0);
            }
            let (e1, e2) = sym.eta_parts(xi);
            let (f1, f2) = sym.eta_parts(-xi);
            prop_assert!(e1 >= 0.0);
            prop_assert!((e2 + f2).abs() <= 1e-14 * e2.abs().max(1e-300));
            prop_assert!((e1 - f1).abs() <= 1e-14 * e1.max(1e-300));
        }

        #[test]
        fn branch_stays_in_right_half_plane(n in 1u32..8, xi in -1e12f64..1e12) {
            prop_assert!(chain_jet(n, xi).is_ok());
        }

        #[test]
        fn n1_chain_real_part_closed_form(xi in -1e4f64..1e4) {
            let sym = LevySymbol::chain(1, 1.0).unwrap();
            let e1 = sym.eta_parts(xi).0;
            let exact = 0.5 * (xi * xi).ln_1p();
            prop_assert!((e1 - exact).abs() <= 1e-15 * exact.max(1e-300));
        }
    }
}
