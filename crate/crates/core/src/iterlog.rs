//! Iterated-logarithm tower `s_n`, its running product `r_n`, and their
//! derivatives.
//!
//! `s_1(x) = ln(1 + x)`, `s_k(x) = ln(1 + s_{k-1}(x))`, `r_n = s_n s_{n-1} .. s_1`.
//! Every level is evaluated with `ln_1p`, so `s_n(x)` keeps full relative
//! precision for arguments far below machine epsilon. All functions take
//! `x = |xi| >= 0`; callers fold the sign.
//!
//! The `*_raw` variants skip argument validation and are used on hot paths.
//! They extend the tower downward with `s_0(x) = x` and `r_0 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depth `n` and exponent `eps` of one member of the symbol family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterLogParams {
    pub n: u32,
    pub eps: f64,
}

impl IterLogParams {
    pub fn new(n: u32, eps: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParams(format!("depth n must be >= 1, got {n}")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParams(format!("exponent eps must lie in (0, 1], got {eps}")));
        }
        Ok(Self { n, eps })
    }

    pub fn is_linear(&self) -> bool {
        self.eps == 1.0
    }
}

fn check_nonneg(op: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { op, value: x })
    }
}

fn check_pos(op: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { op, value: x })
    }
}

fn check_depth(n: u32) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParams("depth n must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `s_n(x)`, with `s_0(x) = x`.
#[inline]
pub fn s_raw(n: u32, x: f64) -> f64 {
    let mut v = x;
    for _ in 0..n {
        v = v.ln_1p();
    }
    v
}

/// `r_n(x) = s_n(x) .. s_1(x)`, with `r_0 = 1`.
#[inline]
pub fn r_raw(n: u32, x: f64) -> f64 {
    let mut v = x;
    let mut prod = 1.0;
    for _ in 0..n {
        v = v.ln_1p();
        prod *= v;
    }
    prod
}

/// `s_n'(x) = prod_{k=1}^{n-1} (1 + s_k)^{-1} (1 + x)^{-1}`; `s_0' = 1`.
#[inline]
pub fn ds_raw(n: u32, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut v = x;
    let mut d = 1.0 / (1.0 + x);
    for _ in 1..n {
        v = v.ln_1p();
        d /= 1.0 + v;
    }
    d
}

/// `s_n''(x) = -s_n'(x) * sum_{k=1}^{n} s_k'(x)`.
///
/// Follows from `s_{k+1}' = s_k' / (1 + s_k)` and `s_1' = 1 / (1 + x)`.
#[inline]
pub fn d2s_raw(n: u32, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = x;
    let mut d = 1.0 / (1.0 + x);
    let mut sum = d;
    for _ in 1..n {
        v = v.ln_1p();
        d /= 1.0 + v;
        sum += d;
    }
    -d * sum
}

/// `r_n'(x)` via the product rule `r_k' = r_{k-1}' s_k + r_{k-1} s_k'`.
///
/// Algebraically identical to `sum_k t_k(x) s_k'(x)` with `t_k = r_n / s_k`,
/// without dividing by `s_k`.
#[inline]
pub fn dr_raw(n: u32, x: f64) -> f64 {
    let mut v = x;
    let mut ds = 1.0 / (1.0 + x);
    let mut r = 1.0;
    let mut dr = 0.0;
    for k in 1..=n {
        if k > 1 {
            ds /= 1.0 + v;
        }
        v = v.ln_1p();
        dr = dr * v + r * ds;
        r *= v;
    }
    dr
}

/// Iterated logarithm `s_n(x)` for `x >= 0`.
pub fn s(n: u32, x: f64) -> Result<f64> {
    check_depth(n)?;
    check_nonneg("s", x)?;
    Ok(s_raw(n, x))
}

/// Product `r_n(x) = s_n(x) s_{n-1}(x) .. s_1(x)`. Returns 0 at `x = 0`.
pub fn r(n: u32, x: f64) -> Result<f64> {
    check_depth(n)?;
    check_nonneg("r", x)?;
    Ok(r_raw(n, x))
}

/// First derivative of `s_n`. The closed form is valid at `x = 0` as well.
pub fn ds(n: u32, x: f64) -> Result<f64> {
    check_depth(n)?;
    check_nonneg("ds", x)?;
    Ok(ds_raw(n, x))
}

/// Second derivative of `s_n` (strictly negative).
pub fn d2s(n: u32, x: f64) -> Result<f64> {
    check_depth(n)?;
    check_nonneg("d2s", x)?;
    Ok(d2s_raw(n, x))
}

/// First derivative of `r_n` for `x > 0`.
pub fn dr(n: u32, x: f64) -> Result<f64> {
    check_depth(n)?;
    check_pos("dr", x)?;
    Ok(dr_raw(n, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    // Richardson-extrapolated central difference; independent of the
    // analytic derivative formulas.
    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-3 * x;
        let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn s_examples() {
        assert_eq!(s(1, 0.0).unwrap(), 0.0);
        assert!((s(1, E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((s(2, E - 1.0).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn r_examples() {
        assert!((r(1, E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((r(2, E - 1.0).unwrap() - LN_2).abs() < 1e-15);
        // 40-digit product ln(101) ln(1 + ln 101) ln(1 + ln(1 + ln 101))
        assert!(rel(r(3, 100.0).unwrap(), 7.984229617092497) < 1e-14);
        assert_eq!(r(4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ds_examples() {
        assert_eq!(ds(1, 0.0).unwrap(), 1.0);
        assert!(rel(ds(2, E - 1.0).unwrap(), 1.0 / (2.0 * E)) < 1e-15);
        let fdv = fd(|x| s_raw(3, x), 10.0);
        assert!(rel(ds(3, 10.0).unwrap(), fdv) < 1e-8);
    }

    #[test]
    fn dr_examples() {
        for &x in &[0.3, 1.0, 7.0] {
            assert!(rel(dr(1, x).unwrap(), 1.0 / (1.0 + x)) < 1e-15);
        }
        assert!(rel(dr(2, E - 1.0).unwrap(), fd(|x| r_raw(2, x), E - 1.0)) < 1e-8);
        assert!(rel(dr(3, 1000.0).unwrap(), fd(|x| r_raw(3, x), 1000.0)) < 1e-8);
    }

    #[test]
    fn dr_matches_quotient_form() {
        // sum_k t_k s_k' with t_k = r_n / s_k
        for n in 1..=5 {
            for &x in &[0.01, 1.0, 50.0, 1e5] {
                let rn = r_raw(n, x);
                let q: f64 = (1..=n).map(|k| rn / s_raw(k, x) * ds_raw(k, x)).sum();
                assert!(rel(dr_raw(n, x), q) < 1e-13, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(s(1, -1.0), Err(Error::Domain { .. })));
        assert!(matches!(s(2, f64::NAN), Err(Error::Domain { .. })));
        assert!(matches!(r(2, f64::INFINITY), Err(Error::Domain { .. })));
        assert!(matches!(ds(2, -1e-300), Err(Error::Domain { .. })));
        assert!(matches!(dr(2, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(s(0, 1.0), Err(Error::InvalidParams(_))));
        assert!(IterLogParams::new(2, 0.0).is_err());
        assert!(IterLogParams::new(2, 1.5).is_err());
        assert!(IterLogParams::new(0, 0.5).is_err());
        assert!(IterLogParams::new(1, 1.0).is_ok());
    }

    #[test]
    fn precision_near_zero() {
        let x = 1e-12;
        // s_1(x) - x = -x^2/2 + O(x^3)
        let err = s(1, x).unwrap() - x;
        assert!((err + x * x / 2.0).abs() <= 2.0 * f64::EPSILON * x);
        // deeper levels keep the leading behaviour s_n(x) ~ x
        assert!(rel(s(4, x).unwrap(), x) < 1e-11);
        assert!(rel(s(3, 1e-300).unwrap(), 1e-300) < 1e-15);
    }

    #[test]
    fn second_derivative_matches_fd() {
        for n in 1..=4 {
            for &x in &[1e-3, 0.5, 10.0, 1e4] {
                let fdv = fd(|y| ds_raw(n, y), x);
                assert!(rel(d2s_raw(n, x), fdv) < 1e-7, "n={n} x={x}");
            }
        }
    }

    proptest! {
        #[test]
        fn recursion_shift(n in 2u32..6, x in 0.0f64..1e8) {
            let lhs = s_raw(n, x);
            let rhs = s_raw(n - 1, x.ln_1p());
            prop_assert!((lhs - rhs).abs() <= 1e-15 * lhs.max(1e-300));
        }

        #[test]
        fn product_shift(n in 3u32..7, x in 1e-6f64..1e8) {
            let l = x.ln_1p();
            let lhs = l * r_raw(n - 2, l);
            let rhs = r_raw(n - 1, x);
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs);
        }

        #[test]
        fn monotone(n in 1u32..6, x in 0.0f64..1e6, dx in 1e-6f64..1e3) {
            prop_assert!(s_raw(n, x + dx) >= s_raw(n, x));
            prop_assert!(r_raw(n, x + dx) >= r_raw(n, x));
            prop_assert!(ds_raw(n, x + dx) < ds_raw(n, x));
        }

        #[test]
        fn derivatives_match_fd(n in 1u32..6, lx in -6.0f64..6.0) {
            let x = 10f64.powf(lx);
            prop_assert!(rel(ds_raw(n, x), fd(|y| s_raw(n, y), x)) < 1e-7);
            prop_assert!(rel(dr_raw(n, x), fd(|y| r_raw(n, y), x)) < 1e-7);
        }
    }
}
