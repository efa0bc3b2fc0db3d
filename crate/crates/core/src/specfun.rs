//! Special functions and small numerical primitives used across the crate:
//! real Lambert W branches, the overflow-free scaled integral `G(p)`,
//! adaptive Gauss–Kronrod quadrature and central finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WBranch {
    /// `W₀` on `[-1/e, ∞)`, values `≥ -1`.
    Principal,
    /// `W₋₁` on `[-1/e, 0)`, values `≤ -1`.
    Lower,
}

const HALLEY_MAX_ITER: usize = 64;

/// Real Lambert W: the `w` on the requested branch with `w·eʷ = x`.
///
/// Arguments within a few ulps below `-1/e` are treated as the branch point
/// itself, so callers that form `-1/e` through rounded arithmetic still land on
/// `w = -1`.
pub fn lambert_w<T: Real>(branch: WBranch, x: T) -> Result<T> {
    let domain = |what| Error::Domain {
        what,
        value: x.as_f64(),
    };
    if x.is_nan() {
        return Err(domain("lambert_w"));
    }
    let e = T::E();
    let inv_e = e.recip();
    // distance from the branch point, measured in units of 1/e
    let ed = e * x + T::one();
    let slack = T::lit(8.0) * T::epsilon();
    if ed < -slack {
        return Err(domain("lambert_w below -1/e"));
    }
    if branch == WBranch::Lower && x >= T::zero() {
        return Err(domain("lambert_w lower branch requires x < 0"));
    }
    if ed <= slack || x == -inv_e {
        return Ok(-T::one());
    }
    if branch == WBranch::Principal && x == T::zero() {
        return Ok(T::zero());
    }
    if x.is_infinite() {
        return Err(domain("lambert_w of infinity"));
    }

    let mut w = initial_guess(branch, x, ed);
    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + T::one();
        if wp1 == T::zero() {
            break;
        }
        let two = T::lit(2.0);
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        if denom == T::zero() || !denom.is_finite() {
            break;
        }
        let dw = f / denom;
        w = w - dw;
        if dw.abs() <= T::lit(4.0) * T::epsilon() * (T::one() + w.abs()) {
            return Ok(w);
        }
    }
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            what: "lambert_w",
            iterations: HALLEY_MAX_ITER,
        })
    }
}

fn initial_guess<T: Real>(branch: WBranch, x: T, ed: T) -> T {
    let one = T::one();
    if ed < T::lit(0.5) {
        // series about the branch point in q = ±sqrt(2(ex+1))
        let q = (T::lit(2.0) * ed).sqrt();
        let q = if branch == WBranch::Lower { -q } else { q };
        return -one
            + q * (one
                + q * (T::lit(-1.0 / 3.0)
                    + q * (T::lit(11.0 / 72.0) + q * T::lit(-43.0 / 540.0))));
    }
    match branch {
        WBranch::Principal => {
            if x < T::lit(3.0) {
                let l = x.ln_1p();
                l * (one - (one + l).ln() / (T::lit(2.0) + l))
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        WBranch::Lower => {
            let l1 = (-x).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    }
}

/// Scaled growth integral `G(p) = e^{-4p^{3/2}/3} ∫₀ᵖ e^{4s^{3/2}/3} ds`.
///
/// `G` solves `G' = 1 - 2√p·G` with `G(0) = 0`. It is evaluated through the
/// Kummer-transformed series `G(p) = p·Σₙ Pois(n; z)·(2/3)/(n + 2/3)` with
/// `z = 4p^{3/2}/3`. The Poisson weights are summed outward from the mode and
/// normalized by their own sum, so no exponential of `z` is ever formed and all
/// terms are positive.
pub fn scaled_g<T: Real>(p: T, tol: T) -> Result<T> {
    if !(p >= T::zero()) || !p.is_finite() {
        return Err(Error::Domain {
            what: "scaled_g",
            value: p.as_f64(),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::Invalid(format!(
            "scaled_g tolerance must be positive, got {tol}"
        )));
    }
    if p == T::zero() {
        return Ok(T::zero());
    }
    let tol = tol.max(T::epsilon());
    let z = T::lit(4.0 / 3.0) * p * p.sqrt();
    let two_thirds = T::lit(2.0 / 3.0);
    let weight_fn = |n: usize| two_thirds / (T::from_usize_lossy(n) + two_thirds);

    let mode = z.floor().to_usize().unwrap_or(0);
    let mut sum = T::one();
    let mut acc = weight_fn(mode);
    let cutoff = tol * T::lit(1e-2);

    // upward from the mode
    let mut w = T::one();
    let mut n = mode;
    loop {
        let ratio = z / T::from_usize_lossy(n + 1);
        w = w * ratio;
        n += 1;
        sum = sum + w;
        acc = acc + w * weight_fn(n);
        if ratio < T::one() && w / (T::one() - ratio) < cutoff * sum {
            break;
        }
        if n > mode + 100_000 {
            return Err(Error::NoConvergence {
                what: "scaled_g",
                iterations: n - mode,
            });
        }
    }
    // downward from the mode
    let mut w = T::one();
    let mut n = mode;
    while n > 0 {
        let ratio = T::from_usize_lossy(n) / z;
        w = w * ratio;
        n -= 1;
        sum = sum + w;
        acc = acc + w * weight_fn(n);
        if w / (T::one() - ratio) < cutoff * sum {
            break;
        }
    }
    Ok(p * acc / sum)
}

/// Gamma function via the Lanczos approximation (g = 7, nine terms).
pub fn gamma<T: Real>(x: T) -> T {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::lit(0.5);
    if x < half {
        // reflection
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut a = T::lit(COEF[0]);
    let t = x + T::lit(G) + half;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a = a + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    (T::lit(2.0) * T::PI()).sqrt() * t.powf(x + half) * (-t).exp() * a
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Subdivision budget for [`quad`].
pub const QUAD_MAX_PANELS: usize = 2000;

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = f(c);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// `b` may be `+∞`, in which case the integral is mapped onto `[0, 1)` with
/// `p = a + u/(1-u)`. Converges when the estimated error is at most
/// `max(tol, tol·|I|)`.
pub fn quad<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> Result<T> {
    if b.is_infinite() {
        if b < T::zero() {
            return Err(Error::Invalid(
                "quad: lower-infinite intervals are not supported".into(),
            ));
        }
        let one = T::one();
        let mut g = |u: T| {
            let om = one - u;
            let x = a + u / om;
            let v = f(x);
            if v == T::zero() {
                T::zero()
            } else {
                v / (om * om)
            }
        };
        return quad_finite(&mut g, T::zero(), one, tol);
    }
    quad_finite(&mut f, a, b, tol)
}

fn quad_finite<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (r, e) = gk15(f, a, b);
    let mut panels = vec![(a, b, r, e)];
    loop {
        let total: T = panels.iter().fold(T::zero(), |s, p| s + p.2);
        let err: T = panels.iter().fold(T::zero(), |s, p| s + p.3);
        if err <= tol.max(tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= QUAD_MAX_PANELS {
            return Err(Error::NoConvergence {
                what: "quad",
                iterations: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .3
                    .partial_cmp(&y.1 .3)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::NoConvergence {
                what: "quad (panel below resolution)",
                iterations: panels.len(),
            });
        }
        let (r1, e1) = gk15(f, lo, mid);
        let (r2, e2) = gk15(f, mid, hi);
        panels.push((lo, mid, r1, e1));
        panels.push((mid, hi, r2, e2));
    }
}

/// Derivative order for [`fd_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivOrder {
    First,
    Second,
}

/// Central finite difference, `O(h²)`.
pub fn fd_derivative<T: Real, F: Fn(T) -> T>(f: F, p: T, order: DerivOrder, h: T) -> T {
    match order {
        DerivOrder::First => (f(p + h) - f(p - h)) / (T::lit(2.0) * h),
        DerivOrder::Second => (f(p + h) - T::lit(2.0) * f(p) + f(p - h)) / (h * h),
    }
}

/// One Richardson step on [`fd_derivative`], `O(h⁴)`.
pub fn fd_derivative_richardson<T: Real, F: Fn(T) -> T>(f: F, p: T, order: DerivOrder, h: T) -> T {
    let coarse = fd_derivative(&f, p, order, h);
    let fine = fd_derivative(&f, p, order, h * T::lit(0.5));
    (T::lit(4.0) * fine - coarse) / T::lit(3.0)
}

/// Second-order one-sided forward difference `(-3f₀ + 4f₁ - f₂)/(2h)`.
pub fn fd_forward_first<T: Real, F: Fn(T) -> T>(f: F, p: T, h: T) -> T {
    let two = T::lit(2.0);
    (-T::lit(3.0) * f(p) + T::lit(4.0) * f(p + h) - f(p + two * h)) / (two * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_special_points() {
        let inv_e = (-1.0f64).exp();
        assert_eq!(lambert_w(WBranch::Principal, 0.0).unwrap(), 0.0);
        assert_eq!(lambert_w(WBranch::Principal, -inv_e).unwrap(), -1.0);
        assert_eq!(lambert_w(WBranch::Lower, -inv_e).unwrap(), -1.0);
        assert!(
            (lambert_w(WBranch::Principal, 1.0f64).unwrap() - 0.567_143_290_409_783_8).abs()
                < 1e-15
        );
    }

    #[test]
    fn lambert_domain_errors() {
        assert!(lambert_w(WBranch::Principal, -0.5f64).is_err());
        assert!(lambert_w(WBranch::Lower, 0.0f64).is_err());
        assert!(lambert_w(WBranch::Lower, 0.1f64).is_err());
        assert!(lambert_w(WBranch::Lower, f64::NAN).is_err());
    }

    #[test]
    fn lambert_roundtrip_examples() {
        for &w in &[-2.0f64, -0.5, 0.3, 1.7] {
            let x = w * w.exp();
            let got = lambert_w(WBranch::Principal, x);
            if w >= -1.0 {
                assert!((got.unwrap() - w).abs() < 1e-12, "principal {w}");
            } else {
                // principal branch returns the other preimage
                let g = got.unwrap();
                assert!(g > -1.0);
                assert!((g * g.exp() - x).abs() < 1e-13 * x.abs());
                let lo = lambert_w(WBranch::Lower, x).unwrap();
                assert!((lo - w).abs() < 1e-12, "lower {w}: {lo}");
            }
        }
    }

    #[test]
    fn lambert_f32() {
        let w = lambert_w(WBranch::Lower, -0.2f32).unwrap();
        assert!((w * w.exp() + 0.2).abs() < 1e-6);
        assert!(w <= -1.0);
    }

    #[test]
    fn scaled_g_small_and_large() {
        assert_eq!(scaled_g(0.0f64, 1e-14).unwrap(), 0.0);
        let g = scaled_g(1e-8f64, 1e-15).unwrap();
        assert!((g - 1e-8).abs() < 1e-20);
        let g25 = scaled_g(25.0f64, 1e-14).unwrap();
        let asym = 0.1 * (1.0 + 1.0 / 250.0);
        assert!((g25 - asym).abs() < 0.01 * asym);
        assert!(scaled_g(-1.0f64, 1e-12).is_err());
        assert!(scaled_g(1.0f64, 0.0).is_err());
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(5.0f64) - 24.0).abs() < 1e-12);
        assert!((gamma(0.5f64) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((gamma(2.0f64 / 3.0) - 1.354_117_939_426_400_4).abs() < 1e-13);
    }

    #[test]
    fn quad_basics() {
        assert!((quad(|_| 1.0f64, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-14);
        let i = quad(|x: f64| (-x).exp(), 0.0, f64::INFINITY, 1e-12).unwrap();
        assert!((i - 1.0).abs() < 1e-11);
        let poly = quad(|x: f64| x.powi(5), -1.0, 2.0, 1e-13).unwrap();
        assert!((poly - (64.0 - 1.0) / 6.0).abs() < 1e-11);
    }

    #[test]
    fn quad_budget_exhaustion() {
        let r = quad(
            |x: f64| if x > 0.5 { 1.0 / (x - 0.5) } else { 0.0 },
            0.0,
            1.0,
            1e-14,
        );
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn fd_examples() {
        assert_eq!(fd_derivative(|_| 3.0f64, 1.3, DerivOrder::First, 1e-3), 0.0);
        assert!((fd_derivative(|p: f64| p * p, 3.0, DerivOrder::Second, 1e-3) - 2.0).abs() < 1e-6);
        assert!(
            (fd_derivative(|p: f64| p.sqrt(), 4.0, DerivOrder::First, 1e-4) - 0.25).abs() < 1e-8
        );
        assert!((fd_forward_first(|p: f64| p * p, 1.0, 1e-3) - 2.0).abs() < 1e-9);
    }
}
