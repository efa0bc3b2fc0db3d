//! One-parameter Riccati deformation of the `w₀ = √p` superpotential.
//!
//! Everything is evaluated in G-form: with `z = 4p^{3/2}/3` and the scaled
//! integral `G(p) = e^{-z}·g(p)` from [`crate::specfun::scaled_g`], the ratio
//! `r = κe^{z}/(1 + κg)` becomes `κ/(e^{-z} + κG)`, which never overflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::{fd_derivative_richardson, quad, scaled_g, DerivOrder};

fn check_kappa<T: Real>(kappa: T) -> Result<()> {
    if kappa >= T::zero() && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "kappa",
            value: kappa.as_f64(),
        })
    }
}

fn check_momentum<T: Real>(what: &'static str, p: T) -> Result<()> {
    if p > T::zero() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: p.as_f64(),
        })
    }
}

fn z_of<T: Real>(p: T) -> T {
    T::lit(4.0 / 3.0) * p * p.sqrt()
}

/// `r = κ/(e^{-z} + κG)`, the deformation part of `w_κ = √p − r`.
fn ratio<T: Real>(kappa: T, p: T) -> Result<T> {
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    let g = scaled_g(p, T::epsilon())?;
    Ok(T::one() / ((-z_of(p)).exp() / kappa + g))
}

/// Deformed superpotential `w_κ(p) = √p − κe^{4p^{3/2}/3}/(1 + κg(p))`.
pub fn superpotential_w<T: Real>(kappa: T, p: T) -> Result<T> {
    check_kappa(kappa)?;
    check_momentum("superpotential_w", p)?;
    Ok(p.sqrt() - ratio(kappa, p)?)
}

/// Analytic derivative `w_κ′ = 1/(2√p) + r² − 2√p·r`.
pub fn superpotential_w_prime<T: Real>(kappa: T, p: T) -> Result<T> {
    check_kappa(kappa)?;
    check_momentum("superpotential_w_prime", p)?;
    let r = ratio(kappa, p)?;
    let s = p.sqrt();
    Ok(T::lit(0.5) / s + r * r - T::lit(2.0) * s * r)
}

/// Square-integrable zero mode `φ₀(p, κ) = κe^{2p^{3/2}/3}/(1 + κg(p))`.
pub fn phi0<T: Real>(kappa: T, p: T) -> Result<T> {
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Err(Error::Degenerate(
            "the zero mode vanishes identically at kappa = 0",
        ));
    }
    if !(p >= T::zero()) || !p.is_finite() {
        return Err(Error::Domain {
            what: "phi0",
            value: p.as_f64(),
        });
    }
    if p == T::zero() {
        return Ok(kappa);
    }
    Ok(ratio(kappa, p)? * (-T::lit(0.5) * z_of(p)).exp())
}

/// `|κφ₀(0) + φ₀′(0)|` with `φ₀′(0)` from one-sided differences. The zero
/// mode has a `p^{3/2}` term, so the quotients at `h` and `4h` are combined to
/// cancel the `√h` error.
pub fn robin_residual<T: Real>(kappa: T) -> Result<T> {
    let f0 = phi0(kappa, T::zero())?;
    let h = T::epsilon().sqrt() * T::lit(0.5);
    let near = (phi0(kappa, h)? - f0) / h;
    let far = (phi0(kappa, T::lit(4.0) * h)? - f0) / (T::lit(4.0) * h);
    let slope = T::lit(2.0) * near - far;
    Ok((kappa * f0 + slope).abs())
}

/// Potential of the deformed partner, `U_κ = w_κ² + w_κ′
/// = p + 1/(2√p) − 4√p·r + 2r²`.
pub fn deformed_potential<T: Real>(kappa: T, p: T) -> Result<T> {
    check_kappa(kappa)?;
    check_momentum("deformed_potential", p)?;
    let r = ratio(kappa, p)?;
    let s = p.sqrt();
    Ok(p + T::lit(0.5) / s - T::lit(4.0) * s * r + T::lit(2.0) * r * r)
}

// d/dp of f at p, differenced in u = √p where every profile function is smooth.
fn d_dp<T: Real>(f: &dyn Fn(T) -> T, p: T, rel_step: T) -> T {
    let u = p.sqrt();
    let h = rel_step * u;
    let fu = |u: T| f(u * u);
    fd_derivative_richardson(fu, u, DerivOrder::First, h) / (T::lit(2.0) * u)
}

fn d2_dp2<T: Real>(f: &dyn Fn(T) -> T, p: T, rel_step: T) -> T {
    let u = p.sqrt();
    let h = rel_step * u;
    let fu = |u: T| f(u * u);
    let first = fd_derivative_richardson(fu, u, DerivOrder::First, h);
    let second = fd_derivative_richardson(fu, u, DerivOrder::Second, h);
    (second - first / u) / (T::lit(4.0) * u * u)
}

/// `|w_κ² − w_κ′ − (p − 1/(2√p))|` with `w_κ′` by finite differences.
pub fn riccati_residual<T: Real>(kappa: T, p: T) -> Result<T> {
    check_kappa(kappa)?;
    check_momentum("riccati_residual", p)?;
    let w = |q: T| superpotential_w(kappa, q).unwrap_or(T::nan());
    let w0 = w(p);
    let dw = d_dp(&w, p, T::lit(2e-3));
    let target = p - T::lit(0.5) / p.sqrt();
    Ok((w0 * w0 - dw - target).abs())
}

/// Residuals of the zero mode on `grid`, both scaled by `max|φ₀|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeResidual<T> {
    /// `max|φ₀′ − w_κφ₀|`
    pub first_order: T,
    /// `max|−φ₀″ + U_κφ₀|`
    pub second_order: T,
}

impl<T: Real> ZeroModeResidual<T> {
    pub fn max(&self) -> T {
        self.first_order.max(self.second_order)
    }
}

pub fn zero_mode_residual<T: Real>(kappa: T, grid: &[T]) -> Result<ZeroModeResidual<T>> {
    check_kappa(kappa)?;
    if kappa == T::zero() {
        return Err(Error::Degenerate(
            "the zero mode vanishes identically at kappa = 0",
        ));
    }
    if grid.is_empty() {
        return Err(Error::Invalid(
            "zero_mode_residual needs a nonempty grid".into(),
        ));
    }
    let phi = |q: T| phi0(kappa, q).unwrap_or(T::nan());
    let mut scale = T::zero();
    let mut first = T::zero();
    let mut second = T::zero();
    for &p in grid {
        check_momentum("zero_mode_residual", p)?;
        let f = phi0(kappa, p)?;
        scale = scale.max(f.abs());
        let w = superpotential_w(kappa, p)?;
        let u = deformed_potential(kappa, p)?;
        first = first.max((d_dp(&phi, p, T::lit(2e-3)) - w * f).abs());
        second = second.max((-d2_dp2(&phi, p, T::lit(1e-2)) + u * f).abs());
    }
    Ok(ZeroModeResidual {
        first_order: first / scale,
        second_order: second / scale,
    })
}

/// True when `∫₀^p w_κ` turns negative and keeps decreasing before `p_max`, so
/// `e^{-∫w_κ}` is not normalizable.
pub fn hminus_nonnormalizable_check<T: Real>(kappa: T, p_max: T) -> Result<bool> {
    check_kappa(kappa)?;
    if !(p_max >= T::lit(20.0)) || !p_max.is_finite() {
        return Err(Error::Domain {
            what: "hminus_nonnormalizable_check p_max",
            value: p_max.as_f64(),
        });
    }
    let n = 400;
    let tol = T::epsilon().sqrt() * T::lit(1e-4);
    let w = |s: T| {
        if s > T::zero() {
            superpotential_w(kappa, s).unwrap_or(T::nan())
        } else {
            -kappa
        }
    };
    let mut integral = T::zero();
    let mut onset = None;
    let mut prev = T::zero();
    for j in 1..=n {
        let p = p_max * T::from_usize_lossy(j) / T::from_usize_lossy(n);
        integral = integral + quad(&w, prev, p, tol)?;
        prev = p;
        let falling = integral < T::zero() && w(p) < T::zero();
        match (falling, onset) {
            (true, None) => onset = Some(j),
            (false, Some(_)) => onset = None,
            _ => {}
        }
    }
    Ok(matches!(onset, Some(j) if j < n))
}

/// Tabulated deformation data on a momentum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationProfile<T> {
    pub kappa: T,
    pub p: Vec<T>,
    pub w: Vec<T>,
    /// Identically zero at `κ = 0`.
    pub phi0: Vec<T>,
    pub potential: Vec<T>,
    pub riccati_max: T,
    pub zero_mode: Option<ZeroModeResidual<T>>,
}

impl<T: Real> DeformationProfile<T> {
    /// Samples on `grid`, which must lie in `(0, ∞)`.
    pub fn tabulate(kappa: T, grid: &[T]) -> Result<Self> {
        check_kappa(kappa)?;
        let mut w = Vec::with_capacity(grid.len());
        let mut phi = Vec::with_capacity(grid.len());
        let mut potential = Vec::with_capacity(grid.len());
        let mut riccati_max = T::zero();
        for &p in grid {
            w.push(superpotential_w(kappa, p)?);
            potential.push(deformed_potential(kappa, p)?);
            phi.push(if kappa > T::zero() {
                phi0(kappa, p)?
            } else {
                T::zero()
            });
            riccati_max = riccati_max.max(riccati_residual(kappa, p)?);
        }
        let zero_mode = if kappa > T::zero() && !grid.is_empty() {
            Some(zero_mode_residual(kappa, grid)?)
        } else {
            None
        };
        Ok(Self {
            kappa,
            p: grid.to_vec(),
            w,
            phi0: phi,
            potential,
            riccati_max,
            zero_mode,
        })
    }

    /// Uniform grid `p_max·j/n`, `j = 1..=n`.
    pub fn uniform(kappa: T, p_max: T, n: usize) -> Result<Self> {
        if n == 0 || !(p_max > T::zero()) {
            return Err(Error::Invalid(
                "profile grid needs n > 0 and p_max > 0".into(),
            ));
        }
        let grid: Vec<T> = (1..=n)
            .map(|j| p_max * T::from_usize_lossy(j) / T::from_usize_lossy(n))
            .collect();
        Self::tabulate(kappa, &grid)
    }
}
