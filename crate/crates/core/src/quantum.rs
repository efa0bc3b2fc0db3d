//! Momentum-space Schrödinger problems on the half line `p ≥ 0`:
//! `−ψ″ + U(p)ψ = Eψ` for `U = p ± 1/(2√p)` and for the deformed partner.
//!
//! Eigenvalues come from shooting: a Frobenius start just off the origin,
//! adaptive integration outward, and bisection on the sign of `ψ(p_max)`.
//! The eigenfunction itself is assembled from an outward solution up to a
//! point just past the last turning point and an inward solution from
//! `ψ(p_max) = 0`, which keeps the growing mode out of the tail.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::deformation::deformed_potential;
use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeOptions};
use crate::scalar::Real;

/// Boundary condition at `p = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition<T> {
    /// `ψ(0) = 0`
    Dirichlet,
    /// `ψ′(0) = 0`
    Neumann,
    /// `κψ(0) + ψ′(0) = 0`
    Robin { kappa: T },
}

impl<T: Real> BoundaryCondition<T> {
    /// `Robin(0)` collapses to `Neumann`.
    pub fn canonical(self) -> Self {
        match self {
            Self::Robin { kappa } if kappa == T::zero() => Self::Neumann,
            bc => bc,
        }
    }

    /// `(ψ(0), ψ′(0))` used to start the integration.
    pub fn initial_values(self) -> (T, T) {
        match self.canonical() {
            Self::Dirichlet => (T::zero(), T::one()),
            Self::Neumann => (T::one(), T::zero()),
            Self::Robin { kappa } => (T::one(), -kappa),
        }
    }

    /// Dirichlet and Neumann swap under the ladder operators.
    pub fn opposite(self) -> Option<Self> {
        match self.canonical() {
            Self::Dirichlet => Some(Self::Neumann),
            Self::Neumann => Some(Self::Dirichlet),
            Self::Robin { .. } => None,
        }
    }

    pub fn same_sector(self, other: Self) -> bool {
        match (self.canonical(), other.canonical()) {
            (Self::Robin { kappa: a }, Self::Robin { kappa: b }) => a == b,
            (a, b) => std::mem::discriminant(&a) == std::mem::discriminant(&b),
        }
    }
}

impl<T: Real> fmt::Display for BoundaryCondition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.canonical() {
            Self::Dirichlet => f.write_str("dirichlet"),
            Self::Neumann => f.write_str("neumann"),
            Self::Robin { kappa } => write!(f, "robin({kappa})"),
        }
    }
}

/// Momentum-space potential `U(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialProfile<T> {
    /// `p − 1/(2√p)`
    SusyMinus,
    /// `p + 1/(2√p)`
    SusyPlus,
    /// Potential of the κ-deformed partner; `κ = 0` is `SusyPlus`.
    DeformedPlus { kappa: T },
}

impl<T: Real> PotentialProfile<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::DeformedPlus { kappa } if !(kappa >= T::zero()) || !kappa.is_finite() => {
                Err(Error::Domain {
                    what: "kappa",
                    value: kappa.as_f64(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Sign of the `1/(2√p)` term.
    pub fn sigma(&self) -> T {
        match self {
            Self::SusyMinus => -T::one(),
            _ => T::one(),
        }
    }

    /// `U(p) − σ/(2√p)`, finite down to `p = 0`.
    pub fn regular_part(&self, p: T) -> T {
        match *self {
            Self::SusyMinus | Self::SusyPlus => p,
            Self::DeformedPlus { kappa } => {
                if kappa == T::zero() {
                    p
                } else if p == T::zero() {
                    T::lit(2.0) * kappa * kappa
                } else {
                    deformed_potential(kappa, p).unwrap_or(T::nan()) - T::lit(0.5) / p.sqrt()
                }
            }
        }
    }

    pub fn value(&self, p: T) -> Result<T> {
        if !(p > T::zero()) || !p.is_finite() {
            return Err(Error::Domain {
                what: "potential",
                value: p.as_f64(),
            });
        }
        match *self {
            Self::SusyMinus => Ok(p - T::lit(0.5) / p.sqrt()),
            Self::SusyPlus => Ok(p + T::lit(0.5) / p.sqrt()),
            Self::DeformedPlus { kappa } => deformed_potential(kappa, p),
        }
    }

    fn eval(&self, p: T) -> T {
        self.value(p).unwrap_or(T::nan())
    }

    /// Coefficients of `√p⁰` and `√p¹` in the regular part at the origin.
    fn regular_series(&self) -> (T, T) {
        match *self {
            Self::DeformedPlus { kappa } => (T::lit(2.0) * kappa * kappa, -T::lit(4.0) * kappa),
            _ => (T::zero(), T::zero()),
        }
    }

    /// Frobenius values `(ψ, ψ′)` at small `p`. With `ψ = Σ aₙ p^{n/2}` the
    /// recursion `n(n−2)/4·aₙ = (σ/2)aₙ₋₃ + c₀aₙ₋₄ + c₁aₙ₋₅` fixes every
    /// coefficient from `a₀ = ψ(0)` and `a₂ = ψ′(0)`.
    pub fn frobenius(&self, energy: T, bc: BoundaryCondition<T>, p: T) -> (T, T) {
        let (a0, a2) = bc.initial_values();
        let sigma = self.sigma();
        let (r0, c1) = self.regular_series();
        let c0 = r0 - energy;
        let a3 = T::lit(2.0 / 3.0) * sigma * a0;
        let a4 = T::lit(0.5) * c0 * a0;
        let a5 = T::lit(2.0 / 15.0) * sigma * a2 + T::lit(4.0 / 15.0) * c1 * a0;
        let s = p.sqrt();
        let psi = a0 + a2 * p + a3 * p * s + a4 * p * p + a5 * p * p * s;
        let dpsi = a2 + T::lit(1.5) * a3 * s + T::lit(2.0) * a4 * p + T::lit(2.5) * a5 * p * s;
        (psi, dpsi)
    }

    pub fn partner(&self) -> Option<Self> {
        match self {
            Self::SusyMinus => Some(Self::SusyPlus),
            Self::SusyPlus => Some(Self::SusyMinus),
            Self::DeformedPlus { .. } => None,
        }
    }
}

impl<T: Real> fmt::Display for PotentialProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SusyMinus => f.write_str("susy_minus"),
            Self::SusyPlus => f.write_str("susy_plus"),
            Self::DeformedPlus { kappa } => write!(f, "deformed_plus({kappa})"),
        }
    }
}

/// Solver settings. `p_max = None` means `E_hi + 25`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub p_max: Option<T>,
    pub grid_points: usize,
    pub ode_tol: T,
    pub scan_step: T,
    pub max_bisections: usize,
    pub check_doubling: bool,
    /// Residual check starts here; the finite-difference `ψ″` is unreliable
    /// closer to the `1/√p` singularity.
    pub residual_from: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            p_max: None,
            grid_points: 4001,
            ode_tol: T::epsilon().sqrt() * T::lit(1e-4),
            scan_step: T::lit(0.05),
            max_bisections: 200,
            check_doubling: true,
            residual_from: T::lit(0.5),
        }
    }
}

pub const DEFAULT_MARGIN: f64 = 25.0;
const FROBENIUS_START: f64 = 1e-6;
const SCAN_FLOOR: f64 = -2.0;
// keeps scan nodes off round numbers such as the exact zero mode
const SCAN_OFFSET: f64 = 0.013_7;

/// Result of a single outward shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot<T> {
    /// `ψ(p_max)/max|ψ|`
    pub mismatch: T,
    pub p: Vec<T>,
    pub psi: Vec<T>,
    pub dpsi: Vec<T>,
    /// `(p, factor)` for every renormalization applied on the way out.
    pub rescales: Vec<(T, T)>,
}

struct Leg<T> {
    states: Vec<[T; 2]>,
    max_abs: T,
    rescales: Vec<(T, T)>,
}

fn integrate_legs<T: Real>(
    profile: &PotentialProfile<T>,
    energy: T,
    start: (T, [T; 2]),
    targets: &[T],
    tol: T,
) -> Result<Leg<T>> {
    let mut solver = Dopri5::<T, 2>::new(OdeOptions::new(tol));
    let mut rhs = |p: T, y: &[T; 2]| [y[1], (profile.eval(p) - energy) * y[0]];
    let big = T::max_value().powf(T::lit(0.25));
    let (mut p, mut y) = start;
    let mut h = None;
    let mut out = Leg {
        states: Vec::with_capacity(targets.len()),
        max_abs: y[0].abs(),
        rescales: Vec::new(),
    };
    for &target in targets {
        let (y1, h1) = solver.integrate_to(&mut rhs, p, y, target, h)?;
        p = target;
        y = y1;
        h = Some(h1);
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::StepFailure {
                t: p.as_f64(),
                h: h1.as_f64(),
            });
        }
        let size = y[0].abs().max(y[1].abs());
        if size > big {
            let factor = T::one() / size;
            y = [y[0] * factor, y[1] * factor];
            for s in out.states.iter_mut() {
                *s = [s[0] * factor, s[1] * factor];
            }
            out.max_abs = out.max_abs * factor;
            out.rescales.push((p, factor));
        }
        out.max_abs = out.max_abs.max(y[0].abs());
        out.states.push(y);
    }
    Ok(out)
}

fn check_p_max<T: Real>(energy: T, p_max: T) -> Result<()> {
    if !(p_max > energy) || !p_max.is_finite() || !(p_max > T::zero()) {
        return Err(Error::Invalid(format!(
            "p_max = {p_max} must exceed the energy {energy}"
        )));
    }
    Ok(())
}

fn start_point<T: Real>(first_node: T) -> T {
    T::lit(FROBENIUS_START).min(first_node * T::lit(0.5))
}

/// Integrates `ψ″ = (U − E)ψ` outward from the Frobenius start and reports the
/// normalized far-end value. Samples are taken at unit spacing.
pub fn shoot<T: Real>(
    profile: &PotentialProfile<T>,
    energy: T,
    bc: BoundaryCondition<T>,
    p_max: T,
    tol: T,
) -> Result<Shot<T>> {
    profile.validate()?;
    check_p_max(energy, p_max)?;
    if !(tol > T::zero()) {
        return Err(Error::Invalid(format!(
            "shooting tolerance must be positive, got {tol}"
        )));
    }
    let legs = p_max.ceil().to_usize().unwrap_or(1).max(1);
    let targets: Vec<T> = (1..=legs)
        .map(|j| p_max * T::from_usize_lossy(j) / T::from_usize_lossy(legs))
        .collect();
    let p0 = start_point(targets[0]);
    let (psi0, dpsi0) = profile.frobenius(energy, bc, p0);
    let leg = integrate_legs(profile, energy, (p0, [psi0, dpsi0]), &targets, tol)?;
    let end = leg.states.last().copied().unwrap_or([psi0, dpsi0]);
    let (a0, a2) = bc.initial_values();
    let scale = leg
        .max_abs
        .max(a0.abs() * leg.rescales.iter().fold(T::one(), |acc, r| acc * r.1));
    let mismatch = if scale > T::zero() {
        end[0] / scale
    } else {
        end[0]
    };
    let mut p = vec![T::zero()];
    p.extend(targets.iter().copied());
    let factor = leg.rescales.iter().fold(T::one(), |acc, r| acc * r.1);
    let mut psi = vec![a0 * factor];
    let mut dpsi = vec![a2 * factor];
    psi.extend(leg.states.iter().map(|s| s[0]));
    dpsi.extend(leg.states.iter().map(|s| s[1]));
    Ok(Shot {
        mismatch,
        p,
        psi,
        dpsi,
        rescales: leg.rescales,
    })
}

fn mismatch<T: Real>(
    profile: &PotentialProfile<T>,
    energy: T,
    bc: BoundaryCondition<T>,
    p_max: T,
    tol: T,
) -> Result<T> {
    Ok(shoot(profile, energy, bc, p_max, tol)?.mismatch)
}

struct Bisection<T> {
    energy: T,
    width: T,
}

fn bisect<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    (mut lo, mut hi): (T, T),
    p_max: T,
    tol_e: T,
    opts: &SolverOptions<T>,
) -> Result<Bisection<T>> {
    let mut m_lo = mismatch(profile, lo, bc, p_max, opts.ode_tol)?;
    let m_hi = mismatch(profile, hi, bc, p_max, opts.ode_tol)?;
    if m_lo == T::zero() {
        return Ok(Bisection {
            energy: lo,
            width: T::zero(),
        });
    }
    if m_hi == T::zero() {
        return Ok(Bisection {
            energy: hi,
            width: T::zero(),
        });
    }
    if m_lo.signum() == m_hi.signum() {
        return Err(Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let mut iterations = 0;
    while hi - lo > tol_e {
        if iterations == opts.max_bisections {
            return Err(Error::NoConvergence {
                what: "eigenvalue bisection",
                iterations,
            });
        }
        iterations += 1;
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mismatch(profile, mid, bc, p_max, opts.ode_tol)?;
        if m == T::zero() {
            return Ok(Bisection {
                energy: mid,
                width: T::zero(),
            });
        }
        if m.signum() == m_lo.signum() {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        energy: T::lit(0.5) * (lo + hi),
        width: hi - lo,
    })
}

/// Solver diagnostics attached to every eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics<T> {
    pub mismatch_at_pmax: T,
    /// `|E(2·p_max) − E(p_max)|`, when the doubling check ran.
    pub pmax_doubling_shift: Option<T>,
    pub bisection_width: T,
    pub residual_max: T,
    /// Where the outward and inward solutions are joined.
    pub p_match: T,
}

/// Normalized bound state on a uniform grid over `[0, p_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution<T> {
    pub profile: PotentialProfile<T>,
    pub energy: T,
    pub bc: BoundaryCondition<T>,
    pub p_max: T,
    pub tol_e: T,
    pub grid: Vec<T>,
    pub psi: Vec<T>,
    pub dpsi: Vec<T>,
    /// `∫ψ² dp` of the stored samples.
    pub norm: T,
    pub diagnostics: EigenDiagnostics<T>,
}

/// Composite Simpson rule on a uniform grid, trapezoid on a leftover interval.
pub fn simpson<T: Real>(h: T, f: &[T]) -> T {
    let n = f.len();
    if n < 2 {
        return T::zero();
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut sum = T::zero();
    let mut i = 0;
    while i < even {
        sum = sum + (f[i] + T::lit(4.0) * f[i + 1] + f[i + 2]) * h / T::lit(3.0);
        i += 2;
    }
    if even < intervals {
        sum = sum + (f[n - 2] + f[n - 1]) * h * T::lit(0.5);
    }
    sum
}

fn uniform_grid<T: Real>(p_max: T, n: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| p_max * T::from_usize_lossy(i) / last)
        .collect()
}

// grid, ψ, ψ′ and the matching point
type Assembled<T> = (Vec<T>, Vec<T>, Vec<T>, T);

fn assemble<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    energy: T,
    p_max: T,
    opts: &SolverOptions<T>,
) -> Result<Assembled<T>> {
    let n = opts.grid_points;
    if n < 5 {
        return Err(Error::Invalid(format!(
            "grid needs at least 5 points, got {n}"
        )));
    }
    let grid = uniform_grid(p_max, n);
    let turn = (1..n)
        .rev()
        .find(|&i| profile.eval(grid[i]) <= energy)
        .map(|i| grid[i]);
    let target = (turn.unwrap_or(T::zero()) + T::one()).min(T::lit(0.5) * p_max);
    let m = grid
        .iter()
        .position(|&p| p >= target)
        .unwrap_or(n / 2)
        .clamp(1, n - 2);

    let p0 = start_point(grid[1]);
    let (psi0, dpsi0) = profile.frobenius(energy, bc, p0);
    let outward = integrate_legs(
        profile,
        energy,
        (p0, [psi0, dpsi0]),
        &grid[1..=m],
        opts.ode_tol,
    )?;
    let inward_targets: Vec<T> = grid[m..n - 1].iter().rev().copied().collect();
    let inward = integrate_legs(
        profile,
        energy,
        (p_max, [T::zero(), -T::one()]),
        &inward_targets,
        opts.ode_tol,
    )?;

    let out_m = outward.states[m - 1];
    let in_m = *inward
        .states
        .last()
        .expect("inward leg reaches the match point");
    // ψ has no node past the turning point, so the values can be matched exactly
    let scale = if in_m[0] != T::zero() {
        out_m[0] / in_m[0]
    } else {
        out_m[1] / in_m[1]
    };
    let factor = outward.rescales.iter().fold(T::one(), |acc, r| acc * r.1);
    let (a0, a2) = bc.initial_values();

    let mut psi = Vec::with_capacity(n);
    let mut dpsi = Vec::with_capacity(n);
    psi.push(a0 * factor);
    dpsi.push(a2 * factor);
    for s in &outward.states {
        psi.push(s[0]);
        dpsi.push(s[1]);
    }
    // inward states run from p_max−h down to p_m; the p_m entry is already in
    for s in inward.states.iter().rev().skip(1) {
        psi.push(s[0] * scale);
        dpsi.push(s[1] * scale);
    }
    psi.push(T::zero());
    dpsi.push(-scale);
    debug_assert_eq!(psi.len(), n);
    Ok((grid, psi, dpsi, grid_at(m, p_max, n)))
}

fn grid_at<T: Real>(i: usize, p_max: T, n: usize) -> T {
    p_max * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)
}

// first local maximum of |ψ| that stands above numerical noise
fn phase_index<T: Real>(psi: &[T]) -> usize {
    let peak = psi.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = peak * T::lit(1e-3);
    let n = psi.len();
    for i in 0..n {
        let a = psi[i].abs();
        if a < floor {
            continue;
        }
        let left = if i == 0 { T::zero() } else { psi[i - 1].abs() };
        let right = if i + 1 == n {
            T::zero()
        } else {
            psi[i + 1].abs()
        };
        if a >= left && a >= right {
            return i;
        }
    }
    0
}

fn residual_max<T: Real>(
    profile: &PotentialProfile<T>,
    energy: T,
    grid: &[T],
    psi: &[T],
    from: T,
) -> T {
    let n = grid.len();
    let h = grid[1] - grid[0];
    let peak = psi.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut worst = T::zero();
    for i in 1..n - 1 {
        if grid[i] < from {
            continue;
        }
        let d2 = (psi[i + 1] - T::lit(2.0) * psi[i] + psi[i - 1]) / (h * h);
        let r = (-d2 + (profile.eval(grid[i]) - energy) * psi[i]).abs();
        worst = worst.max(r);
    }
    worst / peak
}

pub fn solve_eigenvalue<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    bracket: (T, T),
    tol_e: T,
) -> Result<EigenSolution<T>> {
    solve_eigenvalue_with(profile, bc, bracket, tol_e, &SolverOptions::default())
}

pub fn solve_eigenvalue_with<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    bracket: (T, T),
    tol_e: T,
    opts: &SolverOptions<T>,
) -> Result<EigenSolution<T>> {
    profile.validate()?;
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid(format!(
            "energy bracket ({lo}, {hi}) is not an interval"
        )));
    }
    if !(tol_e > T::zero()) {
        return Err(Error::Invalid(format!(
            "tol_E must be positive, got {tol_e}"
        )));
    }
    let p_max = opts.p_max.unwrap_or(hi + T::lit(DEFAULT_MARGIN));
    check_p_max(hi, p_max)?;
    let root = bisect(profile, bc, (lo, hi), p_max, tol_e, opts)?;
    let energy = root.energy;
    let mismatch_at_pmax = mismatch(profile, energy, bc, p_max, opts.ode_tol)?;

    let pmax_doubling_shift = if opts.check_doubling {
        Some(doubled_shift(profile, bc, energy, p_max, tol_e, opts)?)
    } else {
        None
    };

    let (grid, mut psi, mut dpsi, p_match) = assemble(profile, bc, energy, p_max, opts)?;
    let h = grid[1] - grid[0];
    let sq: Vec<T> = psi.iter().map(|v| *v * *v).collect();
    let mut scale = T::one() / simpson(h, &sq).sqrt();
    if psi[phase_index(&psi)] < T::zero() {
        scale = -scale;
    }
    for (v, d) in psi.iter_mut().zip(dpsi.iter_mut()) {
        *v = *v * scale;
        *d = *d * scale;
    }
    let sq: Vec<T> = psi.iter().map(|v| *v * *v).collect();
    let norm = simpson(h, &sq);
    let residual = residual_max(profile, energy, &grid, &psi, opts.residual_from);

    Ok(EigenSolution {
        profile: *profile,
        energy,
        bc,
        p_max,
        tol_e,
        grid,
        psi,
        dpsi,
        norm,
        diagnostics: EigenDiagnostics {
            mismatch_at_pmax,
            pmax_doubling_shift,
            bisection_width: root.width,
            residual_max: residual,
            p_match,
        },
    })
}

fn doubled_shift<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    energy: T,
    p_max: T,
    tol_e: T,
    opts: &SolverOptions<T>,
) -> Result<T> {
    let mut half = (tol_e * T::lit(100.0)).max(T::lit(1e-4));
    for _ in 0..4 {
        match bisect(
            profile,
            bc,
            (energy - half, energy + half),
            p_max * T::lit(2.0),
            tol_e,
            opts,
        ) {
            Ok(root) => return Ok((root.energy - energy).abs()),
            Err(Error::NoSignChange { .. }) => half = half * T::lit(10.0),
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoSignChange {
        lo: (energy - half).as_f64(),
        hi: (energy + half).as_f64(),
    })
}

/// All eigenvalues in `[−2, e_max]`, ascending.
pub fn spectrum<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    e_max: T,
    tol_e: T,
) -> Result<Vec<EigenSolution<T>>> {
    spectrum_with(
        profile,
        bc,
        (T::lit(SCAN_FLOOR), e_max),
        tol_e,
        &SolverOptions::default(),
    )
}

/// Scan-and-bisect over `range` with step `opts.scan_step`; every bracket
/// shares `p_max = range.1 + 25` unless `opts.p_max` is set.
pub fn spectrum_with<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    range: (T, T),
    tol_e: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<EigenSolution<T>>> {
    profile.validate()?;
    let (lo, hi) = range;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid("spectrum range must be finite".into()));
    }
    if hi <= lo {
        return Ok(Vec::new());
    }
    if !(opts.scan_step > T::zero()) {
        return Err(Error::Invalid("scan step must be positive".into()));
    }
    let p_max = opts
        .p_max
        .unwrap_or(hi.max(T::zero()) + T::lit(DEFAULT_MARGIN));
    let opts = SolverOptions {
        p_max: Some(p_max),
        ..*opts
    };
    let mut nodes = vec![lo];
    let mut e = lo + T::lit(SCAN_OFFSET);
    while e < hi {
        nodes.push(e);
        e = e + opts.scan_step;
    }
    nodes.push(hi);

    let mut out: Vec<EigenSolution<T>> = Vec::new();
    let mut prev = mismatch(profile, nodes[0], bc, p_max, opts.ode_tol)?;
    for w in nodes.windows(2) {
        let m = mismatch(profile, w[1], bc, p_max, opts.ode_tol)?;
        if prev.signum() != m.signum() || m == T::zero() {
            let sol = solve_eigenvalue_with(profile, bc, (w[0], w[1]), tol_e, &opts)?;
            if out
                .last()
                .is_none_or(|last| (sol.energy - last.energy).abs() > tol_e)
            {
                out.push(sol);
            }
        }
        prev = m;
    }
    Ok(out)
}

/// Energies only, for the positivity scan.
pub fn sign_changes<T: Real>(
    profile: &PotentialProfile<T>,
    bc: BoundaryCondition<T>,
    range: (T, T),
    p_max: T,
    step: T,
    tol: T,
) -> Result<Vec<(T, T)>> {
    let (lo, hi) = range;
    let mut out = Vec::new();
    let mut e0 = lo;
    let mut m0 = mismatch(profile, e0, bc, p_max, tol)?;
    while e0 < hi {
        let e1 = (e0 + step).min(hi);
        let m1 = mismatch(profile, e1, bc, p_max, tol)?;
        if m0.signum() != m1.signum() {
            out.push((e0, e1));
        }
        e0 = e1;
        m0 = m1;
    }
    Ok(out)
}

/// `a = d/dp + √p` and `a† = −d/dp + √p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderOperator {
    A,
    ADagger,
}

/// Samples of a function and its derivative on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub derivs: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    fn step(&self) -> T {
        self.grid[1] - self.grid[0]
    }

    pub fn l2_norm(&self) -> T {
        let sq: Vec<T> = self.values.iter().map(|v| *v * *v).collect();
        simpson(self.step(), &sq).sqrt()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| *v * factor).collect(),
            derivs: self.derivs.iter().map(|v| *v * factor).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(T::one() / self.l2_norm())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        let same = self.grid.len() == other.grid.len()
            && self.grid.len() > 1
            && (self.grid[self.grid.len() - 1] - other.grid[other.grid.len() - 1]).abs()
                <= T::lit(1e-12) * self.grid[self.grid.len() - 1].abs().max(T::one());
        if same {
            Ok(())
        } else {
            Err(Error::Invalid(
                "grid functions live on different grids".into(),
            ))
        }
    }

    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        let sq: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .collect();
        Ok(simpson(self.step(), &sq).sqrt())
    }

    /// Applies a ladder operator using the stored derivative. The derivative
    /// of the result is taken by central differences.
    pub fn apply(&self, op: LadderOperator) -> Self {
        let values: Vec<T> = self
            .grid
            .iter()
            .zip(self.values.iter().zip(&self.derivs))
            .map(|(p, (v, d))| match op {
                LadderOperator::A => *d + p.sqrt() * *v,
                LadderOperator::ADagger => -*d + p.sqrt() * *v,
            })
            .collect();
        let derivs = central_differences(self.step(), &values);
        Self {
            grid: self.grid.clone(),
            values,
            derivs,
        }
    }

    pub fn boundary_values(&self) -> (T, T) {
        (self.values[0], self.derivs[0])
    }
}

fn central_differences<T: Real>(h: T, f: &[T]) -> Vec<T> {
    let n = f.len();
    let two = T::lit(2.0);
    (0..n)
        .map(|i| {
            if i == 0 {
                (-T::lit(3.0) * f[0] + T::lit(4.0) * f[1] - f[2]) / (two * h)
            } else if i == n - 1 {
                (T::lit(3.0) * f[n - 1] - T::lit(4.0) * f[n - 2] + f[n - 3]) / (two * h)
            } else {
                (f[i + 1] - f[i - 1]) / (two * h)
            }
        })
        .collect()
}

impl<T: Real> EigenSolution<T> {
    pub fn as_grid_function(&self) -> GridFunction<T> {
        GridFunction {
            grid: self.grid.clone(),
            values: self.psi.clone(),
            derivs: self.dpsi.clone(),
        }
    }

    /// Energies within this margin of zero count as the zero mode.
    pub fn zero_threshold(&self) -> T {
        T::lit(10.0) * self.tol_e.max(self.diagnostics.bisection_width)
    }
}

// ψ/√p with the p → 0 limit for ψ(0) = 0
fn over_sqrt<T: Real>(p: T, v: T, d: T) -> T {
    if p > T::zero() {
        v / p.sqrt()
    } else if v == T::zero() {
        T::zero() * d
    } else {
        T::infinity() * v.signum()
    }
}

/// Ladder image of an eigenstate, divided by `√E`. Derivatives of the image
/// come from the eigenvalue equation, not from differencing.
pub fn apply_ladder<T: Real>(
    op: LadderOperator,
    sol: &EigenSolution<T>,
) -> Result<GridFunction<T>> {
    if sol.energy.abs() <= sol.zero_threshold() || sol.energy < T::zero() {
        return Err(Error::ZeroEnergy);
    }
    Ok(apply_ladder_unnormalized(op, sol).scaled(T::one() / sol.energy.sqrt()))
}

pub fn apply_ladder_unnormalized<T: Real>(
    op: LadderOperator,
    sol: &EigenSolution<T>,
) -> GridFunction<T> {
    let sigma = sol.profile.sigma();
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(sol.grid.len());
    let mut derivs = Vec::with_capacity(sol.grid.len());
    for ((&p, &v), &d) in sol.grid.iter().zip(&sol.psi).zip(&sol.dpsi) {
        let s = p.sqrt();
        let reg = (sol.profile.regular_part(p) - sol.energy) * v;
        match op {
            LadderOperator::A => {
                values.push(d + s * v);
                let sing = (T::one() + sigma) * half;
                let singular = if sing == T::zero() {
                    T::zero()
                } else {
                    sing * over_sqrt(p, v, d)
                };
                derivs.push(reg + singular + s * d);
            }
            LadderOperator::ADagger => {
                values.push(-d + s * v);
                let sing = (T::one() - sigma) * half;
                let singular = if sing == T::zero() {
                    T::zero()
                } else {
                    sing * over_sqrt(p, v, d)
                };
                derivs.push(-reg + singular + s * d);
            }
        }
    }
    GridFunction {
        grid: sol.grid.clone(),
        values,
        derivs,
    }
}

/// The `p = 0` term `ψχ′ − χψ′` that must vanish for a self-adjoint pairing.
pub fn boundary_term<T: Real>(chi: &EigenSolution<T>, psi: &EigenSolution<T>) -> T {
    psi.psi[0] * chi.dpsi[0] - chi.psi[0] * psi.dpsi[0]
}

/// Reads the boundary condition off the values at `p = 0`, relative to the
/// size of the function and of its derivative.
pub fn infer_boundary_condition<T: Real>(f: &GridFunction<T>) -> BoundaryCondition<T> {
    let (v, d) = f.boundary_values();
    let vmax = f.values.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let dmax = f
        .derivs
        .iter()
        .filter(|x| x.is_finite())
        .fold(T::zero(), |m, x| m.max(x.abs()));
    let rel = T::lit(1e-6);
    if v.abs() <= rel * vmax {
        BoundaryCondition::Dirichlet
    } else if d.abs() <= rel * dmax {
        BoundaryCondition::Neumann
    } else {
        BoundaryCondition::Robin { kappa: -d / v }
    }
}

/// Linear combination of eigenstates from one boundary-condition sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superposition<T> {
    pub bc: BoundaryCondition<T>,
    pub coefficients: Vec<T>,
    pub energies: Vec<T>,
    pub function: GridFunction<T>,
}

impl<T: Real> Superposition<T> {
    pub fn new(terms: &[(T, &EigenSolution<T>)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Invalid("a superposition needs at least one state".into()))?;
        let base = first.as_grid_function();
        let mut values = vec![T::zero(); base.values.len()];
        let mut derivs = vec![T::zero(); base.values.len()];
        for (c, sol) in terms {
            if !sol.bc.same_sector(first.bc) {
                return Err(Error::MixedSectors(
                    first.bc.to_string(),
                    sol.bc.to_string(),
                ));
            }
            base.check_compatible(&sol.as_grid_function())?;
            for i in 0..values.len() {
                values[i] = values[i] + *c * sol.psi[i];
                derivs[i] = derivs[i] + *c * sol.dpsi[i];
            }
        }
        Ok(Self {
            bc: first.bc,
            coefficients: terms.iter().map(|t| t.0).collect(),
            energies: terms.iter().map(|t| t.1.energy).collect(),
            function: GridFunction {
                grid: base.grid,
                values,
                derivs,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma;

    type P = PotentialProfile<f64>;
    type B = BoundaryCondition<f64>;

    fn ground_state_norm() -> f64 {
        6f64.powf(1.0 / 6.0) / gamma(2.0f64 / 3.0).sqrt()
    }

    #[test]
    fn frobenius_reproduces_exact_ground_state() {
        let prof = P::SusyMinus;
        for p in [1e-6f64, 1e-4, 1e-2] {
            let (psi, dpsi) = prof.frobenius(0.0, B::Neumann, p);
            let exact = (-2.0 / 3.0 * p * p.sqrt()).exp();
            // the series stops before the p³ term
            assert!((psi - exact).abs() < p.powi(3), "{p}");
            assert!((dpsi + p.sqrt() * exact).abs() < 2.0 * p.powi(2), "{p}");
        }
    }

    #[test]
    fn ground_state_shot_decays() {
        let below = shoot(&P::SusyMinus, -0.01, B::Neumann, 25.0, 1e-12).unwrap();
        let above = shoot(&P::SusyMinus, 0.01, B::Neumann, 25.0, 1e-12).unwrap();
        assert!(below.mismatch * above.mismatch < 0.0);
        let exact = |p: f64| (-2.0 / 3.0 * p * p.sqrt()).exp();
        // samples share the renormalization factor of the far end
        let ratio = below.psi[1] / below.psi[0];
        assert!((ratio - exact(below.p[1])).abs() < 1e-2, "{ratio}");
        assert!(shoot(&P::SusyMinus, 30.0, B::Neumann, 25.0, 1e-12).is_err());
    }

    #[test]
    fn dirichlet_mismatch_brackets_first_level() {
        let prof = P::SusyMinus;
        let a = shoot(&prof, 1.8, B::Dirichlet, 27.2, 1e-12)
            .unwrap()
            .mismatch;
        let b = shoot(&prof, 2.0, B::Dirichlet, 27.2, 1e-12)
            .unwrap()
            .mismatch;
        assert!(a * b < 0.0);
    }

    #[test]
    fn susy_ground_state() {
        let sol = solve_eigenvalue(&P::SusyMinus, B::Neumann, (-0.5, 0.5), 1e-7).unwrap();
        assert!(sol.energy.abs() < 1e-6);
        assert!((sol.norm - 1.0).abs() < 1e-8);
        let n0 = ground_state_norm();
        let exact = GridFunction {
            grid: sol.grid.clone(),
            values: sol
                .grid
                .iter()
                .map(|p| n0 * (-2.0 / 3.0 * p * p.sqrt()).exp())
                .collect(),
            derivs: vec![0.0; sol.grid.len()],
        };
        let d = sol.as_grid_function().l2_distance(&exact).unwrap();
        assert!(d < 1e-4, "{d}");
        assert!(sol.diagnostics.residual_max < 1e-4);
        assert!(matches!(
            apply_ladder(LadderOperator::A, &sol),
            Err(Error::ZeroEnergy)
        ));
        let image = apply_ladder_unnormalized(LadderOperator::A, &sol);
        assert!(image.l2_norm() < 1e-6, "{}", image.l2_norm());
    }

    #[test]
    fn first_excited_and_partner() {
        let minus = solve_eigenvalue(&P::SusyMinus, B::Dirichlet, (1.5, 2.2), 1e-7).unwrap();
        assert!((minus.energy - 1.89379).abs() < 1e-3, "{}", minus.energy);
        let shift = minus.diagnostics.pmax_doubling_shift.unwrap();
        assert!(shift < 1e-6, "{shift}");
        assert!(
            minus.diagnostics.residual_max < 1e-4,
            "{}",
            minus.diagnostics.residual_max
        );

        let plus = solve_eigenvalue(&P::SusyPlus, B::Neumann, (1.5, 2.2), 1e-7).unwrap();
        assert!((plus.energy - minus.energy).abs() < 1e-4);

        let image = apply_ladder(LadderOperator::A, &minus).unwrap();
        let d = image.l2_distance(&plus.as_grid_function()).unwrap();
        assert!(d < 1e-3, "{d}");
        assert_eq!(
            infer_boundary_condition(&minus.as_grid_function()),
            B::Dirichlet
        );
        assert_eq!(infer_boundary_condition(&image), B::Neumann);
        let back = apply_ladder(LadderOperator::ADagger, &plus).unwrap();
        assert_eq!(infer_boundary_condition(&back), B::Dirichlet);
    }

    #[test]
    fn superselection() {
        let g = solve_eigenvalue(&P::SusyMinus, B::Neumann, (-0.5, 0.5), 1e-7).unwrap();
        let e1 = solve_eigenvalue(&P::SusyMinus, B::Dirichlet, (1.5, 2.2), 1e-7).unwrap();
        let mixed = boundary_term(&g, &e1);
        assert!((mixed.abs() - (g.psi[0] * e1.dpsi[0]).abs()).abs() < 1e-12);
        assert!(mixed.abs() > 0.1);
        assert!(boundary_term(&e1, &e1).abs() < 1e-8);
        assert!(matches!(
            Superposition::new(&[(1.0, &g), (1.0, &e1)]),
            Err(Error::MixedSectors(..))
        ));
        assert!(Superposition::new(&[(1.0, &g), (0.5, &g)]).is_ok());
    }

    #[test]
    fn deformed_zero_mode() {
        let prof = P::DeformedPlus { kappa: 1.0 };
        let sol = solve_eigenvalue(&prof, B::Robin { kappa: 1.0 }, (-0.5, 0.5), 1e-7).unwrap();
        assert!(sol.energy.abs() < 1e-6, "{}", sol.energy);
        let phi: Vec<f64> = sol
            .grid
            .iter()
            .map(|&p| crate::deformation::phi0(1.0, p).unwrap())
            .collect();
        let exact = GridFunction {
            grid: sol.grid.clone(),
            values: phi,
            derivs: vec![0.0; sol.grid.len()],
        }
        .normalized();
        let d = sol.as_grid_function().l2_distance(&exact).unwrap();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn no_negative_levels() {
        for prof in [P::SusyMinus, P::SusyPlus] {
            for bc in [B::Dirichlet, B::Neumann] {
                let found = sign_changes(&prof, bc, (-2.0, -1e-6), 25.0, 0.05, 1e-12).unwrap();
                assert!(found.is_empty(), "{prof} {bc}");
            }
        }
        assert!(spectrum(&P::SusyMinus, B::Dirichlet, -2.5, 1e-7)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn robin_zero_is_neumann() {
        assert_eq!(B::Robin { kappa: 0.0 }.canonical(), B::Neumann);
        assert_eq!(
            P::DeformedPlus { kappa: 0.0 }.value(2.0).unwrap(),
            P::SusyPlus.value(2.0).unwrap()
        );
    }
}
