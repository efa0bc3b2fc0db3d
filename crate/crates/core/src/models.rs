//! The branched-Hamiltonian models: the gaussian momentum-switchback model
//! and the k-family of double-valued Hamiltonians (with its k = 1
//! supersymmetric member).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{odd_root, Real};
use crate::specfun::{lambert_w, WBranch};

/// Position-space potential `V(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential<T> {
    Zero,
    /// `V(x) = offset + stiffness·x²`; for the harmonic oscillator `stiffness = m·ω²/2`.
    HarmonicShifted {
        offset: T,
        stiffness: T,
    },
    /// `V(x) = x²`.
    Square,
}

impl<T: Real> Potential<T> {
    pub fn harmonic(mass: T, omega: T, offset: T) -> Self {
        Potential::HarmonicShifted {
            offset,
            stiffness: T::lit(0.5) * mass * omega * omega,
        }
    }

    pub fn value(&self, x: T) -> T {
        match *self {
            Potential::Zero => T::zero(),
            Potential::HarmonicShifted { offset, stiffness } => offset + stiffness * x * x,
            Potential::Square => x * x,
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match *self {
            Potential::Zero => T::zero(),
            Potential::HarmonicShifted { stiffness, .. } => T::lit(2.0) * stiffness * x,
            Potential::Square => T::lit(2.0) * x,
        }
    }

    /// `(offset, stiffness)` in the `offset + stiffness·x²` form.
    pub fn quadratic_coefficients(&self) -> (T, T) {
        match *self {
            Potential::Zero => (T::zero(), T::zero()),
            Potential::HarmonicShifted { offset, stiffness } => (offset, stiffness),
            Potential::Square => (T::zero(), T::one()),
        }
    }

    /// Smallest `|x|` with `V(x) = level`, for confining potentials.
    pub fn abs_position_at(&self, level: T) -> Option<T> {
        let (offset, stiffness) = self.quadratic_coefficients();
        if stiffness <= T::zero() {
            return None;
        }
        let s = (level - offset) / stiffness;
        if s < T::zero() {
            None
        } else {
            Some(s.sqrt())
        }
    }
}

/// Branch of the gaussian-model Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianBranch {
    /// `v ≤ -√(C/m)`, valid for `p ≤ 0`.
    Minus,
    /// `|v| ≤ √(C/m)`, valid on the whole momentum interval.
    Middle,
    /// `v ≥ √(C/m)`, valid for `p ≥ 0`.
    Plus,
}

/// Branch of the k-family Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyBranch {
    /// `H₋`, governing `v > 1`.
    HMinus,
    /// `H₊`, governing `v < 1`.
    HPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BranchId {
    Gaussian(GaussianBranch),
    Family(FamilyBranch),
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BranchId::Gaussian(GaussianBranch::Minus) => "minus",
            BranchId::Gaussian(GaussianBranch::Middle) => "middle",
            BranchId::Gaussian(GaussianBranch::Plus) => "plus",
            BranchId::Family(FamilyBranch::HMinus) => "h_minus",
            BranchId::Family(FamilyBranch::HPlus) => "h_plus",
        };
        f.write_str(s)
    }
}

impl From<GaussianBranch> for BranchId {
    fn from(b: GaussianBranch) -> Self {
        BranchId::Gaussian(b)
    }
}

impl From<FamilyBranch> for BranchId {
    fn from(b: FamilyBranch) -> Self {
        BranchId::Family(b)
    }
}

/// Gaussian model `L = C(1 - exp(-m v²/2C)) - V(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianModel<T> {
    pub mass: T,
    pub scale: T,
    pub potential: Potential<T>,
}

impl<T: Real> GaussianModel<T> {
    pub fn new(mass: T, scale: T, potential: Potential<T>) -> Result<Self> {
        if !(mass > T::zero()) || !(scale > T::zero()) {
            return Err(Error::Invalid(format!(
                "gaussian model needs m > 0 and C > 0, got m = {mass}, C = {scale}"
            )));
        }
        Ok(Self {
            mass,
            scale,
            potential,
        })
    }

    /// Largest attainable `|p|`, `√(mC/e)`.
    pub fn momentum_bound(&self) -> T {
        (self.mass * self.scale / T::E()).sqrt()
    }

    /// Velocity at which the outer and middle branches meet, `√(C/m)`.
    pub fn cusp_velocity(&self) -> T {
        (self.scale / self.mass).sqrt()
    }

    pub fn lagrangian(&self, x: T, v: T) -> T {
        let a = self.mass * v * v / (T::lit(2.0) * self.scale);
        -self.scale * (-a).exp_m1() - self.potential.value(x)
    }

    pub fn momentum(&self, v: T) -> T {
        let a = self.mass * v * v / (T::lit(2.0) * self.scale);
        self.mass * v * (-a).exp()
    }

    pub fn branch_admits(&self, p: T, branch: GaussianBranch) -> bool {
        let bound = self.momentum_bound() * (T::one() + T::lit(4.0) * T::epsilon());
        if p.abs() > bound || p.is_nan() {
            return false;
        }
        match branch {
            GaussianBranch::Middle => true,
            GaussianBranch::Plus => p >= T::zero(),
            GaussianBranch::Minus => p <= T::zero(),
        }
    }

    fn lambert_arg(&self, p: T, branch: GaussianBranch) -> Result<T> {
        if !self.branch_admits(p, branch) {
            return Err(Error::Domain {
                what: "gaussian momentum outside branch interval",
                value: p.as_f64(),
            });
        }
        let w_branch = match branch {
            GaussianBranch::Middle => WBranch::Principal,
            _ => WBranch::Lower,
        };
        let arg = -(p * p) / (self.mass * self.scale);
        if w_branch == WBranch::Lower && arg == T::zero() {
            return Err(Error::Singular {
                what: "outer gaussian branch at p = 0 (v unbounded)",
                value: 0.0,
            });
        }
        lambert_w(w_branch, arg)
    }

    /// Branch-wise inverse of the momentum map.
    pub fn velocity(&self, p: T, branch: GaussianBranch) -> Result<T> {
        let w = self.lambert_arg(p, branch)?;
        let mag = (-(self.scale / self.mass) * w).sqrt();
        Ok(match branch {
            GaussianBranch::Middle => {
                if p < T::zero() {
                    -mag
                } else {
                    mag
                }
            }
            GaussianBranch::Plus => mag,
            GaussianBranch::Minus => -mag,
        })
    }

    /// `H - V(x)` on a branch. On the outer branches `p = 0` returns the cusp
    /// value `-C` (the `v → ±∞` limit).
    pub fn kinetic(&self, p: T, branch: GaussianBranch) -> Result<T> {
        let w = match self.lambert_arg(p, branch) {
            Ok(w) => w,
            Err(Error::Singular { .. }) => return Ok(-self.scale),
            Err(e) => return Err(e),
        };
        // C·(e^{W/2}(1 - W) - 1), arranged to avoid cancellation near W = 0
        let a = T::lit(0.5) * w;
        let two = T::lit(2.0);
        Ok(self.scale * (a.exp_m1() * (T::one() - two * a) - two * a))
    }

    pub fn hamiltonian(&self, x: T, p: T, branch: GaussianBranch) -> Result<T> {
        Ok(self.kinetic(p, branch)? + self.potential.value(x))
    }

    /// The three cusps of the closed `H(p)` curve at position `x`, ordered by `p`.
    pub fn cusps(&self, x: T) -> [(T, T); 3] {
        let v = self.potential.value(x);
        let c = self.scale;
        let outer = v - c + T::lit(2.0) * c / T::E().sqrt();
        let pb = self.momentum_bound();
        [(-pb, outer), (T::zero(), v - c), (pb, outer)]
    }
}

/// k-family model `L = C(v - 1)^{(2k-1)/(2k+1)} - V(x)` with real odd roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyModel<T> {
    pub k: u32,
    pub potential: Potential<T>,
}

impl<T: Real> FamilyModel<T> {
    pub fn new(k: u32, potential: Potential<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid(
                "family model needs a positive integer k".into(),
            ));
        }
        Ok(Self { k, potential })
    }

    /// The supersymmetric member: k = 1 with `V(x) = x²`.
    pub fn susy() -> Self {
        Self {
            k: 1,
            potential: Potential::Square,
        }
    }

    fn kf(&self) -> T {
        T::from_u32(self.k).unwrap()
    }

    /// `C = (2k+1)/(2k-1)·(1/4)^{2/(2k+1)}`.
    pub fn constant(&self) -> T {
        let k = self.kf();
        let two = T::lit(2.0);
        (two * k + T::one()) / (two * k - T::one()) * T::lit(0.25).powf(two / (two * k + T::one()))
    }

    pub fn lagrangian(&self, x: T, v: T) -> T {
        let root = odd_root(v - T::one(), 2 * self.k + 1);
        self.constant() * root.powi(2 * self.k as i32 - 1) - self.potential.value(x)
    }

    pub fn momentum(&self, v: T) -> Result<T> {
        let d = v - T::one();
        if d == T::zero() {
            return Err(Error::Singular {
                what: "family momentum at v = 1",
                value: v.as_f64(),
            });
        }
        let two = T::lit(2.0);
        let n = two * self.kf() + T::one();
        Ok(T::lit(0.25).powf(two / n) / (d * d).powf(n.recip()))
    }

    fn check_p(p: T) -> Result<()> {
        if p > T::zero() && p.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "family model requires p > 0",
                value: p.as_f64(),
            })
        }
    }

    /// `v∓(p) = 1 ± ¼ p^{-(2k+1)/2}`: `HMinus` lies above 1, `HPlus` below.
    pub fn velocity(&self, p: T, branch: FamilyBranch) -> Result<T> {
        Self::check_p(p)?;
        let n = T::lit(2.0) * self.kf() + T::one();
        let dv = T::lit(0.25) * p.powf(-n * T::lit(0.5));
        Ok(match branch {
            FamilyBranch::HMinus => T::one() + dv,
            FamilyBranch::HPlus => T::one() - dv,
        })
    }

    /// `H± - V = p ± p^{-(2k-1)/2}/(4k-2)`.
    pub fn kinetic(&self, p: T, branch: FamilyBranch) -> Result<T> {
        Self::check_p(p)?;
        let k = self.kf();
        let two = T::lit(2.0);
        let m = two * k - T::one();
        let term = p.powf(-m * T::lit(0.5)) / (two * m);
        Ok(match branch {
            FamilyBranch::HMinus => p - term,
            FamilyBranch::HPlus => p + term,
        })
    }

    pub fn hamiltonian(&self, x: T, p: T, branch: FamilyBranch) -> Result<T> {
        Ok(self.kinetic(p, branch)? + self.potential.value(x))
    }

    /// Momentum at which `H₊ - V` is smallest; there `v₊ = 0`.
    pub fn turning_momentum(&self) -> T {
        let two = T::lit(2.0);
        T::lit(0.25).powf(two / (two * self.kf() + T::one()))
    }
}

/// Single-valued energy of the supersymmetric model in `(x, v)`:
/// `E = x² + (C/3)(3 - 2v)/((v-1)²)^{1/3}`.
pub fn susy_energy<T: Real>(x: T, v: T) -> Result<T> {
    let d = v - T::one();
    if d == T::zero() {
        return Err(Error::Singular {
            what: "susy energy barrier at v = 1",
            value: v.as_f64(),
        });
    }
    let c = FamilyModel::<T>::susy().constant();
    let three = T::lit(3.0);
    Ok(x * x + c / three * (three - T::lit(2.0) * v) / (d * d).cbrt())
}

/// Any of the classical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec<T> {
    Gaussian(GaussianModel<T>),
    Family(FamilyModel<T>),
}

impl<T: Real> ModelSpec<T> {
    pub fn susy() -> Self {
        ModelSpec::Family(FamilyModel::susy())
    }

    /// Re-checks the constructor invariants, for specs that were deserialized.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Gaussian(g) => GaussianModel::new(g.mass, g.scale, g.potential).map(|_| ()),
            ModelSpec::Family(f) => FamilyModel::new(f.k, f.potential).map(|_| ()),
        }?;
        match *self.potential() {
            Potential::HarmonicShifted { offset, stiffness }
                if !(offset.is_finite() && stiffness.is_finite()) =>
            {
                Err(Error::Invalid(
                    "potential coefficients must be finite".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn potential(&self) -> &Potential<T> {
        match self {
            ModelSpec::Gaussian(g) => &g.potential,
            ModelSpec::Family(f) => &f.potential,
        }
    }

    pub fn is_susy(&self) -> bool {
        matches!(self, ModelSpec::Family(f) if f.k == 1 && f.potential == Potential::Square)
    }

    pub fn branches(&self) -> Vec<BranchId> {
        match self {
            ModelSpec::Gaussian(_) => vec![
                GaussianBranch::Minus.into(),
                GaussianBranch::Middle.into(),
                GaussianBranch::Plus.into(),
            ],
            ModelSpec::Family(_) => vec![FamilyBranch::HMinus.into(), FamilyBranch::HPlus.into()],
        }
    }

    fn mismatch(branch: BranchId) -> Error {
        Error::Invalid(format!("branch {branch} does not belong to this model"))
    }

    pub fn velocity(&self, p: T, branch: BranchId) -> Result<T> {
        match (self, branch) {
            (ModelSpec::Gaussian(g), BranchId::Gaussian(b)) => g.velocity(p, b),
            (ModelSpec::Family(f), BranchId::Family(b)) => f.velocity(p, b),
            _ => Err(Self::mismatch(branch)),
        }
    }

    pub fn kinetic(&self, p: T, branch: BranchId) -> Result<T> {
        match (self, branch) {
            (ModelSpec::Gaussian(g), BranchId::Gaussian(b)) => g.kinetic(p, b),
            (ModelSpec::Family(f), BranchId::Family(b)) => f.kinetic(p, b),
            _ => Err(Self::mismatch(branch)),
        }
    }

    pub fn hamiltonian(&self, x: T, p: T, branch: BranchId) -> Result<T> {
        Ok(self.kinetic(p, branch)? + self.potential().value(x))
    }
}

pub fn gaussian_momentum<T: Real>(model: &GaussianModel<T>, v: T) -> T {
    model.momentum(v)
}

pub fn gaussian_velocity<T: Real>(
    model: &GaussianModel<T>,
    p: T,
    branch: GaussianBranch,
) -> Result<T> {
    model.velocity(p, branch)
}

pub fn gaussian_hamiltonian<T: Real>(
    model: &GaussianModel<T>,
    x: T,
    p: T,
    branch: GaussianBranch,
) -> Result<T> {
    model.hamiltonian(x, p, branch)
}

pub fn gaussian_cusps<T: Real>(model: &GaussianModel<T>, x: T) -> [(T, T); 3] {
    model.cusps(x)
}

pub fn family_momentum<T: Real>(model: &FamilyModel<T>, v: T) -> Result<T> {
    model.momentum(v)
}

pub fn family_velocity<T: Real>(model: &FamilyModel<T>, p: T, branch: FamilyBranch) -> Result<T> {
    model.velocity(p, branch)
}

pub fn family_hamiltonian<T: Real>(
    model: &FamilyModel<T>,
    x: T,
    p: T,
    branch: FamilyBranch,
) -> Result<T> {
    model.hamiltonian(x, p, branch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> GaussianModel<f64> {
        GaussianModel::new(1.0, 1.0, Potential::Zero).unwrap()
    }

    #[test]
    fn gaussian_momentum_examples() {
        let g = unit();
        assert_eq!(g.momentum(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((g.momentum(1.0) - (1.0 / e).sqrt()).abs() < 1e-15);
        assert!((g.momentum(-1.0) + (1.0 / e).sqrt()).abs() < 1e-15);
        assert!((g.momentum(2.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_velocity_at_branch_point() {
        let g = unit();
        let pb = g.momentum_bound();
        assert_eq!(g.velocity(0.0, GaussianBranch::Middle).unwrap(), 0.0);
        assert!((g.velocity(pb, GaussianBranch::Middle).unwrap() - 1.0).abs() < 1e-7);
        assert!((g.velocity(pb, GaussianBranch::Plus).unwrap() - 1.0).abs() < 1e-7);
        assert!((g.velocity(-pb, GaussianBranch::Minus).unwrap() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn gaussian_velocity_errors() {
        let g = unit();
        assert!(matches!(
            g.velocity(0.7, GaussianBranch::Middle),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            g.velocity(-0.1, GaussianBranch::Plus),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            g.velocity(0.1, GaussianBranch::Minus),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            g.velocity(0.0, GaussianBranch::Plus),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn gaussian_outer_cusp_limit() {
        let g = unit();
        assert_eq!(g.hamiltonian(0.0, 0.0, GaussianBranch::Plus).unwrap(), -1.0);
        let h = g.hamiltonian(0.0, 1e-12, GaussianBranch::Plus).unwrap();
        assert!((h + 1.0).abs() < 1e-9);
        assert_eq!(
            g.hamiltonian(0.0, 0.0, GaussianBranch::Middle).unwrap(),
            0.0
        );
    }

    #[test]
    fn gaussian_cusp_values() {
        let g = unit();
        let c = g.cusps(0.0);
        let e = std::f64::consts::E;
        assert!((c[0].0 + (1.0 / e).sqrt()).abs() < 1e-15);
        assert!((c[2].1 - (2.0 / e.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(c[1], (0.0, -1.0));
        let shifted = GaussianModel::new(
            1.0,
            1.0,
            Potential::HarmonicShifted {
                offset: 1.0,
                stiffness: 1.0,
            },
        )
        .unwrap();
        let c = shifted.cusps(0.0);
        assert!((c[0].1 - 2.0 / e.sqrt()).abs() < 1e-15);
        assert_eq!(c[1].1, 0.0);
    }

    #[test]
    fn family_examples() {
        let f = FamilyModel::<f64>::susy();
        let p0 = 4f64.powf(-2.0 / 3.0);
        assert!((f.constant() - 3.0 / 4f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((f.momentum(0.0).unwrap() - p0).abs() < 1e-15);
        assert!((f.momentum(2.0).unwrap() - p0).abs() < 1e-15);
        assert!(matches!(f.momentum(1.0), Err(Error::Singular { .. })));
        assert!((f.velocity(p0, FamilyBranch::HPlus).unwrap()).abs() < 1e-14);
        assert!((f.velocity(p0, FamilyBranch::HMinus).unwrap() - 2.0).abs() < 1e-14);
        assert!(
            (f.hamiltonian(0.0, p0, FamilyBranch::HPlus).unwrap() - f.constant()).abs() < 1e-14
        );
        assert!((f.hamiltonian(0.0, 1.0, FamilyBranch::HMinus).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.hamiltonian(0.0, 1.0, FamilyBranch::HPlus).unwrap() - 1.5).abs() < 1e-15);
        assert!(f.velocity(0.0, FamilyBranch::HPlus).is_err());
        assert!(f.hamiltonian(0.0, -1.0, FamilyBranch::HMinus).is_err());

        let k2 = FamilyModel::<f64>::new(2, Potential::Zero).unwrap();
        assert!((k2.velocity(1.0, FamilyBranch::HPlus).unwrap() - 0.75).abs() < 1e-15);
        assert!((k2.velocity(1.0, FamilyBranch::HMinus).unwrap() - 1.25).abs() < 1e-15);
        assert!(FamilyModel::<f64>::new(0, Potential::Zero).is_err());
    }

    #[test]
    fn family_large_momentum_cusp() {
        let f = FamilyModel::<f64>::susy();
        let p = 1e8;
        let vm = f.velocity(p, FamilyBranch::HMinus).unwrap();
        let vp = f.velocity(p, FamilyBranch::HPlus).unwrap();
        assert!((vm - 1.0).abs() < 1e-12 && (vp - 1.0).abs() < 1e-12);
        let hm = f.kinetic(p, FamilyBranch::HMinus).unwrap();
        assert!((hm / p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_turning_momentum_is_constant_over_three() {
        let f = FamilyModel::<f64>::susy();
        assert!((f.turning_momentum() - f.constant() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn susy_energy_examples() {
        let c = FamilyModel::<f64>::susy().constant();
        assert!((susy_energy(0.0, 0.0).unwrap() - c).abs() < 1e-15);
        assert!(susy_energy(0.0, 1.0 - 1e-9).unwrap() > 1e4);
        assert!(susy_energy(0.0, 1.0 + 1e-9).unwrap() > 1e4);
        assert!(matches!(
            susy_energy(0.0f64, 1.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn potential_consistency() {
        let pots = [
            Potential::Zero,
            Potential::Square,
            Potential::HarmonicShifted {
                offset: 1.0,
                stiffness: 0.7,
            },
            Potential::harmonic(2.0, 1.5, 0.3),
        ];
        for pot in pots {
            for &x in &[-1.3f64, 0.0, 0.4, 2.2] {
                let fd = (pot.value(x + 1e-5) - pot.value(x - 1e-5)) / 2e-5;
                assert!((fd - pot.derivative(x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn model_spec_rejects_foreign_branch() {
        let m = ModelSpec::<f64>::susy();
        assert!(m.is_susy());
        assert!(m.velocity(1.0, GaussianBranch::Middle.into()).is_err());
    }
}
