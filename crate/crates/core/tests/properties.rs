use branched::classical::{integrate_branch_flow, integrate_lagrangian_flow, PhaseState};
use branched::contour::marching_squares;
use branched::deformation::{phi0, riccati_residual, superpotential_w, superpotential_w_prime};
use branched::models::{FamilyModel, GaussianModel, ModelSpec, Potential};
use branched::quantum::{simpson, BoundaryCondition};
use branched::specfun::{lambert_w, quad, scaled_g, WBranch};
use branched::{BranchId, FamilyBranch, GaussianBranch};
use proptest::prelude::*;

fn unit_gaussian() -> GaussianModel<f64> {
    GaussianModel::new(1.0, 1.0, Potential::Zero).unwrap()
}

proptest! {
    #[test]
    fn lambert_inverts_w_exp_w(x in -0.367_879_441_171_442_3f64..50.0) {
        let w = lambert_w(WBranch::Principal, x).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs().max(1e-3));
        if x < 0.0 {
            let w = lambert_w(WBranch::Lower, x).unwrap();
            prop_assert!(w <= -1.0);
            prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn gaussian_velocity_inverts_momentum(frac in -0.999f64..0.999, mass in 0.2f64..5.0, scale in 0.2f64..5.0) {
        let g = GaussianModel::new(mass, scale, Potential::Zero).unwrap();
        let p = frac * g.momentum_bound();
        let mut branches = vec![GaussianBranch::Middle];
        if p > 0.0 { branches.push(GaussianBranch::Plus) } else if p < 0.0 { branches.push(GaussianBranch::Minus) }
        for b in branches {
            let v = g.velocity(p, b).unwrap();
            prop_assert!((g.momentum(v) - p).abs() <= 1e-10 * g.momentum_bound(), "{b:?} p={p} v={v}");
        }
    }

    #[test]
    fn gaussian_hamiltonian_symmetry(frac in 0.0f64..0.999) {
        let g = unit_gaussian();
        let p = frac * g.momentum_bound();
        let mid = |p| g.hamiltonian(0.0, p, GaussianBranch::Middle).unwrap();
        prop_assert!((mid(p) - mid(-p)).abs() < 1e-14);
        if p > 0.0 {
            let plus = g.hamiltonian(0.0, p, GaussianBranch::Plus).unwrap();
            let minus = g.hamiltonian(0.0, -p, GaussianBranch::Minus).unwrap();
            prop_assert!((plus - minus).abs() < 1e-14);
            // outer branches lie below the middle one away from the outer cusps
            prop_assert!(plus <= mid(p) + 1e-12);
        }
    }

    #[test]
    fn hamilton_equation_dh_dp_is_velocity(frac in 0.05f64..0.95) {
        let g = unit_gaussian();
        let p = frac * g.momentum_bound();
        let h = 1e-6;
        for b in [GaussianBranch::Middle, GaussianBranch::Plus] {
            let dh = (g.hamiltonian(0.0, p + h, b).unwrap() - g.hamiltonian(0.0, p - h, b).unwrap()) / (2.0 * h);
            let v = g.velocity(p, b).unwrap();
            prop_assert!((dh - v).abs() < 1e-6 * v.abs().max(1.0), "{b:?}: {dh} vs {v}");
        }
    }

    #[test]
    fn family_velocity_inverts_momentum(k in 1u32..4, p in 0.01f64..20.0) {
        let f = FamilyModel::new(k, Potential::Square).unwrap();
        for b in [FamilyBranch::HMinus, FamilyBranch::HPlus] {
            let Ok(v) = f.velocity(p, b) else { continue };
            prop_assert!((f.momentum(v).unwrap() - p).abs() <= 1e-9 * p.max(1.0), "{b:?} p={p} v={v}");
            prop_assert_eq!(v > 1.0, b == FamilyBranch::HMinus);
        }
    }

    #[test]
    fn scaled_g_matches_direct_quadrature(p in 0.0f64..4.0) {
        let z = 4.0 * p.powf(1.5) / 3.0;
        let direct = (-z).exp() * quad(|s: f64| (4.0 * s.powf(1.5) / 3.0).exp(), 0.0, p, 1e-13).unwrap();
        let g = scaled_g(p, 1e-14).unwrap();
        prop_assert!((g - direct).abs() <= 1e-11 * direct.max(1e-3), "{g} vs {direct}");
    }

    #[test]
    fn riccati_holds_for_any_kappa(kappa in 0.01f64..8.0, p in 0.05f64..25.0) {
        prop_assert!(riccati_residual(kappa, p).unwrap().abs() < 1e-7);
    }

    #[test]
    fn zero_mode_is_positive_and_annihilated(kappa in 0.05f64..5.0, p in 0.05f64..8.0) {
        let f = phi0(kappa, p).unwrap();
        prop_assert!(f > 0.0);
        // φ₀' = w φ₀
        let h = 1e-5 * p.max(1.0);
        let d = (phi0(kappa, p + h).unwrap() - phi0(kappa, p - h).unwrap()) / (2.0 * h);
        let w = superpotential_w(kappa, p).unwrap();
        prop_assert!((d - w * f).abs() < 1e-6 * f.max(1e-3), "{d} vs {}", w * f);
    }

    #[test]
    fn deformation_vanishes_at_zero_kappa(p in 0.01f64..30.0) {
        prop_assert!((superpotential_w(0.0, p).unwrap() - p.sqrt()).abs() < 1e-14 * p.sqrt().max(1.0));
        prop_assert!((superpotential_w_prime(0.0, p).unwrap() - 0.5 / p.sqrt()).abs() < 1e-12 / p.sqrt());
    }

    #[test]
    fn boundary_values_satisfy_their_condition(kappa in -5.0f64..5.0) {
        let bc = BoundaryCondition::Robin { kappa };
        let (psi, dpsi) = bc.initial_values();
        prop_assert!((kappa * psi + dpsi).abs() < 1e-15);
        let (psi, _) = BoundaryCondition::<f64>::Dirichlet.initial_values();
        prop_assert_eq!(psi, 0.0);
        let (_, dpsi) = BoundaryCondition::<f64>::Neumann.initial_values();
        prop_assert_eq!(dpsi, 0.0);
    }

    #[test]
    fn marching_squares_traces_circles(r in 0.3f64..0.9, n in 20usize..80) {
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let f: Vec<f64> = xs.iter().flat_map(|&y| xs.iter().map(move |&x| x * x + y * y)).collect();
        let lines = marching_squares(&xs, &xs, &f, r * r);
        prop_assert_eq!(lines.len(), 1);
        prop_assert!(lines[0].closed);
        let h = 2.0 / (n - 1) as f64;
        for &(x, y) in &lines[0].points {
            prop_assert!(((x * x + y * y).sqrt() - r).abs() < h * h);
        }
    }
}

#[test]
fn simpson_is_exact_for_cubics() {
    let n = 11;
    let h = 0.1;
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * h;
            2.0 * x * x * x - x + 1.0
        })
        .collect();
    assert!((simpson(h, &f) - (0.5 - 0.5 + 1.0)).abs() < 1e-14);
}

fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |a: &[(f64, f64)], b: &[(f64, f64)]| {
        a.iter()
            .map(|p| {
                b.iter()
                    .map(|q| (p.0 - q.0).hypot(p.1 - q.1))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[test]
fn lagrangian_orbit_is_the_hplus_orbit() {
    let model = ModelSpec::Family(FamilyModel::susy());
    let f = FamilyModel::<f64>::susy();
    let init =
        PhaseState::at_energy(&model, 1.2, 0.45, BranchId::Family(FamilyBranch::HPlus)).unwrap();
    assert!(init.v < 1.0);
    let period_ish = 12.0;
    let lag = integrate_lagrangian_flow((init.x, init.v), period_ish, 1e-11).unwrap();
    let ham = integrate_branch_flow(&model, init, period_ish, 1e-11).unwrap();
    let lag_xp: Vec<(f64, f64)> = lag
        .samples
        .iter()
        .map(|s| (s.x, f.momentum(s.v).unwrap()))
        .collect();
    for &(x, p) in &lag_xp {
        let e = f.hamiltonian(x, p, FamilyBranch::HPlus).unwrap();
        assert!((e - 1.2).abs() < 1e-7, "H = {e} at ({x}, {p})");
    }
    let d = hausdorff(&lag_xp, &ham.phase_curve());
    // limited by the sample spacing of the two curves
    assert!(d < 5e-3, "Hausdorff distance {d}");
}

#[test]
fn uniform_solution_stays_uniform() {
    let traj = integrate_lagrangian_flow((-0.4f64, 1.0), 10.0, 1e-12).unwrap();
    for s in &traj.samples {
        assert!((s.v - 1.0).abs() < 1e-12);
        assert!((s.x - (-0.4 + s.t)).abs() < 1e-9);
    }
}

fn segments_cross(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64))) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let (a0, a1) = a;
    let (b0, b1) = b;
    orient(a0, a1, b0) * orient(a0, a1, b1) < 0.0 && orient(b0, b1, a0) * orient(b0, b1, a1) < 0.0
}

#[test]
fn trajectories_of_different_energies_cross() {
    let model = ModelSpec::Gaussian(
        GaussianModel::new(
            1.0,
            1.0,
            Potential::HarmonicShifted {
                offset: 1.0,
                stiffness: 1.0,
            },
        )
        .unwrap(),
    );
    let run = |e: f64| {
        let init = PhaseState::at_energy(&model, e, 0.0, GaussianBranch::Middle.into()).unwrap();
        integrate_branch_flow(&model, init, 20.0, 1e-10)
            .unwrap()
            .samples
    };
    let (low, high) = (run(1.5), run(2.0));
    let mut crossings = 0;
    for a in low.windows(2) {
        for b in high.windows(2) {
            let sa = ((a[0].x, a[0].p), (a[1].x, a[1].p));
            let sb = ((b[0].x, b[0].p), (b[1].x, b[1].p));
            if segments_cross(sa, sb) {
                crossings += 1;
                // the curves cross in (x, p) on different branches
                assert!(a[0].branch != b[0].branch || a[1].branch != b[1].branch);
            }
        }
    }
    assert!(crossings > 0);
}
