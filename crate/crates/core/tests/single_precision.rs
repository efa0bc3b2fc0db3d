use branched::classical::{classify_orbit, OrbitClass, Region};
use branched::deformation::{phi0, superpotential_w};
use branched::models::{GaussianModel, Potential};
use branched::quantum::{solve_eigenvalue, BoundaryCondition, PotentialProfile};
use branched::specfun::{lambert_w, WBranch};
use branched::{GaussianBranch, ModelSpec32};

#[test]
fn lambert_and_gaussian_in_f32() {
    let w = lambert_w(WBranch::Principal, 1.0f32).unwrap();
    assert!((w - 0.567_143_3).abs() < 1e-6);
    let g = GaussianModel::new(1.0f32, 1.0, Potential::Zero).unwrap();
    let h = g.hamiltonian(0.0, 0.01, GaussianBranch::Middle).unwrap();
    assert!((h - 0.5e-4).abs() < 1e-8);
}

#[test]
fn first_level_in_f32() {
    let sol = solve_eigenvalue(
        &PotentialProfile::<f32>::SusyMinus,
        BoundaryCondition::Dirichlet,
        (1.5, 2.2),
        1e-4,
    )
    .unwrap();
    assert!((sol.energy - 1.89379).abs() < 1e-3, "{}", sol.energy);
}

#[test]
fn classification_and_deformation_in_f32() {
    let susy = ModelSpec32::susy();
    assert_eq!(
        classify_orbit(&susy, 1.2f32, Region::VBelow1).unwrap(),
        OrbitClass::BoundedClosed
    );
    assert!((phi0(0.5f32, 0.0).unwrap() - 0.5).abs() < 1e-6);
    let w = superpotential_w(1.0f32, 25.0).unwrap();
    assert!((w / 5.0 + 1.0).abs() < 0.01);
}
