use std::time::Instant;

use anyhow::{Context, Result};
use branched::classical::{
    classify_orbit, energy_contour, integrate_branch_flow, ContourGrid, PhaseState, Region,
};
use branched::deformation::{hminus_nonnormalizable_check, robin_residual, DeformationProfile};
use branched::models::{FamilyModel, GaussianModel, ModelSpec};
use branched::quantum::{solve_eigenvalue_with, spectrum_with, EigenSolution, SolverOptions};
use branched::{BranchId, FamilyBranch, GaussianBranch};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    BranchesParams, ClassicalParams, Command, DeformParams, QuantumParams, Resolved, Task,
};
use crate::output::{Artifacts, Cell, FileEntry, Table};
use crate::svg::{render_svg, PlotStyle, Series, PALETTE};

#[derive(Debug, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub diagnostics: Value,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub config: Resolved,
    pub files: Vec<FileEntry>,
    pub wall_time_s: f64,
    pub tasks: Vec<TaskReport>,
}

pub fn run(cfg: Resolved) -> Result<RunReport> {
    let started = Instant::now();
    let mut art = Artifacts::default();
    let tasks = match &cfg.task {
        Task::Classical(p) => classical(&cfg.model, p, cfg.tol, &mut art)?,
        Task::Quantum(q) => quantum(q, cfg.tol, &mut art)?,
        Task::Deform(d) => deform(d, &mut art)?,
        Task::Branches(b) => branches(&cfg.model, b, &mut art)?,
    };
    let files = art.write(&cfg.output.directory, &cfg.output.formats)?;
    Ok(RunReport {
        command: cfg.command,
        config: cfg,
        files,
        wall_time_s: started.elapsed().as_secs_f64(),
        tasks,
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn short(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn color(custom: Option<&Vec<String>>, i: usize) -> String {
    custom
        .and_then(|c| c.get(i).cloned())
        .unwrap_or_else(|| PALETTE[i % PALETTE.len()].to_string())
}

fn branch_color(branch: BranchId) -> &'static str {
    match branch {
        BranchId::Gaussian(GaussianBranch::Minus) | BranchId::Family(FamilyBranch::HMinus) => {
            "blue"
        }
        BranchId::Gaussian(GaussianBranch::Middle) => "orange",
        BranchId::Gaussian(GaussianBranch::Plus) => "green",
        BranchId::Family(FamilyBranch::HPlus) => "red",
    }
}

fn regions(model: &ModelSpec<f64>) -> Vec<(String, Region)> {
    match model {
        ModelSpec::Gaussian(_) => [GaussianBranch::Middle, GaussianBranch::Plus]
            .into_iter()
            .map(|b| (BranchId::from(b).to_string(), Region::Branch(b)))
            .collect(),
        ModelSpec::Family(_) => vec![
            ("v_below_1".to_string(), Region::VBelow1),
            ("v_above_1".to_string(), Region::VAbove1),
        ],
    }
}

fn classical(
    model: &ModelSpec<f64>,
    params: &ClassicalParams,
    tol: f64,
    art: &mut Artifacts,
) -> Result<Vec<TaskReport>> {
    let mut reports = Vec::new();
    let mut portrait = Vec::new();
    for (i, &energy) in params.energies.iter().enumerate() {
        let ctx = || format!("classical energies[{i}] = {energy}");
        let mut table = Table::new(&["energy", "branch", "curve", "x", "p"]);
        let mut paths = Vec::new();
        let mut per_branch = serde_json::Map::new();
        for branch in model.branches() {
            let grid = ContourGrid::auto(model, energy, branch, params.grid_points);
            let lines = energy_contour(model, energy, branch, &grid).with_context(ctx)?;
            let label = branch.to_string();
            for (k, line) in lines.iter().enumerate() {
                for &(x, p) in &line.points {
                    table.push(&[
                        Cell::Num(energy),
                        Cell::Text(&label),
                        Cell::Int(k),
                        Cell::Num(x),
                        Cell::Num(p),
                    ]);
                }
                paths.push(line.points.clone());
            }
            per_branch.insert(
                label,
                json!({
                    "polylines": lines.len(),
                    "closed": lines.iter().filter(|l| l.closed).count(),
                }),
            );
        }
        let mut classes = serde_json::Map::new();
        for (name, region) in regions(model) {
            let v = match classify_orbit(model, energy, region) {
                Ok(c) => serde_json::to_value(c)?,
                Err(e) => Value::String(format!("none: {e}")),
            };
            classes.insert(name, v);
        }
        art.csv(format!("classical_contours_{i}.csv"), &table)?;
        portrait.push(Series::line(
            format!("E = {}", short(energy)),
            color(params.colors.as_ref(), i),
            paths,
        ));
        reports.push(TaskReport {
            task: format!("contours energies[{i}]"),
            diagnostics: json!({ "energy": energy, "branches": per_branch, "orbit_class": classes }),
        });
    }

    for (j, seed) in params.trajectories.iter().enumerate() {
        let ctx = || format!("classical trajectories[{j}]");
        let init =
            PhaseState::at_energy(model, seed.energy, seed.p, seed.branch).with_context(ctx)?;
        let traj = integrate_branch_flow(model, init, seed.t_max, tol).with_context(ctx)?;
        let mut table = Table::new(&["t", "x", "p", "branch", "v"]);
        for s in &traj.samples {
            let b = s.branch.to_string();
            table.push(&[
                Cell::Num(s.t),
                Cell::Num(s.x),
                Cell::Num(s.p),
                Cell::Text(&b),
                Cell::Num(s.v),
            ]);
        }
        art.csv(format!("classical_trajectory_{j}.csv"), &table)?;
        let v_jump = traj.events.iter().fold(0.0f64, |m, e| {
            let jump = (e.v_to - e.v_from).abs();
            if jump.is_finite() {
                m.max(jump)
            } else {
                m
            }
        });
        let termination = serde_json::to_value(traj.termination)?;
        reports.push(TaskReport {
            task: format!("trajectory {j}"),
            diagnostics: json!({
                "energy": seed.energy,
                "samples": traj.samples.len(),
                "switch_events": traj.events.len(),
                "relative_energy_drift": traj.relative_energy_drift(model),
                "max_velocity_jump": v_jump,
                "termination": termination,
            }),
        });
        portrait.push(Series::line(
            format!("trajectory {j}"),
            "gray",
            vec![traj.phase_curve()],
        ));
    }

    let summary: Vec<&Value> = reports.iter().map(|r| &r.diagnostics).collect();
    art.json("classical.json".into(), &summary)?;
    if let Ok(doc) = render_svg(&portrait, &PlotStyle::new("Phase portrait", "x", "p")) {
        art.svg("classical_portrait.svg".into(), doc);
    }
    Ok(reports)
}

#[derive(Serialize)]
struct LevelHeader<'a> {
    index: usize,
    energy: f64,
    profile: &'a branched::quantum::PotentialProfile<f64>,
    bc: &'a branched::quantum::BoundaryCondition<f64>,
    p_max: f64,
    grid_points: usize,
    norm: f64,
    diagnostics: &'a branched::quantum::EigenDiagnostics<f64>,
}

fn header(i: usize, s: &EigenSolution<f64>) -> LevelHeader<'_> {
    LevelHeader {
        index: i,
        energy: s.energy,
        profile: &s.profile,
        bc: &s.bc,
        p_max: s.p_max,
        grid_points: s.grid.len(),
        norm: s.norm,
        diagnostics: &s.diagnostics,
    }
}

fn quantum(q: &QuantumParams, tol_e: f64, art: &mut Artifacts) -> Result<Vec<TaskReport>> {
    let opts = SolverOptions {
        p_max: q.p_max,
        grid_points: q.grid_points,
        ..SolverOptions::default()
    };
    let levels = match (q.bracket, q.e_max) {
        (Some([lo, hi]), _) => {
            vec![
                solve_eigenvalue_with(&q.profile, q.bc, (lo, hi), tol_e, &opts)
                    .with_context(|| format!("quantum {} {} on [{lo}, {hi}]", q.profile, q.bc))?,
            ]
        }
        (None, Some(e_max)) => spectrum_with(&q.profile, q.bc, (-2.0, e_max), tol_e, &opts)
            .with_context(|| format!("quantum {} {} spectrum up to {e_max}", q.profile, q.bc))?,
        (None, None) => unreachable!("validation fills in a bracket"),
    };
    let mut series = Vec::new();
    let mut reports = Vec::new();
    let view = levels.iter().map(|s| s.energy).fold(0.0f64, f64::max) + 10.0;
    for (i, sol) in levels.iter().enumerate() {
        let mut table = Table::new(&["p", "psi", "dpsi"]);
        for ((p, v), d) in sol.grid.iter().zip(&sol.psi).zip(&sol.dpsi) {
            table.push(&[Cell::Num(*p), Cell::Num(*v), Cell::Num(*d)]);
        }
        art.csv(format!("quantum_level_{i}.csv"), &table)?;
        let pts = sol
            .grid
            .iter()
            .zip(&sol.psi)
            .filter(|(p, _)| **p <= view)
            .map(|(p, v)| (*p, *v))
            .collect();
        series.push(Series::line(
            format!("E = {:.6}", sol.energy),
            PALETTE[i % PALETTE.len()],
            vec![pts],
        ));
        reports.push(TaskReport {
            task: format!("level {i}"),
            diagnostics: serde_json::to_value(header(i, sol))?,
        });
    }
    let headers: Vec<LevelHeader<'_>> = levels
        .iter()
        .enumerate()
        .map(|(i, s)| header(i, s))
        .collect();
    art.json("quantum_spectrum.json".into(), &headers)?;
    if let Ok(doc) = render_svg(
        &series,
        &PlotStyle::new(&format!("{} ({})", q.profile, q.bc), "p", "psi"),
    ) {
        art.svg("quantum_levels.svg".into(), doc);
    }
    Ok(reports)
}

fn kappa_color(k: f64) -> &'static str {
    // fixed colors for κ = 1, 1/2, 1/4, 1/8 so plots compare across runs
    match k {
        1.0 => "red",
        0.5 => "blue",
        0.25 => "orange",
        0.125 => "green",
        0.0 => "black",
        _ => "gray",
    }
}

fn deform(d: &DeformParams, art: &mut Artifacts) -> Result<Vec<TaskReport>> {
    let mut reports = Vec::new();
    let mut profiles = Vec::new();
    for (i, &kappa) in d.kappas.iter().enumerate() {
        let ctx = || format!("deform kappas[{i}] = {kappa}");
        let prof = DeformationProfile::uniform(kappa, d.p_max, d.points).with_context(ctx)?;
        let mut table = Table::new(&["p", "w_kappa", "phi0", "U_kappa"]);
        for j in 0..prof.p.len() {
            table.push(&[
                Cell::Num(prof.p[j]),
                Cell::Num(prof.w[j]),
                Cell::Num(prof.phi0[j]),
                Cell::Num(prof.potential[j]),
            ]);
        }
        art.csv(format!("deform_kappa_{i}.csv"), &table)?;
        let robin = if kappa > 0.0 {
            Some(robin_residual(kappa).with_context(ctx)?)
        } else {
            None
        };
        let diverges = hminus_nonnormalizable_check(kappa, d.p_max.max(20.0)).with_context(ctx)?;
        reports.push(TaskReport {
            task: format!("kappa {i}"),
            diagnostics: json!({
                "kappa": kappa,
                "riccati_max": prof.riccati_max,
                "zero_mode": prof.zero_mode,
                "robin_residual": robin,
                "hminus_nonnormalizable": diverges,
            }),
        });
        profiles.push(prof);
    }
    let summary: Vec<&Value> = reports.iter().map(|r| &r.diagnostics).collect();
    art.json("deform.json".into(), &summary)?;

    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| profiles[b].kappa.total_cmp(&profiles[a].kappa));
    let label = |k: f64| format!("kappa = {}", short(k));
    let phi: Vec<Series> = order
        .iter()
        .map(|&i| &profiles[i])
        .filter(|p| p.kappa > 0.0)
        .map(|p| {
            Series::line(
                label(p.kappa),
                kappa_color(p.kappa),
                vec![p.p.iter().copied().zip(p.phi0.iter().copied()).collect()],
            )
        })
        .collect();
    if let Ok(doc) = render_svg(&phi, &PlotStyle::new("Zero modes", "p", "phi0")) {
        art.svg("deform_phi0.svg".into(), doc);
    }
    let mut w: Vec<Series> = order
        .iter()
        .map(|&i| &profiles[i])
        .map(|p| {
            Series::line(
                label(p.kappa),
                kappa_color(p.kappa),
                vec![p.p.iter().copied().zip(p.w.iter().copied()).collect()],
            )
        })
        .collect();
    if !profiles.iter().any(|p| p.kappa == 0.0) {
        let grid = linspace(d.p_max / d.points as f64, d.p_max, d.points);
        w.push(Series::line(
            "kappa = 0",
            "black",
            vec![grid.iter().map(|&p| (p, p.sqrt())).collect()],
        ));
    }
    if let Ok(doc) = render_svg(&w, &PlotStyle::new("Superpotentials", "p", "w")) {
        art.svg("deform_w.svg".into(), doc);
    }
    Ok(reports)
}

fn branches(
    model: &ModelSpec<f64>,
    b: &BranchesParams,
    art: &mut Artifacts,
) -> Result<Vec<TaskReport>> {
    match model {
        ModelSpec::Gaussian(g) => gaussian_branches(g, b, art),
        ModelSpec::Family(f) => family_branches(f, b, art),
    }
}

fn gaussian_branches(
    g: &GaussianModel<f64>,
    b: &BranchesParams,
    art: &mut Artifacts,
) -> Result<Vec<TaskReport>> {
    let pb = g.momentum_bound();
    let unit_p = (g.mass * g.scale).sqrt();
    let v0 = g.potential.value(0.0);
    let mut table = Table::new(&["branch", "p", "z", "h", "h_over_c"]);
    let mut series = Vec::new();
    for branch in [
        GaussianBranch::Minus,
        GaussianBranch::Middle,
        GaussianBranch::Plus,
    ] {
        let (lo, hi) = match branch {
            GaussianBranch::Minus => (-pb, 0.0),
            GaussianBranch::Middle => (-pb, pb),
            GaussianBranch::Plus => (0.0, pb),
        };
        let id = BranchId::from(branch);
        let name = id.to_string();
        let mut pts = Vec::with_capacity(b.points);
        for p in linspace(lo, hi, b.points) {
            let h = g
                .hamiltonian(0.0, p, branch)
                .with_context(|| format!("branch {name} at p = {p}"))?;
            table.push(&[
                Cell::Text(&name),
                Cell::Num(p),
                Cell::Num(p / unit_p),
                Cell::Num(h),
                Cell::Num(h / g.scale),
            ]);
            pts.push((p / unit_p, h / g.scale));
        }
        series.push(Series::line(name, branch_color(id), vec![pts]));
    }
    let cusps = g.cusps(0.0);
    series.push(Series::dots(
        "cusps",
        "black",
        cusps
            .iter()
            .map(|&(p, h)| (p / unit_p, h / g.scale))
            .collect(),
    ));
    art.csv("branches_hamiltonian.csv".into(), &table)?;
    art.svg(
        "branches_hamiltonian.svg".into(),
        render_svg(
            &series,
            &PlotStyle::new("Hamiltonian branches at x = 0", "p/sqrt(mC)", "H/C"),
        )?,
    );

    let vmax = b.v_range * g.cusp_velocity();
    let mut fedora = Table::new(&["v", "z", "p", "energy", "fedora"]);
    let mut pts = Vec::with_capacity(b.points);
    for v in linspace(-vmax, vmax, b.points) {
        let p = g.momentum(v);
        let energy = p * v - g.lagrangian(0.0, v);
        let shape = (energy - v0 + g.scale) / g.scale;
        let z = v / g.cusp_velocity();
        fedora.push(&[
            Cell::Num(v),
            Cell::Num(z),
            Cell::Num(p),
            Cell::Num(energy),
            Cell::Num(shape),
        ]);
        pts.push((z, shape));
    }
    art.csv("branches_kinetic.csv".into(), &fedora)?;
    art.svg(
        "branches_kinetic.svg".into(),
        render_svg(
            &[Series::line("(1 + z^2) exp(-z^2/2)", "black", vec![pts])],
            &PlotStyle::new("Kinetic energy", "z = v sqrt(m/C)", "kinetic / C"),
        )?,
    );
    let diag = json!({
        "model": "gaussian",
        "momentum_bound": pb,
        "cusps": cusps.iter().map(|&(p, h)| json!({"p": p, "h": h})).collect::<Vec<_>>(),
    });
    art.json("branches.json".into(), &diag)?;
    Ok(vec![TaskReport {
        task: "branches".into(),
        diagnostics: diag,
    }])
}

fn family_branches(
    f: &FamilyModel<f64>,
    b: &BranchesParams,
    art: &mut Artifacts,
) -> Result<Vec<TaskReport>> {
    let [lo, hi] = b.p_range;
    let mut table = Table::new(&["branch", "p", "h"]);
    let mut series = Vec::new();
    for branch in [FamilyBranch::HMinus, FamilyBranch::HPlus] {
        let id = BranchId::from(branch);
        let name = id.to_string();
        let mut pts = Vec::with_capacity(b.points);
        for p in linspace(lo, hi, b.points) {
            let h = f
                .hamiltonian(0.0, p, branch)
                .with_context(|| format!("branch {name} at p = {p}"))?;
            table.push(&[Cell::Text(&name), Cell::Num(p), Cell::Num(h)]);
            pts.push((p, h));
        }
        series.push(Series::line(name, branch_color(id), vec![pts]));
    }
    art.csv("branches_hamiltonian.csv".into(), &table)?;
    art.svg(
        "branches_hamiltonian.svg".into(),
        render_svg(
            &series,
            &PlotStyle::new("Hamiltonian branches at x = 0", "p", "H"),
        )?,
    );

    let mut kin = Table::new(&["v", "p", "energy"]);
    let mut below = Vec::new();
    let mut above = Vec::new();
    for v in linspace(1.0 - b.v_range, 1.0 + b.v_range, b.points) {
        let Ok(p) = f.momentum(v) else { continue };
        let energy = p * v - f.lagrangian(0.0, v);
        kin.push(&[Cell::Num(v), Cell::Num(p), Cell::Num(energy)]);
        if v < 1.0 {
            below.push((v, energy));
        } else {
            above.push((v, energy));
        }
    }
    art.csv("branches_kinetic.csv".into(), &kin)?;
    // the energy diverges at v = 1; keep the plot window on the finite part
    let cap = 3.0
        * [below.first(), above.last()]
            .into_iter()
            .flatten()
            .fold(f.constant(), |m, &(_, e)| m.max(e.abs()));
    for part in [&mut below, &mut above] {
        part.retain(|&(_, e)| e.abs() <= cap);
    }
    art.svg(
        "branches_kinetic.svg".into(),
        render_svg(
            &[Series::line("E(0, v)", "black", vec![below, above])],
            &PlotStyle::new("Energy at x = 0", "v", "E"),
        )?,
    );
    let diag = json!({
        "model": "family",
        "k": f.k,
        "constant": f.constant(),
        "turning_momentum": f.turning_momentum(),
    });
    art.json("branches.json".into(), &diag)?;
    Ok(vec![TaskReport {
        task: "branches".into(),
        diagnostics: diag,
    }])
}
