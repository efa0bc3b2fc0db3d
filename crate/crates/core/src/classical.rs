//! Classical motion on branched Hamiltonians: per-branch flows in `(x, p)`
//! with cusp switching, the Euler–Lagrange flow of the supersymmetric model
//! in `(x, v)`, orbit classification and energy contours.

use serde::{Deserialize, Serialize};

use crate::contour::{marching_squares, Polyline};
use crate::error::{Error, Result};
use crate::models::{susy_energy, BranchId, FamilyBranch, FamilyModel, GaussianBranch, ModelSpec};
use crate::ode::{Dopri5, OdeOptions, StepData};
use crate::scalar::{odd_root, Real};

/// One sample of a phase-space trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState<T> {
    pub t: T,
    pub x: T,
    pub p: T,
    pub branch: BranchId,
    /// Branch velocity `v(p, branch)`. Infinite at the `p = 0` gaussian cusp.
    pub v: T,
}

impl<T: Real> PhaseState<T> {
    /// State at `(x, p)` on `branch`; fails if the branch does not admit `p`.
    pub fn new(model: &ModelSpec<T>, t: T, x: T, p: T, branch: BranchId) -> Result<Self> {
        let v = model.velocity(p, branch)?;
        Ok(Self { t, x, p, branch, v })
    }

    /// State with `x ≥ 0` on the energy surface `H(x, p, branch) = energy`.
    pub fn at_energy(model: &ModelSpec<T>, energy: T, p: T, branch: BranchId) -> Result<Self> {
        let kin = model.kinetic(p, branch)?;
        let pot = model.potential();
        let x = pot.abs_position_at(energy - kin).ok_or(Error::NoOrbit {
            energy: energy.as_f64(),
            threshold: (kin + pot.quadratic_coefficients().0).as_f64(),
        })?;
        Self::new(model, T::zero(), x, p, branch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent<T> {
    pub t: T,
    pub x: T,
    pub p_at_switch: T,
    pub from_branch: BranchId,
    pub to_branch: BranchId,
    /// Branch velocities on either side of the cusp.
    pub v_from: T,
    pub v_to: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination<T> {
    TimeLimit,
    /// The escape bound was crossed at `t_escape`, a lower bound for the blow-up time.
    EscapeToInfinity {
        t_escape: T,
    },
    /// The flow left the branch domain without reaching a cusp.
    SingularPoint {
        t: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub samples: Vec<PhaseState<T>>,
    pub events: Vec<SwitchEvent<T>>,
    pub termination: Termination<T>,
}

impl<T: Real> Trajectory<T> {
    /// `H(x, p, branch)` at every sample.
    pub fn energies(&self, model: &ModelSpec<T>) -> Vec<T> {
        self.samples
            .iter()
            .map(|s| model.hamiltonian(s.x, s.p, s.branch).unwrap_or(T::nan()))
            .collect()
    }

    /// `max |H(t) - H(0)| / max(1, |H(0)|)`.
    pub fn relative_energy_drift(&self, model: &ModelSpec<T>) -> T {
        drift(&self.energies(model))
    }

    /// Drift of the `(x, v)` energy of the supersymmetric model.
    pub fn lagrangian_energy_drift(&self) -> T {
        let e: Vec<T> = self
            .samples
            .iter()
            .map(|s| susy_energy(s.x, s.v).unwrap_or(T::nan()))
            .collect();
        drift(&e)
    }

    /// The `(x, p)` polyline.
    pub fn phase_curve(&self) -> Vec<(T, T)> {
        self.samples.iter().map(|s| (s.x, s.p)).collect()
    }
}

fn drift<T: Real>(e: &[T]) -> T {
    let Some(&e0) = e.first() else {
        return T::zero();
    };
    let scale = e0.abs().max(T::one());
    e.iter()
        .fold(T::zero(), |m, &v| m.max((v - e0).abs() / scale))
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions<T> {
    /// Terminate once `|x|` or `|v|` exceeds this bound.
    pub escape_bound: T,
    pub h_max: T,
    pub max_steps: usize,
}

impl<T: Real> Default for FlowOptions<T> {
    fn default() -> Self {
        Self {
            escape_bound: T::lit(1e6),
            h_max: T::infinity(),
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    CuspHigh,
    CuspLow,
    ZeroCusp,
    EscapeX,
    EscapeV,
}

/// Event function `g`, positive inside the admissible region. A step that
/// drives `g` negative triggers the event, which is then located where
/// `g = gap`. Cusp events are affine in `p` (`dgdp`) and get polished on
/// true steps.
#[derive(Debug, Clone, Copy)]
struct EventValue<T> {
    kind: EventKind,
    g: T,
    gap: T,
    dgdp: Option<T>,
}

trait Flow<T: Real> {
    fn rhs(&self, y: &[T; 2]) -> [T; 2];
    fn events(&self, y: &[T; 2]) -> Vec<EventValue<T>>;
    fn sample(&self, t: T, y: &[T; 2]) -> PhaseState<T>;
    /// `None` when the cusp is not reachable on the current level set.
    fn switch(&mut self, kind: EventKind, t: T, y: [T; 2]) -> Result<Option<Crossing<T>>>;
}

/// Result of a cusp switch: the state on the cusp and where integration resumes.
struct Crossing<T> {
    event: SwitchEvent<T>,
    at_cusp: [T; 2],
    resume_t: T,
    resume: [T; 2],
}

struct BranchFlow<'a, T> {
    model: &'a ModelSpec<T>,
    branch: BranchId,
    // +1 while the branch is followed forward in its own time, -1 after a bounce
    sense: T,
    escape: T,
    p_cusp: T,
    p_floor: T,
    p_escape: T,
    // momentum distance from a cusp at which the local bridge takes over
    gap: T,
}

impl<'a, T: Real> BranchFlow<'a, T> {
    fn new(model: &'a ModelSpec<T>, branch: BranchId, escape: T) -> Self {
        let floor = T::epsilon() * T::epsilon();
        let (p_cusp, p_floor, p_escape) = match model {
            ModelSpec::Gaussian(g) => {
                let pb = g.momentum_bound();
                (pb, pb * floor, T::zero())
            }
            ModelSpec::Family(f) => {
                let two = T::lit(2.0);
                let n = two * T::from_u32(f.k).unwrap() + T::one();
                (T::infinity(), floor, (T::lit(4.0) * escape).powf(-two / n))
            }
        };
        Self {
            model,
            branch,
            sense: T::one(),
            escape,
            p_cusp,
            p_floor,
            p_escape,
            gap: p_cusp * CUSP_GAP.with(T::lit),
        }
    }

    fn clamp(&self, p: T) -> T {
        let pb = self.p_cusp;
        match self.branch {
            BranchId::Gaussian(GaussianBranch::Middle) => p.max(-pb).min(pb),
            BranchId::Gaussian(GaussianBranch::Plus) => p.max(self.p_floor).min(pb),
            BranchId::Gaussian(GaussianBranch::Minus) => p.min(-self.p_floor).max(-pb),
            BranchId::Family(_) => p.max(self.p_floor),
        }
    }

    fn velocity_limit(&self, p: T) -> T {
        match self.model.velocity(p, self.branch) {
            Ok(v) => v,
            Err(Error::Singular { .. }) => match self.branch {
                BranchId::Gaussian(GaussianBranch::Minus) => T::neg_infinity(),
                _ => T::infinity(),
            },
            Err(_) => T::nan(),
        }
    }

    /// Position on the side of `x_side` where `V = level`, if any.
    fn position_at(&self, level: T, x_side: T) -> Option<T> {
        let r = self.model.potential().abs_position_at(level)?;
        Some(if x_side < T::zero() { -r } else { r })
    }
}

// Relative momentum gap (in units of the cusp momentum) bridged analytically.
struct CuspGap;

impl CuspGap {
    fn with<T>(&self, f: impl Fn(f64) -> T) -> T {
        f(1e-4)
    }
}

const CUSP_GAP: CuspGap = CuspGap;

impl<T: Real> Flow<T> for BranchFlow<'_, T> {
    fn rhs(&self, y: &[T; 2]) -> [T; 2] {
        let v = self
            .model
            .velocity(self.clamp(y[1]), self.branch)
            .unwrap_or(T::nan());
        [
            self.sense * v,
            -self.sense * self.model.potential().derivative(y[0]),
        ]
    }

    fn events(&self, y: &[T; 2]) -> Vec<EventValue<T>> {
        let p = y[1];
        let pb = self.p_cusp;
        let gap = self.gap;
        let cusp = |kind, g, s| EventValue {
            kind,
            g,
            gap,
            dgdp: Some(s),
        };
        let mut out = vec![EventValue {
            kind: EventKind::EscapeX,
            g: self.escape - y[0].abs(),
            gap: T::zero(),
            dgdp: None,
        }];
        match self.branch {
            BranchId::Gaussian(GaussianBranch::Middle) => {
                out.push(cusp(EventKind::CuspHigh, pb - p, -T::one()));
                out.push(cusp(EventKind::CuspLow, p + pb, T::one()));
            }
            BranchId::Gaussian(GaussianBranch::Plus) => {
                out.push(cusp(EventKind::CuspHigh, pb - p, -T::one()));
                out.push(cusp(EventKind::ZeroCusp, p, T::one()));
            }
            BranchId::Gaussian(GaussianBranch::Minus) => {
                out.push(cusp(EventKind::CuspLow, p + pb, T::one()));
                out.push(cusp(EventKind::ZeroCusp, -p, -T::one()));
            }
            BranchId::Family(_) => out.push(EventValue {
                kind: EventKind::EscapeV,
                g: p - self.p_escape,
                gap: T::zero(),
                dgdp: None,
            }),
        }
        out
    }

    fn sample(&self, t: T, y: &[T; 2]) -> PhaseState<T> {
        PhaseState {
            t,
            x: y[0],
            p: y[1],
            branch: self.branch,
            v: self.velocity_limit(y[1]),
        }
    }

    fn switch(&mut self, kind: EventKind, t: T, y: [T; 2]) -> Result<Option<Crossing<T>>> {
        use GaussianBranch::*;
        let from = self.branch;
        let (to, flip) = match (from, kind) {
            (BranchId::Gaussian(Middle), EventKind::CuspHigh) => (Plus, true),
            (BranchId::Gaussian(Middle), EventKind::CuspLow) => (Minus, true),
            (BranchId::Gaussian(Plus), EventKind::CuspHigh) => (Middle, true),
            (BranchId::Gaussian(Minus), EventKind::CuspLow) => (Middle, true),
            (BranchId::Gaussian(Plus), EventKind::ZeroCusp) => (Minus, false),
            (BranchId::Gaussian(Minus), EventKind::ZeroCusp) => (Plus, false),
            _ => {
                return Err(Error::Invalid(format!(
                    "no cusp rule for {from} at {kind:?}"
                )))
            }
        };
        let to: BranchId = to.into();
        let p_c = match kind {
            EventKind::CuspHigh => self.p_cusp,
            EventKind::CuspLow => -self.p_cusp,
            _ => T::zero(),
        };
        let pot = *self.model.potential();
        let (x0, p0) = (y[0], y[1]);
        let level = pot.value(x0) + self.model.kinetic(p0, from)?;

        // Local solution through the cusp on the level set H = E. The outer
        // pair is mirror symmetric, (x, p) -> (x, -p); the middle/outer bounce
        // retraces the same momentum on the new branch.
        let Some(x_c) = self.position_at(level - self.model.kinetic(p_c, from)?, x0) else {
            return Ok(None);
        };
        let (x1, p1) = if kind == EventKind::ZeroCusp {
            (x0, -p0)
        } else {
            match self.position_at(level - self.model.kinetic(p0, to)?, x0) {
                Some(x1) => (x1, p0),
                None => return Ok(None),
            }
        };
        let rate = |a: T, b: T| pot.derivative(T::lit(0.5) * (a + b)).abs();
        let (r1, r2) = (rate(x0, x_c), rate(x_c, x1));
        if !(r1 > T::zero()) || !(r2 > T::zero()) {
            return Err(Error::Singular {
                what: "no force at the cusp",
                value: x_c.as_f64(),
            });
        }
        let tau1 = (p_c - p0).abs() / r1;
        let tau2 = (p1 - p_c).abs() / r2;

        let v_from = self.velocity_limit(p_c);
        self.branch = to;
        if flip {
            self.sense = -self.sense;
        }
        let v_to = self.velocity_limit(p_c);
        Ok(Some(Crossing {
            event: SwitchEvent {
                t: t + tau1,
                x: x_c,
                p_at_switch: p_c,
                from_branch: from,
                to_branch: to,
                v_from,
                v_to,
            },
            at_cusp: [x_c, p_c],
            resume_t: t + tau1 + tau2,
            resume: [x1, p1],
        }))
    }
}

/// Euler–Lagrange flow of the supersymmetric model in `(x, v)`.
struct LagrangeFlow<T> {
    force: T,
    escape: T,
    model: FamilyModel<T>,
}

impl<T: Real> Flow<T> for LagrangeFlow<T> {
    fn rhs(&self, y: &[T; 2]) -> [T; 2] {
        let d = odd_root(y[1] - T::one(), 3);
        [y[1], self.force * y[0] * d.powi(5)]
    }

    fn events(&self, y: &[T; 2]) -> Vec<EventValue<T>> {
        let bound = |kind, g| EventValue {
            kind,
            g,
            gap: T::zero(),
            dgdp: None,
        };
        vec![
            bound(EventKind::EscapeX, self.escape - y[0].abs()),
            bound(EventKind::EscapeV, self.escape - y[1].abs()),
        ]
    }

    fn sample(&self, t: T, y: &[T; 2]) -> PhaseState<T> {
        let (x, v) = (y[0], y[1]);
        let branch = if v < T::one() {
            FamilyBranch::HPlus
        } else {
            FamilyBranch::HMinus
        };
        PhaseState {
            t,
            x,
            p: self.model.momentum(v).unwrap_or(T::infinity()),
            branch: branch.into(),
            v,
        }
    }

    fn switch(&mut self, kind: EventKind, _t: T, _y: [T; 2]) -> Result<Option<Crossing<T>>> {
        Err(Error::Invalid(format!(
            "lagrangian flow has no cusp event {kind:?}"
        )))
    }
}

fn locate_root<T: Real, const N: usize>(
    step: &StepData<T, N>,
    g: impl Fn(&[T; N]) -> T,
    g0: T,
    g1: T,
) -> T {
    // Illinois false position on the dense output
    let (mut a, mut b) = (step.t0, step.t1());
    let (mut fa, mut fb) = (g0, g1);
    let mut side = 0i8;
    let tol = T::lit(4.0) * T::epsilon() * (T::one() + a.abs().max(b.abs()));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = T::lit(0.5) * (a + b);
        }
        let fc = g(&step.dense(c));
        if fc == T::zero() {
            return c;
        }
        if (fc > T::zero()) == (fa > T::zero()) {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb * T::lit(0.5);
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa * T::lit(0.5);
            }
            side = -1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

fn event_value<T: Real, F: Flow<T>>(flow: &F, kind: EventKind, y: &[T; 2]) -> T {
    flow.events(y)
        .iter()
        .find(|e| e.kind == kind)
        .map_or(T::nan(), |e| e.g - e.gap)
}

fn drive<T: Real, F: Flow<T>>(
    flow: &mut F,
    t0: T,
    y0: [T; 2],
    t_max: T,
    tol: T,
    opts: &FlowOptions<T>,
) -> Result<Trajectory<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    // local error target two orders below the requested energy accuracy
    let ode_opts = OdeOptions::new(tol * T::lit(0.01)).with_h_max(opts.h_max);
    let mut stepper = Dopri5::<T, 2>::new(ode_opts);
    let mut samples = vec![flow.sample(t0, &y0)];
    let mut events = Vec::new();
    let (mut t, mut y) = (t0, y0);
    let mut h = stepper.initial_step(&mut |_, y: &[T; 2]| flow.rhs(y), t, &y, T::one());
    let mut termination = Termination::TimeLimit;
    let mut steps = 0usize;
    // cusp event skipped after a near miss, until the orbit leaves the gap zone
    let mut suppressed: Option<EventKind> = None;

    while t < t_max {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NoConvergence {
                what: "trajectory step budget",
                iterations: opts.max_steps,
            });
        }
        let trial = h.min(t_max - t);
        let (step, h_next) = stepper.step(&mut |_, y: &[T; 2]| flow.rhs(y), t, &y, trial)?;
        let before = flow.events(&y);
        let after = flow.events(&step.y1);

        let mut hit: Option<(T, EventValue<T>)> = None;
        let mut stray = false;
        for (e0, e1) in before.iter().zip(&after) {
            if suppressed == Some(e0.kind) {
                if e1.g > e1.gap {
                    suppressed = None;
                } else if !(e1.g < T::zero()) {
                    continue;
                }
            }
            if !(e1.g < e1.gap) {
                continue;
            }
            if !(e0.g > T::zero()) {
                stray = true;
                continue;
            }
            if !(e0.g > e0.gap) && !(e1.g < e0.g) {
                continue;
            }
            let tr = if e0.g > e0.gap {
                let kind = e0.kind;
                locate_root(
                    &step,
                    |z| event_value(flow, kind, z),
                    e0.g - e0.gap,
                    e1.g - e1.gap,
                )
            } else {
                step.t0
            };
            if hit.is_none_or(|(th, _)| tr < th) {
                hit = Some((tr, *e0));
            }
        }

        let Some((mut te, ev)) = hit else {
            if stray {
                termination = Termination::SingularPoint { t };
                break;
            }
            t = step.t1();
            y = step.y1;
            samples.push(flow.sample(t, &y));
            h = h_next;
            continue;
        };

        let mut ye = step.dense(te);
        if let (Some(dgdp), true) = (ev.dgdp, te > step.t0) {
            // polish the dense-output root on true steps from the step start
            for _ in 0..6 {
                let span = te - step.t0;
                ye = if span > T::zero() {
                    stepper
                        .integrate_to(
                            &mut |_, z: &[T; 2]| flow.rhs(z),
                            step.t0,
                            step.y0,
                            te,
                            Some(span),
                        )?
                        .0
                } else {
                    step.y0
                };
                let g = event_value(flow, ev.kind, &ye);
                let gdot = dgdp * flow.rhs(&ye)[1];
                if !(gdot.abs() > T::zero()) || !g.is_finite() {
                    break;
                }
                let dt = g / gdot;
                te = (te - dt).max(step.t0);
                if dt.abs() <= T::lit(4.0) * T::epsilon() * (T::one() + te.abs()) {
                    break;
                }
            }
        } else if te == step.t0 {
            ye = step.y0;
        }
        if te > t && samples.last().is_some_and(|l| l.t < te) {
            samples.push(flow.sample(te, &ye));
        }

        match ev.kind {
            EventKind::EscapeX | EventKind::EscapeV => {
                termination = Termination::EscapeToInfinity { t_escape: te };
                break;
            }
            kind => {
                let Some(crossing) = flow.switch(kind, te, ye)? else {
                    suppressed = Some(kind);
                    t = te;
                    y = ye;
                    continue;
                };
                let tc = crossing.event.t;
                events.push(crossing.event);
                samples.push(flow.sample(tc, &crossing.at_cusp));
                if crossing.resume_t > tc {
                    samples.push(flow.sample(crossing.resume_t, &crossing.resume));
                }
                t = crossing.resume_t;
                y = crossing.resume;
                h = stepper.initial_step(&mut |_, z: &[T; 2]| flow.rhs(z), t, &y, T::one());
                if crossing.resume_t > tc {
                    h = h.min(crossing.resume_t - tc);
                }
            }
        }
    }
    Ok(Trajectory {
        samples,
        events,
        termination,
    })
}

/// Integrates `ẋ = v(p, branch)`, `ṗ = -V'(x)` from `init`, switching branches
/// at the cusps: at `|p| = √(mC/e)` the flow passes between the middle and an
/// outer branch and reverses its time sense there (a bounce, with continuous
/// branch velocity); at `p = 0` it passes between the outer branches with `v`
/// wrapping through infinity. Family-model branches have no cusp at finite `p`.
pub fn integrate_branch_flow<T: Real>(
    model: &ModelSpec<T>,
    init: PhaseState<T>,
    t_max: T,
    tol: T,
) -> Result<Trajectory<T>> {
    integrate_branch_flow_with(model, init, t_max, tol, &FlowOptions::default())
}

pub fn integrate_branch_flow_with<T: Real>(
    model: &ModelSpec<T>,
    init: PhaseState<T>,
    t_max: T,
    tol: T,
    opts: &FlowOptions<T>,
) -> Result<Trajectory<T>> {
    model.velocity(init.p, init.branch)?;
    let mut flow = BranchFlow::new(model, init.branch, opts.escape_bound);
    drive(&mut flow, init.t, [init.x, init.p], t_max, tol, opts)
}

/// Euler–Lagrange flow `ẋ = v`, `v̇ = (9/C)·x·(v - 1)^{5/3}` of the
/// supersymmetric model. Samples carry `p = p(v)` (infinite on `v = 1`) and
/// the branch that governs their side of the barrier.
pub fn integrate_lagrangian_flow<T: Real>(init: (T, T), t_max: T, tol: T) -> Result<Trajectory<T>> {
    integrate_lagrangian_flow_with(init, t_max, tol, &FlowOptions::default())
}

pub fn integrate_lagrangian_flow_with<T: Real>(
    init: (T, T),
    t_max: T,
    tol: T,
    opts: &FlowOptions<T>,
) -> Result<Trajectory<T>> {
    let model = FamilyModel::susy();
    let mut flow = LagrangeFlow {
        force: T::lit(9.0) / model.constant(),
        escape: opts.escape_bound,
        model,
    };
    drive(&mut flow, T::zero(), [init.0, init.1], t_max, tol, opts)
}

/// Region of the `(x, v)` plane, or gaussian branch, an orbit lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    VBelow1,
    VAbove1,
    Branch(GaussianBranch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    /// Closed orbit that never meets a cusp.
    BoundedClosed,
    /// Closed orbit assembled from several branches joined at cusps.
    CuspedClosed,
    UnboundedEscape,
    /// The uniform solution `v ≡ 1`.
    SpecialUniform,
    SeparatrixCandidate,
}

/// Orbit topology from the energy and initial region.
pub fn classify_orbit<T: Real>(
    model: &ModelSpec<T>,
    energy: T,
    region: Region,
) -> Result<OrbitClass> {
    let (offset, stiffness) = model.potential().quadratic_coefficients();
    if stiffness < T::zero() {
        return Err(Error::Invalid(
            "classification needs a non-negative stiffness".into(),
        ));
    }
    let no_orbit = |threshold: T| Error::NoOrbit {
        energy: energy.as_f64(),
        threshold: threshold.as_f64(),
    };
    match (model, region) {
        (ModelSpec::Family(f), Region::VBelow1) => {
            let threshold = f.constant() + offset;
            if energy < threshold {
                Err(no_orbit(threshold))
            } else if stiffness > T::zero() {
                Ok(OrbitClass::BoundedClosed)
            } else {
                Ok(OrbitClass::UnboundedEscape)
            }
        }
        (ModelSpec::Family(_), Region::VAbove1) => Ok(OrbitClass::UnboundedEscape),
        (ModelSpec::Gaussian(g), Region::Branch(b)) => {
            let c = g.scale;
            let cusp_kin = T::lit(2.0) * c / T::E().sqrt() - c;
            let floor = match b {
                GaussianBranch::Middle => offset,
                _ => offset - c,
            };
            if energy < floor || (stiffness == T::zero() && energy > offset + cusp_kin) {
                return Err(no_orbit(floor));
            }
            if stiffness == T::zero() {
                return Ok(OrbitClass::UnboundedEscape);
            }
            let separatrix = offset + cusp_kin;
            let tol = T::epsilon().sqrt() * separatrix.abs().max(T::one());
            if (energy - separatrix).abs() <= tol {
                Ok(OrbitClass::SeparatrixCandidate)
            } else if b == GaussianBranch::Middle && energy < separatrix {
                Ok(OrbitClass::BoundedClosed)
            } else {
                Ok(OrbitClass::CuspedClosed)
            }
        }
        _ => Err(Error::Invalid(format!(
            "region {region:?} does not apply to this model"
        ))),
    }
}

/// Class of the supersymmetric Euler–Lagrange orbit through `(x, v)`.
pub fn lagrangian_orbit_class<T: Real>(x: T, v: T) -> Result<OrbitClass> {
    if v == T::one() {
        return Ok(OrbitClass::SpecialUniform);
    }
    let region = if v < T::one() {
        Region::VBelow1
    } else {
        Region::VAbove1
    };
    classify_orbit(&ModelSpec::susy(), susy_energy(x, v)?, region)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoints<T> {
    pub x_minus: T,
    pub x_plus: T,
    pub p_turn: T,
}

/// Turning points `x = ±√(E - C)` of the bounded supersymmetric orbits, at
/// momentum `p = C/3`.
pub fn turning_points<T: Real>(energy: T) -> Result<TurningPoints<T>> {
    let c = FamilyModel::<T>::susy().constant();
    if energy < c {
        return Err(Error::BelowThreshold {
            energy: energy.as_f64(),
            threshold: c.as_f64(),
        });
    }
    let x = (energy - c).sqrt();
    Ok(TurningPoints {
        x_minus: -x,
        x_plus: x,
        p_turn: c / T::lit(3.0),
    })
}

/// Rectangular `(x, p)` sampling grid for contouring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid<T> {
    pub x_min: T,
    pub x_max: T,
    pub p_min: T,
    pub p_max: T,
    pub nx: usize,
    pub np: usize,
}

impl<T: Real> ContourGrid<T> {
    /// Grid covering the branch's momentum interval and the energetically
    /// reachable positions (capped for non-confining potentials).
    pub fn auto(model: &ModelSpec<T>, energy: T, branch: BranchId, n: usize) -> Self {
        let pot = model.potential();
        let (offset, stiffness) = pot.quadratic_coefficients();
        let (p_min, p_max, kin_min) = match model {
            ModelSpec::Gaussian(g) => {
                let pb = g.momentum_bound();
                match branch {
                    BranchId::Gaussian(GaussianBranch::Plus) => (T::zero(), pb, -g.scale),
                    BranchId::Gaussian(GaussianBranch::Minus) => (-pb, T::zero(), -g.scale),
                    _ => (-pb, pb, T::zero()),
                }
            }
            ModelSpec::Family(f) => {
                let top = (energy - offset).max(T::zero()) + T::lit(2.0);
                match branch {
                    BranchId::Family(FamilyBranch::HPlus) => {
                        (T::lit(1e-3), top.max(f.constant()), f.constant())
                    }
                    _ => (T::lit(1e-3), top, T::lit(-3.0)),
                }
            }
        };
        let reach = if stiffness > T::zero() {
            ((energy - offset - kin_min).max(T::zero()) / stiffness).sqrt() * T::lit(1.05)
        } else {
            T::zero()
        };
        let x_half = reach.max(T::one()).min(T::lit(10.0));
        Self {
            x_min: -x_half,
            x_max: x_half,
            p_min,
            p_max,
            nx: n,
            np: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(Error::Invalid(
                "contour grid needs increasing ranges and at least 2×2 nodes".into(),
            ));
        }
        Ok(())
    }
}

fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let d = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + d * T::from_usize_lossy(i)
            }
        })
        .collect()
}

/// Polylines of `H(x, p, branch) = energy` in `(x, p)`. Empty when the level
/// set misses the grid.
pub fn energy_contour<T: Real>(
    model: &ModelSpec<T>,
    energy: T,
    branch: BranchId,
    grid: &ContourGrid<T>,
) -> Result<Vec<Polyline<T>>> {
    grid.validate()?;
    if !model.branches().contains(&branch) {
        return Err(Error::Invalid(format!(
            "branch {branch} does not belong to this model"
        )));
    }
    let xs = linspace(grid.x_min, grid.x_max, grid.nx);
    let ps = linspace(grid.p_min, grid.p_max, grid.np);
    let pot = model.potential();
    let kin: Vec<T> = ps
        .iter()
        .map(|&p| model.kinetic(p, branch).unwrap_or(T::nan()))
        .collect();
    let values: Vec<T> = kin
        .iter()
        .flat_map(|&k| xs.iter().map(move |&x| k + pot.value(x)))
        .collect();
    Ok(marching_squares(&xs, &ps, &values, energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianModel, Potential};

    fn fedora() -> ModelSpec<f64> {
        ModelSpec::Gaussian(
            GaussianModel::new(
                1.0,
                1.0,
                Potential::HarmonicShifted {
                    offset: 1.0,
                    stiffness: 1.0,
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn middle_oval_has_no_switches() {
        let m = fedora();
        let init = PhaseState::at_energy(&m, 1.1, 0.0, GaussianBranch::Middle.into()).unwrap();
        let tr = integrate_branch_flow(&m, init, 20.0, 1e-10).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.termination, Termination::TimeLimit);
        assert!(tr.relative_energy_drift(&m) < 1e-8);
    }

    #[test]
    fn triangle_switches_at_cusps() {
        let m = fedora();
        let init = PhaseState::at_energy(&m, 1.5, 0.0, GaussianBranch::Middle.into()).unwrap();
        let tr = integrate_branch_flow(&m, init, 20.0, 1e-10).unwrap();
        assert!(tr.events.len() >= 3);
        let pb = (1.0f64 / std::f64::consts::E).sqrt();
        for e in &tr.events {
            assert!(e.p_at_switch.abs() < 1e-12 || (e.p_at_switch.abs() - pb).abs() < 1e-12);
        }
        assert!(
            tr.relative_energy_drift(&m) < 1e-7,
            "{}",
            tr.relative_energy_drift(&m)
        );
    }

    #[test]
    fn lagrangian_uniform_solution() {
        let tr = integrate_lagrangian_flow((0.0f64, 1.0), 10.0, 1e-10).unwrap();
        for s in &tr.samples {
            assert_eq!(s.v, 1.0);
            assert!((s.x - s.t).abs() < 1e-12);
        }
        assert_eq!(
            lagrangian_orbit_class(0.0f64, 1.0).unwrap(),
            OrbitClass::SpecialUniform
        );
    }

    #[test]
    fn classification_thresholds() {
        let s = ModelSpec::<f64>::susy();
        assert!(matches!(
            classify_orbit(&s, 1.0, Region::VBelow1),
            Err(Error::NoOrbit { .. })
        ));
        assert_eq!(
            classify_orbit(&s, 1.2, Region::VBelow1).unwrap(),
            OrbitClass::BoundedClosed
        );
        assert_eq!(
            classify_orbit(&s, -3.0, Region::VAbove1).unwrap(),
            OrbitClass::UnboundedEscape
        );
        let g = fedora();
        let es = 2.0 / std::f64::consts::E.sqrt();
        let mid = Region::Branch(GaussianBranch::Middle);
        assert_eq!(
            classify_orbit(&g, es, mid).unwrap(),
            OrbitClass::SeparatrixCandidate
        );
        assert_eq!(
            classify_orbit(&g, 1.19, mid).unwrap(),
            OrbitClass::BoundedClosed
        );
        assert_eq!(
            classify_orbit(&g, 1.23, mid).unwrap(),
            OrbitClass::CuspedClosed
        );
        assert_eq!(
            classify_orbit(&g, 0.8, Region::Branch(GaussianBranch::Plus)).unwrap(),
            OrbitClass::CuspedClosed
        );
        assert!(classify_orbit(&g, 0.8, mid).is_err());
        assert!(classify_orbit(&g, 1.0, Region::VBelow1).is_err());
    }

    #[test]
    fn turning_point_values() {
        let tp = turning_points(1.4f64).unwrap();
        assert!((tp.x_plus - (1.4 - 3.0 / 4f64.powf(2.0 / 3.0)).sqrt()).abs() < 1e-14);
        assert!((tp.p_turn - 0.39685).abs() < 1e-5);
        assert!(matches!(
            turning_points(1.0f64),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn susy_contours() {
        let s = ModelSpec::<f64>::susy();
        let plus = FamilyBranch::HPlus.into();
        let minus = FamilyBranch::HMinus.into();
        let g = ContourGrid::auto(&s, 0.0, plus, 200);
        assert!(energy_contour(&s, 0.0, plus, &g).unwrap().is_empty());
        let g = ContourGrid::auto(&s, 0.0, minus, 200);
        let lines = energy_contour(&s, 0.0, minus, &g).unwrap();
        assert!(!lines.is_empty() && lines.iter().all(|l| !l.closed));
        let g = ContourGrid::auto(&s, 1.4, plus, 300);
        let lines = energy_contour(&s, 1.4, plus, &g).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
    }
}
