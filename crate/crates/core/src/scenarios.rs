//! Canned runs with machine-checkable verdicts.

use std::f64::consts::PI;
use std::fmt;

use crate::characteristics::{ratio_oracle, VelocityHistory};
use crate::diagnostics::{
    energy_residual, l1_distance, mass_drift, DiagnosticsRecord, DiagnosticsRecorder, RenormField, RenormKind,
    RenormTracker,
};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, ScalarField, State, VectorField};
use crate::model::{ModelParams, ThermoSample};
use crate::momentum::{coupled_step, momentum_step, stable_dt, Forcing, MomentumConfig};
use crate::transport::{
    full_model_substep, transport_substep, FaceVelocity, Splitting, TransportConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    UniformDamping,
    AdvectionPeriodic,
    VortexDomination,
    DrivenNoslip,
    ReductionTwin,
    NegativePressureSign,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::UniformDamping,
        ScenarioKind::AdvectionPeriodic,
        ScenarioKind::VortexDomination,
        ScenarioKind::DrivenNoslip,
        ScenarioKind::ReductionTwin,
        ScenarioKind::NegativePressureSign,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::UniformDamping => "uniform_damping",
            ScenarioKind::AdvectionPeriodic => "advection_periodic",
            ScenarioKind::VortexDomination => "vortex_domination",
            ScenarioKind::DrivenNoslip => "driven_noslip",
            ScenarioKind::ReductionTwin => "reduction_twin",
            ScenarioKind::NegativePressureSign => "negative_pressure_sign",
        }
    }

    /// The property each preset checks.
    pub fn claim(&self) -> &'static str {
        match self {
            ScenarioKind::UniformDamping => "energy identity for a spatially uniform state: dE/dt equals the stress source",
            ScenarioKind::AdvectionPeriodic => "donor-cell transport converges under refinement (smooth and discontinuous data)",
            ScenarioKind::VortexDomination => "domination rho, tau <= c_bar eta and the mass laws persist under transport",
            ScenarioKind::DrivenNoslip => "energy inequality residual shrinks under joint dt, dx refinement",
            ScenarioKind::ReductionTwin => "evolving tau and subtracting k eta equals evolving tau - k eta directly",
            ScenarioKind::NegativePressureSign => "stress enters the pressure with a negative sign",
        }
    }

    pub fn parse(name: &str) -> Result<ScenarioKind> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A preset plus its tunable knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ModelParams,
    /// Cells per direction (coarse level for refinement studies).
    pub n: usize,
    pub t_end: f64,
    /// Fixed step; `None` picks the step from the Courant condition.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub visc_cfl: f64,
    pub splitting: Splitting,
    /// Magnitude of the downward body force (driven run only).
    pub gravity: f64,
    /// Main verdict tolerance.
    pub tolerance: f64,
    /// Diagnostics are recorded every this many steps (and at the end).
    pub record_every: usize,
}

impl Scenario {
    /// The (coarse-level) grid the preset runs on.
    pub fn grid(&self) -> Result<Grid> {
        match self.kind {
            ScenarioKind::AdvectionPeriodic | ScenarioKind::NegativePressureSign => {
                Grid::new_1d(self.n, 1.0, Boundary::Periodic)
            }
            ScenarioKind::VortexDomination | ScenarioKind::DrivenNoslip => {
                Grid::unit_square(self.n, Boundary::NoSlipBox)
            }
            ScenarioKind::UniformDamping | ScenarioKind::ReductionTwin => {
                Grid::unit_square(self.n, Boundary::Periodic)
            }
        }
    }
}

pub fn build(name: &str) -> Result<Scenario> {
    let kind = ScenarioKind::parse(name)?;
    let base = ModelParams::default();
    let mut sc = Scenario {
        kind,
        params: base.clone(),
        n: 32,
        t_end: 1.0,
        dt: None,
        cfl: 0.4,
        visc_cfl: 0.25,
        splitting: Splitting::Strang,
        gravity: 0.0,
        tolerance: 0.0,
        record_every: 1,
    };
    match kind {
        ScenarioKind::UniformDamping => {
            sc.params = ModelParams {
                a: 1.0,
                gamma: 2.0,
                z: 1.0,
                k: 0.0,
                lambda: 0.5,
                ..base
            }
            .with_auto_radii()?;
            sc.dt = Some(1e-3);
            sc.tolerance = 1e-8;
        }
        ScenarioKind::AdvectionPeriodic => {
            sc.params = ModelParams { dim: 1, ..base };
            sc.n = 128;
            sc.tolerance = 0.8;
        }
        ScenarioKind::VortexDomination => {
            sc.params = ModelParams {
                lambda: 2.0,
                c_bar: 2.0,
                ..base
            }
            .with_auto_radii()?;
            sc.n = 64;
            sc.splitting = Splitting::Lie;
            sc.t_end = 6.25;
            sc.dt = Some(6.25e-3);
            sc.tolerance = 1e-13;
        }
        ScenarioKind::DrivenNoslip => {
            sc.params = ModelParams {
                mu_s: 0.02,
                mu_b: 0.01,
                ..base
            };
            sc.dt = Some(3e-3);
            sc.t_end = 0.5;
            sc.gravity = 1.0;
            sc.tolerance = 1.3;
        }
        ScenarioKind::ReductionTwin => {
            sc.params = ModelParams { k: 1.5, ..base }.with_auto_radii()?;
            sc.t_end = 1.25;
            sc.tolerance = 1e-12;
        }
        ScenarioKind::NegativePressureSign => {
            sc.params = ModelParams { dim: 1, ..base };
            sc.n = 128;
            sc.dt = Some(1e-4);
            sc.t_end = 1e-4;
        }
    }
    Ok(sc)
}

/// Outcome of a preset with the numbers it was judged on.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub metrics: Vec<(String, f64)>,
    pub summary: String,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            passed: true,
            metrics: Vec::new(),
            summary: String::new(),
        }
    }

    fn check(&mut self, label: &str, value: f64, ok: bool, rule: &str) {
        self.metrics.push((label.to_string(), value));
        if !self.summary.is_empty() {
            self.summary.push_str("; ");
        }
        let mark = if ok { "ok" } else { "FAIL" };
        self.summary.push_str(&format!("{label} = {value:.6e} ({rule}, {mark})"));
        self.passed &= ok;
    }

    pub fn metric(&self, label: &str) -> Option<f64> {
        self.metrics.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

pub struct RunOutput {
    pub state: State,
    pub history: Vec<DiagnosticsRecord>,
    pub verdict: Verdict,
}

/// Called with the step index and state after every step (index 0 is the
/// initial state).
pub type Observer<'a> = &'a mut dyn FnMut(usize, &State) -> Result<()>;

pub fn run(sc: &Scenario) -> Result<RunOutput> {
    run_with(sc, &mut |_, _| Ok(()))
}

pub fn run_with(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    sc.params.validate()?;
    if sc.n < 4 {
        return Err(Error::Grid(format!("n must be at least 4, got {}", sc.n)));
    }
    if !(sc.t_end > 0.0) || sc.record_every == 0 {
        return Err(Error::Params("t_end must be positive and record_every at least 1".into()));
    }
    match sc.kind {
        ScenarioKind::UniformDamping => run_uniform_damping(sc, observe),
        ScenarioKind::AdvectionPeriodic => run_advection(sc, observe),
        ScenarioKind::VortexDomination => run_vortex(sc, observe),
        ScenarioKind::DrivenNoslip => run_driven(sc, observe),
        ScenarioKind::ReductionTwin => run_twin(sc, observe),
        ScenarioKind::NegativePressureSign => run_negative_pressure(sc, observe),
    }
}

/// Number of equal steps covering `t_end` with steps no longer than `dt`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn transport_config(sc: &Scenario) -> TransportConfig {
    TransportConfig {
        cfl: sc.cfl,
        splitting: sc.splitting,
        dt_max: sc.dt.unwrap_or(0.05),
    }
}

fn momentum_config(sc: &Scenario, forcing: Forcing) -> MomentumConfig {
    MomentumConfig {
        visc_cfl: sc.visc_cfl,
        cfl: sc.cfl,
        dt_max: sc.dt.unwrap_or(0.05),
        forcing,
    }
}

fn gaussian(x: f64, y: f64, cx: f64, cy: f64, sigma: f64) -> f64 {
    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
}

/// Records every `record_every` steps and always the final step.
struct Stepper<'a> {
    recorder: DiagnosticsRecorder,
    every: usize,
    steps: usize,
    observe: Observer<'a>,
}

impl<'a> Stepper<'a> {
    fn new(g: &Grid, p: &ModelParams, forcing: VectorField, every: usize, steps: usize, observe: Observer<'a>) -> Self {
        Stepper {
            recorder: DiagnosticsRecorder::new(g, p, forcing),
            every,
            steps,
            observe,
        }
    }

    fn visit(&mut self, step: usize, s: &State) -> Result<()> {
        if step.is_multiple_of(self.every) || step == self.steps {
            self.recorder.record(s)?;
        }
        (self.observe)(step, s)
    }
}

fn with_momentum(mut s: State, u: &VectorField) -> State {
    let comps = u.components().iter().map(|c| c.zip_map(&s.rho, |v, r| v * r)).collect();
    s.mom = VectorField::from_components(comps);
    s
}

/// Transport by a prescribed velocity; momentum is kept at `rho u` for the
/// diagnostics.
fn kinematic_step(
    s: &State,
    faces: &FaceVelocity,
    u: &VectorField,
    dt: f64,
    g: &Grid,
    tc: &TransportConfig,
    p: &ModelParams,
) -> Result<State> {
    Ok(with_momentum(transport_substep(s, faces, dt, g, tc, p)?, u))
}

// ---------------------------------------------------------------- uniform

fn run_uniform_damping(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let g = sc.grid()?;
    let p = &sc.params;
    let (tau0, dt_req) = (1.0, sc.dt.unwrap_or(1e-3));
    let steps = step_count(sc.t_end, dt_req);
    let dt = sc.t_end / steps as f64;
    let (tc, mc) = (transport_config(sc), momentum_config(sc, Forcing::Zero));
    let mut s = State::uniform(&g, 1.0, 1.0, tau0);
    let mut stepper = Stepper::new(&g, p, VectorField::zeros(&g), sc.record_every, steps, observe);
    stepper.visit(0, &s)?;
    for n in 1..=steps {
        s = coupled_step(&s, dt, &g, p, &tc, &mc)?;
        s.time = n as f64 * dt;
        stepper.visit(n, &s)?;
    }
    let history = stepper.recorder.into_records();
    let exact = tau0 * (-s.time * p.damping_rate()).exp();
    let tau_err = s.tau.sup_distance(&ScalarField::constant(&g, exact));
    let mut v = Verdict::new();
    let r = energy_residual(&history);
    v.check("energy_residual", r, r.abs() < sc.tolerance, &format!("|R| < {:e}", sc.tolerance));
    v.check("tau_pointwise_error", tau_err, tau_err < 1e-10, "< 1e-10");
    Ok(RunOutput {
        state: s,
        history,
        verdict: v,
    })
}

// -------------------------------------------------------------- advection

/// Initial profiles of the advection study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// `1 + 0.5 sin(2 pi x)`.
    Smooth,
    /// `0.1 + indicator([0.3, 0.7])`; the edges avoid cell faces.
    Square,
}

impl Profile {
    pub fn value(&self, x: f64) -> f64 {
        let x = x.rem_euclid(1.0);
        match self {
            Profile::Smooth => 1.0 + 0.5 * (2.0 * PI * x).sin(),
            Profile::Square => 0.1 + if (0.3..0.7).contains(&x) { 1.0 } else { 0.0 },
        }
    }

    /// Exact mean over `[a, b]` with `0 <= a < b <= 1`.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        match self {
            Profile::Smooth => 1.0 + 0.5 * ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI * (b - a)),
            Profile::Square => 0.1 + (b.min(0.7) - a.max(0.3)).max(0.0) / (b - a),
        }
    }
}

/// `L1` distance between cell values and the continuous profile, by the
/// midpoint rule on `sub` points per cell.
pub fn l1_error_continuous(f: &ScalarField, g: &Grid, profile: Profile, sub: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..g.nx {
        let left = g.origin[0] + i as f64 * g.dx;
        let cell: f64 = (0..sub)
            .map(|k| (f.get(i, 0) - profile.value(left + (k as f64 + 0.5) * g.dx / sub as f64)).abs())
            .sum();
        total += cell * g.dx / sub as f64;
    }
    total
}

/// Advects `profile` through one period at unit speed on `n` cells and
/// returns the final state together with its `L1` error.
pub fn advect_one_period(
    n: usize,
    profile: Profile,
    cfl: f64,
    p: &ModelParams,
    observe: Option<Observer<'_>>,
) -> Result<(State, f64, Vec<DiagnosticsRecord>)> {
    let g = Grid::new_1d(n, 1.0, Boundary::Periodic)?;
    let eta = ScalarField::from_fn(&g, |x, _| {
        let i = ((x - 0.5 * g.dx) / g.dx).round();
        profile.average(i * g.dx, (i + 1.0) * g.dx)
    });
    let u = VectorField::from_fn(&g, |_, _| [1.0, 0.0]);
    let faces = FaceVelocity::from_fn(&g, |_, _| [1.0, 0.0]);
    let steps = step_count(1.0, cfl * g.dx);
    let dt = 1.0 / steps as f64;
    let tc = TransportConfig {
        cfl,
        splitting: Splitting::Strang,
        dt_max: dt,
    };
    let mut s = with_momentum(
        State {
            rho: eta.map(|e| 0.5 * e),
            tau: eta.map(|e| 0.5 * e),
            eta,
            mom: VectorField::zeros(&g),
            time: 0.0,
        },
        &u,
    );
    let mut noop = |_: usize, _: &State| Ok(());
    let mut stepper = Stepper::new(&g, p, VectorField::zeros(&g), 1, steps, observe.unwrap_or(&mut noop));
    stepper.visit(0, &s)?;
    for k in 1..=steps {
        s = kinematic_step(&s, &faces, &u, dt, &g, &tc, p)?;
        s.time = k as f64 * dt;
        stepper.visit(k, &s)?;
    }
    let err = l1_error_continuous(&s.eta, &g, profile, 64);
    Ok((s, err, stepper.recorder.into_records()))
}

fn run_advection(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let p = &sc.params;
    let (state, e_smooth, history) = advect_one_period(sc.n, Profile::Smooth, sc.cfl, p, Some(observe))?;
    let (_, e_smooth_fine, _) = advect_one_period(2 * sc.n, Profile::Smooth, sc.cfl, p, None)?;
    let (_, e_sq, _) = advect_one_period(sc.n, Profile::Square, sc.cfl, p, None)?;
    let (_, e_sq_fine, _) = advect_one_period(2 * sc.n, Profile::Square, sc.cfl, p, None)?;
    let order_smooth = (e_smooth / e_smooth_fine).log2();
    let order_square = (e_sq / e_sq_fine).log2();
    let mut v = Verdict::new();
    v.metrics.push(("l1_smooth_coarse".into(), e_smooth));
    v.metrics.push(("l1_smooth_fine".into(), e_smooth_fine));
    v.metrics.push(("l1_square_coarse".into(), e_sq));
    v.metrics.push(("l1_square_fine".into(), e_sq_fine));
    v.check(
        "order_smooth",
        order_smooth,
        order_smooth >= sc.tolerance,
        &format!(">= {}", sc.tolerance),
    );
    v.check("order_square", order_square, order_square >= 0.5, ">= 0.5");
    Ok(RunOutput {
        state,
        history,
        verdict: v,
    })
}

// ----------------------------------------------------------------- vortex

/// Stream function of the box vortex; `|u| <= 1`, zero normal flow at walls.
pub fn vortex_stream(x: f64, y: f64) -> f64 {
    (PI * x).sin().powi(2) * (PI * y).sin().powi(2) / PI
}

pub fn vortex_velocity(x: f64, y: f64) -> [f64; 2] {
    [
        (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
        -(2.0 * PI * x).sin() * (PI * y).sin().powi(2),
    ]
}

/// Initial ratio fields of the vortex preset.
pub fn vortex_ratios(x: f64, y: f64) -> (f64, f64) {
    (
        0.6 + 0.6 * gaussian(x, y, 0.65, 0.4, 0.1),
        0.8 + 0.6 * gaussian(x, y, 0.5, 0.65, 0.1),
    )
}

pub fn vortex_initial(g: &Grid) -> State {
    let eta = ScalarField::from_fn(g, |x, y| 2.0 + gaussian(x, y, 0.35, 0.35, 0.1));
    let s_rho = ScalarField::from_fn(g, |x, y| vortex_ratios(x, y).0);
    let s_tau = ScalarField::from_fn(g, |x, y| vortex_ratios(x, y).1);
    let u = VectorField::from_fn(g, vortex_velocity);
    with_momentum(
        State {
            rho: eta.zip_map(&s_rho, |e, s| e * s),
            tau: eta.zip_map(&s_tau, |e, s| e * s),
            eta,
            mom: VectorField::zeros(g),
            time: 0.0,
        },
        &u,
    )
}

fn vortex_setup(n: usize) -> Result<(Grid, FaceVelocity, VectorField)> {
    let g = Grid::unit_square(n, Boundary::NoSlipBox)?;
    let faces = FaceVelocity::from_stream_function(&g, vortex_stream)?;
    let u = VectorField::from_fn(&g, vortex_velocity);
    Ok((g, faces, u))
}

fn kinematic_dt(sc: &Scenario, faces: &FaceVelocity, g: &Grid) -> f64 {
    sc.dt.unwrap_or_else(|| {
        let m = faces.max_abs();
        let speed = m[0].max(m[1]);
        if speed > 0.0 {
            sc.cfl * g.min_spacing() / speed
        } else {
            sc.t_end
        }
    })
}

fn run_vortex(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let p = &sc.params;
    let (g, faces, u) = vortex_setup(sc.n)?;
    let steps = step_count(sc.t_end, kinematic_dt(sc, &faces, &g));
    let dt = sc.t_end / steps as f64;
    let tc = transport_config(sc);
    let mut s = vortex_initial(&g);
    let initial_margin = crate::diagnostics::domination_margin(&s, p);
    let mut worst_margin = f64::INFINITY;
    let mut stepper = Stepper::new(&g, p, VectorField::zeros(&g), sc.record_every, steps, observe);
    stepper.visit(0, &s)?;
    for k in 1..=steps {
        s = kinematic_step(&s, &faces, &u, dt, &g, &tc, p)?;
        s.time = k as f64 * dt;
        worst_margin = worst_margin.min(crate::diagnostics::domination_margin(&s, p));
        stepper.visit(k, &s)?;
    }
    let history = stepper.recorder.into_records();
    let mut v = Verdict::new();
    v.metrics.push(("steps".into(), steps as f64));
    v.check("initial_margin", initial_margin, initial_margin > 0.0, "> 0");
    v.check(
        "min_margin",
        worst_margin,
        worst_margin >= -sc.tolerance,
        &format!(">= -{:e}", sc.tolerance),
    );
    let drift_rho = mass_drift(&history, |r| r.mass_rho);
    let drift_eta = mass_drift(&history, |r| r.mass_eta);
    v.check("mass_rho_drift", drift_rho, drift_rho < 1e-12, "< 1e-12");
    v.check("mass_eta_drift", drift_eta, drift_eta < 1e-12, "< 1e-12");
    if sc.splitting == Splitting::Lie {
        let tau_err = tau_decay_error(&history, p);
        v.check("mass_tau_decay_error", tau_err, tau_err < 1e-10, "< 1e-10");
    }
    Ok(RunOutput {
        state: s,
        history,
        verdict: v,
    })
}

/// Largest relative deviation of `mass_tau(t)` from `mass_tau(0) exp(-t/(2 lambda))`.
pub fn tau_decay_error(history: &[DiagnosticsRecord], p: &ModelParams) -> f64 {
    let Some(first) = history.first() else {
        return 0.0;
    };
    history
        .iter()
        .map(|r| {
            let expected = first.mass_tau * (-(r.time - first.time) * p.damping_rate()).exp();
            ((r.mass_tau - expected) / expected).abs()
        })
        .fold(0.0, f64::max)
}

/// Measurements of one vortex run against the characteristics oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexStudy {
    pub n: usize,
    /// `int |s_tau(Eulerian) - s_tau(oracle)|` at the final time.
    pub ratio_l1: f64,
    pub oracle_min: f64,
    pub oracle_max: f64,
    /// Normalized renormalized residual, `b = theta^2` on `s_tau`.
    pub renorm_s_tau: f64,
    /// Normalized renormalized residual, `b = theta log theta` on `eta`.
    pub renorm_eta: f64,
}

/// Runs the vortex preset on `n x n` cells to `t_end` and compares the
/// Eulerian stress ratio with the damped characteristics solution.
pub fn vortex_study(sc: &Scenario, n: usize, t_end: f64) -> Result<VortexStudy> {
    let p = &sc.params;
    let (g, faces, u) = vortex_setup(n)?;
    // A fixed preset step is tied to the preset grid; keep its Courant number.
    let dt_req = match sc.dt {
        Some(dt) => dt * sc.n as f64 / n as f64,
        None => kinematic_dt(sc, &faces, &g),
    };
    let steps = step_count(t_end, dt_req);
    let dt = t_end / steps as f64;
    let tc = transport_config(sc);
    let div = faces.divergence(&g);
    let mut s = vortex_initial(&g);
    let s_tau0 = ScalarField::from_fn(&g, |x, y| vortex_ratios(x, y).1);
    let mut t_square = RenormTracker::new(RenormField::STau, RenormKind::Square, &g, p);
    let mut t_eta = RenormTracker::new(RenormField::Eta, RenormKind::XLogX, &g, p);
    t_square.observe(&s, &div);
    t_eta.observe(&s, &div);
    for k in 1..=steps {
        s = kinematic_step(&s, &faces, &u, dt, &g, &tc, p)?;
        s.time = k as f64 * dt;
        t_square.observe(&s, &div);
        t_eta.observe(&s, &div);
    }
    let vh = VelocityHistory::steady(&g, u, 0.0, s.time)?;
    let oracle = ratio_oracle(&s_tau0, &vh, s.time, true, p)?;
    let eulerian = RenormField::STau.extract(&s);
    Ok(VortexStudy {
        n,
        ratio_l1: l1_distance(&eulerian, &oracle, &g),
        oracle_min: oracle.min(),
        oracle_max: oracle.max(),
        renorm_s_tau: t_square.normalized(),
        renorm_eta: t_eta.normalized(),
    })
}

// ----------------------------------------------------------------- driven

fn driven_initial(g: &Grid) -> State {
    State {
        rho: ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * gaussian(x, y, 0.4, 0.6, 0.12)),
        eta: ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * gaussian(x, y, 0.6, 0.4, 0.12)),
        tau: ScalarField::from_fn(g, |x, y| 0.5 + 0.4 * gaussian(x, y, 0.5, 0.5, 0.12)),
        mom: VectorField::zeros(g),
        time: 0.0,
    }
}

/// One driven run on `n x n` cells with fixed step `dt` (or the stable
/// step when `None`).
pub fn driven_run(
    sc: &Scenario,
    n: usize,
    dt: Option<f64>,
    observe: Option<Observer<'_>>,
) -> Result<(State, Vec<DiagnosticsRecord>)> {
    let p = &sc.params;
    let g = Grid::unit_square(n, Boundary::NoSlipBox)?;
    let forcing = Forcing::Gravity([0.0, -sc.gravity]);
    let force_field = forcing.eval(&g);
    let tc = transport_config(sc);
    let mc = momentum_config(sc, forcing);
    let mut s = driven_initial(&g);
    let mut noop = |_: usize, _: &State| Ok(());
    let observe = observe.unwrap_or(&mut noop);
    match dt {
        Some(dt_req) => {
            let steps = step_count(sc.t_end, dt_req);
            let dt = sc.t_end / steps as f64;
            let mut stepper = Stepper::new(&g, p, force_field, sc.record_every, steps, observe);
            stepper.visit(0, &s)?;
            for k in 1..=steps {
                s = coupled_step(&s, dt, &g, p, &tc, &mc)?;
                s.time = k as f64 * dt;
                stepper.visit(k, &s)?;
            }
            Ok((s, stepper.recorder.into_records()))
        }
        None => {
            let mut recorder = DiagnosticsRecorder::new(&g, p, force_field);
            recorder.record(&s)?;
            observe(0, &s)?;
            let mut k = 0;
            while s.time < sc.t_end * (1.0 - 1e-12) {
                let dt = stable_dt(&s, &g, p, &mc)?.min(sc.t_end - s.time);
                let t = s.time + dt;
                s = coupled_step(&s, dt, &g, p, &tc, &mc)?;
                s.time = t;
                k += 1;
                if k % sc.record_every == 0 || s.time >= sc.t_end * (1.0 - 1e-12) {
                    recorder.record(&s)?;
                }
                observe(k, &s)?;
            }
            Ok((s, recorder.into_records()))
        }
    }
}

fn run_driven(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let (state, history) = driven_run(sc, sc.n, sc.dt, Some(observe))?;
    let (_, fine) = driven_run(sc, 2 * sc.n, sc.dt.map(|d| 0.5 * d), None)?;
    let (r_coarse, r_fine) = (energy_residual(&history), energy_residual(&fine));
    let ratio = r_coarse.abs() / r_fine.abs();
    let mut v = Verdict::new();
    v.metrics.push(("residual_coarse".into(), r_coarse));
    v.metrics.push(("residual_fine".into(), r_fine));
    v.check("reduction_factor", ratio, ratio >= sc.tolerance, &format!(">= {}", sc.tolerance));
    let order = ratio.log2();
    v.check("order", order, order >= 0.5, ">= 0.5");
    Ok(RunOutput {
        state,
        history,
        verdict: v,
    })
}

// ------------------------------------------------------------------- twin

fn cellular_stream(x: f64, y: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin() / (2.0 * PI)
}

/// Evolves `(eta, tau)` with the relaxing source and `(eta, tau - k eta)`
/// with pure damping on the same faces and returns the sup-norm gap after
/// every step.
fn run_twin(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let p = &sc.params;
    let g = sc.grid()?;
    let faces = FaceVelocity::from_stream_function(&g, cellular_stream)?;
    let tp = 2.0 * PI;
    let u = VectorField::from_fn(&g, |x, y| {
        [(tp * x).sin() * (tp * y).cos(), -(tp * x).cos() * (tp * y).sin()]
    });
    let steps = step_count(sc.t_end, kinematic_dt(sc, &faces, &g));
    let dt = sc.t_end / steps as f64;
    let tc = transport_config(sc);
    let eta0 = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * gaussian(x, y, 0.3, 0.6, 0.1));
    let reduced0 = ScalarField::from_fn(&g, |x, y| 0.2 + 0.7 * gaussian(x, y, 0.6, 0.3, 0.1));
    let mut tau_full = reduced0.zip_map(&eta0, |r, e| r + p.k * e);
    let mut eta_full = eta0.clone();
    let mut s = with_momentum(
        State {
            rho: eta0.clone(),
            eta: eta0,
            tau: reduced0,
            mom: VectorField::zeros(&g),
            time: 0.0,
        },
        &u,
    );
    let mut stepper = Stepper::new(&g, p, VectorField::zeros(&g), sc.record_every, steps, observe);
    stepper.visit(0, &s)?;
    let mut worst = 0.0f64;
    for k in 1..=steps {
        s = kinematic_step(&s, &faces, &u, dt, &g, &tc, p)?;
        s.time = k as f64 * dt;
        let (e, t) = full_model_substep(&eta_full, &tau_full, &faces, dt, &g, sc.splitting, p)?;
        eta_full = e;
        tau_full = t;
        let reduced = tau_full.zip_map(&eta_full, |t, e| t - p.k * e);
        worst = worst.max(reduced.sup_distance(&s.tau));
        stepper.visit(k, &s)?;
    }
    let mut v = Verdict::new();
    v.metrics.push(("steps".into(), steps as f64));
    v.check(
        "sup_difference",
        worst,
        worst < sc.tolerance,
        &format!("< {:e}", sc.tolerance),
    );
    Ok(RunOutput {
        state: s,
        history: stepper.recorder.into_records(),
        verdict: v,
    })
}

// --------------------------------------------------------- pressure sign

/// Which density carries the bump in the sign experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpCarrier {
    Stress,
    Polymer,
}

/// Initial state with `rho = 1` and a bump of height `amp` at `x = 0.5`
/// in either `tau` or in `q(eta)`.
pub fn bump_state(g: &Grid, p: &ModelParams, carrier: BumpCarrier, amp: f64) -> State {
    let bump = |x: f64| amp * gaussian(x, 0.0, 0.5, 0.0, 0.08);
    let mut s = State::uniform(g, 1.0, 1.0, 1.0);
    match carrier {
        BumpCarrier::Stress => s.tau = ScalarField::from_fn(g, |x, _| 1.0 + bump(x)),
        BumpCarrier::Polymer => {
            // Solve z eta^2 + k (L - 1) eta = q(1) + bump for the positive root.
            let b = p.k * (p.l - 1.0);
            let q1 = p.z + b;
            s.eta = ScalarField::from_fn(g, |x, _| {
                let c = q1 + bump(x);
                (-b + (b * b + 4.0 * p.z * c).sqrt()) / (2.0 * p.z)
            });
        }
    }
    s
}

/// Signs of the initial acceleration on the flanks `0.5 -+ [sigma/2, 2 sigma]`:
/// `(all left flank values, all right flank values)`.
pub fn flank_accelerations(s: &State, g: &Grid, p: &ModelParams, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = momentum_step(s, dt, g, p, &MomentumConfig::default())?;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for i in 0..g.nx {
        let x = g.center(i, 0)[0];
        let d = x - 0.5;
        let accel = m.comp(0).get(i, 0) / dt;
        if (-0.16..=-0.04).contains(&d) {
            left.push(accel);
        } else if (0.04..=0.16).contains(&d) {
            right.push(accel);
        }
    }
    Ok((left, right))
}

fn run_negative_pressure(sc: &Scenario, observe: Observer<'_>) -> Result<RunOutput> {
    let p = &sc.params;
    let g = sc.grid()?;
    let dt = sc.dt.unwrap_or(1e-4);
    let stress = bump_state(&g, p, BumpCarrier::Stress, 0.5);
    let polymer = bump_state(&g, p, BumpCarrier::Polymer, 0.5);
    let mut recorder = DiagnosticsRecorder::new(&g, p, VectorField::zeros(&g));
    recorder.record(&stress)?;
    observe(0, &stress)?;

    let (sl, sr) = flank_accelerations(&stress, &g, p, dt)?;
    let (pl, pr) = flank_accelerations(&polymer, &g, p, dt)?;
    let inward = sl.iter().all(|a| *a > 0.0) && sr.iter().all(|a| *a < 0.0) && !sl.is_empty() && !sr.is_empty();
    let outward = pl.iter().all(|a| *a < 0.0) && pr.iter().all(|a| *a > 0.0) && !pl.is_empty() && !pr.is_empty();
    let min_abs = |v: &[f64]| v.iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));

    let mut v = Verdict::new();
    v.check(
        "tau_bump_min_inward_accel",
        min_abs(&sl).min(min_abs(&sr)),
        inward,
        "toward the maximum",
    );
    v.check(
        "q_bump_min_outward_accel",
        min_abs(&pl).min(min_abs(&pr)),
        outward,
        "away from the maximum",
    );
    let mut state = stress.clone();
    state.mom = momentum_step(&stress, dt, &g, p, &MomentumConfig::default())?;
    state.time = dt;
    recorder.record(&state)?;
    observe(1, &state)?;
    Ok(RunOutput {
        state,
        history: recorder.into_records(),
        verdict: v,
    })
}

/// `(eta, rho, tau)` of every cell, for admissibility checks in tests.
pub fn samples(s: &State) -> Vec<ThermoSample> {
    (0..s.rho.values().len()).map(|k| s.sample(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_presets() {
        for kind in ScenarioKind::ALL {
            let sc = build(kind.name()).unwrap();
            assert_eq!(sc.kind, kind);
            sc.params.validate().unwrap();
        }
        let ud = build("uniform_damping").unwrap();
        assert_eq!(ud.dt, Some(1e-3));
        assert_eq!(ud.tolerance, 1e-8);
        assert!(matches!(build("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn step_count_handles_round_off() {
        assert_eq!(step_count(6.25, 0.4 / 64.0), 1000);
        assert_eq!(step_count(1.0, 1e-3), 1000);
        assert_eq!(step_count(0.5, 3e-3), 167);
    }

    #[test]
    fn profile_averages() {
        assert!((Profile::Square.average(0.25, 0.35) - 0.6).abs() < 1e-14);
        assert!((Profile::Smooth.average(0.0, 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn vortex_initial_is_admissible() {
        let g = Grid::unit_square(16, Boundary::NoSlipBox).unwrap();
        let p = build("vortex_domination").unwrap().params;
        let s = vortex_initial(&g);
        assert!(samples(&s).iter().all(|z| z.is_admissible(&p)));
    }

    #[test]
    fn polymer_bump_matches_pressure_rise() {
        let g = Grid::new_1d(32, 1.0, Boundary::Periodic).unwrap();
        let p = ModelParams {
            dim: 1,
            ..ModelParams::default()
        };
        let s = bump_state(&g, &p, BumpCarrier::Polymer, 0.5);
        let t = bump_state(&g, &p, BumpCarrier::Stress, 0.5);
        for i in 0..g.nx {
            let q = crate::model::polymer_pressure(s.eta.get(i, 0), &p).unwrap();
            let q1 = crate::model::polymer_pressure(1.0, &p).unwrap();
            assert!(((q - q1) - (t.tau.get(i, 0) - 1.0)).abs() < 1e-12);
        }
    }
}
