//! Energy ledger, mass budgets, domination margin and renormalized residuals.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{integral, velocity_from_momentum, Grid, ScalarField, State, VectorField, RHO_FLOOR};
use crate::model::{helmholtz, xlogx, ModelParams};
use crate::momentum::dissipation_density;

/// Column order of the diagnostics CSV.
pub const CSV_HEADER: &str = "time,kinetic,free_energy,dissipation_cum,source_cum,work_cum,\
mass_rho,mass_eta,mass_tau,domination_margin,energy_residual";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub kinetic: f64,
    pub free_energy: f64,
    pub dissipation_cum: f64,
    pub source_cum: f64,
    pub work_cum: f64,
    pub mass_rho: f64,
    pub mass_eta: f64,
    pub mass_tau: f64,
    pub domination_margin: f64,
    /// `[E(t) + dissipation] - [E(0) + work + source]`.
    pub energy_residual: f64,
}

impl DiagnosticsRecord {
    pub const FIELD_COUNT: usize = 11;

    pub fn values(&self) -> [f64; Self::FIELD_COUNT] {
        [
            self.time,
            self.kinetic,
            self.free_energy,
            self.dissipation_cum,
            self.source_cum,
            self.work_cum,
            self.mass_rho,
            self.mass_eta,
            self.mass_tau,
            self.domination_margin,
            self.energy_residual,
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != Self::FIELD_COUNT {
            return None;
        }
        Some(DiagnosticsRecord {
            time: v[0],
            kinetic: v[1],
            free_energy: v[2],
            dissipation_cum: v[3],
            source_cum: v[4],
            work_cum: v[5],
            mass_rho: v[6],
            mass_eta: v[7],
            mass_tau: v[8],
            domination_margin: v[9],
            energy_residual: v[10],
        })
    }

    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.free_energy
    }
}

impl fmt::Display for DiagnosticsRecord {
    /// One CSV row; `{}` on `f64` round-trips exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// `integral 1/2 rho |u|^2`.
pub fn kinetic_energy(s: &State, g: &Grid) -> Result<f64> {
    let u = velocity_from_momentum(s, RHO_FLOOR)?;
    Ok(0.5 * crate::grid::inner(&s.mom, &u, g))
}

/// `integral H(rho, eta, tau)`.
pub fn free_energy(s: &State, g: &Grid, p: &ModelParams) -> Result<f64> {
    let values = (0..g.len())
        .map(|k| helmholtz(&s.sample(k), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(integral(&ScalarField::from_vec(g.nx, g.ny, values)?, g))
}

/// Kinetic plus free energy.
pub fn total_energy(s: &State, g: &Grid, p: &ModelParams) -> Result<f64> {
    Ok(kinetic_energy(s, g)? + free_energy(s, g, p)?)
}

/// Pointwise `(tau log tau + tau) / (2 lambda)` with `0 log 0 = 0`.
pub fn source_density(tau: &ScalarField, p: &ModelParams) -> ScalarField {
    let rate = p.damping_rate();
    tau.map(|t| if t < 1e-300 { 0.0 } else { rate * (xlogx(t) + t) })
}

/// `min over cells of min(c_bar eta - rho, c_bar eta - tau)`.
pub fn domination_margin(s: &State, p: &ModelParams) -> f64 {
    let (rho, eta, tau) = (s.rho.values(), s.eta.values(), s.tau.values());
    (0..rho.len())
        .map(|k| {
            let cap = p.c_bar * eta[k];
            (cap - rho[k]).min(cap - tau[k])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Running time integral over nonuniform samples.
///
/// The first interval uses the trapezoid rule. Later intervals integrate the
/// quadratic through the last three samples, which keeps the cumulative
/// error at `O(dt^3)` per unit time for smooth integrands. If a non-negative
/// integrand would yield a negative increment the interval falls back to the
/// trapezoid rule so monotonicity of the running total is kept.
#[derive(Clone, Debug, Default)]
pub struct CumulativeIntegral {
    samples: Vec<(f64, f64)>,
    total: f64,
}

impl CumulativeIntegral {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn push(&mut self, t: f64, value: f64) -> f64 {
        let n = self.samples.len();
        if n >= 1 {
            let (t1, f1) = self.samples[n - 1];
            let h2 = t - t1;
            let trapezoid = 0.5 * h2 * (f1 + value);
            let increment = if n >= 2 && h2 > 0.0 {
                let (t0, f0) = self.samples[n - 2];
                let h1 = t1 - t0;
                let w0 = -h2.powi(3) / (6.0 * h1 * (h1 + h2));
                let w1 = h2 * (3.0 * h1 + h2) / (6.0 * h1);
                let w2 = h2 * (3.0 * h1 + 2.0 * h2) / (6.0 * (h1 + h2));
                let quad = w0 * f0 + w1 * f1 + w2 * value;
                let nonneg = f0 >= 0.0 && f1 >= 0.0 && value >= 0.0;
                if h1 > 0.0 && !(nonneg && quad < 0.0) {
                    quad
                } else {
                    trapezoid
                }
            } else {
                trapezoid
            };
            self.total += increment;
        }
        if self.samples.len() == 2 {
            self.samples.remove(0);
        }
        self.samples.push((t, value));
        self.total
    }
}

/// Builds one [`DiagnosticsRecord`] per recorded state and keeps the
/// cumulative dissipation, source and work integrals.
#[derive(Clone, Debug)]
pub struct DiagnosticsRecorder {
    grid: Grid,
    params: ModelParams,
    forcing: VectorField,
    initial_energy: Option<f64>,
    dissipation: CumulativeIntegral,
    source: CumulativeIntegral,
    work: CumulativeIntegral,
    records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsRecorder {
    pub fn new(g: &Grid, p: &ModelParams, forcing: VectorField) -> Self {
        DiagnosticsRecorder {
            grid: g.clone(),
            params: p.clone(),
            forcing,
            initial_energy: None,
            dissipation: CumulativeIntegral::new(),
            source: CumulativeIntegral::new(),
            work: CumulativeIntegral::new(),
            records: Vec::new(),
        }
    }

    pub fn record(&mut self, s: &State) -> Result<&DiagnosticsRecord> {
        let (g, p) = (&self.grid, &self.params);
        let u = velocity_from_momentum(s, RHO_FLOOR)?;
        let kinetic = 0.5 * crate::grid::inner(&s.mom, &u, g);
        let free = free_energy(s, g, p)?;
        let diss_rate = integral(&dissipation_density(&u, g, p), g);
        let source_rate = integral(&source_density(&s.tau, p), g);
        let work_rate = crate::grid::inner(&s.mom, &self.forcing, g);
        let energy = kinetic + free;
        let e0 = *self.initial_energy.get_or_insert(energy);
        let dissipation_cum = self.dissipation.push(s.time, diss_rate);
        let source_cum = self.source.push(s.time, source_rate);
        let work_cum = self.work.push(s.time, work_rate);
        self.records.push(DiagnosticsRecord {
            time: s.time,
            kinetic,
            free_energy: free,
            dissipation_cum,
            source_cum,
            work_cum,
            mass_rho: integral(&s.rho, g),
            mass_eta: integral(&s.eta, g),
            mass_tau: integral(&s.tau, g),
            domination_margin: domination_margin(s, p),
            energy_residual: (energy + dissipation_cum) - (e0 + work_cum + source_cum),
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DiagnosticsRecord> {
        self.records
    }
}

/// The recorded residual of largest magnitude, with its sign; 0 for an
/// empty history.
pub fn energy_residual(history: &[DiagnosticsRecord]) -> f64 {
    history
        .iter()
        .map(|r| r.energy_residual)
        .fold(0.0, |acc, r| if r.abs() > acc.abs() { r } else { acc })
}

/// Largest relative drift of a mass column against its first entry.
pub fn mass_drift(history: &[DiagnosticsRecord], column: fn(&DiagnosticsRecord) -> f64) -> f64 {
    let Some(first) = history.first() else {
        return 0.0;
    };
    let m0 = column(first);
    history
        .iter()
        .map(|r| ((column(r) - m0) / m0).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenormField {
    Rho,
    Eta,
    Tau,
    SRho,
    STau,
}

impl RenormField {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(RenormField::Rho),
            "eta" => Ok(RenormField::Eta),
            "tau" => Ok(RenormField::Tau),
            "s_rho" => Ok(RenormField::SRho),
            "s_tau" => Ok(RenormField::STau),
            other => Err(Error::domain("renorm_residual", format!("unknown field `{other}`"))),
        }
    }

    fn is_ratio(self) -> bool {
        matches!(self, RenormField::SRho | RenormField::STau)
    }

    fn is_damped(self) -> bool {
        matches!(self, RenormField::Tau | RenormField::STau)
    }

    /// Cell values of the field; ratios are 0 in vacuum cells.
    pub fn extract(self, s: &State) -> ScalarField {
        let ratio = |num: &ScalarField| num.zip_map(&s.eta, |n, e| if e > 0.0 { n / e } else { 0.0 });
        match self {
            RenormField::Rho => s.rho.clone(),
            RenormField::Eta => s.eta.clone(),
            RenormField::Tau => s.tau.clone(),
            RenormField::SRho => ratio(&s.rho),
            RenormField::STau => ratio(&s.tau),
        }
    }
}

/// Renormalizing function `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenormKind {
    Square,
    XLogX,
}

impl RenormKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(RenormKind::Square),
            "xlogx" => Ok(RenormKind::XLogX),
            other => Err(Error::domain("renorm_residual", format!("unknown b kind `{other}`"))),
        }
    }

    pub fn b(self, x: f64) -> f64 {
        match self {
            RenormKind::Square => x * x,
            RenormKind::XLogX => xlogx(x),
        }
    }

    /// `b'(x) x`, with the `x log x + x -> 0` limit at the origin.
    pub fn b_prime_times(self, x: f64) -> f64 {
        match self {
            RenormKind::Square => 2.0 * x * x,
            RenormKind::XLogX => {
                if x <= 0.0 {
                    0.0
                } else {
                    xlogx(x) + x
                }
            }
        }
    }
}

/// Streaming evaluation of the renormalized identity with test function 1.
///
/// For a continuity field `zeta`:
/// `int b(t) - int b(0) + int int (b' zeta - b) div u + [tau] int int b'(tau) tau / (2 lambda)`.
/// For a ratio `s` transported by `u`:
/// `int b(t) - int b(0) - int int b div u + [s_tau] int int b'(s) s / (2 lambda)`.
/// Time integrals use [`CumulativeIntegral`].
#[derive(Clone, Debug)]
pub struct RenormTracker {
    field: RenormField,
    kind: RenormKind,
    rate: f64,
    grid: Grid,
    b0: Option<f64>,
    latest: f64,
    flux: CumulativeIntegral,
}

impl RenormTracker {
    pub fn new(field: RenormField, kind: RenormKind, g: &Grid, p: &ModelParams) -> Self {
        RenormTracker {
            field,
            kind,
            rate: p.damping_rate(),
            grid: g.clone(),
            b0: None,
            latest: 0.0,
            flux: CumulativeIntegral::new(),
        }
    }

    /// Adds the state at `s.time` together with `div u` at that time.
    pub fn observe(&mut self, s: &State, div_u: &ScalarField) {
        let z = self.field.extract(s);
        let (kind, g) = (self.kind, &self.grid);
        let b_int = integral(&z.map(|x| kind.b(x)), g);
        self.b0.get_or_insert(b_int);
        self.latest = b_int;
        let damp = if self.field.is_damped() { self.rate } else { 0.0 };
        let ratio = self.field.is_ratio();
        let density = z.zip_map(div_u, |x, d| {
            let transport = if ratio {
                -kind.b(x) * d
            } else {
                (kind.b_prime_times(x) - kind.b(x)) * d
            };
            transport + damp * kind.b_prime_times(x)
        });
        self.flux.push(s.time, integral(&density, g));
    }

    /// Signed residual.
    pub fn raw(&self) -> f64 {
        self.latest - self.b0.unwrap_or(0.0) + self.flux.total()
    }

    /// `|residual| / |int b(0)|`, or the raw magnitude when that vanishes.
    pub fn normalized(&self) -> f64 {
        let scale = self.b0.unwrap_or(0.0).abs();
        if scale > 0.0 {
            self.raw().abs() / scale
        } else {
            self.raw().abs()
        }
    }
}

/// Normalized renormalized residual over a state history with matching
/// `div u` fields.
pub fn renorm_residual(
    states: &[State],
    div_u: &[ScalarField],
    kind: RenormKind,
    field: RenormField,
    g: &Grid,
    p: &ModelParams,
) -> Result<f64> {
    if states.len() != div_u.len() {
        return Err(Error::domain(
            "renorm_residual",
            format!("{} states but {} divergence fields", states.len(), div_u.len()),
        ));
    }
    let mut tracker = RenormTracker::new(field, kind, g, p);
    for (s, d) in states.iter().zip(div_u) {
        tracker.observe(s, d);
    }
    Ok(tracker.normalized())
}

/// `int eta |s_h - s_ref|^theta`.
pub fn eta_ratio_defect(eta: &ScalarField, s_h: &ScalarField, s_ref: &ScalarField, g: &Grid, theta: f64) -> f64 {
    let diff = s_h.zip_map(s_ref, |a, b| (a - b).abs().powf(theta));
    integral(&eta.zip_map(&diff, |e, d| e * d), g)
}

/// Plain `L1` distance `int |a - b|`.
pub fn l1_distance(a: &ScalarField, b: &ScalarField, g: &Grid) -> f64 {
    integral(&a.zip_map(b, |x, y| (x - y).abs()), g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn simple_params() -> ModelParams {
        ModelParams {
            a: 1.0,
            gamma: 2.0,
            z: 1.0,
            k: 0.0,
            ..ModelParams::default()
        }
    }

    #[test]
    fn total_energy_examples() {
        let g = Grid::unit_square(8, Boundary::Periodic).unwrap();
        let p = simple_params();
        let s = State::uniform(&g, 1.0, 1.0, 1.0);
        assert!((total_energy(&s, &g, &p).unwrap() - 2.0).abs() < 1e-14);
        let zero = State::uniform(&g, 0.0, 0.0, 0.0);
        assert_eq!(total_energy(&zero, &g, &p).unwrap(), 0.0);
        let mut moving = s.clone();
        moving.mom = VectorField::from_fn(&g, |_, _| [0.3, 0.4]);
        let gain = total_energy(&moving, &g, &p).unwrap() - 2.0;
        assert!((gain - 0.5 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn margin_examples() {
        let g = Grid::new_1d(4, 1.0, Boundary::Periodic).unwrap();
        let p = ModelParams::default();
        let eta = ScalarField::from_fn(&g, |x, _| 1.0 + x);
        let s = State {
            rho: eta.clone(),
            eta: eta.clone(),
            tau: eta.clone(),
            mom: VectorField::zeros(&g),
            time: 0.0,
        };
        assert_eq!(domination_margin(&s, &p), eta.min());
        let mut tight = s.clone();
        tight.rho = eta.map(|e| p.c_bar * e);
        assert_eq!(domination_margin(&tight, &p), 0.0);
    }

    #[test]
    fn cumulative_rule_is_exact_for_quadratics() {
        let f = |t: f64| 3.0 * t * t - 2.0 * t + 0.5;
        let antideriv = |t: f64| t * t * t - t * t + 0.5 * t;
        let mut ci = CumulativeIntegral::new();
        let times = [0.0, 0.1, 0.25, 0.3, 0.55, 0.9, 1.0];
        ci.push(times[0], f(times[0]));
        ci.push(times[1], f(times[1]));
        let after_first = ci.total();
        for &t in &times[2..] {
            ci.push(t, f(t));
        }
        // The first interval is a trapezoid; everything after is exact.
        let first_exact = antideriv(0.1) - antideriv(0.0);
        let expected = antideriv(1.0) - antideriv(0.0) - first_exact + after_first;
        assert!((ci.total() - expected).abs() < 1e-14);
    }

    #[test]
    fn cumulative_rule_stays_monotone_for_non_negative_data() {
        let mut ci = CumulativeIntegral::new();
        let mut last = 0.0;
        for (k, v) in [5.0, 0.0, 0.0, 7.0, 0.0, 0.0].iter().enumerate() {
            let total = ci.push(k as f64 * 0.1, *v);
            assert!(total >= last);
            last = total;
        }
    }

    #[test]
    fn residual_is_zero_for_zero_data() {
        let g = Grid::unit_square(6, Boundary::Periodic).unwrap();
        let p = ModelParams::default();
        let mut rec = DiagnosticsRecorder::new(&g, &p, VectorField::zeros(&g));
        let mut s = State::uniform(&g, 0.0, 0.0, 0.0);
        for n in 0..4 {
            s.time = n as f64 * 0.1;
            rec.record(&s).unwrap();
        }
        assert_eq!(energy_residual(rec.records()), 0.0);
        assert_eq!(energy_residual(&[]), 0.0);
    }

    #[test]
    fn residual_reports_largest_magnitude() {
        let mk = |r: f64| DiagnosticsRecord {
            energy_residual: r,
            ..DiagnosticsRecord::default()
        };
        assert_eq!(energy_residual(&[mk(1e-3), mk(-4e-3), mk(2e-3)]), -4e-3);
    }

    #[test]
    fn record_row_round_trip() {
        let r = DiagnosticsRecord {
            time: 0.1,
            kinetic: 1.0 / 3.0,
            energy_residual: -1e-17,
            ..DiagnosticsRecord::default()
        };
        let row = r.to_string();
        assert_eq!(row.split(',').count(), DiagnosticsRecord::FIELD_COUNT);
        assert_eq!(CSV_HEADER.split(',').count(), DiagnosticsRecord::FIELD_COUNT);
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(DiagnosticsRecord::from_values(&v).unwrap(), r);
    }

    #[test]
    fn renorm_constant_fields_at_rest() {
        let g = Grid::unit_square(6, Boundary::Periodic).unwrap();
        let p = ModelParams::default();
        let zero = ScalarField::zeros(&g);
        let rate = p.damping_rate();
        let mut states = Vec::new();
        for n in 0..=100 {
            let t = n as f64 * 0.01;
            let mut s = State::uniform(&g, 1.5, 1.2, 0.9 * (-rate * t).exp());
            s.time = t;
            states.push(s);
        }
        let divs = vec![zero; states.len()];
        for field in [RenormField::Rho, RenormField::Eta, RenormField::SRho] {
            for kind in [RenormKind::Square, RenormKind::XLogX] {
                assert_eq!(renorm_residual(&states, &divs, kind, field, &g, &p).unwrap(), 0.0);
            }
        }
        // Damped fields follow the exponential, so only quadrature error remains.
        for field in [RenormField::Tau, RenormField::STau] {
            for kind in [RenormKind::Square, RenormKind::XLogX] {
                let r = renorm_residual(&states, &divs, kind, field, &g, &p).unwrap();
                assert!(r < 1e-5, "{field:?} {kind:?}: {r}");
            }
        }
        assert!(RenormField::parse("mu").is_err());
        assert!(RenormKind::parse("cube").is_err());
    }

    #[test]
    fn defect_power_mean_ordering() {
        let g = Grid::unit_square(10, Boundary::Periodic).unwrap();
        let eta = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
        let a = ScalarField::from_fn(&g, |x, _| x.sin());
        let b = ScalarField::from_fn(&g, |_, y| 0.5 * y);
        assert_eq!(eta_ratio_defect(&eta, &a, &a, &g, 1.0), 0.0);
        let mass = integral(&eta, &g);
        let d1 = eta_ratio_defect(&eta, &a, &b, &g, 1.0) / mass;
        let d2 = eta_ratio_defect(&eta, &a, &b, &g, 2.0) / mass;
        assert!(d1 <= d2.sqrt() + 1e-15);
    }
}
