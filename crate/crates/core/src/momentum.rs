//! Explicit momentum update: upwind convection, central gradient of the
//! signed total pressure, Newtonian viscosity and a body force.

use crate::error::{Error, Result};
use crate::grid::{
    apply_bc, gradient, velocity_from_momentum, FieldKind, Grid, ScalarField, State, VectorField, RHO_FLOOR,
};
use crate::model::{contract, newtonian_stress, total_pressure, ModelParams, Tensor2};
use crate::transport::{flux_divergence, transport_substep, FaceVelocity, TransportConfig};

/// Body force per unit mass.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    /// Constant acceleration vector.
    Gravity([f64; 2]),
    /// Any precomputed field on the grid.
    Field(VectorField),
}

impl Forcing {
    pub fn name(&self) -> &'static str {
        match self {
            Forcing::Zero => "zero",
            Forcing::Gravity(_) => "gravity",
            Forcing::Field(_) => "field",
        }
    }

    pub fn eval(&self, g: &Grid) -> VectorField {
        match self {
            Forcing::Zero => VectorField::zeros(g),
            Forcing::Gravity(a) => VectorField::from_fn(g, |_, _| *a),
            Forcing::Field(f) => f.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumConfig {
    /// Viscous Courant factor in `(0, 0.5]`.
    pub visc_cfl: f64,
    /// Advective-acoustic Courant factor.
    pub cfl: f64,
    pub dt_max: f64,
    pub forcing: Forcing,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        MomentumConfig {
            visc_cfl: 0.25,
            cfl: 0.4,
            dt_max: 0.05,
            forcing: Forcing::Zero,
        }
    }
}

impl MomentumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.visc_cfl > 0.0 && self.visc_cfl <= 0.5) {
            return Err(Error::Params(format!(
                "visc_cfl must lie in (0, 0.5], got {}",
                self.visc_cfl
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Params(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Params(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        Ok(())
    }
}

/// Cell-centred velocity gradient `G[i][j] = d u_i / d x_j` by central
/// differences with odd ghosts, so wall cells see the zero wall velocity.
pub fn velocity_gradient(u: &VectorField, g: &Grid) -> Vec<Tensor2> {
    let d = g.dim();
    let mut out = vec![[[0.0; 2]; 2]; g.len()];
    for c in 0..d {
        let gh = apply_bc(u.comp(c), g, FieldKind::Velocity);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (ii, jj) = (i as isize, j as isize);
                let t = &mut out[g.idx(i, j)];
                t[c][0] = (gh.get(ii + 1, jj) - gh.get(ii - 1, jj)) / (2.0 * g.dx);
                if d == 2 {
                    t[c][1] = (gh.get(ii, jj + 1) - gh.get(ii, jj - 1)) / (2.0 * g.dy);
                }
            }
        }
    }
    out
}

/// Pointwise `S(grad u) : grad u`.
pub fn dissipation_density(u: &VectorField, g: &Grid, p: &ModelParams) -> ScalarField {
    let grads = velocity_gradient(u, g);
    let values = grads
        .iter()
        .map(|gu| contract(&newtonian_stress(gu, p), gu))
        .collect();
    ScalarField::from_vec(g.nx, g.ny, values).expect("shape matches grid")
}

/// `div S(grad u)` written as
/// `(mu_s / 2) lap u + (mu_s (1/2 - 1/d) + mu_b) grad div u`
/// with compact second differences and odd ghosts.
pub fn viscous_term(u: &VectorField, g: &Grid, p: &ModelParams) -> VectorField {
    let d = g.dim();
    let lap_coef = 0.5 * p.mu_s;
    let gd_coef = p.mu_s * (0.5 - 1.0 / d as f64) + p.mu_b;
    let ghosted: Vec<_> = (0..d).map(|c| apply_bc(u.comp(c), g, FieldKind::Velocity)).collect();
    let (hx2, hy2, hxy) = (g.dx * g.dx, g.dy * g.dy, 4.0 * g.dx * g.dy);
    let mut comps = Vec::with_capacity(d);
    for c in 0..d {
        let mut out = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (ii, jj) = (i as isize, j as isize);
                let second = |gh: &crate::grid::Ghosted, axis: usize| {
                    let v0 = gh.get(ii, jj);
                    if axis == 0 {
                        (gh.get(ii + 1, jj) - 2.0 * v0 + gh.get(ii - 1, jj)) / hx2
                    } else {
                        (gh.get(ii, jj + 1) - 2.0 * v0 + gh.get(ii, jj - 1)) / hy2
                    }
                };
                let mut lap = 0.0;
                for axis in 0..d {
                    lap += second(&ghosted[c], axis);
                }
                // d/dx_c (div u) = d^2 u_c / dx_c^2 + mixed terms.
                let mut grad_div = second(&ghosted[c], c);
                if d == 2 {
                    let other = &ghosted[1 - c];
                    let mixed = (other.get(ii + 1, jj + 1) - other.get(ii + 1, jj - 1) - other.get(ii - 1, jj + 1)
                        + other.get(ii - 1, jj - 1))
                        / hxy;
                    grad_div += mixed;
                }
                out.set(i, j, lap_coef * lap + gd_coef * grad_div);
            }
        }
        comps.push(out);
    }
    VectorField::from_components(comps)
}

/// Pointwise total pressure `h = q(eta) + p(rho) - tau`.
pub fn pressure_field(s: &State, g: &Grid, p: &ModelParams) -> Result<ScalarField> {
    let values = (0..g.len())
        .map(|k| total_pressure(&s.sample(k), p))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::from_vec(g.nx, g.ny, values)
}

/// Largest signal speed `c` with `c^2 = (rho p'(rho) + eta q'(eta) - tau) / rho`,
/// clipped at zero where the stress makes the bracket negative.
pub fn max_sound_speed(s: &State, p: &ModelParams) -> f64 {
    let mut c2_max = 0.0f64;
    for k in 0..s.rho.values().len() {
        let z = s.sample(k);
        if z.rho <= RHO_FLOOR {
            continue;
        }
        let stiff = p.a * p.gamma * z.rho.powf(p.gamma) + z.eta * (p.k * (p.l - 1.0) + 2.0 * p.z * z.eta) - z.tau;
        c2_max = c2_max.max(stiff / z.rho);
    }
    c2_max.sqrt()
}

fn viscous_limit(s: &State, g: &Grid, p: &ModelParams, mc: &MomentumConfig) -> f64 {
    let nu = p.mu_s + p.mu_b;
    if nu <= 0.0 {
        return f64::INFINITY;
    }
    let h = g.min_spacing();
    mc.visc_cfl * h * h * s.rho.min().max(0.0) / nu
}

/// Global step: the minimum of `dt_max`, the advective-acoustic limit
/// `cfl h / (max|u| + c)` and the viscous limit `visc_cfl h^2 rho_min / (mu_s + mu_b)`.
pub fn stable_dt(s: &State, g: &Grid, p: &ModelParams, mc: &MomentumConfig) -> Result<f64> {
    let u = velocity_from_momentum(s, RHO_FLOOR)?;
    let m = u.max_abs();
    let speed = m[0].max(m[1]) + max_sound_speed(s, p);
    let mut dt = mc.dt_max;
    if speed > 0.0 {
        dt = dt.min(mc.cfl * g.min_spacing() / speed);
    }
    Ok(dt.min(viscous_limit(s, g, p, mc)))
}

fn check_finite(f: &VectorField, term: &'static str) -> Result<()> {
    if f.all_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { term })
    }
}

/// Returns the momentum after one explicit Euler step from `s`.
pub fn momentum_step(s: &State, dt: f64, g: &Grid, p: &ModelParams, mc: &MomentumConfig) -> Result<VectorField> {
    let u = velocity_from_momentum(s, RHO_FLOOR)?;
    let faces = FaceVelocity::from_cells(&u, g);
    momentum_step_with(s, &u, &faces, dt, g, p, mc)
}

fn momentum_step_with(
    s: &State,
    u: &VectorField,
    faces: &FaceVelocity,
    dt: f64,
    g: &Grid,
    p: &ModelParams,
    mc: &MomentumConfig,
) -> Result<VectorField> {
    let courant = faces.max_outflow_courant(dt, g);
    if courant > 1.0 + 1e-12 {
        return Err(Error::StepSize {
            kind: "advective",
            dt,
            limit: dt / courant,
        });
    }
    let visc_limit = viscous_limit(s, g, p, mc);
    if dt > visc_limit * (1.0 + 1e-12) {
        return Err(Error::StepSize {
            kind: "viscous",
            dt,
            limit: visc_limit,
        });
    }

    let grad_h = gradient(&pressure_field(s, g, p)?, g);
    check_finite(&grad_h, "pressure")?;
    let visc = viscous_term(u, g, p);
    check_finite(&visc, "viscous")?;
    let force = mc.forcing.eval(g);

    let mut comps = Vec::with_capacity(g.dim());
    for c in 0..g.dim() {
        let m = s.mom.comp(c);
        let conv = flux_divergence(m, faces, g);
        if !conv.all_finite() {
            return Err(Error::Divergence { term: "convection" });
        }
        let mut out = m.clone();
        let (gh, vs, fc, rho) = (grad_h.comp(c), visc.comp(c), force.comp(c), &s.rho);
        for (k, v) in out.values_mut().iter_mut().enumerate() {
            let rhs = -conv.values()[k] - gh.values()[k] + vs.values()[k] + rho.values()[k] * fc.values()[k];
            *v += dt * rhs;
        }
        if !out.all_finite() {
            return Err(Error::Divergence { term: "forcing" });
        }
        comps.push(out);
    }
    Ok(VectorField::from_components(comps))
}

/// One full time step: momentum and densities both advance from the old
/// state, using the same face velocities for the densities and for the
/// convective momentum flux.
pub fn coupled_step(
    s: &State,
    dt: f64,
    g: &Grid,
    p: &ModelParams,
    tc: &TransportConfig,
    mc: &MomentumConfig,
) -> Result<State> {
    let u = velocity_from_momentum(s, RHO_FLOOR)?;
    let faces = FaceVelocity::from_cells(&u, g);
    let mom = momentum_step_with(s, &u, &faces, dt, g, p, mc)?;
    let mut next = transport_substep(s, &faces, dt, g, tc, p)?;
    next.mom = mom;
    Ok(next)
}
