//! Donor-cell transport of `rho`, `eta`, `tau` and exact integration of the
//! stress damping, combined by operator splitting.
//!
//! All three densities go through the same linear, monotone update with the
//! same face velocities. Consequently any non-negative combination such as
//! `c_bar * eta - rho` obeys that update too, which is what makes positivity
//! and domination hold cell by cell after every step.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, ScalarField, State, VectorField};
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitting {
    /// Transport, then damping. `sum tau` decays exactly like `exp(-t/(2 lambda))`.
    Lie,
    /// Half damping, transport, half damping.
    Strang,
}

impl Splitting {
    pub fn name(&self) -> &'static str {
        match self {
            Splitting::Lie => "lie",
            Splitting::Strang => "strang",
        }
    }

    pub fn parse(s: &str) -> Option<Splitting> {
        match s {
            "lie" => Some(Splitting::Lie),
            "strang" => Some(Splitting::Strang),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    /// Courant factor in `(0, 1]`.
    pub cfl: f64,
    pub splitting: Splitting,
    pub dt_max: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            cfl: 0.4,
            splitting: Splitting::Strang,
            dt_max: 0.05,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Params(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Params(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        Ok(())
    }
}

/// Normal velocities on cell faces.
///
/// `ux[j * (nx + 1) + i]` lives on the face left of cell `(i, j)`;
/// `uy[j * nx + i]` on the face below it. Wall faces of a no-slip box carry
/// zero velocity; periodic grids duplicate the seam face.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceVelocity {
    nx: usize,
    ny: usize,
    dim: usize,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl FaceVelocity {
    fn empty(g: &Grid) -> Self {
        FaceVelocity {
            nx: g.nx,
            ny: g.ny,
            dim: g.dim(),
            ux: vec![0.0; (g.nx + 1) * g.ny],
            uy: if g.dim() == 2 { vec![0.0; g.nx * (g.ny + 1)] } else { Vec::new() },
        }
    }

    fn wall_x(&self, g: &Grid, i: usize) -> bool {
        g.bc == Boundary::NoSlipBox && (i == 0 || i == self.nx)
    }

    fn wall_y(&self, g: &Grid, j: usize) -> bool {
        g.bc == Boundary::NoSlipBox && (j == 0 || j == self.ny)
    }

    /// Face values as averages of the two adjacent cell velocities.
    pub fn from_cells(u: &VectorField, g: &Grid) -> Self {
        let mut fv = Self::empty(g);
        let (nx, ny) = (g.nx, g.ny);
        let ucx = u.comp(0);
        for j in 0..ny {
            for i in 0..=nx {
                if fv.wall_x(g, i) {
                    continue;
                }
                let left = ucx.get((i + nx - 1) % nx, j);
                let right = ucx.get(i % nx, j);
                fv.ux[j * (nx + 1) + i] = 0.5 * (left + right);
            }
        }
        if fv.dim == 2 {
            let ucy = u.comp(1);
            for j in 0..=ny {
                if fv.wall_y(g, j) {
                    continue;
                }
                for i in 0..nx {
                    let below = ucy.get(i, (j + ny - 1) % ny);
                    let above = ucy.get(i, j % ny);
                    fv.uy[j * nx + i] = 0.5 * (below + above);
                }
            }
        }
        fv
    }

    /// Samples an analytic velocity at face midpoints.
    pub fn from_fn<F: Fn(f64, f64) -> [f64; 2]>(g: &Grid, f: F) -> Self {
        let mut fv = Self::empty(g);
        for j in 0..g.ny {
            for i in 0..=g.nx {
                if !fv.wall_x(g, i) {
                    let [_, y] = g.center(0, j);
                    let x = g.origin[0] + i as f64 * g.dx;
                    fv.ux[j * (g.nx + 1) + i] = f(x, y)[0];
                }
            }
        }
        if fv.dim == 2 {
            for j in 0..=g.ny {
                if fv.wall_y(g, j) {
                    continue;
                }
                for i in 0..g.nx {
                    let [x, _] = g.center(i, 0);
                    let y = g.origin[1] + j as f64 * g.dy;
                    fv.uy[j * g.nx + i] = f(x, y)[1];
                }
            }
        }
        fv
    }

    /// Face fluxes of a stream function `psi` (`u = dpsi/dy`, `v = -dpsi/dx`),
    /// so the discrete face divergence vanishes up to round-off. 2-D only.
    pub fn from_stream_function<F: Fn(f64, f64) -> f64>(g: &Grid, psi: F) -> Result<Self> {
        if g.dim() != 2 {
            return Err(Error::Grid("stream functions need a 2-D grid".into()));
        }
        let mut fv = Self::empty(g);
        let xf = |i: usize| g.origin[0] + i as f64 * g.dx;
        let yf = |j: usize| g.origin[1] + j as f64 * g.dy;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                if !fv.wall_x(g, i) {
                    fv.ux[j * (g.nx + 1) + i] = (psi(xf(i), yf(j + 1)) - psi(xf(i), yf(j))) / g.dy;
                }
            }
        }
        for j in 0..=g.ny {
            if fv.wall_y(g, j) {
                continue;
            }
            for i in 0..g.nx {
                fv.uy[j * g.nx + i] = -(psi(xf(i + 1), yf(j)) - psi(xf(i), yf(j))) / g.dx;
            }
        }
        Ok(fv)
    }

    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> f64 {
        self.ux[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> f64 {
        self.uy[j * self.nx + i]
    }

    /// Net outflow per unit volume, the face-consistent `div u`.
    pub fn divergence(&self, g: &Grid) -> ScalarField {
        let mut out = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut d = (self.x_face(i + 1, j) - self.x_face(i, j)) / g.dx;
                if self.dim == 2 {
                    d += (self.y_face(i, j + 1) - self.y_face(i, j)) / g.dy;
                }
                out.set(i, j, d);
            }
        }
        out
    }

    pub fn max_abs(&self) -> [f64; 2] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        [m(&self.ux), m(&self.uy)]
    }

    /// Largest `dt * (total outflow rate)` over cells. The donor-cell update
    /// is monotone exactly when this is at most one.
    pub fn max_outflow_courant(&self, dt: f64, g: &Grid) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut out = (self.x_face(i + 1, j).max(0.0) - self.x_face(i, j).min(0.0)) / g.dx;
                if self.dim == 2 {
                    out += (self.y_face(i, j + 1).max(0.0) - self.y_face(i, j).min(0.0)) / g.dy;
                }
                worst = worst.max(dt * out);
            }
        }
        worst
    }

    fn check_step(&self, dt: f64, g: &Grid) -> Result<()> {
        let c = self.max_outflow_courant(dt, g);
        if c > 1.0 + 1e-12 {
            return Err(Error::StepSize {
                kind: "donor-cell positivity",
                dt,
                limit: dt / c,
            });
        }
        Ok(())
    }
}

/// `div(f u)` with first-order upwind face values.
pub fn flux_divergence(f: &ScalarField, faces: &FaceVelocity, g: &Grid) -> ScalarField {
    let (nx, ny) = (g.nx, g.ny);
    let mut out = ScalarField::zeros(g);
    let upwind = |vel: f64, behind: f64, ahead: f64| {
        if vel > 0.0 {
            vel * behind
        } else {
            vel * ahead
        }
    };
    for j in 0..ny {
        // Flux through the left face of cell i.
        let mut left_flux = upwind(faces.x_face(0, j), f.get((nx - 1) % nx, j), f.get(0, j));
        for i in 0..nx {
            let right_flux = upwind(faces.x_face(i + 1, j), f.get(i, j), f.get((i + 1) % nx, j));
            out.set(i, j, (right_flux - left_flux) / g.dx);
            left_flux = right_flux;
        }
    }
    if faces.dim == 2 {
        for i in 0..nx {
            let mut low = upwind(faces.y_face(i, 0), f.get(i, ny - 1), f.get(i, 0));
            for j in 0..ny {
                let high = upwind(faces.y_face(i, j + 1), f.get(i, j), f.get(i, (j + 1) % ny));
                let v = out.get(i, j) + (high - low) / g.dy;
                out.set(i, j, v);
                low = high;
            }
        }
    }
    out
}

/// One conservative donor-cell step `f - dt div(f u)`.
pub fn upwind_step_faces(f: &ScalarField, faces: &FaceVelocity, dt: f64, g: &Grid) -> Result<ScalarField> {
    faces.check_step(dt, g)?;
    let div = flux_divergence(f, faces, g);
    Ok(f.zip_map(&div, |v, d| v - dt * d))
}

/// [`upwind_step_faces`] with faces averaged from a cell velocity.
pub fn upwind_step(f: &ScalarField, u: &VectorField, dt: f64, g: &Grid) -> Result<ScalarField> {
    upwind_step_faces(f, &FaceVelocity::from_cells(u, g), dt, g)
}

/// Exact solution of `d tau/dt = -tau / (2 lambda)` over `dt`.
pub fn damping_step(tau: &ScalarField, dt: f64, p: &ModelParams) -> ScalarField {
    let factor = (-dt * p.damping_rate()).exp();
    tau.map(|t| t * factor)
}

/// Exact solution of `d tau/dt = (k eta - tau) / (2 lambda)` with `eta` frozen.
pub fn full_tau_source_step(tau: &ScalarField, eta: &ScalarField, dt: f64, p: &ModelParams) -> ScalarField {
    let factor = (-dt * p.damping_rate()).exp();
    tau.zip_map(eta, |t, e| {
        let eq = p.k * e;
        eq + (t - eq) * factor
    })
}

/// `c.cfl * min(dx / max|u_x|, dy / max|u_y|)`, capped at `c.dt_max`.
pub fn cfl_dt(u: &VectorField, g: &Grid, c: &TransportConfig) -> f64 {
    let m = u.max_abs();
    let mut dt = c.dt_max;
    if m[0] > 0.0 {
        dt = dt.min(c.cfl * g.dx / m[0]);
    }
    if g.dim() == 2 && m[1] > 0.0 {
        dt = dt.min(c.cfl * g.dy / m[1]);
    }
    dt
}

/// Transports `rho`, `eta`, `tau` with one shared stencil and damps `tau`
/// according to the splitting. Momentum is copied unchanged; time advances.
pub fn transport_substep(
    s: &State,
    faces: &FaceVelocity,
    dt: f64,
    g: &Grid,
    c: &TransportConfig,
    p: &ModelParams,
) -> Result<State> {
    faces.check_step(dt, g)?;
    let advect = |f: &ScalarField| {
        let div = flux_divergence(f, faces, g);
        f.zip_map(&div, |v, d| v - dt * d)
    };
    let tau = match c.splitting {
        Splitting::Lie => damping_step(&advect(&s.tau), dt, p),
        Splitting::Strang => {
            let half = damping_step(&s.tau, 0.5 * dt, p);
            damping_step(&advect(&half), 0.5 * dt, p)
        }
    };
    Ok(State {
        rho: advect(&s.rho),
        eta: advect(&s.eta),
        tau,
        mom: s.mom.clone(),
        time: s.time + dt,
    })
}

/// One split step of the unreduced pair `(eta, tau_full)`, whose stress
/// relaxes toward `k eta`. Returns `(eta, tau_full)` at the new level.
pub fn full_model_substep(
    eta: &ScalarField,
    tau_full: &ScalarField,
    faces: &FaceVelocity,
    dt: f64,
    g: &Grid,
    splitting: Splitting,
    p: &ModelParams,
) -> Result<(ScalarField, ScalarField)> {
    match splitting {
        Splitting::Lie => {
            let eta_new = upwind_step_faces(eta, faces, dt, g)?;
            let tau_adv = upwind_step_faces(tau_full, faces, dt, g)?;
            let tau_new = full_tau_source_step(&tau_adv, &eta_new, dt, p);
            Ok((eta_new, tau_new))
        }
        Splitting::Strang => {
            let tau_half = full_tau_source_step(tau_full, eta, 0.5 * dt, p);
            let eta_new = upwind_step_faces(eta, faces, dt, g)?;
            let tau_adv = upwind_step_faces(&tau_half, faces, dt, g)?;
            let tau_new = full_tau_source_step(&tau_adv, &eta_new, 0.5 * dt, p);
            Ok((eta_new, tau_new))
        }
    }
}
