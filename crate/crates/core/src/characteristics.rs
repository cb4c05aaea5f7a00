//! Semi-Lagrangian reference solutions built from particle paths, and the
//! pointwise bounds that follow from integrating along them.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{divergence, Boundary, Grid, ScalarField, State, VectorField};
use crate::model::ModelParams;

/// Bilinear interpolation of cell-centred data. Periodic grids wrap; in a
/// no-slip box the point is clamped to the domain and the ghost value is
/// the even (`odd = false`) or odd mirror of the wall cell.
fn interpolate(f: &ScalarField, g: &Grid, x: [f64; 2], odd: bool) -> f64 {
    let axis = |pos: f64, origin: f64, h: f64, n: usize| -> (isize, f64) {
        let len = h * n as f64;
        let mut rel = pos - origin;
        match g.bc {
            Boundary::Periodic => rel = rel.rem_euclid(len),
            Boundary::NoSlipBox => rel = rel.clamp(0.0, len),
        }
        let fi = rel / h - 0.5;
        let i0 = fi.floor();
        (i0 as isize, (fi - i0).clamp(0.0, 1.0))
    };
    let sign = if odd { -1.0 } else { 1.0 };
    let fetch = |i: isize, j: isize| -> f64 {
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let mut s = 1.0;
        let wrap = |k: isize, n: isize, s: &mut f64| -> usize {
            match g.bc {
                Boundary::Periodic => k.rem_euclid(n) as usize,
                Boundary::NoSlipBox => {
                    if k < 0 {
                        *s *= sign;
                        0
                    } else if k >= n {
                        *s *= sign;
                        (n - 1) as usize
                    } else {
                        k as usize
                    }
                }
            }
        };
        let ii = wrap(i, nx, &mut s);
        let jj = if g.dim() == 2 { wrap(j, ny, &mut s) } else { 0 };
        s * f.get(ii, jj)
    };
    let (i0, wx) = axis(x[0], g.origin[0], g.dx, g.nx);
    if g.dim() == 1 {
        let (a, b) = (fetch(i0, 0), fetch(i0 + 1, 0));
        let v = a + wx * (b - a);
        return if odd { v } else { v.clamp(a.min(b), a.max(b)) };
    }
    let (j0, wy) = axis(x[1], g.origin[1], g.dy, g.ny);
    let (a, b, c, d) = (fetch(i0, j0), fetch(i0 + 1, j0), fetch(i0, j0 + 1), fetch(i0 + 1, j0 + 1));
    let v = (1.0 - wy) * ((1.0 - wx) * a + wx * b) + wy * ((1.0 - wx) * c + wx * d);
    if odd {
        v
    } else {
        // Convex combination: pin round-off inside the corner range.
        v.clamp(a.min(b).min(c).min(d), a.max(b).max(c).max(d))
    }
}

/// Velocity snapshots at strictly increasing times on one grid.
#[derive(Clone, Debug)]
pub struct VelocityHistory {
    grid: Grid,
    times: Vec<f64>,
    fields: Vec<VectorField>,
    divs: Vec<ScalarField>,
    div_norms: Vec<f64>,
    max_speed: f64,
}

impl VelocityHistory {
    pub fn new(g: &Grid) -> Self {
        VelocityHistory {
            grid: g.clone(),
            times: Vec::new(),
            fields: Vec::new(),
            divs: Vec::new(),
            div_norms: Vec::new(),
            max_speed: 0.0,
        }
    }

    /// A time-independent field on `[t0, t1]`.
    pub fn steady(g: &Grid, u: VectorField, t0: f64, t1: f64) -> Result<Self> {
        let mut vh = Self::new(g);
        vh.push(t0, u.clone())?;
        vh.push(t1, u)?;
        Ok(vh)
    }

    pub fn push(&mut self, t: f64, u: VectorField) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::domain(
                    "VelocityHistory::push",
                    format!("time {t} does not follow {last}"),
                ));
            }
        }
        if u.dim() != self.grid.dim() || !u.comp(0).matches(&self.grid) {
            return Err(Error::Grid("velocity snapshot does not match the history grid".into()));
        }
        let div = divergence(&u, &self.grid);
        let norm = div.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m = u.max_abs();
        self.max_speed = self.max_speed.max(m[0].max(m[1]));
        self.times.push(t);
        self.fields.push(u);
        self.divs.push(div);
        self.div_norms.push(norm);
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (f64::NAN, f64::NAN),
        }
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let (start, end) = self.span();
        let slack = 1e-12 * (1.0 + end.abs());
        if self.times.len() < 2 || !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfSpan { t, start, end });
        }
        Ok(())
    }

    /// Bracketing snapshot index and linear weight of the later one.
    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (a, b) = (self.times[k], self.times[k + 1]);
        (k, ((t - a) / (b - a)).clamp(0.0, 1.0))
    }

    pub fn velocity(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let (k, w) = self.bracket(t);
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate().take(self.grid.dim()) {
            let a = interpolate(self.fields[k].comp(c), &self.grid, x, true);
            let b = interpolate(self.fields[k + 1].comp(c), &self.grid, x, true);
            *o = a + w * (b - a);
        }
        out
    }

    /// Discrete `div u` interpolated to `(t, x)`; bounded by the cell maxima.
    pub fn divergence_at(&self, t: f64, x: [f64; 2]) -> f64 {
        let (k, w) = self.bracket(t);
        let a = interpolate(&self.divs[k], &self.grid, x, false);
        let b = interpolate(&self.divs[k + 1], &self.grid, x, false);
        a + w * (b - a)
    }

    /// `int_start^t max_x |div u|` with the snapshot norms linear in time.
    pub fn div_norm_integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.times.len().saturating_sub(1) {
            let (a, b) = (self.times[k], self.times[k + 1]);
            if t <= a {
                break;
            }
            let hi = t.min(b);
            let (na, nb) = (self.div_norms[k], self.div_norms[k + 1]);
            let n_hi = na + (nb - na) * (hi - a) / (b - a);
            acc += 0.5 * (hi - a) * (na + n_hi);
        }
        acc
    }

    /// Substep count keeping each substep at most half a cell of travel.
    fn substeps(&self, dt: f64) -> usize {
        let travel = dt.abs() * self.max_speed / (0.5 * self.grid.min_spacing());
        (travel.ceil() as usize).max(1)
    }

    fn confine(&self, x: [f64; 2]) -> [f64; 2] {
        let g = &self.grid;
        let mut out = x;
        for (axis, o) in out.iter_mut().enumerate().take(g.dim()) {
            let (origin, len) = (g.origin[axis], g.extent()[axis]);
            *o = match g.bc {
                Boundary::Periodic => origin + (*o - origin).rem_euclid(len),
                Boundary::NoSlipBox => o.clamp(origin, origin + len),
            };
        }
        out
    }
}

/// RK4 for the augmented system `X' = u(t, X)`, `I' = div u(t, X)`.
fn integrate(x0: [f64; 2], t0: f64, t1: f64, vh: &VelocityHistory, n: usize, with_div: bool) -> ([f64; 2], f64) {
    let h = (t1 - t0) / n as f64;
    let rhs = |t: f64, x: [f64; 2]| -> ([f64; 2], f64) {
        let x = vh.confine(x);
        let d = if with_div { vh.divergence_at(t, x) } else { 0.0 };
        (vh.velocity(t, x), d)
    };
    let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    let (mut x, mut acc) = (x0, 0.0);
    for step in 0..n {
        let t = t0 + step as f64 * h;
        let (k1, d1) = rhs(t, x);
        let (k2, d2) = rhs(t + 0.5 * h, add(x, k1, 0.5 * h));
        let (k3, d3) = rhs(t + 0.5 * h, add(x, k2, 0.5 * h));
        let (k4, d4) = rhs(t + h, add(x, k3, h));
        for c in 0..2 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        x = vh.confine(x);
        acc += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    }
    (x, acc)
}

/// Position at `t1` of the particle that sits at `x0` at `t0`; `t1 < t0`
/// traces backwards.
pub fn trace(x0: [f64; 2], t0: f64, t1: f64, vh: &VelocityHistory) -> Result<[f64; 2]> {
    vh.check_span(t0)?;
    vh.check_span(t1)?;
    Ok(integrate(x0, t0, t1, vh, vh.substeps(t1 - t0), false).0)
}

/// [`trace`] with an explicit substep count.
pub fn trace_with_substeps(x0: [f64; 2], t0: f64, t1: f64, vh: &VelocityHistory, n: usize) -> Result<[f64; 2]> {
    vh.check_span(t0)?;
    vh.check_span(t1)?;
    Ok(integrate(x0, t0, t1, vh, n.max(1), false).0)
}

/// Ratio transported by `u` from the start of the history to `t`:
/// `s(t, x) = s0(X(start; t, x))`, times `exp(-(t - start) / (2 lambda))`
/// when `damped`. The output lies in `[min s0, max s0]` (scaled by the decay
/// factor) exactly.
pub fn ratio_oracle(s0: &ScalarField, vh: &VelocityHistory, t: f64, damped: bool, p: &ModelParams) -> Result<ScalarField> {
    let g = vh.grid();
    let (start, _) = vh.span();
    vh.check_span(t)?;
    let n = vh.substeps(t - start);
    let decay = if damped { (-(t - start) * p.damping_rate()).exp() } else { 1.0 };
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x0, _) = integrate(g.center(i, j), t, start, vh, n, false);
            out.set(i, j, interpolate(s0, g, x0, false) * decay);
        }
    }
    Ok(out)
}

/// Density carried by `u` from the start of the history to `t`:
/// `rho(t, x) = rho0(X0) exp(-int div u along the path)`.
pub fn density_oracle(rho0: &ScalarField, vh: &VelocityHistory, t: f64) -> Result<ScalarField> {
    let g = vh.grid();
    let (start, _) = vh.span();
    vh.check_span(t)?;
    let n = vh.substeps(t - start);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            // Integrating backwards accumulates -int_start^t div u.
            let (x0, minus_int) = integrate(g.center(i, j), t, start, vh, n, true);
            out.set(i, j, interpolate(rho0, g, x0, false) * minus_int.exp());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub t: f64,
    pub kind: &'static str,
    /// Observed extreme of the field (min for lower bounds, max for upper).
    pub lhs: f64,
    pub rhs: f64,
    /// Non-negative when the bound holds.
    pub slack: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
}

impl BoundsReport {
    pub const HEADER_NOTE: &'static str = "# div_norm(t) = max over cell centres of |central-difference div u|, \
linear in time between velocity snapshots";

    pub fn worst_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::HEADER_NOTE);
        out.push('\n');
        out.push_str("t,bound_kind,lhs,rhs,slack\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.t, r.kind, r.lhs, r.rhs, r.slack);
        }
        out
    }
}

/// Evaluates the exponential envelopes for `rho`, `eta`, `tau` and the lower
/// bounds for `xi = c_bar eta - rho` and `zeta = c_bar eta - tau` on every
/// state, relative to the first state in `states`.
pub fn bounds_report(states: &[State], vh: &VelocityHistory, p: &ModelParams) -> Result<BoundsReport> {
    let Some(first) = states.first() else {
        return Ok(BoundsReport::default());
    };
    let xi = |s: &State| s.eta.zip_map(&s.rho, |e, r| p.c_bar * e - r);
    let zeta = |s: &State| s.eta.zip_map(&s.tau, |e, t| p.c_bar * e - t);
    let (rho0, eta0, tau0) = (&first.rho, &first.eta, &first.tau);
    let (xi0, zeta0) = (xi(first).min(), zeta(first).min());
    let rate = p.damping_rate();
    let mut report = BoundsReport::default();
    for s in states {
        let t = s.time - first.time;
        let d = vh.div_norm_integral(s.time) - vh.div_norm_integral(first.time);
        let mut lower = |kind, field: &ScalarField, bound: f64| {
            let lhs = field.min();
            report.rows.push(BoundRow {
                t: s.time,
                kind,
                lhs,
                rhs: bound,
                slack: lhs - bound,
            });
        };
        lower("rho_lower", &s.rho, rho0.min() * (-d).exp());
        lower("eta_lower", &s.eta, eta0.min() * (-d).exp());
        lower("tau_lower", &s.tau, tau0.min() * (-d - t * rate).exp());
        lower("xi_lower", &xi(s), xi0 * (-d).exp());
        lower(
            "zeta_lower",
            &zeta(s),
            zeta0 * (-d).exp() + t * rate * tau0.min() * (-2.0 * d - t * rate).exp(),
        );
        let mut upper = |kind, field: &ScalarField, bound: f64| {
            let lhs = field.max();
            report.rows.push(BoundRow {
                t: s.time,
                kind,
                lhs,
                rhs: bound,
                slack: bound - lhs,
            });
        };
        upper("rho_upper", &s.rho, rho0.max() * d.exp());
        upper("eta_upper", &s.eta, eta0.max() * d.exp());
        upper("tau_upper", &s.tau, tau0.max() * (d - t * rate).exp());
    }
    Ok(report)
}
