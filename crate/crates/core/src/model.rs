//! Pointwise algebra of the reduced viscoelastic model.
//!
//! Three transported densities enter the constitutive relations: the
//! solvent density `rho`, the polymer number density `eta` and the scalar
//! extra stress `tau`. The total pressure
//!
//! ```text
//! h(eta, rho, tau) = q(eta) + p(rho) - tau
//! ```
//!
//! carries the stress with a negative sign, so neither `h` nor the free
//! energy `H = P(rho) + Q(eta) - tau log tau` is sign-definite. Everything in
//! this module is a pure function of its arguments.

use crate::error::{Error, Result};

/// `theta * ln(theta)` continued by zero at the origin.
pub fn xlogx(theta: f64) -> f64 {
    if theta < 1e-300 {
        0.0
    } else {
        theta * theta.ln()
    }
}

/// Physical constants of the model plus the pressure-decomposition radii.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Coefficient of the solvent pressure `a rho^gamma`.
    pub a: f64,
    pub gamma: f64,
    /// Quadratic polymer-pressure coefficient.
    pub z: f64,
    /// Spring constant.
    pub k: f64,
    /// Chain parameter.
    pub l: f64,
    /// Relaxation time; the stress is damped at rate `1/(2 lambda)`.
    pub lambda: f64,
    pub mu_s: f64,
    pub mu_b: f64,
    /// Domination constant: admissible states have `rho, tau <= c_bar * eta`.
    pub c_bar: f64,
    /// Cut-off plateau radius; the cut-off is 1 on `[0, r1_bar]`.
    pub r1_bar: f64,
    /// Cut-off support radius; the cut-off vanishes on `[r_bar, inf)`.
    pub r_bar: f64,
    pub dim: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            a: 1.0,
            gamma: 2.0,
            z: 1.0,
            k: 1.0,
            l: 2.0,
            lambda: 0.5,
            mu_s: 0.05,
            mu_b: 0.01,
            c_bar: 2.0,
            r1_bar: 2.0,
            r_bar: 4.0,
            dim: 2,
        }
        .with_auto_radii()
        .expect("default parameters are valid")
    }
}

impl ModelParams {
    /// Checks every parameter invariant, including the radii ordering.
    pub fn validate(&self) -> Result<()> {
        self.validate_physical()?;
        if !(self.r1_bar > 1.0 && self.r1_bar < self.r_bar && self.r_bar.is_finite()) {
            return Err(Error::Params(format!(
                "need 1 < r1_bar < r_bar, got r1_bar = {}, r_bar = {}",
                self.r1_bar, self.r_bar
            )));
        }
        Ok(())
    }

    fn validate_physical(&self) -> Result<()> {
        let positive = [
            ("a", self.a),
            ("z", self.z),
            ("lambda", self.lambda),
            ("mu_s", self.mu_s),
            ("c_bar", self.c_bar),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Params(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [("k", self.k), ("L", self.l), ("mu_b", self.mu_b)];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Params(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::Params(format!(
                "gamma must lie in (0, 2], got {}",
                self.gamma
            )));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Params(format!(
                "dim must be 1 or 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Replaces the cut-off radii by the smallest power of two `r1_bar` for
    /// which the monotone pressure part is non-decreasing on the scan grid,
    /// with `r_bar = 2 r1_bar`.
    pub fn with_auto_radii(mut self) -> Result<Self> {
        self.validate_physical()?;
        for exp in 1..48 {
            let r1 = f64::powi(2.0, exp);
            self.r1_bar = r1;
            self.r_bar = 2.0 * r1;
            if monotone_on_scan(&self, 400, 20) {
                return Ok(self);
            }
        }
        Err(Error::Params(
            "no cut-off radius up to 2^47 makes the pressure decomposition monotone".into(),
        ))
    }

    /// Damping rate `1/(2 lambda)` of the stress equation.
    pub fn damping_rate(&self) -> f64 {
        0.5 / self.lambda
    }

    fn is_log_branch(&self) -> bool {
        (self.gamma - 1.0).abs() < 1e-14
    }
}

/// Smallest forward difference in `eta` of the monotone pressure part over
/// an `n_eta x n_ratio x n_ratio` grid covering `[0, 2 r_bar] x [0, c_bar]^2`.
pub fn monotone_part_min_increment(p: &ModelParams, n_eta: usize, n_ratio: usize) -> f64 {
    let eta_max = 2.0 * p.r_bar;
    let mut worst = f64::INFINITY;
    for a in 0..n_ratio {
        let s_rho = p.c_bar * a as f64 / (n_ratio - 1) as f64;
        for b in 0..n_ratio {
            let s_tau = p.c_bar * b as f64 / (n_ratio - 1) as f64;
            let mut prev = monotone_part(0.0, s_rho, s_tau, p);
            for i in 1..n_eta {
                let eta = eta_max * i as f64 / (n_eta - 1) as f64;
                let cur = monotone_part(eta, s_rho, s_tau, p);
                worst = worst.min(cur - prev);
                prev = cur;
            }
        }
    }
    worst
}

fn monotone_on_scan(p: &ModelParams, n_eta: usize, n_ratio: usize) -> bool {
    monotone_part_min_increment(p, n_eta, n_ratio) >= -1e-10
}

/// A pointwise state `(eta, rho, tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoSample {
    pub eta: f64,
    pub rho: f64,
    pub tau: f64,
}

impl ThermoSample {
    pub fn new(eta: f64, rho: f64, tau: f64) -> Self {
        ThermoSample { eta, rho, tau }
    }

    /// Rebuilds a sample from `eta` and the ratios `rho/eta`, `tau/eta`.
    pub fn from_ratios(eta: f64, s_rho: f64, s_tau: f64) -> Self {
        ThermoSample {
            eta,
            rho: eta * s_rho,
            tau: eta * s_tau,
        }
    }

    pub fn is_non_negative(&self) -> bool {
        self.eta >= 0.0 && self.rho >= 0.0 && self.tau >= 0.0
    }

    /// Membership in the closed domination set.
    pub fn is_admissible(&self, p: &ModelParams) -> bool {
        self.is_non_negative() && self.rho <= p.c_bar * self.eta && self.tau <= p.c_bar * self.eta
    }

    fn scaled(&self, f: f64) -> Self {
        ThermoSample::new(self.eta * f, self.rho * f, self.tau * f)
    }
}

fn check_density(op: &'static str, name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Solvent pressure `a rho^gamma`.
pub fn fluid_pressure(rho: f64, p: &ModelParams) -> Result<f64> {
    check_density("fluid_pressure", "rho", rho)?;
    Ok(p.a * rho.powf(p.gamma))
}

/// Polymer pressure `k (L - 1) eta + z eta^2`; negative near vacuum when `L < 1`.
pub fn polymer_pressure(eta: f64, p: &ModelParams) -> Result<f64> {
    check_density("polymer_pressure", "eta", eta)?;
    Ok(p.k * (p.l - 1.0) * eta + p.z * eta * eta)
}

/// Total pressure `q(eta) + p(rho) - tau`.
pub fn total_pressure(s: &ThermoSample, p: &ModelParams) -> Result<f64> {
    Ok(polymer_pressure(s.eta, p)? + fluid_pressure(s.rho, p)? - s.tau)
}

/// Solvent free energy, with the `a rho log rho` branch at `gamma = 1`.
pub fn fluid_energy(rho: f64, p: &ModelParams) -> Result<f64> {
    check_density("fluid_energy", "rho", rho)?;
    if p.is_log_branch() {
        Ok(p.a * xlogx(rho))
    } else {
        Ok(p.a / (p.gamma - 1.0) * rho.powf(p.gamma))
    }
}

/// Polymer free energy `z eta^2 + k (L - 1) eta log eta`.
pub fn polymer_energy(eta: f64, p: &ModelParams) -> Result<f64> {
    check_density("polymer_energy", "eta", eta)?;
    Ok(p.z * eta * eta + p.k * (p.l - 1.0) * xlogx(eta))
}

/// Helmholtz free energy `P(rho) + Q(eta) - tau log tau`. Not sign-definite.
pub fn helmholtz(s: &ThermoSample, p: &ModelParams) -> Result<f64> {
    check_density("helmholtz", "tau", s.tau)?;
    Ok(fluid_energy(s.rho, p)? + polymer_energy(s.eta, p)? - xlogx(s.tau))
}

/// Closed-form partial derivatives `(dH/deta, dH/drho, dH/dtau)` at an
/// interior sample.
pub fn helmholtz_gradient(s: &ThermoSample, p: &ModelParams) -> Result<[f64; 3]> {
    if !(s.eta > 0.0 && s.rho > 0.0 && s.tau > 0.0) {
        return Err(Error::domain(
            "helmholtz_gradient",
            format!("sample must be strictly positive, got {s:?}"),
        ));
    }
    let d_eta = 2.0 * p.z * s.eta + p.k * (p.l - 1.0) * (s.eta.ln() + 1.0);
    let d_rho = if p.is_log_branch() {
        p.a * (s.rho.ln() + 1.0)
    } else {
        p.a * p.gamma / (p.gamma - 1.0) * s.rho.powf(p.gamma - 1.0)
    };
    let d_tau = -(s.tau.ln() + 1.0);
    Ok([d_eta, d_rho, d_tau])
}

/// `rho H_rho + eta H_eta + tau H_tau - H - h`, which vanishes identically.
pub fn gibbs_residual(s: &ThermoSample, p: &ModelParams) -> Result<f64> {
    let [d_eta, d_rho, d_tau] = helmholtz_gradient(s, p)?;
    let euler = s.eta * d_eta + s.rho * d_rho + s.tau * d_tau;
    Ok(euler - helmholtz(s, p)? - total_pressure(s, p)?)
}

/// Gibbs residual of an arbitrary free energy, with the Euler operator
/// `sum Z dH/dZ` taken as the radial derivative `d/dt H(t s)` at `t = 1`
/// (fourth-order central difference with relative step `step`).
pub fn radial_gibbs_residual<F>(energy: F, s: &ThermoSample, p: &ModelParams, step: f64) -> Result<f64>
where
    F: Fn(&ThermoSample) -> Result<f64>,
{
    let e = |t: f64| energy(&s.scaled(t));
    let radial = (8.0 * (e(1.0 + step)? - e(1.0 - step)?) - (e(1.0 + 2.0 * step)? - e(1.0 - 2.0 * step)?))
        / (12.0 * step);
    Ok(radial - energy(s)? - total_pressure(s, p)?)
}

/// Free energy reconstructed from the pressure alone by integrating along
/// the ray through `s` with `eta` as the lead density:
///
/// ```text
/// H_P = eta * integral_1^eta h(x, x s_rho, x s_tau) / x^2 dx,  H_P(0) = 0.
/// ```
///
/// The integral is evaluated in `v = ln x` by composite Simpson with
/// `n_quad` (rounded up to even) panels. The result differs from
/// [`helmholtz`] by `eta * g(s_rho, s_tau)`, a degree-one homogeneous term
/// in the kernel of the Gibbs operator.
pub fn helmholtz_from_integral(s: &ThermoSample, p: &ModelParams, n_quad: usize) -> Result<f64> {
    if n_quad < 16 {
        return Err(Error::domain(
            "helmholtz_from_integral",
            format!("n_quad must be >= 16, got {n_quad}"),
        ));
    }
    check_density("helmholtz_from_integral", "eta", s.eta)?;
    if s.eta == 0.0 {
        return Ok(0.0);
    }
    let (s_rho, s_tau) = ratios(s);
    let n = n_quad + n_quad % 2;
    let v_end = s.eta.ln();
    let hstep = v_end / n as f64;
    let integrand = |v: f64| -> Result<f64> {
        let x = v.exp();
        Ok(total_pressure(&ThermoSample::from_ratios(x, s_rho, s_tau), p)? / x)
    };
    let mut acc = integrand(0.0)? + integrand(v_end)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * hstep)?;
    }
    Ok(s.eta * acc * hstep / 3.0)
}

/// `H + c_under`.
pub fn shifted_helmholtz(s: &ThermoSample, p: &ModelParams, c_under: f64) -> Result<f64> {
    Ok(helmholtz(s, p)? + c_under)
}

/// Result of [`compute_shift_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyShift {
    /// Constant making `H + c_under >= 1` on the admissible set below `r2_bar`.
    pub c_under: f64,
    /// Threshold above which `H > 0` on every admissible sample.
    pub r2_bar: f64,
    /// Minimum of `H` over the admissible set with `eta <= r2_bar`.
    pub min_energy: f64,
}

/// [`compute_shift_with`] at the default resolution of 200 samples per axis.
pub fn compute_shift(p: &ModelParams) -> Result<f64> {
    Ok(compute_shift_with(p, 200)?.c_under)
}

/// Constructs the energy shift.
///
/// The free energy splits as `Q(eta) + P(eta s_rho) - (eta s_tau) log(eta s_tau)`,
/// so the minimum over the ratio box at fixed `eta` is a sum of two 1-D
/// minima. Each 1-D minimum (and the outer one over `eta`) is located by a
/// `resolution`-point scan refined with golden-section search.
pub fn compute_shift_with(p: &ModelParams, resolution: usize) -> Result<EnergyShift> {
    p.validate()?;
    let resolution = resolution.max(8);
    let r2_bar = positivity_threshold(p, resolution.min(64))?;
    let (_, min_energy) = scan_min_1d(|eta| ray_box_min(eta, p, resolution), 0.0, r2_bar, resolution);
    let min_energy = min_energy.min(0.0);
    Ok(EnergyShift {
        c_under: 1.0 - min_energy,
        r2_bar,
        min_energy,
    })
}

/// `min { H(eta, rho, tau) : 0 <= rho, tau <= c_bar eta }` at fixed `eta`.
fn ray_box_min(eta: f64, p: &ModelParams, resolution: usize) -> f64 {
    let top = p.c_bar * eta;
    let q = p.z * eta * eta + p.k * (p.l - 1.0) * xlogx(eta);
    let fluid = |rho: f64| fluid_energy(rho, p).unwrap_or(f64::INFINITY);
    let (_, fluid_min) = scan_min_1d(fluid, 0.0, top, resolution);
    let (_, stress_min) = scan_min_1d(|tau| -xlogx(tau), 0.0, top, resolution);
    q + fluid_min + stress_min
}

/// Upper bound on the magnitude of every term of `H` that can be negative,
/// valid and non-decreasing for `eta >= e * max(1, 1/c_bar)`.
fn negative_part_bound(eta: f64, p: &ModelParams) -> f64 {
    let top = p.c_bar * eta;
    let polymer = if p.l < 1.0 { p.k * (1.0 - p.l) * xlogx(eta) } else { 0.0 };
    let fluid = if p.is_log_branch() {
        p.a / std::f64::consts::E
    } else if p.gamma < 1.0 {
        p.a / (1.0 - p.gamma) * top.powf(p.gamma)
    } else {
        0.0
    };
    polymer + fluid + xlogx(top).max(0.0)
}

fn positivity_threshold(p: &ModelParams, resolution: usize) -> Result<f64> {
    let mut hi = std::f64::consts::E * (1.0f64).max(1.0 / p.c_bar);
    let mut guard = 0;
    while p.z * hi * hi <= negative_part_bound(hi, p) {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Params("free energy never becomes positive".into()));
        }
    }
    let n = 2000;
    let mut last_bad = None;
    for i in 1..=n {
        let eta = hi * i as f64 / n as f64;
        if ray_box_min(eta, p, resolution) <= 0.0 {
            last_bad = Some(i);
        }
    }
    let threshold = match last_bad {
        None => hi / n as f64,
        Some(i) if i == n => hi,
        Some(i) => {
            let (mut lo, mut up) = (hi * i as f64 / n as f64, hi * (i + 1) as f64 / n as f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + up);
                if ray_box_min(mid, p, resolution) <= 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            up
        }
    };
    Ok(threshold.max(1.0))
}

/// Scan `n + 1` equispaced points of `[lo, hi]`, then refine the best one by
/// golden-section search on its neighbouring bracket.
pub(crate) fn scan_min_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let h = (hi - lo) / n as f64;
    let (mut best_i, mut best) = (0, f(lo));
    for i in 1..=n {
        let v = f(lo + h * i as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut best_x = lo + h * best_i as f64;
    let mut a = lo + h * best_i.saturating_sub(1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 * (1.0 + b.abs()) {
            break;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best {
            best = v;
            best_x = x;
        }
    }
    (best_x, best)
}

/// Non-increasing C^2 cut-off: 1 on `[0, r1_bar]`, 0 on `[r_bar, inf)`,
/// quintic smoothstep in between.
pub fn cutoff_chi(theta: f64, p: &ModelParams) -> f64 {
    if theta <= p.r1_bar {
        return 1.0;
    }
    if theta >= p.r_bar {
        return 0.0;
    }
    let t = (theta - p.r1_bar) / (p.r_bar - p.r1_bar);
    1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn monotone_part(eta: f64, s_rho: f64, s_tau: f64, p: &ModelParams) -> f64 {
    let chi = cutoff_chi(eta, p);
    p.z * eta * eta + p.k * p.l * eta + p.a * (eta * s_rho).powf(p.gamma)
        - (1.0 - chi) * (p.k * eta + eta * s_tau)
}

/// Splits `h(eta, eta s_rho, eta s_tau)` into a part non-decreasing in `eta`
/// and a non-negative compactly supported remainder: `h = mono - remainder`.
pub fn pressure_decomposition(
    eta: f64,
    s_rho: f64,
    s_tau: f64,
    p: &ModelParams,
) -> Result<(f64, f64)> {
    check_density("pressure_decomposition", "eta", eta)?;
    for (name, s) in [("s_rho", s_rho), ("s_tau", s_tau)] {
        if !(0.0..=p.c_bar).contains(&s) {
            return Err(Error::domain(
                "pressure_decomposition",
                format!("{name} = {s} outside [0, {}]", p.c_bar),
            ));
        }
    }
    let remainder = cutoff_chi(eta, p) * (p.k * eta + eta * s_tau);
    Ok((monotone_part(eta, s_rho, s_tau, p), remainder))
}

/// A `d x d` tensor stored in the upper-left block of a 2x2 array.
pub type Tensor2 = [[f64; 2]; 2];

/// Newtonian viscous stress `mu_s (sym G - tr G / d I) + mu_b tr G I`.
pub fn newtonian_stress(grad_u: &Tensor2, p: &ModelParams) -> Tensor2 {
    let d = p.dim;
    let div: f64 = (0..d).map(|i| grad_u[i][i]).sum();
    let mut s = [[0.0; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            let sym = 0.5 * (grad_u[i][j] + grad_u[j][i]);
            s[i][j] = p.mu_s * sym;
        }
        s[i][i] += (p.mu_b - p.mu_s / d as f64) * div;
    }
    s
}

/// Double contraction `A : B`.
pub fn contract(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Stress shifted by the polymer equilibrium, `tau - k eta`. May be negative.
pub fn reduce_tau(tau_full: f64, eta: f64, p: &ModelParams) -> f64 {
    tau_full - p.k * eta
}

/// `(rho/eta, tau/eta)`, or `(0, 0)` at vacuum.
pub fn ratios(s: &ThermoSample) -> (f64, f64) {
    if s.eta > 0.0 {
        (s.rho / s.eta, s.tau / s.eta)
    } else {
        (0.0, 0.0)
    }
}
