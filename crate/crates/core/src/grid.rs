//! Uniform cell-centered meshes, field storage and discrete operators.

use crate::error::{Error, Result};
use crate::model::ThermoSample;

/// Boundary treatment of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Closed box with `u = 0` on every wall.
    NoSlipBox,
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::NoSlipBox => "noslip_box",
        }
    }

    pub fn parse(s: &str) -> Option<Boundary> {
        match s {
            "periodic" => Some(Boundary::Periodic),
            "noslip_box" | "noslip" => Some(Boundary::NoSlipBox),
            _ => None,
        }
    }
}

/// Uniform structured mesh. A 1-D mesh has `ny == 1` and a nominal unit
/// `dy`, so cell volumes reduce to `dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
    pub bc: Boundary,
}

impl Grid {
    pub fn new_1d(nx: usize, length: f64, bc: Boundary) -> Result<Grid> {
        if nx < 4 {
            return Err(Error::Grid(format!("nx must be >= 4, got {nx}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Grid {
            nx,
            ny: 1,
            dx: length / nx as f64,
            dy: 1.0,
            origin: [0.0, 0.0],
            bc,
        })
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64, bc: Boundary) -> Result<Grid> {
        if nx < 4 || ny < 4 {
            return Err(Error::Grid(format!("need nx, ny >= 4, got {nx} x {ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Grid(format!("extent must be positive, got {lx} x {ly}")));
        }
        Ok(Grid {
            nx,
            ny,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            origin: [0.0, 0.0],
            bc,
        })
    }

    /// `[0, 1]^2` with `n x n` cells.
    pub fn unit_square(n: usize, bc: Boundary) -> Result<Grid> {
        Grid::new_2d(n, n, 1.0, 1.0, bc)
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dy,
        ]
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.nx as f64 * self.dx, self.ny as f64 * self.dy]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    pub fn min_spacing(&self) -> f64 {
        if self.dim() == 1 {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Cell-centered scalar values, row-major (`j * nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn constant(g: &Grid, value: f64) -> Self {
        ScalarField {
            nx: g.nx,
            ny: g.ny,
            data: vec![value; g.len()],
        }
    }

    pub fn zeros(g: &Grid) -> Self {
        Self::constant(g, 0.0)
    }

    /// Samples `f` at cell centers.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(g: &Grid, f: F) -> Self {
        let mut data = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let [x, y] = g.center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField {
            nx: g.nx,
            ny: g.ny,
            data,
        }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::Grid(format!(
                "{} values for a {nx} x {ny} field",
                data.len()
            )));
        }
        Ok(ScalarField { nx, ny, data })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn matches(&self, g: &Grid) -> bool {
        self.nx == g.nx && self.ny == g.ny
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        ScalarField {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> Self {
        assert_eq!((self.nx, self.ny), (other.nx, other.ny), "field shapes differ");
        ScalarField {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `max |self - other|`.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `d` cell-centered components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(g: &Grid) -> Self {
        VectorField {
            comps: vec![ScalarField::zeros(g); g.dim()],
        }
    }

    /// Samples `f` at cell centers; only the first `d` components are kept.
    pub fn from_fn<F: Fn(f64, f64) -> [f64; 2]>(g: &Grid, f: F) -> Self {
        VectorField {
            comps: (0..g.dim())
                .map(|c| ScalarField::from_fn(g, |x, y| f(x, y)[c]))
                .collect(),
        }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Self {
        VectorField { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut ScalarField {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    /// Vector value at flat cell index `k`, zero-padded to two components.
    #[inline]
    pub fn at(&self, k: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (c, f) in self.comps.iter().enumerate() {
            v[c] = f.data[k];
        }
        v
    }

    /// Largest absolute value of each component.
    pub fn max_abs(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (c, f) in self.comps.iter().enumerate() {
            m[c] = f.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().all(|c| c.all_finite())
    }
}

/// The evolved unknowns at one time level; momentum is `m = rho u`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub rho: ScalarField,
    pub eta: ScalarField,
    pub tau: ScalarField,
    pub mom: VectorField,
    pub time: f64,
}

impl State {
    /// Uniform densities at rest.
    pub fn uniform(g: &Grid, eta: f64, rho: f64, tau: f64) -> Self {
        State {
            rho: ScalarField::constant(g, rho),
            eta: ScalarField::constant(g, eta),
            tau: ScalarField::constant(g, tau),
            mom: VectorField::zeros(g),
            time: 0.0,
        }
    }

    #[inline]
    pub fn sample(&self, k: usize) -> ThermoSample {
        ThermoSample::new(self.eta.data[k], self.rho.data[k], self.tau.data[k])
    }

    /// Non-negative densities, finite values, and no momentum in vacuum.
    pub fn check(&self, rho_floor: f64) -> Result<()> {
        for (name, f) in [("rho", &self.rho), ("eta", &self.eta), ("tau", &self.tau)] {
            if let Some(v) = f.data.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Integrity(format!("{name} has invalid value {v}")));
            }
        }
        if !self.mom.all_finite() {
            return Err(Error::Integrity("momentum is not finite".into()));
        }
        velocity_from_momentum(self, rho_floor).map(|_| ())
    }
}

/// How ghost values mirror the interior at a no-slip wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Even mirror: zero normal difference at the wall.
    Scalar,
    /// Odd mirror: the face value interpolates to zero.
    Velocity,
}

/// A scalar field padded by one ghost layer on every side (x only in 1-D).
#[derive(Clone, Debug, PartialEq)]
pub struct Ghosted {
    nx: usize,
    ny: usize,
    gy: usize,
    data: Vec<f64>,
}

impl Ghosted {
    fn stride(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        let col = (i + 1) as usize;
        let row = (j + self.gy as isize) as usize;
        self.data[row * self.stride() + col]
    }

    #[inline]
    fn set(&mut self, i: isize, j: isize, v: f64) {
        let col = (i + 1) as usize;
        let row = (j + self.gy as isize) as usize;
        let s = self.stride();
        self.data[row * s + col] = v;
    }

    /// Overwrites the ghost layer from the interior values.
    pub fn fill_ghosts(&mut self, g: &Grid, kind: FieldKind) {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let sign = match kind {
            FieldKind::Scalar => 1.0,
            FieldKind::Velocity => -1.0,
        };
        for j in 0..ny {
            let (left, right) = match g.bc {
                Boundary::Periodic => (self.get(nx - 1, j), self.get(0, j)),
                Boundary::NoSlipBox => (sign * self.get(0, j), sign * self.get(nx - 1, j)),
            };
            self.set(-1, j, left);
            self.set(nx, j, right);
        }
        if self.gy == 0 {
            return;
        }
        for i in -1..=nx {
            let (bottom, top) = match g.bc {
                Boundary::Periodic => (self.get(i, ny - 1), self.get(i, 0)),
                Boundary::NoSlipBox => (sign * self.get(i, 0), sign * self.get(i, ny - 1)),
            };
            self.set(i, -1, bottom);
            self.set(i, ny, top);
        }
    }
}

/// Copies `f` into a ghosted buffer and fills the ghost layer per `g.bc`.
pub fn apply_bc(f: &ScalarField, g: &Grid, kind: FieldKind) -> Ghosted {
    let gy = if g.dim() == 2 { 1 } else { 0 };
    let mut out = Ghosted {
        nx: f.nx,
        ny: f.ny,
        gy,
        data: vec![0.0; (f.nx + 2) * (f.ny + 2 * gy)],
    };
    for j in 0..f.ny {
        for i in 0..f.nx {
            out.set(i as isize, j as isize, f.get(i, j));
        }
    }
    out.fill_ghosts(g, kind);
    out
}

/// Cell gradient: central differences, one-sided in the wall cells of a
/// no-slip box. Exact for affine fields.
pub fn gradient(f: &ScalarField, g: &Grid) -> VectorField {
    let gh = apply_bc(f, g, FieldKind::Scalar);
    let mut comps = Vec::with_capacity(g.dim());
    for axis in 0..g.dim() {
        let (n, h) = if axis == 0 { (g.nx, g.dx) } else { (g.ny, g.dy) };
        let mut out = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let along = if axis == 0 { i } else { j };
                let at = |o: isize| {
                    if axis == 0 {
                        gh.get(i as isize + o, j as isize)
                    } else {
                        gh.get(i as isize, j as isize + o)
                    }
                };
                let d = match g.bc {
                    Boundary::NoSlipBox if along == 0 => (at(1) - at(0)) / h,
                    Boundary::NoSlipBox if along == n - 1 => (at(0) - at(-1)) / h,
                    _ => (at(1) - at(-1)) / (2.0 * h),
                };
                out.set(i, j, d);
            }
        }
        comps.push(out);
    }
    VectorField { comps }
}

/// Cell divergence by central differences; at no-slip walls the odd ghost
/// makes this the face-average flux with zero wall velocity.
pub fn divergence(v: &VectorField, g: &Grid) -> ScalarField {
    let mut out = ScalarField::zeros(g);
    for (axis, comp) in v.comps.iter().enumerate() {
        let gh = apply_bc(comp, g, FieldKind::Velocity);
        let h = if axis == 0 { g.dx } else { g.dy };
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (ii, jj) = (i as isize, j as isize);
                let d = if axis == 0 {
                    gh.get(ii + 1, jj) - gh.get(ii - 1, jj)
                } else {
                    gh.get(ii, jj + 1) - gh.get(ii, jj - 1)
                };
                out.data[g.idx(i, j)] += d / (2.0 * h);
            }
        }
    }
    out
}

/// `u = m / max(rho, rho_floor)`; momentum in a cell at or below the floor is
/// an integrity error.
pub fn velocity_from_momentum(s: &State, rho_floor: f64) -> Result<VectorField> {
    let mut comps = Vec::with_capacity(s.mom.dim());
    for m in &s.mom.comps {
        let mut u = m.clone();
        for (k, (uk, &rho)) in u.data.iter_mut().zip(&s.rho.data).enumerate() {
            if rho <= rho_floor {
                if *uk != 0.0 {
                    return Err(Error::Integrity(format!(
                        "momentum {uk:e} in vacuum cell {k} (rho = {rho:e})"
                    )));
                }
                *uk = 0.0;
            } else {
                *uk /= rho;
            }
        }
        comps.push(u);
    }
    Ok(VectorField { comps })
}

/// Default density floor for `u = m / rho`.
pub const RHO_FLOOR: f64 = 1e-12;

/// Cell sum times cell volume.
pub fn integral(f: &ScalarField, g: &Grid) -> f64 {
    f.sum() * g.cell_volume()
}

/// Discrete `L2` inner product of two vector fields.
pub fn inner(a: &VectorField, b: &VectorField, g: &Grid) -> f64 {
    a.comps
        .iter()
        .zip(&b.comps)
        .map(|(x, y)| integral(&x.zip_map(y, |p, q| p * q), g))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation() {
        assert!(Grid::new_1d(3, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new_2d(8, 3, 1.0, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new_2d(8, 8, 0.0, 1.0, Boundary::Periodic).is_err());
        let g = Grid::new_1d(10, 2.0, Boundary::NoSlipBox).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.cell_volume() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        for bc in [Boundary::Periodic, Boundary::NoSlipBox] {
            let g = Grid::unit_square(8, bc).unwrap();
            let grad = gradient(&ScalarField::constant(&g, 3.0), &g);
            assert_eq!(grad.max_abs(), [0.0, 0.0]);
        }
        let g = Grid::unit_square(8, Boundary::NoSlipBox).unwrap();
        let grad = gradient(&ScalarField::from_fn(&g, |x, _| x), &g);
        for k in 0..g.len() {
            assert!((grad.at(k)[0] - 1.0).abs() < 1e-12);
            assert!(grad.at(k)[1].abs() < 1e-12);
        }
        // Periodic ramps only match away from the seam.
        let g = Grid::unit_square(8, Boundary::Periodic).unwrap();
        let grad = gradient(&ScalarField::from_fn(&g, |x, _| x), &g);
        for j in 0..8 {
            for i in 1..7 {
                assert!((grad.comp(0).get(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let g = Grid::unit_square(8, Boundary::Periodic).unwrap();
        let d = divergence(&VectorField::from_fn(&g, |_, _| [2.0, -1.0]), &g);
        assert_eq!(d.max(), 0.0);
        assert_eq!(d.min(), 0.0);
        let g = Grid::unit_square(8, Boundary::NoSlipBox).unwrap();
        let d = divergence(&VectorField::from_fn(&g, |x, y| [x, y]), &g);
        for j in 1..7 {
            for i in 1..7 {
                assert!((d.get(i, j) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summation_by_parts_periodic() {
        let g = Grid::new_2d(16, 12, 1.0, 2.0, Boundary::Periodic).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * PI * x).sin() + (PI * y).cos() * x);
        let v = VectorField::from_fn(&g, |x, y| [x * y, (3.0 * x).exp() - y]);
        let lhs = integral(&f.zip_map(&divergence(&v, &g), |a, b| a * b), &g);
        let rhs = inner(&gradient(&f, &g), &v, &g);
        assert!((lhs + rhs).abs() < 1e-12, "{lhs} + {rhs}");
    }

    #[test]
    fn second_order_on_smooth_periodic_fields() {
        let err = |n: usize| {
            let g = Grid::new_1d(n, 1.0, Boundary::Periodic).unwrap();
            let f = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
            let exact = ScalarField::from_fn(&g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
            gradient(&f, &g).comp(0).sup_distance(&exact)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn velocity_from_momentum_cases() {
        let g = Grid::new_1d(4, 1.0, Boundary::Periodic).unwrap();
        let mut s = State::uniform(&g, 1.0, 4.0, 1.0);
        s.mom = VectorField::from_fn(&g, |_, _| [2.0, 0.0]);
        let u = velocity_from_momentum(&s, RHO_FLOOR).unwrap();
        assert_eq!(u.comp(0).values(), &[0.5; 4]);

        s.rho = ScalarField::zeros(&g);
        s.mom = VectorField::zeros(&g);
        let u = velocity_from_momentum(&s, RHO_FLOOR).unwrap();
        assert_eq!(u.max_abs(), [0.0, 0.0]);

        s.mom.comp_mut(0).set(2, 0, 1e-3);
        assert!(matches!(
            velocity_from_momentum(&s, RHO_FLOOR),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn ghost_filling() {
        let g = Grid::new_2d(4, 4, 1.0, 1.0, Boundary::Periodic).unwrap();
        let ramp = ScalarField::from_fn(&g, |x, y| x + 10.0 * y);
        let gh = apply_bc(&ramp, &g, FieldKind::Scalar);
        assert_eq!(gh.get(-1, 0), ramp.get(3, 0));
        assert_eq!(gh.get(4, 2), ramp.get(0, 2));
        assert_eq!(gh.get(1, -1), ramp.get(1, 3));
        assert_eq!(gh.get(-1, -1), ramp.get(3, 3));

        let g = Grid::new_2d(4, 4, 1.0, 1.0, Boundary::NoSlipBox).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
        let gu = apply_bc(&u, &g, FieldKind::Velocity);
        // Interpolated value at the wall face vanishes.
        assert_eq!(0.5 * (gu.get(-1, 1) + gu.get(0, 1)), 0.0);
        assert_eq!(0.5 * (gu.get(2, 4) + gu.get(2, 3)), 0.0);
        let gs = apply_bc(&u, &g, FieldKind::Scalar);
        assert_eq!(gs.get(-1, 2) - gs.get(0, 2), 0.0);
        assert_eq!(gs.get(1, -1) - gs.get(1, 0), 0.0);

        let mut again = gu.clone();
        again.fill_ghosts(&g, FieldKind::Velocity);
        assert_eq!(again, gu);
    }

    #[test]
    fn integral_rules() {
        let g = Grid::unit_square(10, Boundary::Periodic).unwrap();
        assert!((integral(&ScalarField::constant(&g, 2.5), &g) - 2.5).abs() < 1e-14);
        let a = ScalarField::from_fn(&g, |x, y| x * y);
        let b = ScalarField::from_fn(&g, |x, _| x.sin());
        let lin = integral(&a.zip_map(&b, |p, q| 2.0 * p - 3.0 * q), &g);
        assert!((lin - (2.0 * integral(&a, &g) - 3.0 * integral(&b, &g))).abs() < 1e-14);
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (1.0 + y));
        let grad = gradient(&f, &g);
        assert!(integral(grad.comp(0), &g).abs() < 1e-13);
    }
}
