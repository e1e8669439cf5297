//! Vorticity transport with the multiply-connected Biot-Savart closure,
//! conservation monitors and the nonlinear stability experiment.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{circulation_recovered, h_field, kinetic_energy, stream_only, velocity};
use crate::functionals::{casimir, q_form};
use crate::gfunc::{legendre, LegendrePair};
use crate::grid::{inner, norm_lp, CellKind, CirculationVector, Geometry, GridDomain, ScalarField, DIRS};
use crate::harmonic::HarmonicBasis;
use crate::rearrange::histogram_distance;
use crate::steady::SteadyState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    SemiLagrangianCubic,
    Upwind2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbMode {
    Swap,
    Bump,
}

/// Perturbation of a steady vorticity with L2 size `amplitude`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbSpec {
    pub mode: PerturbMode,
    pub amplitude: f64,
    pub seed: u64,
    /// Circulations of the perturbed flow; `None` keeps those of the steady state.
    pub b: Option<CirculationVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub cfl: f64,
    /// Fixed step; `None` derives it from `cfl` each step.
    pub dt: Option<f64>,
    /// Horizon in turnover times `|D| / int |v(0)|`.
    pub turnovers: f64,
    pub scheme: Scheme,
    /// Steps between diagnostic rows.
    pub cadence: usize,
    pub p: f64,
    pub bins: usize,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig { cfl: 0.5, dt: None, turnovers: 10.0, scheme: Scheme::SemiLagrangianCubic, cadence: 10, p: 2.0, bins: 32 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::InvalidInput(format!("CFL must lie in (0, 0.9], got {}", self.cfl)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.turnovers >= 0.0 && self.turnovers.is_finite()) {
            return Err(Error::InvalidInput("horizon must be finite and nonnegative".into()));
        }
        if self.cadence == 0 || self.bins == 0 {
            return Err(Error::InvalidInput("cadence and bins must be positive".into()));
        }
        if !(self.p >= 1.0) {
            return Err(Error::InvalidInput(format!("norm exponent must be at least 1, got {}", self.p)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub omega: ScalarField,
    pub psi: ScalarField,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    /// Circulations around the holes reconstructed from the velocity.
    pub circulations: Vec<f64>,
    /// `|omega - omega_bar|_p`.
    pub distance: f64,
    /// Histogram L1 distance to the initial vorticity.
    pub histogram: f64,
    pub kinetic: f64,
    pub ec: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
    pub steps: usize,
    pub turnover_time: f64,
    pub area: f64,
}

impl DiagnosticsSeries {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.rows[0].energy;
        self.rows.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.abs()
    }

    pub fn circulation_drift(&self) -> f64 {
        let c0 = &self.rows[0].circulations;
        let scale = c0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.rows
            .iter()
            .flat_map(|r| r.circulations.iter().zip(c0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
            / scale
    }

    /// Largest histogram distance as a fraction of the total mass `|D|`.
    pub fn histogram_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.histogram).fold(0.0, f64::max) / self.area
    }

    pub fn sup_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.distance).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Interpolation on the full Cartesian grid with extrapolated ghost values.

const GHOST_RINGS: i64 = 3;

#[derive(Debug)]
struct Ghost {
    node: usize,
    /// `(slot, coefficient)` terms of the extrapolation functional.
    terms: Vec<(u32, f64)>,
}

#[derive(Debug)]
struct GridInterp {
    domain: Arc<GridDomain>,
    nx: usize,
    ny: usize,
    psi_ghosts: Vec<Ghost>,
    omega_ghosts: Vec<Ghost>,
}

/// Weighted least-squares quadratic through `pts` (local coordinates in
/// cells), evaluated at the origin, as coefficients on the points.
fn ls_origin_weights(pts: &[(f64, f64)], ncols: usize) -> Option<Vec<f64>> {
    {
        if pts.len() < ncols + 2 {
            return None;
        }
        let m = pts.len();
        let mut a = DMatrix::zeros(m, ncols);
        let mut w = DVector::zeros(m);
        for (i, &(x, y)) in pts.iter().enumerate() {
            let row = [1.0, x, y, x * x, x * y, y * y];
            for c in 0..ncols {
                a[(i, c)] = row[c];
            }
            let rho2 = x * x + y * y;
            w[i] = 1.0 / (1.0 + rho2);
        }
        let mut aw = a.clone();
        for i in 0..m {
            for c in 0..ncols {
                aw[(i, c)] *= w[i];
            }
        }
        let normal = a.transpose() * &aw;
        let eig = normal.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        if !(lo > 1e-9 * hi) {
            return None;
        }
        let inv = normal.cholesky()?.inverse();
        // Value at the origin is the first coefficient.
        let e = inv.row(0).into_owned();
        let coef = e * aw.transpose();
        return Some(coef.iter().cloned().collect());
    }
}

impl GridInterp {
    fn new(domain: &Arc<GridDomain>) -> GridInterp {
        let (nx, ny) = (domain.nx(), domain.ny());
        let kinds = domain.kinds();
        let interior = |i: i64, j: i64| -> bool {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && kinds[j as usize * nx + i as usize] == CellKind::Interior
        };
        // Chebyshev distance to the interior, capped.
        let mut near = vec![false; nx * ny];
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                if interior(i, j) {
                    continue;
                }
                let mut hit = false;
                'w: for dj in -GHOST_RINGS..=GHOST_RINGS {
                    for di in -GHOST_RINGS..=GHOST_RINGS {
                        if interior(i + di, j + dj) {
                            hit = true;
                            break 'w;
                        }
                    }
                }
                near[j as usize * nx + i as usize] = hit;
            }
        }
        let mut psi_ghosts = vec![];
        let mut omega_ghosts = vec![];
        for node in (0..nx * ny).filter(|&n| near[n]) {
            let (gi, gj) = ((node % nx) as i64, (node / nx) as i64);
            for with_walls in [true, false] {
                let mut radius = GHOST_RINGS + 1;
                let ghost = loop {
                    let mut pts = vec![];
                    let mut src = vec![];
                    for dj in -radius..=radius {
                        for di in -radius..=radius {
                            let (i, j) = (gi + di, gj + dj);
                            if !interior(i, j) {
                                continue;
                            }
                            let slot = domain.slot_of(j as usize * nx + i as usize).unwrap();
                            pts.push((di as f64, dj as f64));
                            src.push(slot as u32);
                            if with_walls {
                                let r = domain.interior_index(slot).unwrap();
                                for (dir, l) in domain.links(r).iter().enumerate() {
                                    if !l.is_interior() {
                                        let (ex, ey) = DIRS[dir];
                                        let f = l.frac.min(1.0);
                                        pts.push((di as f64 + f * ex as f64, dj as f64 + f * ey as f64));
                                        src.push(l.slot);
                                    }
                                }
                            }
                        }
                    }
                    let fit = ls_origin_weights(&pts, 6).or_else(|| if radius >= 8 { ls_origin_weights(&pts, 3) } else { None });
                    {
                        if let Some(c) = fit {
                            let mut terms: Vec<(u32, f64)> = src.into_iter().zip(c).collect();
                            terms.sort_by_key(|t| t.0);
                            // Merge repeated slots (a wall value appears once per link).
                            let mut merged: Vec<(u32, f64)> = vec![];
                            for (s, c) in terms {
                                match merged.last_mut() {
                                    Some((ls, lc)) if *ls == s => *lc += c,
                                    _ => merged.push((s, c)),
                                }
                            }
                            break Some(Ghost { node, terms: merged });
                        }
                        if radius >= 8 {
                            break None;
                        }
                    }
                    radius += 1;
                };
                if let Some(g) = ghost {
                    if with_walls {
                        psi_ghosts.push(g);
                    } else {
                        omega_ghosts.push(g);
                    }
                }
            }
        }
        GridInterp { domain: Arc::clone(domain), nx, ny, psi_ghosts, omega_ghosts }
    }

    fn full(&self, f: &ScalarField, ghosts: &[Ghost]) -> Vec<f64> {
        let d = &self.domain;
        let mut out = vec![0.0; self.nx * self.ny];
        for &s in d.interior_slots() {
            out[d.node_of_slot(s as usize)] = f.get(s as usize);
        }
        for g in ghosts {
            out[g.node] = g.terms.iter().map(|&(s, c)| c * f.get(s as usize)).sum();
        }
        out
    }

    fn full_psi(&self, psi: &ScalarField) -> Vec<f64> {
        self.full(psi, &self.psi_ghosts)
    }

    fn full_omega(&self, omega: &ScalarField) -> Vec<f64> {
        self.full(omega, &self.omega_ghosts)
    }

    /// Lower-left stencil index and offset along one axis.
    fn locate(&self, x: f64, origin: f64, n: usize) -> (usize, f64) {
        let g = (x - origin) / self.domain.h();
        let lo = 1.0;
        let hi = (n - 3) as f64;
        let g = g.clamp(lo, hi - 1e-12);
        let i = g.floor();
        (i as usize, g - i)
    }

    fn stencil(&self, x: f64, y: f64) -> (usize, usize, [f64; 4], [f64; 4], [f64; 4], [f64; 4]) {
        let (x0, y0) = self.domain.origin();
        let (i, tx) = self.locate(x, x0, self.nx);
        let (j, ty) = self.locate(y, y0, self.ny);
        let (wx, dx) = cubic_weights(tx);
        let (wy, dy) = cubic_weights(ty);
        (i, j, wx, dx, wy, dy)
    }

    fn cubic(&self, data: &[f64], x: f64, y: f64) -> f64 {
        let (i, j, wx, _, wy, _) = self.stencil(x, y);
        let mut s = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let row = (j + b - 1) * self.nx + i - 1;
            let mut r = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                r += wxa * data[row + a];
            }
            s += wyb * r;
        }
        s
    }

    /// Cubic value clamped to the interior values of the enclosing cell (or
    /// the whole stencil when the cell has no interior corner).
    fn cubic_clamped(&self, data: &[f64], is_int: &[bool], x: f64, y: f64, global: (f64, f64)) -> f64 {
        let v = self.cubic(data, x, y);
        let (i, j, ..) = self.stencil(x, y);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (dj, di) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let n = (j + dj) * self.nx + i + di;
            if is_int[n] {
                lo = lo.min(data[n]);
                hi = hi.max(data[n]);
            }
        }
        if lo > hi {
            for b in 0..4 {
                for a in 0..4 {
                    let n = (j + b - 1) * self.nx + i + a - 1;
                    if is_int[n] {
                        lo = lo.min(data[n]);
                        hi = hi.max(data[n]);
                    }
                }
            }
        }
        if lo > hi {
            (lo, hi) = global;
        }
        v.clamp(lo, hi)
    }

    /// `(d_y psi, -d_x psi)` of the cubic interpolant.
    fn velocity_at(&self, psi: &[f64], x: f64, y: f64) -> (f64, f64) {
        let (i, j, wx, dx, wy, dy) = self.stencil(x, y);
        let h = self.domain.h();
        let (mut px, mut py) = (0.0, 0.0);
        for b in 0..4 {
            let row = (j + b - 1) * self.nx + i - 1;
            for a in 0..4 {
                let v = psi[row + a];
                px += dx[a] * wy[b] * v;
                py += wx[a] * dy[b] * v;
            }
        }
        (py / h, -px / h)
    }
}

/// Lagrange weights on nodes -1, 0, 1, 2 and their derivatives at `t`.
fn cubic_weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    let d = [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ];
    (w, d)
}

// ---------------------------------------------------------------------------

/// Vorticity transport driver owning its state.
pub struct Simulation<'a> {
    basis: &'a HarmonicBasis,
    interp: GridInterp,
    cfg: SimConfig,
    b: CirculationVector,
    pub state: SimState,
    psi_full: Vec<f64>,
    prev: Option<(Vec<f64>, f64)>,
    is_int: Vec<bool>,
    range: (f64, f64),
    speed: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(basis: &'a HarmonicBasis, omega0: &ScalarField, b: &CirculationVector, cfg: &SimConfig) -> Result<Simulation<'a>> {
        cfg.validate()?;
        let d = basis.domain();
        b.check(d)?;
        if !Arc::ptr_eq(omega0.domain(), d) && omega0.domain().n_slots() != d.n_slots() {
            return Err(Error::InvalidInput("initial vorticity lives on a different grid".into()));
        }
        let omega = ScalarField::from_interior(d, &omega0.interior_values());
        let interp = GridInterp::new(d);
        let psi = stream_only(basis.solver(), &omega, b);
        let psi_full = interp.full_psi(&psi);
        let is_int = (0..d.nx() * d.ny()).map(|n| d.kind(n) == CellKind::Interior).collect();
        let range = omega.interior_range();
        let speed = max_speed(&interp, &psi_full);
        Ok(Simulation {
            basis,
            interp,
            cfg: cfg.clone(),
            b: b.clone(),
            state: SimState { t: 0.0, omega, psi, step: 0 },
            psi_full,
            prev: None,
            is_int,
            range,
            speed,
        })
    }

    /// Largest node speed of the current interpolant.
    pub fn max_speed(&self) -> f64 {
        self.speed
    }

    /// Step size for the current velocity.
    pub fn stable_dt(&self) -> f64 {
        let h = self.basis.domain().h();
        let cfl_dt = self.cfg.cfl * h / self.max_speed().max(1e-300);
        match self.cfg.dt {
            Some(dt) => dt.min(cfl_dt),
            None => cfl_dt,
        }
    }

    fn reflect(&self, x: f64, y: f64, ax: f64, ay: f64) -> (f64, f64) {
        let d = self.basis.domain();
        match *d.geometry() {
            Geometry::Annulus { r_in, r_out } => {
                let r = x.hypot(y);
                let target = if r < r_in {
                    (2.0 * r_in - r).min(r_out)
                } else if r > r_out {
                    (2.0 * r_out - r).max(r_in)
                } else {
                    return (x, y);
                };
                if r == 0.0 {
                    return (ax, ay);
                }
                (x * target / r, y * target / r)
            }
            Geometry::Mask => {
                // Pull the point back towards the arrival node until it sits
                // next to a non-exterior node.
                let inside = |px: f64, py: f64| {
                    let (x0, y0) = d.origin();
                    let i = ((px - x0) / d.h()).round();
                    let j = ((py - y0) / d.h()).round();
                    if i < 0.0 || j < 0.0 || i >= d.nx() as f64 || j >= d.ny() as f64 {
                        return false;
                    }
                    d.kind(j as usize * d.nx() + i as usize) != CellKind::Exterior
                };
                if inside(x, y) {
                    return (x, y);
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..30 {
                    let m = 0.5 * (lo + hi);
                    if inside(ax + m * (x - ax), ay + m * (y - ay)) {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                (ax + lo * (x - ax), ay + lo * (y - ay))
            }
        }
    }

    /// Advances one step of size `dt` (reduced to the CFL limit if needed).
    pub fn step(&mut self, dt: f64) -> Result<f64> {
        let dt = dt.min(self.stable_dt() * (0.9 / self.cfg.cfl).max(1.0));
        let d = Arc::clone(self.basis.domain());
        let omega_full = self.interp.full_omega(&self.state.omega);
        let n = d.n_interior();
        let mut next = vec![0.0; n];
        match self.cfg.scheme {
            Scheme::SemiLagrangianCubic => {
                // Velocity at the half step, extrapolated from the last two.
                let half = match &self.prev {
                    Some((pp, pdt)) => {
                        let c = 0.5 * dt / pdt;
                        self.psi_full.iter().zip(pp).map(|(a, b)| a + c * (a - b)).collect::<Vec<_>>()
                    }
                    None => self.psi_full.clone(),
                };
                for (r, out) in next.iter_mut().enumerate() {
                    let (x, y) = d.slot_xy(d.interior_slot(r));
                    let (u1, v1) = self.interp.velocity_at(&half, x, y);
                    let (mx, my) = self.reflect(x - 0.5 * dt * u1, y - 0.5 * dt * v1, x, y);
                    let (u2, v2) = self.interp.velocity_at(&half, mx, my);
                    let (px, py) = self.reflect(x - dt * u2, y - dt * v2, x, y);
                    *out = self.interp.cubic_clamped(&omega_full, &self.is_int, px, py, self.range);
                }
            }
            Scheme::Upwind2 => {
                let vel: Vec<(f64, f64)> = (0..n)
                    .map(|r| {
                        let (x, y) = d.slot_xy(d.interior_slot(r));
                        self.interp.velocity_at(&self.psi_full, x, y)
                    })
                    .collect();
                let w0 = self.state.omega.interior_values();
                let l0 = self.upwind_rate(&omega_full, &vel);
                let w1: Vec<f64> = w0.iter().zip(&l0).map(|(w, l)| w - dt * l).collect();
                let f1 = self.interp.full_omega(&ScalarField::from_interior(&d, &w1));
                let l1 = self.upwind_rate(&f1, &vel);
                for r in 0..n {
                    let v = 0.5 * (w0[r] + w1[r] - dt * l1[r]);
                    let (lo, hi) = self.neighbourhood_range(&omega_full, d.node_of_slot(d.interior_slot(r)));
                    next[r] = v.clamp(lo, hi);
                }
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vorticity at t = {}", self.state.t)));
        }
        let omega = ScalarField::from_interior(&d, &next);
        let psi = stream_only(self.basis.solver(), &omega, &self.b);
        let psi_full = self.interp.full_psi(&psi);
        self.speed = max_speed(&self.interp, &psi_full);
        let old = std::mem::replace(&mut self.psi_full, psi_full);
        self.prev = Some((old, dt));
        self.state = SimState { t: self.state.t + dt, omega, psi, step: self.state.step + 1 };
        Ok(dt)
    }

    /// `v . grad omega` by second-order upwind differences.
    fn upwind_rate(&self, full: &[f64], vel: &[(f64, f64)]) -> Vec<f64> {
        let d = self.basis.domain();
        let nx = self.interp.nx as i64;
        let h = d.h();
        vel.iter()
            .enumerate()
            .map(|(r, &(u, v))| {
                let node = d.node_of_slot(d.interior_slot(r)) as i64;
                let at = |k: i64| full[(node + k) as usize];
                let deriv = |vel: f64, stride: i64| {
                    if vel > 0.0 {
                        (3.0 * at(0) - 4.0 * at(-stride) + at(-2 * stride)) / (2.0 * h)
                    } else {
                        (-3.0 * at(0) + 4.0 * at(stride) - at(2 * stride)) / (2.0 * h)
                    }
                };
                u * deriv(u, 1) + v * deriv(v, nx)
            })
            .collect()
    }

    fn neighbourhood_range(&self, full: &[f64], node: usize) -> (f64, f64) {
        let nx = self.interp.nx;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for dj in 0..3 {
            for di in 0..3 {
                let n = node + dj * nx + di - nx - 1;
                if self.is_int[n] {
                    lo = lo.min(full[n]);
                    hi = hi.max(full[n]);
                }
            }
        }
        (lo, hi)
    }

    pub fn circulations(&self) -> &CirculationVector {
        &self.b
    }
}

fn max_speed(interp: &GridInterp, psi_full: &[f64]) -> f64 {
    let d = &interp.domain;
    d.interior_slots()
        .iter()
        .map(|&s| {
            let (x, y) = d.slot_xy(s as usize);
            let (u, v) = interp.velocity_at(psi_full, x, y);
            u.hypot(v)
        })
        .fold(0.0, f64::max)
}

/// `|D| / int |v|` for the flow of `(omega, b)`.
pub fn turnover_time(basis: &HarmonicBasis, omega: &ScalarField, b: &CirculationVector) -> Result<f64> {
    let psi = stream_only(basis.solver(), omega, b);
    let v = velocity(&psi);
    let d = basis.domain();
    let h2 = d.h() * d.h();
    let total: f64 = d
        .interior_slots()
        .iter()
        .map(|&s| v.vx.get(s as usize).hypot(v.vy.get(s as usize)))
        .sum::<f64>()
        * h2;
    if !(total > 0.0) {
        return Err(Error::InvalidInput("flow is at rest; turnover time undefined".into()));
    }
    Ok(d.area() / total)
}

fn diagnostics(
    basis: &HarmonicBasis,
    st: &SimState,
    b: &CirculationVector,
    reference: &ScalarField,
    omega0: &ScalarField,
    lp: Option<&LegendrePair>,
    cfg: &SimConfig,
) -> Result<DiagnosticsRow> {
    let hb = h_field(basis, b)?;
    let energy = 0.5 * inner(&st.omega, &st.psi) + 0.5 * inner(&hb, &st.omega) + 0.5 * q_form(basis, b);
    let v = velocity(&st.psi);
    let circulations = (1..basis.domain().n_components()).map(|k| circulation_recovered(&v, &st.omega, k)).collect::<Result<Vec<_>>>()?;
    let ec = match lp {
        Some(lp) => energy - casimir(&st.omega, lp)?,
        None => f64::NAN,
    };
    let (omega_min, omega_max) = st.omega.interior_range();
    Ok(DiagnosticsRow {
        t: st.t,
        energy,
        circulations,
        distance: norm_lp(&st.omega.sub(reference), cfg.p),
        histogram: histogram_distance(&st.omega, omega0, cfg.bins)?,
        kinetic: kinetic_energy(&v),
        ec,
        omega_min,
        omega_max,
    })
}

/// Runs `cfg.turnovers` turnover times from `omega0` with circulations `b`,
/// recording diagnostics every `cfg.cadence` steps (and at the end).
/// Distances are measured to `reference`.
pub fn run(
    basis: &HarmonicBasis,
    omega0: &ScalarField,
    b: &CirculationVector,
    cfg: &SimConfig,
    reference: &ScalarField,
    lp: Option<&LegendrePair>,
) -> Result<(DiagnosticsSeries, SimState)> {
    let mut sim = Simulation::new(basis, omega0, b, cfg)?;
    let turnover = turnover_time(basis, &sim.state.omega, b)?;
    let t_final = cfg.turnovers * turnover;
    let omega_init = sim.state.omega.clone();
    let mut series = DiagnosticsSeries { rows: vec![], steps: 0, turnover_time: turnover, area: basis.domain().area() };
    series.rows.push(diagnostics(basis, &sim.state, b, reference, &omega_init, lp, cfg)?);
    while sim.state.t < t_final * (1.0 - 1e-12) {
        let dt = sim.stable_dt().min(t_final - sim.state.t);
        sim.step(dt)?;
        if sim.state.step % cfg.cadence == 0 || sim.state.t >= t_final * (1.0 - 1e-12) {
            series.rows.push(diagnostics(basis, &sim.state, b, reference, &omega_init, lp, cfg)?);
        }
    }
    series.steps = sim.state.step;
    Ok((series, sim.state))
}

/// Smooth bump `exp(1 - 1 / (1 - rho^2))` centred at the interior node
/// farthest (in grid steps) from the boundary.
pub fn bump_field(domain: &Arc<GridDomain>) -> ScalarField {
    let n = domain.n_interior();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for (r, d) in dist.iter_mut().enumerate() {
        if domain.links(r).iter().any(|l| !l.is_interior()) {
            *d = 1;
            queue.push_back(r);
        }
    }
    while let Some(r) = queue.pop_front() {
        for l in domain.links(r) {
            if l.is_interior() && dist[l.interior as usize] == usize::MAX {
                dist[l.interior as usize] = dist[r] + 1;
                queue.push_back(l.interior as usize);
            }
        }
    }
    let (best, &depth) = dist.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
    let (cx, cy) = domain.slot_xy(domain.interior_slot(best));
    let radius = depth as f64 * domain.h();
    let mut vals = vec![0.0; n];
    for (r, v) in vals.iter_mut().enumerate() {
        let (x, y) = domain.slot_xy(domain.interior_slot(r));
        let rho2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius);
        if rho2 < 1.0 {
            *v = (1.0 - 1.0 / (1.0 - rho2)).exp();
        }
    }
    ScalarField::from_interior(domain, &vals)
}

/// Initial vorticity and circulations for a perturbed run.
pub fn perturb(state: &SteadyState, spec: &PerturbSpec) -> Result<(ScalarField, CirculationVector)> {
    let d = state.omega_bar.domain();
    let b = spec.b.clone().unwrap_or_else(|| state.a.clone());
    b.check(d)?;
    if !(spec.amplitude >= 0.0 && spec.amplitude.is_finite()) {
        return Err(Error::InvalidInput(format!("amplitude must be nonnegative, got {}", spec.amplitude)));
    }
    let base = ScalarField::from_interior(d, &state.omega_bar.interior_values());
    if spec.amplitude == 0.0 {
        return Ok((base, b));
    }
    let omega0 = match spec.mode {
        PerturbMode::Bump => {
            let bump = bump_field(d);
            let eps = spec.amplitude / norm_lp(&bump, 2.0);
            base.axpy(eps, &bump)
        }
        PerturbMode::Swap => {
            let n = d.n_interior();
            let h2 = d.h() * d.h();
            let target = spec.amplitude * spec.amplitude;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut w = base.clone();
            let mut acc = 0.0;
            let mut tries = 0usize;
            while acc < target {
                tries += 1;
                if tries > 100 * n {
                    return Err(Error::InvalidInput(format!(
                        "swap perturbation cannot reach L2 distance {}",
                        spec.amplitude
                    )));
                }
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i == j {
                    continue;
                }
                let (si, sj) = (d.interior_slot(i), d.interior_slot(j));
                let (wi, wj, oi, oj) = (w.get(si), w.get(sj), base.get(si), base.get(sj));
                let before = (wi - oi).powi(2) + (wj - oj).powi(2);
                let after = (wj - oi).powi(2) + (wi - oj).powi(2);
                acc += h2 * (after - before);
                w.set(si, wj);
                w.set(sj, wi);
            }
            w
        }
    };
    Ok((omega0, b))
}

#[derive(Clone, Debug)]
pub struct ExperimentRow {
    pub mode: PerturbMode,
    pub amplitude: f64,
    pub b: Vec<f64>,
    /// `|b - a|`.
    pub b_shift: f64,
    pub initial_distance: f64,
    pub sup_distance: f64,
    /// `sup_t |omega - omega_bar| / |omega(0) - omega_bar|`; NaN at zero amplitude.
    pub ratio: f64,
    /// `sup_t |omega - omega_bar| / |omega_bar|`.
    pub relative_sup: f64,
    pub energy_drift: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

/// One run per amplitude (and per perturbation spec template), recording the
/// supremum of the distance to the steady vorticity.
pub fn stability_experiment(
    basis: &HarmonicBasis,
    state: &SteadyState,
    amplitudes: &[f64],
    template: &PerturbSpec,
    cfg: &SimConfig,
) -> Result<ExperimentReport> {
    let lp = legendre(&state.g)?;
    let reference = ScalarField::from_interior(basis.domain(), &state.omega_bar.interior_values());
    let scale = norm_lp(&reference, cfg.p);
    let mut rows = vec![];
    for &amp in amplitudes {
        let spec = PerturbSpec { amplitude: amp, ..template.clone() };
        let (omega0, b) = perturb(state, &spec)?;
        let (series, _) = run(basis, &omega0, &b, cfg, &reference, Some(&lp))?;
        let initial = norm_lp(&omega0.sub(&reference), cfg.p);
        let sup = series.sup_distance();
        let b_shift = b.0.iter().zip(&state.a.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        rows.push(ExperimentRow {
            mode: spec.mode,
            amplitude: amp,
            b: b.0.clone(),
            b_shift,
            initial_distance: initial,
            sup_distance: sup,
            ratio: if initial > 0.0 { sup / initial } else { f64::NAN },
            relative_sup: sup / scale,
            energy_drift: series.energy_drift(),
            steps: series.steps,
        });
    }
    Ok(ExperimentReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::solve_basis;

    #[test]
    fn cubic_weights_reproduce_cubics() {
        for t in [0.0, 0.3, 0.77] {
            let (w, dw) = cubic_weights(t);
            let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
            let df = |x: f64| -2.0 + x - 0.75 * x * x;
            let nodes = [-1.0, 0.0, 1.0, 2.0];
            let v: f64 = (0..4).map(|k| w[k] * f(nodes[k])).sum();
            let dv: f64 = (0..4).map(|k| dw[k] * f(nodes[k])).sum();
            assert!((v - f(t)).abs() < 1e-13);
            assert!((dv - df(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn ghost_extrapolation_is_exact_for_quadratics() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let interp = GridInterp::new(&d);
        let q = |x: f64, y: f64| 0.3 + x - 2.0 * y + x * y - 0.5 * y * y;
        let f = ScalarField::from_fn(&d, q);
        let full = interp.full_omega(&f);
        for g in &interp.omega_ghosts {
            let (x, y) = d.node_xy(g.node);
            assert!((full[g.node] - q(x, y)).abs() < 1e-9, "{} {} {} {}", x, y, full[g.node], q(x, y));
        }
    }

    #[test]
    fn zero_vorticity_stays_zero() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let cfg = SimConfig { turnovers: 0.5, ..SimConfig::default() };
        let zero = ScalarField::zeros(&d);
        let (series, end) = run(&b, &zero, &CirculationVector::new(vec![1.0]), &cfg, &zero, None).unwrap();
        assert!(end.omega.values().iter().all(|v| *v == 0.0));
        assert!(series.energy_drift() < 1e-12);
    }

    #[test]
    fn bump_norm_scales() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let bump = bump_field(&d);
        assert!(bump.interior_range().1 > 0.5);
        assert!(bump.values().iter().all(|v| *v >= 0.0));
    }
}
