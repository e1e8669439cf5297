//! Constrained eigenvalue problems on the discrete X-space (vanishing on the
//! outer boundary, constant on each inner one) and the stability criteria
//! built from them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::p_apply;
use crate::grid::{all_fluxes, inner, integrate, neg_laplacian, norm2, stiffness, GridDomain, ScalarField};
use crate::harmonic::HarmonicBasis;
use crate::linalg::{dot, interior_matrix_rows, CondensedSolver, SkylineCholesky};
use crate::steady::SteadyState;

pub const TOL_EIG: f64 = 1e-8;
pub const TOL_MARGIN: f64 = 1e-6;
const MAX_ITER: usize = 2000;
const START_SEED: u64 = 0x5eed_1a3b;

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub value: f64,
    /// Unit L2 norm, positive mean.
    pub minimizer: ScalarField,
    /// Discrete flux of the minimizer through each inner component.
    pub flux_diag: Vec<f64>,
    pub iterations: usize,
    /// L2 norm of the eigen-equation residual.
    pub residual: f64,
}

/// Shift-invert operator `(A - sigma M)^{-1} M` for
/// `A = K + h^2 diag(c) + h^4 z z^T` on X (or on the Dirichlet subspace).
struct ShiftInvert {
    domain: Arc<GridDomain>,
    inverse: Inverse,
    c: Vec<f64>,
    rank_one: Option<RankOne>,
}

enum Inverse {
    Condensed(CondensedSolver),
    Dirichlet(SkylineCholesky),
}

/// Sherman-Morrison data for the rank-one term `u u^T`, `u = h^2 z`.
struct RankOne {
    z: Vec<f64>,
    wy: Vec<f64>,
    wt: Vec<f64>,
    denom: f64,
}

impl Inverse {
    fn solve(&self, r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Inverse::Condensed(s) => s.solve_interior(r),
            Inverse::Dirichlet(ch) => {
                let mut x = r.to_vec();
                ch.solve_in_place(&mut x);
                (x, vec![])
            }
        }
    }
}

impl ShiftInvert {
    fn new(domain: &Arc<GridDomain>, c: Vec<f64>, z: Option<Vec<f64>>, dirichlet: bool) -> Result<ShiftInvert> {
        let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
        // Below the spectrum: A - sigma M >= K + h^2 I is positive definite.
        let sigma = cmin.min(0.0) - 1.0;
        let shifted: Vec<f64> = c.iter().map(|v| v - sigma).collect();
        let inverse = if dirichlet {
            Inverse::Dirichlet(SkylineCholesky::factor(&interior_matrix_rows(domain, Some(&shifted)))?)
        } else {
            Inverse::Condensed(CondensedSolver::new(domain, Some(&shifted))?)
        };
        let h2 = domain.h() * domain.h();
        let rank_one = z.map(|z| {
            let u: Vec<f64> = z.iter().map(|v| h2 * v).collect();
            let (wy, wt) = inverse.solve(&u);
            let denom = 1.0 + dot(&u, &wy);
            RankOne { z, wy, wt, denom }
        });
        Ok(ShiftInvert { domain: Arc::clone(domain), inverse, c, rank_one })
    }

    fn apply(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h2 = self.domain.h() * self.domain.h();
        let r: Vec<f64> = x.iter().map(|v| h2 * v).collect();
        let (mut y, mut t) = self.inverse.solve(&r);
        if let Some(ro) = &self.rank_one {
            let coef = h2 * dot(&ro.z, &y) / ro.denom;
            for (yi, wi) in y.iter_mut().zip(&ro.wy) {
                *yi -= coef * wi;
            }
            for (ti, wi) in t.iter_mut().zip(&ro.wt) {
                *ti -= coef * wi;
            }
        }
        (y, t)
    }

    fn field(&self, x: &[f64], t: &[f64]) -> ScalarField {
        if t.is_empty() {
            ScalarField::from_interior(&self.domain, x)
        } else {
            self.domain.field_from_parts(x, t)
        }
    }

    /// Rayleigh quotient and residual of a mass-normalized field.
    fn rayleigh(&self, u: &ScalarField) -> (f64, f64) {
        let d = &self.domain;
        let h2 = d.h() * d.h();
        let x = u.interior_values();
        let mut num = stiffness(u, u) + h2 * x.iter().zip(&self.c).map(|(v, c)| c * v * v).sum::<f64>();
        let zu = self.rank_one.as_ref().map(|ro| h2 * dot(&ro.z, &x));
        if let Some(zu) = zu {
            num += zu * zu;
        }
        let lam = num / (h2 * dot(&x, &x));
        let lap = neg_laplacian(u).interior_values();
        let mut res = 0.0;
        for r in 0..x.len() {
            let mut v = lap[r] + self.c[r] * x[r] - lam * x[r];
            if let (Some(ro), Some(zu)) = (&self.rank_one, zu) {
                v += ro.z[r] * zu;
            }
            res += v * v;
        }
        (lam, (res * h2).sqrt())
    }
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    (0..n).map(|_| 1.0 + 0.5 * rng.gen::<f64>()).collect()
}

fn normalize(x: &mut [f64], t: &mut [f64], h2: f64) {
    let nrm = (h2 * dot(x, x)).sqrt();
    x.iter_mut().for_each(|v| *v /= nrm);
    t.iter_mut().for_each(|v| *v /= nrm);
}

/// Inverse iteration to eigen-residual `tol`, optionally orthogonal (in L2)
/// to the given fields.
fn inverse_iteration(op: &ShiftInvert, deflate: &[ScalarField], tol: f64) -> Result<SpectralResult> {
    let d = &op.domain;
    let h2 = d.h() * d.h();
    let defl: Vec<(Vec<f64>, Vec<f64>)> = deflate
        .iter()
        .map(|f| {
            let t = (1..d.n_components()).map(|k| f.boundary_value(k)).collect();
            (f.interior_values(), if matches!(op.inverse, Inverse::Dirichlet(_)) { vec![] } else { t })
        })
        .collect();
    let project = |x: &mut Vec<f64>, t: &mut Vec<f64>| {
        for (fx, ft) in &defl {
            let coef = dot(x, fx) / dot(fx, fx);
            x.iter_mut().zip(fx).for_each(|(a, b)| *a -= coef * b);
            t.iter_mut().zip(ft).for_each(|(a, b)| *a -= coef * b);
        }
    };
    let mut x = start_vector(d.n_interior());
    project(&mut x, &mut vec![]);
    let mut last = (f64::NAN, f64::INFINITY);
    for it in 1..=MAX_ITER {
        let (mut y, mut ty) = op.apply(&x);
        project(&mut y, &mut ty);
        normalize(&mut y, &mut ty, h2);
        let u = op.field(&y, &ty);
        let (lam, res) = op.rayleigh(&u);
        if !lam.is_finite() {
            return Err(Error::NonFinite("Rayleigh quotient".into()));
        }
        last = (lam, res);
        x = y;
        if res <= tol {
            let sign = if integrate(&u) < 0.0 { -1.0 } else { 1.0 };
            let u = u.scale(sign);
            let flux = all_fluxes(&u)[1..].to_vec();
            return Ok(SpectralResult { value: lam, minimizer: u, flux_diag: flux, iterations: it, residual: res });
        }
    }
    Err(Error::NoConvergence { method: "inverse iteration", iterations: MAX_ITER, residual: last.1 })
}

fn check_c(domain: &GridDomain, c: &ScalarField) -> Result<Vec<f64>> {
    if c.domain().n_slots() != domain.n_slots() || c.domain().n_interior() != domain.n_interior() {
        return Err(Error::InvalidInput("coefficient lives on a different grid".into()));
    }
    Ok(c.interior_values())
}

/// Smallest eigenvalue of `-Delta_h + c` on X_h, with minimizer.
pub fn lambda_c(basis: &HarmonicBasis, c: &ScalarField, tol: f64) -> Result<SpectralResult> {
    lambda_c_deflated(basis, c, &[], tol)
}

/// As [`lambda_c`], restricted to the L2 complement of `deflate`.
pub fn lambda_c_deflated(basis: &HarmonicBasis, c: &ScalarField, deflate: &[ScalarField], tol: f64) -> Result<SpectralResult> {
    let cv = check_c(basis.domain(), c)?;
    let op = ShiftInvert::new(basis.domain(), cv, None, false)?;
    inverse_iteration(&op, deflate, tol)
}

/// `lambda_h`, the smallest Dirichlet-energy Rayleigh quotient on X_h.
pub fn lambda_plain(basis: &HarmonicBasis, tol: f64) -> Result<SpectralResult> {
    lambda_c(basis, &ScalarField::zeros(basis.domain()), tol)
}

/// Smallest eigenvalue of `-Delta_h` with zero values on every boundary node.
pub fn dirichlet_ground(domain: &Arc<GridDomain>, tol: f64) -> Result<SpectralResult> {
    let op = ShiftInvert::new(domain, vec![0.0; domain.n_interior()], None, true)?;
    inverse_iteration(&op, &[], tol)
}

/// Largest eigenvalue `Lambda_h` of `P` in L2, by power iteration with the
/// condensed solve. `residual` is `|P phi - Lambda phi|_2` for unit `phi`.
pub fn lambda_big(basis: &HarmonicBasis, tol: f64) -> Result<SpectralResult> {
    let d = basis.domain();
    let mut phi = ScalarField::from_interior(d, &start_vector(d.n_interior()));
    phi = phi.scale(1.0 / norm2(&phi));
    let mut last = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let pphi = p_apply(basis, &phi);
        let lam = inner(&phi, &pphi);
        let res = norm2(&pphi.axpy(-lam, &phi));
        last = res;
        if res <= tol * lam {
            let u = if integrate(&phi) < 0.0 { phi.scale(-1.0) } else { phi };
            let flux = all_fluxes(&p_apply(basis, &u))[1..].to_vec();
            return Ok(SpectralResult { value: lam, minimizer: u, flux_diag: flux, iterations: it, residual: res });
        }
        let n = norm2(&pphi);
        phi = ScalarField::from_interior(d, &pphi.interior_values()).scale(1.0 / n);
    }
    Err(Error::NoConvergence { method: "power iteration", iterations: MAX_ITER, residual: last })
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub lambda_h: f64,
    /// Smallest eigenvalue of `int |grad u|^2 - int g'(psi_bar) u^2` on X_h.
    pub mu_min: f64,
    /// Weak positive-definiteness constant; `None` on the constant branch.
    pub delta0: Option<f64>,
    pub min_gp: f64,
    pub max_gp: f64,
    /// `min g' > 0`.
    pub arnold_min_ok: bool,
    /// `max g' < lambda_h`.
    pub arnold_max_ok: bool,
    /// `min g' >= 0`.
    pub thm15_min_ok: bool,
    /// `mu_min >= -tol_eig`.
    pub thm15_quadform_ok: bool,
    /// `g'(psi_bar)` vanishes identically, so the vorticity is constant.
    pub constant_branch: bool,
    pub tol_eig: f64,
    pub tol_margin: f64,
}

impl CriterionReport {
    pub fn satisfied(&self) -> bool {
        self.thm15_min_ok && self.thm15_quadform_ok
    }
}

fn slopes(state: &SteadyState) -> ScalarField {
    state.psi_bar.map(|s| state.g.deriv(s))
}

fn trivial_branch(gp: &ScalarField) -> bool {
    let d = gp.domain();
    integrate(gp) <= 1e-12 * d.area()
}

/// Stability verdicts for a certified steady state.
pub fn check_stability(basis: &HarmonicBasis, state: &SteadyState, tol: f64) -> Result<CriterionReport> {
    if !state.certified {
        return Err(Error::InvalidInput("steady state carries no residual certificate".into()));
    }
    let gp = slopes(state);
    let (min_gp, max_gp) = gp.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let lambda_h = lambda_plain(basis, tol)?.value;
    let mu_min = lambda_c(basis, &gp.scale(-1.0), tol)?.value;
    let delta0 = weak_pos_def(basis, state, tol)?;
    let constant_branch = max_gp.abs() <= 1e-14;
    Ok(CriterionReport {
        lambda_h,
        mu_min,
        delta0,
        min_gp,
        max_gp,
        arnold_min_ok: min_gp > 0.0,
        arnold_max_ok: max_gp < lambda_h - TOL_MARGIN,
        thm15_min_ok: min_gp >= 0.0,
        thm15_quadform_ok: mu_min >= -tol,
        constant_branch,
        tol_eig: tol,
        tol_margin: TOL_MARGIN,
    })
}

/// Smallest eigenvalue over X_h of
/// `int |grad u|^2 - int g' u^2 + (int g' u)^2 / int g'`, with `g' = g'(psi_bar)`.
/// Returns `None` when `int g'` vanishes.
pub fn weak_pos_def(basis: &HarmonicBasis, state: &SteadyState, tol: f64) -> Result<Option<f64>> {
    let gp = slopes(state);
    if trivial_branch(&gp) {
        return Ok(None);
    }
    let total = integrate(&gp);
    let c: Vec<f64> = gp.interior_values().iter().map(|v| -v).collect();
    let z: Vec<f64> = gp.interior_values().iter().map(|v| v / total.sqrt()).collect();
    let op = ShiftInvert::new(basis.domain(), c, Some(z), false)?;
    Ok(Some(inverse_iteration(&op, &[], tol)?.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::solve_basis;
    use crate::oracle::{radial_eigen, RadialEigenKind, RadialProblem};

    #[test]
    fn plain_eigenvalue_matches_radial_and_reciprocity() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let l = lambda_plain(&b, 1e-9).unwrap();
        let rp = RadialProblem::new(1.0, 2.0, 4096).unwrap();
        let exact = radial_eigen(&rp, RadialEigenKind::LambdaY).unwrap();
        assert!((l.value - exact).abs() / exact < 0.01, "{} vs {exact}", l.value);
        assert!(l.flux_diag[0].abs() < 1e-10);
        assert!(l.minimizer.boundary_value(1) > 0.1);
        let big = lambda_big(&b, 1e-12).unwrap();
        assert!((l.value * big.value - 1.0).abs() < 1e-8);
        let dir = dirichlet_ground(&d, 1e-9).unwrap();
        assert!(dir.value > l.value);
    }

    #[test]
    fn shift_identity_and_deflation() {
        let d = GridDomain::annulus(1.0, 2.0, 12).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let c = ScalarField::from_fn(&d, |x, y| 0.3 * x * y);
        let l1 = lambda_c(&b, &c, 1e-9).unwrap();
        let l2 = lambda_c(&b, &c.map(|v| v + 2.5), 1e-9).unwrap();
        assert!((l2.value - l1.value - 2.5).abs() < 1e-8);
        let second = lambda_c_deflated(&b, &c, &[l1.minimizer.clone()], 1e-8).unwrap();
        assert!(second.value > l1.value + 1.0);
        assert!(inner(&second.minimizer, &l1.minimizer).abs() < 1e-8);
    }
}
