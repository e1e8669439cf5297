//! Kinetic energy, the energy-Casimir functional and its supporting
//! functionals `D`, `D_s`, `Dhat`, plus the stream-function form `H`.

use crate::error::{Error, Result};
use crate::field::{h_field, p_apply};
use crate::gfunc::{GFunc, LegendrePair};
use crate::grid::{inner, integrate, neg_laplacian, stiffness, CirculationVector, ScalarField};
use crate::harmonic::HarmonicBasis;
use crate::steady::SteadyState;

/// Bracket growth limit for the `mu` equation.
const MU_BRACKET_LIMIT: f64 = (1u64 << 20) as f64;

/// `sum_ij q_ij a_i a_j`.
pub fn q_form(basis: &HarmonicBasis, a: &CirculationVector) -> f64 {
    let n = basis.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += basis.q[(i, j)] * a.0[i] * a.0[j];
        }
    }
    s
}

/// Pieces shared by every functional of one field `w`.
struct Prepared {
    /// `P w + h_a`.
    psi: ScalarField,
    /// `int w P w`.
    wpw: f64,
    /// `int h_a w`.
    haw: f64,
    qaa: f64,
}

fn prepare(basis: &HarmonicBasis, w: &ScalarField, a: &CirculationVector) -> Result<Prepared> {
    let ha = h_field(basis, a)?;
    let pw = p_apply(basis, w);
    let wpw = inner(w, &pw);
    let haw = inner(&ha, w);
    if !(wpw.is_finite() && haw.is_finite()) {
        return Err(Error::NonFinite("energy terms".into()));
    }
    Ok(Prepared { psi: pw.add(&ha), wpw, haw, qaa: q_form(basis, a) })
}

/// `E(w, a) = 1/2 int w P w + int h_a w + 1/2 sum q_ij a_i a_j`.
pub fn energy(basis: &HarmonicBasis, omega: &ScalarField, a: &CirculationVector) -> Result<f64> {
    let p = prepare(basis, omega, a)?;
    Ok(0.5 * p.wpw + p.haw + 0.5 * p.qaa)
}

/// Casimir `int Ghat(w)`.
pub fn casimir(w: &ScalarField, lp: &LegendrePair) -> Result<f64> {
    let d = w.domain();
    let h2 = d.h() * d.h();
    let mut s = 0.0;
    for &slot in d.interior_slots() {
        s += lp.ghat(w.get(slot as usize))?;
    }
    Ok(s * h2)
}

/// `EC(w) = E(w, a) - int Ghat(w)`.
pub fn energy_casimir(basis: &HarmonicBasis, w: &ScalarField, a: &CirculationVector, lp: &LegendrePair) -> Result<f64> {
    Ok(energy(basis, w, a)? - casimir(w, lp)?)
}

fn int_big_g(psi: &ScalarField, g: &GFunc, s: f64) -> f64 {
    let d = psi.domain();
    let h2 = d.h() * d.h();
    d.interior_slots().iter().map(|&k| g.antideriv(psi.get(k as usize) - s)).sum::<f64>() * h2
}

fn int_g(psi: &ScalarField, g: &GFunc, s: f64) -> f64 {
    let d = psi.domain();
    let h2 = d.h() * d.h();
    d.interior_slots().iter().map(|&k| g.value(psi.get(k as usize) - s)).sum::<f64>() * h2
}

fn d_s_prepared(p: &Prepared, g: &GFunc, s: f64, m: f64) -> f64 {
    -0.5 * p.wpw + int_big_g(&p.psi, g, s) + s * m + 0.5 * p.qaa
}

/// `D(w) = -1/2 int w P w + int G(P w + h_a) + 1/2 sum q_ij a_i a_j`.
pub fn supporting_d(basis: &HarmonicBasis, w: &ScalarField, a: &CirculationVector, g: &GFunc) -> Result<f64> {
    let p = prepare(basis, w, a)?;
    Ok(d_s_prepared(&p, g, 0.0, 0.0))
}

/// `D_s(w) = -1/2 int w P w + int G(P w + h_a - s) + s m + 1/2 sum q_ij a_i a_j`.
pub fn supporting_d_s(
    basis: &HarmonicBasis,
    w: &ScalarField,
    a: &CirculationVector,
    g: &GFunc,
    s: f64,
    m: f64,
) -> Result<f64> {
    let p = prepare(basis, w, a)?;
    Ok(d_s_prepared(&p, g, s, m))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DHat {
    pub value: f64,
    pub mu: f64,
    /// `|int g(P w + h_a - mu) - m|`.
    pub residual: f64,
}

/// Root of `s -> int g(psi - s) - m` (decreasing in `s`) by bisection on a
/// symmetric bracket doubled until it changes sign.
fn solve_mu(psi: &ScalarField, g: &GFunc, m: f64) -> Result<(f64, f64)> {
    let phi = |s: f64| int_g(psi, g, s) - m;
    let mut half = 1.0;
    loop {
        if phi(-half) >= 0.0 && phi(half) <= 0.0 {
            break;
        }
        half *= 2.0;
        if half > MU_BRACKET_LIMIT {
            return Err(Error::Bracket(format!(
                "mu equation has no sign change on [-{MU_BRACKET_LIMIT}, {MU_BRACKET_LIMIT}]"
            )));
        }
    }
    let (mut lo, mut hi) = (-half, half);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = phi(mid);
        if v == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (phi(lo).abs(), phi(hi).abs());
    Ok(if rl <= rh { (lo, rl) } else { (hi, rh) })
}

/// `Dhat(w) = inf_s D_s(w)`, attained at the `mu` solving
/// `int g(P w + h_a - mu) = m`.
pub fn supporting_d_hat(
    basis: &HarmonicBasis,
    w: &ScalarField,
    a: &CirculationVector,
    g: &GFunc,
    m: f64,
) -> Result<DHat> {
    let p = prepare(basis, w, a)?;
    let (mu, residual) = solve_mu(&p.psi, g, m)?;
    Ok(DHat { value: d_s_prepared(&p, g, mu, m), mu, residual })
}

/// All functionals of one field, sharing a single `P` application.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalValues {
    pub e: f64,
    pub ec: f64,
    pub d: f64,
    pub d_hat: f64,
    pub mu: f64,
    pub mu_residual: f64,
}

pub fn evaluate_all(
    basis: &HarmonicBasis,
    w: &ScalarField,
    a: &CirculationVector,
    lp: &LegendrePair,
    m: f64,
) -> Result<FunctionalValues> {
    let p = prepare(basis, w, a)?;
    let g = lp.g();
    let e = 0.5 * p.wpw + p.haw + 0.5 * p.qaa;
    let ec = e - casimir(w, lp)?;
    let d = d_s_prepared(&p, g, 0.0, 0.0);
    let (mu, mu_residual) = solve_mu(&p.psi, g, m)?;
    let d_hat = d_s_prepared(&p, g, mu, m);
    Ok(FunctionalValues { e, ec, d, d_hat, mu, mu_residual })
}

/// `Ghat(s) + G(tau) - s tau`, nonnegative with equality where `g(tau) = s`.
pub fn young_gap(lp: &LegendrePair, s: f64, tau: f64) -> Result<f64> {
    Ok(lp.ghat(s)? + lp.big_g(tau) - s * tau)
}

/// `H(u) = 1/2 int |grad u|^2 - int F(-Delta u)` at `u = psi_bar + phi`, with
/// `F(s) = Ghat(s) - Ghat(0)`.
pub fn stream_energy_casimir(psi_pert: &ScalarField, lp: &LegendrePair, state: &SteadyState) -> Result<f64> {
    if !std::sync::Arc::ptr_eq(psi_pert.domain(), state.psi_bar.domain()) {
        return Err(Error::InvalidInput("perturbation lives on a different grid".into()));
    }
    let u = state.psi_bar.add(psi_pert);
    let lap = neg_laplacian(&u);
    let d = u.domain();
    let h2 = d.h() * d.h();
    let mut f_sum = 0.0;
    for &s in d.interior_slots() {
        f_sum += lp.big_f(lap.get(s as usize))?;
    }
    Ok(0.5 * stiffness(&u, &u) - f_sum * h2)
}

/// `int w`, the `m` of a steady vorticity.
pub fn total_vorticity(w: &ScalarField) -> f64 {
    integrate(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{kinetic_energy, stream_solve, velocity};
    use crate::gfunc::{extend_g, legendre};
    use crate::grid::GridDomain;
    use crate::harmonic::solve_basis;

    #[test]
    fn energy_of_nothing_is_zero() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let e = energy(&b, &ScalarField::zeros(&d), &CirculationVector::zeros(1)).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_matches_velocity_kinetic_energy() {
        let d = GridDomain::annulus(1.0, 2.0, 32).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let w = ScalarField::from_fn(&d, |x, y| 1.0 + 0.5 * x - 0.3 * y * y);
        let a = CirculationVector::new(vec![1.5]);
        let e = energy(&b, &w, &a).unwrap();
        let sol = stream_solve(&b, &w, &a).unwrap();
        // Summation by parts makes the Dirichlet form identical to the formula.
        assert!((0.5 * stiffness(&sol.psi, &sol.psi) - e).abs() < 1e-9 * e.abs());
        let k = kinetic_energy(&velocity(&sol.psi));
        assert!((k - e).abs() <= 0.02 * e.abs(), "velocity {k} formula {e}");
    }

    #[test]
    fn casimir_of_constant() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let lp = legendre(&GFunc::linear(2.0)).unwrap();
        let w = ScalarField::constant(&d, 0.7);
        let a = CirculationVector::new(vec![0.3]);
        let area = integrate(&ScalarField::constant(&d, 1.0));
        let ec = energy_casimir(&b, &w, &a, &lp).unwrap();
        let e = energy(&b, &w, &a).unwrap();
        assert!((ec - (e - area * 0.49 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn d_s_at_zero_is_d_and_mu_equation_holds() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let g = extend_g(&GFunc::linear(1.3), -0.5, 0.5).unwrap();
        let w = ScalarField::from_fn(&d, |x, _| 0.2 * x);
        let a = CirculationVector::new(vec![-0.4]);
        let dd = supporting_d(&b, &w, &a, &g).unwrap();
        assert_eq!(dd, supporting_d_s(&b, &w, &a, &g, 0.0, 0.0).unwrap());
        let m = 0.25;
        let dh = supporting_d_hat(&b, &w, &a, &g, m).unwrap();
        assert!(dh.residual <= 1e-8);
        let eps = 1e-4;
        for s in [dh.mu - 0.3, dh.mu + 0.3, dh.mu + eps, dh.mu - eps] {
            assert!(supporting_d_s(&b, &w, &a, &g, s, m).unwrap() >= dh.value - 1e-12);
        }
        let big = supporting_d_s(&b, &w, &a, &g, 1e3, m).unwrap();
        assert!(big > 1e3 * dh.value.abs().max(1.0));
        let big = supporting_d_s(&b, &w, &a, &g, -1e3, m).unwrap();
        assert!(big > 1e3 * dh.value.abs().max(1.0));
    }
}
