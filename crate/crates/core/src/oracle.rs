//! One-dimensional radial reference solutions on the annulus.
//!
//! These share no code with the 2D grid path and serve as independent checks.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct RadialProblem {
    pub r_in: f64,
    pub r_out: f64,
    pub n: usize,
}

impl RadialProblem {
    pub fn new(r_in: f64, r_out: f64, n: usize) -> Result<RadialProblem> {
        if !(r_in > 0.0 && r_in < r_out) {
            return Err(Error::InvalidInput(format!("radial problem needs 0 < r_in < r_out, got {r_in}, {r_out}")));
        }
        if n < 256 {
            return Err(Error::InvalidInput(format!("radial grid needs n >= 256, got {n}")));
        }
        Ok(RadialProblem { r_in, r_out, n })
    }

    pub fn dr(&self) -> f64 {
        (self.r_out - self.r_in) / (self.n - 1) as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r_in + i as f64 * self.dr()
    }
}

/// Samples `u(r_i)` on the uniform radial grid.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation, clamped to the end values.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        let dr = self.r[1] - self.r[0];
        let t = ((r - self.r[0]) / dr).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        self.u[i] * (1.0 - f) + self.u[i + 1] * f
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Solves `(1/r)(r u')' + kappa(r) u = -omega(r)` with `u(r_out) = 0` and
/// `2 pi r_in u'(r_in) = a1`, by a conservative second-order finite-volume
/// scheme.
pub fn radial_stream(
    rp: &RadialProblem,
    omega: &dyn Fn(f64) -> f64,
    kappa: Option<&dyn Fn(f64) -> f64>,
    a1: f64,
) -> Result<RadialProfile> {
    let n = rp.n;
    let dr = rp.dr();
    let r: Vec<f64> = (0..n).map(|i| rp.radius(i)).collect();
    let half = |i: usize| r[i] + 0.5 * dr;
    let vol = |lo: f64, hi: f64| 0.5 * (hi * hi - lo * lo);
    // Rows: lower[i] u_{i-1} + diag[i] u_i + upper[i] u_{i+1} = rhs[i]
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n - 1 {
        let (lo, cl) = if i == 0 { (r[0], 0.0) } else { (half(i - 1), half(i - 1) / dr) };
        let hi = half(i);
        let cu = hi / dr;
        let v = vol(lo, hi);
        let k = kappa.map_or(0.0, |f| f(r[i]));
        lower[i] = -cl;
        upper[i] = -cu;
        diag[i] = cl + cu - v * k;
        rhs[i] = v * omega(r[i]);
        if i == 0 {
            rhs[i] -= a1 / (2.0 * PI);
        }
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = 0.0;
    let u = thomas(&lower, &diag, &upper, &rhs)?;
    Ok(RadialProfile { r, u })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 {
        return Err(Error::Singular("tridiagonal pivot".into()));
    }
    c[0] = upper[0] / b;
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] - lower[i] * c[i - 1];
        if b == 0.0 {
            return Err(Error::Singular("tridiagonal pivot".into()));
        }
        c[i] = upper[i] / b;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / b;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialEigenKind {
    /// `u'(r_in) = 0`, `u(r_out) = 0`: the smallest eigenvalue over functions
    /// constant on the inner circle.
    LambdaY,
    /// `u(r_in) = u(r_out) = 0`.
    Dirichlet,
}

/// Value at `r_out` of the solution of `u'' + u'/r + mu u = 0` started at
/// `r_in` with the initial data of `kind`, integrated by RK4 in `n - 1` steps.
pub fn shooting_mismatch(rp: &RadialProblem, kind: RadialEigenKind, mu: f64) -> f64 {
    let steps = rp.n - 1;
    let dr = rp.dr();
    let (mut u, mut v) = match kind {
        RadialEigenKind::LambdaY => (1.0, 0.0),
        RadialEigenKind::Dirichlet => (0.0, 1.0),
    };
    let f = |r: f64, u: f64, v: f64| (v, -v / r - mu * u);
    let mut r = rp.r_in;
    for _ in 0..steps {
        let (k1u, k1v) = f(r, u, v);
        let (k2u, k2v) = f(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
        let (k3u, k3v) = f(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
        let (k4u, k4v) = f(r + dr, u + dr * k3u, v + dr * k3v);
        u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += dr;
    }
    u
}

/// Bracket found by scanning before bisection, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct EigenBracket {
    pub lo: f64,
    pub hi: f64,
    pub mismatch_lo: f64,
    pub mismatch_hi: f64,
}

/// Brackets the first sign change of the shooting mismatch in `mu`.
pub fn radial_eigen_bracket(rp: &RadialProblem, kind: RadialEigenKind) -> Result<EigenBracket> {
    let gap = rp.r_out - rp.r_in;
    let step = 0.02 * (PI / (2.0 * gap)).powi(2);
    let mut lo = 0.0;
    let mut m_lo = shooting_mismatch(rp, kind, lo);
    for _ in 0..100_000 {
        let hi = lo + step;
        let m_hi = shooting_mismatch(rp, kind, hi);
        if m_lo.signum() != m_hi.signum() || m_hi == 0.0 {
            return Ok(EigenBracket { lo, hi, mismatch_lo: m_lo, mismatch_hi: m_hi });
        }
        lo = hi;
        m_lo = m_hi;
    }
    Err(Error::Bracket("no sign change in the radial shooting mismatch".into()))
}

/// Smallest eigenvalue of the radial problem, bisected to relative tol 1e-10.
pub fn radial_eigen(rp: &RadialProblem, kind: RadialEigenKind) -> Result<f64> {
    let b = radial_eigen_bracket(rp, kind)?;
    let (mut lo, mut hi, mut m_lo) = (b.lo, b.hi, b.mismatch_lo);
    while hi - lo > 1e-10 * hi.abs().max(1e-300) {
        let mid = 0.5 * (lo + hi);
        let m = shooting_mismatch(rp, kind, mid);
        if m == 0.0 {
            return Ok(mid);
        }
        if m.signum() == m_lo.signum() {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenfunction of [`radial_eigen`] sampled on the radial grid
/// (normalised to `u(r_in) = 1` or `u'(r_in) = 1`).
pub fn radial_eigenfunction(rp: &RadialProblem, kind: RadialEigenKind, mu: f64) -> RadialProfile {
    let dr = rp.dr();
    let (mut u, mut v) = match kind {
        RadialEigenKind::LambdaY => (1.0, 0.0),
        RadialEigenKind::Dirichlet => (0.0, 1.0),
    };
    let f = |r: f64, u: f64, v: f64| (v, -v / r - mu * u);
    let mut rs = vec![rp.r_in];
    let mut us = vec![u];
    let mut r = rp.r_in;
    for _ in 0..rp.n - 1 {
        let (k1u, k1v) = f(r, u, v);
        let (k2u, k2v) = f(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
        let (k3u, k3v) = f(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
        let (k4u, k4v) = f(r + dr, u + dr * k3u, v + dr * k3v);
        u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += dr;
        rs.push(r);
        us.push(u);
    }
    RadialProfile { r: rs, u: us }
}

/// Closed forms for the annulus harmonic basis.
#[derive(Clone, Copy, Debug)]
pub struct AnnulusClosedForms {
    pub r_in: f64,
    pub r_out: f64,
    pub p11: f64,
    pub q11: f64,
}

impl AnnulusClosedForms {
    /// `zeta(r) = ln(r_out / r) / ln(r_out / r_in)`.
    pub fn zeta(&self, r: f64) -> f64 {
        (self.r_out / r).ln() / (self.r_out / self.r_in).ln()
    }
}

pub fn annulus_closed_forms(r_in: f64, r_out: f64) -> Result<AnnulusClosedForms> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidInput(format!("need 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    let p11 = 2.0 * PI / (r_out / r_in).ln();
    Ok(AnnulusClosedForms { r_in, r_out, p11, q11: 1.0 / p11 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_solution_for_pure_circulation() {
        let rp = RadialProblem::new(1.0, 2.0, 4096).unwrap();
        let gamma = 1.7;
        let prof = radial_stream(&rp, &|_| 0.0, None, gamma).unwrap();
        let err = prof
            .r
            .iter()
            .zip(&prof.u)
            .map(|(r, u)| (u - gamma / (2.0 * PI) * (r / 2.0).ln()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn constant_vorticity_profile() {
        // u = -c r^2/4 + A ln r + B with u'(1) = 0 => A = c/2.
        let rp = RadialProblem::new(1.0, 2.0, 4096).unwrap();
        let c = 2.0;
        let exact = |r: f64| -c * r * r / 4.0 + c / 2.0 * r.ln() + c - c / 2.0 * 2f64.ln();
        let prof = radial_stream(&rp, &|_| c, None, 0.0).unwrap();
        let err = prof.r.iter().zip(&prof.u).map(|(r, u)| (u - exact(*r)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
        // The exact profile satisfies the ODE and boundary data by substitution.
        let (r, d) = (1.37, 1e-4);
        let lap = (exact(r + d) - 2.0 * exact(r) + exact(r - d)) / (d * d) + (exact(r + d) - exact(r - d)) / (2.0 * d * r);
        assert!((lap + c).abs() < 1e-6);
        assert!(exact(2.0).abs() < 1e-14);
    }

    #[test]
    fn second_order_refinement() {
        let omega = |r: f64| (3.0 * r).sin();
        let fine = radial_stream(&RadialProblem::new(1.0, 2.0, 32769).unwrap(), &omega, None, 0.3).unwrap();
        let err = |n: usize| {
            let p = radial_stream(&RadialProblem::new(1.0, 2.0, n).unwrap(), &omega, None, 0.3).unwrap();
            p.r.iter().zip(&p.u).map(|(r, u)| (u - fine.eval(*r)).abs()).fold(0.0, f64::max)
        };
        let ratio = err(257) / err(513);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn eigen_bracket_and_refinement() {
        let rp = RadialProblem::new(1.0, 2.0, 4096).unwrap();
        let b = radial_eigen_bracket(&rp, RadialEigenKind::LambdaY).unwrap();
        assert!(b.mismatch_lo * b.mismatch_hi < 0.0);
        let mu = radial_eigen(&rp, RadialEigenKind::LambdaY).unwrap();
        let mu2 = radial_eigen(&RadialProblem::new(1.0, 2.0, 8192).unwrap(), RadialEigenKind::LambdaY).unwrap();
        assert!((mu - mu2).abs() < 1e-8 * mu, "{mu} {mu2}");
        let dir = radial_eigen(&rp, RadialEigenKind::Dirichlet).unwrap();
        assert!(mu < dir);
    }

    #[test]
    fn eigen_grows_as_gap_shrinks() {
        let mus: Vec<f64> = [2.0, 1.5, 1.2]
            .iter()
            .map(|&ro| radial_eigen(&RadialProblem::new(1.0, ro, 4096).unwrap(), RadialEigenKind::LambdaY).unwrap())
            .collect();
        assert!(mus[0] < mus[1] && mus[1] < mus[2], "{mus:?}");
    }

    #[test]
    fn closed_forms() {
        let cf = annulus_closed_forms(1.0, 2.0).unwrap();
        assert!((cf.p11 - 2.0 * PI / 2f64.ln()).abs() < 1e-14);
        let cf = annulus_closed_forms(1.0, std::f64::consts::E).unwrap();
        assert!((cf.p11 - 2.0 * PI).abs() < 1e-12);
        assert!((cf.zeta(1.0) - 1.0).abs() < 1e-15 && cf.zeta(std::f64::consts::E).abs() < 1e-15);
        // Analytic energy of zeta by quadrature of (zeta')^2 2 pi r.
        let n = 20000;
        let dr = (cf.r_out - cf.r_in) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let r = cf.r_in + (i as f64 + 0.5) * dr;
            let dz = -1.0 / (r * (cf.r_out / cf.r_in).ln());
            s += dz * dz * 2.0 * PI * r * dr;
        }
        assert!((s - cf.p11).abs() < 1e-6);
    }
}
