//! Harmonic boundary basis `zeta_i`, the Gram matrix `p` and its inverse `q`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{neg_laplacian, stiffness, GridDomain, ScalarField};
use crate::linalg::{apply_interior, cg, interior_diagonal, CondensedSolver};

#[derive(Debug)]
pub struct HarmonicBasis {
    domain: Arc<GridDomain>,
    /// `zetas[k]` is one on inner component `k + 1`.
    pub zetas: Vec<ScalarField>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// `max |Delta_h zeta_k|` over interior nodes.
    pub residuals: Vec<f64>,
    solver: Arc<CondensedSolver>,
}

impl HarmonicBasis {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Number of inner components N.
    pub fn n(&self) -> usize {
        self.zetas.len()
    }

    /// Factored operator of the condensed solve (zero shift).
    pub fn solver(&self) -> &Arc<CondensedSolver> {
        &self.solver
    }
}

/// Solves `Delta_h zeta_k = 0` with `zeta_k = 1` on inner component `k`, zero
/// elsewhere on the boundary, by Jacobi-preconditioned CG with relative
/// residual `tol`.
pub fn solve_basis(domain: &Arc<GridDomain>, tol: f64) -> Result<HarmonicBasis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let nh = domain.n_holes();
    if nh == 0 {
        return Err(Error::InvalidInput("domain has no inner boundary component".into()));
    }
    let n = domain.n_interior();
    let diag = interior_diagonal(domain, None);
    let zetas: Vec<ScalarField> = (1..=nh)
        .into_par_iter()
        .map(|k| -> Result<ScalarField> {
            let mut b = vec![0.0; n];
            for (r, br) in b.iter_mut().enumerate() {
                for l in domain.links(r) {
                    if !l.is_interior() && l.comp as usize == k {
                        *br += l.weight;
                    }
                }
            }
            let mut x = vec![0.0; n];
            cg(|u, v| apply_interior(domain, None, u, v), &diag, &b, &mut x, tol, 20 * n + 100)?;
            let mut theta = vec![0.0; nh];
            theta[k - 1] = 1.0;
            Ok(domain.field_from_parts(&x, &theta))
        })
        .collect::<Result<_>>()?;
    let residuals = zetas
        .iter()
        .map(|z| neg_laplacian(z).interior_values().iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .collect();
    let mut p = DMatrix::zeros(nh, nh);
    for i in 0..nh {
        for j in i..nh {
            let v = stiffness(&zetas[i], &zetas[j]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    let eig = p.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Singular(format!(
            "Gram matrix of the harmonic basis is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let q = p
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Gram matrix of the harmonic basis".into()))?;
    let solver = Arc::new(CondensedSolver::new(domain, None)?);
    Ok(HarmonicBasis { domain: Arc::clone(domain), zetas, p, q, residuals, solver })
}

/// Splits `u` (zero on the outer boundary, constant on each inner one) as
/// `u = sum theta_i zeta_i + v` with `theta = q (a(u, zeta_j))_j`.
pub fn x_decompose(basis: &HarmonicBasis, u: &ScalarField, tol: f64) -> Result<(Vec<f64>, ScalarField)> {
    let d = basis.domain();
    for k in 0..d.n_components() {
        let spread = u.boundary_spread(k);
        if spread > tol {
            return Err(Error::InvalidInput(format!(
                "field is not constant on boundary component {k} (spread {spread:.3e})"
            )));
        }
    }
    if u.boundary_value(0).abs() > tol {
        return Err(Error::InvalidInput(format!(
            "field does not vanish on the outer boundary (value {:.3e})",
            u.boundary_value(0)
        )));
    }
    let nh = basis.n();
    let proj: Vec<f64> = basis.zetas.iter().map(|z| stiffness(u, z)).collect();
    let theta: Vec<f64> = (0..nh).map(|i| (0..nh).map(|j| basis.q[(i, j)] * proj[j]).sum()).collect();
    let mut v = u.clone();
    for (t, z) in theta.iter().zip(&basis.zetas) {
        v = v.axpy(-t, z);
    }
    Ok((theta, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::annulus_closed_forms;

    #[test]
    fn annulus_basis_matches_closed_form() {
        let d = GridDomain::annulus(1.0, 2.0, 32).unwrap();
        let b = solve_basis(&d, 1e-10).unwrap();
        let cf = annulus_closed_forms(1.0, 2.0).unwrap();
        let z = &b.zetas[0];
        let mut err: f64 = 0.0;
        for &s in d.interior_slots() {
            let (x, y) = d.slot_xy(s as usize);
            err = err.max((z.get(s as usize) - cf.zeta(x.hypot(y))).abs());
        }
        assert!(err <= 0.01, "max node error {err}");
        assert!((b.p[(0, 0)] - cf.p11).abs() / cf.p11 <= 0.02, "p11 {}", b.p[(0, 0)]);
        assert_eq!(b.q[(0, 0)], 1.0 / b.p[(0, 0)]);
        let (lo, hi) = z.interior_range();
        assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
    }

    #[test]
    fn gram_matches_schur_complement() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let b = solve_basis(&d, 1e-12).unwrap();
        let s = b.solver().schur()[(0, 0)];
        assert!((s - b.p[(0, 0)]).abs() < 1e-8 * s);
    }

    #[test]
    fn decompose_basis_function() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let b = solve_basis(&d, 1e-10).unwrap();
        let (theta, v) = x_decompose(&b, &b.zetas[0], 1e-12).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-12);
        assert!(v.values().iter().all(|x| x.abs() < 1e-12));
        let bump = ScalarField::from_interior(&d, &vec![1.0; d.n_interior()]);
        let (theta, _) = x_decompose(&b, &bump, 1e-12).unwrap();
        let u = b.zetas[0].scale(3.0).add(&bump);
        let (theta3, _) = x_decompose(&b, &u, 1e-12).unwrap();
        assert!((theta3[0] - 3.0 - theta[0]).abs() < 1e-10);
        let bad = ScalarField::from_fn(&d, |x, _| x);
        assert!(x_decompose(&b, &bad, 1e-8).is_err());
    }
}
