//! Linear solvers: Jacobi-preconditioned CG, skyline Cholesky, and the
//! condensed solve on the space of functions that vanish on the outer
//! boundary and are constant on each inner one.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridDomain;

#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for an SPD operator.
/// Stops when `|r| <= tol * |b|`.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgStats { iterations: it, relative_residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= tol {
        return Ok(CgStats { iterations: max_iter, relative_residual: res });
    }
    Err(Error::NoConvergence { method: "conjugate gradient", iterations: max_iter, residual: res })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor stored by rows over each row's envelope.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors the SPD matrix whose lower triangle is given row by row as
    /// `(column, value)` pairs with column <= row.
    pub fn factor(rows: &[Vec<(usize, f64)>]) -> Result<SkylineCholesky> {
        let n = rows.len();
        let mut first = vec![0; n];
        let mut offset = vec![0; n + 1];
        for (i, row) in rows.iter().enumerate() {
            first[i] = row.iter().map(|e| e.0).min().unwrap_or(i).min(i);
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                debug_assert!(j <= i);
                data[offset[i] + j - first[i]] += v;
            }
        }
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offset[j]..offset[j] + (j - fj + 1)];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = (row_i[j - fi] - s) / row_j[j - fj];
            }
            let s = dot(&row_i[..i - fi], &row_i[..i - fi]);
            let pivot = row_i[i - fi] - s;
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite { row: i, pivot });
            }
            row_i[i - fi] = pivot.sqrt();
        }
        Ok(SkylineCholesky { first, offset, data })
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &x[fi..i]);
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}

/// Interior stiffness `K_II` (lower triangle, by rows) plus `h^2 * shift`
/// on the diagonal.
pub fn interior_matrix_rows(domain: &GridDomain, shift: Option<&[f64]>) -> Vec<Vec<(usize, f64)>> {
    let h2 = domain.h() * domain.h();
    (0..domain.n_interior())
        .map(|r| {
            let arms = domain.links(r);
            let mut row = Vec::with_capacity(3);
            let mut diag: f64 = arms.iter().map(|l| l.weight).sum();
            if let Some(d) = shift {
                diag += h2 * d[r];
            }
            for l in arms {
                if l.is_interior() && (l.interior as usize) < r {
                    row.push((l.interior as usize, -l.weight));
                }
            }
            row.push((r, diag));
            row
        })
        .collect()
}

/// Applies the interior stiffness (plus diagonal shift) to an interior vector.
pub fn apply_interior(domain: &GridDomain, shift: Option<&[f64]>, x: &[f64], y: &mut [f64]) {
    let h2 = domain.h() * domain.h();
    for r in 0..domain.n_interior() {
        let mut acc = 0.0;
        for l in domain.links(r) {
            acc += l.weight * x[r];
            if l.is_interior() {
                acc -= l.weight * x[l.interior as usize];
            }
        }
        if let Some(d) = shift {
            acc += h2 * d[r] * x[r];
        }
        y[r] = acc;
    }
}

pub fn interior_diagonal(domain: &GridDomain, shift: Option<&[f64]>) -> Vec<f64> {
    let h2 = domain.h() * domain.h();
    (0..domain.n_interior())
        .map(|r| {
            let w: f64 = domain.links(r).iter().map(|l| l.weight).sum();
            w + shift.map_or(0.0, |d| h2 * d[r])
        })
        .collect()
}

/// Direct solver for
///
/// ```text
/// [ K_II + h^2 diag(d)   K_IB ] [x]   [r_I]
/// [ K_BI                 K_BB ] [t] = [r_B]
/// ```
///
/// where `t` holds the constant values on the inner components. The second
/// block row is the discrete flux through each inner component.
#[derive(Debug)]
pub struct CondensedSolver {
    domain: Arc<GridDomain>,
    chol: SkylineCholesky,
    /// Sparse columns of `K_IB`.
    kib: Vec<Vec<(usize, f64)>>,
    /// Columns of `(K_II + h^2 diag d)^{-1} K_IB`.
    w: Vec<Vec<f64>>,
    schur: DMatrix<f64>,
    schur_inv: DMatrix<f64>,
}

impl CondensedSolver {
    pub fn new(domain: &Arc<GridDomain>, shift: Option<&[f64]>) -> Result<CondensedSolver> {
        if let Some(d) = shift {
            if d.len() != domain.n_interior() {
                return Err(Error::InvalidInput("shift length does not match interior".into()));
            }
        }
        let chol = SkylineCholesky::factor(&interior_matrix_rows(domain, shift))?;
        let nh = domain.n_holes();
        let mut kib = vec![vec![]; nh];
        let mut kbb = vec![0.0; nh];
        for r in 0..domain.n_interior() {
            for l in domain.links(r) {
                if !l.is_interior() && l.comp > 0 {
                    let k = l.comp as usize - 1;
                    kbb[k] += l.weight;
                    match kib[k].last_mut() {
                        Some((rr, v)) if *rr == r => *v -= l.weight,
                        _ => kib[k].push((r, -l.weight)),
                    }
                }
            }
        }
        let n = domain.n_interior();
        let w: Vec<Vec<f64>> = kib
            .iter()
            .map(|col| {
                let mut x = vec![0.0; n];
                for &(r, v) in col {
                    x[r] = v;
                }
                chol.solve_in_place(&mut x);
                x
            })
            .collect();
        let mut schur = DMatrix::zeros(nh, nh);
        for k in 0..nh {
            for l in 0..nh {
                let s: f64 = kib[k].iter().map(|&(r, v)| v * w[l][r]).sum();
                schur[(k, l)] = if k == l { kbb[k] - s } else { -s };
            }
        }
        // Symmetrize the rounding.
        let schur = (&schur + schur.transpose()) * 0.5;
        let schur_inv = if nh == 0 {
            schur.clone()
        } else {
            schur
                .clone()
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Singular("boundary Schur complement".into()))?
        };
        Ok(CondensedSolver { domain: Arc::clone(domain), chol, kib, w, schur, schur_inv })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// The boundary Schur complement; with zero shift this is the Gram matrix
    /// of the harmonic basis.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    /// Interior part of the discrete harmonic function equal to 1 on inner
    /// component `k + 1` (valid for zero shift).
    pub fn harmonic_column(&self, k: usize) -> Vec<f64> {
        self.w[k].iter().map(|v| -v).collect()
    }

    /// Solves the block system, returning `(x, t)`.
    pub fn solve(&self, r_int: &[f64], r_bnd: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nh = self.kib.len();
        let mut y = r_int.to_vec();
        self.chol.solve_in_place(&mut y);
        if nh == 0 {
            return (y, vec![]);
        }
        let rhs: Vec<f64> = (0..nh)
            .map(|k| r_bnd[k] - self.kib[k].iter().map(|&(r, v)| v * y[r]).sum::<f64>())
            .collect();
        let theta: Vec<f64> = (0..nh)
            .map(|k| (0..nh).map(|l| self.schur_inv[(k, l)] * rhs[l]).sum())
            .collect();
        for (k, t) in theta.iter().enumerate() {
            for (yr, wr) in y.iter_mut().zip(&self.w[k]) {
                *yr -= wr * t;
            }
        }
        (y, theta)
    }

    /// Solves with only an interior right-hand side.
    pub fn solve_interior(&self, r_int: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.solve(r_int, &vec![0.0; self.kib.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_check(rows: &[Vec<(usize, f64)>], chol: &SkylineCholesky, b: &[f64]) -> f64 {
        let n = rows.len();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                a[i][j] += v;
                if i != j {
                    a[j][i] += v;
                }
            }
        }
        let mut x = b.to_vec();
        chol.solve_in_place(&mut x);
        (0..n)
            .map(|i| ((0..n).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn skyline_solves_tridiagonal_and_arrow() {
        let n = 30;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i > 5 {
                    r.push((0, 0.1));
                }
                r.push((i, 4.0));
                r
            })
            .collect();
        let chol = SkylineCholesky::factor(&rows).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        assert!(dense_check(&rows, &chol, &b) < 1e-13);
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let rows = vec![vec![(0, 1.0)], vec![(0, 2.0), (1, 1.0)]];
        assert!(matches!(SkylineCholesky::factor(&rows), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cg_matches_cholesky() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let n = d.n_interior();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let diag = interior_diagonal(&d, None);
        let mut x = vec![0.0; n];
        cg(|u, v| apply_interior(&d, None, u, v), &diag, &b, &mut x, 1e-12, 10 * n).unwrap();
        let chol = SkylineCholesky::factor(&interior_matrix_rows(&d, None)).unwrap();
        let mut y = b.clone();
        chol.solve_in_place(&mut y);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * scale, "err {err}");
    }
}
