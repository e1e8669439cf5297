//! Discrete rearrangements (permutations of equal-area interior values),
//! Hardy-Littlewood couplings and the local-maximizer and supporting
//! functional probes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{h_field, p_apply};
use crate::functionals::{evaluate_all, FunctionalValues};
use crate::gfunc::legendre;
use crate::grid::{inner, norm_lp, CellKind, GridDomain, ScalarField};
use crate::harmonic::HarmonicBasis;
use crate::steady::SteadyState;

/// Relative tolerance of the supporting-functional chain.
pub const CHAIN_TOL: f64 = 1e-6;
/// Relative energy tolerance of the local-maximizer probe.
pub const ENERGY_TOL: f64 = 1e-8;
/// Largest interior count handled by exhaustive enumeration.
pub const EXHAUSTIVE_MAX: usize = 8;
/// Values closer than this (relative to `max |omega_bar|`) count as tied: swapping
/// them is the identity rearrangement up to solver rounding.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RearrangementSample {
    pub w: ScalarField,
    /// `|w - omega_bar|_p`.
    pub distance_lp: f64,
    pub swap_count: usize,
    pub seed: u64,
}

fn swap_interior(w: &mut ScalarField, d: &GridDomain, i: usize, j: usize) {
    let (si, sj) = (d.interior_slot(i), d.interior_slot(j));
    let (vi, vj) = (w.get(si), w.get(sj));
    w.set(si, vj);
    w.set(sj, vi);
}

/// `k` uniformly random transpositions of interior values.
pub fn random_swaps(omega_bar: &ScalarField, k: usize, seed: u64, p: f64) -> RearrangementSample {
    let d = Arc::clone(omega_bar.domain());
    let n = d.n_interior();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = omega_bar.clone();
    if n >= 2 {
        for _ in 0..k {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            swap_interior(&mut w, &d, i, j);
        }
    }
    let distance_lp = norm_lp(&w.sub(omega_bar), p);
    RearrangementSample { w, distance_lp, swap_count: k, seed }
}

/// Random transpositions kept strictly inside the L^p ball of `radius`
/// around `omega_bar`: a swap that would leave the ball is skipped. The
/// number of requested swaps is drawn from `1..=max_swaps`.
pub fn swaps_within(omega_bar: &ScalarField, radius: f64, max_swaps: usize, seed: u64, p: f64) -> RearrangementSample {
    let d = Arc::clone(omega_bar.domain());
    let n = d.n_interior();
    let h2 = d.h() * d.h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = omega_bar.clone();
    let target = rng.gen_range(1..=max_swaps.max(1));
    // Running sum of |w - omega_bar|^p h^2 over interior nodes.
    let mut acc = 0.0;
    let limit = radius.powf(p);
    let mut done = 0;
    if n >= 2 {
        for _ in 0..20 * target {
            if done == target {
                break;
            }
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j {
                continue;
            }
            let (si, sj) = (d.interior_slot(i), d.interior_slot(j));
            let (wi, wj, oi, oj) = (w.get(si), w.get(sj), omega_bar.get(si), omega_bar.get(sj));
            let before = (wi - oi).abs().powf(p) + (wj - oj).abs().powf(p);
            let after = (wj - oi).abs().powf(p) + (wi - oj).abs().powf(p);
            let next = acc + h2 * (after - before);
            if next >= limit {
                continue;
            }
            swap_interior(&mut w, &d, i, j);
            acc = next;
            done += 1;
        }
    }
    let distance_lp = norm_lp(&w.sub(omega_bar), p);
    RearrangementSample { w, distance_lp, swap_count: done, seed }
}

/// Sorted-descending `v0` assigned to positions ranked by descending
/// `w_tilde` (ties by position). Maximizes `sum v w_tilde` over permutations.
pub fn hl_assign(v0: &[f64], w_tilde: &[f64]) -> Result<Vec<f64>> {
    if v0.len() != w_tilde.len() {
        return Err(Error::InvalidInput(format!(
            "multiset of size {} for {} cells",
            v0.len(),
            w_tilde.len()
        )));
    }
    let mut vals = v0.to_vec();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mut order: Vec<usize> = (0..w_tilde.len()).collect();
    order.sort_by(|&a, &b| w_tilde[b].total_cmp(&w_tilde[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; v0.len()];
    for (rank, &pos) in order.iter().enumerate() {
        out[pos] = vals[rank];
    }
    Ok(out)
}

/// Hardy-Littlewood coupling on the interior nodes of `w_tilde`'s grid
/// (boundary values zero).
pub fn hl_coupling(v0: &[f64], w_tilde: &ScalarField) -> Result<ScalarField> {
    let d = w_tilde.domain();
    let out = hl_assign(v0, &w_tilde.interior_values())?;
    Ok(ScalarField::from_interior(d, &out))
}

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub seed: u64,
    pub swap_count: usize,
    pub distance: f64,
    pub values: FunctionalValues,
    /// `E(w) - E(omega_bar)`.
    pub delta_e: f64,
    /// `E(w) > E(omega_bar) + tol_E`.
    pub energy_violation: bool,
    /// `EC <= Dhat <= D` broken beyond the relative tolerance.
    pub chain_violation: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub e_bar: f64,
    pub tol_e: f64,
    pub radius: f64,
    pub exhaustive: bool,
    pub energy_violations: usize,
    pub chain_violations: usize,
    pub max_delta_e: f64,
}

/// Shared data for evaluating many rearrangements of one steady state.
struct ProbeContext<'a> {
    basis: &'a HarmonicBasis,
    state: &'a SteadyState,
    lp: crate::gfunc::LegendrePair,
    /// `P omega_bar + h_a`.
    psi0: ScalarField,
    /// Absolute tie threshold.
    tie: f64,
    e_bar: f64,
    tol_e: f64,
}

impl<'a> ProbeContext<'a> {
    fn new(basis: &'a HarmonicBasis, state: &'a SteadyState) -> Result<ProbeContext<'a>> {
        let lp = legendre(&state.g)?;
        let psi0 = p_apply(basis, &state.omega_bar).add(&h_field(basis, &state.a)?);
        let base = evaluate_all(basis, &state.omega_bar, &state.a, &lp, state.m)?;
        let tie = TIE_TOL * state.omega_bar.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(ProbeContext { basis, state, lp, psi0, tie, e_bar: base.e, tol_e: ENERGY_TOL * base.e.abs() })
    }

    /// `E(w) - E(omega_bar) = 1/2 <delta, P delta> + <P omega_bar + h_a, delta>`,
    /// free of the cancellation in a plain difference.
    fn delta_e(&self, w: &ScalarField) -> f64 {
        let delta = w.sub(&self.state.omega_bar);
        if delta.values().iter().all(|v| v.abs() <= self.tie) {
            return 0.0;
        }
        0.5 * inner(&delta, &p_apply(self.basis, &delta)) + inner(&self.psi0, &delta)
    }

    fn row(&self, s: &RearrangementSample) -> Result<ProbeRow> {
        let values = evaluate_all(self.basis, &s.w, &self.state.a, &self.lp, self.state.m)?;
        let delta_e = self.delta_e(&s.w);
        let exceeds = |a: f64, b: f64| a - b > CHAIN_TOL * a.abs().max(b.abs());
        Ok(ProbeRow {
            seed: s.seed,
            swap_count: s.swap_count,
            distance: s.distance_lp,
            values,
            delta_e,
            energy_violation: delta_e > self.tol_e,
            chain_violation: exceeds(values.ec, values.d_hat) || exceeds(values.d_hat, values.d),
        })
    }

    fn report(&self, rows: Vec<ProbeRow>, radius: f64, exhaustive: bool) -> ProbeReport {
        let energy_violations = rows.iter().filter(|r| r.energy_violation).count();
        let chain_violations = rows.iter().filter(|r| r.chain_violation).count();
        let max_delta_e = rows.iter().map(|r| r.delta_e).fold(f64::NEG_INFINITY, f64::max);
        ProbeReport {
            rows,
            e_bar: self.e_bar,
            tol_e: self.tol_e,
            radius,
            exhaustive,
            energy_violations,
            chain_violations,
            max_delta_e,
        }
    }
}

/// Swap budget per sample: enough to reach the ball's edge on typical grids.
fn max_swaps(n: usize) -> usize {
    (n / 20).clamp(1, 400)
}

/// Samples rearrangements strictly within `radius` (L2) of `omega_bar` and
/// records the energy excess of each. Grids with at most
/// [`EXHAUSTIVE_MAX`] interior nodes enumerate every transposition instead.
pub fn local_max_probe(
    basis: &HarmonicBasis,
    state: &SteadyState,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if !state.certified {
        return Err(Error::InvalidInput("steady state carries no residual certificate".into()));
    }
    let ctx = ProbeContext::new(basis, state)?;
    let d = basis.domain();
    let n = d.n_interior();
    if n <= EXHAUSTIVE_MAX {
        let mut rows = vec![];
        for i in 0..n {
            for j in i + 1..n {
                let mut w = state.omega_bar.clone();
                swap_interior(&mut w, d, i, j);
                let distance_lp = norm_lp(&w.sub(&state.omega_bar), 2.0);
                let s = RearrangementSample { w, distance_lp, swap_count: 1, seed: (i * n + j) as u64 };
                rows.push(ctx.row(&s)?);
            }
        }
        return Ok(ctx.report(rows, radius, true));
    }
    let budget = max_swaps(n);
    let rows = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| ctx.row(&swaps_within(&state.omega_bar, radius, budget, seed.wrapping_add(i), 2.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ctx.report(rows, radius, false))
}

/// Checks `EC <= Dhat <= D` on random rearrangements near `omega_bar`
/// (first row: `omega_bar` itself).
pub fn supporting_probe(basis: &HarmonicBasis, state: &SteadyState, n_samples: usize, seed: u64) -> Result<ProbeReport> {
    let ctx = ProbeContext::new(basis, state)?;
    let n = basis.domain().n_interior();
    let budget = max_swaps(n);
    let mut rows = vec![ctx.row(&random_swaps(&state.omega_bar, 0, seed, 2.0))?];
    let rest = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i + 1);
            let k = 1 + (s as usize % budget);
            ctx.row(&random_swaps(&state.omega_bar, k, s, 2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.extend(rest);
    Ok(ctx.report(rows, f64::INFINITY, false))
}

/// L1 distance between the value histograms of `w1` and `w2` (interior
/// nodes weighted by cell area) on shared bins spanning both ranges.
pub fn histogram_distance(w1: &ScalarField, w2: &ScalarField, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    let (a1, b1) = w1.interior_range();
    let (a2, b2) = w2.interior_range();
    let (lo, hi) = (a1.min(a2), b1.max(b2));
    let width = hi - lo;
    let bin = |v: f64| -> usize {
        if width <= 0.0 {
            0
        } else {
            (((v - lo) / width * bins as f64) as usize).min(bins - 1)
        }
    };
    let mut c1 = vec![0i64; bins];
    let mut c2 = vec![0i64; bins];
    for v in w1.interior_values() {
        c1[bin(v)] += 1;
    }
    for v in w2.interior_values() {
        c2[bin(v)] += 1;
    }
    let h2 = w1.domain().h() * w1.domain().h();
    let h2b = w2.domain().h() * w2.domain().h();
    Ok(c1.iter().zip(&c2).map(|(x, y)| (*x as f64 * h2 - *y as f64 * h2b).abs()).sum())
}

/// 5x5 grid with a single-node hole in the middle and eight interior nodes,
/// for exhaustive checks.
pub fn tiny_domain() -> Arc<GridDomain> {
    let mut kinds = vec![CellKind::Boundary(0); 25];
    for j in 1..4 {
        for i in 1..4 {
            kinds[j * 5 + i] = CellKind::Interior;
        }
    }
    kinds[12] = CellKind::Boundary(1);
    GridDomain::from_kinds(5, 5, 0.25, (-0.5, -0.5), kinds).expect("valid tiny grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hl_example_and_brute_force() {
        let v = hl_assign(&[1.0, 2.0, 3.0], &[0.0, 5.0, 1.0]).unwrap();
        assert_eq!(v, vec![1.0, 3.0, 2.0]);
        let s: f64 = v.iter().zip([0.0, 5.0, 1.0]).map(|(a, b)| a * b).sum();
        assert_eq!(s, 17.0);
        assert_eq!(hl_assign(&[3.0, 1.0, 2.0], &[2.0, 2.0, 2.0]).unwrap(), vec![3.0, 2.0, 1.0]);
        assert!(hl_assign(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn swaps_preserve_values() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let w = ScalarField::from_fn(&d, |x, y| x * x - y);
        let s = random_swaps(&w, 50, 7, 2.0);
        let mut a = w.interior_values();
        let mut b = s.w.interior_values();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert_eq!(histogram_distance(&w, &s.w, 32).unwrap(), 0.0);
        assert_eq!(random_swaps(&w, 0, 7, 2.0).distance_lp, 0.0);
        let r = 0.05;
        let s = swaps_within(&w, r, 300, 3, 2.0);
        assert!(s.distance_lp < r && s.swap_count > 0);
    }

    #[test]
    fn histogram_disjoint_and_shift() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let a = ScalarField::constant(&d, 0.0);
        let b = ScalarField::constant(&d, 1.0);
        let area = d.area();
        assert!((histogram_distance(&a, &b, 10).unwrap() - 2.0 * area).abs() < 1e-12);
    }

    #[test]
    fn tiny_domain_shape() {
        let d = tiny_domain();
        assert_eq!(d.n_interior(), 8);
        assert_eq!(d.n_holes(), 1);
    }
}
