//! The acceptance suite behind `verify-all`.

use std::sync::Arc;

use arnold_stab_core::dynamics::{perturb, run, stability_experiment, PerturbMode, PerturbSpec, SimConfig};
use arnold_stab_core::field::{circulation_recovered, p_apply, stream_solve, velocity};
use arnold_stab_core::functionals::young_gap;
use arnold_stab_core::gfunc::legendre;
use arnold_stab_core::grid::{boundary_flux, inner, max_abs_interior, neg_laplacian, norm_lp};
use arnold_stab_core::harmonic::{solve_basis, HarmonicBasis};
use arnold_stab_core::oracle::{annulus_closed_forms, radial_eigen, radial_stream, RadialEigenKind, RadialProblem};
use arnold_stab_core::rearrange::{hl_assign, local_max_probe, supporting_probe, tiny_domain, ProbeReport};
use arnold_stab_core::spectra::{check_stability, lambda_big, lambda_c, lambda_plain, weak_pos_def};
use arnold_stab_core::steady::{steady_linear, SteadyState};
use arnold_stab_core::{CirculationVector, GridDomain, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliResult;
use crate::output::{fmt, Table};

/// Tolerance of the eigen solves inside the suite.
const TOL: f64 = 1e-10;
/// Points of the radial oracles.
const ORACLE_N: usize = 4096;

#[derive(Clone, Debug)]
pub struct VerifyOpts {
    pub r_in: f64,
    pub r_out: f64,
    /// Reference resolution (cells per unit length).
    pub res: usize,
    pub seed: u64,
    pub quick: bool,
}

impl Default for VerifyOpts {
    fn default() -> VerifyOpts {
        VerifyOpts { r_in: 1.0, r_out: 2.0, res: 32, seed: 42, quick: false }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub label: String,
    pub value: f64,
    /// Human-readable condition, e.g. `<= 1e-2`.
    pub limit: String,
    pub pass: bool,
}

fn at_most(label: &str, value: f64, bound: f64) -> Check {
    Check { label: label.into(), value, limit: format!("<= {bound:e}"), pass: value <= bound }
}

fn at_least(label: &str, value: f64, bound: f64) -> Check {
    Check { label: label.into(), value, limit: format!(">= {bound:e}"), pass: value >= bound }
}

fn holds(label: &str, value: f64, pass: bool, limit: &str) -> Check {
    Check { label: label.into(), value, limit: limit.into(), pass }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Detail tables written next to the summary, as `(file name, table)`.
    pub tables: Vec<(String, Table)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// One line: id, verdict, name and every check.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{} = {:.3e} ({}{})", c.label, c.value, c.limit, if c.pass { "" } else { ", FAILED" }))
            .collect();
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            parts.join("; ")
        )
    }
}

pub const NAMES: [&str; 11] = [
    "harmonic basis",
    "operator identities",
    "stream solve",
    "spectra",
    "criterion logic",
    "functional chain",
    "local-maximizer probe",
    "Hardy-Littlewood coupling",
    "dynamics conservation",
    "stability experiment",
    "determinism",
];

fn annulus(r_in: f64, r_out: f64, res: usize) -> CliResult<(Arc<GridDomain>, HarmonicBasis)> {
    let d = GridDomain::annulus(r_in, r_out, res)?;
    let b = solve_basis(&d, 1e-12)?;
    Ok((d, b))
}

/// Linear steady state `g(s) = frac * lambda_h * s` with unit circulations.
fn reference_state(b: &HarmonicBasis, frac: f64) -> CliResult<(f64, SteadyState)> {
    let lam = lambda_plain(b, TOL)?.value;
    let a = CirculationVector::new(vec![1.0; b.domain().n_holes()]);
    Ok((lam, steady_linear(b, frac * lam, &a, 1e-8)?))
}

fn zeta_error(d: &GridDomain, b: &HarmonicBasis, o: &VerifyOpts) -> CliResult<f64> {
    let cf = annulus_closed_forms(o.r_in, o.r_out)?;
    Ok(d.interior_slots()
        .iter()
        .map(|&s| {
            let (x, y) = d.slot_xy(s as usize);
            (b.zetas[0].get(s as usize) - cf.zeta(x.hypot(y))).abs()
        })
        .fold(0.0, f64::max))
}

pub fn criterion_1(o: &VerifyOpts) -> CliResult<Outcome> {
    let cf = annulus_closed_forms(o.r_in, o.r_out)?;
    let mut t = Table::new(&["res", "h", "zeta_max_error", "p11", "p11_exact", "p11_rel_error"]);
    let mut errs = vec![];
    let mut p11 = vec![];
    // The refinement pair straddles the reference grid: res and 2 res.
    let levels = if o.quick { [o.res / 2, o.res] } else { [o.res, 2 * o.res] };
    for res in levels {
        let (d, b) = annulus(o.r_in, o.r_out, res)?;
        let e = zeta_error(&d, &b, o)?;
        let p = b.p[(0, 0)];
        t.push(vec![res.to_string(), fmt(d.h()), fmt(e), fmt(p), fmt(cf.p11), fmt((p - cf.p11).abs() / cf.p11)]);
        errs.push(e);
        p11.push(p);
    }
    let r = if o.quick { 1 } else { 0 };
    Ok(Outcome {
        id: 1,
        name: NAMES[0],
        checks: vec![
            at_most("zeta max node error", errs[r], 0.01),
            at_most("p11 relative error", (p11[r] - cf.p11).abs() / cf.p11, 0.02),
            at_least("error ratio on halving h", errs[0] / errs[1], 3.0),
        ],
        tables: vec![("c01_harmonic.csv".into(), t)],
    })
}

fn random_field(d: &Arc<GridDomain>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    let v: Vec<f64> = (0..d.n_interior()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::from_interior(d, &v)
}

pub fn criterion_2(o: &VerifyOpts) -> CliResult<Outcome> {
    let (d, b) = annulus(o.r_in, o.r_out, o.res)?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut sym: f64 = 0.0;
    let mut pos = f64::INFINITY;
    let mut lap: f64 = 0.0;
    let mut t = Table::new(&["sample", "symmetry_defect", "quadratic_form", "laplacian_residual"]);
    for i in 0..20 {
        // Positive samples keep <phi, P psi> away from zero.
        let phi = random_field(&d, &mut rng, 0.0, 1.0);
        let psi = random_field(&d, &mut rng, 0.0, 1.0);
        let (pphi, ppsi) = (p_apply(&b, &phi), p_apply(&b, &psi));
        let lhs = inner(&phi, &ppsi);
        let defect = (lhs - inner(&pphi, &psi)).abs() / lhs.abs();
        let chi = random_field(&d, &mut rng, -1.0, 1.0);
        let pchi = p_apply(&b, &chi);
        let q = inner(&chi, &pchi);
        let res = max_abs_interior(&neg_laplacian(&pchi).sub(&chi)) / max_abs_interior(&chi);
        t.push(vec![i.to_string(), fmt(defect), fmt(q), fmt(res)]);
        sym = sym.max(defect);
        pos = pos.min(q);
        lap = lap.max(res);
    }
    // Flux of P phi for a fixed smooth phi on three grids, against C h with
    // C = int |phi|.
    let mut ft = Table::new(&["res", "h", "flux", "bound"]);
    let mut worst: f64 = 0.0;
    for res in [o.res / 2, o.res, 2 * o.res] {
        let (dd, bb) = annulus(o.r_in, o.r_out, res)?;
        let phi = ScalarField::from_fn(&dd, |x, y| 1.0 + (3.0 * x).sin() * (2.0 * y).cos());
        let flux = boundary_flux(&p_apply(&bb, &phi), 1)?;
        let c = norm_lp(&phi, 1.0);
        ft.push(vec![res.to_string(), fmt(dd.h()), fmt(flux), fmt(c * dd.h())]);
        worst = worst.max(flux.abs() / (c * dd.h()));
    }
    Ok(Outcome {
        id: 2,
        name: NAMES[1],
        checks: vec![
            at_most("P symmetry defect (relative)", sym, 1e-8),
            holds("min <phi, P phi>", pos, pos > 0.0, "> 0"),
            at_most("|-Delta_h P phi - phi|_inf", lap, 1e-8),
            at_most("flux(P phi) / (C h)", worst, 1.0),
        ],
        tables: vec![("c02_identities.csv".into(), t), ("c02_flux.csv".into(), ft)],
    })
}

pub fn criterion_3(o: &VerifyOpts) -> CliResult<Outcome> {
    let (d, b) = annulus(o.r_in, o.r_out, o.res)?;
    let rp = RadialProblem::new(o.r_in, o.r_out, ORACLE_N)?;
    type Case = (&'static str, fn(f64) -> f64, f64);
    let cases: [Case; 3] = [("uniform", |_| 1.0, 1.0), ("r_squared", |r| r * r, 0.5), ("irrotational", |_| 0.0, 6.0)];
    let mut t = Table::new(&["case", "a", "psi_rel_error", "circulation", "circulation_rel_error"]);
    let (mut psi_err, mut circ_err): (f64, f64) = (0.0, 0.0);
    for (name, w, a) in cases {
        let omega = ScalarField::from_fn(&d, |x, y| w(x.hypot(y)));
        let sol = stream_solve(&b, &omega, &CirculationVector::new(vec![a]))?;
        let prof = radial_stream(&rp, &w, None, a)?;
        let e = d
            .interior_slots()
            .iter()
            .map(|&s| {
                let (x, y) = d.slot_xy(s as usize);
                (sol.psi.get(s as usize) - prof.eval(x.hypot(y))).abs()
            })
            .fold(0.0, f64::max)
            / prof.max_abs();
        let c = circulation_recovered(&velocity(&sol.psi), &omega, 1)?;
        let ce = (c - a).abs() / a.abs();
        t.push(vec![name.into(), fmt(a), fmt(e), fmt(c), fmt(ce)]);
        psi_err = psi_err.max(e);
        circ_err = circ_err.max(ce);
    }
    Ok(Outcome {
        id: 3,
        name: NAMES[2],
        checks: vec![at_most("psi vs radial oracle (relative)", psi_err, 0.01), at_most("circulation relative error", circ_err, 0.02)],
        tables: vec![("c03_stream.csv".into(), t)],
    })
}

pub fn criterion_4(o: &VerifyOpts) -> CliResult<Outcome> {
    let (d, b) = annulus(o.r_in, o.r_out, o.res)?;
    let rp = RadialProblem::new(o.r_in, o.r_out, ORACLE_N)?;
    let exact = radial_eigen(&rp, RadialEigenKind::LambdaY)?;
    let lam = lambda_plain(&b, TOL)?;
    let big = lambda_big(&b, TOL)?;
    let c = ScalarField::from_fn(&d, |x, y| 0.5 * x.sin() * y);
    let gamma = 0.7;
    let lc = lambda_c(&b, &c, TOL)?;
    let lcg = lambda_c(&b, &c.map(|v| v + gamma), TOL)?;
    let shift = (lcg.value - lc.value - gamma).abs();
    let el = |r: &arnold_stab_core::spectra::SpectralResult| {
        let flux = r.flux_diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (r.residual / r.value.abs()).max(flux)
    };
    let el_res = el(&lam).max(el(&lc)).max(el(&lcg));
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("lambda_h", lam.value),
        ("lambda_radial_oracle", exact),
        ("Lambda_h", big.value),
        ("lambda_Lambda_minus_1", lam.value * big.value - 1.0),
        ("lambda_c", lc.value),
        ("lambda_c_plus_gamma", lcg.value),
        ("gamma", gamma),
        ("euler_lagrange_residual", el_res),
    ] {
        t.push(vec![k.into(), fmt(v)]);
    }
    Ok(Outcome {
        id: 4,
        name: NAMES[3],
        checks: vec![
            at_most("lambda vs radial oracle (relative)", (lam.value - exact).abs() / exact, 0.01),
            at_most("|lambda Lambda - 1|", (lam.value * big.value - 1.0).abs(), 1e-8),
            at_most("shift identity defect", shift, 1e-8),
            at_most("Euler-Lagrange residual", el_res, 1e-6),
        ],
        tables: vec![("c04_spectra.csv".into(), t)],
    })
}

pub fn criterion_5(o: &VerifyOpts) -> CliResult<Outcome> {
    let (_, b) = annulus(o.r_in, o.r_out, o.res)?;
    let (lam, stable) = reference_state(&b, 0.5)?;
    let (_, unstable) = reference_state(&b, 1.5)?;
    let rs = check_stability(&b, &stable, TOL)?;
    let ru = check_stability(&b, &unstable, TOL)?;
    let delta0 = weak_pos_def(&b, &stable, TOL)?.unwrap_or(f64::NAN);
    let bound = lam - 0.5 * lam - 1e-6;
    let mut t = Table::new(&["kappa_over_lambda", "lambda_h", "mu_min", "delta0", "min_gp", "max_gp", "satisfied"]);
    for (f, r) in [(0.5, &rs), (1.5, &ru)] {
        t.push(vec![
            fmt(f),
            fmt(r.lambda_h),
            fmt(r.mu_min),
            r.delta0.map_or("none".into(), fmt),
            fmt(r.min_gp),
            fmt(r.max_gp),
            r.satisfied().to_string(),
        ]);
    }
    Ok(Outcome {
        id: 5,
        name: NAMES[4],
        checks: vec![
            holds("satisfied at 0.5 lambda_h", rs.mu_min, rs.satisfied(), "satisfied"),
            holds("violated at 1.5 lambda_h", ru.mu_min, !ru.satisfied(), "violated"),
            at_least("delta0", delta0, bound),
        ],
        tables: vec![("c05_criterion.csv".into(), t)],
    })
}

pub fn criterion_6(o: &VerifyOpts) -> CliResult<Outcome> {
    let (_, b) = annulus(o.r_in, o.r_out, o.res)?;
    let (_, state) = reference_state(&b, 0.5)?;
    let lp = legendre(&state.g)?;
    // Sample well past the ranges of omega_bar and psi_bar.
    let (wlo, whi) = state.omega_bar.interior_range();
    let (slo, shi) = (state.m_lo, state.m_hi);
    let (ws, ss) = (whi - wlo, shi - slo);
    let mut min_gap = f64::INFINITY;
    for i in 0..100 {
        let s = wlo - ws + 3.0 * ws * i as f64 / 99.0;
        for j in 0..100 {
            let tau = slo - ss + 3.0 * ss * j as f64 / 99.0;
            min_gap = min_gap.min(young_gap(&lp, s, tau)?);
        }
    }
    let rep = supporting_probe(&b, &state, 100, o.seed)?;
    let base = &rep.rows[0].values;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
    let eq = rel(base.ec, base.d_hat).max(rel(base.d_hat, base.d));
    Ok(Outcome {
        id: 6,
        name: NAMES[5],
        checks: vec![
            at_least("min Young gap", min_gap, -1e-8),
            at_most("chain violations", rep.chain_violations as f64, 0.0),
            at_most("EC, Dhat, D spread at omega_bar", eq, 1e-6),
            at_most("|mu(omega_bar)|", base.mu.abs(), 1e-6),
        ],
        tables: vec![("c06_chain.csv".into(), probe_table(&rep))],
    })
}

pub fn probe_table(rep: &ProbeReport) -> Table {
    let mut t = Table::new(&[
        "seed", "swap_count", "distance", "E", "EC", "D_hat", "D", "mu", "mu_residual", "delta_E", "energy_violation", "chain_violation",
    ]);
    for r in &rep.rows {
        let v = &r.values;
        t.push(vec![
            r.seed.to_string(),
            r.swap_count.to_string(),
            fmt(r.distance),
            fmt(v.e),
            fmt(v.ec),
            fmt(v.d_hat),
            fmt(v.d),
            fmt(v.mu),
            fmt(v.mu_residual),
            fmt(r.delta_e),
            r.energy_violation.to_string(),
            r.chain_violation.to_string(),
        ]);
    }
    t
}

fn probe_reference(o: &VerifyOpts, samples: usize) -> CliResult<ProbeReport> {
    let (_, b) = annulus(o.r_in, o.r_out, o.res)?;
    let (_, state) = reference_state(&b, 0.5)?;
    let radius = 0.1 * norm_lp(&state.omega_bar, 2.0);
    Ok(local_max_probe(&b, &state, radius, samples, o.seed)?)
}

pub fn criterion_7(o: &VerifyOpts) -> CliResult<Outcome> {
    let rep = probe_reference(o, if o.quick { 50 } else { 200 })?;
    let tiny = tiny_domain();
    let tb = solve_basis(&tiny, 1e-12)?;
    let (_, tstate) = reference_state(&tb, 0.5)?;
    let trep = local_max_probe(&tb, &tstate, f64::INFINITY, 0, o.seed)?;
    Ok(Outcome {
        id: 7,
        name: NAMES[6],
        checks: vec![
            at_most("energy violations", rep.energy_violations as f64, 0.0),
            holds("exhaustive mode on tiny grid", trep.rows.len() as f64, trep.exhaustive, "exhaustive"),
            at_most("tiny-grid max Delta E", trep.max_delta_e, 0.0),
        ],
        tables: vec![("c07_probe.csv".into(), probe_table(&rep)), ("c07_tiny.csv".into(), probe_table(&trep))],
    })
}

/// Every permutation of `v` (Heap's algorithm).
fn permutations(v: &mut [f64], f: &mut impl FnMut(&[f64])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    f(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            f(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn multisets(alphabet: &[f64], n: usize) -> Vec<Vec<f64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for (i, a) in alphabet.iter().enumerate() {
        for mut rest in multisets(&alphabet[i..], n - 1) {
            rest.insert(0, *a);
            out.push(rest);
        }
    }
    out
}

pub fn criterion_8(o: &VerifyOpts) -> CliResult<Outcome> {
    // Small integers make every sum exact, so "equal" means bitwise equal.
    let alphabet = [-2.0, 0.0, 1.0, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut t = Table::new(&["size", "multisets", "targets", "mismatches"]);
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for n in 1..=8 {
        let n_targets = if o.quick { 1 } else { 3 };
        let sets = multisets(&alphabet, n);
        let mut bad = 0;
        for _ in 0..n_targets {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-2..4) as f64).collect();
            for ms in &sets {
                let hl = hl_assign(ms, &w)?;
                let hl_sum: f64 = hl.iter().zip(&w).map(|(a, b)| a * b).sum();
                let mut best = f64::NEG_INFINITY;
                permutations(&mut ms.clone(), &mut |p| {
                    best = best.max(p.iter().zip(&w).map(|(a, b)| a * b).sum());
                });
                if hl_sum != best {
                    bad += 1;
                }
                total += 1;
            }
        }
        t.push(vec![n.to_string(), sets.len().to_string(), n_targets.to_string(), bad.to_string()]);
        mismatches += bad;
    }
    Ok(Outcome {
        id: 8,
        name: NAMES[7],
        checks: vec![holds("mismatches over all cases", mismatches as f64, mismatches == 0 && total > 0, "== 0")],
        tables: vec![("c08_coupling.csv".into(), t)],
    })
}

pub fn series_table(series: &arnold_stab_core::dynamics::DiagnosticsSeries) -> Table {
    let n = series.rows.first().map_or(0, |r| r.circulations.len());
    let mut header = vec!["t".to_string(), "energy".into()];
    header.extend((1..=n).map(|k| format!("circulation_{k}")));
    header.extend(["distance", "histogram", "kinetic", "ec", "omega_min", "omega_max"].map(String::from));
    let mut t = Table { header, rows: vec![] };
    for r in &series.rows {
        let mut row = vec![fmt(r.t), fmt(r.energy)];
        row.extend(r.circulations.iter().map(|c| fmt(*c)));
        row.extend([r.distance, r.histogram, r.kinetic, r.ec, r.omega_min, r.omega_max].map(fmt));
        t.push(row);
    }
    t
}

pub fn criterion_9(o: &VerifyOpts) -> CliResult<Outcome> {
    // h = 1/64 at the default reference res of 32; quick mode shortens the horizon.
    let (_, b) = annulus(o.r_in, o.r_out, 2 * o.res)?;
    let (_, state) = reference_state(&b, 0.5)?;
    let lp = legendre(&state.g)?;
    let amp = 0.01 * norm_lp(&state.omega_bar, 2.0);
    let spec = PerturbSpec { mode: PerturbMode::Bump, amplitude: amp, seed: o.seed, b: None };
    let (omega0, bv) = perturb(&state, &spec)?;
    let cfg = SimConfig { turnovers: if o.quick { 2.0 } else { 10.0 }, ..SimConfig::default() };
    let (series, _) = run(&b, &omega0, &bv, &cfg, &state.omega_bar, Some(&lp))?;
    Ok(Outcome {
        id: 9,
        name: NAMES[8],
        checks: vec![
            at_most("energy drift", series.energy_drift(), 0.02),
            at_most("circulation drift", series.circulation_drift(), 1e-3),
            at_most("histogram drift / mass", series.histogram_drift(), 0.02),
        ],
        tables: vec![("c09_series.csv".into(), series_table(&series))],
    })
}

pub fn criterion_10(o: &VerifyOpts) -> CliResult<Outcome> {
    let res = if o.quick { o.res / 2 } else { o.res };
    let (_, b) = annulus(o.r_in, o.r_out, res)?;
    let (_, state) = reference_state(&b, 0.5)?;
    let delta = 0.01 * norm_lp(&state.omega_bar, 2.0);
    let cfg = SimConfig::default();
    let mut t = Table::new(&[
        "mode", "amplitude", "b_shift", "initial_distance", "sup_distance", "ratio", "relative_sup", "energy_drift", "steps",
    ]);
    let mut worst: f64 = 0.0;
    let mut floor = f64::NAN;
    for mode in [PerturbMode::Swap, PerturbMode::Bump] {
        for shift in [0.0, 0.01] {
            let bv = CirculationVector::new(state.a.0.iter().map(|v| v + shift).collect());
            let template = PerturbSpec { mode, amplitude: 0.0, seed: o.seed, b: Some(bv) };
            // The zero-amplitude control runs once, unperturbed in b.
            let amps: Vec<f64> = if mode == PerturbMode::Swap && shift == 0.0 { vec![0.0, delta] } else { vec![delta] };
            let rep = stability_experiment(&b, &state, &amps, &template, &cfg)?;
            for r in &rep.rows {
                t.push(vec![
                    format!("{:?}", r.mode).to_lowercase(),
                    fmt(r.amplitude),
                    fmt(r.b_shift),
                    fmt(r.initial_distance),
                    fmt(r.sup_distance),
                    fmt(r.ratio),
                    fmt(r.relative_sup),
                    fmt(r.energy_drift),
                    r.steps.to_string(),
                ]);
                if r.amplitude == 0.0 {
                    floor = r.relative_sup;
                } else {
                    worst = worst.max(r.ratio);
                }
            }
        }
    }
    Ok(Outcome {
        id: 10,
        name: NAMES[9],
        checks: vec![at_most("max sup ratio", worst, 3.0), at_most("zero-amplitude floor", floor, 1e-3)],
        tables: vec![("c10_experiment.csv".into(), t)],
    })
}

/// Recomputes a probe and a short simulation twice and compares the CSV
/// bytes. The cross-process check lives in the integration tests.
pub fn criterion_11(o: &VerifyOpts) -> CliResult<Outcome> {
    let small = VerifyOpts { res: (o.res / 2).max(16), ..o.clone() };
    let once = || -> CliResult<Vec<u8>> {
        let mut bytes = probe_table(&probe_reference(&small, 40)?).to_bytes()?;
        let (_, b) = annulus(small.r_in, small.r_out, small.res)?;
        let (_, state) = reference_state(&b, 0.5)?;
        let spec = PerturbSpec { mode: PerturbMode::Swap, amplitude: 0.01 * norm_lp(&state.omega_bar, 2.0), seed: o.seed, b: None };
        let (omega0, bv) = perturb(&state, &spec)?;
        let cfg = SimConfig { turnovers: 1.0, ..SimConfig::default() };
        let (series, _) = run(&b, &omega0, &bv, &cfg, &state.omega_bar, None)?;
        bytes.extend(series_table(&series).to_bytes()?);
        Ok(bytes)
    };
    let (x, y) = (once()?, once()?);
    let differing = x.iter().zip(&y).filter(|(a, b)| a != b).count() + x.len().abs_diff(y.len());
    Ok(Outcome {
        id: 11,
        name: NAMES[10],
        checks: vec![holds("differing bytes between repeated runs", differing as f64, differing == 0, "== 0")],
        tables: vec![],
    })
}

pub fn criterion(id: u8, o: &VerifyOpts) -> CliResult<Outcome> {
    match id {
        1 => criterion_1(o),
        2 => criterion_2(o),
        3 => criterion_3(o),
        4 => criterion_4(o),
        5 => criterion_5(o),
        6 => criterion_6(o),
        7 => criterion_7(o),
        8 => criterion_8(o),
        9 => criterion_9(o),
        10 => criterion_10(o),
        11 => criterion_11(o),
        _ => Err(crate::error::CliError::Config(format!("no criterion {id}"))),
    }
}

pub fn summary_table(outcomes: &[Outcome]) -> Table {
    let mut t = Table::new(&["criterion", "name", "check", "value", "limit", "pass"]);
    for o in outcomes {
        for c in &o.checks {
            t.push(vec![o.id.to_string(), o.name.into(), c.label.clone(), fmt(c.value), c.limit.clone(), c.pass.to_string()]);
        }
    }
    t
}
