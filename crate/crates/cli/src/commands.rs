//! Subcommand pipelines. Each writes its outputs into the run directory and
//! returns their file names.

use std::path::PathBuf;
use std::sync::Arc;

use arnold_stab_core::dynamics::{perturb, run, PerturbSpec, SimConfig};
use arnold_stab_core::field::{circulation_recovered, kinetic_energy, max_divergence, stream_solve, velocity};
use arnold_stab_core::functionals::{casimir, evaluate_all};
use arnold_stab_core::gfunc::{legendre, GFunc};
use arnold_stab_core::grid::norm_lp;
use arnold_stab_core::harmonic::{solve_basis, HarmonicBasis};
use arnold_stab_core::io::{load_field, load_mask, save_field};
use arnold_stab_core::oracle::{annulus_closed_forms, radial_eigen, RadialEigenKind, RadialProblem};
use arnold_stab_core::rearrange::local_max_probe;
use arnold_stab_core::spectra::{check_stability, dirichlet_ground, lambda_big, lambda_plain, TOL_EIG};
use arnold_stab_core::steady::{steady_linear, steady_picard, SteadyState};
use arnold_stab_core::{CirculationVector, GridDomain, ScalarField};

use crate::config::{DomainSpec, GSpec, Kappa, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt, svg_plot, Curve, Table};
use crate::verify::{self, probe_table, series_table, VerifyOpts};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Gen,
    Harmonic,
    Stream,
    Functional,
    Spectra,
    Steady,
    Probe,
    Simulate,
    Oracle,
    Report,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Harmonic => "harmonic",
            Command::Stream => "stream",
            Command::Functional => "functional",
            Command::Spectra => "spectra",
            Command::Steady => "steady",
            Command::Probe => "probe",
            Command::Simulate => "simulate",
            Command::Oracle => "oracle",
            Command::Report => "report",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Lazily built domain, basis and steady state shared by a pipeline.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    domain: Option<Arc<GridDomain>>,
    basis: Option<HarmonicBasis>,
    lambda: Option<f64>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig) -> Ctx<'a> {
        Ctx { cfg, domain: None, basis: None, lambda: None }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    pub fn domain(&mut self) -> CliResult<Arc<GridDomain>> {
        if self.domain.is_none() {
            let d = match &self.cfg.domain {
                DomainSpec::Annulus { r_in, r_out, res } => GridDomain::annulus(*r_in, *r_out, *res)?,
                DomainSpec::Mask { path, h, origin } => {
                    let mask = load_mask(path).map_err(|e| CliError::Config(format!("mask {}: {e}", path.display())))?;
                    mask.to_domain(*h, *origin)?
                }
            };
            self.domain = Some(d);
        }
        Ok(Arc::clone(self.domain.as_ref().unwrap()))
    }

    pub fn basis(&mut self) -> CliResult<&HarmonicBasis> {
        if self.basis.is_none() {
            let d = self.domain()?;
            self.basis = Some(solve_basis(&d, 1e-12)?);
        }
        Ok(self.basis.as_ref().unwrap())
    }

    pub fn lambda(&mut self) -> CliResult<f64> {
        if self.lambda.is_none() {
            let tol = self.cfg.tol;
            let l = lambda_plain(self.basis()?, tol)?.value;
            self.lambda = Some(l);
        }
        Ok(self.lambda.unwrap())
    }

    pub fn a(&mut self) -> CliResult<CirculationVector> {
        let n = self.domain()?.n_holes();
        let a = if self.cfg.a.is_empty() { vec![1.0; n] } else { self.cfg.a.clone() };
        if a.len() != n {
            return Err(CliError::Config(format!("a has {} entries, the domain has {n} holes", a.len())));
        }
        Ok(CirculationVector::new(a))
    }

    fn kappa(&mut self, k: Kappa) -> CliResult<f64> {
        Ok(match k {
            Kappa::Abs(v) => v,
            Kappa::Rel(f) => f * self.lambda()?,
        })
    }

    pub fn g(&mut self) -> CliResult<GFunc> {
        Ok(match self.cfg.g.clone() {
            GSpec::Linear(k) => GFunc::linear(self.kappa(k)?),
            GSpec::Affine(k, c) => GFunc::affine(self.kappa(k)?, c),
            GSpec::Constant(c) => GFunc::constant(c),
            GSpec::Table(s, g) => GFunc::tabulated(s, g)?,
        })
    }

    pub fn steady(&mut self) -> CliResult<SteadyState> {
        let a = self.a()?;
        let g = self.g()?;
        let cfg = self.cfg;
        let b = self.basis()?;
        Ok(match (&cfg.g, &g) {
            (GSpec::Linear(_), GFunc::Linear { kappa }) => steady_linear(b, *kappa, &a, cfg.tol)?,
            _ => steady_picard(b, &g, &a, None, cfg.max_iter, cfg.tol, cfg.beta)?,
        })
    }

    fn certified_steady(&mut self) -> CliResult<SteadyState> {
        let s = self.steady()?;
        if !s.certified {
            return Err(CliError::Solver(arnold_stab_core::Error::NoConvergence {
                method: "steady-state solve",
                iterations: s.iterations,
                residual: s.residual_pde,
            }));
        }
        Ok(s)
    }

    /// Vorticity from `omega = <file>`, else `default`.
    fn omega_or(&mut self, default: impl FnOnce(&mut Self) -> CliResult<ScalarField>) -> CliResult<ScalarField> {
        match self.cfg.omega.clone() {
            Some(p) => {
                let d = self.domain()?;
                let file = load_field(&p).map_err(|e| CliError::Config(format!("field {}: {e}", p.display())))?;
                Ok(file.into_field(Some(&d))?)
            }
            None => default(self),
        }
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> CliResult<Vec<String>> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
    let mut ctx = Ctx::new(cfg);
    match cmd {
        Command::Gen => gen(&mut ctx),
        Command::Harmonic => harmonic(&mut ctx),
        Command::Stream => stream(&mut ctx),
        Command::Functional => functional(&mut ctx),
        Command::Spectra => spectra(&mut ctx),
        Command::Steady => steady(&mut ctx),
        Command::Probe => probe(&mut ctx),
        Command::Simulate => simulate(&mut ctx),
        Command::Oracle => oracle(&mut ctx),
        Command::Report => report(&mut ctx),
        Command::VerifyAll => verify_all(&mut ctx),
    }
}

fn kv_table(rows: &[(String, String)]) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in rows {
        t.push(vec![k.clone(), v.clone()]);
    }
    t
}

fn gen(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let d = ctx.domain()?;
    save_field(&ctx.out("domain.sfld"), &ScalarField::zeros(&d))?;
    let t = kv_table(&[
        ("nx".into(), d.nx().to_string()),
        ("ny".into(), d.ny().to_string()),
        ("h".into(), fmt(d.h())),
        ("interior_nodes".into(), d.n_interior().to_string()),
        ("holes".into(), d.n_holes().to_string()),
        ("area".into(), fmt(d.area())),
    ]);
    t.write(&ctx.out("domain.csv"))?;
    Ok(vec!["domain.sfld".into(), "domain.csv".into()])
}

fn harmonic(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let d = ctx.domain()?;
    let annulus = match ctx.cfg.domain {
        DomainSpec::Annulus { r_in, r_out, .. } => Some(annulus_closed_forms(r_in, r_out)?),
        DomainSpec::Mask { .. } => None,
    };
    let out = ctx.cfg.out.clone();
    let b = ctx.basis()?;
    let n = b.n();
    let mut pq = Table::new(&["i", "j", "p", "q"]);
    for i in 0..n {
        for j in 0..n {
            pq.push(vec![(i + 1).to_string(), (j + 1).to_string(), fmt(b.p[(i, j)]), fmt(b.q[(i, j)])]);
        }
    }
    pq.write(&out.join("pq.csv"))?;
    let mut files = vec!["pq.csv".to_string()];
    let mut ht = Table::new(&["k", "laplacian_residual", "zeta_max_error", "p_kk_exact"]);
    for k in 0..n {
        let (err, exact) = match &annulus {
            Some(cf) => {
                let e = d
                    .interior_slots()
                    .iter()
                    .map(|&s| {
                        let (x, y) = d.slot_xy(s as usize);
                        (b.zetas[k].get(s as usize) - cf.zeta(x.hypot(y))).abs()
                    })
                    .fold(0.0, f64::max);
                (fmt(e), fmt(cf.p11))
            }
            None => ("nan".into(), "nan".into()),
        };
        ht.push(vec![(k + 1).to_string(), fmt(b.residuals[k]), err, exact]);
        let name = format!("zeta_{}.sfld", k + 1);
        save_field(&out.join(&name), &b.zetas[k])?;
        files.push(name);
    }
    ht.write(&out.join("harmonic.csv"))?;
    files.push("harmonic.csv".into());
    Ok(files)
}

fn stream(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let omega = ctx.omega_or(|c| Ok(ScalarField::zeros(&c.domain()?)))?;
    let a = ctx.a()?;
    let sol = stream_solve(ctx.basis()?, &omega, &a)?;
    let v = velocity(&sol.psi);
    let mut rows = vec![
        ("residual".to_string(), fmt(sol.residual)),
        ("kinetic_energy".into(), fmt(kinetic_energy(&v))),
        ("max_divergence".into(), fmt(max_divergence(&v))),
    ];
    for k in 0..a.len() {
        rows.push((format!("a_{}", k + 1), fmt(a.0[k])));
        rows.push((format!("circulation_{}", k + 1), fmt(circulation_recovered(&v, &omega, k + 1)?)));
        rows.push((format!("flux_error_{}", k + 1), fmt(sol.flux_errors[k])));
    }
    kv_table(&rows).write(&ctx.out("diag.csv"))?;
    save_field(&ctx.out("psi.sfld"), &sol.psi)?;
    Ok(vec!["diag.csv".into(), "psi.sfld".into()])
}

fn functional(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let state = ctx.certified_steady()?;
    let w = ctx.omega_or(|_| Ok(state.omega_bar.clone()))?;
    let lp = legendre(&state.g)?;
    let v = evaluate_all(ctx.basis()?, &w, &state.a, &lp, state.m)?;
    let t = kv_table(&[
        ("E".into(), fmt(v.e)),
        ("casimir".into(), fmt(casimir(&w, &lp)?)),
        ("EC".into(), fmt(v.ec)),
        ("D_hat".into(), fmt(v.d_hat)),
        ("D".into(), fmt(v.d)),
        ("mu".into(), fmt(v.mu)),
        ("mu_residual".into(), fmt(v.mu_residual)),
    ]);
    t.write(&ctx.out("functional.csv"))?;
    Ok(vec!["functional.csv".into()])
}

fn spectra(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let tol = ctx.cfg.tol;
    let d = ctx.domain()?;
    let lam = ctx.lambda()?;
    let big = lambda_big(ctx.basis()?, tol)?.value;
    let ld = dirichlet_ground(&d, tol)?.value;
    let state = ctx.certified_steady()?;
    let r = check_stability(ctx.basis()?, &state, tol)?;
    let mut t = Table::new(&[
        "lambda_h",
        "Lambda_h",
        "lambda_Lambda_minus_1",
        "lambda_dirichlet",
        "mu_min",
        "delta0",
        "min_gp",
        "max_gp",
        "arnold_min_ok",
        "arnold_max_ok",
        "thm15_min_ok",
        "thm15_quadform_ok",
        "constant_branch",
        "satisfied",
    ]);
    t.push(vec![
        fmt(lam),
        fmt(big),
        fmt(lam * big - 1.0),
        fmt(ld),
        fmt(r.mu_min),
        r.delta0.map_or("none".into(), fmt),
        fmt(r.min_gp),
        fmt(r.max_gp),
        r.arnold_min_ok.to_string(),
        r.arnold_max_ok.to_string(),
        r.thm15_min_ok.to_string(),
        r.thm15_quadform_ok.to_string(),
        r.constant_branch.to_string(),
        r.satisfied().to_string(),
    ]);
    t.write(&ctx.out("criterion.csv"))?;
    Ok(vec!["criterion.csv".into()])
}

fn steady(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let s = ctx.steady()?;
    let mut header = vec!["residual_pde".to_string()];
    header.extend((1..=s.flux_errors.len()).map(|k| format!("flux_error_{k}")));
    header.extend(["m_lo", "m_hi", "m", "certified", "iterations"].map(String::from));
    let mut row = vec![fmt(s.residual_pde)];
    row.extend(s.flux_errors.iter().map(|e| fmt(*e)));
    row.extend([fmt(s.m_lo), fmt(s.m_hi), fmt(s.m), s.certified.to_string(), s.iterations.to_string()]);
    Table { header, rows: vec![row] }.write(&ctx.out("steady.csv"))?;
    save_field(&ctx.out("psi_bar.sfld"), &s.psi_bar)?;
    save_field(&ctx.out("omega_bar.sfld"), &s.omega_bar)?;
    if !s.certified {
        return Err(CliError::Solver(arnold_stab_core::Error::NoConvergence {
            method: "steady-state solve",
            iterations: s.iterations,
            residual: s.residual_pde,
        }));
    }
    Ok(vec!["steady.csv".into(), "psi_bar.sfld".into(), "omega_bar.sfld".into()])
}

fn probe(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let state = ctx.certified_steady()?;
    let radius = ctx.cfg.radius * norm_lp(&state.omega_bar, 2.0);
    let (samples, seed) = (ctx.cfg.samples, ctx.cfg.seed);
    let rep = local_max_probe(ctx.basis()?, &state, radius, samples, seed)?;
    probe_table(&rep).write(&ctx.out("probe.csv"))?;
    println!(
        "probe: {} samples, {} energy violations, {} chain violations, max Delta E {:.3e}",
        rep.rows.len(),
        rep.energy_violations,
        rep.chain_violations,
        rep.max_delta_e
    );
    Ok(vec!["probe.csv".into()])
}

fn simulate(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let cfg = ctx.cfg;
    let state = ctx.certified_steady()?;
    let scale = norm_lp(&state.omega_bar, 2.0);
    let b = match &cfg.b {
        Some(b) => {
            let n = ctx.domain()?.n_holes();
            if b.len() != n {
                return Err(CliError::Config(format!("b has {} entries, the domain has {n} holes", b.len())));
            }
            Some(CirculationVector::new(b.clone()))
        }
        None => None,
    };
    let spec = PerturbSpec { mode: cfg.mode, amplitude: cfg.amplitude * scale, seed: cfg.seed, b };
    let (omega0, bv) = perturb(&state, &spec)?;
    let sim = SimConfig { cfl: cfg.cfl, dt: None, turnovers: cfg.turnovers, scheme: cfg.scheme, cadence: cfg.cadence, p: 2.0, bins: cfg.bins };
    sim.validate()?;
    let lp = legendre(&state.g)?;
    let (series, end) = run(ctx.basis()?, &omega0, &bv, &sim, &state.omega_bar, Some(&lp))?;
    series_table(&series).write(&ctx.out("series.csv"))?;
    let initial = norm_lp(&omega0.sub(&state.omega_bar), 2.0);
    let sup = series.sup_distance();
    kv_table(&[
        ("steps".into(), series.steps.to_string()),
        ("turnover_time".into(), fmt(series.turnover_time)),
        ("energy_drift".into(), fmt(series.energy_drift())),
        ("circulation_drift".into(), fmt(series.circulation_drift())),
        ("histogram_drift".into(), fmt(series.histogram_drift())),
        ("initial_distance".into(), fmt(initial)),
        ("sup_distance".into(), fmt(sup)),
        ("ratio".into(), fmt(if initial > 0.0 { sup / initial } else { f64::NAN })),
        ("relative_sup".into(), fmt(sup / scale)),
    ])
    .write(&ctx.out("summary.csv"))?;
    save_field(&ctx.out("omega_final.sfld"), &end.omega)?;
    Ok(vec!["series.csv".into(), "summary.csv".into(), "omega_final.sfld".into()])
}

fn oracle(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let DomainSpec::Annulus { r_in, r_out, .. } = ctx.cfg.domain else {
        return Err(CliError::Config("oracle needs an annulus domain".into()));
    };
    let cf = annulus_closed_forms(r_in, r_out)?;
    let rp = RadialProblem::new(r_in, r_out, 4096)?;
    let ly = radial_eigen(&rp, RadialEigenKind::LambdaY)?;
    let ld = radial_eigen(&rp, RadialEigenKind::Dirichlet)?;
    let lam = ctx.lambda()?;
    let ldh = dirichlet_ground(&ctx.domain()?, TOL_EIG)?.value;
    let p11h = ctx.basis()?.p[(0, 0)];
    kv_table(&[
        ("p11_exact".into(), fmt(cf.p11)),
        ("p11_grid".into(), fmt(p11h)),
        ("q11_exact".into(), fmt(cf.q11)),
        ("lambda_radial".into(), fmt(ly)),
        ("lambda_grid".into(), fmt(lam)),
        ("lambda_dirichlet_radial".into(), fmt(ld)),
        ("lambda_dirichlet_grid".into(), fmt(ldh)),
    ])
    .write(&ctx.out("oracle.csv"))?;
    Ok(vec!["oracle.csv".into()])
}

fn curve(t: &Table, x: &str, y: &str) -> Option<Curve> {
    let xs = t.column(x)?;
    let ys = t.column(y)?;
    Some(Curve { name: y.into(), points: xs.into_iter().zip(ys).collect() })
}

fn report(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let input = ctx.cfg.input.clone().unwrap_or_else(|| ctx.cfg.out.clone());
    let mut files = vec![];
    let mut emit = |name: &str, svg: String| -> CliResult<()> {
        std::fs::write(ctx.cfg.out.join(name), svg)?;
        files.push(name.to_string());
        Ok(())
    };
    for series in ["series.csv", "c09_series.csv"] {
        let p = input.join(series);
        if !p.exists() {
            continue;
        }
        let t = Table::read(&p)?;
        let stem = series.trim_end_matches(".csv");
        if let Some(mut e) = curve(&t, "t", "energy") {
            let e0 = e.points.first().map_or(1.0, |p| p.1);
            e.points.iter_mut().for_each(|p| p.1 = (p.1 - e0) / e0.abs());
            e.name = "relative energy change".into();
            emit(&format!("{stem}_energy.svg"), svg_plot("Energy drift", "t", "(E - E0) / |E0|", &[e], false))?;
        }
        let curves: Vec<Curve> = ["distance", "histogram"].iter().filter_map(|c| curve(&t, "t", c)).collect();
        emit(&format!("{stem}_distance.svg"), svg_plot("Distance to the steady state", "t", "value", &curves, false))?;
    }
    for probe in ["probe.csv", "c07_probe.csv"] {
        let p = input.join(probe);
        if p.exists() {
            let t = Table::read(&p)?;
            if let Some(c) = curve(&t, "distance", "delta_E") {
                let stem = probe.trim_end_matches(".csv");
                emit(&format!("{stem}.svg"), svg_plot("Energy change of rearrangements", "L2 distance", "E(w) - E(omega_bar)", &[c], true))?;
            }
        }
    }
    let p = input.join("c10_experiment.csv");
    if p.exists() {
        let t = Table::read(&p)?;
        if let Some(c) = curve(&t, "amplitude", "ratio") {
            emit("c10_experiment.svg", svg_plot("Stability experiment", "amplitude", "sup ratio", &[c], true))?;
        }
    }
    if files.is_empty() {
        return Err(CliError::Config(format!("no plottable CSV files in {}", input.display())));
    }
    Ok(files)
}

fn verify_all(ctx: &mut Ctx) -> CliResult<Vec<String>> {
    let DomainSpec::Annulus { r_in, r_out, res } = ctx.cfg.domain else {
        return Err(CliError::Config("verify-all needs an annulus domain".into()));
    };
    let o = VerifyOpts { r_in, r_out, res, seed: ctx.cfg.seed, quick: ctx.cfg.quick };
    let mut outcomes = vec![];
    let mut files = vec![];
    for id in 1..=11u8 {
        let out = verify::criterion(id, &o)?;
        println!("{}", out.line());
        for (name, t) in &out.tables {
            t.write(&ctx.out(name))?;
            files.push(name.clone());
        }
        outcomes.push(out);
    }
    verify::summary_table(&outcomes).write(&ctx.out("verify.csv"))?;
    files.push("verify.csv".into());
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass()).map(|o| o.id.to_string()).collect();
    println!("{} of 11 criteria passed", 11 - failed.len());
    if !failed.is_empty() {
        return Err(CliError::Acceptance(format!("criteria {} failed", failed.join(", "))));
    }
    Ok(files)
}
