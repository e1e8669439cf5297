//! Run configuration: `key = value` files overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use arnold_stab_core::dynamics::{PerturbMode, Scheme};

use crate::error::CliError;

/// Every accepted key with its default (empty = unset).
pub const KEYS: &[(&str, &str)] = &[
    ("domain", "annulus"),
    ("rin", "1"),
    ("rout", "2"),
    ("res", "32"),
    ("mask", ""),
    ("h", ""),
    ("x0", "0"),
    ("y0", "0"),
    ("g", "linear"),
    ("kappa", "0.5lambda"),
    ("a", ""),
    ("b", ""),
    ("seed", "42"),
    ("tol", "1e-8"),
    ("out", "out"),
    ("omega", ""),
    ("samples", "200"),
    ("radius", "0.1"),
    ("turnovers", "10"),
    ("cfl", "0.5"),
    ("scheme", "semi-lagrangian"),
    ("mode", "bump"),
    ("amplitude", "0.01"),
    ("bins", "32"),
    ("cadence", "10"),
    ("beta", "0.5"),
    ("max_iter", "500"),
    ("quick", "false"),
    ("input", ""),
];

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Annulus { r_in: f64, r_out: f64, res: usize },
    Mask { path: PathBuf, h: f64, origin: (f64, f64) },
}

/// `kappa`, either absolute or as a multiple of `lambda_h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kappa {
    Abs(f64),
    Rel(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GSpec {
    Linear(Kappa),
    Affine(Kappa, f64),
    Constant(f64),
    Table(Vec<f64>, Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub g: GSpec,
    /// Circulations; empty means one unit per hole.
    pub a: Vec<f64>,
    pub b: Option<Vec<f64>>,
    pub seed: u64,
    pub tol: f64,
    pub out: PathBuf,
    pub omega: Option<PathBuf>,
    pub samples: usize,
    /// Probe radius as a fraction of `|omega_bar|_2`.
    pub radius: f64,
    pub turnovers: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub mode: PerturbMode,
    /// Perturbation size as a fraction of `|omega_bar|_2`.
    pub amplitude: f64,
    pub bins: usize,
    pub cadence: usize,
    pub beta: f64,
    pub max_iter: usize,
    pub quick: bool,
    pub input: Option<PathBuf>,
    /// Effective key/value pairs after merging, for the manifest.
    pub echo: BTreeMap<String, String>,
}

pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", n + 1)))?;
        let k = k.trim().replace('-', "_");
        if !KEYS.iter().any(|(key, _)| *key == k) {
            return Err(CliError::Config(format!("config line {}: unknown key {k:?}", n + 1)));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let v = &map[key];
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn positive(map: &BTreeMap<String, String>, key: &str) -> Result<f64, CliError> {
    let v: f64 = num(map, key)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn list(s: &str, key: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{key}: bad number {t:?}")))
        })
        .collect()
}

pub fn parse_kappa(s: &str) -> Result<Kappa, CliError> {
    let bad = || CliError::Config(format!("kappa: cannot parse {s:?} (number or <x>lambda)"));
    let k = match s.strip_suffix("lambda") {
        Some(rest) => {
            let rest = rest.trim().trim_end_matches('*');
            Kappa::Rel(if rest.is_empty() { 1.0 } else { rest.parse().map_err(|_| bad())? })
        }
        None => Kappa::Abs(s.parse().map_err(|_| bad())?),
    };
    match k {
        Kappa::Abs(v) | Kappa::Rel(v) if !v.is_finite() => Err(bad()),
        _ => Ok(k),
    }
}

/// `linear`, `linear:<kappa>`, `affine:<kappa>:<c>`, `const:<c>` or
/// `table:<s>:<g>,<s>:<g>,...`; a bare `linear` takes `kappa`.
pub fn parse_g(s: &str, kappa: &str) -> Result<GSpec, CliError> {
    let bad = |why: &str| CliError::Config(format!("g: {why} in {s:?}"));
    let mut parts = s.splitn(2, ':');
    let head = parts.next().unwrap().trim();
    let rest = parts.next().map(str::trim);
    match (head, rest) {
        ("linear", None) => Ok(GSpec::Linear(parse_kappa(kappa)?)),
        ("linear", Some(k)) => Ok(GSpec::Linear(parse_kappa(k)?)),
        ("affine", Some(r)) => {
            let (k, c) = r.rsplit_once(':').ok_or_else(|| bad("expected affine:<kappa>:<c>"))?;
            Ok(GSpec::Affine(parse_kappa(k)?, c.parse().map_err(|_| bad("bad offset"))?))
        }
        ("const", Some(c)) => Ok(GSpec::Constant(c.parse().map_err(|_| bad("bad constant"))?)),
        ("table", Some(r)) => {
            let mut xs = vec![];
            let mut ys = vec![];
            for pair in r.split(',') {
                let (x, y) = pair.split_once(':').ok_or_else(|| bad("expected <s>:<g> pairs"))?;
                xs.push(x.trim().parse().map_err(|_| bad("bad knot"))?);
                ys.push(y.trim().parse().map_err(|_| bad("bad value"))?);
            }
            Ok(GSpec::Table(xs, ys))
        }
        _ => Err(bad("unknown profile")),
    }
}

impl RunConfig {
    /// Merges defaults, the optional config file and flag overrides.
    pub fn build(file: Option<&Path>, flags: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
        let mut map: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            map.extend(parse_file(&text)?);
        }
        for (k, v) in flags {
            if !map.contains_key(k) {
                return Err(CliError::Config(format!("unknown key {k:?}")));
            }
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Result<RunConfig, CliError> {
        let opt_path = |k: &str| (!map[k].is_empty()).then(|| PathBuf::from(&map[k]));
        let domain = match map["domain"].as_str() {
            "annulus" => DomainSpec::Annulus { r_in: num(&map, "rin")?, r_out: num(&map, "rout")?, res: num(&map, "res")? },
            "mask" => DomainSpec::Mask {
                path: opt_path("mask").ok_or_else(|| CliError::Config("domain = mask needs a mask path".into()))?,
                h: if map["h"].is_empty() {
                    return Err(CliError::Config("domain = mask needs a grid spacing h".into()));
                } else {
                    positive(&map, "h")?
                },
                origin: (num(&map, "x0")?, num(&map, "y0")?),
            },
            other => return Err(CliError::Config(format!("domain: expected annulus or mask, got {other:?}"))),
        };
        let g = parse_g(&map["g"], &map["kappa"])?;
        let a = if map["a"].is_empty() { vec![] } else { list(&map["a"], "a")? };
        let b = if map["b"].is_empty() { None } else { Some(list(&map["b"], "b")?) };
        let scheme = match map["scheme"].as_str() {
            "semi-lagrangian" | "sl" => Scheme::SemiLagrangianCubic,
            "upwind2" | "upwind" => Scheme::Upwind2,
            other => return Err(CliError::Config(format!("scheme: unknown {other:?}"))),
        };
        let mode = match map["mode"].as_str() {
            "bump" => PerturbMode::Bump,
            "swap" => PerturbMode::Swap,
            other => return Err(CliError::Config(format!("mode: unknown {other:?}"))),
        };
        let amplitude: f64 = num(&map, "amplitude")?;
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(CliError::Config(format!("amplitude must be nonnegative, got {amplitude}")));
        }
        let turnovers: f64 = num(&map, "turnovers")?;
        if !(turnovers >= 0.0 && turnovers.is_finite()) {
            return Err(CliError::Config(format!("turnovers must be nonnegative, got {turnovers}")));
        }
        let beta = positive(&map, "beta")?;
        if beta > 1.0 {
            return Err(CliError::Config(format!("beta must lie in (0, 1], got {beta}")));
        }
        let quick = match map["quick"].as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(CliError::Config(format!("quick: expected a boolean, got {other:?}"))),
        };
        let count = |k: &str| -> Result<usize, CliError> {
            let v: usize = num(&map, k)?;
            if v == 0 {
                return Err(CliError::Config(format!("{k} must be positive")));
            }
            Ok(v)
        };
        Ok(RunConfig {
            domain,
            g,
            a,
            b,
            seed: num(&map, "seed")?,
            tol: positive(&map, "tol")?,
            out: PathBuf::from(&map["out"]),
            omega: opt_path("omega"),
            samples: count("samples")?,
            radius: positive(&map, "radius")?,
            turnovers,
            cfl: positive(&map, "cfl")?,
            scheme,
            mode,
            amplitude,
            bins: count("bins")?,
            cadence: count("cadence")?,
            beta,
            max_iter: count("max_iter")?,
            quick,
            input: opt_path("input"),
            echo: map,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_unknown_keys_fail() {
        let file = parse_file("res = 16\n# comment\nkappa = 2\n").unwrap();
        assert_eq!(file["res"], "16");
        assert!(parse_file("colour = red").is_err());
        let mut flags = file.clone();
        flags.insert("res".into(), "24".into());
        let mut map: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        map.extend(flags);
        let cfg = RunConfig::from_map(map).unwrap();
        assert_eq!(cfg.domain, DomainSpec::Annulus { r_in: 1.0, r_out: 2.0, res: 24 });
        assert_eq!(cfg.g, GSpec::Linear(Kappa::Abs(2.0)));
    }

    #[test]
    fn profile_specs() {
        assert_eq!(parse_g("linear", "0.5lambda").unwrap(), GSpec::Linear(Kappa::Rel(0.5)));
        assert_eq!(parse_g("affine:1.5:0.2", "").unwrap(), GSpec::Affine(Kappa::Abs(1.5), 0.2));
        assert_eq!(parse_g("table:0:0,1:2", "").unwrap(), GSpec::Table(vec![0.0, 1.0], vec![0.0, 2.0]));
        assert!(parse_g("cubic:1", "1").is_err());
        assert!(parse_kappa("abc").is_err());
    }
}
