//! INI-style run configuration.
//!
//! ```text
//! [basis]    N_u, N_p
//! [physics]  rho0, mu, eta, alpha, T, dt (number or "auto")
//! [data]     u0, p0, f, sigma, s (preset name or expression; s = auto means ρ₀f)
//!            u0_time, p0_time, f_time, sigma_time, s_time (time factors)
//! [sweep]    alphas (comma list), kind, probes, seed
//! [output]   directory, dump_coefficients
//! ```
//! `#` starts a comment. Every problem is reported, not just the first.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use thiserror::Error;

use crate::expr::parse_expression;
use crate::field::{SampledField, Shape, TimeFactor};
use crate::grid::default_dt;
use crate::limit_lab::{ExperimentKind, SweepConfig, DEFAULT_ALPHAS, DEFAULT_PROBES, DEFAULT_SEED};
use crate::presets::{Datum, Physics, Preset, ProblemData};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("duplicate key `{key}` in [{section}] on lines {first} and {second}")]
    Duplicate { section: String, key: String, first: usize, second: usize },
    #[error("line {line}: {key}: {message}")]
    Type { line: usize, key: String, message: String },
    #[error("line {line}: {key}: {message}")]
    Range { line: usize, key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_char('\n')?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Data slot as written: a preset name or an expression, plus a time factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DataEntry {
    pub text: String,
    pub time: Option<TimeFactor>,
}

impl DataEntry {
    fn new(text: &str) -> Self {
        Self {
            text: text.to_string(),
            time: None,
        }
    }

    pub fn datum(&self, shape: Shape) -> Result<Datum, String> {
        let base = match self.text.parse::<Preset>() {
            Ok(p) => {
                if p.shape() != shape {
                    return Err(format!("preset {p} is a {:?} field, expected {shape:?}", p.shape()));
                }
                Datum::preset(p)
            }
            Err(_) => {
                let e = parse_expression(&self.text).map_err(|e| e.to_string())?;
                let got = if e.is_vector() { Shape::Vector } else { Shape::Scalar };
                if got != shape {
                    // a bare scalar zero is accepted for vector slots
                    if !(e.is_zero() && shape == Shape::Vector) {
                        return Err(format!("expected a {shape:?} expression, got {got:?}"));
                    }
                    Datum::zero(Shape::Vector)
                } else {
                    Datum::field(SampledField::expression(e))
                }
            }
        };
        Ok(match &self.time {
            Some(g) => base.with_time(g.clone()),
            None => base,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub u0: DataEntry,
    pub p0: DataEntry,
    pub f: DataEntry,
    pub sigma: DataEntry,
    /// None: s = ρ₀ f.
    pub s: Option<DataEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub kind: ExperimentKind,
    pub probes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub dump_coefficients: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_u: usize,
    pub n_p: usize,
    pub rho0: f64,
    pub mu: f64,
    pub eta: f64,
    pub alpha: f64,
    pub t_final: f64,
    /// None: "auto".
    pub dt: Option<f64>,
    pub data: DataSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_u: 8,
            n_p: 8,
            rho0: 1.0,
            mu: 1.0,
            eta: 0.0,
            alpha: 1e-2,
            t_final: 1.0,
            dt: None,
            data: DataSection {
                u0: DataEntry::new("0"),
                p0: DataEntry::new("0"),
                f: DataEntry::new("0"),
                sigma: DataEntry::new("0"),
                s: None,
            },
            sweep: SweepSection {
                alphas: DEFAULT_ALPHAS.to_vec(),
                kind: ExperimentKind::StrongVelocity,
                probes: DEFAULT_PROBES,
                seed: DEFAULT_SEED,
            },
            output: OutputSection {
                directory: PathBuf::from("out"),
                dump_coefficients: false,
            },
        }
    }
}

const KEYS: [(&str, &[&str]); 5] = [
    ("basis", &["N_u", "N_p"]),
    ("physics", &["rho0", "mu", "eta", "alpha", "T", "dt"]),
    ("data", &["u0", "p0", "f", "sigma", "s", "u0_time", "p0_time", "f_time", "sigma_time", "s_time"]),
    ("sweep", &["alphas", "kind", "probes", "seed"]),
    ("output", &["directory", "dump_coefficients"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries.remove(&(section.to_string(), key.to_string())).map(|e| (e.line, e.value))
    }

    fn parsed<T>(&mut self, section: &str, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> (T, usize) {
        match self.take(section, key) {
            None => (default, 0),
            Some((line, v)) => match parse(&v) {
                Ok(x) => (x, line),
                Err(message) => {
                    self.errors.push(ConfigError::Type {
                        line,
                        key: key.to_string(),
                        message,
                    });
                    (default, line)
                }
            },
        }
    }

    fn range(&mut self, line: usize, key: &str, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.errors.push(ConfigError::Range {
                line,
                key: key.to_string(),
                message: message(),
            });
        }
    }
}

fn real(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("`{v}` is not a finite real number")),
    }
}

fn count(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut reader = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                reader.errors.push(ConfigError::Syntax {
                    line,
                    message: format!("malformed section header `{content}`"),
                });
                section = None;
                continue;
            };
            let name = name.trim().to_string();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name);
            } else {
                reader.errors.push(ConfigError::UnknownSection { line, section: name });
                // keys under an unknown section are not reported again
                section = Some(String::new());
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            reader.errors.push(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        let Some(sec) = &section else {
            reader.errors.push(ConfigError::Syntax {
                line,
                message: format!("key `{key}` outside any section"),
            });
            continue;
        };
        if sec.is_empty() {
            continue;
        }
        let known = KEYS.iter().any(|(s, keys)| s == sec && keys.contains(&key.as_str()));
        if !known {
            reader.errors.push(ConfigError::UnknownKey {
                line,
                section: sec.clone(),
                key,
            });
            continue;
        }
        let slot = (sec.clone(), key.clone());
        if let Some(prev) = reader.entries.get(&slot) {
            reader.errors.push(ConfigError::Duplicate {
                section: sec.clone(),
                key,
                first: prev.line,
                second: line,
            });
            continue;
        }
        reader.entries.insert(slot, Entry { line, value });
    }

    let d = RunConfig::default();
    let r = &mut reader;
    let (n_u, l_nu) = r.parsed("basis", "N_u", d.n_u, count);
    let (n_p, l_np) = r.parsed("basis", "N_p", d.n_p, count);
    r.range(l_nu, "N_u", n_u >= 1, || "must be at least 1".into());
    r.range(l_np, "N_p", n_p >= 1, || "must be at least 1".into());
    r.range(l_np.max(l_nu), "N_p", n_p <= n_u, || format!("N_p = {n_p} exceeds N_u = {n_u}"));

    let mut positive = |key: &str, default: f64| {
        let (v, line) = r.parsed("physics", key, default, real);
        r.range(line, key, v > 0.0, || format!("must be positive (got {v})"));
        v
    };
    let rho0 = positive("rho0", d.rho0);
    let mu = positive("mu", d.mu);
    let alpha = positive("alpha", d.alpha);
    let t_final = positive("T", d.t_final);
    let (eta, l_eta) = r.parsed("physics", "eta", d.eta, real);
    r.range(l_eta, "eta", eta >= 0.0, || format!("must be non-negative (got {eta})"));
    let (dt, l_dt) = r.parsed("physics", "dt", None, |v| if v == "auto" { Ok(None) } else { real(v).map(Some) });
    if let Some(dt) = dt {
        r.range(l_dt, "dt", dt > 0.0 && dt <= t_final, || format!("must lie in (0, T] (got {dt})"));
    }

    let mut slot = |key: &str, shape: Shape, default: Option<DataEntry>| -> Option<DataEntry> {
        let (text, line) = r.parsed("data", key, None, |v| Ok(Some(v.to_string())));
        let time_key = format!("{key}_time");
        let (time, t_line) = r.parsed("data", &time_key, None, |v| v.parse::<TimeFactor>().map(Some));
        let mut entry = match text {
            None => default,
            Some(t) if key == "s" && t == "auto" => None,
            Some(t) => Some(DataEntry::new(&t)),
        };
        if let Some(e) = &mut entry {
            e.time = time;
            if let Err(message) = e.datum(shape) {
                r.errors.push(ConfigError::Type {
                    line,
                    key: key.to_string(),
                    message,
                });
            }
        } else if time.is_some() {
            r.errors.push(ConfigError::Type {
                line: t_line,
                key: time_key,
                message: format!("`{key}` has no field to scale"),
            });
        }
        entry
    };
    let data = DataSection {
        u0: slot("u0", Shape::Vector, Some(d.data.u0.clone())).unwrap_or(d.data.u0.clone()),
        p0: slot("p0", Shape::Scalar, Some(d.data.p0.clone())).unwrap_or(d.data.p0.clone()),
        f: slot("f", Shape::Vector, Some(d.data.f.clone())).unwrap_or(d.data.f.clone()),
        sigma: slot("sigma", Shape::Scalar, Some(d.data.sigma.clone())).unwrap_or(d.data.sigma.clone()),
        s: slot("s", Shape::Vector, None),
    };

    let (alphas, l_al) = r.parsed("sweep", "alphas", d.sweep.alphas.clone(), |v| v.split(',').map(|w| real(w.trim())).collect());
    r.range(l_al, "alphas", alphas.len() >= 3, || format!("need at least 3 values, got {}", alphas.len()));
    r.range(l_al, "alphas", alphas.iter().all(|a| *a > 0.0 && *a < 1.0), || "values must lie in (0, 1)".into());
    r.range(l_al, "alphas", alphas.windows(2).all(|w| w[1] < w[0]), || "values must strictly decrease".into());
    let (kind, _) = r.parsed("sweep", "kind", d.sweep.kind, |v| v.parse());
    let (probes, _) = r.parsed("sweep", "probes", d.sweep.probes, count);
    let (seed, _) = r.parsed("sweep", "seed", d.sweep.seed, |v| v.parse::<u64>().map_err(|_| format!("`{v}` is not a u64 seed")));

    let (directory, l_dir) = r.parsed("output", "directory", d.output.directory.clone(), |v| Ok(PathBuf::from(v)));
    r.range(l_dir, "directory", !directory.as_os_str().is_empty(), || "must not be empty".into());
    let (dump_coefficients, _) = r.parsed("output", "dump_coefficients", d.output.dump_coefficients, parse_bool);

    if !reader.errors.is_empty() {
        reader.errors.sort_by_key(error_line);
        return Err(ConfigErrors(reader.errors));
    }
    Ok(RunConfig {
        n_u,
        n_p,
        rho0,
        mu,
        eta,
        alpha,
        t_final,
        dt,
        data,
        sweep: SweepSection {
            alphas,
            kind,
            probes,
            seed,
        },
        output: OutputSection {
            directory,
            dump_coefficients,
        },
    })
}

fn error_line(e: &ConfigError) -> usize {
    match e {
        ConfigError::Syntax { line, .. }
        | ConfigError::UnknownSection { line, .. }
        | ConfigError::UnknownKey { line, .. }
        | ConfigError::Type { line, .. }
        | ConfigError::Range { line, .. } => *line,
        ConfigError::Duplicate { second, .. } => *second,
    }
}

impl RunConfig {
    /// Canonical text; `parse_config(&c.render()) == Ok(c)`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[basis]\nN_u = {}\nN_p = {}\n", self.n_u, self.n_p);
        let _ = writeln!(s, "[physics]\nrho0 = {}\nmu = {}\neta = {}\nalpha = {}\nT = {}", self.rho0, self.mu, self.eta, self.alpha, self.t_final);
        let _ = match self.dt {
            Some(dt) => writeln!(s, "dt = {dt}\n"),
            None => writeln!(s, "dt = auto\n"),
        };
        s.push_str("[data]\n");
        let slots = [
            ("u0", Some(&self.data.u0)),
            ("p0", Some(&self.data.p0)),
            ("f", Some(&self.data.f)),
            ("sigma", Some(&self.data.sigma)),
            ("s", self.data.s.as_ref()),
        ];
        for (key, entry) in slots {
            match entry {
                None => {
                    let _ = writeln!(s, "{key} = auto");
                }
                Some(e) => {
                    let _ = writeln!(s, "{key} = {}", e.text);
                    if let Some(g) = &e.time {
                        let _ = writeln!(s, "{key}_time = {g}");
                    }
                }
            }
        }
        let alphas: Vec<String> = self.sweep.alphas.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(
            s,
            "\n[sweep]\nalphas = {}\nkind = {}\nprobes = {}\nseed = {}\n",
            alphas.join(", "),
            self.sweep.kind,
            self.sweep.probes,
            self.sweep.seed
        );
        let _ = writeln!(s, "[output]\ndirectory = {}\ndump_coefficients = {}", self.output.directory.display(), self.output.dump_coefficients);
        s
    }

    pub fn physics(&self) -> Physics {
        Physics {
            rho0: self.rho0,
            mu: self.mu,
            eta: self.eta,
            t_final: self.t_final,
        }
    }

    /// Entries were validated by the parser, so this only fails on
    /// hand-built configs.
    pub fn problem_data(&self) -> Result<ProblemData, String> {
        Ok(ProblemData {
            u0: self.data.u0.datum(Shape::Vector)?,
            p0: self.data.p0.datum(Shape::Scalar)?,
            f: self.data.f.datum(Shape::Vector)?,
            sigma: self.data.sigma.datum(Shape::Scalar)?,
            s: self.data.s.as_ref().map(|e| e.datum(Shape::Vector)).transpose()?,
        })
    }

    /// dt for a single run at the configured α.
    pub fn run_dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(self.t_final, self.alpha, self.n_u))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, String> {
        Ok(SweepConfig {
            n_u: self.n_u,
            n_p: self.n_p,
            physics: self.physics(),
            dt: self.dt,
            data: self.problem_data()?,
            alphas: self.sweep.alphas.clone(),
            probes: self.sweep.probes,
            seed: self.sweep.seed,
            kind: self.sweep.kind,
        })
    }
}
