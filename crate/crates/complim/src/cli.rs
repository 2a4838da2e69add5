//! Command-line surface. Exit codes: 0 ok, 1 config/input error, 2 solver
//! or output failure, 3 certificate failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::basis::{build_basis, project_velocity, velocity_norms, BasisSpec};
use crate::compressible::{energy_ledger, instrument, simulate_compressible, SolverError, LEDGER_TOL};
use crate::config::{parse_config, RunConfig};
use crate::csvio::{self, num, write_atomic, IoError};
use crate::exec::Execution;
use crate::field::Shape;
use crate::incompressible::{incompressible_energy_ledger, nullspace_basis, simulate_incompressible, SolenoidalBasis};
use crate::inequality::{verify_mixed, Role};
use crate::limit_lab::{row_metrics, sweep_alpha_with, LabError, SweepConfig, SweepSetup};
use crate::operators::{assemble, leray_project, OperatorSet};
use crate::presets::resolve_params;

#[derive(Debug, Parser)]
#[command(name = "complim", version, about = "Compressible Stokes flow and its incompressible limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides [output] directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compressible run: trajectory, energy ledger, lemma series.
    Simulate(ConfigArgs),
    /// Incompressible run from P_J u0.
    SimulateIncompressible(ConfigArgs),
    /// Helmholtz split of a field (the config's u0, or --field).
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Vector expression, e.g. "(x*y, sin(pi*x))".
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        n_u: Option<usize>,
        #[arg(long)]
        n_p: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// α-sweep against the incompressible reference.
    Sweep(ConfigArgs),
    /// Certify an energy ledger or the mixed differential inequality.
    Verify(VerifyArgs),
    /// Weak-probe deltas at the configured α.
    Probe(ConfigArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "mode")]
struct VerifyMode {
    /// Trajectory CSV with an energy_residual column.
    #[arg(long, value_name = "TRAJ_CSV")]
    energy: Option<PathBuf>,
    /// Check the lemma hypothesis and conclusions on t,value series.
    #[arg(long)]
    mixed: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    mode: VerifyMode,
    #[arg(long, requires = "mixed")]
    i: Option<PathBuf>,
    #[arg(long, requires = "mixed")]
    j: Option<PathBuf>,
    #[arg(long, requires = "mixed")]
    a: Option<PathBuf>,
    #[arg(long, requires = "mixed")]
    b: Option<PathBuf>,
    #[arg(long, requires = "mixed")]
    c: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
    Certificate(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Certificate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Certificate(m) => m,
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidParams(_) | SolverError::Basis(_) => Failure::Config(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) | LabError::Basis(_) => Failure::Config(e.to_string()),
            LabError::Solver(s) => s.into(),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Solver(format!("output: {e}"))
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("complim: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<String, Failure> {
    match cmd {
        Command::Simulate(a) => simulate(&a),
        Command::SimulateIncompressible(a) => simulate_inc(&a),
        Command::Decompose { config, field, n_u, n_p, out } => decompose(config.as_deref(), field, n_u, n_p, out),
        Command::Sweep(a) => sweep(&a),
        Command::Verify(a) => verify(&a),
        Command::Probe(a) => probe(&a),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}:\n{e}", path.display())))
}

fn out_dir(cfg: &RunConfig, over: &Option<PathBuf>) -> PathBuf {
    over.clone().unwrap_or_else(|| cfg.output.directory.clone())
}

struct Built {
    spec: BasisSpec,
    ops: OperatorSet,
    z: Option<SolenoidalBasis>,
}

fn build(n_u: usize, n_p: usize) -> Result<Built, Failure> {
    let spec = build_basis(n_u as i64, n_p as i64).map_err(|e| Failure::Config(e.to_string()))?;
    let ops = assemble(&spec).map_err(|e| Failure::Solver(e.to_string()))?;
    let z = match nullspace_basis(&ops) {
        Ok(z) => Some(z),
        Err(SolverError::EmptyKernel) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Built { spec, ops, z })
}

fn simulate(a: &ConfigArgs) -> Result<String, Failure> {
    let cfg = load_config(&a.config)?;
    let b = build(cfg.n_u, cfg.n_p)?;
    let data = cfg.problem_data().map_err(Failure::Config)?;
    let params = resolve_params(&b.spec, &b.ops, b.z.as_ref(), &cfg.physics(), &data, cfg.alpha, cfg.run_dt())?;
    let traj = simulate_compressible(&b.spec, &b.ops, &params)?;
    let ledger = energy_ledger(&b.spec, &b.ops, &params, &traj)?;
    let lemma = instrument(&b.spec, &b.ops, &params, &traj)?;
    let dir = out_dir(&cfg, &a.out);
    write_atomic(&dir.join("trajectory.csv"), &csvio::compressible_trajectory_csv(&b.ops, &traj, &ledger))?;
    write_atomic(&dir.join("ledger.csv"), &csvio::ledger_csv(&traj.grid, &ledger))?;
    for (name, s) in [("I", &lemma.i), ("J", &lemma.j), ("a", &lemma.a), ("b", &lemma.b), ("c", &lemma.c)] {
        write_atomic(&dir.join(format!("lemma_{name}.csv")), &csvio::series_csv(s))?;
    }
    if cfg.output.dump_coefficients {
        write_atomic(&dir.join("coefficients.csv"), &csvio::coefficient_csv(&traj.grid, &traj.c, &traj.q))?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "steps = {}  dt = {}", traj.grid.steps, num(traj.grid.dt()));
    let _ = writeln!(s, "max |energy residual| = {:.3e} (tolerance {LEDGER_TOL:.0e})", ledger.max_abs_cumulative());
    let _ = writeln!(s, "wrote {}", dir.display());
    Ok(s)
}

fn simulate_inc(a: &ConfigArgs) -> Result<String, Failure> {
    let cfg = load_config(&a.config)?;
    let b = build(cfg.n_u, cfg.n_p)?;
    let z = b.z.as_ref().ok_or(SolverError::EmptyKernel)?;
    let data = cfg.problem_data().map_err(Failure::Config)?;
    let params = resolve_params(&b.spec, &b.ops, Some(z), &cfg.physics(), &data, cfg.alpha, cfg.run_dt())?;
    let traj = simulate_incompressible(&b.spec, &b.ops, z, &params)?;
    let ledger = incompressible_energy_ledger(&b.spec, &b.ops, &params, &traj)?;
    let dir = out_dir(&cfg, &a.out);
    write_atomic(&dir.join("trajectory_incompressible.csv"), &csvio::incompressible_trajectory_csv(&b.ops, &traj, &ledger))?;
    write_atomic(&dir.join("ledger_incompressible.csv"), &csvio::ledger_csv(&traj.grid, &ledger))?;
    if cfg.output.dump_coefficients {
        write_atomic(&dir.join("coefficients_incompressible.csv"), &csvio::coefficient_csv(&traj.grid, &traj.c, &traj.q))?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "m_V = {}  steps = {}  dt = {}", z.dim(), traj.grid.steps, num(traj.grid.dt()));
    let _ = writeln!(s, "max |energy residual| = {:.3e} (tolerance {LEDGER_TOL:.0e})", ledger.max_abs_cumulative());
    let _ = writeln!(s, "wrote {}", dir.display());
    Ok(s)
}

fn decompose(config: Option<&Path>, field: Option<String>, n_u: Option<usize>, n_p: Option<usize>, out: Option<PathBuf>) -> Result<String, Failure> {
    let mut cfg = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(text) = field {
        cfg.data.u0 = crate::config::DataEntry { text, time: None };
        cfg.data.u0.datum(Shape::Vector).map_err(|e| Failure::Config(format!("--field: {e}")))?;
    }
    cfg.n_u = n_u.unwrap_or(cfg.n_u);
    cfg.n_p = n_p.unwrap_or(cfg.n_p);
    if cfg.n_p > cfg.n_u {
        return Err(Failure::Config(format!("N_p = {} exceeds N_u = {}", cfg.n_p, cfg.n_u)));
    }
    let b = build(cfg.n_u, cfg.n_p)?;
    let data = cfg.problem_data().map_err(Failure::Config)?;
    let params = resolve_params(&b.spec, &b.ops, b.z.as_ref(), &cfg.physics(), &data, cfg.alpha, cfg.run_dt())?;
    let c = project_velocity(&b.spec, &params.u0).map_err(|e| Failure::Config(e.to_string()))?;
    let parts = leray_project(&b.ops, &c).map_err(|e| Failure::Solver(e.to_string()))?;

    let mut coeffs = String::from("index,comp,i,j,full,solenoidal,gradient\n");
    for k in 0..b.spec.m_u {
        let idx = b.spec.velocity_index(k);
        let _ = writeln!(
            coeffs,
            "{k},{},{},{},{},{},{}",
            idx.comp,
            idx.i,
            idx.j,
            num(c.values[k]),
            num(parts.solenoidal.values[k]),
            num(parts.gradient.values[k])
        );
    }
    let mut norms = String::from("part,l2,h01,div_l2\n");
    for (name, v) in [("full", &c), ("solenoidal", &parts.solenoidal), ("gradient", &parts.gradient)] {
        let n = velocity_norms(&b.ops, v).map_err(|e| Failure::Solver(e.to_string()))?;
        let _ = writeln!(norms, "{name},{},{},{}", num(n.l2), num(n.h01), num(n.div_l2));
    }
    let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
    write_atomic(&dir.join("decompose.csv"), &coeffs)?;
    write_atomic(&dir.join("decompose_norms.csv"), &norms)?;
    Ok(format!("{norms}wrote {}\n", dir.display()))
}

fn sweep_config(cfg: &RunConfig) -> Result<SweepConfig, Failure> {
    cfg.sweep_config().map_err(Failure::Config)
}

fn sweep(a: &ConfigArgs) -> Result<String, Failure> {
    let cfg = load_config(&a.config)?;
    let sc = sweep_config(&cfg)?;
    let result = sweep_alpha_with(&sc, Execution::from_env(sc.alphas.len()))?;
    let dir = out_dir(&cfg, &a.out);
    write_atomic(&dir.join("sweep.csv"), &csvio::sweep_csv(&result))?;
    write_atomic(&dir.join("sweep_probes.csv"), &csvio::probe_csv(&result))?;
    write_atomic(&dir.join("sweep.meta"), &csvio::sweep_metadata(&result, &cfg.render()))?;
    let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
    let mut s = csvio::sweep_csv(&result);
    let _ = writeln!(s, "{} rows ({failed} failed); wrote {}", result.rows.len(), dir.display());
    Ok(s)
}

fn probe(a: &ConfigArgs) -> Result<String, Failure> {
    let cfg = load_config(&a.config)?;
    let mut sc = sweep_config(&cfg)?;
    // probes at the configured α on the single-run grid
    sc.dt = Some(cfg.run_dt());
    let setup = SweepSetup::new(&sc)?;
    let params = setup.params_for(cfg.alpha);
    let traj = simulate_compressible(&setup.spec, &setup.ops, &params)?;
    let m = row_metrics(&setup.ops, &params, &traj, &setup.reference, &setup.probes)?;
    let mut body = String::from("probe,weight,delta\n");
    for (k, (p, d)) in setup.probes.iter().zip(&m.probe_deltas).enumerate() {
        let _ = writeln!(body, "{k},{:?},{}", p.phi, num(*d));
    }
    let dir = out_dir(&cfg, &a.out);
    write_atomic(&dir.join("probes.csv"), &body)?;
    Ok(format!("{body}wrote {}\n", dir.display()))
}

fn read_input<T>(r: Result<T, IoError>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn verify(a: &VerifyArgs) -> Result<String, Failure> {
    if let Some(path) = &a.mode.energy {
        let res = read_input(csvio::read_column(path, "energy_residual"))?;
        let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst.is_nan() || res.iter().any(|v| v.is_nan()) {
            return Err(Failure::Config(format!("{}: NaN residual", path.display())));
        }
        let msg = format!("max |energy residual| = {worst:.3e}, tolerance {LEDGER_TOL:.0e}");
        return if worst <= LEDGER_TOL {
            Ok(format!("PASS {msg}\n"))
        } else {
            Err(Failure::Certificate(format!("FAIL {msg}")))
        };
    }
    let need = |p: &Option<PathBuf>, flag: &str| p.clone().ok_or_else(|| Failure::Config(format!("--mixed needs --{flag}")));
    let (pi, pj, pa, pb, pc) = (need(&a.i, "i")?, need(&a.j, "j")?, need(&a.a, "a")?, need(&a.b, "b")?, need(&a.c, "c")?);
    let i = read_input(csvio::read_series(&pi, Role::I))?;
    let j = read_input(csvio::read_series(&pj, Role::J))?;
    let av = read_input(csvio::read_series(&pa, Role::A))?;
    let bv = read_input(csvio::read_series(&pb, Role::B))?;
    let cv = read_input(csvio::read_series(&pc, Role::C))?;
    let report = verify_mixed(&i, &j, &av, &bv, &cv).map_err(|e| Failure::Config(e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "hypothesis: {} (worst margin {:.3e} on interval {}, tolerance {:.3e})",
        if report.hypothesis_holds { "holds" } else { "violated" },
        report.hypothesis_margin,
        report.worst_interval,
        report.tolerance
    );
    if let Some(c) = &report.conclusions {
        let _ = writeln!(s, "‖J‖_L2 = {:.6e} <= {:.6e}", c.j_l2, c.j_l2_bound);
        let _ = writeln!(s, "sup I = {:.6e} <= {:.6e}", c.i_inf, c.i_inf_bound);
    }
    if report.passed() {
        Ok(format!("PASS\n{s}"))
    } else {
        Err(Failure::Certificate(format!("FAIL\n{s}")))
    }
}
