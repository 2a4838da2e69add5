//! α-sweeps comparing compressible runs against the incompressible limit.
//!
//! All time integrals use the midpoint rule on the shared grid; that is the
//! quadrature under which the trapezoidal integrator's discrete energy
//! identity is exact, so X_α has no dt² floor of its own.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::basis::{build_basis, project_pressure, project_velocity, BasisError, BasisSpec, VelocityCoeffs};
use crate::compressible::{simulate_compressible, CompressibleParams, SolverError, Trajectory};
use crate::exec::Execution;
use crate::grid::{default_dt, TimeGrid};
use crate::incompressible::{nullspace_basis, shift_pressure_mean, simulate_incompressible, IncompressibleTrajectory, SolenoidalBasis};
use crate::operators::{assemble, leray_project, OperatorError, OperatorSet};
use crate::presets::{compatible_p0, resolve_params, Physics, ProblemData};

pub const PROBE_SOLENOIDAL_TOL: f64 = 1e-10;
pub const DEFAULT_ALPHAS: [f64; 6] = [1e-1, 0.031_622_776_601_683_79, 1e-2, 0.003_162_277_660_168_379_5, 1e-3, 0.000_316_227_766_016_837_94];
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PROBES: usize = 8;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("probe {index} is not solenoidal (|Bv| = {residual:.3e})")]
    ProbeNotSolenoidal { index: usize, residual: f64 },
    #[error("rate fit: {0}")]
    Fit(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Weak,
    StrongVelocity,
    PressureWeak,
    PressureStrong,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Weak => "weak",
            ExperimentKind::StrongVelocity => "strong_velocity",
            ExperimentKind::PressureWeak => "pressure_weak",
            ExperimentKind::PressureStrong => "pressure_strong",
        }
    }

    fn is_pressure(self) -> bool {
        matches!(self, ExperimentKind::PressureWeak | ExperimentKind::PressureStrong)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "weak" => ExperimentKind::Weak,
            "strong_velocity" => ExperimentKind::StrongVelocity,
            "pressure_weak" => ExperimentKind::PressureWeak,
            "pressure_strong" => ExperimentKind::PressureStrong,
            _ => return Err(format!("unknown experiment kind `{s}` (weak | strong_velocity | pressure_weak | pressure_strong)")),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_u: usize,
    pub n_p: usize,
    pub physics: Physics,
    /// None: chosen from the smallest α.
    pub dt: Option<f64>,
    pub data: ProblemData,
    pub alphas: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
    pub kind: ExperimentKind,
}

impl SweepConfig {
    pub fn new(kind: ExperimentKind, data: ProblemData) -> Self {
        Self {
            n_u: 8,
            n_p: 8,
            physics: Physics::default(),
            dt: None,
            data,
            alphas: DEFAULT_ALPHAS.to_vec(),
            probes: DEFAULT_PROBES,
            seed: DEFAULT_SEED,
            kind,
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.alphas.len() < 3 {
            return Err(LabError::Config(format!("need at least 3 alpha values, got {}", self.alphas.len())));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(LabError::Config(format!("alpha = {a} outside (0, 1)")));
        }
        if !self.alphas.windows(2).all(|w| w[1] < w[0]) {
            return Err(LabError::Config("alpha list must be strictly decreasing".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt <= self.physics.t_final) {
                return Err(LabError::Config(format!("dt = {dt} outside (0, T]")));
            }
        }
        Ok(())
    }

    pub fn alpha_min(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn shared_dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(self.physics.t_final, self.alpha_min(), self.n_u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeWeight {
    One,
    T,
    T2,
    Reverse,
}

impl ProbeWeight {
    pub const ALL: [ProbeWeight; 4] = [ProbeWeight::One, ProbeWeight::T, ProbeWeight::T2, ProbeWeight::Reverse];

    pub fn eval(self, t: f64, t_final: f64) -> f64 {
        match self {
            ProbeWeight::One => 1.0,
            ProbeWeight::T => t,
            ProbeWeight::T2 => t * t,
            ProbeWeight::Reverse => t_final - t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub v: VelocityCoeffs,
    pub phi: ProbeWeight,
}

/// K kernel vectors from a seeded generator, orthonormal in H¹₀;
/// weights cycle through 1, t, t², T − t.
pub fn probe_dictionary(z: &SolenoidalBasis, k: usize, seed: u64) -> Vec<Probe> {
    let m_v = z.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(m_v, k, |_, _| rng.gen_range(-1.0..=1.0));
    let vs = z.z.clone() * w;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for col in 0..k {
        let mut v = vs.column(col).into_owned();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v -= b * d;
            }
        }
        let n = v.norm();
        // k > m_V leaves a dependent draw; keep it, unnormalized, rather than dividing by ~0
        if n > 1e-12 {
            v /= n;
        }
        basis.push(v);
    }
    basis
        .into_iter()
        .enumerate()
        .map(|(i, v)| Probe {
            v: VelocityCoeffs { values: v },
            phi: ProbeWeight::ALL[i % 4],
        })
        .collect()
}

fn check_grids(a: &TimeGrid, b: &TimeGrid) -> Result<(), LabError> {
    if a != b {
        return Err(LabError::GridMismatch(format!("{} vs {} steps over T = {} / {}", a.steps, b.steps, a.t_final, b.t_final)));
    }
    Ok(())
}

/// |∫((u_α − u′, v)) φ dt| per probe.
pub fn weak_probe(ops: &OperatorSet, traj_c: &Trajectory, traj_i: &IncompressibleTrajectory, probes: &[Probe]) -> Result<Vec<f64>, LabError> {
    check_grids(&traj_c.grid, &traj_i.grid)?;
    for (index, p) in probes.iter().enumerate() {
        let residual = ops.divergence_residual(&p.v.values);
        if residual > PROBE_SOLENOIDAL_TOL * p.v.values.norm().max(1.0) {
            return Err(LabError::ProbeNotSolenoidal { index, residual });
        }
    }
    let grid = traj_c.grid;
    let dt = grid.dt();
    let mut acc = vec![0.0; probes.len()];
    for n in 0..grid.steps {
        let d = traj_c.mid_c(n) - traj_i.mid_c(n);
        let t = grid.midpoint(n);
        for (a, p) in acc.iter_mut().zip(probes) {
            *a += dt * d.dot(&p.v.values) * p.phi.eval(t, grid.t_final);
        }
    }
    Ok(acc.into_iter().map(f64::abs).collect())
}

/// ρ₀|u_α(T) − u′(T)|² + (α/ρ₀)|p_α(T)|² + 2μ∫‖u_α − u′‖² + 2η∫|div(u_α − u′)|².
pub fn x_alpha(ops: &OperatorSet, params: &CompressibleParams, traj_c: &Trajectory, traj_i: &IncompressibleTrajectory) -> Result<f64, LabError> {
    check_grids(&traj_c.grid, &traj_i.grid)?;
    let grid = traj_c.grid;
    let dt = grid.dt();
    let last = grid.steps;
    let d_t = &traj_c.c[last] - &traj_i.c[last];
    let mut x = params.rho0 * ops.l2_norm_sq(&d_t) + params.alpha / params.rho0 * traj_c.q[last].norm_squared();
    for n in 0..grid.steps {
        let d = traj_c.mid_c(n) - traj_i.mid_c(n);
        x += 2.0 * dt * (params.mu * d.norm_squared() + params.eta * ops.div_norm_sq(&d));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMetrics {
    pub err_vel_l2h1: f64,
    pub err_vel_linf_l2: f64,
    pub err_pres_linf_l2: f64,
    pub x_alpha: f64,
    pub probe_deltas: Vec<f64>,
}

impl RowMetrics {
    pub fn probe_max(&self) -> f64 {
        self.probe_deltas.iter().copied().fold(0.0, f64::max)
    }
}

pub fn row_metrics(
    ops: &OperatorSet,
    params: &CompressibleParams,
    traj_c: &Trajectory,
    traj_i: &IncompressibleTrajectory,
    probes: &[Probe],
) -> Result<RowMetrics, LabError> {
    check_grids(&traj_c.grid, &traj_i.grid)?;
    let grid = traj_c.grid;
    let dt = grid.dt();
    let l2h1 = (0..grid.steps).map(|n| dt * (traj_c.mid_c(n) - traj_i.mid_c(n)).norm_squared()).sum::<f64>().sqrt();
    let linf_l2 = (0..grid.nodes())
        .map(|n| ops.l2_norm_sq(&(&traj_c.c[n] - &traj_i.c[n])).sqrt())
        .fold(0.0, f64::max);
    let pres = (0..grid.nodes()).map(|n| (&traj_c.q[n] - &traj_i.q[n]).norm()).fold(0.0, f64::max);
    Ok(RowMetrics {
        err_vel_l2h1: l2h1,
        err_vel_linf_l2: linf_l2,
        err_pres_linf_l2: pres,
        x_alpha: x_alpha(ops, params, traj_c, traj_i)?,
        probe_deltas: weak_probe(ops, traj_c, traj_i, probes)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    /// A failed row is kept with its diagnostic.
    pub outcome: Result<RowMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation in log space.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub n_u: usize,
    pub n_p: usize,
    pub m_v: usize,
    pub spurious_pressure_modes: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub probes: usize,
    /// L = ρ₀(|u₀|² − |P_J u₀|²).
    pub x_limit: f64,
    /// ρ₀|u₀|².
    pub initial_energy: f64,
    /// ‖p₀ − p′(0)‖ after mean alignment.
    pub initial_pressure_gap: f64,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    VelL2H1,
    VelLinfL2,
    PresLinfL2,
    XAlpha,
    ProbeMax,
}

impl SweepResult {
    pub fn alphas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.alpha).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }

    /// Column for `metric` over the successful rows, with their α.
    pub fn column(&self, metric: Metric) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter_map(|r| {
                let m = r.outcome.as_ref().ok()?;
                let v = match metric {
                    Metric::VelL2H1 => m.err_vel_l2h1,
                    Metric::VelLinfL2 => m.err_vel_linf_l2,
                    Metric::PresLinfL2 => m.err_pres_linf_l2,
                    Metric::XAlpha => m.x_alpha,
                    Metric::ProbeMax => m.probe_max(),
                };
                Some((r.alpha, v))
            })
            .unzip()
    }

    pub fn fit(&self, metric: Metric) -> Result<RateFit, LabError> {
        let (a, e) = self.column(metric);
        fit_rate(&a, &e)
    }
}

/// Least-squares line through (log α, log err).
pub fn fit_rate(alphas: &[f64], errors: &[f64]) -> Result<RateFit, LabError> {
    if alphas.len() != errors.len() {
        return Err(LabError::Fit(format!("{} alphas vs {} errors", alphas.len(), errors.len())));
    }
    if alphas.len() < 3 {
        return Err(LabError::Fit(format!("need at least 3 points, got {}", alphas.len())));
    }
    if let Some(v) = alphas.iter().chain(errors).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(LabError::Fit(format!("entries must be positive and finite (got {v})")));
    }
    let n = alphas.len() as f64;
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::Fit("all alpha values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Everything a sweep shares across rows.
pub struct SweepSetup {
    pub spec: BasisSpec,
    pub ops: OperatorSet,
    pub z: SolenoidalBasis,
    pub base: CompressibleParams,
    pub reference: IncompressibleTrajectory,
    pub probes: Vec<Probe>,
}

impl SweepSetup {
    pub fn new(config: &SweepConfig) -> Result<Self, LabError> {
        config.validate()?;
        let spec = build_basis(config.n_u as i64, config.n_p as i64)?;
        let ops = assemble(&spec)?;
        let z = nullspace_basis(&ops)?;
        let dt = config.shared_dt();
        let mut base = resolve_params(&spec, &ops, Some(&z), &config.physics, &config.data, config.alpha_min(), dt)?;
        base.validate()?;
        let u0 = project_velocity(&spec, &base.u0)?;
        if config.kind.is_pressure() {
            let div = ops.divergence_residual(&u0.values);
            if div > crate::incompressible::SOLENOIDAL_TOL * u0.values.norm().max(1.0) {
                return Err(SolverError::NotSolenoidal(div).into());
            }
        }
        if config.kind == ExperimentKind::PressureStrong {
            // keep the configured mean, replace the rest by p′(0)
            let mean = project_pressure(&spec, &base.p0)?.mean();
            let mut p = compatible_p0(&spec, &ops, &z, &base)?;
            p.values[0] = mean;
            base.p0 = p.to_field(&spec);
        }
        let mean = project_pressure(&spec, &base.p0)?.mean();
        let reference = shift_pressure_mean(&simulate_incompressible(&spec, &ops, &z, &base)?, mean);
        let probes = probe_dictionary(&z, config.probes, config.seed);
        Ok(Self {
            spec,
            ops,
            z,
            base,
            reference,
            probes,
        })
    }

    pub fn params_for(&self, alpha: f64) -> CompressibleParams {
        CompressibleParams { alpha, ..self.base.clone() }
    }

    pub fn run_row(&self, alpha: f64) -> Result<RowMetrics, LabError> {
        let params = self.params_for(alpha);
        let traj = simulate_compressible(&self.spec, &self.ops, &params)?;
        row_metrics(&self.ops, &params, &traj, &self.reference, &self.probes)
    }
}

pub fn sweep_alpha(config: &SweepConfig) -> Result<SweepResult, LabError> {
    sweep_alpha_with(config, Execution::from_env(config.alphas.len()))
}

pub fn sweep_alpha_with(config: &SweepConfig, exec: Execution) -> Result<SweepResult, LabError> {
    let setup = SweepSetup::new(config)?;
    let SweepSetup { spec, ops, z, base, reference, .. } = &setup;

    let u0 = project_velocity(spec, &base.u0)?;
    let pj = leray_project(ops, &u0)?.solenoidal;
    let initial_energy = base.rho0 * ops.l2_norm_sq(&u0.values);
    let x_limit = initial_energy - base.rho0 * ops.l2_norm_sq(&pj.values);
    let p0 = project_pressure(spec, &base.p0)?;
    let initial_pressure_gap = (&p0.values - &reference.q[0]).norm();

    let outcomes = exec.map_ordered(&config.alphas, |&a| setup.run_row(a).map_err(|e| e.to_string()));
    let rows = config.alphas.iter().zip(outcomes).map(|(&alpha, outcome)| SweepRow { alpha, outcome }).collect();
    Ok(SweepResult {
        kind: config.kind,
        n_u: spec.n_u,
        n_p: spec.n_p,
        m_v: z.dim(),
        spurious_pressure_modes: ops.spurious_pressure_modes(),
        dt: base.grid().dt(),
        steps: base.grid().steps,
        seed: config.seed,
        probes: config.probes,
        x_limit,
        initial_energy,
        initial_pressure_gap,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_line() {
        let fit = fit_rate(&[1e-2, 1e-3, 1e-4], &[1e-1, 10f64.powf(-1.5), 1e-2]).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let flat = fit_rate(&[1e-1, 1e-2, 1e-3], &[3.0, 3.0, 3.0]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_rate(&[1e-1, 1e-2], &[1.0, 1.0]).is_err());
        assert!(fit_rate(&[1e-1, 1e-2, 1e-3], &[1.0, 0.0, 1.0]).is_err());
        assert!(fit_rate(&[1e-1, -1e-2, 1e-3], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [ExperimentKind::Weak, ExperimentKind::StrongVelocity, ExperimentKind::PressureWeak, ExperimentKind::PressureStrong] {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
    }

    #[test]
    fn default_alphas_are_half_decades() {
        for (i, a) in DEFAULT_ALPHAS.iter().enumerate() {
            assert!((a.log10() + 1.0 + 0.5 * i as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn probes_are_orthonormal_and_solenoidal() {
        let ops = assemble(&build_basis(5, 5).unwrap()).unwrap();
        let z = nullspace_basis(&ops).unwrap();
        let probes = probe_dictionary(&z, 8, 7);
        assert_eq!(probes, probe_dictionary(&z, 8, 7));
        for (i, p) in probes.iter().enumerate() {
            assert!(ops.divergence_residual(&p.v.values) < 1e-12);
            for (j, q) in probes.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((p.v.values.dot(&q.v.values) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::new(ExperimentKind::Weak, ProblemData::default());
        assert!(c.validate().is_ok());
        c.alphas = vec![1e-1, 1e-2];
        assert!(c.validate().is_err());
        c.alphas = vec![1e-1, 1e-2, 1e-1];
        assert!(c.validate().is_err());
        c.alphas = vec![1.5, 1e-2, 1e-3];
        assert!(c.validate().is_err());
    }
}
