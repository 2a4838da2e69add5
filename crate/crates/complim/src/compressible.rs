//! Crank–Nicolson integration of the compressible Galerkin system
//!
//!   α q̇      = σ(t) − ρ₀ B c
//!   ρ₀ M ċ   = Bᵀq − μ c − η E c + α G(t) q + F(t)
//!
//! with state x = (c, q), written D ẋ = K(t) x + r(t).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::basis::{project_pressure, project_velocity, BasisError, BasisSpec};
use crate::field::SampledField;
use crate::grid::TimeGrid;
use crate::inequality::{mixed_bounds, verify_mixed, CertificateReport, InequalityError, MixedConstants, Role, ScalarTrajectory};
use crate::operators::{OperatorError, OperatorSet};
use crate::source::{Coupling, Forcing, Target};

pub const STEP_RESIDUAL_TOL: f64 = 1e-9;
pub const LEDGER_TOL: f64 = 1e-6;
/// Poincaré constant of the unit square: |v| ≤ C_P ‖v‖ on H¹₀.
pub const POINCARE: f64 = 0.225_079_079_039_276_5; // 1/(π√2)

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("linear solve failed at step {step} (relative residual {residual:.3e})")]
    StepFailure { step: usize, residual: f64 },
    #[error("discrete solenoidal space is empty")]
    EmptyKernel,
    #[error("initial velocity is not discretely solenoidal (|Bc| = {0:.3e})")]
    NotSolenoidal(f64),
    #[error("trajectory does not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
}

/// Momentum source s in the weak form; `FromForce` is the homogeneous
/// problem's s = ρ₀ f.
#[derive(Debug, Clone)]
pub enum MomentumSource {
    Zero,
    FromForce,
    Field(SampledField),
}

#[derive(Debug, Clone)]
pub struct CompressibleParams {
    pub rho0: f64,
    pub mu: f64,
    pub eta: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub f: SampledField,
    pub sigma: SampledField,
    pub s: MomentumSource,
    pub u0: SampledField,
    pub p0: SampledField,
}

impl CompressibleParams {
    /// Unit physics, zero data, default dt for N_u.
    pub fn unit(alpha: f64, n_u: usize) -> Self {
        Self {
            rho0: 1.0,
            mu: 1.0,
            eta: 0.0,
            alpha,
            t_final: 1.0,
            dt: crate::grid::default_dt(1.0, alpha, n_u),
            f: SampledField::zero_vector(),
            sigma: SampledField::zero_scalar(),
            s: MomentumSource::FromForce,
            u0: SampledField::zero_vector(),
            p0: SampledField::zero_scalar(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let pos = [("rho0", self.rho0), ("mu", self.mu), ("alpha", self.alpha), ("T", self.t_final), ("dt", self.dt)];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidParams(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(SolverError::InvalidParams(format!("eta must be non-negative (got {})", self.eta)));
        }
        if self.dt > self.t_final {
            return Err(SolverError::InvalidParams(format!("dt = {} exceeds T = {}", self.dt, self.t_final)));
        }
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::from_dt(self.t_final, self.dt)
    }

    pub(crate) fn momentum_forcing<'a>(&'a self, spec: &'a BasisSpec) -> Result<Forcing<'a>, OperatorError> {
        match &self.s {
            MomentumSource::Zero => Ok(Forcing::zero(spec, Target::VelocityLoad)),
            MomentumSource::FromForce => Forcing::new(spec, &self.f, Target::VelocityLoad, self.rho0),
            MomentumSource::Field(s) => Forcing::new(spec, s, Target::VelocityLoad, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub rho0: f64,
    pub alpha: f64,
    pub c: Vec<DVector<f64>>,
    pub q: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.grid.nodes()).map(|n| self.grid.time(n)).collect()
    }

    pub fn energy(&self, ops: &OperatorSet, n: usize) -> f64 {
        0.5 * (self.rho0 * ops.l2_norm_sq(&self.c[n]) + self.alpha / self.rho0 * self.q[n].norm_squared())
    }

    pub fn h01_norm(&self, n: usize) -> f64 {
        self.c[n].norm()
    }

    pub fn div_norm(&self, ops: &OperatorSet, n: usize) -> f64 {
        ops.div_norm_sq(&self.c[n]).max(0.0).sqrt()
    }

    /// ∫ρ = ρ₀ + α·mean(p) on the unit square.
    pub fn mass(&self, n: usize) -> f64 {
        self.rho0 + self.alpha * self.q[n][0]
    }

    /// ρ = ρ₀ + α p at the given points.
    pub fn density(&self, spec: &BasisSpec, n: usize, points: &[[f64; 2]]) -> Result<Vec<f64>, BasisError> {
        let q = crate::basis::PressureCoeffs { values: self.q[n].clone() };
        let p = crate::basis::eval_pressure(spec, &q, points)?;
        Ok(p.into_iter().map(|v| self.rho0 + self.alpha * v).collect())
    }

    pub fn mid_c(&self, n: usize) -> DVector<f64> {
        (&self.c[n] + &self.c[n + 1]) * 0.5
    }

    pub fn mid_q(&self, n: usize) -> DVector<f64> {
        (&self.q[n] + &self.q[n + 1]) * 0.5
    }
}

pub fn mass_series(traj: &Trajectory) -> Vec<f64> {
    (0..traj.grid.nodes()).map(|n| traj.mass(n)).collect()
}

pub(crate) struct Model<'a> {
    ops: &'a OperatorSet,
    params: &'a CompressibleParams,
    pub load: Forcing<'a>,
    pub sigma: Forcing<'a>,
    pub coupling: Coupling<'a>,
}

impl<'a> Model<'a> {
    pub fn new(spec: &'a BasisSpec, ops: &'a OperatorSet, params: &'a CompressibleParams) -> Result<Self, SolverError> {
        params.validate()?;
        if ops.m_u != spec.m_u || ops.m_p != spec.m_p {
            return Err(SolverError::Mismatch("operator set built for a different basis".into()));
        }
        Ok(Self {
            ops,
            params,
            load: params.momentum_forcing(spec)?,
            sigma: Forcing::new(spec, &params.sigma, Target::Pressure, 1.0)?,
            coupling: Coupling::new(spec, &params.f)?,
        })
    }

    fn diag(&self) -> DVector<f64> {
        let (mu, mp) = (self.ops.m_u, self.ops.m_p);
        DVector::from_fn(mu + mp, |i, _| {
            if i < mu {
                self.params.rho0 * self.ops.mass[i]
            } else {
                self.params.alpha
            }
        })
    }

    fn k(&self, t: f64) -> DMatrix<f64> {
        let (mu, mp) = (self.ops.m_u, self.ops.m_p);
        let p = self.params;
        let mut k = DMatrix::zeros(mu + mp, mu + mp);
        k.view_mut((0, 0), (mu, mu)).copy_from(&(&self.ops.e * -p.eta));
        for i in 0..mu {
            k[(i, i)] -= p.mu;
        }
        let mut top_right = self.ops.b.transpose();
        if !self.coupling.is_zero() {
            top_right += self.coupling.at(t) * p.alpha;
        }
        k.view_mut((0, mu), (mu, mp)).copy_from(&top_right);
        k.view_mut((mu, 0), (mp, mu)).copy_from(&(&self.ops.b * -p.rho0));
        k
    }

    fn rhs(&self, t: f64) -> DVector<f64> {
        let mut r = DVector::zeros(self.ops.m_u + self.ops.m_p);
        if !self.load.is_zero() {
            r.rows_mut(0, self.ops.m_u).copy_from(&self.load.at(t));
        }
        if !self.sigma.is_zero() {
            r.rows_mut(self.ops.m_u, self.ops.m_p).copy_from(&self.sigma.at(t));
        }
        r
    }

    /// Power P(x, t) = dI/dt along the exact flow at state x.
    pub fn power(&self, c: &DVector<f64>, q: &DVector<f64>, t: f64) -> f64 {
        let p = self.params;
        let mut w = -p.mu * c.norm_squared() - p.eta * self.ops.div_norm_sq(c);
        if !self.coupling.is_zero() {
            w += p.alpha * c.dot(&(self.coupling.at(t) * q));
        }
        if !self.load.is_zero() {
            w += self.load.at(t).dot(c);
        }
        if !self.sigma.is_zero() {
            w += self.sigma.at(t).dot(q) / p.rho0;
        }
        w
    }
}

pub(crate) fn cn_step_matrices(d: &DVector<f64>, k: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = k * (-0.5 * dt);
    let mut r = k * (0.5 * dt);
    for i in 0..d.len() {
        a[(i, i)] += d[i];
        r[(i, i)] += d[i];
    }
    (a, r)
}

/// Solves A x = rhs and checks the relative residual.
pub(crate) fn checked_solve(
    a: &DMatrix<f64>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
    step: usize,
) -> Result<DVector<f64>, SolverError> {
    let x = lu.solve(rhs).ok_or(SolverError::StepFailure {
        step,
        residual: f64::INFINITY,
    })?;
    let scale = rhs.norm();
    let residual = if scale == 0.0 { x.norm() } else { (a * &x - rhs).norm() / scale };
    if !(residual <= STEP_RESIDUAL_TOL) {
        return Err(SolverError::StepFailure { step, residual });
    }
    Ok(x)
}

pub fn simulate_compressible(spec: &BasisSpec, ops: &OperatorSet, params: &CompressibleParams) -> Result<Trajectory, SolverError> {
    let model = Model::new(spec, ops, params)?;
    let c0 = project_velocity(spec, &params.u0)?.values;
    let q0 = project_pressure(spec, &params.p0)?.values;
    simulate_from(&model, params, c0, q0)
}

pub(crate) fn simulate_from(
    model: &Model<'_>,
    params: &CompressibleParams,
    c0: DVector<f64>,
    q0: DVector<f64>,
) -> Result<Trajectory, SolverError> {
    let ops = model.ops;
    let (mu, mp) = (ops.m_u, ops.m_p);
    let grid = params.grid();
    let dt = grid.dt();
    let d = model.diag();
    let varying = model.coupling.is_time_dependent();

    let mut x = DVector::zeros(mu + mp);
    x.rows_mut(0, mu).copy_from(&c0);
    x.rows_mut(mu, mp).copy_from(&q0);

    let mut k_prev = model.k(0.0);
    let (mut a, mut r) = cn_step_matrices(&d, &k_prev, dt);
    let mut lu = a.clone().lu();
    let mut rhs_prev = model.rhs(0.0);
    let forced = !model.load.is_zero() || !model.sigma.is_zero();

    let mut c = Vec::with_capacity(grid.nodes());
    let mut q = Vec::with_capacity(grid.nodes());
    c.push(c0);
    q.push(q0);
    for n in 0..grid.steps {
        let t1 = grid.time(n + 1);
        if varying {
            let k_next = model.k(t1);
            a = cn_step_matrices(&d, &k_next, dt).0;
            r = cn_step_matrices(&d, &k_prev, dt).1;
            lu = a.clone().lu();
            k_prev = k_next;
        }
        let mut rhs = &r * &x;
        if forced {
            let rhs_next = model.rhs(t1);
            rhs += (&rhs_prev + &rhs_next) * (0.5 * dt);
            rhs_prev = rhs_next;
        }
        x = checked_solve(&a, &lu, &rhs, n)?;
        c.push(x.rows(0, mu).into_owned());
        q.push(x.rows(mu, mp).into_owned());
    }
    Ok(Trajectory {
        grid,
        rho0: params.rho0,
        alpha: params.alpha,
        c,
        q,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// I(t_n) at every node.
    pub energy: Vec<f64>,
    /// Residual of the energy balance on each interval.
    pub per_step: Vec<f64>,
    /// Σ of per-step residuals up to each node (0 at t₀).
    pub cumulative: Vec<f64>,
    /// ∫₀^{t_n} (μ‖u‖² + η|div u|²).
    pub dissipation: Vec<f64>,
    /// ∫₀^{t_n} of the work terms.
    pub work: Vec<f64>,
}

impl EnergyLedger {
    pub fn max_abs_cumulative(&self) -> f64 {
        self.cumulative.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_per_step(&self) -> f64 {
        self.per_step.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn within_tolerance(&self) -> bool {
        self.max_abs_cumulative() <= LEDGER_TOL
    }

    pub(crate) fn from_terms(energy: Vec<f64>, terms: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut per_step = Vec::new();
        let (mut cumulative, mut dissipation, mut work) = (vec![0.0], vec![0.0], vec![0.0]);
        for (n, (diss, w)) in terms.enumerate() {
            let res = energy[n + 1] - energy[n] + diss - w;
            per_step.push(res);
            cumulative.push(cumulative[n] + res);
            dissipation.push(dissipation[n] + diss);
            work.push(work[n] + w);
        }
        Self {
            energy,
            per_step,
            cumulative,
            dissipation,
            work,
        }
    }
}

fn check_traj(ops: &OperatorSet, params: &CompressibleParams, traj: &Trajectory) -> Result<(), SolverError> {
    if traj.grid != params.grid() {
        return Err(SolverError::Mismatch("time grid differs from params".into()));
    }
    if traj.c.first().is_some_and(|c| c.len() != ops.m_u) || traj.q.first().is_some_and(|q| q.len() != ops.m_p) {
        return Err(SolverError::Mismatch("coefficient dimensions differ from operator set".into()));
    }
    if traj.c.len() != traj.grid.nodes() || traj.q.len() != traj.grid.nodes() {
        return Err(SolverError::Mismatch("node count".into()));
    }
    Ok(())
}

/// Energy balance per interval with midpoint state and midpoint-time data:
/// ΔI + dt(μ‖ū‖² + η|div ū|²) − dt[(α p̄ f, ū) + ⟨s, ū⟩ + (σ, p̄)/ρ₀].
pub fn energy_ledger(spec: &BasisSpec, ops: &OperatorSet, params: &CompressibleParams, traj: &Trajectory) -> Result<EnergyLedger, SolverError> {
    check_traj(ops, params, traj)?;
    let model = Model::new(spec, ops, params)?;
    let grid = traj.grid;
    let dt = grid.dt();
    let energy: Vec<f64> = (0..grid.nodes()).map(|n| traj.energy(ops, n)).collect();
    let terms = (0..grid.steps).map(|n| {
        let (c, q) = (traj.mid_c(n), traj.mid_q(n));
        let diss = dt * (params.mu * c.norm_squared() + params.eta * ops.div_norm_sq(&c));
        let total = dt * model.power(&c, &q, grid.midpoint(n));
        (diss, total + diss)
    });
    Ok(EnergyLedger::from_terms(energy, terms))
}

/// The lemma's (I, J, a, b, c) read off a compressible run.  I at nodes;
/// J, b, c at interval midpoints (J from the midpoint state); a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaInstrumentation {
    pub i: ScalarTrajectory,
    pub j: ScalarTrajectory,
    pub a: ScalarTrajectory,
    pub b: ScalarTrajectory,
    pub c: ScalarTrajectory,
    pub f_sup: f64,
}

pub fn instrument(spec: &BasisSpec, ops: &OperatorSet, params: &CompressibleParams, traj: &Trajectory) -> Result<LemmaInstrumentation, SolverError> {
    check_traj(ops, params, traj)?;
    let model = Model::new(spec, ops, params)?;
    let grid = traj.grid;
    let t = grid.t_final;
    let f_sup = params.f.sup_norm(t);
    let sq_mu = params.mu.sqrt();
    let energy = (0..grid.nodes()).map(|n| traj.energy(ops, n)).collect();
    let j = (0..grid.steps).map(|n| sq_mu * traj.mid_c(n).norm()).collect();
    let b = (0..grid.steps).map(|n| model.load.at(grid.midpoint(n)).norm() / sq_mu).collect();
    let c = (0..grid.steps)
        .map(|n| model.sigma.at(grid.midpoint(n)).norm_squared() / (2.0 * params.rho0 * params.alpha))
        .collect();
    Ok(LemmaInstrumentation {
        i: ScalarTrajectory::nodes(Role::I, t, energy)?,
        j: ScalarTrajectory::midpoints(Role::J, t, j)?,
        a: ScalarTrajectory::constant(Role::A, t, grid.steps, 1.0 + params.alpha.sqrt() * f_sup)?,
        b: ScalarTrajectory::midpoints(Role::B, t, b)?,
        c: ScalarTrajectory::midpoints(Role::C, t, c)?,
        f_sup,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// E = |u₀| + √α|p₀| + ‖σ‖_{L²L²}/√α + ‖s‖_{L²H⁻¹}
    pub data_norm: f64,
    pub constants: MixedConstants,
    pub c_f_alpha: f64,
    pub c_f_alpha_tilde: f64,
    /// ‖u‖_{L²H¹₀} + ‖u‖_{L∞L²} + √α‖p‖_{L∞L²}
    pub est1_lhs: f64,
    /// Same quantity bounded through the lemma with the actual a, b, c.
    pub est1_chain: f64,
    /// C_{f,α}·E
    pub est1_rhs: f64,
    /// ‖u‖_{L²H¹₀} + ‖u_t‖_{L²H⁻¹}
    pub est2_lhs: f64,
    /// C̃_{f,α}·E/√α
    pub est2_rhs: f64,
    pub certificate: CertificateReport,
}

fn leq(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + 1e-12) + 1e-300
}

impl EstimateReport {
    pub fn est1_holds(&self) -> bool {
        leq(self.est1_lhs, self.est1_chain) && leq(self.est1_chain, self.est1_rhs)
    }

    pub fn est2_holds(&self) -> bool {
        leq(self.est2_lhs, self.est2_rhs)
    }

    pub fn holds(&self) -> bool {
        self.est1_holds() && self.est2_holds() && self.certificate.passed()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !leq(self.est1_lhs, self.est1_chain) {
            v.push(format!("est1: lhs {:.6e} > lemma chain {:.6e}", self.est1_lhs, self.est1_chain));
        }
        if !leq(self.est1_chain, self.est1_rhs) {
            v.push(format!("est1: chain {:.6e} > C·E {:.6e}", self.est1_chain, self.est1_rhs));
        }
        if !self.est2_holds() {
            v.push(format!("est2: lhs {:.6e} > rhs {:.6e}", self.est2_lhs, self.est2_rhs));
        }
        if !self.certificate.passed() {
            v.push(format!("lemma certificate failed: {:?}", self.certificate));
        }
        v
    }
}

/// Evaluates both a-priori estimates along a trajectory with the explicit
/// constant chain (a = 1 + √α‖f‖∞, b = ‖s‖/√μ, c = |σ|²/(2ρ₀α)).
pub fn apriori_check(spec: &BasisSpec, ops: &OperatorSet, params: &CompressibleParams, traj: &Trajectory) -> Result<EstimateReport, SolverError> {
    let ins = instrument(spec, ops, params, traj)?;
    let model = Model::new(spec, ops, params)?;
    let grid = traj.grid;
    let (rho0, mu, alpha, t_final) = (params.rho0, params.mu, params.alpha, grid.t_final);
    let sa = alpha.sqrt();
    let dt = grid.dt();

    // data norm, time integrals by the midpoint rule
    let sigma_l2 = (0..grid.steps).map(|n| dt * model.sigma.at(grid.midpoint(n)).norm_squared()).sum::<f64>().sqrt();
    let s_l2 = (0..grid.steps).map(|n| dt * model.load.at(grid.midpoint(n)).norm_squared()).sum::<f64>().sqrt();
    let data_norm = ops.l2_norm_sq(&traj.c[0]).sqrt() + sa * traj.q[0].norm() + sigma_l2 / sa + s_l2;

    let bounds = mixed_bounds(ins.i.values[0], &ins.a, &ins.b, &ins.c)?;
    let k = bounds.constants;
    let tail = (2.0 / rho0).sqrt() + (2.0 * rho0).sqrt();
    let kappa = (rho0 / 2.0).sqrt().max(1.0 / (2.0 * rho0).sqrt()).max(1.0 / mu.sqrt());
    let c_f_alpha = k.c_a * kappa / mu.sqrt() + tail * k.c_a_tilde.sqrt() * kappa;

    let u_l2h1 = ins.j.l2() / mu.sqrt();
    let u_linf = traj.c.iter().map(|c| ops.l2_norm_sq(c).sqrt()).fold(0.0, f64::max);
    let p_linf = traj.q.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let est1_lhs = u_l2h1 + u_linf + sa * p_linf;
    let est1_chain = bounds.j_l2_bound / mu.sqrt() + tail * bounds.i_inf_bound.sqrt();

    // ‖u_t‖_{H⁻¹} = |M ċ| with ρ₀Mċ from the ODE right side at the midpoint state
    let bt = ops.b.transpose();
    let ut_sq: f64 = (0..grid.steps)
        .map(|n| {
            let (c, q) = (traj.mid_c(n), traj.mid_q(n));
            let tm = grid.midpoint(n);
            let mut g = &bt * &q - &c * params.mu - (&ops.e * &c) * params.eta;
            if !model.coupling.is_zero() {
                g += model.coupling.at(tm) * &q * alpha;
            }
            if !model.load.is_zero() {
                g += model.load.at(tm);
            }
            dt * (g.norm() / rho0).powi(2)
        })
        .sum();
    let est2_lhs = u_l2h1 + ut_sq.sqrt();
    let c = c_f_alpha;
    let c_f_alpha_tilde = sa * c
        + (t_final.sqrt() * (1.0 + alpha * ins.f_sup * POINCARE) * c + sa * ((params.mu + params.eta) * c + 1.0)) / rho0;

    let certificate = verify_mixed(&ins.i, &ins.j, &ins.a, &ins.b, &ins.c)?;
    Ok(EstimateReport {
        data_norm,
        constants: k,
        c_f_alpha,
        c_f_alpha_tilde,
        est1_lhs,
        est1_chain,
        est1_rhs: c_f_alpha * data_norm,
        est2_lhs,
        est2_rhs: c_f_alpha_tilde * data_norm / sa,
        certificate,
    })
}
