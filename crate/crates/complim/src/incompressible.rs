//! Nonsteady Stokes in the discrete solenoidal space ker B.
//!
//! Z is M-orthonormal and rotated so ZᵀZ is diagonal with ascending
//! entries: column k is the k-th discrete Stokes eigenmode, and the reduced
//! system ρ₀ ẏ + μ ZᵀZ y = ZᵀF decouples.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::{project_velocity, BasisSpec, PressureCoeffs, VelocityCoeffs};
use crate::compressible::{checked_solve, CompressibleParams, EnergyLedger, SolverError};
use crate::grid::TimeGrid;
use crate::operators::{grad_inverse_scaled, leray_project, OperatorSet};
use crate::source::Forcing;

pub const SOLENOIDAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidalBasis {
    /// m_u × m_V, ZᵀMZ = I.
    pub z: DMatrix<f64>,
    /// Diagonal of ZᵀZ, ascending (discrete Stokes eigenvalues for μ = ρ₀ = 1).
    pub stokes_eigenvalues: DVector<f64>,
}

impl SolenoidalBasis {
    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// Reduced coordinates of a solenoidal c: y = ZᵀMc.
    pub fn reduce(&self, ops: &OperatorSet, c: &DVector<f64>) -> DVector<f64> {
        self.z.transpose() * ops.mass_apply(c)
    }

    pub fn column(&self, k: usize) -> VelocityCoeffs {
        VelocityCoeffs {
            values: self.z.column(k).into_owned(),
        }
    }
}

pub fn nullspace_basis(ops: &OperatorSet) -> Result<SolenoidalBasis, SolverError> {
    let k = ops.kernel();
    let m_v = k.ncols();
    if m_v == 0 {
        return Err(SolverError::EmptyKernel);
    }
    // S = KᵀMK = QΛQᵀ, Z = K Q Λ^{-1/2}: ZᵀMZ = I, ZᵀZ = Λ⁻¹
    let mk = DMatrix::from_fn(ops.m_u, m_v, |r, c| ops.mass[r] * k[(r, c)]);
    let s = k.transpose() * mk;
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..m_v).collect();
    // ascending Stokes eigenvalue = descending Λ
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut z = DMatrix::zeros(ops.m_u, m_v);
    let mut lam = DVector::zeros(m_v);
    for (col, &src) in order.iter().enumerate() {
        let ev = eig.eigenvalues[src];
        let mut v = (k * eig.eigenvectors.column(src)) / ev.sqrt();
        // sign: the largest-magnitude entry (first on ties) is positive
        let amax = v.amax();
        let pivot = v.iter().position(|x| x.abs() >= amax * (1.0 - 1e-9)).unwrap_or(0);
        if v[pivot] < 0.0 {
            v = -v;
        }
        z.set_column(col, &v);
        lam[col] = 1.0 / ev;
    }
    Ok(SolenoidalBasis {
        z,
        stokes_eigenvalues: lam,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncompressibleTrajectory {
    pub grid: TimeGrid,
    pub rho0: f64,
    pub y: Vec<DVector<f64>>,
    /// c = Z y at every node.
    pub c: Vec<DVector<f64>>,
    /// Recovered pressure (mean-zero unless shifted).
    pub q: Vec<DVector<f64>>,
}

impl IncompressibleTrajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.grid.nodes()).map(|n| self.grid.time(n)).collect()
    }

    pub fn energy(&self, ops: &OperatorSet, n: usize) -> f64 {
        0.5 * self.rho0 * ops.l2_norm_sq(&self.c[n])
    }

    pub fn mid_c(&self, n: usize) -> DVector<f64> {
        (&self.c[n] + &self.c[n + 1]) * 0.5
    }
}

struct Stokes<'a> {
    ops: &'a OperatorSet,
    z: &'a SolenoidalBasis,
    rho0: f64,
    mu: f64,
}

impl Stokes<'_> {
    /// Bᵀq = ρ₀Mċ + μc − F with ċ from the reduced ODE right side.
    fn pressure(&self, y: &DVector<f64>, c: &DVector<f64>, load: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
        let zt_f = self.z.z.transpose() * load;
        let ydot = (zt_f - y.component_mul(&self.z.stokes_eigenvalues) * self.mu) / self.rho0;
        let cdot = &self.z.z * ydot;
        let inertia = self.ops.mass_apply(&cdot) * self.rho0;
        let scale = load.norm() + inertia.norm() + self.mu * c.norm();
        let g = load - inertia - c * self.mu;
        Ok(grad_inverse_scaled(self.ops, &g, scale)?.values)
    }
}

/// p′(0) = ∇⁻¹ of the t = 0 momentum residual for a solenoidal u′₀.
pub fn initial_pressure(
    ops: &OperatorSet,
    z: &SolenoidalBasis,
    rho0: f64,
    mu: f64,
    u0: &VelocityCoeffs,
    load0: &DVector<f64>,
) -> Result<PressureCoeffs, SolverError> {
    let div = ops.divergence_residual(&u0.values);
    if div > SOLENOIDAL_TOL * u0.values.norm().max(1.0) {
        return Err(SolverError::NotSolenoidal(div));
    }
    let st = Stokes { ops, z, rho0, mu };
    let y = z.reduce(ops, &u0.values);
    Ok(PressureCoeffs {
        values: st.pressure(&y, &u0.values, load0)?,
    })
}

/// Initial pressure for P_J(u₀) and the momentum source of `params` at t = 0.
pub fn initial_pressure_for(spec: &BasisSpec, ops: &OperatorSet, z: &SolenoidalBasis, params: &CompressibleParams) -> Result<PressureCoeffs, SolverError> {
    let u0 = leray_project(ops, &project_velocity(spec, &params.u0)?)?.solenoidal;
    let load = params.momentum_forcing(spec)?.at(0.0);
    initial_pressure(ops, z, params.rho0, params.mu, &u0, &load)
}

pub fn simulate_incompressible(
    spec: &BasisSpec,
    ops: &OperatorSet,
    z: &SolenoidalBasis,
    params: &CompressibleParams,
) -> Result<IncompressibleTrajectory, SolverError> {
    params.validate()?;
    let c0 = leray_project(ops, &project_velocity(spec, &params.u0)?)?.solenoidal.values;
    let load = params.momentum_forcing(spec)?;
    simulate_reduced(ops, z, params, z.reduce(ops, &c0), &load)
}

fn simulate_reduced(
    ops: &OperatorSet,
    z: &SolenoidalBasis,
    params: &CompressibleParams,
    y0: DVector<f64>,
    load: &Forcing<'_>,
) -> Result<IncompressibleTrajectory, SolverError> {
    let grid = params.grid();
    let dt = grid.dt();
    let m_v = z.dim();
    let lam = &z.stokes_eigenvalues;
    let a = DMatrix::from_fn(m_v, m_v, |i, j| if i == j { params.rho0 + 0.5 * dt * params.mu * lam[i] } else { 0.0 });
    let r = DVector::from_fn(m_v, |i, _| params.rho0 - 0.5 * dt * params.mu * lam[i]);
    let lu = a.clone().lu();
    let st = Stokes {
        ops,
        z,
        rho0: params.rho0,
        mu: params.mu,
    };
    let zt = z.z.transpose();

    let mut f_prev = load.at(0.0);
    let mut y = y0;
    let mut out_y = Vec::with_capacity(grid.nodes());
    let mut out_c = Vec::with_capacity(grid.nodes());
    let mut out_q = Vec::with_capacity(grid.nodes());
    let c = &z.z * &y;
    out_q.push(st.pressure(&y, &c, &f_prev)?);
    out_c.push(c);
    out_y.push(y.clone());
    for n in 0..grid.steps {
        let f_next = if load.is_time_dependent() { load.at(grid.time(n + 1)) } else { f_prev.clone() };
        let mut rhs = r.component_mul(&y);
        if !load.is_zero() {
            rhs += &zt * (&f_prev + &f_next) * (0.5 * dt);
        }
        y = checked_solve(&a, &lu, &rhs, n)?;
        let c = &z.z * &y;
        out_q.push(st.pressure(&y, &c, &f_next)?);
        out_c.push(c);
        out_y.push(y.clone());
        f_prev = f_next;
    }
    Ok(IncompressibleTrajectory {
        grid,
        rho0: params.rho0,
        y: out_y,
        c: out_c,
        q: out_q,
    })
}

/// Sets the pressure mean (entry 0) to `a` at every node.
pub fn shift_pressure_mean(traj: &IncompressibleTrajectory, a: f64) -> IncompressibleTrajectory {
    let mut out = traj.clone();
    for q in &mut out.q {
        q[0] = a;
    }
    out
}

/// ½ρ₀|u′|² balance per interval: ΔI + dt μ‖ū‖² − dt⟨s(t_{n+½}), ū⟩.
pub fn incompressible_energy_ledger(
    spec: &BasisSpec,
    ops: &OperatorSet,
    params: &CompressibleParams,
    traj: &IncompressibleTrajectory,
) -> Result<EnergyLedger, SolverError> {
    if traj.grid != params.grid() {
        return Err(SolverError::Mismatch("time grid differs from params".into()));
    }
    let load = params.momentum_forcing(spec)?;
    let grid = traj.grid;
    let dt = grid.dt();
    let energy = (0..grid.nodes()).map(|n| traj.energy(ops, n)).collect();
    let terms = (0..grid.steps).map(|n| {
        let c = traj.mid_c(n);
        let diss = dt * params.mu * c.norm_squared();
        let work = if load.is_zero() { 0.0 } else { dt * load.at(grid.midpoint(n)).dot(&c) };
        (diss, work)
    });
    Ok(EnergyLedger::from_terms(energy, terms))
}
