//! Named data fields and resolution of a problem description into solver
//! parameters. Presets are built from the discrete operators, so they are
//! exact members of the discrete spaces they claim to live in.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::basis::{project_velocity, BasisSpec, PressureCoeffs, VelocityCoeffs};
use crate::compressible::{CompressibleParams, MomentumSource, SolverError};
use crate::field::{SampledField, Shape, TimeFactor};
use crate::incompressible::{initial_pressure, SolenoidalBasis};
use crate::operators::{leray_project, OperatorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Unit-L² discrete gradient of the (1,0) pressure mode.
    GradientU0,
    /// First discrete Stokes eigenmode, unit L².
    SolenoidalU0,
    /// GradientU0 + SolenoidalU0.
    MixedU0,
    /// p′(0) for the configured u₀ and f: the compatible initial pressure.
    CompatibleP0,
    /// 0.3 + (1,1) + 0.5·(0,2) cosine modes; generally incompatible.
    GenericP0,
    /// f = (μ c_s − Bᵀ q_s)/ρ₀ with c_s = SolenoidalU0 and q_s the (1,0)
    /// pressure mode: (c_s, q_s) is a steady Stokes solution.
    StokesSteadyF,
}

pub const PRESET_NAMES: [&str; 6] = ["gradient_u0", "solenoidal_u0", "mixed_u0", "compatible_p0", "generic_p0", "stokes_steady_f"];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::GradientU0 => "gradient_u0",
            Preset::SolenoidalU0 => "solenoidal_u0",
            Preset::MixedU0 => "mixed_u0",
            Preset::CompatibleP0 => "compatible_p0",
            Preset::GenericP0 => "generic_p0",
            Preset::StokesSteadyF => "stokes_steady_f",
        }
    }

    pub fn shape(self) -> Shape {
        match self {
            Preset::CompatibleP0 | Preset::GenericP0 => Shape::Scalar,
            _ => Shape::Vector,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "gradient_u0" => Preset::GradientU0,
            "solenoidal_u0" => Preset::SolenoidalU0,
            "mixed_u0" => Preset::MixedU0,
            "compatible_p0" => Preset::CompatibleP0,
            "generic_p0" => Preset::GenericP0,
            "stokes_steady_f" => Preset::StokesSteadyF,
            _ => return Err(format!("unknown preset `{s}`")),
        })
    }
}

pub fn gradient_u0(spec: &BasisSpec, ops: &OperatorSet) -> Result<VelocityCoeffs, SolverError> {
    if spec.n_p < 1 {
        return Err(SolverError::InvalidParams("gradient_u0 needs N_p >= 1".into()));
    }
    let g = ops.discrete_gradient(&PressureCoeffs::unit(spec, 1, 0))?;
    let norm = ops.l2_norm_sq(&g.values).sqrt();
    Ok(VelocityCoeffs { values: g.values / norm })
}

pub fn solenoidal_u0(z: &SolenoidalBasis) -> VelocityCoeffs {
    z.column(0)
}

pub fn mixed_u0(spec: &BasisSpec, ops: &OperatorSet, z: &SolenoidalBasis) -> Result<VelocityCoeffs, SolverError> {
    Ok(VelocityCoeffs {
        values: gradient_u0(spec, ops)?.values + solenoidal_u0(z).values,
    })
}

pub fn generic_p0(spec: &BasisSpec) -> Result<PressureCoeffs, SolverError> {
    if spec.n_p < 2 {
        return Err(SolverError::InvalidParams("generic_p0 needs N_p >= 2".into()));
    }
    let mut p = PressureCoeffs::zeros(spec);
    p.values[0] = 0.3;
    p.values[spec.pressure_flat(1, 1)] = 1.0;
    p.values[spec.pressure_flat(0, 2)] = 0.5;
    Ok(p)
}

/// Force coefficients d in the velocity basis; the load ρ₀Md equals μc_s − Bᵀq_s.
pub fn stokes_steady_f(spec: &BasisSpec, ops: &OperatorSet, z: &SolenoidalBasis, rho0: f64, mu: f64) -> Result<VelocityCoeffs, SolverError> {
    let cs = solenoidal_u0(z).values;
    let qs = PressureCoeffs::unit(spec, 1, 0).values;
    let load = cs * mu - ops.b.transpose() * qs;
    Ok(VelocityCoeffs {
        values: ops.mass_solve(&load) / rho0,
    })
}

#[derive(Debug, Clone)]
pub enum Source {
    Preset(Preset),
    Field(SampledField),
}

/// A data slot: a preset or a field, with an optional separable time factor.
#[derive(Debug, Clone)]
pub struct Datum {
    pub source: Source,
    pub time: Option<TimeFactor>,
}

impl Datum {
    pub fn field(f: SampledField) -> Self {
        Self {
            source: Source::Field(f),
            time: None,
        }
    }

    pub fn preset(p: Preset) -> Self {
        Self {
            source: Source::Preset(p),
            time: None,
        }
    }

    pub fn zero(shape: Shape) -> Self {
        Self::field(match shape {
            Shape::Scalar => SampledField::zero_scalar(),
            Shape::Vector => SampledField::zero_vector(),
        })
    }

    pub fn with_time(mut self, g: TimeFactor) -> Self {
        self.time = Some(g);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub rho0: f64,
    pub mu: f64,
    pub eta: f64,
    pub t_final: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            mu: 1.0,
            eta: 0.0,
            t_final: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemData {
    pub u0: Datum,
    pub p0: Datum,
    pub f: Datum,
    pub sigma: Datum,
    /// None: s = ρ₀ f.
    pub s: Option<Datum>,
}

impl Default for ProblemData {
    fn default() -> Self {
        Self {
            u0: Datum::zero(Shape::Vector),
            p0: Datum::zero(Shape::Scalar),
            f: Datum::zero(Shape::Vector),
            sigma: Datum::zero(Shape::Scalar),
            s: None,
        }
    }
}

fn check_slot(slot: &str, d: &Datum, shape: Shape) -> Result<(), SolverError> {
    let got = match &d.source {
        Source::Preset(p) => p.shape(),
        Source::Field(f) => f.shape(),
    };
    if got != shape {
        return Err(SolverError::InvalidParams(format!("{slot}: expected a {shape:?} field, got {got:?}")));
    }
    Ok(())
}

fn timed(f: SampledField, d: &Datum) -> SampledField {
    match &d.time {
        Some(g) => f.with_time(g.clone()),
        None => f,
    }
}

/// Resolves every slot into concrete fields. `compatible_p0` is computed last,
/// from the resolved u₀ (Leray-projected) and the momentum source at t = 0.
pub fn resolve_params(
    spec: &BasisSpec,
    ops: &OperatorSet,
    z: Option<&SolenoidalBasis>,
    physics: &Physics,
    data: &ProblemData,
    alpha: f64,
    dt: f64,
) -> Result<CompressibleParams, SolverError> {
    let need_z = || z.ok_or(SolverError::EmptyKernel);
    check_slot("u0", &data.u0, Shape::Vector)?;
    check_slot("p0", &data.p0, Shape::Scalar)?;
    check_slot("f", &data.f, Shape::Vector)?;
    check_slot("sigma", &data.sigma, Shape::Scalar)?;
    if let Some(s) = &data.s {
        check_slot("s", s, Shape::Vector)?;
    }
    let vector = |slot: &str, d: &Datum| -> Result<SampledField, SolverError> {
        let f = match &d.source {
            Source::Field(f) => f.clone(),
            Source::Preset(p) => {
                let c = match p {
                    Preset::GradientU0 => gradient_u0(spec, ops)?,
                    Preset::SolenoidalU0 => solenoidal_u0(need_z()?),
                    Preset::MixedU0 => mixed_u0(spec, ops, need_z()?)?,
                    Preset::StokesSteadyF => stokes_steady_f(spec, ops, need_z()?, physics.rho0, physics.mu)?,
                    _ => return Err(SolverError::InvalidParams(format!("{slot}: preset {p} is not a velocity field"))),
                };
                c.to_field(spec)
            }
        };
        Ok(timed(f, d))
    };
    let u0 = vector("u0", &data.u0)?;
    let f = vector("f", &data.f)?;
    let s = match &data.s {
        None => MomentumSource::FromForce,
        Some(d) => MomentumSource::Field(vector("s", d)?),
    };
    let sigma = match &data.sigma.source {
        Source::Field(g) => timed(g.clone(), &data.sigma),
        Source::Preset(p) => return Err(SolverError::InvalidParams(format!("sigma: preset {p} is not a density source"))),
    };
    let mut params = CompressibleParams {
        rho0: physics.rho0,
        mu: physics.mu,
        eta: physics.eta,
        alpha,
        t_final: physics.t_final,
        dt,
        f,
        sigma,
        s,
        u0,
        p0: SampledField::zero_scalar(),
    };
    params.p0 = match &data.p0.source {
        Source::Field(g) => timed(g.clone(), &data.p0),
        Source::Preset(Preset::GenericP0) => generic_p0(spec)?.to_field(spec),
        Source::Preset(Preset::CompatibleP0) => compatible_p0(spec, ops, need_z()?, &params)?.to_field(spec),
        Source::Preset(p) => return Err(SolverError::InvalidParams(format!("p0: preset {p} is not a pressure field"))),
    };
    Ok(params)
}

/// p′(0) for P_J u₀ and s(0); mean zero.
pub fn compatible_p0(spec: &BasisSpec, ops: &OperatorSet, z: &SolenoidalBasis, params: &CompressibleParams) -> Result<PressureCoeffs, SolverError> {
    let u0 = leray_project(ops, &project_velocity(spec, &params.u0)?)?.solenoidal;
    let load: DVector<f64> = params.momentum_forcing(spec)?.at(0.0);
    initial_pressure(ops, z, params.rho0, params.mu, &u0, &load)
}
