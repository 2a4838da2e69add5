//! Time-dependent right-hand sides projected onto the Galerkin spans.

use nalgebra::{DMatrix, DVector};

use crate::basis::{load_vector_at, project_pressure_at, BasisError, BasisSpec};
use crate::field::{SampledField, Shape, TimeFactor};
use crate::operators::{coupling_matrix_at, OperatorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    /// g_i = (field, e_i)
    VelocityLoad,
    /// σ_k = (field, ψ_k)
    Pressure,
}

#[derive(Debug, Clone)]
enum Profile<T> {
    Zero,
    Static(T),
    Separable(T, TimeFactor),
    General,
}

fn scale_by<T: std::ops::Mul<f64, Output = T>>(v: T, k: f64) -> T {
    v * k
}

fn profile_of<T: std::ops::Mul<f64, Output = T>>(field: &SampledField, project: impl Fn(&SampledField) -> Result<T, OperatorError>) -> Result<Profile<T>, OperatorError> {
    if field.is_zero() {
        return Ok(Profile::Zero);
    }
    if field.spatial_depends_on_time() {
        return Ok(Profile::General);
    }
    let spatial = SampledField {
        spatial: field.spatial.clone(),
        time: None,
    };
    let base = project(&spatial)?;
    Ok(match &field.time {
        Some(g) if !g.is_constant() => Profile::Separable(base, g.clone()),
        // constant factor: fold it in
        Some(g) => Profile::Static(scale_by(base, g.eval(0.0))),
        None => Profile::Static(base),
    })
}

/// A projected forcing vector t ↦ scale · P(field(·, t)).
#[derive(Debug, Clone)]
pub(crate) struct Forcing<'a> {
    spec: &'a BasisSpec,
    field: Option<&'a SampledField>,
    target: Target,
    scale: f64,
    profile: Profile<DVector<f64>>,
    dim: usize,
}

impl<'a> Forcing<'a> {
    pub fn zero(spec: &'a BasisSpec, target: Target) -> Self {
        let dim = match target {
            Target::VelocityLoad => spec.m_u,
            Target::Pressure => spec.m_p,
        };
        Self {
            spec,
            field: None,
            target,
            scale: 0.0,
            profile: Profile::Zero,
            dim,
        }
    }

    pub fn new(spec: &'a BasisSpec, field: &'a SampledField, target: Target, scale: f64) -> Result<Self, OperatorError> {
        let expected = expected_shape(target);
        if field.shape() != expected {
            return Err(BasisError::Shape {
                expected,
                got: field.shape(),
            }
            .into());
        }
        let mut out = Self::zero(spec, target);
        out.profile = if scale == 0.0 {
            Profile::Zero
        } else {
            profile_of(field, |f| Ok(project_once(spec, f, target, 0.0)?))?
        };
        out.field = Some(field);
        out.scale = scale;
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, Profile::Zero)
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.profile, Profile::Separable(..) | Profile::General)
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match &self.profile {
            Profile::Zero => DVector::zeros(self.dim),
            Profile::Static(v) => v * self.scale,
            Profile::Separable(v, g) => v * (self.scale * g.eval(t)),
            Profile::General => {
                let f = self.field.expect("general profile has a field");
                project_once(self.spec, f, self.target, t).expect("shape validated at construction") * self.scale
            }
        }
    }
}

fn expected_shape(target: Target) -> Shape {
    match target {
        Target::VelocityLoad => Shape::Vector,
        Target::Pressure => Shape::Scalar,
    }
}

fn project_once(spec: &BasisSpec, f: &SampledField, target: Target, t: f64) -> Result<DVector<f64>, BasisError> {
    match target {
        Target::VelocityLoad => load_vector_at(spec, f, t),
        Target::Pressure => Ok(project_pressure_at(spec, f, t)?.values),
    }
}

/// t ↦ G(f(·, t)).
#[derive(Debug, Clone)]
pub(crate) struct Coupling<'a> {
    spec: &'a BasisSpec,
    field: &'a SampledField,
    profile: Profile<DMatrix<f64>>,
}

impl<'a> Coupling<'a> {
    pub fn new(spec: &'a BasisSpec, field: &'a SampledField) -> Result<Self, OperatorError> {
        if field.shape() != Shape::Vector {
            return Err(BasisError::Shape {
                expected: Shape::Vector,
                got: field.shape(),
            }
            .into());
        }
        let profile = profile_of(field, |f| coupling_matrix_at(spec, f, 0.0))?;
        Ok(Self { spec, field, profile })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, Profile::Zero)
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.profile, Profile::Separable(..) | Profile::General)
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match &self.profile {
            Profile::Zero => DMatrix::zeros(self.spec.m_u, self.spec.m_p),
            Profile::Static(g) => g.clone(),
            Profile::Separable(g, tf) => g * tf.eval(t),
            Profile::General => coupling_matrix_at(self.spec, self.field, t).expect("validated at construction"),
        }
    }
}
