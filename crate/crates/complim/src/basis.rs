//! Tensor trigonometric bases on the unit square.
//!
//! Velocity: `n_ij sin(iπx) sin(jπy)` in one component, 1 ≤ i, j ≤ N_u,
//! flat index `comp·N_u² + (i−1)·N_u + (j−1)`.  H¹₀-orthonormal.
//! Pressure: `c_kl cos(kπx) cos(lπy)`, 0 ≤ k, l ≤ N_p, flat index
//! `k·(N_p+1) + l` (so the constant mode is 0).  L²-orthonormal.

use std::f64::consts::PI;

use nalgebra::DVector;
use thiserror::Error;

use crate::field::{pressure_norm_const, velocity_norm_const, SampledField, Shape, Spatial};
use crate::operators::OperatorSet;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("N_u must be at least 1 (got {0})")]
    VelocityTruncation(i64),
    #[error("N_p must be non-negative (got {0})")]
    PressureTruncation(i64),
    #[error("expected a {expected:?} field, got {got:?}")]
    Shape { expected: Shape, got: Shape },
    #[error("coefficient length {got} does not match basis dimension {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VelocityIndex {
    /// 0 or 1
    pub comp: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub n_u: usize,
    pub n_p: usize,
    pub m_u: usize,
    pub m_p: usize,
    pub(crate) quad: GaussLegendre,
    // sin(iπ x_q) for i = 1..=N_u, row i-1
    pub(crate) sin_tab: Vec<Vec<f64>>,
    // cos(kπ x_q) for k = 0..=N_p
    pub(crate) cos_tab: Vec<Vec<f64>>,
}

/// Gauss–Legendre points per axis.  2·max(N_u, N_p) + 8 leaves O(1e-10)
/// aliasing error on the top modes at N = 8; 3·max + 8 reaches round-off.
pub fn quadrature_order(n_u: usize, n_p: usize) -> usize {
    3 * n_u.max(n_p) + 8
}

pub fn build_basis(n_u: i64, n_p: i64) -> Result<BasisSpec, BasisError> {
    if n_u < 1 {
        return Err(BasisError::VelocityTruncation(n_u));
    }
    if n_p < 0 {
        return Err(BasisError::PressureTruncation(n_p));
    }
    let (n_u, n_p) = (n_u as usize, n_p as usize);
    let quad = GaussLegendre::new(quadrature_order(n_u, n_p));
    let sin_tab = (1..=n_u)
        .map(|i| quad.nodes.iter().map(|&x| (i as f64 * PI * x).sin()).collect())
        .collect();
    let cos_tab = (0..=n_p)
        .map(|k| quad.nodes.iter().map(|&x| (k as f64 * PI * x).cos()).collect())
        .collect();
    Ok(BasisSpec {
        n_u,
        n_p,
        m_u: 2 * n_u * n_u,
        m_p: (n_p + 1) * (n_p + 1),
        quad,
        sin_tab,
        cos_tab,
    })
}

impl BasisSpec {
    pub fn velocity_flat(&self, idx: VelocityIndex) -> usize {
        debug_assert!(idx.comp < 2 && (1..=self.n_u).contains(&idx.i) && (1..=self.n_u).contains(&idx.j));
        idx.comp * self.n_u * self.n_u + (idx.i - 1) * self.n_u + (idx.j - 1)
    }

    pub fn velocity_index(&self, flat: usize) -> VelocityIndex {
        let nn = self.n_u * self.n_u;
        let r = flat % nn;
        VelocityIndex {
            comp: flat / nn,
            i: r / self.n_u + 1,
            j: r % self.n_u + 1,
        }
    }

    pub fn pressure_flat(&self, k: usize, l: usize) -> usize {
        debug_assert!(k <= self.n_p && l <= self.n_p);
        k * (self.n_p + 1) + l
    }

    pub fn pressure_index(&self, flat: usize) -> (usize, usize) {
        (flat / (self.n_p + 1), flat % (self.n_p + 1))
    }

    /// n_ij = 2/(π√(i²+j²)).
    pub fn velocity_norm_const(&self, i: usize, j: usize) -> f64 {
        velocity_norm_const(i, j)
    }

    pub fn pressure_norm_const(&self, k: usize, l: usize) -> f64 {
        pressure_norm_const(k, l)
    }

    /// Diagonal of the velocity mass matrix, 1/(π²(i²+j²)).
    pub fn mass_diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.m_u, |f, _| {
            let v = self.velocity_index(f);
            1.0 / (PI * PI * (v.i * v.i + v.j * v.j) as f64)
        })
    }

    pub fn quadrature_points(&self) -> usize {
        self.quad.len()
    }

    // field samples on the tensor grid, row-major in (x, y)
    fn sample(&self, field: &SampledField, t: f64) -> [Vec<f64>; 2] {
        let q = self.quad.len();
        let mut out = [vec![0.0; q * q], vec![0.0; q * q]];
        let g = field.time_factor(t);
        for (a, &x) in self.quad.nodes.iter().enumerate() {
            for (b, &y) in self.quad.nodes.iter().enumerate() {
                let v = field.eval_spatial(x, y, t);
                out[0][a * q + b] = g * v[0];
                out[1][a * q + b] = g * v[1];
            }
        }
        out
    }

    // P[r][s] = Σ_a Σ_b w_a w_b F[a][b] X_r(x_a) Y_s(y_b)
    pub(crate) fn tensor_moments(&self, f: &[f64], xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let q = self.quad.len();
        let w = &self.quad.weights;
        let mut tmp = vec![vec![0.0; ys.len()]; q];
        for a in 0..q {
            for (s, ys_s) in ys.iter().enumerate() {
                tmp[a][s] = (0..q).map(|b| w[b] * f[a * q + b] * ys_s[b]).sum();
            }
        }
        xs.iter()
            .map(|xr| (0..ys.len()).map(|s| (0..q).map(|a| w[a] * xr[a] * tmp[a][s]).sum()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoeffs {
    pub values: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureCoeffs {
    pub values: DVector<f64>,
}

impl VelocityCoeffs {
    pub fn zeros(spec: &BasisSpec) -> Self {
        Self {
            values: DVector::zeros(spec.m_u),
        }
    }

    pub fn unit(spec: &BasisSpec, idx: VelocityIndex) -> Self {
        let mut c = Self::zeros(spec);
        c.values[spec.velocity_flat(idx)] = 1.0;
        c
    }

    /// Same expansion as a [`SampledField`].
    pub fn to_field(&self, spec: &BasisSpec) -> SampledField {
        SampledField::velocity_modes(spec.n_u, self.values.iter().copied().collect())
    }
}

impl PressureCoeffs {
    pub fn zeros(spec: &BasisSpec) -> Self {
        Self {
            values: DVector::zeros(spec.m_p),
        }
    }

    pub fn unit(spec: &BasisSpec, k: usize, l: usize) -> Self {
        let mut c = Self::zeros(spec);
        c.values[spec.pressure_flat(k, l)] = 1.0;
        c
    }

    pub fn mean(&self) -> f64 {
        self.values[0]
    }

    pub fn to_field(&self, spec: &BasisSpec) -> SampledField {
        SampledField::pressure_modes(spec.n_p, self.values.iter().copied().collect())
    }
}

fn check_shape(field: &SampledField, expected: Shape) -> Result<(), BasisError> {
    let got = field.shape();
    if got != expected {
        return Err(BasisError::Shape { expected, got });
    }
    Ok(())
}

pub fn project_velocity(spec: &BasisSpec, field: &SampledField) -> Result<VelocityCoeffs, BasisError> {
    project_velocity_at(spec, field, 0.0)
}

/// L² projection of `field(·, t)` onto the velocity span.
pub fn project_velocity_at(spec: &BasisSpec, field: &SampledField, t: f64) -> Result<VelocityCoeffs, BasisError> {
    check_shape(field, Shape::Vector)?;
    let mut out = VelocityCoeffs::zeros(spec);
    match &field.spatial {
        Spatial::Zero(_) => {}
        // same orthogonal family: transfer coefficients directly
        Spatial::VelocityModes { n_u, values } => {
            let g = field.time_factor(t);
            let n = (*n_u).min(spec.n_u);
            for comp in 0..2 {
                for i in 1..=n {
                    for j in 1..=n {
                        let src = values[comp * n_u * n_u + (i - 1) * n_u + (j - 1)];
                        out.values[spec.velocity_flat(VelocityIndex { comp, i, j })] = g * src;
                    }
                }
            }
        }
        _ => {
            let samples = spec.sample(field, t);
            for (comp, f) in samples.iter().enumerate() {
                let p = spec.tensor_moments(f, &spec.sin_tab, &spec.sin_tab);
                for i in 1..=spec.n_u {
                    for j in 1..=spec.n_u {
                        let k2 = (i * i + j * j) as f64;
                        out.values[spec.velocity_flat(VelocityIndex { comp, i, j })] =
                            velocity_norm_const(i, j) * p[i - 1][j - 1] * PI * PI * k2;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Functional vector g_i = (field(·, t), e_i), the discrete H⁻¹ representative.
pub fn load_vector_at(spec: &BasisSpec, field: &SampledField, t: f64) -> Result<DVector<f64>, BasisError> {
    let c = project_velocity_at(spec, field, t)?;
    Ok(c.values.component_mul(&spec.mass_diagonal()))
}

pub fn project_pressure(spec: &BasisSpec, field: &SampledField) -> Result<PressureCoeffs, BasisError> {
    project_pressure_at(spec, field, 0.0)
}

pub fn project_pressure_at(spec: &BasisSpec, field: &SampledField, t: f64) -> Result<PressureCoeffs, BasisError> {
    check_shape(field, Shape::Scalar)?;
    let mut out = PressureCoeffs::zeros(spec);
    match &field.spatial {
        Spatial::Zero(_) => {}
        Spatial::PressureModes { n_p, values } => {
            let g = field.time_factor(t);
            let n = (*n_p).min(spec.n_p);
            for k in 0..=n {
                for l in 0..=n {
                    out.values[spec.pressure_flat(k, l)] = g * values[k * (n_p + 1) + l];
                }
            }
        }
        _ => {
            let samples = spec.sample(field, t);
            let p = spec.tensor_moments(&samples[0], &spec.cos_tab, &spec.cos_tab);
            for k in 0..=spec.n_p {
                for l in 0..=spec.n_p {
                    out.values[spec.pressure_flat(k, l)] = pressure_norm_const(k, l) * p[k][l];
                }
            }
        }
    }
    Ok(out)
}

pub fn eval_velocity(spec: &BasisSpec, c: &VelocityCoeffs, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>, BasisError> {
    if c.values.len() != spec.m_u {
        return Err(BasisError::Length {
            expected: spec.m_u,
            got: c.values.len(),
        });
    }
    let field = c.to_field(spec);
    Ok(points.iter().map(|&[x, y]| field.eval_spatial(x, y, 0.0)).collect())
}

pub fn eval_pressure(spec: &BasisSpec, q: &PressureCoeffs, points: &[[f64; 2]]) -> Result<Vec<f64>, BasisError> {
    if q.values.len() != spec.m_p {
        return Err(BasisError::Length {
            expected: spec.m_p,
            got: q.values.len(),
        });
    }
    let field = q.to_field(spec);
    Ok(points.iter().map(|&[x, y]| field.eval_spatial(x, y, 0.0)[0]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityNorms {
    pub l2: f64,
    pub h01: f64,
    pub div_l2: f64,
}

pub fn velocity_norms(ops: &OperatorSet, c: &VelocityCoeffs) -> Result<VelocityNorms, BasisError> {
    if c.values.len() != ops.m_u {
        return Err(BasisError::Length {
            expected: ops.m_u,
            got: c.values.len(),
        });
    }
    Ok(VelocityNorms {
        l2: ops.l2_norm_sq(&c.values).sqrt(),
        h01: c.values.norm(),
        div_l2: ops.div_norm_sq(&c.values).max(0.0).sqrt(),
    })
}

pub fn pressure_norm(ops: &OperatorSet, q: &PressureCoeffs) -> Result<f64, BasisError> {
    if q.values.len() != ops.m_p {
        return Err(BasisError::Length {
            expected: ops.m_p,
            got: q.values.len(),
        });
    }
    Ok(q.values.norm())
}
