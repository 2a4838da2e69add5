//! Galerkin matrices and the coefficient-space Leray / ∇⁻¹ / Bogovskii maps.
//!
//! The mean-zero pressure span is reached through a rank-revealing SVD of
//! B' (B without its identically-zero constant-mode row).  With the cosine
//! pressure basis and N_p = N_u, B' loses exactly one rank (a checkerboard
//! mode), so every solve below works on range(B') instead of assuming full
//! row rank; the number of spurious modes is reported.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};
use std::f64::consts::PI;
use thiserror::Error;

use crate::basis::{BasisError, BasisSpec, PressureCoeffs, VelocityCoeffs};
use crate::field::{pressure_norm_const, velocity_norm_const, SampledField, Shape};

pub const RANK_TOL: f64 = 1e-11;
pub const LS_TOL: f64 = 1e-8;
pub const ANNIHILATION_TOL: f64 = 1e-8;
pub const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("dense factorization failed: {0}")]
    Factorization(&'static str),
    #[error("functional does not annihilate the discrete solenoidal space (relative component {ratio:.3e} > {tol:.0e})")]
    Annihilation { ratio: f64, tol: f64 },
    #[error("least-squares residual {residual:.3e} exceeds {tol:.0e}")]
    Residual { residual: f64, tol: f64 },
    #[error("pressure datum has nonzero mean {0:.3e}")]
    MeanNotZero(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// ∫₀¹ sin(mπt) cos(nπt) dt
pub fn sin_cos(m: usize, n: usize) -> f64 {
    if m == n || (m + n) % 2 == 0 {
        return 0.0;
    }
    let (mf, nf) = (m as f64, n as f64);
    2.0 * mf / (PI * (mf * mf - nf * nf))
}

/// ∫₀¹ cos(mπt) cos(nπt) dt
pub fn cos_cos(m: usize, n: usize) -> f64 {
    match (m, n) {
        (0, 0) => 1.0,
        _ if m == n => 0.5,
        _ => 0.0,
    }
}

/// ∫₀¹ sin(mπt) sin(nπt) dt, m, n ≥ 1
pub fn sin_sin(m: usize, n: usize) -> f64 {
    if m == n {
        0.5
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
struct RangeFactor {
    // thin SVD of B' restricted to nonzero singular values, descending
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    // Euclidean-orthonormal basis of ker B'
    null: DMatrix<f64>,
    singular_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_u: usize,
    pub n_p: usize,
    pub m_u: usize,
    pub m_p: usize,
    /// Diagonal of M.
    pub mass: DVector<f64>,
    pub e: DMatrix<f64>,
    pub b: DMatrix<f64>,
    range: RangeFactor,
    // Cholesky of V_rᵀ M⁻¹ V_r for the Leray projection
    schur: Option<Cholesky<f64, Dyn>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzParts {
    pub solenoidal: VelocityCoeffs,
    pub gradient: VelocityCoeffs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogovskiiSolution {
    pub velocity: VelocityCoeffs,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimates {
    pub bogovskii_norm: f64,
    pub grad_inverse_norm: f64,
    /// Smallest nonzero singular value of B' (discrete inf-sup constant).
    pub inf_sup: f64,
    pub rank: usize,
    /// Mean-zero pressure modes invisible to the divergence.
    pub spurious_modes: usize,
}

fn assemble_b(spec: &BasisSpec) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(spec.m_p, spec.m_u);
    for col in 0..spec.m_u {
        let v = spec.velocity_index(col);
        let n = velocity_norm_const(v.i, v.j);
        for row in 1..spec.m_p {
            let (k, l) = spec.pressure_index(row);
            let c = pressure_norm_const(k, l);
            b[(row, col)] = if v.comp == 0 {
                n * c * v.i as f64 * PI * cos_cos(v.i, k) * sin_cos(v.j, l)
            } else {
                n * c * v.j as f64 * PI * sin_cos(v.i, k) * cos_cos(v.j, l)
            };
        }
    }
    b
}

fn assemble_e(spec: &BasisSpec) -> DMatrix<f64> {
    let pi2 = PI * PI;
    DMatrix::from_fn(spec.m_u, spec.m_u, |r, c| {
        let a = spec.velocity_index(r);
        let b = spec.velocity_index(c);
        let nn = velocity_norm_const(a.i, a.j) * velocity_norm_const(b.i, b.j) * pi2;
        let (i, j, p, q) = (a.i, a.j, b.i, b.j);
        let (fi, fj, fp, fq) = (i as f64, j as f64, p as f64, q as f64);
        match (a.comp, b.comp) {
            (0, 0) => nn * fi * fp * cos_cos(i, p) * sin_sin(j, q),
            (1, 1) => nn * fj * fq * sin_sin(i, p) * cos_cos(j, q),
            (0, 1) => nn * fi * fq * sin_cos(p, i) * sin_cos(j, q),
            _ => nn * fj * fp * sin_cos(i, p) * sin_cos(q, j),
        }
    })
}

fn range_factor(b: &DMatrix<f64>) -> Result<RangeFactor, OperatorError> {
    let (m_p, m_u) = b.shape();
    let rows = (m_p - 1).max(m_u);
    // zero-pad so the SVD returns a full right basis of ℝ^{m_u}
    let mut padded = DMatrix::zeros(rows, m_u);
    padded.view_mut((0, 0), (m_p - 1, m_u)).copy_from(&b.rows(1, m_p - 1));
    let svd = SVD::try_new(padded, true, true, f64::EPSILON, 0).ok_or(OperatorError::Factorization("SVD of B"))?;
    let u = svd.u.ok_or(OperatorError::Factorization("SVD of B: U"))?;
    let vt = svd.v_t.ok_or(OperatorError::Factorization("SVD of B: Vᵀ"))?;
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let smax = order.first().map_or(0.0, |&k| s[k]);
    let rank = order.iter().take_while(|&&k| s[k] > RANK_TOL * smax && s[k] > 0.0).count();
    let singular_values: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    let ur = DMatrix::from_fn(m_p - 1, rank, |r, c| u[(r, order[c])]);
    let vr = DMatrix::from_fn(m_u, rank, |r, c| vt[(order[c], r)]);
    let sigma = DVector::from_fn(rank, |c, _| s[order[c]]);
    let null = DMatrix::from_fn(m_u, m_u - rank, |r, c| vt[(order[rank + c], r)]);
    Ok(RangeFactor {
        u: ur,
        sigma,
        v: vr,
        null,
        singular_values,
    })
}

pub fn assemble(spec: &BasisSpec) -> Result<OperatorSet, OperatorError> {
    let mass = spec.mass_diagonal();
    let b = assemble_b(spec);
    let e = assemble_e(spec);
    let range = range_factor(&b)?;
    let schur = if range.sigma.is_empty() {
        None
    } else {
        let minv_v = DMatrix::from_fn(spec.m_u, range.v.ncols(), |r, c| range.v[(r, c)] / mass[r]);
        let s = range.v.transpose() * minv_v;
        Some(Cholesky::new(s).ok_or(OperatorError::Factorization("Leray Schur complement"))?)
    };
    Ok(OperatorSet {
        n_u: spec.n_u,
        n_p: spec.n_p,
        m_u: spec.m_u,
        m_p: spec.m_p,
        mass,
        e,
        b,
        range,
        schur,
    })
}

impl OperatorSet {
    fn check_velocity(&self, v: &DVector<f64>) -> Result<(), OperatorError> {
        if v.len() != self.m_u {
            return Err(OperatorError::Dimension {
                expected: self.m_u,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_pressure(&self, v: &DVector<f64>) -> Result<(), OperatorError> {
        if v.len() != self.m_p {
            return Err(OperatorError::Dimension {
                expected: self.m_p,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn l2_norm_sq(&self, c: &DVector<f64>) -> f64 {
        c.iter().zip(self.mass.iter()).map(|(x, m)| m * x * x).sum()
    }

    pub fn div_norm_sq(&self, c: &DVector<f64>) -> f64 {
        c.dot(&(&self.e * c))
    }

    pub fn mass_apply(&self, c: &DVector<f64>) -> DVector<f64> {
        c.component_mul(&self.mass)
    }

    pub fn mass_solve(&self, g: &DVector<f64>) -> DVector<f64> {
        g.component_div(&self.mass)
    }

    /// |B c| — zero for discretely solenoidal c.
    pub fn divergence_residual(&self, c: &DVector<f64>) -> f64 {
        (&self.b * c).norm()
    }

    /// Discrete gradient field M⁻¹Bᵀq.
    pub fn discrete_gradient(&self, q: &PressureCoeffs) -> Result<VelocityCoeffs, OperatorError> {
        self.check_pressure(&q.values)?;
        Ok(VelocityCoeffs {
            values: self.mass_solve(&(self.b.transpose() * &q.values)),
        })
    }

    pub fn rank(&self) -> usize {
        self.range.sigma.len()
    }

    pub fn spurious_pressure_modes(&self) -> usize {
        self.m_p - 1 - self.rank()
    }

    /// All singular values of B', descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.range.singular_values
    }

    /// Euclidean-orthonormal basis of ker B (m_u × (m_u − rank)).
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.range.null
    }
}

/// G_{i,k} = ∫ ψ_k (f · e_i) at t = 0.
pub fn coupling_matrix(spec: &BasisSpec, ops: &OperatorSet, f: &SampledField) -> Result<DMatrix<f64>, OperatorError> {
    if ops.m_u != spec.m_u || ops.m_p != spec.m_p {
        return Err(OperatorError::Dimension {
            expected: spec.m_u,
            got: ops.m_u,
        });
    }
    coupling_matrix_at(spec, f, 0.0)
}

pub fn coupling_matrix_at(spec: &BasisSpec, f: &SampledField, t: f64) -> Result<DMatrix<f64>, OperatorError> {
    if f.shape() != Shape::Vector {
        return Err(BasisError::Shape {
            expected: Shape::Vector,
            got: f.shape(),
        }
        .into());
    }
    let mut g = DMatrix::zeros(spec.m_u, spec.m_p);
    if f.is_zero() {
        return Ok(g);
    }
    let w = spec.n_p + 1;
    // products sin_i(x) cos_k(x), indexed (i-1)·w + k
    let prods: Vec<Vec<f64>> = (0..spec.n_u)
        .flat_map(|i| {
            (0..w).map(move |k| (i, k))
        })
        .map(|(i, k)| spec.sin_tab[i].iter().zip(&spec.cos_tab[k]).map(|(s, c)| s * c).collect())
        .collect();
    let q = spec.quadrature_points();
    let factor = f.time_factor(t);
    for comp in 0..2 {
        let mut samples = vec![0.0; q * q];
        for (a, &x) in spec.quad.nodes.iter().enumerate() {
            for (b, &y) in spec.quad.nodes.iter().enumerate() {
                samples[a * q + b] = factor * f.eval_spatial(x, y, t)[comp];
            }
        }
        let p = spec.tensor_moments(&samples, &prods, &prods);
        for i in 1..=spec.n_u {
            for j in 1..=spec.n_u {
                let row = spec.velocity_flat(crate::basis::VelocityIndex { comp, i, j });
                let n = velocity_norm_const(i, j);
                for k in 0..w {
                    for l in 0..w {
                        g[(row, spec.pressure_flat(k, l))] =
                            n * pressure_norm_const(k, l) * p[(i - 1) * w + k][(j - 1) * w + l];
                    }
                }
            }
        }
    }
    Ok(g)
}

/// L²-orthogonal split c = c_J + c_G with B c_J = 0.
pub fn leray_project(ops: &OperatorSet, c: &VelocityCoeffs) -> Result<HelmholtzParts, OperatorError> {
    ops.check_velocity(&c.values)?;
    let solenoidal = match &ops.schur {
        None => c.values.clone(),
        Some(chol) => {
            // minimize |c̃ − c|_M subject to V_rᵀ c̃ = 0
            let lambda = chol.solve(&(ops.range.v.transpose() * &c.values));
            &c.values - ops.mass_solve(&(&ops.range.v * lambda))
        }
    };
    let gradient = &c.values - &solenoidal;
    Ok(HelmholtzParts {
        solenoidal: VelocityCoeffs { values: solenoidal },
        gradient: VelocityCoeffs { values: gradient },
    })
}

/// Mean-zero q with Bᵀq = −g; g must annihilate ker B.
pub fn grad_inverse(ops: &OperatorSet, g: &DVector<f64>) -> Result<PressureCoeffs, OperatorError> {
    grad_inverse_scaled(ops, g, 0.0)
}

/// As [`grad_inverse`], with tolerances relative to max(|g|, scale). Use when g
/// is a difference of terms of size `scale` that may cancel to roundoff.
pub fn grad_inverse_scaled(ops: &OperatorSet, g: &DVector<f64>, scale: f64) -> Result<PressureCoeffs, OperatorError> {
    ops.check_velocity(g)?;
    let gn = g.norm().max(scale);
    let mut q = DVector::zeros(ops.m_p);
    if gn == 0.0 {
        return Ok(PressureCoeffs { values: q });
    }
    let vr = &ops.range.v;
    let proj = vr.transpose() * g;
    let ratio = (g - vr * &proj).norm() / gn;
    if ratio > ANNIHILATION_TOL {
        return Err(OperatorError::Annihilation {
            ratio,
            tol: ANNIHILATION_TOL,
        });
    }
    let inner = -(&ops.range.u * proj.component_div(&ops.range.sigma));
    q.rows_mut(1, ops.m_p - 1).copy_from(&inner);
    let residual = (ops.b.transpose() * &q + g).norm() / gn;
    if residual > LS_TOL {
        return Err(OperatorError::Residual { residual, tol: LS_TOL });
    }
    Ok(PressureCoeffs { values: q })
}

/// Minimum-H¹₀-norm c with B c = fq (least squares on the range of B).
pub fn bogovskii(ops: &OperatorSet, fq: &PressureCoeffs) -> Result<BogovskiiSolution, OperatorError> {
    ops.check_pressure(&fq.values)?;
    let mean = fq.values[0];
    if mean.abs() > MEAN_TOL * fq.values.norm().max(1.0) {
        return Err(OperatorError::MeanNotZero(mean));
    }
    let rhs = fq.values.rows(1, ops.m_p - 1);
    let coef = (ops.range.u.transpose() * rhs).component_div(&ops.range.sigma);
    let c = &ops.range.v * coef;
    let mut target = fq.values.clone();
    target[0] = 0.0;
    let residual = (&ops.b * &c - target).norm();
    Ok(BogovskiiSolution {
        velocity: VelocityCoeffs { values: c },
        residual,
    })
}

pub fn operator_norm_estimates(ops: &OperatorSet) -> NormEstimates {
    let inf_sup = ops.range.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let inv = if inf_sup.is_finite() { 1.0 / inf_sup } else { 0.0 };
    NormEstimates {
        bogovskii_norm: inv,
        grad_inverse_norm: inv,
        inf_sup: if inf_sup.is_finite() { inf_sup } else { 0.0 },
        rank: ops.rank(),
        spurious_modes: ops.spurious_pressure_modes(),
    }
}
