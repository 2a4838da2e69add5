//! Gronwall, convex-root and mixed-lemma bounds, plus certificates on
//! sampled trajectories.
//!
//! Trajectories live on a uniform grid of `steps` intervals over [0, T].
//! They are sampled either at the nodes (N+1 values, trapezoidal norms) or
//! at interval midpoints (N values, midpoint norms).  Midpoint sampling is
//! what a Crank–Nicolson trajectory naturally provides for quantities built
//! from the midpoint state; node-sampled data are averaged onto intervals.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InequalityError {
    #[error("{what} must be non-negative (got {value})")]
    Negative { what: &'static str, value: f64 },
    #[error("trajectories are not on a common grid")]
    GridMismatch,
    #[error("trajectory has {got} samples, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("trajectory needs at least one interval and T > 0")]
    EmptyGrid,
    #[error("{0} must be node-sampled")]
    NeedsNodes(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Nodes,
    Midpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    I,
    J,
    A,
    B,
    C,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrajectory {
    pub t_final: f64,
    pub steps: usize,
    pub sampling: Sampling,
    pub role: Role,
    pub values: Vec<f64>,
}

impl ScalarTrajectory {
    pub fn new(role: Role, t_final: f64, steps: usize, sampling: Sampling, values: Vec<f64>) -> Result<Self, InequalityError> {
        if steps == 0 || !(t_final > 0.0) {
            return Err(InequalityError::EmptyGrid);
        }
        let expected = match sampling {
            Sampling::Nodes => steps + 1,
            Sampling::Midpoints => steps,
        };
        if values.len() != expected {
            return Err(InequalityError::Length {
                expected,
                got: values.len(),
            });
        }
        if let Some(&v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(InequalityError::Negative {
                what: "trajectory sample",
                value: v,
            });
        }
        Ok(Self {
            t_final,
            steps,
            sampling,
            role,
            values,
        })
    }

    pub fn nodes(role: Role, t_final: f64, values: Vec<f64>) -> Result<Self, InequalityError> {
        let steps = values.len().saturating_sub(1);
        Self::new(role, t_final, steps, Sampling::Nodes, values)
    }

    pub fn midpoints(role: Role, t_final: f64, values: Vec<f64>) -> Result<Self, InequalityError> {
        let steps = values.len();
        Self::new(role, t_final, steps, Sampling::Midpoints, values)
    }

    pub fn constant(role: Role, t_final: f64, steps: usize, value: f64) -> Result<Self, InequalityError> {
        Self::new(role, t_final, steps, Sampling::Nodes, vec![value; steps + 1])
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Sample times (nodes or midpoints).
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        match self.sampling {
            Sampling::Nodes => (0..=self.steps).map(|n| n as f64 * dt).collect(),
            Sampling::Midpoints => (0..self.steps).map(|n| (n as f64 + 0.5) * dt).collect(),
        }
    }

    /// Representative value on interval n.
    pub fn interval(&self, n: usize) -> f64 {
        match self.sampling {
            Sampling::Nodes => 0.5 * (self.values[n] + self.values[n + 1]),
            Sampling::Midpoints => self.values[n],
        }
    }

    fn integral_of(&self, h: impl Fn(f64) -> f64) -> f64 {
        let dt = self.dt();
        match self.sampling {
            Sampling::Nodes => {
                let v = &self.values;
                dt * (0.5 * (h(v[0]) + h(v[self.steps])) + v[1..self.steps].iter().map(|&x| h(x)).sum::<f64>())
            }
            Sampling::Midpoints => dt * self.values.iter().map(|&x| h(x)).sum::<f64>(),
        }
    }

    pub fn l1(&self) -> f64 {
        self.integral_of(|x| x)
    }

    pub fn l2(&self) -> f64 {
        self.integral_of(|x| x * x).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Running integral ∫₀^{t_n} at the nodes.
    pub fn cumulative(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for n in 0..self.steps {
            acc += dt * self.interval(n);
            out.push(acc);
        }
        out
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.steps == other.steps && (self.t_final - other.t_final).abs() <= 1e-12 * self.t_final
    }
}

fn nonneg(what: &'static str, value: f64) -> Result<(), InequalityError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(InequalityError::Negative { what, value })
    }
}

/// Any J ≥ 0 with J² ≤ a + bJ satisfies J ≤ b + √a.
pub fn convex_root_bound(a: f64, b: f64) -> Result<f64, InequalityError> {
    nonneg("a", a)?;
    nonneg("b", b)?;
    Ok(b + a.sqrt())
}

/// t ↦ exp(∫₀ᵗ φ)(I₀ + ∫₀ᵗ ψ) at the nodes.
pub fn gronwall_bound(i0: f64, phi: &ScalarTrajectory, psi: &ScalarTrajectory) -> Result<ScalarTrajectory, InequalityError> {
    nonneg("I0", i0)?;
    if !phi.same_grid(psi) {
        return Err(InequalityError::GridMismatch);
    }
    let big_phi = phi.cumulative();
    let big_psi = psi.cumulative();
    let values = big_phi.iter().zip(&big_psi).map(|(f, s)| f.exp() * (i0 + s)).collect();
    ScalarTrajectory::new(Role::I, phi.t_final, phi.steps, Sampling::Nodes, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedConstants {
    pub c_a: f64,
    pub c_a_tilde: f64,
    pub a_l1: f64,
}

pub fn mixed_constants(a_l1: f64) -> Result<MixedConstants, InequalityError> {
    nonneg("A", a_l1)?;
    let e = a_l1.exp();
    let c_a = 1.0 + a_l1 * e;
    Ok(MixedConstants {
        c_a,
        c_a_tilde: e * (1.0 + 1.5 * c_a * c_a),
        a_l1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedBounds {
    pub j_l2_bound: f64,
    pub i_inf_bound: f64,
    pub constants: MixedConstants,
}

pub fn mixed_bounds(
    i0: f64,
    a: &ScalarTrajectory,
    b: &ScalarTrajectory,
    c: &ScalarTrajectory,
) -> Result<MixedBounds, InequalityError> {
    nonneg("I0", i0)?;
    if !a.same_grid(b) || !a.same_grid(c) {
        return Err(InequalityError::GridMismatch);
    }
    let k = mixed_constants(a.l1())?;
    let (c1, b2) = (c.l1(), b.l2());
    Ok(MixedBounds {
        j_l2_bound: k.c_a * (i0.sqrt() + c1.sqrt() + b2),
        i_inf_bound: k.c_a_tilde * (i0 + c1 + b2 * b2),
        constants: k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conclusions {
    pub j_l2: f64,
    pub j_l2_bound: f64,
    pub i_inf: f64,
    pub i_inf_bound: f64,
}

impl Conclusions {
    pub fn hold(&self) -> bool {
        self.j_l2 <= self.j_l2_bound && self.i_inf <= self.i_inf_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub hypothesis_holds: bool,
    /// min over intervals of (rhs − lhs); negative means the hypothesis fails there.
    pub hypothesis_margin: f64,
    pub worst_interval: usize,
    pub tolerance: f64,
    /// `None` when the hypothesis failed and the conclusions were skipped.
    pub conclusions: Option<Conclusions>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_holds && self.conclusions.as_ref().is_some_and(Conclusions::hold)
    }
}

pub const HYPOTHESIS_REL_TOL: f64 = 1e-6;

/// Checks I′ + J² ≤ aI + bJ + c on every interval, with I′ the forward
/// difference, then the two conclusions of the lemma.
pub fn verify_mixed(
    i: &ScalarTrajectory,
    j: &ScalarTrajectory,
    a: &ScalarTrajectory,
    b: &ScalarTrajectory,
    c: &ScalarTrajectory,
) -> Result<CertificateReport, InequalityError> {
    if i.sampling != Sampling::Nodes {
        return Err(InequalityError::NeedsNodes("I"));
    }
    if [j, a, b, c].iter().any(|s| !i.same_grid(s)) {
        return Err(InequalityError::GridMismatch);
    }
    let dt = i.dt();
    let scale = i.sup();
    let tolerance = HYPOTHESIS_REL_TOL * scale;
    let mut margin = f64::INFINITY;
    let mut worst = 0;
    for n in 0..i.steps {
        let jn = j.interval(n);
        let lhs = (i.values[n + 1] - i.values[n]) / dt + jn * jn;
        let rhs = a.interval(n) * i.interval(n) + b.interval(n) * jn + c.interval(n);
        let m = rhs - lhs;
        if m < margin {
            margin = m;
            worst = n;
        }
    }
    let hypothesis_holds = margin >= -tolerance;
    let conclusions = if hypothesis_holds {
        let bounds = mixed_bounds(i.values[0], a, b, c)?;
        Some(Conclusions {
            j_l2: j.l2(),
            j_l2_bound: bounds.j_l2_bound,
            i_inf: i.sup(),
            i_inf_bound: bounds.i_inf_bound,
        })
    } else {
        None
    };
    Ok(CertificateReport {
        hypothesis_holds,
        hypothesis_margin: margin,
        worst_interval: worst,
        tolerance,
        conclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_root_examples() {
        assert_eq!(convex_root_bound(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(convex_root_bound(4.0, 0.0).unwrap(), 2.0);
        let root = (3.0 + 13f64.sqrt()) / 2.0;
        let bound = convex_root_bound(1.0, 3.0).unwrap();
        assert_eq!(bound, 4.0);
        assert!(root <= bound && (root - 3.3028).abs() < 1e-4);
        assert!(convex_root_bound(-1.0, 0.0).is_err());
    }

    #[test]
    fn gronwall_examples() {
        let zero = ScalarTrajectory::constant(Role::Other, 1.0, 100, 0.0).unwrap();
        let g = gronwall_bound(3.0, &zero, &zero).unwrap();
        assert!(g.values.iter().all(|&v| v == 3.0));
        let lam = ScalarTrajectory::constant(Role::Other, 1.0, 1000, 1.0).unwrap();
        let zero = ScalarTrajectory::constant(Role::Other, 1.0, 1000, 0.0).unwrap();
        let g = gronwall_bound(2.0, &lam, &zero).unwrap();
        assert!((g.values[1000] - 2.0 * std::f64::consts::E).abs() < 1e-12);
        assert!((g.values[500] - 2.0 * 0.5f64.exp()).abs() < 1e-12);
        let other = ScalarTrajectory::constant(Role::Other, 1.0, 10, 0.0).unwrap();
        assert_eq!(gronwall_bound(1.0, &lam, &other), Err(InequalityError::GridMismatch));
    }

    #[test]
    fn constants_examples() {
        let k = mixed_constants(0.0).unwrap();
        assert_eq!((k.c_a, k.c_a_tilde), (1.0, 2.5));
        let k = mixed_constants(1.0).unwrap();
        assert!((k.c_a - (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert!((k.c_a_tilde - 59.09).abs() < 5e-3, "{}", k.c_a_tilde);
        let k2 = mixed_constants(1.1).unwrap();
        assert!(k2.c_a > k.c_a && k2.c_a_tilde > k.c_a_tilde);
        assert!(mixed_constants(-0.1).is_err());
    }

    #[test]
    fn bounds_examples() {
        let z = ScalarTrajectory::constant(Role::Other, 1.0, 50, 0.0).unwrap();
        let m = mixed_bounds(1.0, &z, &z, &z).unwrap();
        assert_eq!((m.j_l2_bound, m.i_inf_bound), (1.0, 2.5));
        let m = mixed_bounds(0.0, &z, &z, &z).unwrap();
        assert_eq!((m.j_l2_bound, m.i_inf_bound), (0.0, 0.0));
    }

    #[test]
    fn spike_violates_hypothesis() {
        let steps = 100;
        let mut i = vec![1.0; steps + 1];
        for v in i.iter_mut().skip(51) {
            *v = 10.0;
        }
        let i = ScalarTrajectory::nodes(Role::I, 1.0, i).unwrap();
        let z = ScalarTrajectory::constant(Role::Other, 1.0, steps, 0.0).unwrap();
        let a = ScalarTrajectory::constant(Role::A, 1.0, steps, 1.0).unwrap();
        let r = verify_mixed(&i, &z, &a, &z, &z).unwrap();
        assert!(!r.hypothesis_holds && r.conclusions.is_none() && !r.passed());
        assert_eq!(r.worst_interval, 50);
    }

    #[test]
    fn mixed_sampling_norms() {
        let m = ScalarTrajectory::midpoints(Role::J, 2.0, vec![1.0, 3.0]).unwrap();
        assert_eq!(m.l1(), 4.0);
        assert_eq!(m.l2(), 10f64.sqrt());
        let n = ScalarTrajectory::nodes(Role::J, 2.0, vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(n.l1(), 2.0);
        assert!(m.same_grid(&n));
        assert!(ScalarTrajectory::nodes(Role::J, 1.0, vec![1.0, -1.0]).is_err());
    }
}
