#![allow(dead_code)]

use complim::basis::{build_basis, BasisSpec};
use complim::incompressible::{nullspace_basis, SolenoidalBasis};
use complim::inequality::{Role, Sampling, ScalarTrajectory};
use complim::operators::{assemble, OperatorSet};
use complim::basis::project_velocity;
use complim::compressible::{simulate_compressible, CompressibleParams};
use complim::expr::parse_expression;
use complim::field::SampledField;
use complim::incompressible::simulate_incompressible;
use complim::operators::leray_project;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub struct Setup {
    pub spec: BasisSpec,
    pub ops: OperatorSet,
    pub z: Option<SolenoidalBasis>,
}

pub fn setup(n_u: usize, n_p: usize) -> Setup {
    let spec = build_basis(n_u as i64, n_p as i64).unwrap();
    let ops = assemble(&spec).unwrap();
    let z = nullspace_basis(&ops).ok();
    Setup { spec, ops, z }
}

/// An instance of I′ + J² = aI + bJ + c made exact on the grid: J, b, c at
/// midpoints, a constant per interval, I advanced by the implicit trapezoid
/// rule so the interval identity holds with Ī = (I_n + I_{n+1})/2.
pub struct Synthetic {
    pub i: ScalarTrajectory,
    pub j: ScalarTrajectory,
    pub a: ScalarTrajectory,
    pub b: ScalarTrajectory,
    pub c: ScalarTrajectory,
}

pub fn synthetic_equality(rng: &mut impl Rng) -> Synthetic {
    let t_final = rng.gen_range(0.5..2.0);
    let steps = rng.gen_range(50..400);
    let dt = t_final / steps as f64;
    let smooth = |rng: &mut dyn rand::RngCore, scale: f64| {
        let (c0, c1, w, ph) = (rng.gen_range(0.0..scale), rng.gen_range(0.0..scale), rng.gen_range(0.5..8.0), rng.gen_range(0.0..6.3));
        move |t: f64| c0 + c1 * (w * t + ph).sin().powi(2)
    };
    let fa = smooth(rng, 3.0);
    let fb = smooth(rng, 2.0);
    let fc = smooth(rng, 1.0);
    let frac = smooth(rng, 0.5);
    let mut i = vec![rng.gen_range(0.0..3.0)];
    let (mut j, mut a, mut b, mut c) = (vec![], vec![], vec![], vec![]);
    for n in 0..steps {
        let tm = (n as f64 + 0.5) * dt;
        let (an, bn, cn) = (fa(tm), fb(tm), fc(tm));
        let h = 0.5 * an * dt;
        // largest J keeping I_{n+1} ≥ 0, then a fraction of it
        let room = cn + i[n] * (1.0 + h) / dt;
        let jmax = 0.5 * (bn + (bn * bn + 4.0 * room).sqrt());
        let jn = frac(tm).min(0.99) * jmax;
        let next = (i[n] * (1.0 + h) + dt * (bn * jn + cn - jn * jn)) / (1.0 - h);
        i.push(next.max(0.0));
        j.push(jn);
        a.push(an);
        b.push(bn);
        c.push(cn);
    }
    let mid = |role, v| ScalarTrajectory::new(role, t_final, steps, Sampling::Midpoints, v).unwrap();
    Synthetic {
        i: ScalarTrajectory::nodes(Role::I, t_final, i).unwrap(),
        j: mid(Role::J, j),
        a: mid(Role::A, a),
        b: mid(Role::B, b),
        c: mid(Role::C, c),
    }
}

pub fn field(text: &str) -> SampledField {
    SampledField::expression(parse_expression(text).unwrap())
}

pub fn data(p: &mut CompressibleParams) {
    p.u0 = field("(sin(pi*x)*sin(2*pi*y) + x*y*(1-y), x*(1-x)*cos(pi*y))");
    p.p0 = field("cos(pi*x) + 0.5*cos(pi*x)*cos(pi*y) + 0.2");
}

/// x′ = D⁻¹K x for the unforced system, stepped with exp(dt D⁻¹K).
pub fn exact_compressible(ops: &OperatorSet, p: &CompressibleParams, x0: &DVector<f64>, dt: f64, steps: usize) -> Vec<DVector<f64>> {
    let (mu, mp) = (ops.m_u, ops.m_p);
    let mut k = DMatrix::zeros(mu + mp, mu + mp);
    k.view_mut((0, 0), (mu, mu)).copy_from(&(-DMatrix::identity(mu, mu) * p.mu - &ops.e * p.eta));
    k.view_mut((0, mu), (mu, mp)).copy_from(&ops.b.transpose());
    k.view_mut((mu, 0), (mp, mu)).copy_from(&(-&ops.b * p.rho0));
    for r in 0..mu + mp {
        let d = if r < mu { p.rho0 * ops.mass[r] } else { p.alpha };
        k.row_mut(r).scale_mut(1.0 / d);
    }
    let phi = (k * dt).exp();
    let mut out = vec![x0.clone()];
    for _ in 0..steps {
        let next = &phi * out.last().unwrap();
        out.push(next);
    }
    out
}

pub fn compressible_error(n: usize, dt: f64) -> f64 {
    let s = setup(n, n);
    let mut p = CompressibleParams::unit(0.1, n);
    p.eta = 0.5;
    p.dt = dt;
    data(&mut p);
    let tr = simulate_compressible(&s.spec, &s.ops, &p).unwrap();
    let x0 = DVector::from_iterator(s.ops.m_u + s.ops.m_p, tr.c[0].iter().chain(tr.q[0].iter()).copied());
    let exact = exact_compressible(&s.ops, &p, &x0, tr.grid.dt(), tr.grid.steps);
    (0..tr.grid.nodes())
        .map(|i| {
            let x = DVector::from_iterator(x0.len(), tr.c[i].iter().chain(tr.q[i].iter()).copied());
            (x - &exact[i]).amax()
        })
        .fold(0.0, f64::max)
}

/// Reference in the Euclidean kernel coordinates w = Kᵀc: ρ₀(KᵀMK) ẇ = −μ w.
pub fn incompressible_error(n: usize, dt: f64) -> f64 {
    let s = setup(n, n);
    let z = s.z.as_ref().unwrap();
    let mut p = CompressibleParams::unit(0.1, n);
    p.dt = dt;
    data(&mut p);
    let tr = simulate_incompressible(&s.spec, &s.ops, z, &p).unwrap();
    let k = s.ops.kernel().clone();
    let mk = DMatrix::from_fn(s.ops.m_u, k.ncols(), |r, c| s.ops.mass[r] * k[(r, c)]);
    let sm = k.transpose() * mk;
    let gen = -sm.try_inverse().unwrap() * (p.mu / p.rho0);
    let phi = (gen * tr.grid.dt()).exp();
    let c0 = leray_project(&s.ops, &project_velocity(&s.spec, &p.u0).unwrap()).unwrap().solenoidal.values;
    let mut w = k.transpose() * &c0;
    let mut err: f64 = 0.0;
    for i in 0..tr.grid.nodes() {
        err = err.max((&tr.c[i] - &k * &w).amax());
        w = &phi * w;
    }
    err
}

