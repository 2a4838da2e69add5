mod common;

use complim::basis::{project_pressure, PressureCoeffs};
use complim::compressible::*;
use complim::field::{SampledField, TimeFactor};
use complim::incompressible::*;

#[test]
fn compressible_matches_matrix_exponential() {
    for n in [1, 2] {
        let (e1, e2) = (common::compressible_error(n, 0.01), common::compressible_error(n, 0.005));
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "N={n}: ratio {ratio} ({e1:.3e} -> {e2:.3e})");
    }
}

#[test]
fn incompressible_matches_matrix_exponential() {
    for n in [2, 3] {
        let (e1, e2) = (common::incompressible_error(n, 0.01), common::incompressible_error(n, 0.005));
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "N={n}: ratio {ratio} ({e1:.3e} -> {e2:.3e})");
    }
    // N = 1 has no discrete solenoidal space
    assert!(common::setup(1, 1).z.is_none());
}

fn forced(p: &mut CompressibleParams) {
    common::data(p);
    p.f = common::field("(cos(pi*y)*(1 + t), sin(pi*x)*t*t)");
    p.sigma = common::field("x - 0.5").with_time(TimeFactor::polynomial(vec![0.0, 0.0, 3.0]));
}

fn ledger_max(n: usize, dt: f64) -> (f64, f64) {
    let s = common::setup(n, n);
    let mut p = CompressibleParams::unit(0.05, n);
    p.eta = 0.5;
    p.dt = dt;
    forced(&mut p);
    let tr = simulate_compressible(&s.spec, &s.ops, &p).unwrap();
    let l = energy_ledger(&s.spec, &s.ops, &p, &tr).unwrap();
    let z = s.z.as_ref().unwrap();
    let ti = simulate_incompressible(&s.spec, &s.ops, z, &p).unwrap();
    let li = incompressible_energy_ledger(&s.spec, &s.ops, &p, &ti).unwrap();
    (l.max_abs_cumulative(), li.max_abs_cumulative())
}

#[test]
fn energy_ledger_second_order() {
    let (c1, i1) = ledger_max(4, 0.02);
    let (c2, i2) = ledger_max(4, 0.01);
    assert!((3.5..=4.5).contains(&(c1 / c2)), "compressible {c1:.3e} -> {c2:.3e}");
    assert!((3.5..=4.5).contains(&(i1 / i2)), "incompressible {i1:.3e} -> {i2:.3e}");
}

#[test]
fn unforced_ledger_is_exact_and_mass_conserved() {
    let s = common::setup(5, 5);
    let mut p = CompressibleParams::unit(0.01, 5);
    p.eta = 0.5;
    common::data(&mut p);
    let tr = simulate_compressible(&s.spec, &s.ops, &p).unwrap();
    let l = energy_ledger(&s.spec, &s.ops, &p, &tr).unwrap();
    assert!(l.max_abs_cumulative() < 1e-12, "{}", l.max_abs_cumulative());
    let m = mass_series(&tr);
    assert!(m.iter().all(|v| (v - m[0]).abs() <= 1e-10));
    // dissipation-only balance: I(T) + Σ dissipation = I(0)
    let last = tr.grid.steps;
    assert!((l.energy[last] + l.dissipation[last] - l.energy[0]).abs() < 1e-12);
}

#[test]
fn constant_mass_source_integrates_exactly() {
    let s = common::setup(3, 3);
    let mut p = CompressibleParams::unit(0.01, 3);
    common::data(&mut p);
    p.sigma = common::field("0.7");
    let tr = simulate_compressible(&s.spec, &s.ops, &p).unwrap();
    let m = mass_series(&tr);
    for (n, v) in m.iter().enumerate() {
        assert!((v - m[0] - 0.7 * tr.grid.time(n)).abs() <= 1e-8);
    }
}

#[test]
fn simulation_is_deterministic_and_linear() {
    let s = common::setup(3, 3);
    let mut p = CompressibleParams::unit(0.05, 3);
    p.dt = 0.01;
    forced(&mut p);
    let a = simulate_compressible(&s.spec, &s.ops, &p).unwrap();
    assert_eq!(a, simulate_compressible(&s.spec, &s.ops, &p).unwrap());
    // f enters bilinearly through αpf, so scale only the linear data
    let mut q = p.clone();
    q.f = SampledField::zero_vector();
    q.s = MomentumSource::Field(common::field("(cos(pi*y), x)"));
    let base = simulate_compressible(&s.spec, &s.ops, &q).unwrap();
    let mut q3 = q.clone();
    q3.u0 = q.u0.clone().with_time(TimeFactor::polynomial(vec![3.0]));
    q3.p0 = q.p0.clone().with_time(TimeFactor::polynomial(vec![3.0]));
    q3.sigma = q.sigma.clone().with_time(TimeFactor::piecewise(vec![(0.0, vec![0.0, 0.0, 9.0])]).unwrap());
    q3.s = MomentumSource::Field(common::field("(3*cos(pi*y), 3*x)"));
    let tripled = simulate_compressible(&s.spec, &s.ops, &q3).unwrap();
    let scale = base.c.iter().map(|c| c.amax()).fold(0.0, f64::max);
    for (x, y) in base.c.iter().zip(&tripled.c) {
        assert!((x * 3.0 - y).amax() <= 1e-10 * 3.0 * scale);
    }
}

#[test]
fn initial_pressure_inverts_a_constructed_residual() {
    let s = common::setup(6, 6);
    let z = s.z.as_ref().unwrap();
    let mut qstar = PressureCoeffs::unit(&s.spec, 1, 2);
    qstar.values[s.spec.pressure_flat(3, 0)] = -0.4;
    // zero velocity: the residual is F itself, so F = −Bᵀq* gives q*
    let load = -(s.ops.b.transpose() * &qstar.values);
    let u0 = complim::basis::VelocityCoeffs::zeros(&s.spec);
    let q = initial_pressure(&s.ops, z, 1.0, 1.0, &u0, &load).unwrap();
    assert!((q.values - qstar.values).amax() < 1e-10);
}

#[test]
fn initial_pressure_agrees_with_the_first_node_limit() {
    // steps small enough that CN resolves the stiffest Stokes mode
    let s = common::setup(5, 5);
    let z = s.z.as_ref().unwrap();
    let mut p = CompressibleParams::unit(0.1, 5);
    forced(&mut p);
    let q0 = initial_pressure_for(&s.spec, &s.ops, z, &p).unwrap();
    let mut gaps = vec![];
    for dt in [1e-3, 5e-4, 2.5e-4] {
        p.dt = dt;
        let tr = simulate_incompressible(&s.spec, &s.ops, z, &p).unwrap();
        assert!((&tr.q[0] - &q0.values).amax() < 1e-12);
        gaps.push((&tr.q[1] - &q0.values).norm());
    }
    assert!(gaps.windows(2).all(|w| w[1] < 0.6 * w[0]), "{gaps:?}");
}

#[test]
fn recovered_pressure_satisfies_galerkin_orthogonality() {
    let s = common::setup(5, 5);
    let z = s.z.as_ref().unwrap();
    let mut p = CompressibleParams::unit(0.1, 5);
    p.dt = 0.01;
    forced(&mut p);
    let tr = simulate_incompressible(&s.spec, &s.ops, z, &p).unwrap();
    let p0 = project_pressure(&s.spec, &p.p0).unwrap();
    let shifted = shift_pressure_mean(&tr, p0.mean());
    for (n, q) in shifted.q.iter().enumerate() {
        assert_eq!(q[0], p0.mean());
        // the mean row of B is zero, so the shift leaves Bᵀq unchanged
        assert!((s.ops.b.transpose() * (q - &tr.q[n])).amax() == 0.0);
        assert!(s.ops.divergence_residual(&tr.c[n]) <= 1e-10);
    }
}
