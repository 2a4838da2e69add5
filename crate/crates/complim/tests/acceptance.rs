//! One PASS/FAIL line per acceptance criterion at desk scale
//! (N_u = N_p = 8, T = 1, ρ₀ = μ = 1 unless stated).

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use complim::basis::{project_velocity, PressureCoeffs, VelocityCoeffs};
use complim::compressible::{apriori_check, energy_ledger, mass_series, simulate_compressible, CompressibleParams};
use complim::exec::Execution;
use complim::field::TimeFactor;
use complim::incompressible::{incompressible_energy_ledger, simulate_incompressible};
use complim::inequality::{mixed_constants, verify_mixed};
use complim::limit_lab::{sweep_alpha_with, ExperimentKind, Metric, SweepConfig, SweepResult, SweepSetup};
use complim::operators::{bogovskii, grad_inverse, leray_project};
use complim::presets::{generic_p0, Datum, Physics, Preset, ProblemData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 6];
    for (n_u, n_p) in [(8, 8), (8, 6), (5, 5), (3, 2)] {
        let s = common::setup(n_u, n_p);
        for _ in 0..10 {
            let c = VelocityCoeffs { values: random_vec(&mut rng, s.ops.m_u) };
            let parts = leray_project(&s.ops, &c).map_err(|e| e.to_string())?;
            let again = leray_project(&s.ops, &parts.solenoidal).map_err(|e| e.to_string())?;
            let norm = s.ops.l2_norm_sq(&c.values);
            worst[0] = worst[0].max((&again.solenoidal.values - &parts.solenoidal.values).norm() / c.values.norm());
            let split = s.ops.l2_norm_sq(&parts.solenoidal.values) + s.ops.l2_norm_sq(&parts.gradient.values);
            worst[1] = worst[1].max((split - norm).abs() / norm);

            let mut q = random_vec(&mut rng, s.ops.m_p);
            q[0] = 0.0;
            let grad = s.ops.discrete_gradient(&PressureCoeffs { values: q.clone() }).map_err(|e| e.to_string())?;
            let pg = leray_project(&s.ops, &grad).map_err(|e| e.to_string())?;
            worst[2] = worst[2].max(pg.solenoidal.values.norm() / grad.values.norm());

            // Bᵀq recovered; the difference lies in the divergence-blind modes
            let g = s.ops.b.transpose() * &q;
            let back = grad_inverse(&s.ops, &(-&g)).map_err(|e| e.to_string())?.values;
            worst[3] = worst[3].max((s.ops.b.transpose() * &back - &g).norm() / g.norm());
            worst[4] = worst[4].max(back.dot(&(&q - &back)).abs() / q.norm_squared());

            let fq = PressureCoeffs { values: &s.ops.b * &c.values };
            let sol = bogovskii(&s.ops, &fq).map_err(|e| e.to_string())?;
            worst[5] = worst[5].max(sol.residual / fq.values.norm());
        }
    }
    let tol = [1e-12, 1e-12, 1e-12, 1e-8, 1e-10, 1e-8];
    let names = ["P_J idempotence", "Pythagoras", "P_J grad", "grad_inverse", "min-norm", "div bogovskii"];
    for k in 0..6 {
        ensure(worst[k] <= tol[k], || format!("{} error {:.3e} > {:.0e}", names[k], worst[k], tol[k]))?;
    }
    Ok(format!("worst relative errors {:.1e} {:.1e} {:.1e} {:.1e} {:.1e} {:.1e}", worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]))
}

fn oracle_equivalence() -> Outcome {
    let mut detail = vec![];
    for n in [1, 2] {
        let (e1, e2) = (common::compressible_error(n, 0.01), common::compressible_error(n, 0.005));
        let r = e1 / e2;
        ensure((3.5..=4.5).contains(&r), || format!("compressible N={n}: ratio {r:.3}"))?;
        detail.push(format!("comp N={n} {r:.3}"));
    }
    ensure(common::setup(1, 1).z.is_none(), || "N=1 should have no solenoidal space".into())?;
    let (e1, e2) = (common::incompressible_error(2, 0.01), common::incompressible_error(2, 0.005));
    let r = e1 / e2;
    ensure((3.5..=4.5).contains(&r), || format!("incompressible N=2: ratio {r:.3}"))?;
    detail.push(format!("incomp N=2 {r:.3} (N=1 empty)"));
    Ok(format!("halving ratios: {}", detail.join(", ")))
}

fn forced(p: &mut CompressibleParams, sigma: bool) {
    common::data(p);
    p.f = common::field("(cos(pi*y)*(1 + t), sin(pi*x)*t*t)");
    if sigma {
        p.sigma = common::field("x - 0.5").with_time(TimeFactor::polynomial(vec![0.0, 0.0, 3.0]));
    }
}

fn ledgers(n: usize, alpha: f64, eta: f64, dt: Option<f64>, sigma: bool) -> Result<(f64, f64, f64), String> {
    let s = common::setup(n, n);
    let mut p = CompressibleParams::unit(alpha, n);
    p.eta = eta;
    if let Some(dt) = dt {
        p.dt = dt;
    }
    forced(&mut p, sigma);
    let tr = simulate_compressible(&s.spec, &s.ops, &p).map_err(|e| e.to_string())?;
    let l = energy_ledger(&s.spec, &s.ops, &p, &tr).map_err(|e| e.to_string())?;
    let z = s.z.as_ref().unwrap();
    let ti = simulate_incompressible(&s.spec, &s.ops, z, &p).map_err(|e| e.to_string())?;
    let li = incompressible_energy_ledger(&s.spec, &s.ops, &p, &ti).map_err(|e| e.to_string())?;
    let m = mass_series(&tr);
    let drift = m.iter().map(|x| (x - m[0]).abs()).fold(0.0, f64::max);
    Ok((l.max_abs_cumulative(), li.max_abs_cumulative(), drift))
}

fn energy_equalities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for alpha in [1e-1, 1e-2, 1e-3] {
        for eta in [0.0, 0.5] {
            let (c, i, _) = ledgers(8, alpha, eta, None, true)?;
            ensure(c <= 1e-6 && i <= 1e-6, || format!("α={alpha} η={eta}: ledger {c:.3e} / {i:.3e} > 1e-6"))?;
            worst = worst.max(c).max(i);
            let (_, _, d) = ledgers(8, alpha, eta, None, false)?;
            ensure(d <= 1e-10, || format!("α={alpha} η={eta}: mass drift {d:.3e} > 1e-10"))?;
            drift = drift.max(d);
        }
    }
    let (c1, i1, _) = ledgers(4, 0.05, 0.5, Some(0.02), true)?;
    let (c2, i2, _) = ledgers(4, 0.05, 0.5, Some(0.01), true)?;
    let (rc, ri) = (c1 / c2, i1 / i2);
    ensure((3.5..=4.5).contains(&rc) && (3.5..=4.5).contains(&ri), || format!("refinement ratios {rc:.3} / {ri:.3} not second order"))?;
    Ok(format!("max ledger {worst:.2e}, refinement ratios {rc:.3}/{ri:.3}, mass drift {drift:.1e}"))
}

fn apriori_estimates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let s = common::setup(8, 8);
    let mut alphas = vec![];
    for k in 0..20 {
        // both ends of the range, then log-uniform
        let alpha = match k {
            0 => 1e-4,
            1 => 1e-1,
            _ => 10f64.powf(rng.gen_range(-4.0..-1.0)),
        };
        let mut p = CompressibleParams::unit(alpha, 8);
        p.mu = rng.gen_range(0.1..2.0);
        p.eta = if k % 2 == 0 { 0.0 } else { 0.5 };
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        p.u0 = common::field(&format!("({}*sin(pi*x)*sin(2*pi*y) + {}*x*y*(1-y), {}*x*(1-x)*cos(pi*y))", c[0], c[1], c[2]));
        p.p0 = common::field(&format!("{}*cos(pi*x) + {}*cos(pi*x)*cos(2*pi*y) + 0.1", c[3], c[4]));
        p.f = common::field(&format!("({}*cos(pi*y), sin(pi*x*y))", c[5]));
        p.sigma = common::field("x - 0.5").with_time(TimeFactor::polynomial(vec![c[0].abs(), c[1]]));
        let tr = simulate_compressible(&s.spec, &s.ops, &p).map_err(|e| e.to_string())?;
        let rep = apriori_check(&s.spec, &s.ops, &p, &tr).map_err(|e| e.to_string())?;
        ensure(rep.holds(), || format!("config {k} (α={alpha:.2e}, μ={:.2}): {:?}", p.mu, rep.violations()))?;
        alphas.push(alpha);
    }
    let lo = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().copied().fold(0.0, f64::max);
    Ok(format!("20 configs, α ∈ [{lo:.1e}, {hi:.1e}], 0 violations"))
}

fn lemma_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..100 {
        let s = common::synthetic_equality(&mut rng);
        let rep = verify_mixed(&s.i, &s.j, &s.a, &s.b, &s.c).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("instance {k}: {rep:?}"))?;
    }
    let k = mixed_constants(0.0).map_err(|e| e.to_string())?;
    ensure(k.c_a == 1.0 && k.c_a_tilde == 2.5, || format!("A = 0 constants ({}, {})", k.c_a, k.c_a_tilde))?;
    Ok("100/100 instances certified; A = 0 constants (1, 2.5)".into())
}

fn data(u0: Preset, p0: Option<Preset>, f: Option<Preset>) -> ProblemData {
    let mut d = ProblemData { u0: Datum::preset(u0), ..ProblemData::default() };
    if let Some(p) = p0 {
        d.p0 = Datum::preset(p);
    }
    if let Some(f) = f {
        d.f = Datum::preset(f);
    }
    d
}

fn dichotomy() -> Outcome {
    let mut detail = vec![];
    for eta in [0.0, 0.5] {
        for preset in [Preset::GradientU0, Preset::SolenoidalU0, Preset::MixedU0] {
            let mut cfg = SweepConfig::new(ExperimentKind::Weak, data(preset, None, None));
            cfg.physics = Physics { eta, ..Physics::default() };
            let setup = SweepSetup::new(&cfg).map_err(|e| e.to_string())?;
            let alpha = cfg.alpha_min();
            let x = setup.run_row(alpha).map_err(|e| e.to_string())?.x_alpha;
            // limit straight from the coefficients and the discrete projector
            let u0 = project_velocity(&setup.spec, &setup.base.u0).map_err(|e| e.to_string())?;
            let pj = leray_project(&setup.ops, &u0).map_err(|e| e.to_string())?.solenoidal;
            let e0 = setup.base.rho0 * setup.ops.l2_norm_sq(&u0.values);
            let l = e0 - setup.base.rho0 * setup.ops.l2_norm_sq(&pj.values);
            match preset {
                Preset::SolenoidalU0 => ensure(x <= 1e-2 * e0, || format!("solenoidal η={eta}: X = {x:.3e} > 1e-2·{e0:.3e}"))?,
                _ => ensure((x - l).abs() <= 0.05 * l, || format!("{} η={eta}: X = {x:.4} vs L = {l:.4}", preset.name()))?,
            }
            detail.push(format!("{}/η={eta}: X={x:.3e} L={l:.3e}", preset.name()));
        }
    }
    Ok(detail.join("; "))
}

fn sweep(cfg: &SweepConfig) -> Result<SweepResult, String> {
    let r = sweep_alpha_with(cfg, Execution::Parallel).map_err(|e| e.to_string())?;
    if let Some(row) = r.rows.iter().find(|row| row.outcome.is_err()) {
        return Err(format!("row α={} failed: {:?}", row.alpha, row.outcome));
    }
    Ok(r)
}

fn weak_convergence() -> Outcome {
    let cfg = SweepConfig::new(ExperimentKind::Weak, data(Preset::GradientU0, None, None));
    let r = sweep(&cfg)?;
    let rows: Vec<_> = r.rows.iter().map(|row| row.outcome.as_ref().unwrap()).collect();
    let k = rows[0].probe_deltas.len();
    let mut worst_ratio: f64 = 0.0;
    for j in 0..k {
        let d: Vec<f64> = rows.iter().map(|m| m.probe_deltas[j]).collect();
        ensure(d.windows(2).all(|w| w[1] < w[0]), || format!("probe {j} not decreasing: {d:?}"))?;
        let ratio = d[d.len() - 1] / d[0];
        ensure(ratio <= 1e-2, || format!("probe {j}: smallest/largest {ratio:.3e} > 1e-2"))?;
        worst_ratio = worst_ratio.max(ratio);
    }
    let floor = 0.5 * (r.x_limit / cfg.physics.rho0).sqrt();
    let min_err = rows.iter().map(|m| m.err_vel_linf_l2).fold(f64::INFINITY, f64::min);
    ensure(min_err >= floor, || format!("err_vel_LinfL2 {min_err:.4} < ½√(L/ρ₀) = {floor:.4}"))?;
    Ok(format!("{k} probes decreasing, worst last/first {worst_ratio:.2e}; min err_vel_LinfL2 {min_err:.4} ≥ {floor:.4}"))
}

fn velocity_rate() -> Outcome {
    let cfg = SweepConfig::new(ExperimentKind::StrongVelocity, data(Preset::SolenoidalU0, Some(Preset::GenericP0), Some(Preset::StokesSteadyF)));
    let r = sweep(&cfg)?;
    let slope = r.fit(Metric::VelL2H1).map_err(|e| e.to_string())?.slope;
    ensure(slope >= 0.45, || format!("velocity slope {slope:.3} < 0.45"))?;
    let (_, pres) = r.column(Metric::PresLinfL2);
    // no growth: nothing above the largest-α error beyond roundoff
    ensure(pres.iter().all(|&e| e <= pres[0] * (1.0 + 1e-3)), || format!("pressure error grows: {pres:?}"))?;

    // the steady pair has p′ = (1,0) mode; align its mean with p₀
    let s = common::setup(8, 8);
    let p0 = generic_p0(&s.spec).map_err(|e| e.to_string())?;
    let mut p_ref = PressureCoeffs::unit(&s.spec, 1, 0);
    p_ref.values[0] = p0.mean();
    let gap = (&p0.values - &p_ref.values).norm();
    let min_pres = pres.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min_pres >= gap - 1e-3, || format!("err_pres_LinfL2 {min_pres:.6} < gap {gap:.6} − 1e-3"))?;
    Ok(format!("velocity slope {slope:.3}; pressure error in [{min_pres:.4}, {:.4}], gap {gap:.4}", pres[0]))
}

fn pressure_rate() -> Outcome {
    let cfg = SweepConfig::new(ExperimentKind::PressureStrong, data(Preset::SolenoidalU0, Some(Preset::CompatibleP0), Some(Preset::StokesSteadyF)));
    let r = sweep(&cfg)?;
    let slope = r.fit(Metric::PresLinfL2).map_err(|e| e.to_string())?.slope;
    let (_, pres) = r.column(Metric::PresLinfL2);
    let ratio = pres[pres.len() - 1] / pres[0];
    ensure(slope >= 0.45, || format!("pressure slope {slope:.3} < 0.45"))?;
    ensure(ratio <= 1e-1, || format!("smallest/largest {ratio:.3e} > 1e-1"))?;
    Ok(format!("pressure slope {slope:.3}, smallest/largest {ratio:.2e}"))
}

fn cli_sweep(config: &Path, out: &Path, threads: &str) -> Result<Vec<Vec<u8>>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_complim"))
        .args(["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("COMPLIM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    ["sweep.csv", "sweep_probes.csv", "sweep.meta"].iter().map(|f| fs::read(out.join(f)).map_err(|e| e.to_string())).collect()
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/strong_velocity.cfg");
    let first = cli_sweep(&config, &dir.path().join("a"), "0")?;
    let second = cli_sweep(&config, &dir.path().join("b"), "0")?;
    let seq = cli_sweep(&config, &dir.path().join("c"), "1")?;
    let four = cli_sweep(&config, &dir.path().join("d"), "4")?;
    ensure(first == second, || "repeated sweeps differ".into())?;
    ensure(first == seq && first == four, || "sweep output depends on COMPLIM_THREADS".into())?;
    Ok(format!("4 CLI sweeps byte-identical ({} bytes of sweep.csv; threads default/1/4)", first[0].len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("operator identities", operator_identities),
        ("matrix-exponential oracles", oracle_equivalence),
        ("discrete energy equalities", energy_equalities),
        ("a-priori estimates", apriori_estimates),
        ("mixed inequality certificate", lemma_certificate),
        ("X_alpha dichotomy", dichotomy),
        ("weak without strong convergence", weak_convergence),
        ("velocity rate", velocity_rate),
        ("pressure rate", pressure_rate),
        ("reproducibility", reproducibility),
    ];
    let mut failed = vec![];
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
