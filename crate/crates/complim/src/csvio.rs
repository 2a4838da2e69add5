//! CSV output (17 significant digits, atomic writes) and series input.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use thiserror::Error;

use crate::compressible::{EnergyLedger, Trajectory};
use crate::grid::TimeGrid;
use crate::incompressible::IncompressibleTrajectory;
use crate::inequality::{Role, Sampling, ScalarTrajectory};
use crate::limit_lab::SweepResult;
use crate::operators::OperatorSet;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// 17 significant digits: every f64 round-trips.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Temp file in the target directory, then rename: readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let io = |source| IoError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("ascii csv")
}

pub fn compressible_trajectory_csv(ops: &OperatorSet, traj: &Trajectory, ledger: &EnergyLedger) -> String {
    let rows = (0..traj.grid.nodes()).map(|n| {
        vec![
            num(traj.grid.time(n)),
            num(traj.energy(ops, n)),
            num(traj.h01_norm(n)),
            num(traj.div_norm(ops, n)),
            num(traj.mass(n)),
            num(ledger.cumulative[n]),
        ]
    });
    table(&["t", "I", "h01_norm", "div_norm", "mass", "energy_residual"], rows)
}

pub fn incompressible_trajectory_csv(ops: &OperatorSet, traj: &IncompressibleTrajectory, ledger: &EnergyLedger) -> String {
    let rows = (0..traj.grid.nodes()).map(|n| {
        vec![
            num(traj.grid.time(n)),
            num(traj.energy(ops, n)),
            num(traj.c[n].norm()),
            num(ops.div_norm_sq(&traj.c[n]).max(0.0).sqrt()),
            num(ledger.cumulative[n]),
        ]
    });
    table(&["t", "I", "h01_norm", "div_norm", "energy_residual"], rows)
}

pub fn coefficient_csv(grid: &TimeGrid, c: &[DVector<f64>], q: &[DVector<f64>]) -> String {
    let (mu, mp) = (c.first().map_or(0, |v| v.len()), q.first().map_or(0, |v| v.len()));
    let mut header = vec!["t".to_string()];
    header.extend((0..mu).map(|i| format!("c_{i}")));
    header.extend((0..mp).map(|i| format!("q_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..grid.nodes()).map(|n| {
        let mut r = vec![num(grid.time(n))];
        r.extend(c[n].iter().chain(q[n].iter()).map(|&v| num(v)));
        r
    });
    table(&header, rows)
}

pub fn ledger_csv(grid: &TimeGrid, ledger: &EnergyLedger) -> String {
    let rows = (0..grid.steps).map(|n| {
        vec![
            n.to_string(),
            num(grid.time(n + 1)),
            num(ledger.energy[n + 1]),
            num(ledger.per_step[n]),
            num(ledger.cumulative[n + 1]),
            num(ledger.dissipation[n + 1]),
            num(ledger.work[n + 1]),
        ]
    });
    table(&["step", "t", "energy", "step_residual", "cumulative_residual", "dissipation", "work"], rows)
}

pub fn series_csv(s: &ScalarTrajectory) -> String {
    table(&["t", "value"], s.times().into_iter().zip(&s.values).map(|(t, &v)| vec![num(t), num(v)]))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| IoError::Format {
                path: path.to_path_buf(),
                message: format!("row {} has a non-numeric field", i + 1),
            })?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>, IoError> {
    let (header, rows) = read_table(path)?;
    let idx = header.iter().position(|h| h == name).ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        message: format!("no `{name}` column"),
    })?;
    Ok(rows.into_iter().map(|r| r[idx]).collect())
}

/// `t,value` series; a first sample at t = 0 means nodes, otherwise midpoints.
pub fn read_series(path: &Path, role: Role) -> Result<ScalarTrajectory, IoError> {
    let fmt_err = |message: String| IoError::Format { path: path.to_path_buf(), message };
    let (header, rows) = read_table(path)?;
    if header != ["t", "value"] {
        return Err(fmt_err(format!("expected header t,value, got {}", header.join(","))));
    }
    if rows.len() < 2 {
        return Err(fmt_err("need at least two samples".into()));
    }
    let (ts, values): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    let (sampling, steps, t_final) = if ts[0] == 0.0 {
        (Sampling::Nodes, ts.len() - 1, ts[ts.len() - 1])
    } else {
        (Sampling::Midpoints, ts.len(), ts[ts.len() - 1] + ts[0])
    };
    let s = ScalarTrajectory::new(role, t_final, steps, sampling, values).map_err(|e| fmt_err(e.to_string()))?;
    let dt = s.dt();
    if s.times().iter().zip(&ts).any(|(a, b)| (a - b).abs() > 1e-9 * dt) {
        return Err(fmt_err("sample times are not uniform".into()));
    }
    Ok(s)
}

pub const SWEEP_HEADER: [&str; 7] = ["alpha", "err_vel_L2H1", "err_vel_LinfL2", "err_pres_LinfL2", "x_alpha", "x_limit", "probe_max"];

/// Failed rows carry NaN metrics; the diagnostic goes to the sidecar.
pub fn sweep_csv(r: &SweepResult) -> String {
    let rows = r.rows.iter().map(|row| {
        let m = row.outcome.as_ref().ok();
        let f = |v: Option<f64>| num(v.unwrap_or(f64::NAN));
        vec![
            num(row.alpha),
            f(m.map(|m| m.err_vel_l2h1)),
            f(m.map(|m| m.err_vel_linf_l2)),
            f(m.map(|m| m.err_pres_linf_l2)),
            f(m.map(|m| m.x_alpha)),
            num(r.x_limit),
            f(m.map(|m| m.probe_max())),
        ]
    });
    table(&SWEEP_HEADER, rows)
}

pub fn probe_csv(r: &SweepResult) -> String {
    let k = r.probes;
    let mut header = vec!["alpha".to_string()];
    header.extend((0..k).map(|i| format!("probe_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = r.rows.iter().map(|row| {
        let mut out = vec![num(row.alpha)];
        match &row.outcome {
            Ok(m) => out.extend(m.probe_deltas.iter().map(|&v| num(v))),
            Err(_) => out.extend((0..k).map(|_| num(f64::NAN))),
        }
        out
    });
    table(&header, rows)
}

/// Sidecar: run facts, rate fits, row diagnostics and the canonical config.
pub fn sweep_metadata(r: &SweepResult, config_text: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind = {}", r.kind);
    let _ = writeln!(s, "seed = {}", r.seed);
    let _ = writeln!(s, "probes = {}", r.probes);
    let _ = writeln!(s, "N_u = {}\nN_p = {}\nm_V = {}", r.n_u, r.n_p, r.m_v);
    let _ = writeln!(s, "spurious_pressure_modes = {}", r.spurious_pressure_modes);
    let _ = writeln!(s, "dt = {}\nsteps = {}", num(r.dt), r.steps);
    let _ = writeln!(s, "x_limit = {}", num(r.x_limit));
    let _ = writeln!(s, "initial_energy = {}", num(r.initial_energy));
    let _ = writeln!(s, "initial_pressure_gap = {}", num(r.initial_pressure_gap));
    use crate::limit_lab::Metric;
    for (name, m) in [("err_vel_L2H1", Metric::VelL2H1), ("err_pres_LinfL2", Metric::PresLinfL2), ("x_alpha", Metric::XAlpha)] {
        match r.fit(m) {
            Ok(f) => {
                let _ = writeln!(s, "fit_{name} = slope {} intercept {} residual {}", num(f.slope), num(f.intercept), num(f.residual));
            }
            Err(e) => {
                let _ = writeln!(s, "fit_{name} = unavailable ({e})");
            }
        }
    }
    for row in &r.rows {
        if let Err(e) = &row.outcome {
            let _ = writeln!(s, "failed alpha {} : {e}", num(row.alpha));
        }
    }
    s.push_str("\n# configuration\n");
    s.push_str(config_text);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1 + 0.2, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn series_round_trip_both_samplings() {
        let dir = tempfile::tempdir().unwrap();
        for sampling in [Sampling::Nodes, Sampling::Midpoints] {
            let len = if sampling == Sampling::Nodes { 11 } else { 10 };
            let values: Vec<f64> = (0..len).map(|k| (k as f64).sqrt()).collect();
            let s = ScalarTrajectory::new(Role::J, 2.0, 10, sampling, values).unwrap();
            let path = dir.path().join("s.csv");
            write_atomic(&path, &series_csv(&s)).unwrap();
            let back = read_series(&path, Role::J).unwrap();
            assert_eq!(back.sampling, sampling);
            assert_eq!(back.steps, 10);
            assert!((back.t_final - 2.0).abs() < 1e-15);
            assert_eq!(back.values, s.values);
        }
    }

    #[test]
    fn malformed_series_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        write_atomic(&path, "t,value\n0,1\n0.1,x\n").unwrap();
        assert!(read_series(&path, Role::I).is_err());
        write_atomic(&path, "time,v\n0,1\n0.1,2\n").unwrap();
        assert!(read_series(&path, Role::I).is_err());
        write_atomic(&path, "t,value\n0,1\n0.1,2\n0.3,2\n").unwrap();
        assert!(read_series(&path, Role::I).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
