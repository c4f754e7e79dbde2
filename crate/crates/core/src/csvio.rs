//! CSV emission and parsing. All floating-point output goes through one
//! 17-significant-digit formatter so repeated runs are byte-identical and
//! values round-trip exactly.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::dde::Trajectory;
use crate::error::{Error, Result};

/// Formats with 17 significant digits; exact f64 round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory export: header `t,x1,...,xn`, one row per integrator node.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = traj.state_dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for (i, &t) in traj.node_times().iter().enumerate() {
        let x = traj.node_value(i);
        let mut row = Vec::with_capacity(n + 1);
        row.push(fmt_f64(t));
        for j in 0..n {
            row.push(fmt_f64(x[j]));
        }
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// State list: header `z1,...,z<dim>`, one row per state vector.
pub fn write_states_csv(path: &Path, states: &[DVector<f64>]) -> Result<()> {
    let dim = states.first().map_or(0, |s| s.len());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=dim).map(|i| format!("z{i}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for s in states {
        let row: Vec<String> = s.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a state list written by [`write_states_csv`] (or any headered CSV of
/// uniform float rows).
pub fn read_states_csv(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let _header = lines
        .next()
        .ok_or_else(|| Error::LengthMismatch(format!("{}: empty file", path.display())))?;
    let mut out = Vec::new();
    let mut width = None;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| {
            Error::LengthMismatch(format!("{}:{}: {e}", path.display(), lineno + 2))
        })?;
        if let Some(w) = width {
            if vals.len() != w {
                return Err(Error::LengthMismatch(format!(
                    "{}:{}: expected {w} columns, got {}",
                    path.display(),
                    lineno + 2,
                    vals.len()
                )));
            }
        } else {
            width = Some(vals.len());
        }
        out.push(DVector::from_vec(vals));
    }
    Ok(out)
}

/// Rollout export: header `k,t,z1,...,z<nM>`.
pub fn write_rollout_csv(
    path: &Path,
    states: &[crate::discretize::DiscretizedState],
    delta: f64,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = states.first().map_or(0, |s| s.len());
    let header: Vec<String> = ["k".to_string(), "t".to_string()]
        .into_iter()
        .chain((1..=dim).map(|i| format!("z{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for (k, s) in states.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(k as f64 * delta)];
        row.extend(s.data().iter().map(|&v| fmt_f64(v)));
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}
