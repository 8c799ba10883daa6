//! CSV artifact writers with stable column contracts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so two
//! runs with identical inputs produce byte-identical bodies. The optional
//! timestamp comment line is the only non-deterministic content; callers
//! suppress it by passing `None`.

use std::fs::File;
use std::io::{BufWriter, Result, Write};
use std::path::Path;

use crate::evolution::Trajectory;
use crate::stationary::StationarySolution;

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn timestamp_line(out: &mut impl Write, stamp: Option<u64>) -> Result<()> {
    if let Some(s) = stamp {
        writeln!(out, "# generated-at-unix: {s}")?;
    }
    Ok(())
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Columns: x, v_bar, u_bar.
pub fn write_stationary_csv(
    path: &Path,
    sol: &StationarySolution,
    stamp: Option<u64>,
) -> Result<()> {
    let mut out = open(path)?;
    timestamp_line(&mut out, stamp)?;
    writeln!(out, "x,v_bar,u_bar")?;
    let grid = sol.v_bar.grid();
    for i in 0..grid.n() {
        writeln!(
            out,
            "{},{},{}",
            grid.node(i),
            sol.v_bar.values()[i],
            sol.u_bar.values()[i]
        )?;
    }
    out.flush()
}

/// Columns: t, mass, min_u, min_v, linf_u_err, linf_v_err, l2_phi, l2_psi,
/// E_weighted. Diagnostics that do not apply to the run are left empty.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, stamp: Option<u64>) -> Result<()> {
    let mut out = open(path)?;
    timestamp_line(&mut out, stamp)?;
    writeln!(out, "t,mass,min_u,min_v,linf_u_err,linf_v_err,l2_phi,l2_psi,E_weighted")?;
    for s in &traj.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            s.mass,
            s.min_u,
            s.min_v,
            s.linf_u_err,
            s.linf_v_err,
            s.l2_phi,
            s.l2_psi,
            cell(s.e_weighted)
        )?;
    }
    out.flush()
}

/// Columns: t, E_weighted, E_extended, E_d0, smallness_h1.
pub fn write_energies_csv(path: &Path, traj: &Trajectory, stamp: Option<u64>) -> Result<()> {
    let mut out = open(path)?;
    timestamp_line(&mut out, stamp)?;
    writeln!(out, "t,E_weighted,E_extended,E_d0,smallness_h1")?;
    for s in &traj.samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.t,
            cell(s.e_weighted),
            cell(s.e_extended),
            cell(s.e_d0),
            s.smallness_h1
        )?;
    }
    out.flush()
}
