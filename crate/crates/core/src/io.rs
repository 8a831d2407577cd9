//! Persistence: CSV reports and a bit-exact binary snapshot format.
//!
//! Floats are written with Rust's shortest-roundtrip formatting, so parsing
//! a written value back yields the identical bits; the ledger file can be
//! re-audited from disk alone.

use crate::diagnostics::MonitorSeries;
use crate::grid::Grid;
use crate::solver::LedgerRow;
use crate::sweep::SweepReport;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"TVKV0001";

pub fn write_ledger_csv(path: &Path, rows: &[LedgerRow]) -> io::Result<()> {
    let mut out = String::from("step,t,energy,diss_bilap,diss_lap_u,num_diss_v,num_diss_u,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.step, r.t, r.energy, r.diss_bilap, r.diss_lap_u, r.num_diss_v, r.num_diss_u, r.residual
        ));
    }
    fs::write(path, out)
}

/// Re-check the ledger identity from the file alone: for consecutive rows,
/// `energy1 - energy0 + dissipation(row1) - residual(row1)` must vanish.
/// Returns the worst defect.
pub fn audit_ledger_csv(path: &Path) -> io::Result<f64> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<Result<_, _>>()?;
        if cols.len() != 8 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("expected 8 columns, got {}", cols.len()),
            ));
        }
        rows.push(cols);
    }
    let mut worst = 0.0f64;
    for w in rows.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let defect = cur[2] - prev[2] + cur[3] + cur[4] + cur[5] + cur[6] - cur[7];
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

pub fn write_monitor_csv(path: &Path, series: &MonitorSeries) -> io::Result<()> {
    let mut out = String::from("t,value\n");
    for (t, v) in series.times.iter().zip(&series.values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    fs::write(path, out)
}

pub fn write_cauchy_csv(path: &Path, report: &SweepReport) -> io::Result<()> {
    let mut out = String::from("eps_hi,eps_lo,d_v,d_u,d_theta,d_flux\n");
    for row in &report.cauchy {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.eps_hi, row.eps_lo, row.d_v, row.d_u, row.d_theta, row.d_flux
        ));
    }
    fs::write(path, out)
}

pub fn write_sweep_report_csv(path: &Path, report: &SweepReport) -> io::Result<()> {
    let monitor_names: Vec<String> = report
        .runs
        .first()
        .map(|r| r.monitors.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut out = String::from("run,eps,nodes_x,nodes_y,hx,hy,dt");
    for n in &monitor_names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",final_energy,final_theta_mass,res_momentum,res_temperature\n");
    for (k, r) in report.runs.iter().enumerate() {
        out.push_str(&format!(
            "{k},{},{},{},{},{},{}",
            r.eps, r.nodes[0], r.nodes[1], r.spacing[0], r.spacing[1], r.dt
        ));
        for n in &monitor_names {
            let v = r
                .monitors
                .iter()
                .find(|(name, _)| name == n)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN);
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            r.final_energy, r.final_theta_mass, r.res_momentum, r.res_temperature
        ));
    }
    fs::write(path, out)
}

pub fn write_orders_csv(path: &Path, report: &SweepReport) -> io::Result<()> {
    let mut out = String::from("name,order,note\n");
    if let Some(fit) = &report.order_momentum {
        out.push_str(&format!("order_momentum,{},{}\n", fit.order, fit.note));
    }
    if let Some(fit) = &report.order_temperature {
        out.push_str(&format!("order_temperature,{},{}\n", fit.order, fit.note));
    }
    for (name, ratio) in &report.monitor_ratios {
        out.push_str(&format!("ratio_{name},{ratio},max-over-min across runs\n"));
    }
    fs::write(path, out)
}

/// Write one nodal field: `magic | dim | nodes per axis | t | row-major
/// float64 values`, all little-endian.
pub fn write_snapshot(path: &Path, grid: &Grid, t: f64, values: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 + 4 * grid.dim + 8 + 8 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.dim as u32).to_le_bytes());
    for ax in 0..grid.dim {
        buf.extend_from_slice(&(grid.nodes[ax] as u32).to_le_bytes());
    }
    buf.extend_from_slice(&t.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)
}

/// Read a snapshot back; returns `(dim, nodes, t, values)` bit-exactly.
pub fn read_snapshot(path: &Path) -> io::Result<(usize, Vec<usize>, f64, Vec<f64>)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if buf.len() < 12 || &buf[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut pos = 8;
    let mut take4 = |buf: &[u8]| -> io::Result<u32> {
        if pos + 4 > buf.len() {
            return Err(bad("truncated header"));
        }
        let v = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap());
        pos += 4;
        Ok(v)
    };
    let dim = take4(&buf)? as usize;
    if dim == 0 || dim > 2 {
        return Err(bad("bad dimension"));
    }
    let mut nodes = Vec::new();
    for _ in 0..dim {
        nodes.push(take4(&buf)? as usize);
    }
    if pos + 8 > buf.len() {
        return Err(bad("truncated header"));
    }
    let t = f64::from_le_bytes(buf[pos..pos + 8].try_into().unwrap());
    pos += 8;
    let count: usize = nodes.iter().product();
    if buf.len() != pos + 8 * count {
        return Err(bad("value payload size mismatch"));
    }
    let values = buf[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dim, nodes, t, values))
}
