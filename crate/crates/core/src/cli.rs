//! Command implementations behind the `run | sweep | check` binary.
//!
//! Exit codes: `run` returns 0 on success, 2 when the blow-up guard fires,
//! 1 on configuration problems; `sweep` returns 0 / 1 (configuration or
//! plan) / 3 (a sub-run failed); `check` returns 0 exactly when every
//! structural assumption passes.

use crate::config::{Config, SweepMode};
use crate::diagnostics::estimate_monitors;
use crate::grid::Grid;
use crate::io;
use crate::model::{validate_spec, InitialPreset, RegularizedProblem};
use crate::operators::build_operators;
use crate::solver::{run, SolverError};
use crate::sweep::{run_eps_sweep, run_refinement_sweep, SweepError, SweepPlan, SweepReport};
use std::path::{Path, PathBuf};

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

fn apply_overrides(cfg: &mut Config, ov: &Overrides) {
    if let Some(dir) = &ov.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = ov.seed {
        if let InitialPreset::RandomSeeded { seed: s, .. } = &mut cfg.preset {
            *s = seed;
        }
    }
}

fn load_config(path: &Path) -> Result<Config, i32> {
    Config::load(path).map_err(|errs| {
        eprintln!("config error in `{}`:", path.display());
        eprintln!("{errs}");
        1
    })
}

pub fn cmd_run(config_path: &Path, ov: &Overrides) -> i32 {
    let mut cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    apply_overrides(&mut cfg, ov);

    let ops = match build_operators(&cfg.grid) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("grid error: {e}");
            return 1;
        }
    };
    let data = match cfg.preset.realize(&cfg.grid) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("initial data error: {e}");
            return 1;
        }
    };
    let problem = match RegularizedProblem::new(&data, &cfg.coeff, cfg.run.epsilon, &ops, cfg.mollify_m0)
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("problem setup error: {e}");
            return 1;
        }
    };
    let traj = match run(&problem, &cfg.run, &cfg.grid) {
        Ok(t) => t,
        Err(SolverError::BlowupDetected {
            norm,
            value,
            threshold,
            t,
        }) => {
            eprintln!("blow-up detected at t = {t}: {norm} = {value} exceeds {threshold}");
            return 2;
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            return 1;
        }
    };

    if let Err(e) = write_run_outputs(&cfg, &traj) {
        eprintln!("cannot write outputs: {e}");
        return 1;
    }
    if !ov.quiet {
        let last = traj.ledger.last().unwrap();
        println!(
            "run complete: {} steps to t = {}, energy {} -> {}",
            traj.ledger.len() - 1,
            last.t,
            traj.initial_energy(),
            last.energy
        );
        println!("outputs in {}", cfg.out_dir.display());
    }
    0
}

fn write_run_outputs(cfg: &Config, traj: &crate::solver::Trajectory) -> std::io::Result<()> {
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    io::write_ledger_csv(&out.join("ledger.csv"), &traj.ledger)?;

    let ops = build_operators(&traj.grid).expect("grid validated earlier");
    let monitors_dir = out.join("monitors");
    std::fs::create_dir_all(&monitors_dir)?;
    match estimate_monitors(traj, &ops, &cfg.monitor) {
        Ok(series) => {
            for s in &series {
                io::write_monitor_csv(&monitors_dir.join(format!("{}.csv", s.name)), s)?;
            }
        }
        Err(e) => eprintln!("monitors skipped: {e}"),
    }

    let snaps_dir = out.join("snapshots");
    std::fs::create_dir_all(&snaps_dir)?;
    let m = traj.states.len();
    let count = cfg.snapshot_files.max(2).min(m);
    let mut indices: Vec<usize> = (0..count)
        .map(|k| ((k as f64) * (m - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    indices.dedup();
    for idx in indices {
        let s = &traj.states[idx];
        for (field, values) in [
            ("v", &s.v.values),
            ("u", &s.u.values),
            ("theta", &s.theta.values),
        ] {
            io::write_snapshot(
                &snaps_dir.join(format!("snap_{idx:06}_{field}.f64")),
                &traj.grid,
                s.t,
                values,
            )?;
        }
    }
    Ok(())
}

fn build_plan(cfg: &Config) -> Result<(SweepPlan, SweepMode), String> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| "config has no [sweep] section".to_string())?;
    let mode = sweep.mode.clone();
    let plan = match mode {
        SweepMode::Eps => SweepPlan {
            eps_list: sweep.eps_list.clone(),
            grids: vec![cfg.grid],
            dt_list: vec![cfg.run.dt],
            coeff: cfg.coeff.clone(),
            preset: cfg.preset.clone(),
            t_end: cfg.run.t_end,
            monitor: cfg.monitor,
            snapshot_stride: cfg.run.snapshot_stride,
            mollify_m0: cfg.mollify_m0,
            blowup_threshold: cfg.run.blowup_threshold,
            solver_tol: cfg.run.solver_tol,
        },
        SweepMode::Refinement => {
            let mut grids = Vec::new();
            for &n in &sweep.nodes_list {
                let g = if cfg.grid.dim == 2 {
                    Grid::new_2d(cfg.grid.extents, [n, n])
                } else {
                    Grid::new_1d(cfg.grid.extents[0], n)
                }
                .map_err(|e| e.to_string())?;
                grids.push(g);
            }
            SweepPlan {
                eps_list: sweep.eps_list.clone(),
                grids,
                dt_list: sweep.dt_list.clone(),
                coeff: cfg.coeff.clone(),
                preset: cfg.preset.clone(),
                t_end: cfg.run.t_end,
                monitor: cfg.monitor,
                snapshot_stride: cfg.run.snapshot_stride,
                mollify_m0: cfg.mollify_m0,
                blowup_threshold: cfg.run.blowup_threshold,
                solver_tol: cfg.run.solver_tol,
            }
        }
    };
    Ok((plan, mode))
}

fn write_sweep_outputs(out: &Path, report: &SweepReport) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    io::write_sweep_report_csv(&out.join("sweep_report.csv"), report)?;
    io::write_cauchy_csv(&out.join("cauchy_table.csv"), report)?;
    io::write_orders_csv(&out.join("orders.csv"), report)?;
    Ok(())
}

pub fn cmd_sweep(config_path: &Path, ov: &Overrides) -> i32 {
    let mut cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    apply_overrides(&mut cfg, ov);
    let (plan, mode) = match build_plan(&cfg) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("sweep plan error: {msg}");
            return 1;
        }
    };
    let report = match mode {
        SweepMode::Eps => run_eps_sweep(&plan),
        SweepMode::Refinement => run_refinement_sweep(&plan),
    };
    let report = match report {
        Ok(r) => r,
        Err(
            e @ (SweepError::MismatchedGrids(_)
            | SweepError::NonNestedGrids(_)
            | SweepError::BadPlan(_)
            | SweepError::Model(_)),
        ) => {
            eprintln!("sweep plan error: {e}");
            return 1;
        }
        Err(e) => {
            eprintln!("sweep execution failed: {e}");
            return 3;
        }
    };
    if let Err(e) = write_sweep_outputs(&cfg.out_dir, &report) {
        eprintln!("cannot write outputs: {e}");
        return 1;
    }
    if !ov.quiet {
        println!(
            "sweep complete: {} runs, {} cauchy rows; outputs in {}",
            report.runs.len(),
            report.cauchy.len(),
            cfg.out_dir.display()
        );
        for (name, ratio) in &report.monitor_ratios {
            println!("  monitor {name}: max/min across runs = {ratio}");
        }
        if let Some(fit) = &report.order_momentum {
            println!("  momentum residual order: {} {}", fit.order, fit.note);
        }
        if let Some(fit) = &report.order_temperature {
            println!("  temperature residual order: {} {}", fit.order, fit.note);
        }
    }
    0
}

pub fn cmd_check(config_path: &Path) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = match validate_spec(&cfg.coeff, cfg.grid.dim) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("validation error: {e}");
            return 1;
        }
    };
    for entry in &report.entries {
        println!(
            "{}: {} ({})",
            entry.name,
            if entry.passed { "PASS" } else { "FAIL" },
            entry.detail
        );
    }
    if report.passed() {
        0
    } else {
        1
    }
}
