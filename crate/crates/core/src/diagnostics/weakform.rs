//! Weak-form residuals of the momentum and temperature identities.
//!
//! A trajectory is tested against sampled space-time test functions. Time
//! derivatives of the test function are discretized as interval differences
//! paired with interval-averaged fields (the summation-by-parts counterpart
//! of the trapezoid rule used everywhere else); all other terms are
//! trapezoid in time. Residuals are computed signed and reported as
//! absolute values; they are exactly linear in the test-function frames.

use super::monitors::DiagnosticsError;
use super::testfns::SpaceTimeTestFn;
use crate::model::{eval_f, eval_gamma};
use crate::operators::OperatorSet;
use crate::solver::Trajectory;

fn check_frames(
    traj: &Trajectory,
    ops: &OperatorSet,
    frames: &[Vec<f64>],
    need_compact_support: bool,
) -> Result<(), DiagnosticsError> {
    if frames.len() != traj.times.len() {
        return Err(DiagnosticsError::BadTestFunction(format!(
            "{} frames for {} snapshot times",
            frames.len(),
            traj.times.len()
        )));
    }
    let n = ops.grid.node_count();
    if frames.iter().any(|f| f.len() != n) {
        return Err(DiagnosticsError::BadTestFunction(
            "frame size does not match grid".into(),
        ));
    }
    let m = frames.len();
    if m < 2 {
        return Err(DiagnosticsError::BadTestFunction(
            "need at least two frames".into(),
        ));
    }
    for f in &frames[m - 2..] {
        if f.iter().any(|v| *v != 0.0) {
            return Err(DiagnosticsError::BadTestFunction(
                "test function must vanish for t >= t_end - dt".into(),
            ));
        }
    }
    if need_compact_support {
        let g = &ops.grid;
        for f in frames {
            for j in 0..g.nodes[1] {
                for i in 0..g.nodes[0] {
                    if g.is_boundary(i, j) && f[g.idx(i, j)] != 0.0 {
                        return Err(DiagnosticsError::BadTestFunction(
                            "momentum test function must vanish on the boundary".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Frozen coefficient fields of a snapshot, on faces, clamping
/// rounding-level negative temperatures.
fn coeff_faces(
    traj: &Trajectory,
    ops: &OperatorSet,
    theta: &[f64],
) -> (crate::grid::FieldVector, crate::grid::FieldVector) {
    let gamma: Vec<f64> = theta
        .iter()
        .map(|&t| eval_gamma(&traj.coeff, t.max(0.0)).expect("nonnegative argument"))
        .collect();
    let f: Vec<f64> = theta
        .iter()
        .map(|&t| eval_f(&traj.coeff, t.max(0.0)).expect("nonnegative argument"))
        .collect();
    (ops.face_average(&gamma), ops.face_average(&f))
}

/// Signed momentum residual over sampled test-function frames:
///
/// ```text
/// - II v phi_t - I v(0) phi(0) + II gamma grad v . grad phi
///   + a II grad u . grad phi - II f . grad phi
/// ```
pub fn weak_residual_momentum_frames(
    traj: &Trajectory,
    ops: &OperatorSet,
    frames: &[Vec<f64>],
) -> Result<f64, DiagnosticsError> {
    check_frames(traj, ops, frames, true)?;
    let times = &traj.times;
    let m = times.len();
    let a = traj.coeff.elastic_modulus;

    // time-derivative pairing: sum_n <v_bar, phi_{n+1} - phi_n>
    let mut vdot_pairing = 0.0;
    for n in 0..m - 1 {
        let vbar: Vec<f64> = traj.states[n]
            .v
            .values
            .iter()
            .zip(&traj.states[n + 1].v.values)
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        let dphi: Vec<f64> = frames[n + 1]
            .iter()
            .zip(&frames[n])
            .map(|(x, y)| x - y)
            .collect();
        vdot_pairing += ops.ip_nodes(&vbar, &dphi);
    }
    let init = ops.ip_nodes(&traj.states[0].v.values, &frames[0]);

    // spatial pairings at each snapshot, trapezoid in time
    let mut visc = vec![0.0; m];
    let mut elast = vec![0.0; m];
    let mut coupling = vec![0.0; m];
    for n in 0..m {
        let grad_phi = ops.grad_slice(&frames[n]);
        let (gamma_f, f_f) = coeff_faces(traj, ops, &traj.states[n].theta.values);
        let mut gv = ops.grad(&traj.states[n].v);
        for ax in 0..2 {
            for (g, c) in gv.comps[ax].iter_mut().zip(&gamma_f.comps[ax]) {
                *g *= c;
            }
        }
        visc[n] = ops.ip_faces(&gv, &grad_phi);
        let gu = ops.grad(&traj.states[n].u);
        elast[n] = a * ops.ip_faces(&gu, &grad_phi);
        coupling[n] = ops.ip_faces(&f_f, &grad_phi);
    }
    let trapz = |vals: &[f64]| crate::norms::trapezoid(times, vals);
    Ok(-vdot_pairing - init + trapz(&visc) + trapz(&elast) - trapz(&coupling))
}

/// Signed temperature residual over sampled frames:
///
/// ```text
/// - II theta phi_t - I theta(0) phi(0) + II grad theta . grad phi
///   - II gamma |grad v|^2 phi + II f . grad v phi
/// ```
pub fn weak_residual_temperature_frames(
    traj: &Trajectory,
    ops: &OperatorSet,
    frames: &[Vec<f64>],
) -> Result<f64, DiagnosticsError> {
    check_frames(traj, ops, frames, false)?;
    let times = &traj.times;
    let m = times.len();

    let mut tdot_pairing = 0.0;
    for n in 0..m - 1 {
        let tbar: Vec<f64> = traj.states[n]
            .theta
            .values
            .iter()
            .zip(&traj.states[n + 1].theta.values)
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        let dphi: Vec<f64> = frames[n + 1]
            .iter()
            .zip(&frames[n])
            .map(|(x, y)| x - y)
            .collect();
        tdot_pairing += ops.ip_nodes(&tbar, &dphi);
    }
    let init = ops.ip_nodes(&traj.states[0].theta.values, &frames[0]);

    let mut diffusion = vec![0.0; m];
    let mut heating = vec![0.0; m];
    let mut coupling = vec![0.0; m];
    for n in 0..m {
        let grad_phi = ops.grad_slice(&frames[n]);
        let gt = ops.grad(&traj.states[n].theta);
        diffusion[n] = ops.ip_faces(&gt, &grad_phi);

        let (gamma_f, f_f) = coeff_faces(traj, ops, &traj.states[n].theta.values);
        let dv = ops.grad(&traj.states[n].v);
        let mut q_heat = crate::grid::FieldVector::zeros(&ops.grid);
        let mut q_coup = crate::grid::FieldVector::zeros(&ops.grid);
        for ax in 0..2 {
            for k in 0..dv.comps[ax].len() {
                let d = dv.comps[ax][k];
                q_heat.comps[ax][k] = gamma_f.comps[ax][k] * d * d;
                q_coup.comps[ax][k] = f_f.comps[ax][k] * d;
            }
        }
        heating[n] = ops.ip_nodes(&ops.face_to_node(&q_heat), &frames[n]);
        coupling[n] = ops.ip_nodes(&ops.face_to_node(&q_coup), &frames[n]);
    }
    let trapz = |vals: &[f64]| crate::norms::trapezoid(times, vals);
    Ok(-tdot_pairing - init + trapz(&diffusion) - trapz(&heating) + trapz(&coupling))
}

pub fn weak_residual_momentum_signed(
    traj: &Trajectory,
    ops: &OperatorSet,
    phi: &SpaceTimeTestFn,
) -> Result<f64, DiagnosticsError> {
    if !phi.compact_support {
        return Err(DiagnosticsError::BadTestFunction(
            "momentum residual needs a compactly supported test function".into(),
        ));
    }
    weak_residual_momentum_frames(traj, ops, &phi.frames(&traj.times))
}

pub fn weak_residual_momentum(
    traj: &Trajectory,
    ops: &OperatorSet,
    phi: &SpaceTimeTestFn,
) -> Result<f64, DiagnosticsError> {
    Ok(weak_residual_momentum_signed(traj, ops, phi)?.abs())
}

pub fn weak_residual_temperature_signed(
    traj: &Trajectory,
    ops: &OperatorSet,
    phi: &SpaceTimeTestFn,
) -> Result<f64, DiagnosticsError> {
    weak_residual_temperature_frames(traj, ops, &phi.frames(&traj.times))
}

pub fn weak_residual_temperature(
    traj: &Trajectory,
    ops: &OperatorSet,
    phi: &SpaceTimeTestFn,
) -> Result<f64, DiagnosticsError> {
    Ok(weak_residual_temperature_signed(traj, ops, phi)?.abs())
}
