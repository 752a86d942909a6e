use nalgebra::{DMatrix, DVector};

use super::{group_sync_error, ErrorSeries};
use crate::controllers::{feedforward, reference_signals, Law};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};
use crate::simulator::{rk4_step, Reference, Scenario, TrajectoryLog};

/// Margin added to the sync error to form the deviation envelope.
pub const ENVELOPE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    /// First time the group was synchronized; the reduced model starts here.
    pub t_start: f64,
    /// `D1`, the gain of the reduced closed loop.
    pub d1: DMatrix<f64>,
    /// `||q_i - q_reduced||` per member.
    pub deviation: Vec<ErrorSeries>,
    /// Sync error plus [`ENVELOPE_MARGIN`].
    pub envelope: ErrorSeries,
    /// Largest `deviation - envelope` over members and time; negative when
    /// every member stays inside the envelope.
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Compared(ReductionReport),
    NotApplicable(String),
}

/// Replaces a synchronized group by one robot running `M s' + C s + D1 s = 0`
/// from the group's mean state and compares it with every member.
pub fn reduced_model_compare(
    log: &TrajectoryLog,
    scenario: &Scenario,
    g: usize,
    sync_tol: f64,
) -> Result<Reduction> {
    let group = &scenario.groups[g];
    if group.law != Law::TrackingSync {
        return Ok(Reduction::NotApplicable(format!(
            "reduction needs the exact-model tracking-sync law, group uses {}",
            group.law.name()
        )));
    }
    let Reference::Trajectory(traj) = &group.reference else {
        return Ok(Reduction::NotApplicable("reduction needs an analytic reference".into()));
    };
    if group.models.iter().any(|m| m != &group.models[0]) {
        return Ok(Reduction::NotApplicable("reduction needs identical members".into()));
    }
    if group.graph.len() > 1 {
        return Ok(Reduction::NotApplicable("reduction needs a fixed graph".into()));
    }
    let sync = group_sync_error(log, g)?;
    let Some(k0) = sync.value.iter().position(|&v| v < sync_tol) else {
        return Ok(Reduction::NotApplicable(format!(
            "sync error never fell below {sync_tol:e}"
        )));
    };

    let model = &group.models[0];
    let (basis, _) = group.laplacian(0)?.report()?;
    let d1 = basis.d1.clone();
    let lambda = &group.gains.lambda;
    let robots = log.groups[g].robots.clone();
    let p = robots.len() as f64;
    let n = group.dof();
    let mean = |f: &dyn Fn(usize) -> DVector<f64>| robots.clone().map(f).fold(DVector::zeros(n), |a, v| a + v) / p;
    let q0 = mean(&|r| log.robots[r].q[k0].clone());
    let v0 = mean(&|r| log.robots[r].qdot[k0].clone());
    let mut y = DVector::from_iterator(2 * n, q0.iter().chain(v0.iter()).copied());

    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let x = RobotState {
            q: y.rows(0, n).into_owned(),
            qdot: y.rows(n, n).into_owned(),
        };
        let sig = reference_signals(&traj.sample(t), &x, lambda)?;
        let tau = feedforward(model, &x, &sig)? - &d1 * &sig.s;
        let qddot = model.forward_dynamics(&x, &tau)?;
        Ok(DVector::from_iterator(2 * n, x.qdot.iter().chain(qddot.iter()).copied()))
    };

    let mut deviation: Vec<ErrorSeries> = robots
        .clone()
        .map(|_| ErrorSeries {
            t: Vec::new(),
            value: Vec::new(),
        })
        .collect();
    let mut envelope = ErrorSeries {
        t: Vec::new(),
        value: Vec::new(),
    };
    let mut worst_excess = f64::NEG_INFINITY;
    for k in k0..log.len() {
        if k > k0 {
            for step in 0..log.decimation {
                let t = log.t[k - 1] + step as f64 * log.dt;
                y = rk4_step(rhs, t, &y, log.dt)?;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                time: log.t[k],
                detail: "reduced model diverged".into(),
            });
        }
        let q_red = y.rows(0, n).into_owned();
        let env = sync.value[k] + ENVELOPE_MARGIN;
        envelope.t.push(log.t[k]);
        envelope.value.push(env);
        for (dev, r) in deviation.iter_mut().zip(robots.clone()) {
            let d = (&log.robots[r].q[k] - &q_red).norm();
            dev.t.push(log.t[k]);
            dev.value.push(d);
            worst_excess = worst_excess.max(d - env);
        }
    }
    Ok(Reduction::Compared(ReductionReport {
        t_start: log.t[k0],
        d1,
        deviation,
        envelope,
        worst_excess,
    }))
}
