use nalgebra::{DMatrix, DVector};

use super::DesiredSample;
use crate::dynamics::{LagrangianModel, RobotState};
use crate::error::{check_len, Error, Result};
use crate::topology::{CouplingGraph, Gains};

/// Reference velocity / acceleration and the composite variable of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSignals {
    pub qr_dot: DVector<f64>,
    pub qr_ddot: DVector<f64>,
    pub s: DVector<f64>,
}

/// `qr_dot = qd_dot - Lambda (q - qd)`, `qr_ddot = qd_ddot - Lambda (qdot - qd_dot)`,
/// `s = qdot - qr_dot`.
pub fn reference_signals(
    desired: &DesiredSample,
    state: &RobotState,
    lambda: &DVector<f64>,
) -> Result<CompositeSignals> {
    let n = state.dof();
    check_len("desired q", n, desired.q.len())?;
    check_len("desired qdot", n, desired.qdot.len())?;
    check_len("desired qddot", n, desired.qddot.len())?;
    check_len("Lambda", n, lambda.len())?;
    let qr_dot = &desired.qdot - lambda.component_mul(&(&state.q - &desired.q));
    let qr_ddot = &desired.qddot - lambda.component_mul(&(&state.qdot - &desired.qdot));
    let s = &state.qdot - &qr_dot;
    Ok(CompositeSignals { qr_dot, qr_ddot, s })
}

/// A composite variable received from a neighbor, with its link weight.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub weight: f64,
    pub s: &'a DVector<f64>,
}

impl<'a> Neighbor<'a> {
    pub fn new(weight: f64, s: &'a DVector<f64>) -> Self {
        Self { weight, s }
    }
}

/// `M qr_ddot + C qr_dot + g` from the exact model.
pub fn feedforward(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
) -> Result<DVector<f64>> {
    let terms = model.terms(&state.q, &state.qdot)?;
    Ok(&terms.mass * &signals.qr_ddot + &terms.coriolis * &signals.qr_dot + terms.gravity)
}

/// `-K1 s_i + sum_j w_j K2 P s_j`.
pub fn feedback(
    s_i: &DVector<f64>,
    neighbors: &[Neighbor<'_>],
    gains: &Gains,
    selector: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = gains.dof();
    check_len("s", n, s_i.len())?;
    let mut tau = -gains.k1.component_mul(s_i);
    let coupling = match selector {
        Some(p) => {
            check_len("selector", n, p.len())?;
            gains.k2.component_mul(p)
        }
        None => gains.k2.clone(),
    };
    for nb in neighbors {
        check_len("neighbor s", n, nb.s.len())?;
        tau += coupling.component_mul(nb.s) * nb.weight;
    }
    Ok(tau)
}

fn require_neighbors(neighbors: &[Neighbor<'_>]) -> Result<()> {
    if neighbors.is_empty() {
        return Err(Error::Controller(
            "a coupled law needs at least one neighbor".into(),
        ));
    }
    Ok(())
}

/// `tau = M qr_ddot + C qr_dot + g - K1 s_i + sum_j w_j K2 s_j`.
///
/// Ring members pass their two neighbors with weight 1, which is the two-way
/// ring law; regular digraphs pass `2/m`.
pub fn tracking_sync_torque(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    neighbors: &[Neighbor<'_>],
    gains: &Gains,
) -> Result<DVector<f64>> {
    require_neighbors(neighbors)?;
    Ok(feedforward(model, state, signals)? + feedback(&signals.s, neighbors, gains, None)?)
}

/// Endpoint law of an open chain: `... - (K1 - K2) s_i + K2 s_j`.
pub fn inline_endpoint_torque(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    sole_neighbor_s: &DVector<f64>,
    gains: &Gains,
    graph: &CouplingGraph,
    member: usize,
) -> Result<DVector<f64>> {
    if member >= graph.size() || !graph.is_endpoint(member) {
        return Err(Error::Controller(format!(
            "member {} is not an inline endpoint",
            member + 1
        )));
    }
    let neighbors = [
        Neighbor::new(1.0, &signals.s),
        Neighbor::new(1.0, sole_neighbor_s),
    ];
    Ok(feedforward(model, state, signals)? + feedback(&signals.s, &neighbors, gains, None)?)
}

/// Tracking-sync law whose neighbor terms pass through the 0/1 selector `P`.
pub fn partial_state_torque(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    neighbors: &[Neighbor<'_>],
    gains: &Gains,
    selector: &DVector<f64>,
) -> Result<DVector<f64>> {
    require_neighbors(neighbors)?;
    if selector.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Controller(format!(
            "selector entries must be 0 or 1, got {}",
            selector.transpose()
        )));
    }
    Ok(feedforward(model, state, signals)?
        + feedback(&signals.s, neighbors, gains, Some(selector))?)
}

/// Parameter estimate and adaptation gain of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub a_hat: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

impl ParamEstimate {
    pub fn new(a_hat: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let k = a_hat.len();
        if gamma.nrows() != k || gamma.ncols() != k {
            return Err(Error::Gains(format!(
                "Gamma must be {k}x{k} to match the estimate, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if (&gamma - gamma.transpose()).amax() > 1e-12 * gamma.amax().max(1.0)
            || gamma.clone().cholesky().is_none()
        {
            return Err(Error::Gains("Gamma must be symmetric positive definite".into()));
        }
        if a_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter estimate"));
        }
        Ok(Self { a_hat, gamma })
    }
}

/// `tau = Y a_hat - K1 s_i + sum_j w_j K2 s_j` and the adaptation rate
/// `a_hat_dot = -Gamma Y' s_i`.
pub fn adaptive_torque(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    neighbors: &[Neighbor<'_>],
    gains: &Gains,
    a_hat: &DVector<f64>,
    gamma: &DMatrix<f64>,
    selector: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    require_neighbors(neighbors)?;
    check_len("parameter estimate", model.param_count(), a_hat.len())?;
    let y = model.regressor(&state.q, &state.qdot, &signals.qr_dot, &signals.qr_ddot)?;
    let tau = &y * a_hat + feedback(&signals.s, neighbors, gains, selector)?;
    let rate = -(gamma * (y.transpose() * &signals.s));
    Ok((tau, rate))
}

/// One adaptive update with the state held fixed over `dt`.
///
/// The regressor depends only on the robot state, so with a frozen state the
/// adaptation rate is constant and an RK4 step reduces to this Euler update.
/// The simulator integrates the estimate jointly with the plant instead.
pub fn adaptive_step(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    neighbors: &[Neighbor<'_>],
    estimate: &ParamEstimate,
    gains: &Gains,
    dt: f64,
) -> Result<(DVector<f64>, ParamEstimate)> {
    let (tau, rate) = adaptive_torque(
        model,
        state,
        signals,
        neighbors,
        gains,
        &estimate.a_hat,
        &estimate.gamma,
        None,
    )?;
    let updated = ParamEstimate {
        a_hat: &estimate.a_hat + rate * dt,
        gamma: estimate.gamma.clone(),
    };
    Ok((tau, updated))
}

/// PD coupling toward a rest position:
/// `tau_i = -K1 (qdot_i + Lambda qtilde_i) + sum_j w_j K2 (qdot_j + Lambda qtilde_j)`.
///
/// With `Lambda = 0` this is pure velocity coupling. Gravity must be absent
/// from the model or canceled through `gravity_feedforward`.
pub fn pd_torque(
    model: &LagrangianModel,
    state: &RobotState,
    neighbor_states: &[(f64, &RobotState)],
    q_rest: &DVector<f64>,
    gains: &Gains,
    gravity_feedforward: bool,
) -> Result<DVector<f64>> {
    if model.gravity_on() && !gravity_feedforward {
        return Err(Error::Controller(
            "PD coupling needs a gravity-free model or gravity feedforward".into(),
        ));
    }
    if neighbor_states.is_empty() {
        return Err(Error::Controller("a coupled law needs at least one neighbor".into()));
    }
    let n = model.dof();
    check_len("rest position", n, q_rest.len())?;
    let z = |x: &RobotState| -> Result<DVector<f64>> {
        check_len("robot state", n, x.dof())?;
        Ok(&x.qdot + gains.lambda.component_mul(&(&x.q - q_rest)))
    };
    let z_i = z(state)?;
    let z_j = neighbor_states
        .iter()
        .map(|(w, x)| Ok((*w, z(x)?)))
        .collect::<Result<Vec<_>>>()?;
    let neighbors: Vec<Neighbor<'_>> = z_j.iter().map(|(w, s)| Neighbor::new(*w, s)).collect();
    let mut tau = feedback(&z_i, &neighbors, gains, None)?;
    if gravity_feedforward {
        tau += model.gravity(&state.q)?;
    }
    Ok(tau)
}

/// Composite variable of a delayed sample as seen at the receiver:
/// `s(t-T) = qdot(t-T) + Lambda q(t-T) - (qd_dot(t) + Lambda qd(t))`.
pub fn delayed_composite(
    past: &RobotState,
    desired_now: &DesiredSample,
    lambda: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = past.dof();
    check_len("desired q", n, desired_now.q.len())?;
    check_len("Lambda", n, lambda.len())?;
    Ok(&past.qdot + lambda.component_mul(&past.q)
        - (&desired_now.qdot + lambda.component_mul(&desired_now.q)))
}

/// Tracking-sync law fed with delayed neighbor composites.
///
/// With weight 1 on a single neighbor this is the two-robot delayed law: the
/// closed loop reads `M s' + C s + (K1 - K2) s = K2 (s_j(t-T) - s_i(t))`.
pub fn delayed_torque(
    model: &LagrangianModel,
    state: &RobotState,
    signals: &CompositeSignals,
    delayed_neighbors: &[Neighbor<'_>],
    gains: &Gains,
) -> Result<DVector<f64>> {
    tracking_sync_torque(model, state, signals, delayed_neighbors, gains)
}

/// Extra term `-K (s_a + s_b)` applied to both ends of an inhibitory link.
pub fn inhibition_term(k: &DMatrix<f64>, s_a: &DVector<f64>, s_b: &DVector<f64>) -> DVector<f64> {
    -(k * (s_a + s_b))
}

/// Adds an inhibitory link between members `a` and `b` with gain `k`.
///
/// A zero `k` leaves the network unchanged. Any other `k` must be symmetric
/// positive definite.
pub fn apply_inhibition(
    graph: &CouplingGraph,
    gains: &Gains,
    a: usize,
    b: usize,
    k: &DMatrix<f64>,
) -> Result<(CouplingGraph, Gains)> {
    if k.iter().all(|&v| v == 0.0) {
        return Ok((graph.clone(), gains.clone()));
    }
    let gains = gains.clone().with_inhibition(k.clone())?;
    let graph = graph.clone().with_inhibitory_link(a, b)?;
    Ok((graph, gains))
}
