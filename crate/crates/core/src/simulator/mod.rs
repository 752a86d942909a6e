//! Fixed-step RK4 integration of a network of plants, controllers, adaptive
//! estimates, relay filters and delay buffers.

mod delay;
mod log;
mod scenario;

use std::str::FromStr;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use delay::{delay_sample, DelayBuffer, DelaySample};
pub use log::{GroupLog, RobotTrack, TrajectoryLog};
pub use scenario::{Group, Reference, Relay, Scenario};

use crate::controllers::{
    delayed_composite, feedback, feedforward, inhibition_term, reference_signals,
    CompositeSignals, DesiredSample, Law, Neighbor,
};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};

/// Bounded per-robot torque disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    /// `amplitude * sin(freq t + phi)` per joint, with seeded phases.
    Sinusoid { amplitude: f64, freq: f64 },
    /// Uniform draw in `[-amplitude, amplitude]` per joint, held over a step.
    Noise { amplitude: f64 },
}

impl Disturbance {
    pub fn amplitude(&self) -> f64 {
        match self {
            Disturbance::Sinusoid { amplitude, .. } | Disturbance::Noise { amplitude } => *amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Disturbance::Sinusoid { amplitude, freq } => {
                amplitude.is_finite() && *amplitude >= 0.0 && freq.is_finite()
            }
            Disturbance::Noise { amplitude } => amplitude.is_finite() && *amplitude >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid disturbance {self:?}")))
        }
    }
}

impl FromStr for Disturbance {
    type Err = Error;

    /// `sinusoid:A[:freq]` or `noise:A`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{x}' in disturbance '{s}'")))
        };
        let d = match parts.as_slice() {
            ["sinusoid", a] => Disturbance::Sinusoid {
                amplitude: num(a)?,
                freq: 1.0,
            },
            ["sinusoid", a, f] => Disturbance::Sinusoid {
                amplitude: num(a)?,
                freq: num(f)?,
            },
            ["noise", a] => Disturbance::Noise { amplitude: num(a)? },
            _ => {
                return Err(Error::Config(format!(
                    "disturbance must be 'sinusoid:A[:freq]' or 'noise:A', got '{s}'"
                )))
            }
        };
        d.validate()?;
        Ok(d)
    }
}

/// Integration and output settings of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Log every `decimation`-th step.
    pub decimation: usize,
    pub seed: u64,
    /// Half-width of the uniform draw for initial positions.
    pub q_bound: f64,
    /// Half-width of the uniform draw for initial velocities.
    pub qdot_bound: f64,
    pub disturbance: Option<Disturbance>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            decimation: 10,
            seed: 0,
            q_bound: 0.5,
            qdot_bound: 0.2,
            disturbance: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::Config(format!(
                "t_final must be at least dt, got {}",
                self.t_final
            )));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        if !(self.q_bound >= 0.0 && self.qdot_bound >= 0.0) {
            return Err(Error::Config("initial-condition bounds must be non-negative".into()));
        }
        if let Some(d) = &self.disturbance {
            d.validate()?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(mut f: F, t: f64, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let h = 0.5 * dt;
    let k1 = f(t, y)?;
    let k2 = f(t + h, &(y + &k1 * h))?;
    let k3 = f(t + h, &(y + &k2 * h))?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    Ok(y + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// Snapshot of every robot, estimate and active graph at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    pub robots: Vec<RobotState>,
    pub estimates: Vec<Option<DVector<f64>>>,
    pub graph_index: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    group: usize,
    member: usize,
    n: usize,
    q: usize,
    a_hat: Option<(usize, usize)>,
    filter: Option<usize>,
}

/// Everything the controllers produce for one robot at one instant.
#[derive(Debug, Clone)]
struct Eval {
    desired: DesiredSample,
    signals: CompositeSignals,
    tau: DVector<f64>,
    qddot: DVector<f64>,
    a_rate: Option<DVector<f64>>,
    f_rate: Option<DVector<f64>>,
}

/// Stepwise simulation of a scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    config: SimConfig,
    slots: Vec<Slot>,
    offsets: Vec<usize>,
    y: DVector<f64>,
    step: usize,
    graph_index: Vec<usize>,
    buffers: Vec<Option<DelayBuffer>>,
    phases: Vec<DVector<f64>>,
    held: Vec<DVector<f64>>,
    rng: ChaCha8Rng,
    flags: Vec<String>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let offsets = scenario.offsets();
        let mut slots = Vec::with_capacity(scenario.robot_count());
        let mut len = 0;
        for (g, group) in scenario.groups.iter().enumerate() {
            let n = group.dof();
            for member in 0..group.size() {
                let q = len;
                len += 2 * n;
                let a_hat = group.is_adaptive().then(|| {
                    let k = group.param_count();
                    len += k;
                    (q + 2 * n, k)
                });
                let filter = matches!(group.reference, Reference::Relayed(_)).then(|| {
                    len += n;
                    len - n
                });
                slots.push(Slot {
                    group: g,
                    member,
                    n,
                    q,
                    a_hat,
                    filter,
                });
            }
        }

        let mut flags = Vec::new();
        let mut buffers = vec![None; slots.len()];
        for (g, group) in scenario.groups.iter().enumerate() {
            if let Law::Delayed { delay } = group.law {
                if delay < config.dt * (1.0 - 1e-9) {
                    return Err(Error::Scenario(format!(
                        "group '{}': delay {delay} s is shorter than the step {} s",
                        group.name, config.dt
                    )));
                }
                for b in &mut buffers[offsets[g]..offsets[g] + group.size()] {
                    *b = Some(DelayBuffer::new(delay + 2.0 * config.dt));
                }
                flags.push(format!(
                    "group '{}': delayed coupling held at zero for t < {delay}",
                    group.name
                ));
            }
        }

        // Stream 0 draws initial conditions, stream 1 drives disturbances.
        let mut ic_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut y = DVector::zeros(len);
        for slot in &slots {
            let group = &scenario.groups[slot.group];
            let x = match &group.initial {
                Some(init) => init[slot.member].clone(),
                None => {
                    let mut draw = |b: f64| {
                        DVector::from_fn(slot.n, |_, _| {
                            if b > 0.0 {
                                ic_rng.random_range(-b..=b)
                            } else {
                                0.0
                            }
                        })
                    };
                    let q = draw(config.q_bound);
                    let qdot = draw(config.qdot_bound);
                    RobotState { q, qdot }
                }
            };
            y.rows_mut(slot.q, slot.n).copy_from(&x.q);
            y.rows_mut(slot.q + slot.n, slot.n).copy_from(&x.qdot);
            if let Some((off, k)) = slot.a_hat {
                if let Some(a0) = &group.a_hat0 {
                    y.rows_mut(off, k).copy_from(a0);
                }
            }
        }
        for slot in &slots {
            if let (Some(off), Reference::Relayed(r)) =
                (slot.filter, &scenario.groups[slot.group].reference)
            {
                let src = &slots[offsets[r.from_group] + r.sources[slot.member]];
                let v = r.map.velocity(&y.rows(src.q + src.n, src.n).into_owned());
                y.rows_mut(off, slot.n).copy_from(&v);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let phases = slots
            .iter()
            .map(|s| match config.disturbance {
                Some(Disturbance::Sinusoid { .. }) => {
                    DVector::from_fn(s.n, |_, _| rng.random_range(0.0..std::f64::consts::TAU))
                }
                _ => DVector::zeros(s.n),
            })
            .collect();
        let held = slots.iter().map(|s| DVector::zeros(s.n)).collect();

        let mut sim = Self {
            scenario,
            config: config.clone(),
            slots,
            offsets,
            y,
            step: 0,
            graph_index: vec![0; scenario.groups.len()],
            buffers,
            phases,
            held,
            rng,
            flags,
        };
        sim.refresh_step_inputs();
        sim.push_history()?;
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> NetworkState {
        NetworkState {
            t: self.time(),
            robots: self.slots.iter().map(|s| self.robot(&self.y, s)).collect(),
            estimates: self
                .slots
                .iter()
                .map(|s| s.a_hat.map(|(off, k)| self.y.rows(off, k).into_owned()))
                .collect(),
            graph_index: self.graph_index.clone(),
        }
    }

    /// Advances every robot by one RK4 step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let dt = self.config.dt;
        let next = rk4_step(|tt, yy| self.derivative(tt, yy), t, &self.y, dt)
            .map_err(|e| blow_up(e, t))?;
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                time: t + dt,
                detail: format!(
                    "state entry {i} became non-finite; last good time {t}"
                ),
            });
        }
        self.y = next;
        self.step += 1;
        self.refresh_step_inputs();
        self.push_history()?;
        Ok(())
    }

    /// Runs to `t_final`, logging every `decimation` steps.
    pub fn run(mut self) -> Result<TrajectoryLog> {
        let steps = self.config.steps();
        let mut log = self.empty_log();
        for k in 0..=steps {
            if k % self.config.decimation == 0 {
                self.record(&mut log)?;
            }
            if k < steps {
                self.step()?;
            }
        }
        log.flags = self.flags.clone();
        Ok(log)
    }

    fn empty_log(&self) -> TrajectoryLog {
        TrajectoryLog {
            dt: self.config.dt,
            decimation: self.config.decimation,
            t: Vec::new(),
            groups: self
                .scenario
                .groups
                .iter()
                .zip(&self.offsets)
                .map(|(g, &off)| GroupLog {
                    name: g.name.clone(),
                    robots: off..off + g.size(),
                    law: g.law,
                })
                .collect(),
            robots: self.slots.iter().map(|s| RobotTrack::new(s.group, s.member)).collect(),
            flags: Vec::new(),
        }
    }

    fn record(&self, log: &mut TrajectoryLog) -> Result<()> {
        let t = self.time();
        let evals = self.evaluate(t, &self.y).map_err(|e| blow_up(e, t))?;
        log.t.push(t);
        for ((slot, eval), track) in self.slots.iter().zip(evals).zip(&mut log.robots) {
            let x = self.robot(&self.y, slot);
            track.q.push(x.q);
            track.qdot.push(x.qdot);
            track.qd.push(eval.desired.q);
            track.qd_dot.push(eval.desired.qdot);
            track.s.push(eval.signals.s);
            track.tau.push(eval.tau);
            if let Some((off, k)) = slot.a_hat {
                track.a_hat.push(self.y.rows(off, k).into_owned());
            }
        }
        Ok(())
    }

    /// Graph segments and held noise for the step starting now.
    fn refresh_step_inputs(&mut self) {
        let t = self.time();
        for (g, group) in self.scenario.groups.iter().enumerate() {
            self.graph_index[g] = group.graph.index_at(t);
        }
        if let Some(Disturbance::Noise { amplitude }) = self.config.disturbance {
            for h in &mut self.held {
                for v in h.iter_mut() {
                    *v = if amplitude > 0.0 {
                        self.rng.random_range(-amplitude..=amplitude)
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    fn push_history(&mut self) -> Result<()> {
        let t = self.time();
        for (slot, buf) in self.slots.iter().zip(self.buffers.iter_mut()) {
            if let Some(b) = buf {
                let x = RobotState {
                    q: self.y.rows(slot.q, slot.n).into_owned(),
                    qdot: self.y.rows(slot.q + slot.n, slot.n).into_owned(),
                };
                b.push(t, &x)?;
            }
        }
        Ok(())
    }

    fn robot(&self, y: &DVector<f64>, slot: &Slot) -> RobotState {
        RobotState {
            q: y.rows(slot.q, slot.n).into_owned(),
            qdot: y.rows(slot.q + slot.n, slot.n).into_owned(),
        }
    }

    fn disturbance(&self, t: f64, r: usize) -> Option<DVector<f64>> {
        match self.config.disturbance? {
            Disturbance::Sinusoid { amplitude, freq } => {
                Some(self.phases[r].map(|phi| amplitude * (freq * t + phi).sin()))
            }
            Disturbance::Noise { .. } => Some(self.held[r].clone()),
        }
    }

    fn derivative(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let evals = self.evaluate(t, y)?;
        let mut dy = DVector::zeros(y.len());
        for (slot, e) in self.slots.iter().zip(evals) {
            dy.rows_mut(slot.q, slot.n).copy_from(&y.rows(slot.q + slot.n, slot.n));
            dy.rows_mut(slot.q + slot.n, slot.n).copy_from(&e.qddot);
            if let (Some((off, k)), Some(rate)) = (slot.a_hat, e.a_rate) {
                dy.rows_mut(off, k).copy_from(&rate);
            }
            if let (Some(off), Some(rate)) = (slot.filter, e.f_rate) {
                dy.rows_mut(off, slot.n).copy_from(&rate);
            }
        }
        Ok(dy)
    }

    fn evaluate(&self, t: f64, y: &DVector<f64>) -> Result<Vec<Eval>> {
        let states: Vec<RobotState> = self.slots.iter().map(|s| self.robot(y, s)).collect();

        // Desired trajectories and composite variables.
        let mut desired = Vec::with_capacity(self.slots.len());
        let mut f_rates = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let group = &self.scenario.groups[slot.group];
            match &group.reference {
                Reference::Trajectory(traj) => {
                    desired.push(traj.sample(t));
                    f_rates.push(None);
                }
                Reference::Relayed(r) => {
                    let src = &states[self.offsets[r.from_group] + r.sources[slot.member]];
                    let qdot = r.map.velocity(&src.qdot);
                    let f = y.rows(slot.filter.expect("relayed slot has a filter"), slot.n).into_owned();
                    let qddot = r.filter.estimate(&qdot, &f);
                    f_rates.push(Some(qddot.clone()));
                    desired.push(DesiredSample {
                        q: r.map.position(&src.q),
                        qdot,
                        qddot,
                    });
                }
            }
        }
        let signals = self
            .slots
            .iter()
            .zip(&desired)
            .zip(&states)
            .map(|((slot, d), x)| {
                reference_signals(d, x, &self.scenario.groups[slot.group].gains.lambda)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut evals = Vec::with_capacity(self.slots.len());
        for (r, slot) in self.slots.iter().enumerate() {
            let group = &self.scenario.groups[slot.group];
            let base = self.offsets[slot.group];
            let graph = group.graph.graph(self.graph_index[slot.group]);
            let model = &group.models[slot.member];
            let x = &states[r];
            let sig = &signals[r];

            // Neighbor composites, delayed where the law says so.
            let mut delayed: Vec<(f64, DVector<f64>)> = Vec::new();
            let mut current: Vec<(f64, usize)> = Vec::new();
            for link in graph.neighbors(slot.member) {
                let j = base + link.from;
                match group.law {
                    Law::Delayed { delay } if link.from != slot.member => {
                        let buf = self.buffers[j].as_ref().expect("delayed slot has a buffer");
                        match delay_sample(buf, t - delay)? {
                            DelaySample::Value(past) => delayed.push((
                                link.weight,
                                delayed_composite(&past, &desired[r], &group.gains.lambda)?,
                            )),
                            DelaySample::WarmUp => {}
                        }
                    }
                    _ => current.push((link.weight, j)),
                }
            }
            let neighbors: Vec<Neighbor<'_>> = current
                .iter()
                .map(|&(w, j)| Neighbor::new(w, &signals[j].s))
                .chain(delayed.iter().map(|(w, s)| Neighbor::new(*w, s)))
                .collect();

            let mut a_rate = None;
            let ff = match group.law {
                Law::TrackingSync | Law::Delayed { .. } => feedforward(model, x, sig)?,
                Law::Adaptive => {
                    let (off, k) = slot.a_hat.expect("adaptive slot has an estimate");
                    let a_hat = y.rows(off, k);
                    let gamma = group.gains.gamma.as_ref().expect("validated Gamma");
                    let reg = model.regressor(&x.q, &x.qdot, &sig.qr_dot, &sig.qr_ddot)?;
                    a_rate = Some(-(gamma * (reg.transpose() * &sig.s)));
                    reg * a_hat
                }
                Law::Pd {
                    gravity_feedforward,
                } => {
                    if gravity_feedforward {
                        model.gravity(&x.q)?
                    } else {
                        DVector::zeros(slot.n)
                    }
                }
            };
            let mut tau = ff + feedback(&sig.s, &neighbors, &group.gains, graph.partial_mask())?;
            if let (Some((a, b)), Some(k)) = (graph.inhibitory_link(), &group.gains.k_inhib) {
                if slot.member == a || slot.member == b {
                    tau += inhibition_term(k, &signals[base + a].s, &signals[base + b].s);
                }
            }
            if let Some(d) = self.disturbance(t, r) {
                tau += d;
            }
            let qddot = model.forward_dynamics(x, &tau)?;
            evals.push(Eval {
                desired: desired[r].clone(),
                signals: sig.clone(),
                tau,
                qddot,
                a_rate,
                f_rate: f_rates[r].clone(),
            });
        }
        Ok(evals)
    }
}

fn blow_up(e: Error, t: f64) -> Error {
    match e {
        Error::NonFinite(what) => Error::BlowUp {
            time: t,
            detail: format!("non-finite {what}"),
        },
        other => other,
    }
}

/// Runs a scenario from `t = 0` to `config.t_final`.
pub fn run(config: &SimConfig, scenario: &Scenario) -> Result<TrajectoryLog> {
    Simulation::new(scenario, config)?.run()
}

/// Runs a multi-group hierarchy. Relayed groups receive `(q_d, qd_dot)` from
/// their source members and estimate `qd_ddot` with the high-pass filter.
pub fn run_concurrent(scenario: &Scenario, config: &SimConfig) -> Result<TrajectoryLog> {
    scenario.hierarchy_order()?;
    run(config, scenario)
}
