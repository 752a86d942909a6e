use nalgebra::DVector;

use crate::controllers::{AffineMap, HighPassDifferentiator, Law, Trajectory, TrajectorySource};
use crate::dynamics::{LagrangianModel, RobotState};
use crate::error::{check_len, Error, Result};
use crate::topology::{ConditionReport, CouplingGraph, Gains, GraphSchedule, ModifiedLaplacian};

/// Reference input of a group.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Every member follows the same trajectory.
    Trajectory(Trajectory),
    /// Member `i` follows member `sources[i]` of `from_group` through `map`;
    /// the acceleration comes from `filter`.
    Relayed(Relay),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relay {
    pub from_group: usize,
    pub sources: Vec<usize>,
    pub map: AffineMap,
    pub filter: HighPassDifferentiator,
}

impl Relay {
    /// Member `i` listens to member `i` of `from_group` through the identity.
    pub fn matched(from_group: usize, p: usize, n: usize) -> Self {
        Self {
            from_group,
            sources: (0..p).collect(),
            map: AffineMap::identity(n),
            filter: HighPassDifferentiator::default(),
        }
    }
}

/// A regular network of robots running one control law.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub models: Vec<LagrangianModel>,
    pub graph: GraphSchedule,
    pub gains: Gains,
    pub law: Law,
    pub reference: Reference,
    /// Explicit initial states; drawn from the run seed when absent.
    pub initial: Option<Vec<RobotState>>,
    /// Initial parameter estimate of every member (adaptive law).
    pub a_hat0: Option<DVector<f64>>,
}

impl Group {
    pub fn new(
        name: impl Into<String>,
        models: Vec<LagrangianModel>,
        graph: CouplingGraph,
        gains: Gains,
        law: Law,
        reference: Reference,
    ) -> Result<Self> {
        let group = Self {
            name: name.into(),
            models,
            graph: GraphSchedule::constant(graph),
            gains,
            law,
            reference,
            initial: None,
            a_hat0: None,
        };
        group.validate()?;
        Ok(group)
    }

    /// `p` copies of the same model.
    pub fn uniform(
        name: impl Into<String>,
        model: LagrangianModel,
        graph: CouplingGraph,
        gains: Gains,
        law: Law,
        reference: Reference,
    ) -> Result<Self> {
        let models = vec![model; graph.size()];
        Self::new(name, models, graph, gains, law, reference)
    }

    pub fn with_initial(mut self, initial: Vec<RobotState>) -> Result<Self> {
        self.initial = Some(initial);
        self.validate()?;
        Ok(self)
    }

    pub fn with_estimate(mut self, a_hat0: DVector<f64>) -> Result<Self> {
        self.a_hat0 = Some(a_hat0);
        self.validate()?;
        Ok(self)
    }

    pub fn with_schedule(mut self, schedule: GraphSchedule) -> Result<Self> {
        self.graph = schedule;
        self.validate()?;
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.models.len()
    }

    pub fn dof(&self) -> usize {
        self.models[0].dof()
    }

    pub fn is_adaptive(&self) -> bool {
        self.law == Law::Adaptive
    }

    pub fn param_count(&self) -> usize {
        self.models[0].param_count()
    }

    pub fn source(&self, member: usize) -> TrajectorySource {
        match &self.reference {
            Reference::Trajectory(_) => TrajectorySource::Analytic,
            Reference::Relayed(r) => TrajectorySource::RelayedFromMember {
                group: r.from_group,
                member: r.sources[member],
            },
        }
    }

    /// Laplacian of graph segment `index`.
    pub fn laplacian(&self, index: usize) -> Result<ModifiedLaplacian> {
        ModifiedLaplacian::build(self.graph.graph(index), &self.gains)
    }

    /// Gain conditions of the initial graph.
    pub fn conditions(&self) -> Result<ConditionReport> {
        Ok(self.laplacian(0)?.report()?.1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Scenario(format!("group '{}': {msg}", self.name)));
        if self.models.is_empty() {
            return fail("needs at least one robot".into());
        }
        let n = self.dof();
        if self.models.iter().any(|m| m.dof() != n) {
            return fail("every member must have the same number of joints".into());
        }
        if self.graph.size() != self.size() {
            return fail(format!(
                "graph has {} members but {} models were given",
                self.graph.size(),
                self.size()
            ));
        }
        check_len("gains", n, self.gains.dof())?;
        for k in 0..self.graph.len() {
            self.laplacian(k)?;
        }
        if let Some(init) = &self.initial {
            check_len("initial states", self.size(), init.len())?;
            for x in init {
                check_len("initial state", n, x.dof())?;
                if !x.is_finite() {
                    return Err(Error::NonFinite("initial state"));
                }
            }
        }
        match &self.reference {
            Reference::Trajectory(t) => check_len("trajectory joints", n, t.dof())?,
            Reference::Relayed(r) => {
                check_len("relay sources", self.size(), r.sources.len())?;
                check_len("reference map output", n, r.map.output_dim())?;
            }
        }
        match self.law {
            Law::Adaptive => {
                let k = self.param_count();
                if self.models.iter().any(|m| m.param_count() != k || m.kind() != self.models[0].kind()) {
                    return fail("adaptive members must share one model structure".into());
                }
                match &self.gains.gamma {
                    Some(g) if g.nrows() == k => {}
                    Some(g) => {
                        return fail(format!("Gamma is {}x{} but the model has {k} parameters", g.nrows(), g.ncols()))
                    }
                    None => return fail("the adaptive law needs Gamma".into()),
                }
                if let Some(a) = &self.a_hat0 {
                    check_len("a_hat0", k, a.len())?;
                }
            }
            Law::Pd { gravity_feedforward } => {
                if !matches!(&self.reference, Reference::Trajectory(t) if t.is_rest()) {
                    return fail("PD coupling needs a rest reference".into());
                }
                if !gravity_feedforward && self.models.iter().any(|m| m.gravity_on()) {
                    return fail("PD coupling needs gravity off or gravity_feedforward".into());
                }
            }
            Law::Delayed { delay } => {
                if !(delay.is_finite() && delay > 0.0) {
                    return fail(format!("delay must be positive, got {delay}"));
                }
            }
            Law::TrackingSync => {}
        }
        if !self.is_adaptive() && self.a_hat0.is_some() {
            return fail("a_hat0 is only used by the adaptive law".into());
        }
        Ok(())
    }
}

/// Ordered groups whose reference edges form a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub groups: Vec<Group>,
}

impl Scenario {
    pub fn single(group: Group) -> Result<Self> {
        Self::new(vec![group])
    }

    pub fn new(groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Scenario("a scenario needs at least one group".into()));
        }
        for g in &groups {
            g.validate()?;
        }
        for (k, g) in groups.iter().enumerate() {
            if let Reference::Relayed(r) = &g.reference {
                let Some(src) = groups.get(r.from_group) else {
                    return Err(Error::Scenario(format!(
                        "group '{}' relays from missing group {}",
                        g.name,
                        r.from_group + 1
                    )));
                };
                if r.from_group == k {
                    return Err(Error::Scenario(format!("group '{}' relays from itself", g.name)));
                }
                if let Some(&bad) = r.sources.iter().find(|&&m| m >= src.size()) {
                    return Err(Error::Scenario(format!(
                        "group '{}' relays from member {} of '{}', which has {} members",
                        g.name,
                        bad + 1,
                        src.name,
                        src.size()
                    )));
                }
                check_len("reference map input", src.dof(), r.map.input_dim())?;
            }
        }
        let scenario = Self { groups };
        scenario.hierarchy_order()?;
        Ok(scenario)
    }

    pub fn robot_count(&self) -> usize {
        self.groups.iter().map(Group::size).sum()
    }

    /// Global index of the first robot of each group.
    pub fn offsets(&self) -> Vec<usize> {
        self.groups
            .iter()
            .scan(0, |acc, g| {
                let start = *acc;
                *acc += g.size();
                Some(start)
            })
            .collect()
    }

    /// Groups ordered so every relay source precedes its listeners.
    pub fn hierarchy_order(&self) -> Result<Vec<usize>> {
        let parent = |k: usize| match &self.groups[k].reference {
            Reference::Relayed(r) => Some(r.from_group),
            Reference::Trajectory(_) => None,
        };
        let mut order = Vec::with_capacity(self.groups.len());
        let mut placed = vec![false; self.groups.len()];
        while order.len() < self.groups.len() {
            let ready: Vec<usize> = (0..self.groups.len())
                .filter(|&k| !placed[k] && parent(k).is_none_or(|p| placed[p]))
                .collect();
            if ready.is_empty() {
                return Err(Error::Scenario(
                    "reference edges between groups form a cycle".into(),
                ));
            }
            for k in ready {
                placed[k] = true;
                order.push(k);
            }
        }
        Ok(order)
    }
}
