//! Experiment config files.
//!
//! A config is one TOML document. Each of `model`, `graph`, `gains`,
//! `controller` and `trajectory` is either an inline table or the path of a
//! file holding that table, resolved against the config's directory. A
//! `[scenario]` with `[[scenario.groups]]` describes concurrent groups; any
//! section a group omits is taken from the top level.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::controllers::{apply_inhibition, AffineMap, ControllerSpec, HighPassDifferentiator, TrajectorySpec};
use crate::dynamics::{ModelSpec, RobotState};
use crate::error::{check_len, Error, Result};
use crate::simulator::{Disturbance, Group, Reference, Relay, Scenario, SimConfig};
use crate::topology::{ConditionReport, GainSpec, GraphSpec, MatrixSpec};

/// A section written inline or as a path to a file with the same content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Section<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Section<T> {
    fn resolve(&mut self, base: &Path, name: &str) -> Result<()> {
        if let Section::Path(p) = self {
            let path = if p.is_absolute() { p.clone() } else { base.join(&*p) };
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("{name} section '{}': {e}", path.display())))?;
            let value = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{name} section '{}': {e}", path.display())))?;
            *self = Section::Inline(value);
        }
        Ok(())
    }

    fn get(&self, name: &str) -> Result<&T> {
        match self {
            Section::Inline(v) => Ok(v),
            Section::Path(p) => Err(Error::Config(format!(
                "{name} section '{}' was not loaded",
                p.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub decimation: Option<usize>,
    pub seed: Option<u64>,
    pub q_bound: Option<f64>,
    pub qdot_bound: Option<f64>,
    /// `sinusoid:A[:freq]` or `noise:A`.
    pub disturbance: Option<String>,
}

impl SimSection {
    pub fn build(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let cfg = SimConfig {
            dt: self.dt.unwrap_or(d.dt),
            t_final: self.t_final.unwrap_or(d.t_final),
            decimation: self.decimation.unwrap_or(d.decimation),
            seed: self.seed.unwrap_or(d.seed),
            q_bound: self.q_bound.unwrap_or(d.q_bound),
            qdot_bound: self.qdot_bound.unwrap_or(d.qdot_bound),
            disturbance: self.disturbance.as_deref().map(str::parse::<Disturbance>).transpose()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

/// Reference taken from another group. Indices are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySpec {
    pub from_group: usize,
    /// Source member of each member; defaults to the same index.
    #[serde(default)]
    pub members: Option<Vec<usize>>,
    /// `A` in `q_d = A q_src + b`; identity when absent.
    #[serde(default)]
    pub gain: Option<MatrixSpec>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub filter_tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub name: Option<String>,
    pub model: Option<Section<ModelSpec>>,
    pub graph: Option<Section<GraphSpec>>,
    pub gains: Option<Section<GainSpec>>,
    pub controller: Option<Section<ControllerSpec>>,
    pub trajectory: Option<Section<TrajectorySpec>>,
    pub reference: Option<RelaySpec>,
    pub initial: Option<Vec<InitialState>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub groups: Vec<GroupSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimSection,
    pub model: Option<Section<ModelSpec>>,
    pub graph: Option<Section<GraphSpec>>,
    pub gains: Option<Section<GainSpec>>,
    pub controller: Option<Section<ControllerSpec>>,
    pub trajectory: Option<Section<TrajectorySpec>>,
    pub initial: Option<Vec<InitialState>>,
    pub scenario: Option<ScenarioSection>,
}

impl ExperimentConfig {
    /// Parses `text` and loads path sections relative to `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read '{}': {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        fn opt<T: DeserializeOwned + Clone>(s: &mut Option<Section<T>>, base: &Path, name: &str) -> Result<()> {
            s.as_mut().map_or(Ok(()), |s| s.resolve(base, name))
        }
        opt(&mut self.model, base, "model")?;
        opt(&mut self.graph, base, "graph")?;
        opt(&mut self.gains, base, "gains")?;
        opt(&mut self.controller, base, "controller")?;
        opt(&mut self.trajectory, base, "trajectory")?;
        if let Some(sc) = &mut self.scenario {
            for g in &mut sc.groups {
                opt(&mut g.model, base, "model")?;
                opt(&mut g.graph, base, "graph")?;
                opt(&mut g.gains, base, "gains")?;
                opt(&mut g.controller, base, "controller")?;
                opt(&mut g.trajectory, base, "trajectory")?;
            }
        }
        Ok(())
    }

    /// Group sections with top-level defaults filled in.
    fn group_sections(&self) -> Vec<GroupSection> {
        let top = GroupSection {
            name: self.name.clone(),
            model: self.model.clone(),
            graph: self.graph.clone(),
            gains: self.gains.clone(),
            controller: self.controller.clone(),
            trajectory: self.trajectory.clone(),
            reference: None,
            initial: self.initial.clone(),
        };
        match &self.scenario {
            None => vec![top],
            Some(sc) => sc
                .groups
                .iter()
                .enumerate()
                .map(|(i, g)| GroupSection {
                    name: g.name.clone().or_else(|| Some(format!("group{}", i + 1))),
                    model: g.model.clone().or_else(|| top.model.clone()),
                    graph: g.graph.clone().or_else(|| top.graph.clone()),
                    gains: g.gains.clone().or_else(|| top.gains.clone()),
                    controller: g.controller.clone().or_else(|| top.controller.clone()),
                    trajectory: if g.reference.is_some() {
                        g.trajectory.clone()
                    } else {
                        g.trajectory.clone().or_else(|| top.trajectory.clone())
                    },
                    reference: g.reference.clone(),
                    initial: g.initial.clone(),
                })
                .collect(),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        self.sim.build()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let groups = self
            .group_sections()
            .iter()
            .map(build_group)
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(groups)
    }

    /// Validates every section and returns the runnable pieces.
    pub fn build(&self) -> Result<(Scenario, SimConfig)> {
        let sim = self.sim_config()?;
        let scenario = self.scenario()?;
        Ok((scenario, sim))
    }
}

fn required<'a, T: DeserializeOwned + Clone>(s: &'a Option<Section<T>>, group: &str, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("group '{group}' has no {name} section")))?
        .get(name)
}

fn build_group(sec: &GroupSection) -> Result<Group> {
    let name = sec.name.clone().unwrap_or_else(|| "group1".into());
    let model = required(&sec.model, &name, "model")?.build()?;
    let graph_spec = required(&sec.graph, &name, "graph")?;
    let ctrl = required(&sec.controller, &name, "controller")?;
    let n = model.dof();
    let k = (ctrl.law == crate::controllers::LawKind::Adaptive).then(|| model.param_count());
    let gains = required(&sec.gains, &name, "gains")?.build(n, k)?;
    let law = ctrl.law(&gains.lambda)?;

    let mut graph = graph_spec.build()?;
    if let Some(mask) = &ctrl.partial_mask {
        if graph.partial_mask().is_some() {
            return Err(Error::Config(format!(
                "group '{name}': partial_mask is set in both graph and controller"
            )));
        }
        graph = graph.with_partial_mask(mask.clone())?;
    }
    let (graph, gains) = match ctrl.inhibition {
        Some((a, b, kv)) => {
            if a == 0 || b == 0 {
                return Err(Error::Config("inhibition member indices are one-based".into()));
            }
            apply_inhibition(&graph, &gains, a - 1, b - 1, &DMatrix::from_diagonal_element(n, n, kv))?
        }
        None => (graph, gains),
    };
    let p = graph.size();

    let reference = match (&sec.reference, &sec.trajectory) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(format!(
                "group '{name}' has both a trajectory and a relayed reference"
            )))
        }
        (Some(r), None) => Reference::Relayed(build_relay(r, p, n, ctrl.filter_tau)?),
        (None, Some(t)) => Reference::Trajectory(t.get("trajectory")?.build(n)?),
        (None, None) => {
            return Err(Error::Config(format!("group '{name}' has no trajectory section")))
        }
    };

    let mut group = Group::uniform(name, model, graph, gains, law, reference)?;
    if let Some(init) = &sec.initial {
        let states = init
            .iter()
            .map(|x| RobotState::new(DVector::from_vec(x.q.clone()), DVector::from_vec(x.qdot.clone())))
            .collect::<Result<Vec<_>>>()?;
        group = group.with_initial(states)?;
    }
    if let Some(a) = &ctrl.a_hat0 {
        group = group.with_estimate(DVector::from_vec(a.clone()))?;
    }
    Ok(group)
}

fn build_relay(spec: &RelaySpec, p: usize, n: usize, ctrl_tau: Option<f64>) -> Result<Relay> {
    let from_group = spec
        .from_group
        .checked_sub(1)
        .ok_or_else(|| Error::Config("from_group is one-based".into()))?;
    let sources = match &spec.members {
        Some(m) => {
            check_len("relay members", p, m.len())?;
            m.iter()
                .map(|&i| i.checked_sub(1).ok_or_else(|| Error::Config("relay members are one-based".into())))
                .collect::<Result<Vec<_>>>()?
        }
        None => (0..p).collect(),
    };
    let gain = match &spec.gain {
        Some(g) => g.to_matrix(n, "relay gain")?,
        None => DMatrix::identity(n, n),
    };
    let offset = match &spec.offset {
        Some(b) => {
            check_len("relay offset", n, b.len())?;
            DVector::from_vec(b.clone())
        }
        None => DVector::zeros(n),
    };
    let filter = match spec.filter_tau.or(ctrl_tau) {
        Some(tau) => HighPassDifferentiator::new(tau)?,
        None => HighPassDifferentiator::default(),
    };
    Ok(Relay {
        from_group,
        sources,
        map: AffineMap::new(gain, offset)?,
        filter,
    })
}

/// Condition reports of every group, labelled by group name.
pub fn verify(scenario: &Scenario) -> Result<Vec<(String, ConditionReport)>> {
    scenario
        .groups
        .iter()
        .map(|g| Ok((g.name.clone(), g.conditions()?)))
        .collect()
}
