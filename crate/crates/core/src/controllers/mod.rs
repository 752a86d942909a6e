//! Decentralized control laws. Each torque depends only on the robot's own
//! state, its desired trajectory, and composite variables received from its
//! neighbors.

mod laws;
mod trajectory;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use laws::{
    adaptive_step, adaptive_torque, apply_inhibition, delayed_composite, delayed_torque,
    feedback, feedforward, inhibition_term, inline_endpoint_torque, partial_state_torque,
    pd_torque, reference_signals, tracking_sync_torque, CompositeSignals, Neighbor,
    ParamEstimate,
};
pub use trajectory::{
    AffineMap, AnalyticTrajectory, DesiredSample, Harmonic, JointProfile, Trajectory,
    TrajectorySource, TrajectorySpec,
};

use crate::error::{Error, Result};

/// Time constant of the relayed-acceleration differentiator, in seconds.
pub const DEFAULT_FILTER_TAU: f64 = 0.01;

/// First-order high-pass differentiator for relayed velocities.
///
/// State `f` follows `f' = (v - f) / tau`; the acceleration estimate is the
/// same quantity `(v - f) / tau`, i.e. `v` filtered by `s / (tau s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPassDifferentiator {
    pub tau: f64,
}

impl HighPassDifferentiator {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Controller(format!(
                "filter time constant must be positive, got {tau}"
            )));
        }
        Ok(Self { tau })
    }

    /// Returns the acceleration estimate, which is also `f'`.
    pub fn estimate(&self, input: &DVector<f64>, state: &DVector<f64>) -> DVector<f64> {
        (input - state) / self.tau
    }
}

impl Default for HighPassDifferentiator {
    fn default() -> Self {
        Self {
            tau: DEFAULT_FILTER_TAU,
        }
    }
}

/// Control law run by every member of a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    /// Exact-model tracking and synchronization; partial-state coupling and
    /// inhibitory links come from the graph.
    TrackingSync,
    /// Regressor-based law with the estimate updated by `-Gamma Y' s`.
    Adaptive,
    /// PD coupling to a rest reference. `Lambda = 0` is velocity coupling.
    Pd { gravity_feedforward: bool },
    /// Tracking-sync law reading neighbor states `delay` seconds old.
    Delayed { delay: f64 },
}

impl Law {
    pub fn name(&self) -> &'static str {
        match self {
            Law::TrackingSync => "tracking-sync",
            Law::Adaptive => "adaptive",
            Law::Pd { .. } => "pd",
            Law::Delayed { .. } => "delayed",
        }
    }

    pub fn delay(&self) -> f64 {
        match self {
            Law::Delayed { delay } => *delay,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    TrackingSync,
    Adaptive,
    Pd,
    VelocityOnly,
    Partial,
    Delayed,
}

/// Controller section of a config file. Member indices are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub law: LawKind,
    #[serde(rename = "delay_T", default)]
    pub delay_t: f64,
    #[serde(default)]
    pub partial_mask: Option<Vec<f64>>,
    /// `[a, b, K]`: inhibitory link between members `a` and `b` with gain `K I`.
    #[serde(default)]
    pub inhibition: Option<(usize, usize, f64)>,
    #[serde(default)]
    pub gravity_feedforward: bool,
    /// Initial parameter estimate for the adaptive law.
    #[serde(default)]
    pub a_hat0: Option<Vec<f64>>,
    /// Relayed-acceleration filter time constant.
    #[serde(default)]
    pub filter_tau: Option<f64>,
}

impl ControllerSpec {
    pub fn new(law: LawKind) -> Self {
        Self {
            law,
            delay_t: 0.0,
            partial_mask: None,
            inhibition: None,
            gravity_feedforward: false,
            a_hat0: None,
            filter_tau: None,
        }
    }

    /// Resolves the runtime law and checks the law-specific fields.
    pub fn law(&self, lambda: &DVector<f64>) -> Result<Law> {
        let delay_ok = self.delay_t == 0.0 || self.law == LawKind::Delayed;
        if !delay_ok {
            return Err(Error::Controller("delay_T is only used by the delayed law".into()));
        }
        if self.law != LawKind::Adaptive && self.a_hat0.is_some() {
            return Err(Error::Controller("a_hat0 is only used by the adaptive law".into()));
        }
        let pd = |ff| Law::Pd {
            gravity_feedforward: ff,
        };
        match self.law {
            LawKind::TrackingSync => Ok(Law::TrackingSync),
            LawKind::Adaptive => Ok(Law::Adaptive),
            LawKind::Pd => Ok(pd(self.gravity_feedforward)),
            LawKind::VelocityOnly => {
                if lambda.iter().any(|&l| l != 0.0) {
                    return Err(Error::Controller("velocity-only coupling needs Lambda = 0".into()));
                }
                Ok(pd(self.gravity_feedforward))
            }
            LawKind::Partial => {
                if self.partial_mask.is_none() {
                    return Err(Error::Controller("the partial law needs a partial_mask".into()));
                }
                Ok(Law::TrackingSync)
            }
            LawKind::Delayed => {
                if !(self.delay_t.is_finite() && self.delay_t > 0.0) {
                    return Err(Error::Controller(format!(
                        "the delayed law needs delay_T > 0, got {}",
                        self.delay_t
                    )));
                }
                Ok(Law::Delayed {
                    delay: self.delay_t,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_specific_fields_are_checked() {
        let lambda = DVector::from_element(2, 1.0);
        assert!(ControllerSpec::new(LawKind::Partial).law(&lambda).is_err());
        assert!(ControllerSpec::new(LawKind::Delayed).law(&lambda).is_err());
        assert!(ControllerSpec::new(LawKind::VelocityOnly).law(&lambda).is_err());
        assert_eq!(
            ControllerSpec::new(LawKind::VelocityOnly).law(&DVector::zeros(2)).unwrap(),
            Law::Pd {
                gravity_feedforward: false
            }
        );
        let spec: ControllerSpec = toml::from_str("law = \"delayed\"\ndelay_T = 0.2").unwrap();
        assert_eq!(spec.law(&lambda).unwrap(), Law::Delayed { delay: 0.2 });
    }

    #[test]
    fn differentiator_tracks_a_ramp_slope() {
        let f = HighPassDifferentiator::default();
        // Input v = a t with state settled at v - a tau gives estimate a.
        let a = DVector::from_vec(vec![2.0, -0.5]);
        let v = &a * 3.0;
        let state = &v - &a * f.tau;
        assert!((f.estimate(&v, &state) - a).amax() < 1e-12);
        assert!(HighPassDifferentiator::new(0.0).is_err());
    }
}
