use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Desired position, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredSample {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub qddot: DVector<f64>,
}

impl DesiredSample {
    pub fn rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: DVector::zeros(n),
            qddot: DVector::zeros(n),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::rest(DVector::zeros(n))
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }
}

/// Where a member's desired trajectory comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    Analytic,
    /// Position and velocity relayed from a member of another group.
    RelayedFromMember { group: usize, member: usize },
    /// Acceleration estimated by the high-pass differentiator.
    Filtered,
}

/// `amplitude * cos(freq * t + phase)`. Frequency and phase may be given in
/// rad/s and rad, or as multiples of pi through `freq_pi` / `phase_pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_pi: Option<f64>,
}

impl Harmonic {
    pub fn new(amplitude: f64, freq: f64, phase: f64) -> Self {
        Self {
            amplitude,
            freq: Some(freq),
            freq_pi: None,
            phase: Some(phase),
            phase_pi: None,
        }
    }

    fn resolved(&self) -> Result<(f64, f64, f64)> {
        let freq = match (self.freq, self.freq_pi) {
            (Some(f), None) => f,
            (None, Some(f)) => f * PI,
            _ => {
                return Err(Error::Config(
                    "a harmonic needs exactly one of `freq` or `freq_pi`".into(),
                ))
            }
        };
        let phase = match (self.phase, self.phase_pi) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "a harmonic takes at most one of `phase` or `phase_pi`".into(),
                ))
            }
            (Some(p), None) => p,
            (None, Some(p)) => p * PI,
            (None, None) => 0.0,
        };
        let (a, w, p) = (self.amplitude, freq, phase);
        if !(a.is_finite() && w.is_finite() && p.is_finite()) {
            return Err(Error::NonFinite("harmonic"));
        }
        Ok((a, w, p))
    }
}

/// One joint of an analytic trajectory: `offset + slope t + sum of harmonics`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointProfile {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

/// Smooth per-joint trajectory with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticTrajectory {
    joints: Vec<(f64, f64, Vec<(f64, f64, f64)>)>,
}

impl AnalyticTrajectory {
    pub fn new(profiles: &[JointProfile]) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Config("trajectory needs at least one joint".into()));
        }
        let joints = profiles
            .iter()
            .map(|p| {
                if !(p.offset.is_finite() && p.slope.is_finite()) {
                    return Err(Error::NonFinite("trajectory offset/slope"));
                }
                let h = p.harmonics.iter().map(Harmonic::resolved).collect::<Result<_>>()?;
                Ok((p.offset, p.slope, h))
            })
            .collect::<Result<_>>()?;
        Ok(Self { joints })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn sample(&self, t: f64) -> DesiredSample {
        let n = self.joints.len();
        let mut out = DesiredSample::zero(n);
        for (j, (offset, slope, harmonics)) in self.joints.iter().enumerate() {
            let (mut q, mut v, mut a) = (offset + slope * t, *slope, 0.0);
            for &(amp, w, phase) in harmonics {
                let (s, c) = (w * t + phase).sin_cos();
                q += amp * c;
                v -= amp * w * s;
                a -= amp * w * w * c;
            }
            out.q[j] = q;
            out.qdot[j] = v;
            out.qddot[j] = a;
        }
        out
    }
}

/// A reference signal defined without any other robot.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Analytic(AnalyticTrajectory),
    /// Constant position, zero velocity and acceleration.
    Rest(DVector<f64>),
}

impl Trajectory {
    pub fn dof(&self) -> usize {
        match self {
            Trajectory::Analytic(a) => a.dof(),
            Trajectory::Rest(q) => q.len(),
        }
    }

    pub fn sample(&self, t: f64) -> DesiredSample {
        match self {
            Trajectory::Analytic(a) => a.sample(t),
            Trajectory::Rest(q) => DesiredSample::rest(q.clone()),
        }
    }

    pub fn is_rest(&self) -> bool {
        matches!(self, Trajectory::Rest(_))
    }
}

/// Trajectory section of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Analytic { joints: Vec<JointProfile> },
    Rest { q: Vec<f64> },
    /// No reference at all; equivalent to rest at the origin.
    Zero,
}

impl TrajectorySpec {
    pub fn build(&self, n: usize) -> Result<Trajectory> {
        let traj = match self {
            TrajectorySpec::Analytic { joints } => Trajectory::Analytic(AnalyticTrajectory::new(joints)?),
            TrajectorySpec::Rest { q } => {
                if q.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("rest trajectory"));
                }
                Trajectory::Rest(DVector::from_vec(q.clone()))
            }
            TrajectorySpec::Zero => Trajectory::Rest(DVector::zeros(n)),
        };
        check_len("trajectory joints", n, traj.dof())?;
        Ok(traj)
    }
}

/// Pre-conditioning map `q_d = A q_src + b` applied to a relayed member's
/// state. The velocity is mapped by `A` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        Self {
            gain: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn new(gain: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        check_len("reference map offset", gain.nrows(), offset.len())?;
        if gain.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference map"));
        }
        Ok(Self { gain, offset })
    }

    pub fn input_dim(&self) -> usize {
        self.gain.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.gain.nrows()
    }

    pub fn position(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.gain * q + &self.offset
    }

    pub fn velocity(&self, qdot: &DVector<f64>) -> DVector<f64> {
        &self.gain * qdot
    }
}
