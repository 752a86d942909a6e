use std::io::Write;
use std::ops::Range;

use nalgebra::DVector;

use crate::controllers::Law;
use crate::dynamics::RobotState;
use crate::error::Result;

/// Sampled history of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotTrack {
    pub group: usize,
    pub member: usize,
    pub q: Vec<DVector<f64>>,
    pub qdot: Vec<DVector<f64>>,
    pub qd: Vec<DVector<f64>>,
    pub qd_dot: Vec<DVector<f64>>,
    pub s: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
    /// Empty unless the group is adaptive.
    pub a_hat: Vec<DVector<f64>>,
}

impl RobotTrack {
    pub(crate) fn new(group: usize, member: usize) -> Self {
        Self {
            group,
            member,
            q: Vec::new(),
            qdot: Vec::new(),
            qd: Vec::new(),
            qd_dot: Vec::new(),
            s: Vec::new(),
            tau: Vec::new(),
            a_hat: Vec::new(),
        }
    }

    pub fn state(&self, k: usize) -> RobotState {
        RobotState {
            q: self.q[k].clone(),
            qdot: self.qdot[k].clone(),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |q| q.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLog {
    pub name: String,
    /// Global robot indices of the members.
    pub robots: Range<usize>,
    pub law: Law,
}

/// Uniformly sampled record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub decimation: usize,
    pub t: Vec<f64>,
    pub groups: Vec<GroupLog>,
    pub robots: Vec<RobotTrack>,
    /// Notes raised during the run, such as delay warm-up.
    pub flags: Vec<String>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sampling interval of the log.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.decimation as f64
    }

    pub fn t_final(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&x| x < t - 1e-12).min(self.t.len().saturating_sub(1))
    }

    pub fn group_tracks(&self, group: usize) -> &[RobotTrack] {
        &self.robots[self.groups[group].robots.clone()]
    }

    /// Writes `t,robot,q1..qn,qd1..qdn,s1..sn,tau1..taun[,ahat1..ahatk]`
    /// with one row per robot per sample; `qd` holds joint velocities and robots
    /// are numbered from 1.
    /// Robots with fewer joints or no estimate leave trailing cells empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.robots.iter().map(RobotTrack::dof).max().unwrap_or(0);
        let k = self
            .robots
            .iter()
            .map(|r| r.a_hat.first().map_or(0, |a| a.len()))
            .max()
            .unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "robot".to_string()];
        for prefix in ["q", "qd", "s", "tau"] {
            header.extend((1..=n).map(|j| format!("{prefix}{j}")));
        }
        header.extend((1..=k).map(|j| format!("ahat{j}")));
        w.write_record(&header)?;

        let mut row: Vec<String> = Vec::with_capacity(header.len());
        let push = |row: &mut Vec<String>, v: Option<&DVector<f64>>, width: usize| {
            for j in 0..width {
                row.push(v.and_then(|v| v.get(j)).map_or_else(String::new, |x| format!("{x:.12e}")));
            }
        };
        for (i, &t) in self.t.iter().enumerate() {
            for (r, track) in self.robots.iter().enumerate() {
                row.clear();
                row.push(format!("{t:.6}"));
                row.push((r + 1).to_string());
                push(&mut row, Some(&track.q[i]), n);
                push(&mut row, Some(&track.qdot[i]), n);
                push(&mut row, Some(&track.s[i]), n);
                push(&mut row, Some(&track.tau[i]), n);
                push(&mut row, track.a_hat.get(i), k);
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
