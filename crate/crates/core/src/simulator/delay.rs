use std::collections::VecDeque;

use nalgebra::DVector;

use crate::dynamics::RobotState;
use crate::error::{Error, Result};

/// Time-stamped `(q, qdot)` history of one robot, appended once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    samples: VecDeque<(f64, DVector<f64>, DVector<f64>)>,
    horizon: f64,
}

/// Result of reading a delay buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySample {
    Value(RobotState),
    /// The query precedes the first stored sample.
    WarmUp,
}

impl DelayBuffer {
    /// `horizon` is how far back queries may reach; older samples are dropped.
    pub fn new(horizon: f64) -> Self {
        Self {
            samples: VecDeque::new(),
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn newest_time(&self) -> Option<f64> {
        self.samples.back().map(|s| s.0)
    }

    pub fn push(&mut self, t: f64, state: &RobotState) -> Result<()> {
        if let Some(last) = self.newest_time() {
            if t <= last {
                return Err(Error::Scenario(format!(
                    "delay buffer times must increase: {t} after {last}"
                )));
            }
        }
        self.samples.push_back((t, state.q.clone(), state.qdot.clone()));
        // Keep one sample at or before the oldest reachable time.
        while self.samples.len() > 2 && self.samples[1].0 <= t - self.horizon {
            self.samples.pop_front();
        }
        Ok(())
    }
}

/// Linearly interpolated `(q, qdot)` at `t_query`.
///
/// Queries before the first sample return [`DelaySample::WarmUp`]; queries
/// after the newest sample are non-causal.
pub fn delay_sample(buffer: &DelayBuffer, t_query: f64) -> Result<DelaySample> {
    let Some(newest) = buffer.newest_time() else {
        return Ok(DelaySample::WarmUp);
    };
    let tol = 1e-12 * newest.abs().max(1.0);
    if t_query > newest + tol {
        return Err(Error::NonCausal {
            query: t_query,
            newest,
        });
    }
    let samples = &buffer.samples;
    if t_query < samples[0].0 - tol {
        return Ok(DelaySample::WarmUp);
    }
    // First index whose time is >= t_query.
    let hi = samples.partition_point(|s| s.0 < t_query).min(samples.len() - 1);
    let (t1, q1, v1) = &samples[hi];
    if hi == 0 || (t1 - t_query).abs() <= tol {
        return Ok(DelaySample::Value(RobotState {
            q: q1.clone(),
            qdot: v1.clone(),
        }));
    }
    let (t0, q0, v0) = &samples[hi - 1];
    let w = (t_query - t0) / (t1 - t0);
    Ok(DelaySample::Value(RobotState {
        q: q0 * (1.0 - w) + q1 * w,
        qdot: v0 * (1.0 - w) + v1 * w,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(x: f64) -> RobotState {
        RobotState::new(DVector::from_vec(vec![x, 2.0 * x]), DVector::from_vec(vec![-x, 1.0])).unwrap()
    }

    fn filled(dt: f64, steps: usize, f: impl Fn(f64) -> f64) -> DelayBuffer {
        let mut b = DelayBuffer::new(f64::INFINITY);
        for k in 0..=steps {
            let t = k as f64 * dt;
            b.push(t, &state(f(t))).unwrap();
        }
        b
    }

    fn value(s: DelaySample) -> RobotState {
        match s {
            DelaySample::Value(v) => v,
            DelaySample::WarmUp => panic!("unexpected warm-up"),
        }
    }

    #[test]
    fn stored_sample_is_returned_exactly() {
        let b = filled(0.1, 10, |t| t.sin());
        let t = 3.0 * 0.1;
        assert_eq!(value(delay_sample(&b, t).unwrap()), state(t.sin()));
    }

    #[test]
    fn linear_history_is_interpolated_exactly() {
        let b = filled(0.1, 10, |t| 3.0 * t - 1.0);
        for &t in &[0.05, 0.123, 0.77, 0.999] {
            let v = value(delay_sample(&b, t).unwrap());
            assert!((v.q[0] - (3.0 * t - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn warm_up_and_non_causal_queries() {
        let b = filled(0.1, 5, |t| t);
        assert_eq!(delay_sample(&b, -0.01).unwrap(), DelaySample::WarmUp);
        assert!(matches!(delay_sample(&b, 0.6), Err(Error::NonCausal { .. })));
        assert_eq!(delay_sample(&DelayBuffer::new(1.0), 0.0).unwrap(), DelaySample::WarmUp);
    }

    #[test]
    fn pruning_keeps_the_reachable_window() {
        let mut b = DelayBuffer::new(0.2);
        for k in 0..=100 {
            b.push(k as f64 * 0.01, &state(k as f64)).unwrap();
        }
        assert!(b.len() <= 22);
        let v = value(delay_sample(&b, 1.0 - 0.2).unwrap());
        assert!((v.q[0] - 80.0).abs() < 1e-9);
        assert!(b.push(0.5, &state(0.0)).is_err());
    }
}
