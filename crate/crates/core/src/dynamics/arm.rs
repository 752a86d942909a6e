//! Planar two-link manipulator moving in a horizontal plane.
//!
//! The second link carries a rigidly attached end effector whose centre of
//! mass sits at distance `lce` and angle `delta_e` from the elbow. The
//! dynamics are linear in the four lumped parameters
//!
//! ```text
//! a1 = I1 + m1 lc1^2 + Ie + me lce^2 + me l1^2
//! a2 = Ie + me lce^2
//! a3 = me l1 lce cos(delta_e)
//! a4 = me l1 lce sin(delta_e)
//! ```

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArm {
    pub m1: f64,
    pub l1: f64,
    pub me: f64,
    pub delta_e: f64,
    pub i1: f64,
    pub lc1: f64,
    pub ie: f64,
    pub lce: f64,
}

impl Default for TwoLinkArm {
    fn default() -> Self {
        Self {
            m1: 1.0,
            l1: 1.0,
            me: 2.0,
            delta_e: 30f64.to_radians(),
            i1: 0.12,
            lc1: 0.5,
            ie: 0.25,
            lce: 0.6,
        }
    }
}

impl TwoLinkArm {
    pub const PARAM_NAMES: [&'static str; 8] =
        ["m1", "l1", "me", "delta_e", "I1", "lc1", "Ie", "lce"];

    pub fn from_params(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut arm = Self::default();
        for (key, &value) in overrides {
            let slot = match key.as_str() {
                "m1" => &mut arm.m1,
                "l1" => &mut arm.l1,
                "me" => &mut arm.me,
                "delta_e" => &mut arm.delta_e,
                "I1" => &mut arm.i1,
                "lc1" => &mut arm.lc1,
                "Ie" => &mut arm.ie,
                "lce" => &mut arm.lce,
                other => {
                    return Err(Error::Config(format!(
                        "unknown two-link-arm parameter `{other}` (expected one of {:?})",
                        Self::PARAM_NAMES
                    )))
                }
            };
            *slot = value;
        }
        arm.validate()?;
        Ok(arm)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("l1", self.l1),
            ("me", self.me),
            ("I1", self.i1),
            ("Ie", self.ie),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lc1.is_finite() && self.lce.is_finite() && self.delta_e.is_finite()) {
            return Err(Error::Config("arm geometry must be finite".into()));
        }
        Ok(())
    }

    /// Every physical parameter multiplied by `factor` (angles excepted).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            m1: self.m1 * factor,
            l1: self.l1 * factor,
            me: self.me * factor,
            delta_e: self.delta_e,
            i1: self.i1 * factor,
            lc1: self.lc1 * factor,
            ie: self.ie * factor,
            lce: self.lce * factor,
        }
    }

    pub fn lumped(&self) -> DVector<f64> {
        let a1 = self.i1
            + self.m1 * self.lc1 * self.lc1
            + self.ie
            + self.me * self.lce * self.lce
            + self.me * self.l1 * self.l1;
        let a2 = self.ie + self.me * self.lce * self.lce;
        let a3 = self.me * self.l1 * self.lce * self.delta_e.cos();
        let a4 = self.me * self.l1 * self.lce * self.delta_e.sin();
        DVector::from_vec(vec![a1, a2, a3, a4])
    }
}

pub(crate) fn mass(a: &DVector<f64>, q: &DVector<f64>) -> DMatrix<f64> {
    let (c2, s2) = (q[1].cos(), q[1].sin());
    let m11 = a[0] + 2.0 * a[2] * c2 + 2.0 * a[3] * s2;
    let m12 = a[1] + a[2] * c2 + a[3] * s2;
    DMatrix::from_row_slice(2, 2, &[m11, m12, m12, a[1]])
}

pub(crate) fn coriolis(a: &DVector<f64>, q: &DVector<f64>, qdot: &DVector<f64>) -> DMatrix<f64> {
    let h = a[2] * q[1].sin() - a[3] * q[1].cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[-h * qdot[1], -h * (qdot[0] + qdot[1]), h * qdot[0], 0.0],
    )
}

pub(crate) fn regressor(
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qr_dot: &DVector<f64>,
    qr_ddot: &DVector<f64>,
) -> DMatrix<f64> {
    let (c2, s2) = (q[1].cos(), q[1].sin());
    // Velocity products appearing in C(q, qdot) qr_dot.
    let w1 = qdot[1] * qr_dot[0] + (qdot[0] + qdot[1]) * qr_dot[1];
    let w2 = qdot[0] * qr_dot[0];
    let mut y = DMatrix::zeros(2, 4);
    y[(0, 0)] = qr_ddot[0];
    y[(0, 1)] = qr_ddot[1];
    y[(0, 2)] = c2 * (2.0 * qr_ddot[0] + qr_ddot[1]) - s2 * w1;
    y[(0, 3)] = s2 * (2.0 * qr_ddot[0] + qr_ddot[1]) + c2 * w1;
    y[(1, 1)] = qr_ddot[0] + qr_ddot[1];
    y[(1, 2)] = c2 * qr_ddot[0] + s2 * w2;
    y[(1, 3)] = s2 * qr_ddot[0] - c2 * w2;
    y
}
