//! Double inverted pendulum on a cart, fully actuated (cart force plus two
//! joint torques). Generalized coordinates are `(x, theta1, theta2)` with both
//! link angles measured from the upward vertical in the inertial frame.
//!
//! With lumped parameters
//!
//! ```text
//! b1 = m0 + m1 + m2        b4 = m1 lc1^2 + m2 l1^2 + I1
//! b2 = m1 lc1 + m2 l1      b5 = m2 l1 lc2
//! b3 = m2 lc2              b6 = m2 lc2^2 + I2
//! ```
//!
//! the inertia matrix is
//!
//! ```text
//!     | b1            b2 cos th1       b3 cos th2      |
//! M = | b2 cos th1    b4               b5 cos(th1-th2) |
//!     | b3 cos th2    b5 cos(th1-th2)  b6              |
//! ```
//!
//! and the potential energy is `g (b2 cos th1 + b3 cos th2)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CartDoublePendulum {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl Default for CartDoublePendulum {
    fn default() -> Self {
        // Uniform 1 m rods of 1 kg on a 1 kg cart.
        Self {
            m0: 1.0,
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            lc1: 0.5,
            lc2: 0.5,
            i1: 1.0 / 12.0,
            i2: 1.0 / 12.0,
        }
    }
}

impl CartDoublePendulum {
    pub const PARAM_NAMES: [&'static str; 8] = ["m0", "m1", "m2", "l1", "lc1", "lc2", "I1", "I2"];

    pub fn from_params(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut cart = Self::default();
        for (key, &value) in overrides {
            let slot = match key.as_str() {
                "m0" => &mut cart.m0,
                "m1" => &mut cart.m1,
                "m2" => &mut cart.m2,
                "l1" => &mut cart.l1,
                "lc1" => &mut cart.lc1,
                "lc2" => &mut cart.lc2,
                "I1" => &mut cart.i1,
                "I2" => &mut cart.i2,
                other => {
                    return Err(Error::Config(format!(
                        "unknown cart-double-pendulum parameter `{other}` (expected one of {:?})",
                        Self::PARAM_NAMES
                    )))
                }
            };
            *slot = value;
        }
        cart.validate()?;
        Ok(cart)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("m0", self.m0),
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("I1", self.i1),
            ("I2", self.i2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            m0: self.m0 * factor,
            m1: self.m1 * factor,
            m2: self.m2 * factor,
            l1: self.l1 * factor,
            lc1: self.lc1 * factor,
            lc2: self.lc2 * factor,
            i1: self.i1 * factor,
            i2: self.i2 * factor,
        }
    }

    pub fn lumped(&self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.m0 + self.m1 + self.m2,
            self.m1 * self.lc1 + self.m2 * self.l1,
            self.m2 * self.lc2,
            self.m1 * self.lc1 * self.lc1 + self.m2 * self.l1 * self.l1 + self.i1,
            self.m2 * self.l1 * self.lc2,
            self.m2 * self.lc2 * self.lc2 + self.i2,
        ])
    }
}

pub(crate) fn mass(b: &DVector<f64>, q: &DVector<f64>) -> DMatrix<f64> {
    let c1 = q[1].cos();
    let c2 = q[2].cos();
    let c12 = (q[1] - q[2]).cos();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            b[0],
            b[1] * c1,
            b[2] * c2,
            b[1] * c1,
            b[3],
            b[4] * c12,
            b[2] * c2,
            b[4] * c12,
            b[5],
        ],
    )
}

pub(crate) fn coriolis(b: &DVector<f64>, q: &DVector<f64>, qdot: &DVector<f64>) -> DMatrix<f64> {
    let s1 = q[1].sin();
    let s2 = q[2].sin();
    let s12 = (q[1] - q[2]).sin();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            -b[1] * s1 * qdot[1],
            -b[2] * s2 * qdot[2],
            0.0,
            0.0,
            b[4] * s12 * qdot[2],
            0.0,
            -b[4] * s12 * qdot[1],
            0.0,
        ],
    )
}

pub(crate) fn gravity(b: &DVector<f64>, q: &DVector<f64>, g: f64) -> DVector<f64> {
    DVector::from_vec(vec![0.0, -g * b[1] * q[1].sin(), -g * b[2] * q[2].sin()])
}

pub(crate) fn regressor(
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qr_dot: &DVector<f64>,
    qr_ddot: &DVector<f64>,
    g: f64,
) -> DMatrix<f64> {
    let (s1, c1) = q[1].sin_cos();
    let (s2, c2) = q[2].sin_cos();
    let (s12, c12) = (q[1] - q[2]).sin_cos();
    let mut y = DMatrix::zeros(3, 6);
    y[(0, 0)] = qr_ddot[0];
    y[(0, 1)] = c1 * qr_ddot[1] - s1 * qdot[1] * qr_dot[1];
    y[(0, 2)] = c2 * qr_ddot[2] - s2 * qdot[2] * qr_dot[2];
    y[(1, 1)] = c1 * qr_ddot[0] - g * s1;
    y[(1, 3)] = qr_ddot[1];
    y[(1, 4)] = c12 * qr_ddot[2] + s12 * qdot[2] * qr_dot[2];
    y[(2, 2)] = c2 * qr_ddot[0] - g * s2;
    y[(2, 4)] = c12 * qr_ddot[1] - s12 * qdot[1] * qr_dot[1];
    y[(2, 5)] = qr_ddot[2];
    y
}
