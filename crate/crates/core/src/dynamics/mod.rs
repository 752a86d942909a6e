//! Closed-form rigid-body models `M(q) qddot + C(q, qdot) qdot + g(q) = tau`.
//!
//! `C` uses the Christoffel-symbol parameterization, so `Mdot - 2C` is
//! skew-symmetric. Every model is linear in a lumped parameter vector `a`
//! and exposes the regressor `Y` with `M qr_ddot + C qr_dot + g = Y a`.

mod arm;
mod cart;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use arm::TwoLinkArm;
pub use cart::CartDoublePendulum;

use crate::error::{check_len, Error, Result};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoLinkArm,
    CartDoublePendulum,
}

impl ModelKind {
    pub fn dof(self) -> usize {
        match self {
            ModelKind::TwoLinkArm => 2,
            ModelKind::CartDoublePendulum => 3,
        }
    }
}

/// Model parameter file: `kind`, `n`, named SI `params`, `gravity_on`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub gravity_on: Option<bool>,
    /// Uniform multiplier on every physical parameter.
    #[serde(default)]
    pub scale: Option<f64>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            n: None,
            params: BTreeMap::new(),
            gravity_on: None,
            scale: None,
        }
    }

    pub fn build(&self) -> Result<LagrangianModel> {
        if let Some(n) = self.n {
            check_len("model n", self.kind.dof(), n)?;
        }
        let scale = self.scale.unwrap_or(1.0);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("model scale must be positive, got {scale}")));
        }
        let plant = match self.kind {
            ModelKind::TwoLinkArm => {
                if self.gravity_on == Some(true) {
                    return Err(Error::Config(
                        "the two-link arm moves in a horizontal plane; gravity_on must be false"
                            .into(),
                    ));
                }
                Plant::Arm(TwoLinkArm::from_params(&self.params)?.scaled(scale))
            }
            ModelKind::CartDoublePendulum => {
                Plant::Cart(CartDoublePendulum::from_params(&self.params)?.scaled(scale))
            }
        };
        let gravity_on = self.gravity_on.unwrap_or(self.kind == ModelKind::CartDoublePendulum);
        Ok(LagrangianModel::from_plant(plant, gravity_on))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Arm(TwoLinkArm),
    Cart(CartDoublePendulum),
}

/// Joint positions and velocities of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl RobotState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Result<Self> {
        check_len("robot state", q.len(), qdot.len())?;
        Ok(Self { q, qdot })
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTerms {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
}

/// A closed-form Lagrangian plant together with its true lumped parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianModel {
    kind: ModelKind,
    plant: Plant,
    params: DVector<f64>,
    gravity_on: bool,
    inertia_floor: f64,
}

impl LagrangianModel {
    pub fn two_link_arm(arm: TwoLinkArm) -> Self {
        Self::from_plant(Plant::Arm(arm), false)
    }

    pub fn cart_double_pendulum(cart: CartDoublePendulum, gravity_on: bool) -> Self {
        Self::from_plant(Plant::Cart(cart), gravity_on)
    }

    fn from_plant(plant: Plant, gravity_on: bool) -> Self {
        let (kind, params) = match &plant {
            Plant::Arm(arm) => (ModelKind::TwoLinkArm, arm.lumped()),
            Plant::Cart(cart) => (ModelKind::CartDoublePendulum, cart.lumped()),
        };
        let mut model = Self {
            kind,
            plant,
            params,
            gravity_on,
            inertia_floor: 0.0,
        };
        model.inertia_floor = model.sampled_inertia_floor();
        model
    }

    /// Same plant with every physical parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let plant = match &self.plant {
            Plant::Arm(arm) => Plant::Arm(arm.scaled(factor)),
            Plant::Cart(cart) => Plant::Cart(cart.scaled(factor)),
        };
        Self::from_plant(plant, self.gravity_on)
    }

    /// Same plant with gravity switched on or off (off models a plant whose
    /// gravity is cancelled by a separate feedforward loop).
    pub fn with_gravity(&self, on: bool) -> Self {
        Self {
            gravity_on: on && self.kind == ModelKind::CartDoublePendulum,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn dof(&self) -> usize {
        self.kind.dof()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// True lumped parameter vector `a`.
    pub fn params(&self) -> &DVector<f64> {
        &self.params
    }

    pub fn gravity_on(&self) -> bool {
        self.gravity_on
    }

    /// Lower bound on the smallest eigenvalue of `M(q)` over the workspace.
    pub fn inertia_floor(&self) -> f64 {
        self.inertia_floor
    }

    fn gravity_constant(&self) -> f64 {
        if self.gravity_on {
            GRAVITY
        } else {
            0.0
        }
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("q", self.dof(), q.len())?;
        Ok(self.mass_unchecked(q))
    }

    fn mass_unchecked(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match self.plant {
            Plant::Arm(_) => arm::mass(&self.params, q),
            Plant::Cart(_) => cart::mass(&self.params, q),
        }
    }

    pub fn coriolis_matrix(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("q", self.dof(), q.len())?;
        check_len("qdot", self.dof(), qdot.len())?;
        Ok(match self.plant {
            Plant::Arm(_) => arm::coriolis(&self.params, q, qdot),
            Plant::Cart(_) => cart::coriolis(&self.params, q, qdot),
        })
    }

    pub fn gravity(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("q", self.dof(), q.len())?;
        Ok(match self.plant {
            Plant::Arm(_) => DVector::zeros(2),
            Plant::Cart(_) => cart::gravity(&self.params, q, self.gravity_constant()),
        })
    }

    pub fn terms(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<ModelTerms> {
        Ok(ModelTerms {
            mass: self.mass_matrix(q)?,
            coriolis: self.coriolis_matrix(q, qdot)?,
            gravity: self.gravity(q)?,
        })
    }

    /// Solves `M qddot = tau - C qdot - g` for the joint accelerations.
    pub fn forward_dynamics(&self, state: &RobotState, tau: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("tau", self.dof(), tau.len())?;
        if !tau.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("torque"));
        }
        let terms = self.terms(&state.q, &state.qdot)?;
        let rhs = tau - &terms.coriolis * &state.qdot - &terms.gravity;
        solve_spd(terms.mass, rhs)
    }

    /// `Y(q, qdot, qr_dot, qr_ddot)` with `Y a = M qr_ddot + C qr_dot + g`.
    pub fn regressor(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        qr_dot: &DVector<f64>,
        qr_ddot: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let n = self.dof();
        check_len("q", n, q.len())?;
        check_len("qdot", n, qdot.len())?;
        check_len("qr_dot", n, qr_dot.len())?;
        check_len("qr_ddot", n, qr_ddot.len())?;
        Ok(match self.plant {
            Plant::Arm(_) => arm::regressor(q, qdot, qr_dot, qr_ddot),
            Plant::Cart(_) => {
                cart::regressor(q, qdot, qr_dot, qr_ddot, self.gravity_constant())
            }
        })
    }

    pub fn kinetic_energy(&self, state: &RobotState) -> Result<f64> {
        let m = self.mass_matrix(&state.q)?;
        Ok(0.5 * state.qdot.dot(&(m * &state.qdot)))
    }

    pub fn potential_energy(&self, q: &DVector<f64>) -> Result<f64> {
        check_len("q", self.dof(), q.len())?;
        Ok(match self.plant {
            Plant::Arm(_) => 0.0,
            Plant::Cart(_) => {
                self.gravity_constant() * (self.params[1] * q[1].cos() + self.params[2] * q[2].cos())
            }
        })
    }

    /// Minimum eigenvalue of `M` over a dense grid of the angles it depends
    /// on, with a 10% margin. Both plants' inertia matrices are 2*pi periodic
    /// in those angles, so the grid covers the whole workspace.
    fn sampled_inertia_floor(&self) -> f64 {
        let samples = match self.kind {
            ModelKind::TwoLinkArm => 2048,
            ModelKind::CartDoublePendulum => 192,
        };
        let step = std::f64::consts::TAU / samples as f64;
        let mut floor = f64::INFINITY;
        match self.kind {
            ModelKind::TwoLinkArm => {
                for k in 0..samples {
                    let q = DVector::from_vec(vec![0.0, k as f64 * step]);
                    floor = floor.min(min_eigenvalue(&self.mass_unchecked(&q)));
                }
            }
            ModelKind::CartDoublePendulum => {
                for i in 0..samples {
                    for j in 0..samples {
                        let q = DVector::from_vec(vec![0.0, i as f64 * step, j as f64 * step]);
                        floor = floor.min(min_eigenvalue(&self.mass_unchecked(&q)));
                    }
                }
            }
        }
        0.9 * floor
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn solve_spd(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    match m.clone().cholesky() {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => m
            .lu()
            .solve(&rhs)
            .ok_or(Error::NonFinite("singular inertia matrix")),
    }
}
