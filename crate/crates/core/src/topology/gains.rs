use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Diagonal feedback, coupling and slope gains, plus the adaptation gain and
/// the optional inhibitory-link gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Diagonal of `K1` (local feedback).
    pub k1: DVector<f64>,
    /// Diagonal of `K2` (coupling with neighbors).
    pub k2: DVector<f64>,
    /// Diagonal of `Lambda` (composite-variable slope).
    pub lambda: DVector<f64>,
    /// Adaptation gain `Gamma`, symmetric positive definite.
    pub gamma: Option<DMatrix<f64>>,
    /// Inhibitory-link gain `K`, symmetric positive definite.
    pub k_inhib: Option<DMatrix<f64>>,
}

impl Gains {
    pub fn new(k1: DVector<f64>, k2: DVector<f64>, lambda: DVector<f64>) -> Result<Self> {
        let gains = Self {
            k1,
            k2,
            lambda,
            gamma: None,
            k_inhib: None,
        };
        gains.validate()?;
        Ok(gains)
    }

    /// `K1 = k1 I`, `K2 = k2 I`, `Lambda = lambda I`.
    pub fn scalar(n: usize, k1: f64, k2: f64, lambda: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(n, k1),
            DVector::from_element(n, k2),
            DVector::from_element(n, lambda),
        )
    }

    /// `gamma` is sized by the model's parameter count, not by `dof`.
    pub fn with_gamma(mut self, gamma: DMatrix<f64>) -> Result<Self> {
        check_spd("Gamma", &gamma, gamma.nrows())?;
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn with_inhibition(mut self, k: DMatrix<f64>) -> Result<Self> {
        check_spd("K_inhib", &k, self.dof())?;
        self.k_inhib = Some(k);
        Ok(self)
    }

    pub fn dof(&self) -> usize {
        self.k1.len()
    }

    pub fn k1_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.k1)
    }

    pub fn k2_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.k2)
    }

    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.k1.len();
        if n == 0 {
            return Err(Error::Gains("gains must have at least one joint".into()));
        }
        check_len("K2", n, self.k2.len())?;
        check_len("Lambda", n, self.lambda.len())?;
        if !self.k1.iter().all(|&v| v.is_finite() && v > 0.0) {
            return Err(Error::Gains(format!("K1 must be positive diagonal, got {}", self.k1.transpose())));
        }
        if !self.k2.iter().all(|v| v.is_finite()) {
            return Err(Error::Gains("K2 must be finite".into()));
        }
        // Lambda = 0 is the velocity-coupling limit of the PD law.
        if !self.lambda.iter().all(|&v| v.is_finite() && v >= 0.0) {
            return Err(Error::Gains(format!(
                "Lambda must be non-negative diagonal, got {}",
                self.lambda.transpose()
            )));
        }
        if let Some(g) = &self.gamma {
            check_spd("Gamma", g, g.nrows())?;
        }
        if let Some(k) = &self.k_inhib {
            check_spd("K_inhib", k, n)?;
        }
        Ok(())
    }
}

fn check_spd(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Gains(format!(
            "{name} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::Gains(format!("{name} must be symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Gains(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// A gain entry written either as one scalar (times identity) or as the
/// explicit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagonalSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl DiagonalSpec {
    pub fn to_vector(&self, n: usize, name: &'static str) -> Result<DVector<f64>> {
        match self {
            DiagonalSpec::Scalar(v) => Ok(DVector::from_element(n, *v)),
            DiagonalSpec::Diagonal(v) => {
                check_len(name, n, v.len())?;
                Ok(DVector::from_vec(v.clone()))
            }
        }
    }
}

/// Adaptation gain written as a scalar, a diagonal, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, n: usize, name: &'static str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(v) => Ok(DMatrix::from_diagonal_element(n, n, *v)),
            MatrixSpec::Diagonal(v) => {
                check_len(name, n, v.len())?;
                Ok(DMatrix::from_diagonal(&DVector::from_vec(v.clone())))
            }
            MatrixSpec::Full(rows) => {
                check_len(name, n, rows.len())?;
                for row in rows {
                    check_len(name, n, row.len())?;
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

/// Gain file: named entries for `K1`, `K2`, `Lambda`, optional `Gamma` and
/// `K_inhib`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    #[serde(rename = "K1")]
    pub k1: DiagonalSpec,
    #[serde(rename = "K2")]
    pub k2: DiagonalSpec,
    #[serde(rename = "Lambda")]
    pub lambda: DiagonalSpec,
    #[serde(rename = "Gamma", default)]
    pub gamma: Option<MatrixSpec>,
    #[serde(rename = "K_inhib", default)]
    pub k_inhib: Option<MatrixSpec>,
}

impl GainSpec {
    pub fn scalar(k1: f64, k2: f64, lambda: f64) -> Self {
        Self {
            k1: DiagonalSpec::Scalar(k1),
            k2: DiagonalSpec::Scalar(k2),
            lambda: DiagonalSpec::Scalar(lambda),
            gamma: None,
            k_inhib: None,
        }
    }

    /// `param_count` sizes `Gamma`; pass `None` when no adaptation is used.
    pub fn build(&self, n: usize, param_count: Option<usize>) -> Result<Gains> {
        let mut gains = Gains::new(
            self.k1.to_vector(n, "K1")?,
            self.k2.to_vector(n, "K2")?,
            self.lambda.to_vector(n, "Lambda")?,
        )?;
        if let (Some(g), Some(k)) = (&self.gamma, param_count) {
            gains = gains.with_gamma(g.to_matrix(k, "Gamma")?)?;
        }
        if let Some(k) = &self.k_inhib {
            gains = gains.with_inhibition(k.to_matrix(n, "K_inhib")?)?;
        }
        Ok(gains)
    }
}
