//! Post-run metrics computed from a [`TrajectoryLog`].

mod fit;
mod reduction;

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use fit::{fit_rate, FitWindow, RateFit};
pub use reduction::{reduced_model_compare, Reduction, ReductionReport};

use crate::controllers::Law;
use crate::error::{check_len, Error, Result};
use crate::simulator::{Group, Scenario, TrajectoryLog};
use crate::topology::SyncBasis;

/// Default threshold on `||V_sync' q||` for declaring a network synchronized.
pub const SYNC_TOLERANCE: f64 = 1e-3;

/// A scalar quantity sampled on the log's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.value.last().copied().unwrap_or(f64::NAN)
    }

    fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.t
            .iter()
            .zip(&self.value)
            .filter(move |(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
            .map(|(_, v)| *v)
    }

    pub fn min_over(&self, t0: f64, t1: f64) -> f64 {
        self.window(t0, t1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_over(&self, t0: f64, t1: f64) -> f64 {
        self.window(t0, t1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest increase between consecutive samples from `t0` on.
    pub fn max_increment_after(&self, t0: f64) -> f64 {
        self.t
            .windows(2)
            .zip(self.value.windows(2))
            .filter(|(t, _)| t[0] >= t0 - 1e-12)
            .map(|(_, v)| v[1] - v[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise maximum of several series on the same grid.
    pub fn pointwise_max(series: &[ErrorSeries]) -> ErrorSeries {
        let t = series.first().map(|s| s.t.clone()).unwrap_or_default();
        let value = (0..t.len())
            .map(|k| series.iter().map(|s| s.value[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        ErrorSeries { t, value }
    }
}

/// Orthonormal complement of the consensus block for `p` robots of `n` joints.
pub fn consensus_basis(p: usize, n: usize) -> Result<SyncBasis> {
    SyncBasis::new(&DMatrix::identity(p * n, p * n), p, n)
}

fn stacked(vectors: impl Iterator<Item = DVector<f64>>, dim: usize) -> Result<DVector<f64>> {
    let parts: Vec<DVector<f64>> = vectors.collect();
    let total: usize = parts.iter().map(|v| v.len()).sum();
    check_len("stacked state", dim, total)?;
    Ok(DVector::from_iterator(dim, parts.into_iter().flat_map(|v| v.into_iter().copied().collect::<Vec<_>>())))
}

/// Members stacked relative to the first one. `V_sync'` annihilates the
/// common shift, so projecting this gives exactly zero on the synchronized
/// manifold.
fn offsets_from_first(vectors: &[&DVector<f64>], dim: usize) -> Result<DVector<f64>> {
    let first = vectors.first().copied().cloned().unwrap_or_else(|| DVector::zeros(0));
    stacked(vectors.iter().map(|v| *v - &first), dim)
}

fn check_basis(log: &TrajectoryLog, robots: &Range<usize>, basis: &SyncBasis) -> Result<()> {
    check_len("sync basis members", basis.p, robots.len())?;
    if robots.end > log.robots.len() {
        return Err(Error::Dimension {
            context: "log robots",
            expected: robots.end,
            actual: log.robots.len(),
        });
    }
    for r in robots.clone() {
        check_len("sync basis joints", basis.n, log.robots[r].dof())?;
    }
    Ok(())
}

/// `||V_sync' [q_1; ...; q_p]||` for the robots in `robots`.
pub fn sync_error(log: &TrajectoryLog, robots: Range<usize>, basis: &SyncBasis) -> Result<ErrorSeries> {
    check_basis(log, &robots, basis)?;
    let dim = basis.p * basis.n;
    let value = (0..log.len())
        .map(|k| {
            let q: Vec<_> = robots.clone().map(|r| &log.robots[r].q[k]).collect();
            let x = offsets_from_first(&q, dim)?;
            Ok(basis.project_sync(&x).norm())
        })
        .collect::<Result<_>>()?;
    Ok(ErrorSeries {
        t: log.t.clone(),
        value,
    })
}

/// `||V_sync' [s_1; ...; s_p]||`, the composite-variable disagreement.
pub fn composite_sync_error(
    log: &TrajectoryLog,
    robots: Range<usize>,
    basis: &SyncBasis,
) -> Result<ErrorSeries> {
    check_basis(log, &robots, basis)?;
    let dim = basis.p * basis.n;
    let value = (0..log.len())
        .map(|k| {
            let s: Vec<_> = robots.clone().map(|r| &log.robots[r].s[k]).collect();
            let x = offsets_from_first(&s, dim)?;
            Ok(basis.project_sync(&x).norm())
        })
        .collect::<Result<_>>()?;
    Ok(ErrorSeries {
        t: log.t.clone(),
        value,
    })
}

/// Position sync error of one group, measured in its consensus complement.
pub fn group_sync_error(log: &TrajectoryLog, group: usize) -> Result<ErrorSeries> {
    let robots = log.groups[group].robots.clone();
    let n = log.robots[robots.start].dof();
    sync_error(log, robots.clone(), &consensus_basis(robots.len(), n)?)
}

/// `||q_i - q_d||` for every robot.
pub fn tracking_error(log: &TrajectoryLog) -> Vec<ErrorSeries> {
    log.robots
        .iter()
        .map(|r| ErrorSeries {
            t: log.t.clone(),
            value: r.q.iter().zip(&r.qd).map(|(q, qd)| (q - qd).norm()).collect(),
        })
        .collect()
}

/// Worst tracking error over the robots in `robots`.
pub fn max_tracking_error(log: &TrajectoryLog, robots: Range<usize>) -> ErrorSeries {
    let all = tracking_error(log);
    ErrorSeries::pointwise_max(&all[robots])
}

/// Finite-difference check of the contraction identity along a log.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub t: Vec<f64>,
    /// `|d/dt(x'[M]x) + 2 x'Lx|`.
    pub absolute: Vec<f64>,
    /// `absolute / max(x'[M]x, floor)`.
    pub relative: Vec<f64>,
}

impl Residual {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_relative_over(&self, t0: f64, t1: f64) -> f64 {
        self.t
            .iter()
            .zip(&self.relative)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }
}

/// Residual of `d/dt(x'[M]x) = -2 x'Lx` with `x` the stacked composite
/// variables of group `g`, differentiated by central differences.
///
/// The identity holds for the exact-model tracking-sync law without
/// disturbances. Samples with `x'[M]x` below `floor` are scaled by `floor`
/// instead, so rounding in a vanishing `x` does not dominate.
pub fn contraction_residual(
    log: &TrajectoryLog,
    scenario: &Scenario,
    g: usize,
    floor: f64,
) -> Result<Residual> {
    let group = &scenario.groups[g];
    let robots = log.groups[g].robots.clone();
    let h = log.sample_dt();
    let energy = |k: usize| -> Result<f64> {
        robots
            .clone()
            .zip(&group.models)
            .map(|(r, m)| {
                let tr = &log.robots[r];
                let mass = m.mass_matrix(&tr.q[k])?;
                Ok(tr.s[k].dot(&(mass * &tr.s[k])))
            })
            .sum()
    };
    let laplacians = (0..group.graph.len())
        .map(|i| group.laplacian(i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Residual {
        t: Vec::new(),
        absolute: Vec::new(),
        relative: Vec::new(),
    };
    let dim = group.size() * group.dof();
    for k in 1..log.len().saturating_sub(1) {
        let idx = group.graph.index_at(log.t[k]);
        // Skip samples whose difference stencil straddles a graph switch.
        if group.graph.index_at(log.t[k - 1]) != idx || group.graph.index_at(log.t[k + 1]) != idx {
            continue;
        }
        let x = stacked(robots.clone().map(|r| log.robots[r].s[k].clone()), dim)?;
        let xlx = x.dot(&(&laplacians[idx].l * &x));
        let d = (energy(k + 1)? - energy(k - 1)?) / (2.0 * h);
        let abs = (d + 2.0 * xlx).abs();
        out.t.push(log.t[k]);
        out.absolute.push(abs);
        out.relative.push(abs / energy(k)?.max(floor));
    }
    Ok(out)
}

/// `V = sum_i qdot_i' M_i qdot_i / 2 + qtilde' (L Lambda) qtilde / 2` for a PD
/// group. Its rate along solutions is `-qdot' L qdot`.
pub fn pd_lyapunov(log: &TrajectoryLog, scenario: &Scenario, g: usize) -> Result<ErrorSeries> {
    let group = &scenario.groups[g];
    if !matches!(group.law, Law::Pd { .. }) {
        return Err(Error::Scenario("the PD Lyapunov function needs a PD group".into()));
    }
    let robots = log.groups[g].robots.clone();
    let n = group.dof();
    let dim = group.size() * n;
    let lam = DVector::from_fn(dim, |i, _| group.gains.lambda[i % n]);
    let mut value = Vec::with_capacity(log.len());
    for k in 0..log.len() {
        let lap = group.laplacian(group.graph.index_at(log.t[k]))?;
        if !lap.is_symmetric() {
            return Err(Error::NotSymmetric(lap.asymmetry()));
        }
        let mut kinetic = 0.0;
        for (r, m) in robots.clone().zip(&group.models) {
            kinetic += m.kinetic_energy(&log.robots[r].state(k))?;
        }
        let qt = stacked(robots.clone().map(|r| &log.robots[r].q[k] - &log.robots[r].qd[k]), dim)?;
        let scaled = qt.component_mul(&lam);
        value.push(kinetic + 0.5 * qt.dot(&(&lap.l * scaled)));
    }
    Ok(ErrorSeries {
        t: log.t.clone(),
        value,
    })
}

/// Delay functional `V(t) = x'[M]x + int_{t-T}^{t} sum_i c_i s_i' K2 s_i`,
/// where `c_i` is the total weight of member `i`'s links to other members.
///
/// For two robots this is the squared length plus the stored coupling
/// energy. It is evaluated from `t = T` onward, with the integral taken by
/// the trapezoidal rule on the log grid.
pub fn delay_functional(log: &TrajectoryLog, scenario: &Scenario, g: usize) -> Result<ErrorSeries> {
    let group = &scenario.groups[g];
    let Law::Delayed { delay } = group.law else {
        return Err(Error::Scenario("the delay functional needs a delayed group".into()));
    };
    delay_functional_with(log, group, log.groups[g].robots.clone(), delay)
}

fn delay_functional_with(
    log: &TrajectoryLog,
    group: &Group,
    robots: Range<usize>,
    delay: f64,
) -> Result<ErrorSeries> {
    let graph = group.graph.initial();
    let weight: Vec<f64> = (0..group.size())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .filter(|l| l.from != i)
                .map(|l| l.weight)
                .sum()
        })
        .collect();
    let mut squared = Vec::with_capacity(log.len());
    let mut integrand = Vec::with_capacity(log.len());
    for k in 0..log.len() {
        let mut sq = 0.0;
        let mut c = 0.0;
        for ((i, r), m) in robots.clone().enumerate().zip(&group.models) {
            let tr = &log.robots[r];
            sq += tr.s[k].dot(&(m.mass_matrix(&tr.q[k])? * &tr.s[k]));
            c += weight[i] * tr.s[k].dot(&group.gains.k2.component_mul(&tr.s[k]));
        }
        squared.push(sq);
        integrand.push(c);
    }
    // Cumulative trapezoid and its linear interpolation.
    let mut cumulative = vec![0.0; log.len()];
    for k in 1..log.len() {
        cumulative[k] = cumulative[k - 1] + 0.5 * (integrand[k] + integrand[k - 1]) * (log.t[k] - log.t[k - 1]);
    }
    let at = |t: f64| -> f64 {
        let hi = log.t.partition_point(|&x| x < t).min(log.len() - 1);
        if hi == 0 {
            return cumulative[0];
        }
        let (t0, t1) = (log.t[hi - 1], log.t[hi]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        cumulative[hi - 1] * (1.0 - w) + cumulative[hi] * w
    };
    let start = log.index_at(delay);
    let t: Vec<f64> = log.t[start..].to_vec();
    let value = (start..log.len())
        .map(|k| squared[k] + cumulative[k] - at(log.t[k] - delay))
        .collect();
    Ok(ErrorSeries { t, value })
}

/// One row of the per-run summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub lambda_sync: f64,
    pub lambda_track: f64,
    pub r2_sync: f64,
    pub r2_track: f64,
    pub max_residual: f64,
    pub final_sync_err: f64,
    pub final_track_err: f64,
}

/// Summary metrics of a run.
///
/// Sync error combines the groups' internal errors in quadrature and the
/// tracking error is the worst robot. Rates use the default fit window and
/// are NaN when no fit is possible. The contraction residual is reported for
/// exact-model tracking-sync groups without disturbances, NaN otherwise.
pub fn summarize(run_id: &str, log: &TrajectoryLog, scenario: &Scenario, disturbed: bool) -> Result<SummaryRow> {
    let per_group = (0..log.groups.len())
        .filter(|&g| log.groups[g].robots.len() >= 2)
        .map(|g| group_sync_error(log, g))
        .collect::<Result<Vec<_>>>()?;
    let sync = ErrorSeries {
        t: log.t.clone(),
        value: (0..log.len())
            .map(|k| per_group.iter().map(|s| s.value[k].powi(2)).sum::<f64>().sqrt())
            .collect(),
    };
    let track = max_tracking_error(log, 0..log.robots.len());
    let sync_fit = fit_rate(&sync, FitWindow::Default).ok();
    let track_fit = fit_rate(&track, FitWindow::Default).ok();
    let mut max_residual = f64::NAN;
    if !disturbed {
        for (g, group) in scenario.groups.iter().enumerate() {
            if group.law == Law::TrackingSync {
                let r = contraction_residual(log, scenario, g, 1e-8)?.max_relative();
                max_residual = if max_residual.is_nan() { r } else { max_residual.max(r) };
            }
        }
    }
    Ok(SummaryRow {
        run_id: run_id.to_string(),
        lambda_sync: sync_fit.as_ref().map_or(f64::NAN, |f| f.lambda),
        lambda_track: track_fit.as_ref().map_or(f64::NAN, |f| f.lambda),
        r2_sync: sync_fit.as_ref().map_or(f64::NAN, |f| f.r_squared),
        r2_track: track_fit.as_ref().map_or(f64::NAN, |f| f.r_squared),
        max_residual,
        final_sync_err: sync.last(),
        final_track_err: track.last(),
    })
}

/// Writes summary rows with the header
/// `run_id,lambda_sync,lambda_track,r2_sync,r2_track,max_residual,final_sync_err,final_track_err`.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "lambda_sync",
            "lambda_track",
            "r2_sync",
            "r2_track",
            "max_residual",
            "final_sync_err",
            "final_track_err",
        ])?;
    }
    w.flush()?;
    Ok(())
}
