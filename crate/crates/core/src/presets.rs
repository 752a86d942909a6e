//! Built-in experiments and the checks `reproduce` runs on them.

use std::fmt;
use std::path::Path;

use crate::analysis::{
    consensus_basis, fit_rate, group_sync_error, max_tracking_error, sync_error, FitWindow,
    SYNC_TOLERANCE,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::simulator::TrajectoryLog;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6a", include_str!("../presets/fig6a.toml")),
    ("fig6b", include_str!("../presets/fig6b.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset '{name}'; available: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ExperimentConfig::from_toml_str(text, Path::new("."))
}

/// Outcome of one pass/fail check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `< 1e-3`.
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("< {limit:e}"),
            passed: value < limit,
        }
    }

    fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("> {limit:e}"),
            passed: value > limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.bound
        )
    }
}

/// Runs the checks that belong to `preset` against a finished run.
pub fn evaluate(preset: &str, log: &TrajectoryLog) -> Result<Vec<Check>> {
    let t_end = log.t_final();
    let mut checks = Vec::new();
    match preset {
        "fig4" => {
            let sync = group_sync_error(log, 0)?;
            let track = max_tracking_error(log, log.groups[0].robots.clone());
            checks.push(Check::below("final sync error", sync.last(), SYNC_TOLERANCE));
            checks.push(Check::below("final tracking error", track.last(), 1e-2));
            let fs = fit_rate(&sync, FitWindow::Default)?;
            let ft = fit_rate(&track, FitWindow::Default)?;
            checks.push(Check::above("lambda_sync - lambda_track", fs.lambda - ft.lambda, 0.0));
            checks.push(Check::above("r2 sync fit", fs.r_squared, 0.95));
            checks.push(Check::above("r2 tracking fit", ft.r_squared, 0.95));
        }
        "fig5" => {
            for (g, group) in log.groups.iter().enumerate() {
                let sync = group_sync_error(log, g)?;
                checks.push(Check::below(format!("{} sync error", group.name), sync.last(), SYNC_TOLERANCE));
                let track = max_tracking_error(log, group.robots.clone());
                checks.push(Check::below(format!("{} tracking error", group.name), track.last(), 1e-2));
            }
            let all = 0..log.robots.len();
            let n = log.robots[0].dof();
            let whole = sync_error(log, all.clone(), &consensus_basis(all.len(), n)?)?;
            checks.push(Check::below("whole-network sync error", whole.last(), SYNC_TOLERANCE));
        }
        "fig6a" | "fig6b" => {
            let robots = log.groups[0].robots.clone();
            let sync = group_sync_error(log, 0)?;
            let track = max_tracking_error(log, robots.clone());
            let a_max = log.robots[robots]
                .iter()
                .flat_map(|r| r.a_hat.iter().map(|a| a.amax()))
                .fold(0.0, f64::max);
            checks.push(Check::below("final sync error", sync.last(), 1e-2));
            checks.push(Check::below("max |a_hat|", a_max, 1e3));
            if preset == "fig6a" {
                checks.push(Check::below("final tracking error", track.last(), 1e-2));
            } else {
                // The error oscillates through zero without decaying, so the
                // floor applies to the peak of each window.
                let floor = (0..)
                    .map(|i| 0.5 * t_end + 5.0 * i as f64)
                    .take_while(|t0| t0 + 5.0 <= t_end + 1e-9)
                    .map(|t0| track.max_over(t0, t0 + 5.0))
                    .fold(f64::INFINITY, f64::min);
                checks.push(Check::above("smallest 5 s peak tracking error, second half", floor, 0.05));
                checks.push(Check::below("max tracking error", track.max_over(0.0, t_end), 1e2));
            }
        }
        other => return Err(Error::Config(format!("no checks defined for preset '{other}'"))),
    }
    Ok(checks)
}
