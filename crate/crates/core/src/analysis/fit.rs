use super::ErrorSeries;
use crate::error::{Error, Result};

/// Value below which a decaying series is treated as having reached its floor.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// `[0.1 t_final, first time the series drops below 1e-6]`.
    Default,
    Range(f64, f64),
}

/// Exponential fit `value ~ exp(-lambda t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub lambda: f64,
    pub r_squared: f64,
    /// Window actually used.
    pub window: (f64, f64),
    /// Reasons the requested window was changed, if any.
    pub adjustments: Vec<String>,
}

/// Least-squares slope of `ln(value)` against `t`; `lambda = -slope`.
///
/// Nonpositive values cut the window short. When the series reaches the
/// floor before `0.1 t_final`, the default window starts at a tenth of the
/// floor time instead.
pub fn fit_rate(series: &ErrorSeries, window: FitWindow) -> Result<RateFit> {
    if series.len() < 3 {
        return Err(Error::Scenario("rate fit needs at least three samples".into()));
    }
    let t_end = *series.t.last().unwrap();
    let mut adjustments = Vec::new();
    let (mut t0, mut t1) = match window {
        FitWindow::Range(a, b) => (a, b),
        FitWindow::Default => {
            let floor_time = series
                .t
                .iter()
                .zip(&series.value)
                .find(|(_, v)| **v < FLOOR)
                .map_or(t_end, |(t, _)| *t);
            let mut t0 = 0.1 * t_end;
            if floor_time <= t0 {
                t0 = 0.1 * floor_time;
                adjustments.push(format!(
                    "series reached {FLOOR:e} at t = {floor_time}; window starts at {t0}"
                ));
            }
            (t0, floor_time)
        }
    };
    if let Some((t, _)) = series
        .t
        .iter()
        .zip(&series.value)
        .find(|(t, v)| **t >= t0 && **t <= t1 && **v <= 0.0)
    {
        adjustments.push(format!("nonpositive value at t = {t}; window ends before it"));
        let cut = *t;
        t1 = series.t.iter().copied().filter(|&x| x < cut).fold(f64::NEG_INFINITY, f64::max);
    }
    let points: Vec<(f64, f64)> = series
        .t
        .iter()
        .zip(&series.value)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::Scenario(format!(
            "rate fit window [{t0}, {t1}] holds fewer than three usable samples"
        )));
    }
    t0 = points[0].0;
    t1 = points[points.len() - 1].0;

    let m = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &points {
        let (dt, dy) = (t - mean_t, y - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty / (stt * syy)).clamp(0.0, 1.0) };
    Ok(RateFit {
        lambda: -slope,
        r_squared,
        window: (t0, t1),
        adjustments,
    })
}
