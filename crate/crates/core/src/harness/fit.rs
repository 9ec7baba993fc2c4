//! Least-squares rate fits on convergence histories.

use crate::error::{ApdError, Result};
use crate::solvers::IterationRecord;

/// Gaps at or below this are treated as exhausted precision and end the fit window.
pub const GAP_UNDERFLOW: f64 = 1e-15;
pub const MIN_FIT_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Slope of `log gap` against `log k`.
    PowerLaw,
    /// Slope of `log gap` against `k`.
    Linear,
}

impl FitMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "power" | "power_law" => Some(FitMode::PowerLaw),
            "linear" => Some(FitMode::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits the trailing `window` fraction of `(k, gap)` pairs with `k ≥ 1`.
///
/// The series is cut at the first gap `≤ 1e-15`.
pub fn fit_points(points: &[(f64, f64)], window: f64, mode: FitMode) -> Result<RateFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(ApdError::InvalidInput(format!("fit window must be in (0, 1], got {window}")));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(k, _)| k >= 1.0)
        .take_while(|&(_, g)| g > GAP_UNDERFLOW)
        .collect();
    let take = ((usable.len() as f64) * window).floor() as usize;
    let tail = &usable[usable.len() - take..];
    if tail.len() < MIN_FIT_POINTS || tail.iter().any(|&(_, g)| !g.is_finite()) {
        return Err(ApdError::InvalidInput(format!(
            "rate fit needs {MIN_FIT_POINTS} finite points, window has {}",
            tail.len()
        )));
    }
    let xy: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(k, g)| {
            let x = match mode {
                FitMode::PowerLaw => k.ln(),
                FitMode::Linear => k,
            };
            (x, g.ln() - tail[0].1.ln())
        })
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        r_squared,
        points: xy.len(),
    })
}

/// Fits `obj_gap + feasibility` of a solver run.
pub fn fit_rate(records: &[IterationRecord], window: f64, mode: FitMode) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.k as f64, r.obj_gap + r.feasibility)).collect();
    fit_points(&pts, window, mode)
}
