//! Grid sweeps of the QND budget and constrained maximization of SNR^(0).
//!
//! Grid points are flattened in row-major order (first axis slowest). The
//! best point is the highest SNR among points whose validity flags all hold;
//! ties go to the lowest flattened index.

use rayon::prelude::*;
use serde::Serialize;

use crate::cavity::golden_max;
use crate::error::{Error, Result};
use crate::params::{ExperimentParams, ParamName};
use crate::qnd::{jump_budget, QndBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Scale> {
        match s {
            "lin" | "linear" => Some(Scale::Linear),
            "log" | "logarithmic" => Some(Scale::Log),
            _ => None,
        }
    }
}

/// A parameter co-set with an axis: it moves between its own endpoints with
/// the same fractional position as the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkedParam {
    pub param: ParamName,
    pub min: f64,
    pub max: f64,
    pub scale: Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    pub param: ParamName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: Scale,
    pub linked: Vec<LinkedParam>,
}

fn check_range(param: ParamName, min: f64, max: f64, scale: Scale) -> Result<()> {
    let key = param.key();
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(Error::Domain(format!(
            "{key}: need finite min < max, got [{min}, {max}]"
        )));
    }
    if scale == Scale::Log && min <= 0.0 {
        return Err(Error::Domain(format!("{key}: logarithmic axis needs min > 0")));
    }
    Ok(())
}

fn interpolate(min: f64, max: f64, scale: Scale, u: f64) -> f64 {
    if u <= 0.0 {
        return min;
    }
    if u >= 1.0 {
        return max;
    }
    match scale {
        Scale::Linear => min + u * (max - min),
        Scale::Log => (min.ln() + u * (max.ln() - min.ln())).exp(),
    }
}

impl SweepAxis {
    pub fn new(param: ParamName, min: f64, max: f64, count: usize, scale: Scale) -> Result<Self> {
        check_range(param, min, max, scale)?;
        if count < 2 {
            return Err(Error::Domain(format!(
                "{}: axis needs at least 2 points",
                param.key()
            )));
        }
        Ok(SweepAxis {
            param,
            min,
            max,
            count,
            scale,
            linked: Vec::new(),
        })
    }

    pub fn with_link(mut self, param: ParamName, min: f64, max: f64, scale: Scale) -> Result<Self> {
        // a linked parameter may run in either direction
        let (lo, hi) = if min <= max { (min, max) } else { (max, min) };
        if lo != hi {
            check_range(param, lo, hi, scale)?;
        }
        self.linked.push(LinkedParam {
            param,
            min,
            max,
            scale,
        });
        Ok(self)
    }

    /// Fractional position of grid index `i`.
    pub fn u_at(&self, i: usize) -> f64 {
        i as f64 / (self.count - 1) as f64
    }

    pub fn value_at(&self, u: f64) -> f64 {
        interpolate(self.min, self.max, self.scale, u)
    }

    pub fn grid_values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value_at(self.u_at(i))).collect()
    }

    /// Sets the axis parameter and every linked parameter for position `u`.
    pub fn apply(&self, p: &mut ExperimentParams, u: f64) {
        p.set(self.param, self.value_at(u));
        for l in &self.linked {
            let v = if l.min <= l.max {
                interpolate(l.min, l.max, l.scale, u)
            } else {
                interpolate(l.max, l.min, l.scale, 1.0 - u)
            };
            p.set(l.param, v);
        }
    }

    fn params(&self) -> impl Iterator<Item = ParamName> + '_ {
        std::iter::once(self.param).chain(self.linked.iter().map(|l| l.param))
    }
}

fn check_axes(axes: &[SweepAxis]) -> Result<()> {
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::Unsupported(format!(
            "sweeps take 1 to 3 axes, got {}",
            axes.len()
        )));
    }
    let mut seen: Vec<ParamName> = Vec::new();
    for p in axes.iter().flat_map(SweepAxis::params) {
        if seen.contains(&p) {
            return Err(Error::Domain(format!(
                "parameter {} appears on more than one axis",
                p.key()
            )));
        }
        seen.push(p);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Grid index along each axis.
    pub index: Vec<usize>,
    pub params: ExperimentParams,
    pub budget: Option<QndBudget>,
    /// Why the budget could not be evaluated.
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn feasible(&self) -> bool {
        self.budget.is_some_and(|b| b.flags.all() && b.snr.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub points: Vec<SweepPoint>,
    /// Flattened index of the best feasible point.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_point(&self) -> Option<&SweepPoint> {
        self.best.map(|i| &self.points[i])
    }
}

fn unflatten(mut flat: usize, axes: &[SweepAxis]) -> Vec<usize> {
    let mut idx = vec![0; axes.len()];
    for (k, axis) in axes.iter().enumerate().rev() {
        idx[k] = flat % axis.count;
        flat /= axis.count;
    }
    idx
}

fn evaluate(
    base: &ExperimentParams,
    axes: &[SweepAxis],
    u: &[f64],
) -> (ExperimentParams, std::result::Result<QndBudget, String>) {
    let mut p = *base;
    for (axis, u) in axes.iter().zip(u) {
        axis.apply(&mut p, *u);
    }
    let outcome = jump_budget(&p).map_err(|e| e.to_string());
    (p, outcome)
}

fn feasible_snr(outcome: &std::result::Result<QndBudget, String>) -> Option<f64> {
    match outcome {
        Ok(b) if b.flags.all() && b.snr.is_finite() => Some(b.snr),
        _ => None,
    }
}

/// Evaluates the budget on the full grid. Points where it cannot be
/// evaluated are kept as failures.
pub fn grid_sweep(base: &ExperimentParams, axes: &[SweepAxis]) -> Result<SweepResult> {
    check_axes(axes)?;
    let total: usize = axes.iter().map(|a| a.count).product();
    let points: Vec<SweepPoint> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let index = unflatten(flat, axes);
            let u: Vec<f64> = axes.iter().zip(&index).map(|(a, i)| a.u_at(*i)).collect();
            let (params, outcome) = evaluate(base, axes, &u);
            let (budget, error) = match outcome {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e)),
            };
            SweepPoint {
                index,
                params,
                budget,
                error,
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, pt) in points.iter().enumerate() {
        if let Some(snr) = pt.budget.filter(|_| pt.feasible()).map(|b| b.snr) {
            if best.is_none_or(|(_, s)| snr > s) {
                best = Some((i, snr));
            }
        }
    }
    Ok(SweepResult {
        axes: axes.to_vec(),
        points,
        best: best.map(|b| b.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub params: ExperimentParams,
    pub budget: QndBudget,
    /// Fractional position along each axis.
    pub position: Vec<f64>,
    /// SNR of the best coarse-grid point the refinement started from.
    pub coarse_snr: f64,
}

/// Coarse grid, then `refine_iters` rounds of coordinate-wise golden-section
/// search within one grid cell of the incumbent. A move is only taken when
/// it strictly improves a feasible SNR, so the result is never worse than
/// the best grid point.
pub fn maximize_snr(base: &ExperimentParams, axes: &[SweepAxis], refine_iters: usize) -> Result<Optimum> {
    let grid = grid_sweep(base, axes)?;
    let best = grid
        .best_point()
        .ok_or_else(|| Error::Infeasible("no grid point satisfies every validity flag".into()))?;
    let mut u: Vec<f64> = axes.iter().zip(&best.index).map(|(a, i)| a.u_at(*i)).collect();
    let coarse_snr = best.budget.expect("feasible point has a budget").snr;
    let mut current = coarse_snr;
    for _ in 0..refine_iters {
        let mut moved = false;
        for (d, axis) in axes.iter().enumerate() {
            let h = 1.0 / (axis.count - 1) as f64;
            let lo = (u[d] - h).max(0.0);
            let hi = (u[d] + h).min(1.0);
            let objective = |x: f64| {
                let mut trial = u.clone();
                trial[d] = x;
                feasible_snr(&evaluate(base, axes, &trial).1).unwrap_or(f64::NEG_INFINITY)
            };
            let x = golden_max(objective, lo, hi);
            let val = objective(x);
            // the bracket ends are never probed by golden section
            let ends = [(lo, objective(lo)), (hi, objective(hi))];
            let (x, val) = ends
                .into_iter()
                .fold((x, val), |acc, e| if e.1 > acc.1 { e } else { acc });
            if val > current {
                u[d] = x;
                current = val;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let (params, outcome) = evaluate(base, axes, &u);
    let budget = outcome.map_err(Error::Estimation)?;
    Ok(Optimum {
        params,
        budget,
        position: u,
        coarse_snr,
    })
}
