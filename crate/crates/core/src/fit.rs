//! Small nonlinear least-squares toolkit: a Levenberg-Marquardt solver with a
//! central-difference Jacobian, and the exponential-decay fit shared by the
//! optical and mechanical ringdown analyses.
//!
//! Callers are expected to pass parameters normalized to order unity; the
//! finite-difference step is absolute for `|p| < 1`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("fit did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("fitted {name} is non-physical ({value})")]
    NonPhysical { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative cost change below which the solver stops.
    pub cost_tol: f64,
    /// Relative parameter change below which the solver stops.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 500,
            cost_tol: 1e-15,
            step_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(residuals: &F, p: &[f64], r0: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        let plus = residuals(&q);
        q[j] = p[j] - h;
        let minus = residuals(&q);
        q[j] = p[j];
        match (plus, minus) {
            (Some(a), Some(b)) => {
                for i in 0..m {
                    jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
                }
            }
            // one-sided difference at a domain boundary
            (Some(a), None) => {
                for i in 0..m {
                    jac[(i, j)] = (a[i] - r0[i]) / h;
                }
            }
            (None, Some(b)) => {
                for i in 0..m {
                    jac[(i, j)] = (r0[i] - b[i]) / h;
                }
            }
            (None, None) => return None,
        }
    }
    Some(jac)
}

/// Minimizes `sum(residuals(p)^2)`. The closure returns `None` when `p` lies
/// outside the model's domain; such trial steps are rejected.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], opts: LmOptions) -> Result<LmSolution, FitError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut p = p0.to_vec();
    let mut r =
        residuals(&p).ok_or_else(|| FitError::Degenerate("initial guess outside model domain".into()))?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let mut cost = sum_sq(&r);
    let mut mu = 1e-3;
    let n = p.len();

    for iter in 1..=opts.max_iter {
        let jac =
            jacobian(&residuals, &p, &r).ok_or_else(|| FitError::Degenerate("Jacobian undefined".into()))?;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() <= f64::EPSILON * cost.max(f64::MIN_POSITIVE) {
            return Ok(LmSolution {
                params: p,
                cost,
                iterations: iter,
            });
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                let d = jtj[(k, k)].max(1e-300);
                a[(k, k)] += mu * d;
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let trial_r = match residuals(&trial) {
                Some(tr) if tr.iter().all(|v| v.is_finite()) => tr,
                _ => {
                    mu *= 10.0;
                    continue;
                }
            };
            let trial_cost = sum_sq(&trial_r);
            if trial_cost <= cost {
                let rel_cost = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let rel_step = delta
                    .iter()
                    .zip(&p)
                    .map(|(d, v)| d.abs() / v.abs().max(1.0))
                    .fold(0.0, f64::max);
                p = trial;
                r = trial_r;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel_cost < opts.cost_tol || rel_step < opts.step_tol || cost == 0.0 {
                    return Ok(LmSolution {
                        params: p,
                        cost,
                        iterations: iter,
                    });
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: a minimum to numerical precision.
            return Ok(LmSolution {
                params: p,
                cost,
                iterations: iter,
            });
        }
    }
    Err(FitError::NotConverged(opts.max_iter))
}

/// Result of fitting `y = A·exp(-(t - t_ref)/tau) + B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpDecayFit {
    pub tau: f64,
    /// Amplitude at `t_ref`.
    pub amplitude: f64,
    pub offset: f64,
    /// Time of the first fitted sample.
    pub t_ref: f64,
    pub residual_rms: f64,
}

/// Nonlinear least-squares fit of an exponential decay, optionally with a
/// constant offset. Starting values come from a log-linear regression.
pub fn fit_exponential_decay(t: &[f64], y: &[f64], with_offset: bool) -> Result<ExpDecayFit, FitError> {
    const MIN_SAMPLES: usize = 10;
    if t.len() != y.len() {
        return Err(FitError::Degenerate("time and value lengths differ".into()));
    }
    if t.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: t.len(),
        });
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let t_ref = t.iter().copied().fold(f64::INFINITY, f64::min);
    let span = t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t_ref;
    if span <= 0.0 {
        return Err(FitError::Degenerate("zero time span".into()));
    }
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = y_max.abs().max(y_min.abs());
    if y_max - y_min <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(FitError::Degenerate("constant trace".into()));
    }

    let ts: Vec<f64> = t.iter().map(|v| (v - t_ref) / span).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / scale).collect();

    // log-linear starting point on the samples well above the baseline
    let base = if with_offset { y_min / scale } else { 0.0 };
    let top = y_max / scale - base;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &v) in ts.iter().zip(&ys) {
        let h = v - base;
        if h > 0.05 * top {
            let l = h.ln();
            sx += x;
            sy += l;
            sxx += x * x;
            sxy += x * l;
            cnt += 1.0;
        }
    }
    let denom = cnt * sxx - sx * sx;
    if cnt < 2.0 || denom <= 0.0 {
        return Err(FitError::Degenerate("too few samples above baseline".into()));
    }
    let slope = (cnt * sxy - sx * sy) / denom;
    if slope >= 0.0 {
        return Err(FitError::Degenerate("trace does not decay".into()));
    }
    let intercept = (sy - slope * sx) / cnt;
    let rate0 = -slope;
    let amp0 = intercept.exp();

    let resid = |p: &[f64]| -> Option<Vec<f64>> {
        let (a, k) = (p[0], p[1]);
        let b = if with_offset { p[2] } else { 0.0 };
        if !(k > 0.0) {
            return None;
        }
        Some(
            ts.iter()
                .zip(&ys)
                .map(|(&x, &v)| a * (-k * x).exp() + b - v)
                .collect(),
        )
    };
    let p0 = if with_offset {
        vec![amp0, rate0, base]
    } else {
        vec![amp0, rate0]
    };
    let sol = levenberg_marquardt(resid, &p0, LmOptions::default())?;
    let rate = sol.params[1];
    let tau = span / rate;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(FitError::NonPhysical {
            name: "tau",
            value: tau,
        });
    }
    Ok(ExpDecayFit {
        tau,
        amplitude: sol.params[0] * scale,
        offset: if with_offset { sol.params[2] * scale } else { 0.0 },
        t_ref,
        residual_rms: (sol.cost / ts.len() as f64).sqrt() * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_solves_linear_problem_exactly() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let sol = levenberg_marquardt(
            |p| Some(xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y).collect()),
            &[0.0, 0.0],
            LmOptions::default(),
        )
        .unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-9);
        assert!((sol.params[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn exact_decay_with_offset() {
        let t: Vec<f64> = (0..200).map(|i| 4e-7 + i as f64 * 3e-8).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| 2.5 * (-(t - 4e-7) / 1.145e-6).exp() + 0.1)
            .collect();
        let f = fit_exponential_decay(&t, &y, true).unwrap();
        assert!((f.tau / 1.145e-6 - 1.0).abs() < 1e-9, "{}", f.tau);
        assert!((f.amplitude - 2.5).abs() < 1e-8);
        assert!((f.offset - 0.1).abs() < 1e-8);
    }

    #[test]
    fn rejects_constant_and_short_traces() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let y = vec![1.0; 50];
        assert!(matches!(
            fit_exponential_decay(&t, &y, true),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_exponential_decay(&t[..5], &y[..5], false),
            Err(FitError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn rejects_growth() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| (t / 10.0).exp()).collect();
        assert!(fit_exponential_decay(&t, &y, false).is_err());
    }
}
