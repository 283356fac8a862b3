//! Displacement power spectral density of a thermally driven damped
//! oscillator, effective-temperature estimators and the ratio of
//! radiation-pressure to thermal force noise.
//!
//! PSDs are one-sided and per hertz of ordinary frequency `ν`, evaluated at
//! angular frequency `ω = 2πν`:
//!
//! `S_x(ω) = (4·k_B·T_eff·γ/m) / ((ω_eff² − ω²)² + γ²ω²)`
//!
//! which integrates over `ν ∈ [0, ∞)` to `k_B·T_eff/(m·ω_eff²)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, FitError, LmOptions};
use crate::mechanics::OscillatorParams;
use crate::params::{ExperimentParams, C, HBAR, K_B};

pub fn psd_model(omega: f64, mass: f64, t_eff: f64, omega_eff: f64, gamma_eff: f64) -> f64 {
    let detune = omega_eff * omega_eff - omega * omega;
    4.0 * K_B * t_eff * gamma_eff / mass / (detune * detune + gamma_eff * gamma_eff * omega * omega)
}

/// Frequency grid (Hz) for sampling a resonance at `f0` with full width
/// `fwhm`: geometric spacing in `|f − f0|` from `fwhm/1000` out to `f0` below
/// the peak and `9·f0` above it, `n_side` points per side.
pub fn resonance_grid(f0: f64, fwhm: f64, n_side: usize) -> Vec<f64> {
    let n_side = n_side.max(2);
    let d_min = (fwhm * 1e-3).min(f0 * 1e-3);
    let geometric = |d_max: f64| -> Vec<f64> {
        let ratio = (d_max / d_min).powf(1.0 / (n_side - 1) as f64);
        (0..n_side).map(|k| d_min * ratio.powi(k as i32)).collect()
    };
    let mut grid: Vec<f64> = geometric(f0).iter().rev().map(|d| (f0 - d).max(0.0)).collect();
    grid.push(f0);
    grid.extend(geometric(9.0 * f0).iter().map(|d| f0 + d));
    grid.dedup();
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdFit {
    pub omega_eff: f64,
    pub gamma_eff: f64,
    pub q_eff: f64,
    pub t_eff_area: f64,
    pub t_eff_q: f64,
    pub floor: f64,
    /// RMS of the log residuals `ln(model) − ln(data)`.
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdTrace {
    /// Hz
    pub freq_samples: Vec<f64>,
    /// m²/Hz, one-sided
    pub psd: Vec<f64>,
    /// m²/Hz
    pub noise_floor: f64,
    pub fit: Option<PsdFit>,
}

impl PsdTrace {
    pub fn new(freq_samples: Vec<f64>, psd: Vec<f64>, noise_floor: f64) -> Result<Self> {
        if freq_samples.len() != psd.len() {
            return Err(Error::Domain("frequency and PSD columns differ in length".into()));
        }
        if psd.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("PSD samples must be finite and >= 0".into()));
        }
        if freq_samples.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("frequencies must be strictly increasing".into()));
        }
        Ok(PsdTrace {
            freq_samples,
            psd,
            noise_floor,
            fit: None,
        })
    }

    /// Synthetic trace from [`psd_model`] plus a constant floor.
    pub fn synthetic(
        freq_samples: Vec<f64>,
        mass: f64,
        t_eff: f64,
        omega_eff: f64,
        gamma_eff: f64,
        floor: f64,
    ) -> Self {
        let psd = freq_samples
            .iter()
            .map(|f| psd_model(2.0 * PI * f, mass, t_eff, omega_eff, gamma_eff) + floor)
            .collect();
        PsdTrace {
            freq_samples,
            psd,
            noise_floor: floor,
            fit: None,
        }
    }
}

/// `T_eff = m·ω_m²·∫(S_x − floor)dν / k_B` by trapezoidal integration.
pub fn teff_from_area(trace: &PsdTrace, mass: f64, omega_m: f64) -> Result<f64> {
    if trace.freq_samples.len() < 2 {
        return Err(Error::Estimation("need at least two PSD samples".into()));
    }
    if let Some(fit) = &trace.fit {
        let span = trace.freq_samples[trace.freq_samples.len() - 1] - trace.freq_samples[0];
        let linewidth_hz = fit.gamma_eff / (2.0 * PI);
        if span < 10.0 * linewidth_hz {
            return Err(Error::Estimation(format!(
                "trace spans {span} Hz, less than 10 linewidths ({linewidth_hz} Hz each)"
            )));
        }
    }
    let area: f64 = trace
        .freq_samples
        .windows(2)
        .zip(trace.psd.windows(2))
        .map(|(f, s)| 0.5 * (f[1] - f[0]) * (s[0] + s[1] - 2.0 * trace.noise_floor))
        .sum();
    if !(area > 0.0) {
        return Err(Error::Estimation(format!(
            "non-positive displacement variance {area} after floor subtraction"
        )));
    }
    Ok(mass * omega_m * omega_m * area / K_B)
}

/// `T_eff = T·Q_eff/Q`.
pub fn teff_from_q(t_bath: f64, q_eff: f64, q: f64) -> f64 {
    t_bath * q_eff / q
}

/// Physical context needed to turn a fitted PSD into temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFitConfig {
    pub oscillator: OscillatorParams,
    /// Bath temperature, K.
    pub t_bath: f64,
    /// Frequency bands `[lo, hi]` (Hz) excluded from the fit.
    pub masks: Vec<(f64, f64)>,
}

const MIN_PSD_SAMPLES: usize = 50;

/// Least-squares fit of [`psd_model`] plus a constant floor over
/// (amplitude, ω_eff, γ_eff, floor). Residuals are logarithmic, which
/// matches multiplicative measurement noise; samples with zero PSD and
/// masked samples are excluded.
pub fn fit_psd(freq_hz: &[f64], psd: &[f64], cfg: &PsdFitConfig) -> Result<PsdTrace> {
    let mut trace = PsdTrace::new(freq_hz.to_vec(), psd.to_vec(), 0.0)?;
    let used: Vec<(f64, f64)> = freq_hz
        .iter()
        .zip(psd)
        .filter(|(f, s)| **s > 0.0 && !cfg.masks.iter().any(|(lo, hi)| **f >= *lo && **f <= *hi))
        .map(|(f, s)| (*f, *s))
        .collect();
    if used.len() < MIN_PSD_SAMPLES {
        return Err(FitError::TooFewSamples {
            needed: MIN_PSD_SAMPLES,
            got: used.len(),
        }
        .into());
    }

    // starting values from the peak, the low quantiles and the half-maximum width
    let (i_peak, &(f_peak, s_max)) = used
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    if f_peak <= 0.0 {
        return Err(FitError::Degenerate("PSD maximum at zero frequency".into()).into());
    }
    let mut sorted: Vec<f64> = used.iter().map(|u| u.1).collect();
    sorted.sort_by(f64::total_cmp);
    let floor0 = sorted[sorted.len() / 20];
    let half = floor0 + 0.5 * (s_max - floor0);
    let left = used[..i_peak].iter().rev().find(|u| u.1 < half).map(|u| u.0);
    let right = used[i_peak..].iter().find(|u| u.1 < half).map(|u| u.0);
    let omega_ref = 2.0 * PI * f_peak;
    let g0 = match (left, right) {
        (Some(l), Some(r)) => 2.0 * PI * (r - l) / omega_ref,
        (Some(l), None) => 4.0 * PI * (f_peak - l) / omega_ref,
        (None, Some(r)) => 4.0 * PI * (r - f_peak) / omega_ref,
        (None, None) => 0.1,
    }
    .max(1e-9);
    let peak_norm = ((s_max - floor0) / s_max).max(1e-3);
    let c0 = peak_norm * g0 * g0;

    let u: Vec<f64> = used.iter().map(|(f, _)| 2.0 * PI * f / omega_ref).collect();
    let log_data: Vec<f64> = used.iter().map(|(_, s)| (s / s_max).ln()).collect();
    let model = |p: &[f64], x: f64| -> f64 {
        let (c, w, g, fl) = (p[0].exp(), p[1], p[2].exp(), p[3]);
        let d = w * w - x * x;
        c / (d * d + g * g * x * x) + fl
    };
    let resid = |p: &[f64]| -> Option<Vec<f64>> {
        if !(p[1] > 0.0) {
            return None;
        }
        u.iter()
            .zip(&log_data)
            .map(|(&x, &ld)| {
                let m = model(p, x);
                (m > 0.0).then(|| m.ln() - ld)
            })
            .collect()
    };
    let p0 = [c0.ln(), 1.0, g0.ln(), floor0 / s_max];
    let opts = LmOptions {
        max_iter: 2000,
        ..LmOptions::default()
    };
    let sol = levenberg_marquardt(resid, &p0, opts)?;

    let omega_eff = sol.params[1] * omega_ref;
    let gamma_eff = sol.params[2].exp() * omega_ref;
    let floor = sol.params[3] * s_max;
    if !(gamma_eff > 0.0 && gamma_eff.is_finite()) {
        return Err(FitError::NonPhysical {
            name: "gamma_eff",
            value: gamma_eff,
        }
        .into());
    }
    if !(omega_eff > 0.0 && omega_eff.is_finite()) {
        return Err(FitError::NonPhysical {
            name: "omega_eff",
            value: omega_eff,
        }
        .into());
    }
    let q_eff = omega_eff / gamma_eff;
    trace.noise_floor = floor;
    trace.fit = Some(PsdFit {
        omega_eff,
        gamma_eff,
        q_eff,
        t_eff_area: 0.0,
        t_eff_q: teff_from_q(cfg.t_bath, q_eff, cfg.oscillator.q),
        floor,
        residual_rms: (sol.cost / u.len() as f64).sqrt(),
    });
    let t_area = teff_from_area(&trace, cfg.oscillator.mass, cfg.oscillator.omega_m)?;
    if let Some(fit) = trace.fit.as_mut() {
        fit.t_eff_area = t_area;
    }
    Ok(trace)
}

/// `R = S_F^(γ)/S_F^(T) = 16ħ·P_in·Q·F²/(λ·c·π·k_B·T·m·ω_m)`.
pub fn shot_thermal_ratio(p: &ExperimentParams) -> f64 {
    16.0 * HBAR * p.input_power * p.q * p.finesse * p.finesse
        / (p.wavelength * C * PI * K_B * p.temperature * p.mass * p.omega_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    const M: f64 = 4e-11;
    const W: f64 = 2.0 * PI * 1.34e5;

    fn trapz(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2)
            .zip(y.windows(2))
            .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
            .sum()
    }

    #[test]
    fn psd_normalization_by_quadrature() {
        for q in [10.0, 300.0, 1e5] {
            let g = W / q;
            let f = resonance_grid(W / (2.0 * PI), g / (2.0 * PI), 20_000);
            let s: Vec<f64> = f.iter().map(|f| psd_model(2.0 * PI * f, M, 2.0, W, g)).collect();
            let area = trapz(&f, &s);
            assert!(rel(area, K_B * 2.0 / (M * W * W)) < 1e-4, "Q={q}: {area}");
        }
    }

    #[test]
    fn peak_and_width() {
        let g = W / 1e4;
        let n = 200_001;
        let (lo, hi) = (W - 20.0 * g, W + 20.0 * g);
        let omegas: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let vals: Vec<f64> = omegas.iter().map(|w| psd_model(*w, M, 1.0, W, g)).collect();
        let (imax, vmax) = vals
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        assert!(rel(omegas[imax], W) < 1e-6);
        let above: Vec<f64> = omegas
            .iter()
            .zip(&vals)
            .filter(|(_, v)| **v >= vmax / 2.0)
            .map(|(w, _)| *w)
            .collect();
        let fwhm = above[above.len() - 1] - above[0];
        assert!(rel(fwhm, g) < 0.01, "{fwhm} vs {g}");
    }

    #[test]
    fn area_estimator_round_trip() {
        for (t, q) in [(300.0, 10.0), (6.82e-3, 25.5), (1.0, 1e3), (0.3, 1e6)] {
            let g = W / q;
            let f = resonance_grid(W / (2.0 * PI), g / (2.0 * PI), 6000);
            let trace = PsdTrace::synthetic(f, M, t, W, g, 1e-30);
            let est = teff_from_area(&trace, M, W).unwrap();
            assert!(rel(est, t) < 0.01, "T={t} Q={q}: {est}");
        }
    }

    #[test]
    fn floor_only_trace_is_error() {
        let f: Vec<f64> = (1..200).map(f64::from).collect();
        let trace = PsdTrace {
            psd: vec![1e-20; f.len()],
            freq_samples: f,
            noise_floor: 1e-20,
            fit: None,
        };
        assert!(matches!(teff_from_area(&trace, M, W), Err(Error::Estimation(_))));
    }

    #[test]
    fn q_estimator() {
        assert_eq!(teff_from_q(294.0, 1.1e6, 1.1e6), 294.0);
        let q_eff: f64 = 6.82e-3 * 1.1e6 / 294.0;
        assert!((q_eff - 25.5).abs() < 0.02);
        let t = teff_from_q(294.0, q_eff, 1.1e6);
        assert!(rel(t, 6.82e-3) < 1e-12);
        assert!(rel(294.0 / t, 4.4e4) < 0.05);
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let q_eff = 200.0;
        let g = W / q_eff;
        let f = resonance_grid(W / (2.0 * PI), g / (2.0 * PI), 150);
        let floor = 1e-4 * psd_model(W, M, 0.5, W, g);
        let synth = PsdTrace::synthetic(f, M, 0.5, W, g, floor);
        let cfg = PsdFitConfig {
            oscillator: OscillatorParams::new(M, W, 1.1e6).unwrap(),
            t_bath: 294.0,
            masks: vec![],
        };
        let fitted = fit_psd(&synth.freq_samples, &synth.psd, &cfg).unwrap();
        let fit = fitted.fit.unwrap();
        assert!(rel(fit.omega_eff, W) < 1e-6);
        assert!(rel(fit.gamma_eff, g) < 1e-6);
        assert!(rel(fit.floor, floor) < 1e-6);
        assert!(rel(fit.q_eff, q_eff) < 1e-6);
        assert!(rel(fit.t_eff_q, 294.0 * q_eff / 1.1e6) < 1e-6);
    }

    #[test]
    fn empty_mask_is_identity() {
        let g = W / 50.0;
        let f = resonance_grid(W / (2.0 * PI), g / (2.0 * PI), 100);
        let floor = 1e-4 * psd_model(W, M, 1.0, W, g);
        let mut synth = PsdTrace::synthetic(f, M, 1.0, W, g, floor);
        // corrupt a band, then mask it
        let bad = (10.0e3, 30.0e3);
        for (f, s) in synth.freq_samples.iter().zip(synth.psd.iter_mut()) {
            if *f >= bad.0 && *f <= bad.1 {
                *s *= 50.0;
            }
        }
        let osc = OscillatorParams::new(M, W, 1.1e6).unwrap();
        let masked = PsdFitConfig {
            oscillator: osc,
            t_bath: 294.0,
            masks: vec![bad],
        };
        let fit = fit_psd(&synth.freq_samples, &synth.psd, &masked)
            .unwrap()
            .fit
            .unwrap();
        assert!(rel(fit.gamma_eff, g) < 1e-6);
        let nothing = PsdFitConfig {
            masks: vec![(1e9, 2e9)],
            ..masked.clone()
        };
        let none = PsdFitConfig {
            masks: vec![],
            ..masked
        };
        let a = fit_psd(&synth.freq_samples, &synth.psd, &nothing)
            .unwrap()
            .fit
            .unwrap();
        let b = fit_psd(&synth.freq_samples, &synth.psd, &none)
            .unwrap()
            .fit
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_needs_samples() {
        let osc = OscillatorParams::new(M, W, 1.1e6).unwrap();
        let cfg = PsdFitConfig {
            oscillator: osc,
            t_bath: 294.0,
            masks: vec![],
        };
        let f: Vec<f64> = (1..20).map(|i| i as f64 * 1e4).collect();
        let s: Vec<f64> = f
            .iter()
            .map(|f| psd_model(2.0 * PI * f, M, 1.0, W, W / 10.0))
            .collect();
        assert!(matches!(
            fit_psd(&f, &s, &cfg),
            Err(Error::Fit(FitError::TooFewSamples { .. }))
        ));
    }

    #[test]
    fn figure_of_merit() {
        let p = ExperimentParams::reference_set_1();
        let r = shot_thermal_ratio(&p);
        assert!(rel(r, 2.795e8) < 1e-3, "{r}");
        let mut q = p;
        q.input_power *= 2.0;
        assert!(rel(shot_thermal_ratio(&q), 2.0 * r) < 1e-14);
        let mut q = p;
        q.temperature *= 2.0;
        assert!(rel(shot_thermal_ratio(&q), r / 2.0) < 1e-14);
        let mut q = p;
        q.mass *= 2.0;
        assert!(rel(shot_thermal_ratio(&q), r / 2.0) < 1e-14);
        let mut q = p;
        q.finesse *= 2.0;
        assert!(rel(shot_thermal_ratio(&q), r * 4.0) < 1e-14);
    }
}
