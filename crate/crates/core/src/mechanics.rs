//! Membrane oscillator characterization.
//!
//! Q and ringdown time use the amplitude-decay convention `Q = ω_m·τ/2`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::fit::fit_exponential_decay;
use crate::params::{HBAR, K_B};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorParams {
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega_m: f64,
    pub q: f64,
}

impl OscillatorParams {
    pub fn new(mass: f64, omega_m: f64, q: f64) -> Result<Self> {
        for (name, v) in [("m", mass), ("omega_m", omega_m), ("Q", q)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(OscillatorParams { mass, omega_m, q })
    }
}

/// Zero-point amplitude `x_m = √(ħ/(2mω_m))`, m.
pub fn zero_point_amplitude(mass: f64, omega_m: f64) -> f64 {
    (HBAR / (2.0 * mass * omega_m)).sqrt()
}

/// Below this occupation the classical-bath approximation `k_BT ≫ ħω_m` is
/// flagged as violated.
pub const CLASSICAL_OCCUPATION_MIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalOccupation {
    pub n_bar: f64,
    pub classical_limit_ok: bool,
}

/// Mean bath phonon number in the classical limit, `n̄ = k_BT/(ħω_m)`.
pub fn thermal_occupation(temperature: f64, omega_m: f64) -> ThermalOccupation {
    let n_bar = K_B * temperature / (HBAR * omega_m);
    ThermalOccupation {
        n_bar,
        classical_limit_ok: n_bar >= CLASSICAL_OCCUPATION_MIN,
    }
}

/// `k = m·ω_m²`, N/m.
pub fn spring_constant(mass: f64, omega_m: f64) -> f64 {
    mass * omega_m * omega_m
}

/// `Q = ω_m·τ/2` for an amplitude ringdown time `tau`.
pub fn q_from_ringdown(tau: f64, omega_m: f64) -> f64 {
    omega_m * tau / 2.0
}

/// Inverse of [`q_from_ringdown`]: `τ = 2Q/ω_m`.
pub fn ringdown_from_q(q: f64, omega_m: f64) -> f64 {
    2.0 * q / omega_m
}

/// Amplitude ringdown time from envelope samples `(t, amplitude)`, fitted as
/// `A·exp(−t/τ)` (no offset).
pub fn fit_mech_ringdown(t: &[f64], amplitude: &[f64]) -> Result<MechRingdown> {
    let fit = fit_exponential_decay(t, amplitude, false)?;
    Ok(MechRingdown {
        tau: fit.tau,
        amplitude: fit.amplitude,
        residual_rms: fit.residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechRingdown {
    pub tau: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}
