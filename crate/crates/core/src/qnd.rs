//! Analytic budget for observing a single phonon-number jump out of the
//! mechanical ground state with a quadratically coupled cavity.
//!
//! The probe laser is locked to the cavity (zero detuning) throughout. All
//! closed forms use the high-reflectivity expansion, in which the band
//! curvature at the extremum is `16π²c/(Lλ²√(2(1−r_c)))`.
//!
//! A membrane sitting exactly at the extremum (`x0 = 0`) has no linear
//! coupling; that channel is then absent rather than carrying an infinite
//! lifetime through the arithmetic.

use std::f64::consts::PI;

use serde::Serialize;

use crate::cavity::mode_gap;
use crate::error::{Error, Result};
use crate::mechanics::{thermal_occupation, zero_point_amplitude, CLASSICAL_OCCUPATION_MIN};
use crate::params::{ConfigError, ExperimentParams, C, HBAR};

fn checked(p: &ExperimentParams) -> Result<()> {
    let v = p.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(ConfigError::Invalid(v)))
    }
}

/// `√(2(1−r_c))`, rejecting values that underflow to zero.
fn gap_root(r_c: f64) -> Result<f64> {
    let root = (2.0 * (1.0 - r_c)).sqrt();
    if !(root > 0.0 && root.is_finite()) {
        return Err(Error::Singular(format!("√(2(1−r_c)) vanishes at r_c = {r_c}")));
    }
    Ok(root)
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Singular(format!("{name} is not finite")))
    }
}

/// Band curvature at the extremum in the `r_c → 1` form, rad/s/m².
pub fn curvature(p: &ExperimentParams) -> Result<f64> {
    let root = gap_root(p.r_c)?;
    Ok(16.0 * PI * PI * C / (p.length * p.wavelength * p.wavelength * root))
}

/// Cavity shift per phonon, evaluated as curvature × x_m².
pub fn detuning_per_phonon(p: &ExperimentParams) -> Result<f64> {
    checked(p)?;
    let xm = zero_point_amplitude(p.mass, p.omega_m);
    finite("per-phonon shift", curvature(p)? * xm * xm)
}

/// The same shift written directly in terms of `ħ/(mω_m)`.
pub fn detuning_per_phonon_direct(p: &ExperimentParams) -> Result<f64> {
    checked(p)?;
    let root = gap_root(p.r_c)?;
    finite(
        "per-phonon shift",
        8.0 * PI * PI * C / (p.length * p.wavelength * p.wavelength * root) * HBAR / (p.mass * p.omega_m),
    )
}

/// Cavity energy damping rate `κ = πc/(LF)`.
pub fn cavity_damping(length: f64, finesse: f64) -> f64 {
    PI * C / (length * finesse)
}

/// Shot-noise limited frequency readout of a locked PDH detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutNoise {
    /// rad²/s
    pub s_omega: f64,
    /// rad/s
    pub kappa: f64,
    /// Mean intracavity photon number.
    pub n_bar_photons: f64,
}

impl ReadoutNoise {
    /// `κ/(16N̄)`, the photon-number form of `s_omega`.
    pub fn s_omega_from_photons(&self) -> f64 {
        self.kappa / (16.0 * self.n_bar_photons)
    }
}

pub fn pdh_noise_psd(p: &ExperimentParams) -> Result<ReadoutNoise> {
    checked(p)?;
    let kappa = cavity_damping(p.length, p.finesse);
    let s_omega = PI.powi(3) * HBAR * C.powi(3)
        / (16.0 * p.finesse * p.finesse * p.length * p.length * p.wavelength * p.input_power);
    let n_bar_photons = p.input_power * p.wavelength / (PI * HBAR * C * kappa);
    Ok(ReadoutNoise {
        s_omega,
        kappa,
        n_bar_photons,
    })
}

/// Intracavity photon-number noise spectrum
/// `S_NN(ω) = N̄κ/((ω+Δ)² + (κ/2)²)`, photons²·s.
pub fn photon_psd(omega: f64, detuning: f64, kappa: f64, n_bar_photons: f64) -> f64 {
    let w = omega + detuning;
    n_bar_photons * kappa / (w * w + 0.25 * kappa * kappa)
}

/// Lifetime of phonon state `n` against thermal transitions,
/// `Q/(ω_m(n(n̄+1) + n̄(n+1)))`.
pub fn thermal_lifetime(n: u64, p: &ExperimentParams) -> Result<f64> {
    checked(p)?;
    let nb = thermal_occupation(p.temperature, p.omega_m).n_bar;
    let n = n as f64;
    finite(
        "thermal lifetime",
        p.q / (p.omega_m * (n * (nb + 1.0) + nb * (n + 1.0))),
    )
}

/// Lifetime of the ground state against the counter-rotating 0→2 process,
/// closed form.
pub fn rwa_lifetime(p: &ExperimentParams) -> Result<f64> {
    checked(p)?;
    let kappa = cavity_damping(p.length, p.finesse);
    let xm = zero_point_amplitude(p.mass, p.omega_m);
    let w = p.omega_m;
    finite(
        "RWA lifetime",
        p.wavelength.powi(3)
            * p.length
            * p.length
            * (1.0 - p.r_c)
            * p.mass
            * w
            * (w * w + kappa * kappa / 16.0)
            / (8.0 * PI.powi(3) * xm * xm * C * p.input_power),
    )
}

/// The 0→2 rate `½(Δω)²·S_NN(−2ω_m)`.
pub fn rwa_rate(p: &ExperimentParams) -> Result<f64> {
    let shift = detuning_per_phonon(p)?;
    let noise = pdh_noise_psd(p)?;
    Ok(0.5 * shift * shift * photon_psd(-2.0 * p.omega_m, 0.0, noise.kappa, noise.n_bar_photons))
}

/// Lifetime of the ground state against the 0→1 process driven by the
/// linear coupling at offset `x0`; `None` when `x0 = 0`.
pub fn linear_lifetime(p: &ExperimentParams) -> Result<Option<f64>> {
    checked(p)?;
    if p.x0 == 0.0 {
        return Ok(None);
    }
    let kappa = cavity_damping(p.length, p.finesse);
    let w = p.omega_m;
    let tau = p.mass
        * w
        * p.length
        * p.length
        * p.wavelength.powi(3)
        * (1.0 - p.r_c)
        * (4.0 * w * w + kappa * kappa)
        / (256.0 * PI.powi(3) * p.input_power * C * p.x0 * p.x0);
    finite("linear lifetime", tau).map(Some)
}

/// The 0→1 rate `(ω'·x_m)²·S_NN(−ω_m)` with slope `ω' = curvature·x0`.
pub fn linear_rate(p: &ExperimentParams) -> Result<f64> {
    let slope = curvature(p)? * p.x0;
    let xm = zero_point_amplitude(p.mass, p.omega_m);
    let noise = pdh_noise_psd(p)?;
    let g = slope * xm;
    Ok(g * g * photon_psd(-p.omega_m, 0.0, noise.kappa, noise.n_bar_photons))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QndFlags {
    /// `τ^(0) > 1/ω_m`
    pub qnd_time_ok: bool,
    /// mode gap exceeds `ω_m`
    pub gap_ok: bool,
    /// `n̄ ≫ 1` (at least 10)
    pub classical_bath_ok: bool,
    /// `ω_m > κ`
    pub good_cavity: bool,
}

impl QndFlags {
    pub fn all(&self) -> bool {
        self.qnd_time_ok && self.gap_ok && self.classical_bath_ok && self.good_cavity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QndBudget {
    /// Per-phonon cavity shift, rad/s.
    pub delta_omega: f64,
    /// rad/s
    pub kappa: f64,
    pub n_bar_photons: f64,
    /// Mean bath phonon number.
    pub n_bar_phonons: f64,
    /// rad²/s
    pub s_omega: f64,
    pub tau_thermal: f64,
    pub tau_rwa: f64,
    /// `None`: no linear coupling (`x0 = 0`).
    pub tau_lin: Option<f64>,
    pub tau_total: f64,
    pub snr: f64,
    /// Exact mode gap at the extremum, rad/s.
    pub gap: f64,
    pub flags: QndFlags,
}

pub fn jump_budget(p: &ExperimentParams) -> Result<QndBudget> {
    let delta_omega = detuning_per_phonon(p)?;
    let noise = pdh_noise_psd(p)?;
    let tau_thermal = thermal_lifetime(0, p)?;
    let tau_rwa = rwa_lifetime(p)?;
    let tau_lin = linear_lifetime(p)?;
    let total_rate = 1.0 / tau_thermal + 1.0 / tau_rwa + tau_lin.map_or(0.0, |t| 1.0 / t);
    let tau_total = finite("total lifetime", 1.0 / total_rate)?;
    let snr = delta_omega * delta_omega * tau_total / noise.s_omega;
    let gap = mode_gap(p.r_c, p.length)?.exact;
    let n_bar_phonons = thermal_occupation(p.temperature, p.omega_m).n_bar;
    Ok(QndBudget {
        delta_omega,
        kappa: noise.kappa,
        n_bar_photons: noise.n_bar_photons,
        n_bar_phonons,
        s_omega: noise.s_omega,
        tau_thermal,
        tau_rwa,
        tau_lin,
        tau_total,
        snr,
        gap,
        flags: QndFlags {
            qnd_time_ok: tau_total * p.omega_m > 1.0,
            gap_ok: gap > p.omega_m,
            classical_bath_ok: n_bar_phonons >= CLASSICAL_OCCUPATION_MIN,
            good_cavity: p.omega_m > noise.kappa,
        },
    })
}

/// Both sides of a good-cavity identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// Exact ratio from the budget.
    pub exact: f64,
    /// Good-cavity closed form.
    pub approx: f64,
    /// `(approx − exact)/exact`
    pub residual: f64,
}

impl IdentityCheck {
    fn new(exact: f64, approx: f64) -> Self {
        IdentityCheck {
            exact,
            approx,
            residual: (approx - exact) / exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyRatios {
    /// `τ^(0)/τ_lin` vs `(SNR/16)(x0/x_m)²(κ/ω_m)²`; `None` when `x0 = 0`.
    pub total_to_linear: Option<IdentityCheck>,
    /// `τ_lin/τ_RWA` vs `(1/8)(x_m/x0)²`; `None` when `x0 = 0`.
    pub linear_to_rwa: Option<IdentityCheck>,
    /// Both identities assume `ω_m ≫ κ`.
    pub good_cavity: bool,
}

pub fn consistency_ratios(p: &ExperimentParams) -> Result<ConsistencyRatios> {
    let b = jump_budget(p)?;
    let Some(tau_lin) = b.tau_lin else {
        return Ok(ConsistencyRatios {
            total_to_linear: None,
            linear_to_rwa: None,
            good_cavity: b.flags.good_cavity,
        });
    };
    let xm = zero_point_amplitude(p.mass, p.omega_m);
    let offset = p.x0 / xm;
    let k = b.kappa / p.omega_m;
    Ok(ConsistencyRatios {
        total_to_linear: Some(IdentityCheck::new(
            b.tau_total / tau_lin,
            b.snr / 16.0 * offset * offset * k * k,
        )),
        linear_to_rwa: Some(IdentityCheck::new(tau_lin / b.tau_rwa, 0.125 / (offset * offset))),
        good_cavity: b.flags.good_cavity,
    })
}

/// Signal-to-noise for resolving a jump out of phonon state `n`, counting
/// thermal decay of that state only. Measurement-induced channels are known
/// only for `n = 0` and are not included here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralSnr {
    pub n: u64,
    pub tau_thermal: f64,
    pub snr: f64,
    pub thermal_only: bool,
}

pub fn snr_general_n(n: u64, p: &ExperimentParams) -> Result<GeneralSnr> {
    let shift = detuning_per_phonon(p)?;
    let noise = pdh_noise_psd(p)?;
    let tau = thermal_lifetime(n, p)?;
    Ok(GeneralSnr {
        n,
        tau_thermal: tau,
        snr: shift * shift * tau / noise.s_omega,
        thermal_only: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn row1() -> ExperimentParams {
        ExperimentParams::reference_set_1()
    }

    fn row2() -> ExperimentParams {
        ExperimentParams::reference_set_2()
    }

    #[test]
    fn per_phonon_shift() {
        let d1 = detuning_per_phonon(&row1()).unwrap();
        assert!(rel(d1, 9.37e-2) < 1e-3, "{d1}");
        assert!(rel(detuning_per_phonon_direct(&row1()).unwrap(), d1) < 1e-12);
        let d2 = detuning_per_phonon(&row2()).unwrap();
        assert!(rel(d2, 2.97e-1) < 3e-3, "{d2}");
        assert!(rel(d2 / d1, 10f64.sqrt()) < 1e-9);
        let mut p = row1();
        p.mass *= 2.0;
        assert!(rel(detuning_per_phonon(&p).unwrap(), d1 / 2.0) < 1e-14);
    }

    #[test]
    fn readout_noise() {
        let n = pdh_noise_psd(&row1()).unwrap();
        assert!(rel(n.s_omega, 2.57e-6) < 5e-3);
        assert!(rel(n.kappa, 4.69e4) < 1e-3);
        assert!(rel(n.n_bar_photons, 1.14e9) < 3e-3);
        assert!(rel(n.s_omega_from_photons(), n.s_omega) < 1e-12);
        let mut p = row1();
        p.finesse /= 2.0;
        assert!(rel(pdh_noise_psd(&p).unwrap().s_omega, 4.0 * n.s_omega) < 1e-13);
        let mut p = row1();
        p.input_power *= 2.0;
        assert!(rel(pdh_noise_psd(&p).unwrap().s_omega, n.s_omega / 2.0) < 1e-13);
    }

    #[test]
    fn photon_spectrum() {
        let (k, nb) = (4.7e4, 1.1e9);
        assert!(rel(photon_psd(-300.0, 300.0, k, nb), 4.0 * nb / k) < 1e-15);
        let w = 6.28e5;
        let eq16 = nb * k / (4.0 * w * w + k * k / 4.0);
        assert!(rel(photon_psd(-2.0 * w, 0.0, k, nb), eq16) < 1e-15);
    }

    #[test]
    fn thermal_lifetimes() {
        let t0 = thermal_lifetime(0, &row1()).unwrap();
        assert!(rel(t0, 3.06e-4) < 2e-3, "{t0}");
        let p = row1();
        assert!(rel(t0, p.q * HBAR / (crate::params::K_B * p.temperature)) < 1e-12);
        let t1 = thermal_lifetime(1, &p).unwrap();
        assert!(rel(t1, t0 / 3.0) < 1e-4);
        let mut hot = p;
        hot.temperature *= 2.0;
        assert!(rel(thermal_lifetime(0, &hot).unwrap(), t0 / 2.0) < 1e-12);
    }

    #[test]
    fn rwa_routes_agree() {
        for p in [row1(), row2()] {
            let closed = rwa_lifetime(&p).unwrap();
            assert!(rel(1.0 / rwa_rate(&p).unwrap(), closed) < 1e-9);
        }
        let t = rwa_lifetime(&row1()).unwrap();
        assert!(rel(t, 6.7) < 0.01, "{t}");
        let mut p = row1();
        p.input_power *= 2.0;
        assert!(rel(rwa_lifetime(&p).unwrap(), t / 2.0) < 1e-13);
        let mut p = row1();
        p.r_c = 1.0 - (1.0 - p.r_c) / 10.0;
        assert!(rel(rwa_lifetime(&p).unwrap(), t / 10.0) < 1e-9);
    }

    #[test]
    fn linear_routes_agree() {
        for p in [row1(), row2()] {
            let closed = linear_lifetime(&p).unwrap().unwrap();
            assert!(rel(1.0 / linear_rate(&p).unwrap(), closed) < 1e-9);
        }
        let t = linear_lifetime(&row1()).unwrap().unwrap();
        assert!(rel(t, 5.64e-3) < 1e-3, "{t}");
        let mut p = row1();
        p.x0 = 0.0;
        assert_eq!(linear_lifetime(&p).unwrap(), None);
        let mut p = row1();
        p.x0 *= 4.0;
        assert!(rel(linear_lifetime(&p).unwrap().unwrap(), t / 16.0) < 1e-13);
    }

    #[test]
    fn budget_rows() {
        let b = jump_budget(&row1()).unwrap();
        assert!(rel(b.tau_total, 2.90e-4) < 2e-3, "{}", b.tau_total);
        assert!(rel(b.snr, 0.99) < 5e-3, "{}", b.snr);
        assert!(b.flags.all());
        assert!(rel(b.tau_total * 6.2832e5, 182.0) < 0.01);
        let b2 = jump_budget(&row2()).unwrap();
        assert!(rel(b2.snr, 3.97) < 3e-3, "{}", b2.snr);
        assert!(b2.flags.all());
    }

    #[test]
    fn harmonic_sum_bound() {
        let b = jump_budget(&row1()).unwrap();
        let min = b.tau_thermal.min(b.tau_rwa).min(b.tau_lin.unwrap());
        assert!(b.tau_total <= min);
        let mut p = row1();
        p.x0 = 0.0;
        let b = jump_budget(&p).unwrap();
        assert!(b.tau_lin.is_none());
        assert!(b.tau_total < b.tau_thermal);
    }

    #[test]
    fn consistency_small_at_table_values() {
        let c = consistency_ratios(&row1()).unwrap();
        let r24 = c.total_to_linear.unwrap();
        let r25 = c.linear_to_rwa.unwrap();
        assert!(r24.residual.abs() < 0.01);
        assert!(r25.residual.abs() < 0.01);
        assert!(rel(r25.exact, 8.4e-4) < 0.01);
        let mut p = row1();
        p.x0 = 0.0;
        let c = consistency_ratios(&p).unwrap();
        assert!(c.total_to_linear.is_none() && c.linear_to_rwa.is_none());
    }

    #[test]
    fn consistency_exact_without_cavity_damping() {
        let mut p = row1();
        p.finesse *= 1e5;
        let c = consistency_ratios(&p).unwrap();
        assert!(c.total_to_linear.unwrap().residual.abs() < 1e-9);
        assert!(c.linear_to_rwa.unwrap().residual.abs() < 1e-9);
    }

    #[test]
    fn general_n_snr() {
        let p = row1();
        let s0 = snr_general_n(0, &p).unwrap();
        let b = jump_budget(&p).unwrap();
        let thermal_only = b.delta_omega * b.delta_omega * b.tau_thermal / b.s_omega;
        assert!(rel(s0.snr, thermal_only) < 1e-14);
        let s1 = snr_general_n(1, &p).unwrap();
        assert!(rel(s1.snr, s0.snr / 3.0) < 1e-4);
        let snrs: Vec<f64> = (0..20).map(|n| snr_general_n(n, &p).unwrap().snr).collect();
        assert!(snrs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn invalid_reflectivity_rejected() {
        let mut p = row1();
        p.r_c = 1.0;
        assert!(matches!(jump_budget(&p), Err(Error::Config(_))));
    }
}
