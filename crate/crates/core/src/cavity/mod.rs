//! Dispersive band structure of a membrane-in-the-middle cavity, thin-film
//! membrane optics, transmission maps and finesse/ringdown relations.
//!
//! The cavity frequency as a function of membrane displacement `x` is
//! `ω(x) = (c/L)·arccos(r_c·cos(4πx/λ))` on the principal branch. Beyond one
//! free spectral range the bands are extended as `(c/L)(2πj ± θ(x))`.

pub mod optics;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fit::fit_exponential_decay;
use crate::params::{MembraneSpec, C};
use optics::TransferMatrix;

/// Angular free spectral range `πc/L`.
pub fn free_spectral_range(length: f64) -> f64 {
    PI * C / length
}

fn check_reflectivity(r_c: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r_c) {
        return Err(domain(format!("r_c must lie in [0, 1), got {r_c}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(domain(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

fn check_geometry(r_c: f64, length: f64, wavelength: f64) -> Result<()> {
    check_reflectivity(r_c)?;
    check_positive("L", length)?;
    check_positive("lambda", wavelength)
}

/// Cavity resonance frequency (rad/s, relative to the mode offset) for a
/// membrane displaced by `x` from the reference position.
pub fn dispersive_detuning(x: f64, r_c: f64, length: f64, wavelength: f64) -> Result<f64> {
    check_geometry(r_c, length, wavelength)?;
    Ok(C / length * (r_c * (4.0 * PI * x / wavelength).cos()).acos())
}

/// Expansion of the lower band about its extremum at `x = 0`, evaluated at
/// the residual offset `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningDerivatives {
    /// ω(0), rad/s.
    pub omega0: f64,
    /// dω/dx at `x0` to lowest order, rad/s/m.
    pub omega1: f64,
    /// d²ω/dx² at the extremum, rad/s/m².
    pub omega2: f64,
    /// Set when `r_c = 0`: the band is flat and there is no quadratic coupling.
    pub no_quadratic_coupling: bool,
}

pub fn detuning_derivatives(x0: f64, r_c: f64, length: f64, wavelength: f64) -> Result<DetuningDerivatives> {
    check_geometry(r_c, length, wavelength)?;
    let root = (1.0 - r_c * r_c).sqrt();
    if !(root > 0.0) {
        return Err(Error::Singular(format!("1 - r_c^2 underflows at r_c = {r_c}")));
    }
    let omega2 = 16.0 * PI * PI * C * r_c / (length * wavelength * wavelength * root);
    Ok(DetuningDerivatives {
        omega0: C * r_c.acos() / length,
        omega1: omega2 * x0,
        omega2,
        no_quadratic_coupling: r_c == 0.0,
    })
}

/// One band `(c/L)(2πj + sign·θ(x))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub j: u32,
    /// +1 or -1.
    pub sign: i8,
    pub omega: Vec<f64>,
}

impl Band {
    /// Column label `band_<j>_<+|->`.
    pub fn label(&self) -> String {
        format!("band_{}_{}", self.j, if self.sign > 0 { '+' } else { '-' })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStructure {
    pub x_samples: Vec<f64>,
    /// Bands in ascending frequency order.
    pub bands: Vec<Band>,
    pub omega_fsr: f64,
}

/// Band label of the `i`-th band in ascending order: (0,+), (1,-), (1,+), (2,-), ...
fn band_label(i: usize) -> (u32, i8) {
    let j = i.div_ceil(2) as u32;
    let sign = if i.is_multiple_of(2) { 1 } else { -1 };
    (j, sign)
}

pub fn band_structure(
    r_c: f64,
    length: f64,
    wavelength: f64,
    x_range: (f64, f64),
    n_samples: usize,
    n_bands: usize,
) -> Result<BandStructure> {
    check_geometry(r_c, length, wavelength)?;
    if n_samples < 2 {
        return Err(domain("band structure needs at least 2 samples"));
    }
    if n_bands < 1 {
        return Err(domain("band structure needs at least 1 band"));
    }
    let (x_lo, x_hi) = x_range;
    if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) {
        return Err(domain(format!("invalid x range [{x_lo}, {x_hi}]")));
    }
    let step = (x_hi - x_lo) / (n_samples - 1) as f64;
    let x_samples: Vec<f64> = (0..n_samples).map(|i| x_lo + step * i as f64).collect();
    let theta: Vec<f64> = x_samples
        .iter()
        .map(|x| (r_c * (4.0 * PI * x / wavelength).cos()).acos())
        .collect();
    let scale = C / length;
    let bands = (0..n_bands)
        .map(|i| {
            let (j, sign) = band_label(i);
            let base = 2.0 * PI * f64::from(j);
            Band {
                j,
                sign,
                omega: theta
                    .iter()
                    .map(|t| scale * (base + f64::from(sign) * t))
                    .collect(),
            }
        })
        .collect();
    Ok(BandStructure {
        x_samples,
        bands,
        omega_fsr: free_spectral_range(length),
    })
}

/// Field reflectivity magnitude of a lossless dielectric slab in vacuum at
/// normal incidence.
pub fn membrane_reflectivity(spec: &MembraneSpec, wavelength: f64) -> Result<f64> {
    spec.validate().map_err(Error::Domain)?;
    check_positive("lambda", wavelength)?;
    let n = spec.n_index;
    let r12 = (1.0 - n) / (1.0 + n);
    let beta = 2.0 * PI * n * spec.thickness / wavelength;
    let e = num_complex::Complex64::from_polar(1.0, 2.0 * beta);
    let r = r12 * (1.0 - e) / (1.0 - r12 * r12 * e);
    Ok(r.norm())
}

/// Power reflectivity of identical lossless mirrors giving finesse `F`,
/// from `F = π√R/(1−R)`.
pub fn mirror_reflectivity(finesse: f64) -> Result<f64> {
    if !(finesse.is_finite() && finesse >= 1.0) {
        return Err(domain(format!("F must be >= 1, got {finesse}")));
    }
    let s = (-PI + (PI * PI + 4.0 * finesse * finesse).sqrt()) / (2.0 * finesse);
    Ok(s * s)
}

/// How the membrane is represented in the transfer-matrix model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Membrane {
    /// Zero-thickness lossless sheet with prescribed field reflectivity.
    Sheet { r_c: f64 },
    /// Finite dielectric slab.
    Slab(MembraneSpec),
}

/// Mirror - membrane - mirror stack at normal incidence.
///
/// The detuning enters as a lumped round-trip phase `δL/c`, split evenly
/// between the two sub-cavities; the membrane displacement enters through the
/// laser wavenumber `2π/λ`. With the sheet model this places the resonances
/// exactly on [`dispersive_detuning`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityModel {
    mirror_rho: f64,
    length: f64,
    wavelength: f64,
    membrane: TransferMatrix,
}

impl CavityModel {
    pub fn new(membrane: Membrane, finesse: f64, length: f64, wavelength: f64) -> Result<Self> {
        check_positive("L", length)?;
        check_positive("lambda", wavelength)?;
        let mirror_rho = mirror_reflectivity(finesse)?.sqrt();
        let k0 = 2.0 * PI / wavelength;
        let m = match membrane {
            Membrane::Sheet { r_c } => {
                check_reflectivity(r_c)?;
                TransferMatrix::sheet(r_c)
            }
            Membrane::Slab(spec) => {
                spec.validate().map_err(Error::Domain)?;
                TransferMatrix::slab(spec.n_index, spec.thickness, k0)
            }
        };
        Ok(CavityModel {
            mirror_rho,
            length,
            wavelength,
            membrane: m,
        })
    }

    /// Normalized transmitted power at laser detuning `detuning` (rad/s) and
    /// membrane displacement `x` (m).
    pub fn transmission(&self, detuning: f64, x: f64) -> f64 {
        let k0 = 2.0 * PI / self.wavelength;
        let half = PI / 4.0 + detuning * self.length / (2.0 * C);
        let stack = TransferMatrix::output_mirror(self.mirror_rho)
            * TransferMatrix::propagation(half - k0 * x)
            * self.membrane
            * TransferMatrix::propagation(half + k0 * x)
            * TransferMatrix::input_mirror(self.mirror_rho);
        stack.transmission().norm_sqr()
    }

    /// Transmission peaks in `[lo, hi]` at displacement `x`: local maxima on an
    /// `n_scan`-point grid, each refined by golden-section search.
    pub fn resonances(&self, x: f64, lo: f64, hi: f64, n_scan: usize) -> Vec<f64> {
        let n_scan = n_scan.max(3);
        let step = (hi - lo) / (n_scan - 1) as f64;
        let grid: Vec<f64> = (0..n_scan).map(|i| lo + step * i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&d| self.transmission(d, x)).collect();
        let mut peaks = Vec::new();
        for i in 1..n_scan - 1 {
            if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
                let f = |d: f64| self.transmission(d, x);
                peaks.push(golden_max(f, grid[i - 1], grid[i + 1]));
            }
        }
        peaks
    }
}

/// Maximizer of a unimodal function on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionMap {
    pub detuning_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// `intensity[i][j]` is the transmission at `x_grid[i]`, `detuning_grid[j]`.
    pub intensity: Vec<Vec<f64>>,
}

/// Evaluates the transfer-matrix transmission on a grid. Rows (one per `x`)
/// are computed in parallel; the result does not depend on the partitioning.
pub fn transmission_map(
    membrane: Membrane,
    finesse: f64,
    length: f64,
    wavelength: f64,
    detuning_grid: &[f64],
    x_grid: &[f64],
) -> Result<TransmissionMap> {
    if detuning_grid.is_empty() || x_grid.is_empty() {
        return Err(domain("transmission map grids must be non-empty"));
    }
    let model = CavityModel::new(membrane, finesse, length, wavelength)?;
    let intensity = x_grid
        .par_iter()
        .map(|&x| {
            detuning_grid
                .iter()
                .map(|&d| model.transmission(d, x).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    Ok(TransmissionMap {
        detuning_grid: detuning_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        intensity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingdownTrace {
    pub t_samples: Vec<f64>,
    pub power: Vec<f64>,
    pub fitted_tau: f64,
    /// Fitted amplitude at the first fitted sample.
    pub fitted_amplitude: f64,
    pub fitted_offset: f64,
    pub residual_rms: f64,
}

/// Fits `power(t) = A·exp(−t/τ) + B` to the samples at or after `switch_off`
/// (all samples when `None`).
pub fn fit_ringdown(t: &[f64], power: &[f64], switch_off: Option<f64>) -> Result<RingdownTrace> {
    if t.len() != power.len() {
        return Err(domain("time and power columns differ in length"));
    }
    let (ts, ps): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(power)
        .filter(|(t, _)| switch_off.is_none_or(|t0| **t >= t0))
        .map(|(a, b)| (*a, *b))
        .unzip();
    let fit = fit_exponential_decay(&ts, &ps, true)?;
    Ok(RingdownTrace {
        t_samples: ts,
        power: ps,
        fitted_tau: fit.tau,
        fitted_amplitude: fit.amplitude,
        fitted_offset: fit.offset,
        residual_rms: fit.residual_rms,
    })
}

/// Energy ringdown time `τ = LF/(πc)` (inverse of `κ = πc/(LF)`).
pub fn ringdown_time(finesse: f64, length: f64) -> f64 {
    length * finesse / (PI * C)
}

/// Finesse from an energy ringdown time, `F = πcτ/L`.
pub fn finesse_from_ringdown(tau: f64, length: f64) -> f64 {
    PI * C * tau / length
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    FinesseToTau,
    TauToFinesse,
}

/// Bidirectional finesse/ringdown conversion for a cavity of length `length`.
pub fn finesse_ringdown(value: f64, direction: Conversion, length: f64) -> Result<f64> {
    check_positive("value", value)?;
    check_positive("L", length)?;
    Ok(match direction {
        Conversion::FinesseToTau => ringdown_time(value, length),
        Conversion::TauToFinesse => finesse_from_ringdown(value, length),
    })
}

/// Splitting between adjacent bands at an extremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeGap {
    /// `(c/L)√(8(1−r_c))`.
    pub approx: f64,
    /// `2(c/L)arccos(r_c)`.
    pub exact: f64,
    /// `(approx − exact)/exact`.
    pub rel_error: f64,
}

pub fn mode_gap(r_c: f64, length: f64) -> Result<ModeGap> {
    check_reflectivity(r_c)?;
    check_positive("L", length)?;
    let scale = C / length;
    let approx = scale * (8.0 * (1.0 - r_c)).sqrt();
    let exact = 2.0 * scale * r_c.acos();
    Ok(ModeGap {
        approx,
        exact,
        rel_error: (approx - exact) / exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: f64 = 0.067;
    const LAMBDA: f64 = 532e-9;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn transparent_membrane_is_flat() {
        for x in [0.0, 1e-8, 1.3e-7, 5e-7] {
            let w = dispersive_detuning(x, 0.0, L, LAMBDA).unwrap();
            assert!(rel(w, C / L * PI / 2.0) < 1e-15);
        }
    }

    #[test]
    fn quarter_wave_offset() {
        let w = dispersive_detuning(LAMBDA / 4.0, 0.5, L, LAMBDA).unwrap();
        assert!(rel(w, C / L * 2.0 * PI / 3.0) < 1e-14);
    }

    #[test]
    fn unit_reflectivity_is_domain_error() {
        assert!(matches!(
            dispersive_detuning(0.0, 1.0, L, LAMBDA),
            Err(Error::Domain(_))
        ));
        assert!(detuning_derivatives(0.0, 1.0, L, LAMBDA).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let r_c = 0.999;
        let d = detuning_derivatives(0.0, r_c, L, LAMBDA).unwrap();
        assert_eq!(d.omega1, 0.0);
        // Central second difference. The step balances truncation against
        // cancellation in ω ~ 1e8.
        let h = 1e-12;
        let f = |x| dispersive_detuning(x, r_c, L, LAMBDA).unwrap();
        let fd2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!(rel(fd2, d.omega2) < 1e-6, "{fd2} vs {}", d.omega2);
        let x0 = 5e-13;
        let d = detuning_derivatives(x0, r_c, L, LAMBDA).unwrap();
        let fd1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        assert!(rel(fd1, d.omega1) < 1e-6, "{fd1} vs {}", d.omega1);
    }

    #[test]
    fn curvature_high_reflectivity_limit() {
        let r_c: f64 = 1.0 - 1e-7;
        let d = detuning_derivatives(0.0, r_c, L, LAMBDA).unwrap();
        let limit = 16.0 * PI * PI * C / (L * LAMBDA * LAMBDA * (2.0 * (1.0 - r_c)).sqrt());
        assert!(rel(d.omega2, limit) < 1e-6);
    }

    #[test]
    fn zero_reflectivity_flags_no_quadratic_coupling() {
        let d = detuning_derivatives(0.0, 0.0, L, LAMBDA).unwrap();
        assert!(d.no_quadratic_coupling);
        assert_eq!(d.omega2, 0.0);
    }

    #[test]
    fn band_amplitude_for_measured_reflectivity() {
        let bs = band_structure(0.31, L, LAMBDA, (0.0, LAMBDA / 2.0), 401, 1).unwrap();
        let w = &bs.bands[0].omega;
        let max = w.iter().copied().fold(f64::MIN, f64::max);
        let min = w.iter().copied().fold(f64::MAX, f64::min);
        // arccos(-0.31) - arccos(0.31) over π, evaluated directly
        let expected = ((-0.31f64).acos() - 0.31f64.acos()) / PI;
        assert!(rel((max - min) / bs.omega_fsr, expected) < 1e-12);
        assert!(((max - min) / bs.omega_fsr - 0.2006).abs() < 1e-4);
    }

    #[test]
    fn bands_periodic_and_ordered() {
        let n = 201;
        let bs = band_structure(0.9, L, LAMBDA, (0.0, LAMBDA), n, 5).unwrap();
        let labels: Vec<_> = bs.bands.iter().map(Band::label).collect();
        assert_eq!(
            labels,
            ["band_0_+", "band_1_-", "band_1_+", "band_2_-", "band_2_+"]
        );
        // λ/2 is exactly 100 samples apart
        for band in &bs.bands {
            for i in 0..=100 {
                let a = band.omega[i];
                let b = band.omega[i + 100];
                assert!((a - b).abs() <= 1e-13 * a.abs(), "{a} {b}");
            }
        }
        for pair in bs.bands.windows(2) {
            for (lo, hi) in pair[0].omega.iter().zip(&pair[1].omega) {
                assert!(hi > lo);
            }
        }
    }

    #[test]
    fn gap_at_extremum_equals_mode_gap() {
        for r_c in [0.31, 0.9, 0.999] {
            let bs = band_structure(r_c, L, LAMBDA, (0.0, LAMBDA / 4.0), 2, 3).unwrap();
            let gap_x0 = bs.bands[2].omega[0] - bs.bands[1].omega[0];
            let gap_quarter = bs.bands[1].omega[1] - bs.bands[0].omega[1];
            let g = mode_gap(r_c, L).unwrap();
            assert!(rel(gap_x0, g.exact) < 1e-9);
            assert!(rel(gap_quarter, g.exact) < 1e-9);
        }
    }

    #[test]
    fn mode_gap_values() {
        let g = mode_gap(0.999, L).unwrap();
        assert!(rel(g.approx, 4.00e8) < 2e-3);
        let g = mode_gap(0.0, L).unwrap();
        assert!(rel(g.exact, free_spectral_range(L)) < 1e-15);
        let g = mode_gap(1.0 - 1e-8, L).unwrap();
        assert!(rel(g.approx, 1.27e6) < 5e-3);
        assert!(g.approx > 6.28e5);
    }

    #[test]
    fn gap_approximation_error_is_three_halves_order() {
        // (approx − exact)/(1−r_c)^{3/2} should settle to a constant
        let scaled: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&r: &f64| {
                let g = mode_gap(r, L).unwrap();
                (g.approx - g.exact).abs() / (C / L) / (1.0 - r).powf(1.5)
            })
            .collect();
        for s in &scaled {
            assert!(*s > 0.1 && *s < 1.0, "{scaled:?}");
        }
        assert!(rel(scaled[2], scaled[1]) < 0.05);
    }

    #[test]
    fn finesse_ringdown_values() {
        let tau = finesse_ringdown(16_100.0, Conversion::FinesseToTau, L).unwrap();
        assert!(rel(tau, 1.145e-6) < 1e-3);
        let f = finesse_ringdown(1.081e-6, Conversion::TauToFinesse, L).unwrap();
        assert!(rel(f, 15_200.0) < 1e-3);
        for f0 in [1.0, 15_200.0, 6e5] {
            let back = finesse_from_ringdown(ringdown_time(f0, L), L);
            assert!(rel(back, f0) < 1e-12);
        }
        assert!(finesse_ringdown(-1.0, Conversion::TauToFinesse, L).is_err());
    }

    #[test]
    fn mirror_reflectivity_inverts_finesse() {
        for f in [1.0, 10.0, 16_100.0, 3e5] {
            let r = mirror_reflectivity(f).unwrap();
            assert!(rel(PI * r.sqrt() / (1.0 - r), f) < 1e-9);
        }
        assert!(mirror_reflectivity(0.5).is_err());
    }

    #[test]
    fn transparent_membrane_ridges_do_not_move() {
        let fsr = free_spectral_range(L);
        let model = CavityModel::new(Membrane::Sheet { r_c: 0.0 }, 50.0, L, LAMBDA).unwrap();
        for x in [0.0, 3e-8, 1.1e-7] {
            let peaks = model.resonances(x, 0.0, 1.2 * fsr, 2001);
            assert_eq!(peaks.len(), 1);
            assert!(rel(peaks[0], fsr / 2.0) < 1e-9);
        }
    }

    #[test]
    fn symmetric_cavity_transmits_fully_on_resonance() {
        let fsr = free_spectral_range(L);
        let model = CavityModel::new(Membrane::Sheet { r_c: 0.0 }, 1000.0, L, LAMBDA).unwrap();
        assert!((model.transmission(fsr / 2.0, 0.0) - 1.0).abs() < 1e-9);
        // x = 0 keeps the mirror-sheet-mirror stack mirror-symmetric
        let model = CavityModel::new(Membrane::Sheet { r_c: 0.31 }, 1000.0, L, LAMBDA).unwrap();
        let peaks = model.resonances(0.0, 0.0, fsr, 101);
        assert_eq!(peaks.len(), 1);
        assert!((model.transmission(peaks[0], 0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sheet_ridges_follow_analytic_band_at_high_finesse() {
        let fsr = free_spectral_range(L);
        let model = CavityModel::new(Membrane::Sheet { r_c: 0.9 }, 16_100.0, L, LAMBDA).unwrap();
        for x in [0.0, 2e-8, 7e-8, 1.33e-7] {
            let peaks = model.resonances(x, 0.0, fsr, 101);
            let w = dispersive_detuning(x, 0.9, L, LAMBDA).unwrap();
            assert_eq!(peaks.len(), 1);
            assert!(rel(peaks[0], w) < 1e-6, "x={x}: {} vs {w}", peaks[0]);
        }
    }

    #[test]
    fn map_rows_independent_of_order() {
        let fsr = free_spectral_range(L);
        let det: Vec<f64> = (0..31).map(|i| fsr * i as f64 / 30.0).collect();
        let xs: Vec<f64> = (0..17).map(|i| LAMBDA * i as f64 / 32.0).collect();
        let m = transmission_map(Membrane::Sheet { r_c: 0.31 }, 30.0, L, LAMBDA, &det, &xs).unwrap();
        let model = CavityModel::new(Membrane::Sheet { r_c: 0.31 }, 30.0, L, LAMBDA).unwrap();
        for (i, x) in xs.iter().enumerate().rev() {
            for (j, d) in det.iter().enumerate() {
                assert_eq!(m.intensity[i][j], model.transmission(*d, *x).clamp(0.0, 1.0));
                assert!((0.0..=1.0).contains(&m.intensity[i][j]));
            }
        }
        assert!(transmission_map(Membrane::Sheet { r_c: 0.3 }, 0.5, L, LAMBDA, &det, &xs).is_err());
        assert!(transmission_map(Membrane::Sheet { r_c: 0.3 }, 10.0, L, LAMBDA, &[], &xs).is_err());
    }

    #[test]
    fn ringdown_rejects_constant() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 1e-8).collect();
        let p = vec![0.5; 40];
        assert!(matches!(fit_ringdown(&t, &p, None), Err(Error::Fit(_))));
    }

    #[test]
    fn ringdown_uses_samples_after_switch_off() {
        let tau = 1.145e-6;
        let t: Vec<f64> = (0..300).map(|i| i as f64 * 2e-8).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|&t| if t < 4e-7 { 1.0 } else { (-(t - 4e-7) / tau).exp() })
            .collect();
        let fit = fit_ringdown(&t, &p, Some(4e-7)).unwrap();
        assert!(rel(fit.fitted_tau, tau) < 1e-9);
        assert!(fit.t_samples[0] >= 4e-7);
    }
}
