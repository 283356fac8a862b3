//! 1-D transfer matrices for lossless planar elements.
//!
//! A matrix maps the (right-going, left-going) field amplitudes on the left
//! of an element to those on its right. For an element with reflection `r`
//! and transmission `t` seen from the left, and `r'`, `t'` seen from the
//! right, `M = (1/t') [[t t' - r r', r'], [-r, 1]]`.

use std::ops::Mul;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        TransferMatrix {
            m11: Complex64::new(1.0, 0.0),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::new(1.0, 0.0),
        }
    }

    pub fn from_scattering(r: Complex64, t: Complex64, r_back: Complex64, t_back: Complex64) -> Self {
        let inv = 1.0 / t_back;
        TransferMatrix {
            m11: (t * t_back - r * r_back) * inv,
            m12: r_back * inv,
            m21: -r * inv,
            m22: inv,
        }
    }

    /// Free propagation accumulating `phase` radians.
    pub fn propagation(phase: f64) -> Self {
        TransferMatrix {
            m11: Complex64::from_polar(1.0, phase),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::from_polar(1.0, -phase),
        }
    }

    /// Symmetric lossless zero-thickness sheet with field reflectivity
    /// magnitude `rho`: `r = i·rho`, `t = sqrt(1 - rho²)`.
    pub fn sheet(rho: f64) -> Self {
        let r = Complex64::new(0.0, rho);
        let t = Complex64::new((1.0 - rho * rho).sqrt(), 0.0);
        Self::from_scattering(r, t, r, t)
    }

    /// Lossless mirror whose reflection seen from its right side is `-rho`
    /// (the cavity's input mirror).
    pub fn input_mirror(rho: f64) -> Self {
        let t = Complex64::new((1.0 - rho * rho).sqrt(), 0.0);
        Self::from_scattering(Complex64::new(rho, 0.0), t, Complex64::new(-rho, 0.0), t)
    }

    /// Lossless mirror whose reflection seen from its left side is `-rho`
    /// (the cavity's output mirror).
    pub fn output_mirror(rho: f64) -> Self {
        let t = Complex64::new((1.0 - rho * rho).sqrt(), 0.0);
        Self::from_scattering(Complex64::new(-rho, 0.0), t, Complex64::new(rho, 0.0), t)
    }

    /// Fresnel interface at normal incidence from index `n1` into `n2`.
    pub fn interface(n1: f64, n2: f64) -> Self {
        let r12 = (n1 - n2) / (n1 + n2);
        let t12 = 2.0 * n1 / (n1 + n2);
        let t21 = 2.0 * n2 / (n1 + n2);
        Self::from_scattering(
            Complex64::new(r12, 0.0),
            Complex64::new(t12, 0.0),
            Complex64::new(-r12, 0.0),
            Complex64::new(t21, 0.0),
        )
    }

    /// Dielectric slab of index `n` and thickness `d` in vacuum, for vacuum
    /// wavenumber `k0`.
    pub fn slab(n: f64, d: f64, k0: f64) -> Self {
        Self::interface(n, 1.0) * Self::propagation(n * k0 * d) * Self::interface(1.0, n)
    }

    /// Amplitude transmission of the whole stack for light incident from the left.
    pub fn transmission(&self) -> Complex64 {
        (self.m11 * self.m22 - self.m12 * self.m21) / self.m22
    }

    /// Amplitude reflection for light incident from the left.
    pub fn reflection(&self) -> Complex64 {
        -self.m21 / self.m22
    }
}

/// `a * b` applies `b` first: stacks compose right-to-left along the beam.
impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, o: TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * o.m11 + self.m12 * o.m21,
            m12: self.m11 * o.m12 + self.m12 * o.m22,
            m21: self.m21 * o.m11 + self.m22 * o.m21,
            m22: self.m21 * o.m12 + self.m22 * o.m22,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_sum(m: &TransferMatrix) -> f64 {
        m.reflection().norm_sqr() + m.transmission().norm_sqr()
    }

    #[test]
    fn elements_are_lossless() {
        for rho in [0.0, 0.31, 0.9, 0.999] {
            assert!((power_sum(&TransferMatrix::sheet(rho)) - 1.0).abs() < 1e-12);
            assert!((power_sum(&TransferMatrix::input_mirror(rho)) - 1.0).abs() < 1e-12);
        }
        let slab = TransferMatrix::slab(2.0, 50e-9, 2.0 * std::f64::consts::PI / 1064e-9);
        assert!((power_sum(&slab) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagation_is_unit_transmission() {
        let p = TransferMatrix::propagation(1.234);
        assert!((p.transmission().norm() - 1.0).abs() < 1e-15);
        assert!(p.reflection().norm() < 1e-15);
    }

    #[test]
    fn single_interface_reflection() {
        let m = TransferMatrix::interface(1.0, 1.5);
        assert!((m.reflection().re + 0.2).abs() < 1e-15);
    }
}
