//! Wave functions sampled on a [`Grid1D`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};
use crate::fourier::{wavenumbers, FftPair};
use crate::grid::Grid1D;

/// Tail mass beyond the grid above which a packet is rejected.
pub const TAIL_MASS_LIMIT: f64 = 1e-8;

/// Complex amplitudes on a grid, carrying the value of hbar they were built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
    hbar: f64,
    normalized: bool,
}

/// First and second moments of position and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub norm: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(QhjError::GridMismatch(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.len()
            )));
        }
        check_hbar(hbar)?;
        let mut psi = WaveFunction {
            grid,
            amplitudes,
            hbar,
            normalized: false,
        };
        let n = psi.norm();
        if !n.is_finite() {
            return Err(QhjError::invalid("amplitudes", "norm is not finite"));
        }
        psi.normalized = (n - 1.0).abs() <= 1e-12;
        Ok(psi)
    }

    pub fn from_fn(grid: Grid1D, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amps = grid.points().map(f).collect();
        WaveFunction::new(grid, amps, hbar)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        let dens: Vec<f64> = self.amplitudes.iter().map(|z| z.norm_sqr()).collect();
        self.grid.integrate(&dens)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(QhjError::invalid("amplitudes", "cannot normalize a null state"));
        }
        self.amplitudes.iter_mut().for_each(|z| *z /= n);
        self.normalized = true;
        Ok(self)
    }

    pub fn scaled(&self, factor: Complex64) -> WaveFunction {
        let amplitudes = self.amplitudes.iter().map(|z| z * factor).collect();
        WaveFunction {
            grid: self.grid,
            amplitudes,
            hbar: self.hbar,
            normalized: self.normalized && (factor.norm() - 1.0).abs() < 1e-14,
        }
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Result<WaveFunction> {
        WaveFunction::new(self.grid, amplitudes, self.hbar)
    }

    /// Trapezoidal inner product `<self|other>`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.check_compatible(other)?;
        let w = self.grid.weights();
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .zip(&w)
            .map(|((a, b), w)| a.conj() * b * w)
            .sum())
    }

    pub fn check_compatible(&self, other: &WaveFunction) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(QhjError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        if (self.hbar - other.hbar).abs() > 1e-15 * self.hbar {
            return Err(QhjError::GridMismatch(format!(
                "hbar {} vs {}",
                self.hbar, other.hbar
            )));
        }
        Ok(())
    }

    /// Moments from the position density and the periodic spectrum.
    pub fn moments(&self) -> Moments {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let xs = self.grid.to_vec();
        let dens: Vec<f64> = self.amplitudes.iter().map(|z| z.norm_sqr()).collect();
        let norm = self.grid.integrate(&dens);
        let first: Vec<f64> = dens.iter().zip(&xs).map(|(d, x)| d * x).collect();
        let mean_q = self.grid.integrate(&first) / norm;
        let second: Vec<f64> = dens
            .iter()
            .zip(&xs)
            .map(|(d, x)| d * (x - mean_q).powi(2))
            .collect();
        let var_q = self.grid.integrate(&second) / norm;

        let fft = FftPair::new(n);
        let mut spec = self.amplitudes.clone();
        let mut scratch = fft.scratch();
        fft.forward(&mut spec, &mut scratch);
        let k = wavenumbers(n, h);
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let mean_p = self.hbar * spec.iter().zip(&k).map(|(z, k)| z.norm_sqr() * k).sum::<f64>() / total;
        let var_p = spec
            .iter()
            .zip(&k)
            .map(|(z, k)| z.norm_sqr() * (self.hbar * k - mean_p).powi(2))
            .sum::<f64>()
            / total;
        Moments {
            norm,
            mean_q,
            mean_p,
            var_q,
            var_p,
        }
    }

    /// Momentum-space amplitude `(2 pi hbar)^{-1/2} \int dq e^{-ipq/hbar} psi(q)`.
    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let w = self.grid.weights();
        let s: Complex64 = self
            .grid
            .points()
            .zip(&self.amplitudes)
            .zip(&w)
            .map(|((q, a), w)| a * Complex64::from_polar(*w, -p * q / self.hbar))
            .sum();
        s / (2.0 * PI * self.hbar).sqrt()
    }

    /// Largest amplitude modulus on the two outermost samples.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.amplitudes.len();
        self.amplitudes[0].norm().max(self.amplitudes[n - 1].norm())
    }

    /// Probability mass within `margin` of either grid edge.
    pub fn edge_mass(&self, margin: f64) -> f64 {
        let w = self.grid.weights();
        let (lo, hi) = (self.grid.x_min() + margin, self.grid.x_max() - margin);
        self.grid
            .points()
            .zip(&self.amplitudes)
            .zip(&w)
            .filter(|((x, _), _)| *x < lo || *x > hi)
            .map(|((_, a), w)| a.norm_sqr() * w)
            .sum()
    }
}

pub(crate) fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(QhjError::invalid("hbar", format!("must be positive, got {hbar}")))
    }
}

/// Normalized minimum-uncertainty packet
/// `exp(-(q-q0)^2/(4 width^2) + i p0 q / hbar)`.
pub fn make_gaussian(
    grid: Grid1D,
    center_q: f64,
    center_p: f64,
    width: f64,
    hbar: f64,
) -> Result<WaveFunction> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(QhjError::invalid("width", format!("must be positive, got {width}")));
    }
    check_hbar(hbar)?;
    let s = std::f64::consts::SQRT_2 * width;
    let tail_mass = 0.5 * libm::erfc((center_q - grid.x_min()) / s)
        + 0.5 * libm::erfc((grid.x_max() - center_q) / s);
    if tail_mass > TAIL_MASS_LIMIT {
        return Err(QhjError::DomainTruncation {
            tail_mass,
            limit: TAIL_MASS_LIMIT,
        });
    }
    let psi = WaveFunction::from_fn(grid, hbar, |q| {
        let d = q - center_q;
        Complex64::from_polar((-d * d / (4.0 * width * width)).exp(), center_p * q / hbar)
    })?;
    psi.normalize()
}

/// Trapezoidal L2 distance between two states on the same grid.
pub fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    a.check_compatible(b)?;
    let diff: Vec<f64> = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .collect();
    Ok(a.grid.integrate(&diff).sqrt())
}

/// L2 distance after removing the optimal global phase:
/// `min_phi || a - e^{i phi} b ||`.
pub fn phase_aligned_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    let ov = a.inner(b)?;
    let phase = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { Complex64::new(1.0, 0.0) };
    l2_distance(a, &b.scaled(phase))
}

/// `|<a|b>| / (|a| |b|)`.
pub fn fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    Ok(a.inner(b)?.norm() / (a.norm() * b.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(-12.0, 12.0, 1201).unwrap()
    }

    #[test]
    fn centered_packet_is_symmetric() {
        let psi = make_gaussian(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let m = psi.moments();
        assert!((m.norm - 1.0).abs() < 1e-10);
        assert!(m.mean_q.abs() < 1e-12);
        assert!(m.mean_p.abs() < 1e-12);
        assert!(psi.is_normalized());
    }

    #[test]
    fn displaced_packet_moments() {
        let psi = make_gaussian(grid(), 2.0, 1.0, 0.5, 1.0).unwrap();
        let m = psi.moments();
        assert!((m.mean_q - 2.0).abs() < 1e-8, "{}", m.mean_q);
        assert!((m.mean_p - 1.0).abs() < 1e-8, "{}", m.mean_p);
    }

    #[test]
    fn minimum_uncertainty() {
        let psi = make_gaussian(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let m = psi.moments();
        assert!((m.var_q - 1.0).abs() < 1e-9, "{}", m.var_q);
        assert!((m.var_p - 0.25).abs() < 1e-9, "{}", m.var_p);
        assert!((m.var_q * m.var_p - 0.25).abs() < 1e-9);
    }

    #[test]
    fn truncated_packet_rejected() {
        let g = Grid1D::new(-3.0, 3.0, 301).unwrap();
        let e = make_gaussian(g, 2.0, 0.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, QhjError::DomainTruncation { .. }));
        assert!(make_gaussian(g, 0.0, 0.0, -1.0, 1.0).is_err());
        assert!(make_gaussian(g, 0.0, 0.0, 0.3, 0.0).is_err());
    }

    #[test]
    fn distances() {
        let a = make_gaussian(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        let b = a.scaled(Complex64::new(-1.0, 0.0));
        assert!((l2_distance(&a, &b).unwrap() - 2.0).abs() < 1e-10);
        assert!(phase_aligned_distance(&a, &b).unwrap() < 1e-7);
        let other = Grid1D::new(-12.0, 12.0, 1001).unwrap();
        let c = make_gaussian(other, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(l2_distance(&a, &c), Err(QhjError::GridMismatch(_))));
    }

    #[test]
    fn distance_monotone_in_offset() {
        let a = make_gaussian(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let mut last = 0.0;
        for off in [1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2] {
            let b = make_gaussian(grid(), off, 0.0, 1.0, 1.0).unwrap();
            let d = l2_distance(&a, &b).unwrap();
            assert!(d > last);
            last = d;
        }
        // small offset: ||a - b|| ~ off / (2 sigma) for a unit-width packet
        let b = make_gaussian(grid(), 1e-3, 0.0, 1.0, 1.0).unwrap();
        let d = l2_distance(&a, &b).unwrap();
        assert!((d - 5e-4).abs() < 1e-6, "{d}");
    }

    #[test]
    fn momentum_amplitude_matches_analytic() {
        let psi = make_gaussian(grid(), 0.0, 0.5, 1.0, 1.0).unwrap();
        // |psi~(p)|^2 = (2/pi)^{1/2} exp(-2 (p - p0)^2) for sigma = 1, hbar = 1
        for p in [-1.0, 0.0, 0.5, 1.3] {
            let got = psi.momentum_amplitude(p).norm_sqr();
            let want = (2.0 / PI).sqrt() * (-2.0 * (p - 0.5f64).powi(2)).exp();
            assert!((got - want).abs() < 1e-10);
        }
    }
}
