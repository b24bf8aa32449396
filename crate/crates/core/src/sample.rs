//! Sample optical responses and the Kramers-Kronig reference transform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};
use crate::grid::{wavelength_to_angular_frequency, SpectralGrid};
#[allow(unused_imports)]
use num_traits::Float;

/// Absorbance (natural-log convention, `T = exp(-A)`) and phase per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResponse {
    absorbance: Vec<f64>,
    phase: Vec<f64>,
}

impl SampleResponse {
    pub fn new(grid: &SpectralGrid, absorbance: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        grid.check_len(absorbance.len())?;
        grid.check_len(phase.len())?;
        if let Some(i) = absorbance.iter().position(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidSample(format!(
                "absorbance in bin {i} must be finite and non-negative"
            )));
        }
        if let Some(i) = phase.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "phase in bin {i} must be finite"
            )));
        }
        Ok(Self { absorbance, phase })
    }

    /// A sample that transmits everything without a phase shift.
    pub fn transparent(grid: &SpectralGrid) -> Self {
        Self {
            absorbance: vec![0.0; grid.n_bins()],
            phase: vec![0.0; grid.n_bins()],
        }
    }

    pub fn absorbance(&self) -> &[f64] {
        &self.absorbance
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn len(&self) -> usize {
        self.absorbance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorbance.is_empty()
    }

    /// Intensity transmittance `exp(-A)` per bin.
    pub fn transmittance(&self) -> Vec<f64> {
        self.absorbance.iter().map(|a| (-a).exp()).collect()
    }

    /// Absorbance in decadic units, as a conventional spectrometer reports it.
    pub fn decadic_absorbance(&self) -> Vec<f64> {
        self.absorbance
            .iter()
            .map(|&a| natural_to_decadic(a))
            .collect()
    }

    /// Copy with absorbance and phase zeroed on the long-wavelength half.
    pub fn restricted_to_short_half(&self) -> Self {
        let half = self.len() / 2;
        let mut out = self.clone();
        out.absorbance[half..].iter_mut().for_each(|a| *a = 0.0);
        out.phase[half..].iter_mut().for_each(|p| *p = 0.0);
        out
    }

    /// Whether the sample is inert (no absorbance, no phase) on the
    /// long-wavelength half of the band, which the calibration relies on.
    pub fn is_inert_on_long_half(&self) -> bool {
        let half = self.len() / 2;
        self.absorbance[half..].iter().all(|&a| a == 0.0)
            && self.phase[half..].iter().all(|&p| p == 0.0)
    }
}

pub fn natural_to_decadic(absorbance: f64) -> f64 {
    absorbance / LN_10
}

pub fn decadic_to_natural(absorbance: f64) -> f64 {
    absorbance * LN_10
}

/// Constant transmittance and phase across the band.
pub fn flat_response(
    grid: &SpectralGrid,
    transmittance: f64,
    phase: f64,
) -> Result<SampleResponse> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::InvalidSample(format!(
            "transmittance {transmittance} outside [0, 1]"
        )));
    }
    if transmittance == 0.0 {
        return Err(Error::InvalidSample(
            "zero transmittance has infinite absorbance; block the arm instead".into(),
        ));
    }
    SampleResponse::new(
        grid,
        vec![-transmittance.ln(); grid.n_bins()],
        vec![phase; grid.n_bins()],
    )
}

/// Single Lorentzian absorption line with its matching dispersive phase.
///
/// The log field response is `-(A0 / 2) * gamma / (gamma - i (w - w0))`, whose
/// pole sits in the lower half plane, so absorbance and phase are
/// Kramers-Kronig consistent:
/// `A = A0 gamma^2 / (gamma^2 + d^2)` and `phi = -(A0 / 2) gamma d / (gamma^2 + d^2)`
/// with `d = w - w0`. The peak phase magnitude is `A0 / 4`. The width is
/// converted to frequency at the line centre, `2 gamma = w0 * fwhm / center`.
pub fn lorentzian_response(
    grid: &SpectralGrid,
    center_nm: f64,
    fwhm_nm: f64,
    peak_absorbance: f64,
) -> Result<SampleResponse> {
    if !(fwhm_nm > 0.0) {
        return Err(Error::InvalidSample(format!(
            "fwhm {fwhm_nm} nm must be positive"
        )));
    }
    if !(peak_absorbance >= 0.0) || !peak_absorbance.is_finite() {
        return Err(Error::InvalidSample(format!(
            "peak absorbance {peak_absorbance} must be finite and non-negative"
        )));
    }
    let (lo, hi) = (grid.min_wavelength_nm(), grid.max_wavelength_nm());
    if !(center_nm >= lo && center_nm <= hi) {
        return Err(Error::InvalidSample(format!(
            "line centre {center_nm} nm lies outside the grid span [{lo:.3}, {hi:.3}] nm"
        )));
    }
    let w0 = wavelength_to_angular_frequency(center_nm);
    // Half width at half maximum in angular frequency, linearised at the centre.
    let gamma = 0.5 * w0 * fwhm_nm / center_nm;
    let mut absorbance = Vec::with_capacity(grid.n_bins());
    let mut phase = Vec::with_capacity(grid.n_bins());
    for &w in grid.frequencies() {
        let d = w - w0;
        let denom = gamma * gamma + d * d;
        absorbance.push(peak_absorbance * gamma * gamma / denom);
        phase.push(-0.5 * peak_absorbance * gamma * d / denom);
    }
    SampleResponse::new(grid, absorbance, phase)
}

/// Fraction of bins at each band edge covered by the cosine taper.
pub const KK_TAPER_FRACTION: f64 = 0.1;

/// Phase spectrum implied by an absorbance spectrum through the
/// Kramers-Kronig relations, `phi = -H[A] / 2`.
///
/// The Hilbert transform uses the odd-index discrete kernel `2 / (pi n)`
/// over the frequency lattice after a raised-cosine taper on the outer
/// [`KK_TAPER_FRACTION`] of bins at each edge.
pub fn kramers_kronig_phase(grid: &SpectralGrid, absorbance: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(absorbance.len())?;
    if let Some(i) = absorbance.iter().position(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidSample(format!(
            "absorbance in bin {i} must be finite and non-negative"
        )));
    }
    let n = absorbance.len();
    let taper_len = (KK_TAPER_FRACTION * n as f64).round() as usize;
    let tapered: Vec<f64> = absorbance
        .iter()
        .enumerate()
        .map(|(k, &a)| a * edge_taper(k, n, taper_len))
        .collect();

    // Bins run in decreasing frequency, so w_k - w_m = (m - k) * spacing.
    let mut phase = vec![0.0; n];
    for (k, out) in phase.iter_mut().enumerate() {
        let mut h = 0.0;
        for (m, &a) in tapered.iter().enumerate() {
            let lag = m as i64 - k as i64;
            if lag % 2 != 0 {
                h += a * 2.0 / (PI * lag as f64);
            }
        }
        *out = -0.5 * h;
    }
    Ok(phase)
}

fn edge_taper(k: usize, n: usize, taper_len: usize) -> f64 {
    if taper_len == 0 {
        return 1.0;
    }
    let from_edge = k.min(n - 1 - k);
    if from_edge >= taper_len {
        1.0
    } else {
        0.5 * (1.0 - (PI * (from_edge as f64 + 0.5) / taper_len as f64).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(810.0, 155.0, 256).unwrap()
    }

    /// Closed-form dispersive phase of the fixture line, evaluated
    /// independently of `lorentzian_response`.
    fn analytic_phase(grid: &SpectralGrid, center_nm: f64, fwhm_nm: f64, a0: f64) -> Vec<f64> {
        let c = 2.0 * PI * crate::grid::SPEED_OF_LIGHT * 1e9;
        let w0 = c / center_nm;
        let gamma = 0.5 * (c / center_nm) * (fwhm_nm / center_nm);
        grid.wavelengths_nm()
            .iter()
            .map(|&wl| {
                let d = c / wl - w0;
                -0.5 * a0 * gamma * d / (gamma * gamma + d * d)
            })
            .collect()
    }

    fn central_80(n: usize) -> core::ops::Range<usize> {
        let edge = n / 10;
        edge..n - edge
    }

    #[test]
    fn null_lorentzian_is_null() {
        let s = lorentzian_response(&grid(), 790.0, 10.0, 0.0).unwrap();
        assert!(s.absorbance().iter().all(|&a| a == 0.0));
        assert!(s.phase().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn lorentzian_peak_and_shape() {
        let g = grid();
        let s = lorentzian_response(&g, 790.0, 10.0, 1.5).unwrap();
        let nearest = g
            .wavelengths_nm()
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 790.0)
                    .abs()
                    .partial_cmp(&(b.1 - 790.0).abs())
                    .unwrap()
            })
            .unwrap()
            .0;
        // Within one bin of the exact peak.
        let rel = (s.absorbance()[nearest] - 1.5) / 1.5;
        assert!(rel.abs() < 0.02, "{rel}");
        // Opposite-sign extrema either side of centre, zero crossing at centre.
        let ph = s.phase();
        let (imax, _) = ph
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |m, (i, &p)| if p > m.1 { (i, p) } else { m });
        let (imin, _) = ph
            .iter()
            .enumerate()
            .fold((0, f64::MAX), |m, (i, &p)| if p < m.1 { (i, p) } else { m });
        assert!(ph[imax] > 0.0 && ph[imin] < 0.0);
        assert!((imax as i64 - nearest as i64).signum() != (imin as i64 - nearest as i64).signum());
        assert!((ph[imax] - 1.5 / 4.0).abs() < 0.01);
    }

    #[test]
    fn lorentzian_rejects_center_outside_band() {
        let err = lorentzian_response(&grid(), 600.0, 10.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidSample(_)));
        assert!(lorentzian_response(&grid(), 800.0, 0.0, 1.0).is_err());
        assert!(lorentzian_response(&grid(), 800.0, 5.0, -1.0).is_err());
    }

    #[test]
    fn kk_of_lorentzian_matches_dispersive_phase() {
        let g = grid();
        let a0 = 2.0;
        let s = lorentzian_response(&g, 810.0, 5.0, a0).unwrap();
        let kk = kramers_kronig_phase(&g, s.absorbance()).unwrap();
        let exact = analytic_phase(&g, 810.0, 5.0, a0);
        let peak = exact.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        for i in central_80(g.n_bins()) {
            assert!(
                (kk[i] - exact[i]).abs() <= 0.01 * peak,
                "bin {i}: {} vs {}",
                kk[i],
                exact[i]
            );
            assert!((s.phase()[i] - exact[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn kk_of_zero_is_zero() {
        let g = grid();
        let kk = kramers_kronig_phase(&g, &vec![0.0; 256]).unwrap();
        assert!(kk.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn kk_is_linear() {
        let g = grid();
        let x = lorentzian_response(&g, 780.0, 8.0, 1.0).unwrap();
        let y = lorentzian_response(&g, 850.0, 20.0, 0.7).unwrap();
        let (a, b) = (0.3, 2.5);
        let combo: Vec<f64> = x
            .absorbance()
            .iter()
            .zip(y.absorbance())
            .map(|(p, q)| a * p + b * q)
            .collect();
        let lhs = kramers_kronig_phase(&g, &combo).unwrap();
        let kx = kramers_kronig_phase(&g, x.absorbance()).unwrap();
        let ky = kramers_kronig_phase(&g, y.absorbance()).unwrap();
        for i in 0..256 {
            assert!((lhs[i] - (a * kx[i] + b * ky[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_examples() {
        let g = grid();
        let s = flat_response(&g, 1.0, 0.0).unwrap();
        assert!(s.absorbance().iter().all(|&a| a == 0.0) && s.phase().iter().all(|&p| p == 0.0));
        let s = flat_response(&g, (-1.0f64).exp(), 0.0).unwrap();
        assert!(s.absorbance().iter().all(|&a| (a - 1.0).abs() < 1e-15));
        let s = flat_response(&g, 0.5, 0.3).unwrap();
        assert!(s
            .absorbance()
            .iter()
            .all(|&a| (a - 2.0f64.ln()).abs() < 1e-15));
        assert!(s.phase().iter().all(|&p| p == 0.3));
        assert!(flat_response(&g, 1.2, 0.0).is_err());
        assert!(flat_response(&g, -0.1, 0.0).is_err());
    }

    #[test]
    fn broad_lorentzian_tends_to_flat() {
        let g = SpectralGrid::new(810.0, 155.0, 16).unwrap();
        let mut prev = f64::INFINITY;
        for fwhm in [1e3, 1e4, 1e5, 1e6] {
            let s = lorentzian_response(&g, 810.0, fwhm, 0.8).unwrap();
            let dev = s
                .absorbance()
                .iter()
                .zip(s.phase())
                .map(|(a, p)| (a - 0.8).abs().max(p.abs()))
                .fold(0.0f64, f64::max);
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn transmittance_in_unit_interval() {
        let g = grid();
        let s = lorentzian_response(&g, 770.0, 30.0, 5.0).unwrap();
        assert!(s.transmittance().iter().all(|&t| t > 0.0 && t <= 1.0));
        let d = s.decadic_absorbance();
        assert!((decadic_to_natural(d[10]) - s.absorbance()[10]).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_absorbance() {
        let g = SpectralGrid::new(810.0, 100.0, 4).unwrap();
        assert!(SampleResponse::new(&g, vec![0.0, -1.0, 0.0, 0.0], vec![0.0; 4]).is_err());
        assert!(SampleResponse::new(&g, vec![0.0; 3], vec![0.0; 4]).is_err());
        assert!(kramers_kronig_phase(&g, &[0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
