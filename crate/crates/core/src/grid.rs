//! Frequency-uniform spectral lattice and the energy-conservation pairing.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a vacuum wavelength in nanometres to an angular frequency in rad/s.
pub fn wavelength_to_angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * 1e9 / wavelength_nm
}

/// Converts an angular frequency in rad/s to a vacuum wavelength in nanometres.
pub fn angular_frequency_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * 1e9 / omega
}

/// Discretised frequency axis shared by every other part of the crate.
///
/// Bin centres are uniformly spaced in angular frequency and symmetric about
/// half the pump frequency, so `freq(i) + freq(partner(i)) == pump_frequency`.
/// Bins are stored in order of increasing wavelength (decreasing frequency),
/// which is how a grating spectrometer row is read out.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    n_bins: usize,
    pump_frequency: f64,
    spacing: f64,
    detunings: Vec<f64>,
    frequencies: Vec<f64>,
    wavelengths_nm: Vec<f64>,
}

impl SpectralGrid {
    /// Builds a grid centred at `center_wavelength_nm` whose band edges are
    /// exactly `bandwidth_nm` apart in wavelength.
    ///
    /// The pump frequency is twice the centre frequency, which fixes the
    /// symmetry of the lattice; the requested band is converted to frequency
    /// once and the lattice is uniform in frequency from there on.
    pub fn new(center_wavelength_nm: f64, bandwidth_nm: f64, n_bins: usize) -> Result<Self> {
        if n_bins < 2 || !n_bins.is_multiple_of(2) {
            return Err(Error::InvalidGrid(
                "number of bins must be even and at least 2",
            ));
        }
        if !(bandwidth_nm > 0.0) || !bandwidth_nm.is_finite() {
            return Err(Error::InvalidGrid("bandwidth must be positive"));
        }
        if !(center_wavelength_nm > 0.0) || !center_wavelength_nm.is_finite() {
            return Err(Error::InvalidGrid("centre wavelength must be positive"));
        }
        // Half-width d in inverse wavelength solving 1/(a-d) - 1/(a+d) = bandwidth.
        let a = 1.0 / center_wavelength_nm;
        let w = bandwidth_nm;
        let d = ((1.0 + w * w * a * a).sqrt() - 1.0) / w;
        let center = wavelength_to_angular_frequency(center_wavelength_nm);
        let half_span = center * d / a;
        let spacing = 2.0 * half_span / n_bins as f64;

        let half = (n_bins / 2) as f64;
        let detunings: Vec<f64> = (0..n_bins)
            .map(|i| (half - i as f64 - 0.5) * spacing)
            .collect();
        let frequencies: Vec<f64> = detunings.iter().map(|&x| center + x).collect();
        let wavelengths_nm = frequencies
            .iter()
            .map(|&w| angular_frequency_to_wavelength(w))
            .collect();
        Ok(Self {
            n_bins,
            pump_frequency: 2.0 * center,
            spacing,
            detunings,
            frequencies,
            wavelengths_nm,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Number of bins in each half of the band.
    pub fn half(&self) -> usize {
        self.n_bins / 2
    }

    pub fn pump_frequency(&self) -> f64 {
        self.pump_frequency
    }

    /// Degenerate frequency, half the pump frequency.
    pub fn center_frequency(&self) -> f64 {
        0.5 * self.pump_frequency
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        angular_frequency_to_wavelength(self.pump_frequency)
    }

    /// Angular frequency spacing between neighbouring bins.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Bin frequencies relative to the degenerate frequency.
    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    /// Energy-conservation partner of bin `i`.
    pub fn partner(&self, i: usize) -> Result<usize> {
        if i >= self.n_bins {
            return Err(Error::BinOutOfRange {
                index: i,
                n_bins: self.n_bins,
            });
        }
        Ok(self.partner_unchecked(i))
    }

    #[inline]
    pub(crate) fn partner_unchecked(&self, i: usize) -> usize {
        self.n_bins - 1 - i
    }

    /// Difference frequency `omega_i - omega_partner(i)` that sets the fringe
    /// period of bin `i` in the delay scan.
    pub fn difference_frequency(&self, i: usize) -> f64 {
        self.detunings[i] - self.detunings[self.partner_unchecked(i)]
    }

    /// Wavelength of the short-wavelength band edge.
    pub fn min_wavelength_nm(&self) -> f64 {
        angular_frequency_to_wavelength(self.frequencies[0] + 0.5 * self.spacing)
    }

    /// Wavelength of the long-wavelength band edge.
    pub fn max_wavelength_nm(&self) -> f64 {
        angular_frequency_to_wavelength(self.frequencies[self.n_bins - 1] - 0.5 * self.spacing)
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_bins {
            return Err(Error::LengthMismatch {
                expected: self.n_bins,
                got: len,
            });
        }
        Ok(())
    }

    pub fn provenance(&self) -> GridProvenance {
        GridProvenance {
            n_bins: self.n_bins,
            pump_wavelength_nm: self.pump_wavelength_nm(),
            min_wavelength_nm: self.min_wavelength_nm(),
            max_wavelength_nm: self.max_wavelength_nm(),
        }
    }
}

/// Compact description of a grid, embedded in every output file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridProvenance {
    pub n_bins: usize,
    pub pump_wavelength_nm: f64,
    pub min_wavelength_nm: f64,
    pub max_wavelength_nm: f64,
}

impl GridProvenance {
    /// Rebuilds the grid the provenance was taken from.
    pub fn to_grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(
            2.0 * self.pump_wavelength_nm,
            self.max_wavelength_nm - self.min_wavelength_nm,
            self.n_bins,
        )
    }
}

impl fmt::Display for GridProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid n_bins={} pump_wavelength_nm={} min_wavelength_nm={} max_wavelength_nm={}",
            self.n_bins, self.pump_wavelength_nm, self.min_wavelength_nm, self.max_wavelength_nm
        )
    }
}
