//! Analytic measurement model: detection probabilities per emitted-pair
//! attempt and the efficiency-corrected single and coincidence rates.
//!
//! The source emits at most one pair per attempt, with the probe photon in bin
//! `i` and the herald in its partner bin. The probe crosses the sample arm
//! (transmission `T`, phase `phi`), the herald the reference arm
//! (transmission `R`), the two meet on a 50:50 beam splitter with output
//! ports A and B, and each output photon is detected with efficiency
//! `eta_A` or `eta_B` of its bin. The mode overlap `mu` scales every
//! two-photon interference cross term.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::sample::SampleResponse;
#[allow(unused_imports)]
use num_traits::Float;

const NORM_TOLERANCE: f64 = 1e-12;

/// Photon-pair source: pair probability per attempt and the real, symmetric
/// single-photon spectral amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonSource {
    grid: SpectralGrid,
    pair_probability: f64,
    amplitude: Vec<f64>,
}

impl BiphotonSource {
    pub fn new(grid: SpectralGrid, pair_probability: f64, amplitude: Vec<f64>) -> Result<Self> {
        grid.check_len(amplitude.len())?;
        if !(0.0..1.0).contains(&pair_probability) {
            return Err(Error::InvalidConfig(format!(
                "pair probability {pair_probability} outside [0, 1)"
            )));
        }
        if amplitude.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidConfig(
                "spectral amplitude must be finite and non-negative".into(),
            ));
        }
        let norm: f64 = amplitude.iter().map(|a| a * a).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "spectral amplitude has norm {norm}, expected 1"
            )));
        }
        let n = amplitude.len();
        if (0..n).any(|i| (amplitude[i] - amplitude[n - 1 - i]).abs() > NORM_TOLERANCE) {
            return Err(Error::InvalidConfig(
                "spectral amplitude must be symmetric about the degenerate frequency".into(),
            ));
        }
        Ok(Self {
            grid,
            pair_probability,
            amplitude,
        })
    }

    /// Truncated Gaussian intensity spectrum centred on the degenerate
    /// frequency, with intensity FWHM equal to `fwhm_fraction` of the band.
    pub fn gaussian(grid: SpectralGrid, pair_probability: f64, fwhm_fraction: f64) -> Result<Self> {
        if !(fwhm_fraction > 0.0) {
            return Err(Error::InvalidConfig(
                "spectral FWHM fraction must be positive".into(),
            ));
        }
        let fwhm = fwhm_fraction * grid.spacing() * grid.n_bins() as f64;
        let mut intensity: Vec<f64> = grid
            .detunings()
            .iter()
            .map(|d| (-4.0 * core::f64::consts::LN_2 * (d / fwhm).powi(2)).exp())
            .collect();
        let total: f64 = intensity.iter().sum();
        intensity.iter_mut().for_each(|w| *w /= total);
        let amplitude = intensity.iter().map(|w| w.sqrt()).collect();
        Self::new(grid, pair_probability, amplitude)
    }

    /// Flat spectrum, `|psi_i|^2 = 1 / N`.
    pub fn uniform(grid: SpectralGrid, pair_probability: f64) -> Result<Self> {
        let n = grid.n_bins();
        Self::new(grid, pair_probability, vec![(1.0 / n as f64).sqrt(); n])
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn pair_probability(&self) -> f64 {
        self.pair_probability
    }

    pub fn with_pair_probability(&self, g: f64) -> Result<Self> {
        Self::new(self.grid.clone(), g, self.amplitude.clone())
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    /// `|psi_i|^2`.
    pub fn weight(&self, i: usize) -> f64 {
        self.amplitude[i] * self.amplitude[i]
    }
}

/// Everything before the beam splitter: sample and reference arm
/// transmissions, the sample phase, and the two group delays.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    /// Total sample-arm intensity transmission `T_i = exp(-chi_i - A_i)`.
    pub sample_transmission: Vec<f64>,
    /// Reference-arm intensity transmission `R_i`.
    pub reference_transmission: Vec<f64>,
    /// Phase imparted by the sample, radians.
    pub sample_phase: Vec<f64>,
    /// Scattering loss `chi_i` of the sample arm without any sample.
    pub scattering_loss: Vec<f64>,
    /// Delay stage setting, seconds.
    pub stage_delay: f64,
    /// Group delay of the cuvette, seconds.
    pub cuvette_delay: f64,
}

impl ArmConfig {
    /// Lossless arms, no sample phase, zero delays.
    pub fn lossless(grid: &SpectralGrid) -> Self {
        let n = grid.n_bins();
        Self {
            sample_transmission: vec![1.0; n],
            reference_transmission: vec![1.0; n],
            sample_phase: vec![0.0; n],
            scattering_loss: vec![0.0; n],
            stage_delay: 0.0,
            cuvette_delay: 0.0,
        }
    }

    /// Sample arm holding `sample` on top of the scattering loss.
    pub fn with_sample(
        sample: &SampleResponse,
        scattering_loss: Vec<f64>,
        reference_transmission: Vec<f64>,
        cuvette_delay: f64,
    ) -> Self {
        let sample_transmission = scattering_loss
            .iter()
            .zip(sample.absorbance())
            .map(|(chi, a)| (-chi - a).exp())
            .collect();
        Self {
            sample_transmission,
            reference_transmission,
            sample_phase: sample.phase().to_vec(),
            scattering_loss,
            stage_delay: 0.0,
            cuvette_delay,
        }
    }

    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        for v in [
            &self.sample_transmission,
            &self.reference_transmission,
            &self.sample_phase,
            &self.scattering_loss,
        ] {
            grid.check_len(v.len())?;
        }
        let unit = |v: &[f64]| v.iter().all(|t| (0.0..=1.0).contains(t));
        if !unit(&self.sample_transmission) || !unit(&self.reference_transmission) {
            return Err(Error::InvalidConfig(
                "arm transmissions must lie in [0, 1]".into(),
            ));
        }
        if self
            .scattering_loss
            .iter()
            .any(|c| !(*c >= 0.0) || !c.is_finite())
        {
            return Err(Error::InvalidConfig(
                "scattering loss must be finite and non-negative".into(),
            ));
        }
        if self.sample_phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("sample phase must be finite".into()));
        }
        if !self.stage_delay.is_finite() || !self.cuvette_delay.is_finite() {
            return Err(Error::InvalidConfig("delays must be finite".into()));
        }
        Ok(())
    }

    /// Probe phase of bin `i` relative to the degenerate frequency,
    /// `Phi_i - (w_i - w_0)(tau_DS + tau_C)`. The common `w_0` term is a
    /// global phase and drops out of every probability.
    pub fn probe_phase(&self, grid: &SpectralGrid, i: usize) -> f64 {
        self.sample_phase[i] - grid.detunings()[i] * (self.stage_delay + self.cuvette_delay)
    }
}

/// Everything after the beam splitter.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    /// Net efficiency of port A per bin, in (0, 1].
    pub efficiency_a: Vec<f64>,
    /// Net efficiency of port B per bin, in (0, 1].
    pub efficiency_b: Vec<f64>,
    /// Spatial mode overlap scaling the interference terms, in [0, 1].
    pub mode_overlap: f64,
    /// Dark counts per second per channel.
    pub dark_rate: f64,
    /// Standard deviation of the per-click timing jitter, seconds.
    pub timing_jitter_sigma: f64,
}

/// Default per-click timing jitter (3 ns).
pub const DEFAULT_TIMING_JITTER: f64 = 3e-9;
/// Default dark count rate per channel.
pub const DEFAULT_DARK_RATE: f64 = 100.0;

impl DetectionConfig {
    /// Ideal detectors: unit efficiency, perfect overlap, no noise.
    pub fn ideal(grid: &SpectralGrid) -> Self {
        Self::flat(grid, 1.0, 1.0)
    }

    pub fn flat(grid: &SpectralGrid, efficiency: f64, mode_overlap: f64) -> Self {
        Self {
            efficiency_a: vec![efficiency; grid.n_bins()],
            efficiency_b: vec![efficiency; grid.n_bins()],
            mode_overlap,
            dark_rate: 0.0,
            timing_jitter_sigma: 0.0,
        }
    }

    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        grid.check_len(self.efficiency_a.len())?;
        grid.check_len(self.efficiency_b.len())?;
        let ok = |v: &[f64]| v.iter().all(|e| *e > 0.0 && *e <= 1.0);
        if !ok(&self.efficiency_a) || !ok(&self.efficiency_b) {
            return Err(Error::InvalidConfig(
                "detection efficiencies must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mode_overlap) {
            return Err(Error::InvalidConfig(
                "mode overlap must lie in [0, 1]".into(),
            ));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(Error::InvalidConfig(
                "dark rate must be finite and non-negative".into(),
            ));
        }
        if !(self.timing_jitter_sigma >= 0.0) || !self.timing_jitter_sigma.is_finite() {
            return Err(Error::InvalidConfig(
                "timing jitter must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Full optical path plus the conversion from probabilities to counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementConfig {
    pub source: BiphotonSource,
    pub arms: ArmConfig,
    pub detection: DetectionConfig,
    pub exposure_seconds: f64,
    /// Pair-emission attempts per second; each attempt emits a pair with the
    /// source's pair probability.
    pub pair_generation_rate: f64,
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.source.grid();
        self.arms.validate(grid)?;
        self.detection.validate(grid)?;
        if !(self.exposure_seconds > 0.0) || !self.exposure_seconds.is_finite() {
            return Err(Error::InvalidConfig("exposure must be positive".into()));
        }
        if !(self.pair_generation_rate >= 0.0) || !self.pair_generation_rate.is_finite() {
            return Err(Error::InvalidConfig(
                "pair generation rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.source.grid()
    }

    pub fn with_stage_delay(&self, stage_delay: f64) -> Self {
        let mut c = self.clone();
        c.arms.stage_delay = stage_delay;
        c
    }

    /// Expected number of emission attempts in `duration` seconds.
    pub fn attempts(&self, duration: f64) -> f64 {
        self.pair_generation_rate * duration
    }
}

/// Amplitude of the path in which the probe photon has frequency `i` and the
/// herald frequency `j`: `sqrt(T_i R_j) exp(i phi_i)`.
///
/// The beam splitter adds these paths for bunched pairs and subtracts them
/// for antibunched pairs.
pub fn pair_amplitude(config: &MeasurementConfig, i: usize, j: usize) -> Complex64 {
    let grid = config.grid();
    let arms = &config.arms;
    let modulus = (arms.sample_transmission[i] * arms.reference_transmission[j]).sqrt();
    Complex64::from_polar(modulus, arms.probe_phase(grid, i))
}

/// Per-bin detection tallies in a layout shared by probabilities and counts.
///
/// Joint entries are restricted to the partner diagonal: `aa[i]` and `bb[i]`
/// describe the unordered pair `{i, partner(i)}` and are stored at both ends,
/// while `ab[i]` is the pair with the A click in bin `i` and the B click in
/// `partner(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTallies {
    /// Exactly one click, in port A.
    pub single_a: Vec<f64>,
    /// Exactly one click, in port B.
    pub single_b: Vec<f64>,
    /// Port-A clicks that belong to a coincidence, by the click's own bin.
    pub paired_a: Vec<f64>,
    /// Port-B clicks that belong to a coincidence, by the click's own bin.
    pub paired_b: Vec<f64>,
    pub aa: Vec<f64>,
    pub bb: Vec<f64>,
    pub ab: Vec<f64>,
}

impl DetectionTallies {
    pub fn zeros(n_bins: usize) -> Self {
        Self {
            single_a: vec![0.0; n_bins],
            single_b: vec![0.0; n_bins],
            paired_a: vec![0.0; n_bins],
            paired_b: vec![0.0; n_bins],
            aa: vec![0.0; n_bins],
            bb: vec![0.0; n_bins],
            ab: vec![0.0; n_bins],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.single_a.len()
    }

    /// Clicks in port A and bin `i` regardless of any other click.
    pub fn unconditioned_a(&self) -> Vec<f64> {
        self.single_a
            .iter()
            .zip(&self.paired_a)
            .map(|(s, p)| s + p)
            .collect()
    }

    /// Clicks in port B and bin `i` regardless of any other click.
    pub fn unconditioned_b(&self) -> Vec<f64> {
        self.single_b
            .iter()
            .zip(&self.paired_b)
            .map(|(s, p)| s + p)
            .collect()
    }

    fn fields_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.single_a,
            &mut self.single_b,
            &mut self.paired_a,
            &mut self.paired_b,
            &mut self.aa,
            &mut self.bb,
            &mut self.ab,
        ]
    }

    fn fields(&self) -> [&Vec<f64>; 7] {
        [
            &self.single_a,
            &self.single_b,
            &self.paired_a,
            &self.paired_b,
            &self.aa,
            &self.bb,
            &self.ab,
        ]
    }

    /// Elementwise sum; merging is associative and commutative.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.fields_mut().into_iter().zip(other.fields()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for f in out.fields_mut() {
            f.iter_mut().for_each(|v| *v *= factor);
        }
        out
    }
}

/// Probabilities of every mutually exclusive detection outcome for one
/// emission attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeProbabilities {
    pub tallies: DetectionTallies,
    /// No click at all.
    pub vacuum: f64,
}

impl OutcomeProbabilities {
    /// Sum over all mutually exclusive outcomes, vacuum included.
    pub fn total(&self) -> f64 {
        let t = &self.tallies;
        let half = t.n_bins() / 2;
        let singles: f64 = t.single_a.iter().chain(&t.single_b).sum();
        let bunched: f64 = t.aa[..half].iter().chain(&t.bb[..half]).sum();
        let antibunched: f64 = t.ab.iter().sum();
        self.vacuum + singles + bunched + antibunched
    }
}

/// Computes detection probabilities for one attempt of `config`.
pub fn outcome_probabilities(config: &MeasurementConfig) -> Result<OutcomeProbabilities> {
    config.validate()?;
    let grid = config.grid();
    let n = grid.n_bins();
    let g = config.source.pair_probability();
    let arms = &config.arms;
    let det = &config.detection;
    let mu = det.mode_overlap;
    let (t, r) = (&arms.sample_transmission, &arms.reference_transmission);
    let (ea, eb) = (&det.efficiency_a, &det.efficiency_b);

    let mut tallies = DetectionTallies::zeros(n);
    let mut vacuum = 1.0 - g;
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let p = g * config.source.weight(i);
        let direct = t[i] * r[j];
        let swapped = t[j] * r[i];
        let cross = (direct * swapped).sqrt()
            * (arms.probe_phase(grid, i) - arms.probe_phase(grid, j)).cos();
        let bunched = p * (direct + swapped + 2.0 * mu * cross) / 4.0;
        let antibunched = p * (direct + swapped - 2.0 * mu * cross) / 4.0;
        let one_i = p * ((1.0 - t[j]) * r[i] + t[i] * (1.0 - r[j]));
        let one_j = p * ((1.0 - t[i]) * r[j] + t[j] * (1.0 - r[i]));
        let both_lost = p * ((1.0 - t[i]) * (1.0 - r[j]) + (1.0 - t[j]) * (1.0 - r[i]));

        let aa = bunched * ea[i] * ea[j];
        let bb = bunched * eb[i] * eb[j];
        let ab_i = antibunched * ea[i] * eb[j];
        let ab_j = antibunched * ea[j] * eb[i];
        tallies.aa[i] = aa;
        tallies.aa[j] = aa;
        tallies.bb[i] = bb;
        tallies.bb[j] = bb;
        tallies.ab[i] = ab_i;
        tallies.ab[j] = ab_j;
        tallies.paired_a[i] = aa + ab_i;
        tallies.paired_a[j] = aa + ab_j;
        tallies.paired_b[i] = bb + ab_j;
        tallies.paired_b[j] = bb + ab_i;

        tallies.single_a[i] = bunched * ea[i] * (1.0 - ea[j])
            + antibunched * ea[i] * (1.0 - eb[j])
            + 0.5 * one_i * ea[i];
        tallies.single_a[j] = bunched * ea[j] * (1.0 - ea[i])
            + antibunched * ea[j] * (1.0 - eb[i])
            + 0.5 * one_j * ea[j];
        tallies.single_b[i] = bunched * eb[i] * (1.0 - eb[j])
            + antibunched * eb[i] * (1.0 - ea[j])
            + 0.5 * one_i * eb[i];
        tallies.single_b[j] = bunched * eb[j] * (1.0 - eb[i])
            + antibunched * eb[j] * (1.0 - ea[i])
            + 0.5 * one_j * eb[j];

        vacuum += both_lost
            + 0.5 * one_i * ((1.0 - ea[i]) + (1.0 - eb[i]))
            + 0.5 * one_j * ((1.0 - ea[j]) + (1.0 - eb[j]))
            + bunched * (1.0 - ea[i]) * (1.0 - ea[j])
            + bunched * (1.0 - eb[i]) * (1.0 - eb[j])
            + antibunched * (1.0 - ea[i]) * (1.0 - eb[j])
            + antibunched * (1.0 - ea[j]) * (1.0 - eb[i]);
    }
    Ok(OutcomeProbabilities { tallies, vacuum })
}

/// Per-bin efficiency ratio `eta_B / eta_A`; `None` marks a bin whose ratio
/// could not be formed.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRatio(pub Vec<Option<f64>>);

impl EfficiencyRatio {
    pub fn exact(detection: &DetectionConfig) -> Self {
        Self(
            detection
                .efficiency_b
                .iter()
                .zip(&detection.efficiency_a)
                .map(|(b, a)| Some(b / a))
                .collect(),
        )
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Ratio of unconditioned single detections in port B to port A per bin,
/// which equals `eta_B / eta_A`.
pub fn efficiency_ratio_from_singles(
    singles_a: &[f64],
    singles_b: &[f64],
) -> Result<EfficiencyRatio> {
    if singles_a.len() != singles_b.len() {
        return Err(Error::LengthMismatch {
            expected: singles_a.len(),
            got: singles_b.len(),
        });
    }
    Ok(EfficiencyRatio(
        singles_a
            .iter()
            .zip(singles_b)
            .map(|(&a, &b)| {
                if a > 0.0 && b > 0.0 {
                    Some(b / a)
                } else {
                    None
                }
            })
            .collect(),
    ))
}

/// Efficiency-corrected single and coincidence rates with the raw tallies
/// they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraSet {
    /// Singles rate `S_i`, in port-A efficiency units.
    pub s: Vec<f64>,
    /// Total coincidence rate `C+_i` of the pair `{i, partner(i)}`.
    pub c_plus: Vec<f64>,
    /// Bunched minus antibunched coincidence rate `C-_i`.
    pub c_minus: Vec<f64>,
    /// Poisson variances of the above, valid when the tallies are counts.
    pub s_var: Vec<f64>,
    pub c_plus_var: Vec<f64>,
    pub c_minus_var: Vec<f64>,
    /// False where the efficiency ratio of the bin or its partner is missing.
    pub valid: Vec<bool>,
    pub tallies: DetectionTallies,
    /// Delay stage setting the tallies were recorded at, seconds.
    pub delay: f64,
}

impl SpectraSet {
    pub fn n_bins(&self) -> usize {
        self.s.len()
    }
}

/// Applies the relative-efficiency corrections to raw tallies.
///
/// With `r_i = eta_B,i / eta_A,i` and `j = partner(i)`:
/// `S_i = U_A,i + U_B,i / r_i`,
/// `C+-_i = aa_i + bb_i / (r_i r_j) +- (ab_i / r_j + ab_j / r_i)`.
pub fn corrected_rates(
    tallies: &DetectionTallies,
    ratio: &EfficiencyRatio,
    delay: f64,
) -> Result<SpectraSet> {
    let n = tallies.n_bins();
    if ratio.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: ratio.len(),
        });
    }
    if ratio
        .0
        .iter()
        .flatten()
        .any(|r| !(*r > 0.0) || !r.is_finite())
    {
        return Err(Error::InvalidConfig(
            "efficiency ratios must be positive and finite".into(),
        ));
    }
    let ua = tallies.unconditioned_a();
    let ub = tallies.unconditioned_b();
    let mut out = SpectraSet {
        s: vec![0.0; n],
        c_plus: vec![0.0; n],
        c_minus: vec![0.0; n],
        s_var: vec![0.0; n],
        c_plus_var: vec![0.0; n],
        c_minus_var: vec![0.0; n],
        valid: vec![false; n],
        tallies: tallies.clone(),
        delay,
    };
    for i in 0..n {
        let j = n - 1 - i;
        let (Some(ri), Some(rj)) = (ratio.get(i), ratio.get(j)) else {
            continue;
        };
        out.valid[i] = true;
        out.s[i] = ua[i] + ub[i] / ri;
        out.s_var[i] = ua[i] + ub[i] / (ri * ri);
        let bunched = tallies.aa[i] + tallies.bb[i] / (ri * rj);
        let antibunched = tallies.ab[i] / rj + tallies.ab[j] / ri;
        out.c_plus[i] = bunched + antibunched;
        out.c_minus[i] = bunched - antibunched;
        let var = tallies.aa[i]
            + tallies.bb[i] / (ri * rj).powi(2)
            + tallies.ab[i] / (rj * rj)
            + tallies.ab[j] / (ri * ri);
        out.c_plus_var[i] = var;
        out.c_minus_var[i] = var;
    }
    Ok(out)
}

/// Expected `C-_i` per attempt for every stage delay in `delays` (rows) and
/// every bin (columns), using the exact efficiency ratio.
pub fn hom_interferogram(config: &MeasurementConfig, delays: &[f64]) -> Result<Vec<Vec<f64>>> {
    if delays.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig("delays must be finite".into()));
    }
    let ratio = EfficiencyRatio::exact(&config.detection);
    delays
        .iter()
        .map(|&tau| {
            let probs = outcome_probabilities(&config.with_stage_delay(tau))?;
            Ok(corrected_rates(&probs.tallies, &ratio, tau)?.c_minus)
        })
        .collect()
}

/// Expected counts of one exposure of `config` at its stage delay,
/// corrected with `ratio`.
pub fn expected_spectra(config: &MeasurementConfig, ratio: &EfficiencyRatio) -> Result<SpectraSet> {
    let probs = outcome_probabilities(config)?;
    let counts = probs
        .tallies
        .scaled(config.attempts(config.exposure_seconds));
    corrected_rates(&counts, ratio, config.arms.stage_delay)
}
