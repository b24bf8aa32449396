//! Campaign configuration, a TOML document with one table per concern.
//!
//! See `docs/campaign.toml` for an annotated example. Relative file paths
//! are resolved against the directory holding the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use homspec_core::model::{
    BiphotonSource, DetectionConfig, DEFAULT_DARK_RATE, DEFAULT_TIMING_JITTER,
};
use homspec_core::protocol::Protocol;
use homspec_core::reconstruction::{ReconstructionSettings, Weighting, MIN_DELAY_STEPS};
use homspec_core::sample::{flat_response, lorentzian_response};
use homspec_core::simulator::CouplingPerturbation;
use homspec_core::tags::{ProcessorSettings, DEFAULT_ENERGY_TOLERANCE, DEFAULT_WINDOW_NS};
use homspec_core::{Configuration, SampleResponse, SpectralGrid};

use crate::tables::{fs_to_seconds, read_sample, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub grid: GridSection,
    pub source: SourceSection,
    #[serde(default)]
    pub arms: ArmsSection,
    pub detection: DetectionSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub reference: SampleSection,
    pub scan: ScanSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    #[serde(default)]
    pub processing: ProcessingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub center_wavelength_nm: f64,
    pub bandwidth_nm: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    #[default]
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Probability that one emission attempt yields a pair.
    pub pair_probability: f64,
    /// Emission attempts per second.
    pub pair_generation_rate_hz: f64,
    #[serde(default)]
    pub spectrum: Spectrum,
    /// Intensity FWHM of the Gaussian spectrum as a fraction of the band.
    #[serde(default = "default_fwhm_fraction")]
    pub fwhm_fraction: f64,
}

fn default_fwhm_fraction() -> f64 {
    0.75
}

/// A per-bin quantity given either as one number or as one value per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerBin {
    Constant(f64),
    Values(Vec<f64>),
}

impl PerBin {
    pub fn resolve(&self, n_bins: usize, name: &str) -> anyhow::Result<Vec<f64>> {
        match self {
            PerBin::Constant(v) => Ok(vec![*v; n_bins]),
            PerBin::Values(v) => {
                ensure!(
                    v.len() == n_bins,
                    "{name} has {} values but the grid has {n_bins} bins",
                    v.len()
                );
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsSection {
    /// Scattering loss of the sample arm, a fraction in [0, 1].
    #[serde(default = "zero")]
    pub scattering_loss: PerBin,
    /// Reference-arm transmission while unblocked.
    #[serde(default = "one")]
    pub reference_transmission: PerBin,
}

fn zero() -> PerBin {
    PerBin::Constant(0.0)
}

fn one() -> PerBin {
    PerBin::Constant(1.0)
}

impl Default for ArmsSection {
    fn default() -> Self {
        Self {
            scattering_loss: zero(),
            reference_transmission: one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub efficiency_a: PerBin,
    pub efficiency_b: PerBin,
    #[serde(default = "default_overlap")]
    pub mode_overlap: f64,
    #[serde(default = "default_dark_rate")]
    pub dark_rate_hz: f64,
    #[serde(default = "default_jitter")]
    pub timing_jitter_ns: f64,
}

fn default_overlap() -> f64 {
    1.0
}

fn default_dark_rate() -> f64 {
    DEFAULT_DARK_RATE
}

fn default_jitter() -> f64 {
    (DEFAULT_TIMING_JITTER * 1e12).round() / 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SampleModel {
    None,
    Flat {
        transmittance: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Lorentzian {
        center_nm: f64,
        fwhm_nm: f64,
        /// Peak natural-log absorbance; the peak phase is a quarter of it.
        peak_absorbance: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSection {
    #[serde(flatten)]
    pub model: SampleModel,
    #[serde(default)]
    pub cuvette_delay_fs: f64,
    /// Zero the built-in models on the long-wavelength half, as the
    /// calibration requires. Responses read from files are used as given.
    #[serde(default = "yes")]
    pub restrict_to_short_half: bool,
}

fn yes() -> bool {
    true
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            model: SampleModel::None,
            cuvette_delay_fs: 0.0,
            restrict_to_short_half: true,
        }
    }
}

impl SampleSection {
    pub fn resolve(&self, grid: &SpectralGrid, base_dir: &Path) -> anyhow::Result<SampleResponse> {
        let built = match &self.model {
            SampleModel::None => SampleResponse::transparent(grid),
            SampleModel::Flat {
                transmittance,
                phase_rad,
            } => flat_response(grid, *transmittance, *phase_rad)?,
            SampleModel::Lorentzian {
                center_nm,
                fwhm_nm,
                peak_absorbance,
            } => lorentzian_response(grid, *center_nm, *fwhm_nm, *peak_absorbance)?,
            SampleModel::File { path } => {
                let path = base_dir.join(path);
                let file = fs::File::open(&path)
                    .with_context(|| format!("opening sample file {}", path.display()))?;
                let table = read_sample(file)
                    .with_context(|| format!("reading sample file {}", path.display()))?;
                return table.to_response(grid).with_context(|| {
                    format!("sample file {} does not match the grid", path.display())
                });
            }
        };
        Ok(if self.restrict_to_short_half {
            built.restricted_to_short_half()
        } else {
            built
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub start_fs: f64,
    pub step_fs: f64,
    pub count: usize,
    pub exposure_seconds: f64,
}

impl ScanSection {
    pub fn delays_fs(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start_fs + self.step_fs * k as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(default = "one_repeat")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one_repeat() -> usize {
    1
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingChoice {
    #[default]
    Uniform,
    Poisson,
}

impl From<WeightingChoice> for Weighting {
    fn from(w: WeightingChoice) -> Self {
        match w {
            WeightingChoice::Uniform => Weighting::Uniform,
            WeightingChoice::Poisson => Weighting::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingSection {
    #[serde(default = "default_window")]
    pub coincidence_window_ns: u64,
    #[serde(default = "default_tolerance")]
    pub energy_tolerance_bins: usize,
    #[serde(default)]
    pub weighting: WeightingChoice,
}

fn default_window() -> u64 {
    DEFAULT_WINDOW_NS
}

fn default_tolerance() -> usize {
    DEFAULT_ENERGY_TOLERANCE
}

impl Default for ProcessingSection {
    fn default() -> Self {
        Self {
            coincidence_window_ns: DEFAULT_WINDOW_NS,
            energy_tolerance_bins: DEFAULT_ENERGY_TOLERANCE,
            weighting: WeightingChoice::Uniform,
        }
    }
}

/// Coupling-efficiency perturbation applied to selected configurations:
/// either a linear tilt or explicit per-bin factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub configurations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub write_events: bool,
    #[serde(default)]
    pub event_format: EventFormat,
}

fn default_directory() -> PathBuf {
    PathBuf::from("homspec-out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            write_events: true,
            event_format: EventFormat::Binary,
        }
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses and validates a configuration; `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut config: Self = toml::from_str(text)?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            center_wavelength_nm: self.grid.center_wavelength_nm,
            bandwidth_nm: self.grid.bandwidth_nm,
            n_bins: self.grid.n_bins,
        }
    }

    pub fn grid(&self) -> anyhow::Result<SpectralGrid> {
        Ok(self.grid_spec().build()?)
    }

    pub fn processor_settings(&self) -> ProcessorSettings {
        ProcessorSettings {
            coincidence_window_ns: self.processing.coincidence_window_ns,
            energy_tolerance_bins: self.processing.energy_tolerance_bins,
        }
    }

    pub fn reconstruction_settings(&self) -> ReconstructionSettings {
        ReconstructionSettings {
            weighting: self.processing.weighting.into(),
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        ensure!(
            self.scan.count >= MIN_DELAY_STEPS,
            "scan.count must be at least {MIN_DELAY_STEPS}, got {}",
            self.scan.count
        );
        ensure!(
            self.scan.step_fs > 0.0 && self.scan.step_fs.is_finite(),
            "scan.step_fs must be positive"
        );
        ensure!(
            self.scan.start_fs.is_finite(),
            "scan.start_fs must be finite"
        );
        ensure!(
            self.scan.exposure_seconds > 0.0 && self.scan.exposure_seconds.is_finite(),
            "scan.exposure_seconds must be positive"
        );
        ensure!(
            self.campaign.repeats >= 1,
            "campaign.repeats must be at least 1"
        );
        ensure!(
            self.grid.n_bins <= u16::MAX as usize + 1,
            "grid.n_bins exceeds the event format's bin range"
        );
        for (name, s) in [("sample", &self.sample), ("reference", &self.reference)] {
            if let SampleModel::File { path } = &s.model {
                let full = self.base_dir.join(path);
                ensure!(
                    full.is_file(),
                    "{name} file {} does not exist",
                    full.display()
                );
            }
        }
        if let Some(p) = &self.perturbation {
            ensure!(
                p.tilt.is_some() != p.factors.is_some(),
                "perturbation needs exactly one of `tilt` or `factors`"
            );
            for c in &p.configurations {
                c.parse::<Configuration>()?;
            }
        }
        self.protocol(1.0)?.validate()?;
        self.processor_settings().validate()?;
        Ok(())
    }

    /// The shared optical setup. `scale` multiplies the emission attempt
    /// rate and the dark rate, so every count scales by the same factor.
    pub fn protocol(&self, scale: f64) -> anyhow::Result<Protocol> {
        if !(scale > 0.0) || !scale.is_finite() {
            bail!("scale must be positive, got {scale}");
        }
        let grid = self.grid()?;
        let n = grid.n_bins();
        let source = match self.source.spectrum {
            Spectrum::Gaussian => BiphotonSource::gaussian(
                grid.clone(),
                self.source.pair_probability,
                self.source.fwhm_fraction,
            )?,
            Spectrum::Uniform => {
                BiphotonSource::uniform(grid.clone(), self.source.pair_probability)?
            }
        };
        let d = &self.detection;
        let detection = DetectionConfig {
            efficiency_a: d.efficiency_a.resolve(n, "detection.efficiency_a")?,
            efficiency_b: d.efficiency_b.resolve(n, "detection.efficiency_b")?,
            mode_overlap: d.mode_overlap,
            dark_rate: d.dark_rate_hz * scale,
            timing_jitter_sigma: d.timing_jitter_ns / 1e9,
        };
        let mut perturbations: [Option<CouplingPerturbation>; 4] = Default::default();
        if let Some(p) = &self.perturbation {
            let pert = match (&p.tilt, &p.factors) {
                (Some(t), _) => CouplingPerturbation::tilt(n, *t)?,
                (None, Some(f)) => {
                    ensure!(
                        f.len() == n,
                        "perturbation.factors has {} values for {n} bins",
                        f.len()
                    );
                    CouplingPerturbation::new(f.clone())?
                }
                (None, None) => bail!("perturbation needs `tilt` or `factors`"),
            };
            for c in &p.configurations {
                perturbations[c.parse::<Configuration>()?.index()] = Some(pert.clone());
            }
        }
        Ok(Protocol {
            source,
            detection,
            scattering_loss: self
                .arms
                .scattering_loss
                .resolve(n, "arms.scattering_loss")?,
            reference_arm: self
                .arms
                .reference_transmission
                .resolve(n, "arms.reference_transmission")?,
            sample: self
                .sample
                .resolve(&grid, &self.base_dir)
                .context("resolving [sample]")?,
            reference: self
                .reference
                .resolve(&grid, &self.base_dir)
                .context("resolving [reference]")?,
            sample_cuvette_delay: fs_to_seconds(self.sample.cuvette_delay_fs),
            reference_cuvette_delay: fs_to_seconds(self.reference.cuvette_delay_fs),
            exposure_seconds: self.scan.exposure_seconds,
            pair_generation_rate: self.source.pair_generation_rate_hz * scale,
            perturbations,
        })
    }
}
