//! The four measurement configurations of a calibrated campaign and the
//! optical setups they correspond to.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    expected_spectra, ArmConfig, BiphotonSource, DetectionConfig, EfficiencyRatio,
    MeasurementConfig,
};
use crate::reconstruction::{CampaignSpectra, ScanSpectra};
use crate::sample::SampleResponse;
use crate::simulator::{apply_perturbation, CouplingPerturbation};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Configuration {
    /// Sample under test in the sample arm.
    Sample,
    /// Reference sample in the sample arm.
    Reference,
    /// Reference arm blocked, empty cuvette in the sample arm.
    BlockedReference,
    /// Sample arm blocked.
    BlockedSample,
}

impl Configuration {
    pub const ALL: [Configuration; 4] = [
        Configuration::Sample,
        Configuration::Reference,
        Configuration::BlockedReference,
        Configuration::BlockedSample,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Configuration::Sample => "sample",
            Configuration::Reference => "reference",
            Configuration::BlockedReference => "blocked_reference",
            Configuration::BlockedSample => "blocked_sample",
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown configuration `{s}`")))
    }
}

/// Everything shared by the four configurations of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub source: BiphotonSource,
    pub detection: DetectionConfig,
    /// Scattering loss `chi_i` of the sample arm.
    pub scattering_loss: Vec<f64>,
    /// Reference-arm transmission `R_i` while unblocked.
    pub reference_arm: Vec<f64>,
    pub sample: SampleResponse,
    pub reference: SampleResponse,
    pub sample_cuvette_delay: f64,
    pub reference_cuvette_delay: f64,
    pub exposure_seconds: f64,
    pub pair_generation_rate: f64,
    /// Optional coupling perturbation per configuration, indexed by
    /// [`Configuration::index`].
    pub perturbations: [Option<CouplingPerturbation>; 4],
}

impl Protocol {
    /// Checks the assumptions the calibration relies on: both samples leave
    /// the long-wavelength half untouched.
    pub fn validate(&self) -> Result<()> {
        let grid = self.source.grid();
        for v in [&self.scattering_loss, &self.reference_arm] {
            grid.check_len(v.len())?;
        }
        for (name, s) in [("sample", &self.sample), ("reference", &self.reference)] {
            grid.check_len(s.len())?;
            if !s.is_inert_on_long_half() {
                return Err(Error::InvalidSample(alloc::format!(
                    "{name} must have zero absorbance and phase on the long-wavelength half"
                )));
            }
        }
        for c in Configuration::ALL {
            self.measurement(c)?;
        }
        Ok(())
    }

    /// Optical setup of one configuration at zero stage delay.
    pub fn measurement(&self, configuration: Configuration) -> Result<MeasurementConfig> {
        let grid = self.source.grid();
        let n = grid.n_bins();
        let empty = SampleResponse::transparent(grid);
        let (sample, delay) = match configuration {
            Configuration::Sample => (&self.sample, self.sample_cuvette_delay),
            Configuration::Reference => (&self.reference, self.reference_cuvette_delay),
            Configuration::BlockedReference | Configuration::BlockedSample => (&empty, 0.0),
        };
        let mut arms = ArmConfig::with_sample(
            sample,
            self.scattering_loss.clone(),
            self.reference_arm.clone(),
            delay,
        );
        match configuration {
            Configuration::BlockedReference => arms.reference_transmission = alloc::vec![0.0; n],
            Configuration::BlockedSample => arms.sample_transmission = alloc::vec![0.0; n],
            _ => {}
        }
        let config = MeasurementConfig {
            source: self.source.clone(),
            arms,
            detection: self.detection.clone(),
            exposure_seconds: self.exposure_seconds,
            pair_generation_rate: self.pair_generation_rate,
        };
        config.validate()?;
        match &self.perturbations[configuration.index()] {
            Some(p) => apply_perturbation(&config, p),
            None => Ok(config),
        }
    }

    /// Noiseless expected counts of one configuration over a delay scan,
    /// corrected with the true efficiency ratio.
    pub fn expected_scan(
        &self,
        configuration: Configuration,
        delays: &[f64],
    ) -> Result<ScanSpectra> {
        let config = self.measurement(configuration)?;
        let ratio = EfficiencyRatio::exact(&self.detection);
        let sets = delays
            .iter()
            .map(|&tau| expected_spectra(&config.with_stage_delay(tau), &ratio))
            .collect::<Result<Vec<_>>>()?;
        ScanSpectra::new(sets)
    }

    /// Noiseless expected counts of a full campaign repeat.
    pub fn expected_campaign(&self, delays: &[f64]) -> Result<CampaignSpectra> {
        let [s, r, z, zp] = Configuration::ALL;
        CampaignSpectra::new(
            self.expected_scan(s, delays)?,
            self.expected_scan(r, delays)?,
            self.expected_scan(z, delays)?,
            self.expected_scan(zp, delays)?,
        )
    }

    /// True sample-to-reference transmission ratio on the short half.
    pub fn true_transmission_ratio(&self) -> Vec<f64> {
        let half = self.source.grid().half();
        self.sample.absorbance()[..half]
            .iter()
            .zip(&self.reference.absorbance()[..half])
            .map(|(s, r)| (r - s).exp())
            .collect()
    }

    /// True sample-minus-reference phase on the short half.
    pub fn true_differential_phase(&self) -> Vec<f64> {
        let half = self.source.grid().half();
        self.sample.phase()[..half]
            .iter()
            .zip(&self.reference.phase()[..half])
            .map(|(s, r)| s - r)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::sample::lorentzian_response;

    fn protocol() -> Protocol {
        let grid = SpectralGrid::new(810.0, 155.0, 16).unwrap();
        let n = grid.n_bins();
        Protocol {
            source: BiphotonSource::gaussian(grid.clone(), 0.01, 0.75).unwrap(),
            detection: DetectionConfig::flat(&grid, 0.5, 1.0),
            scattering_loss: alloc::vec![0.1; n],
            reference_arm: alloc::vec![0.9; n],
            sample: SampleResponse::transparent(&grid),
            reference: SampleResponse::transparent(&grid),
            sample_cuvette_delay: 10e-15,
            reference_cuvette_delay: 0.0,
            exposure_seconds: 1.0,
            pair_generation_rate: 1e6,
            perturbations: Default::default(),
        }
    }

    #[test]
    fn blocked_arms() {
        let p = protocol();
        let c0 = p.measurement(Configuration::BlockedReference).unwrap();
        assert!(c0.arms.reference_transmission.iter().all(|&r| r == 0.0));
        assert!(c0
            .arms
            .sample_transmission
            .iter()
            .all(|&t| (t - (-0.1f64).exp()).abs() < 1e-15));
        let c1 = p.measurement(Configuration::BlockedSample).unwrap();
        assert!(c1.arms.sample_transmission.iter().all(|&t| t == 0.0));
        assert!(c1.arms.reference_transmission.iter().all(|&r| r == 0.9));
        let s = p.measurement(Configuration::Sample).unwrap();
        assert_eq!(s.arms.cuvette_delay, 10e-15);
        p.validate().unwrap();
    }

    #[test]
    fn long_half_must_be_inert() {
        let mut p = protocol();
        let grid = p.source.grid().clone();
        p.sample = lorentzian_response(&grid, 850.0, 5.0, 0.5).unwrap();
        assert!(matches!(p.validate(), Err(Error::InvalidSample(_))));
    }

    #[test]
    fn labels_round_trip() {
        for c in Configuration::ALL {
            assert_eq!(c.label().parse::<Configuration>().unwrap(), c);
        }
        assert!("bogus".parse::<Configuration>().is_err());
    }
}
