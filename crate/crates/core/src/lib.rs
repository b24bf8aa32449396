//! Model, Monte Carlo generator and estimators for simultaneous absorption and
//! phase spectroscopy with spectrally resolved Hong-Ou-Mandel interference.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the campaign runner
//! and the command line live in the `homspec` crate.
//!
//! Bins are indexed from zero in order of increasing wavelength, so the
//! energy-conservation partner of bin `i` is `n_bins - 1 - i` and bins
//! `0..n_bins / 2` form the short-wavelength (high-frequency) half.

#![no_std]
#![deny(rust_2018_idioms)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod grid;
pub mod model;
pub mod protocol;
pub mod reconstruction;
pub mod sample;
pub mod simulator;
pub mod stats;
pub mod tags;

pub use error::{Error, Result};
pub use grid::SpectralGrid;
pub use model::{
    ArmConfig, BiphotonSource, DetectionConfig, DetectionTallies, EfficiencyRatio,
    MeasurementConfig, OutcomeProbabilities, SpectraSet,
};
pub use protocol::Configuration;
pub use reconstruction::{CampaignSpectra, MaskedSeries, ReconstructionResult, ScanSpectra};
pub use sample::SampleResponse;
pub use simulator::{Channel, ClickEvent, CouplingPerturbation, ExposureRecord};
pub use tags::{ProcessingReport, ProcessorSettings, RawSpectra};
