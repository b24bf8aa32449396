//! Monte Carlo generation of time-tagged click streams.
//!
//! Emission attempts form a Poisson process, so every detection outcome of
//! [`OutcomeProbabilities`] is itself an independent Poisson process with rate
//! `attempt_rate * p(outcome)`. The generator draws the count of each outcome
//! directly and places the events uniformly in time, which is distributed
//! identically to sampling every attempt but only touches detected photons.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::{ChaCha12Rng, ChaCha8Rng};
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::model::{outcome_probabilities, MeasurementConfig};
use crate::stats::mix64;
#[allow(unused_imports)]
use num_traits::Float;

/// Output port of the beam splitter a click was recorded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Channel {
    A = 0,
    B = 1,
}

impl Channel {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Channel::A),
            1 => Some(Channel::B),
            _ => None,
        }
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClickEvent {
    /// Nanoseconds since the start of the exposure.
    pub timestamp_ns: u64,
    pub channel: Channel,
    pub bin: u16,
}

impl Ord for ClickEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.timestamp_ns, self.channel, self.bin).cmp(&(
            other.timestamp_ns,
            other.channel,
            other.bin,
        ))
    }
}

impl PartialOrd for ClickEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A simulated exposure: provenance plus the canonical, time-ordered events.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureRecord {
    pub config_hash: u64,
    pub seed: u64,
    pub n_bins: usize,
    pub duration_ns: u64,
    /// Delay stage setting of the exposure, seconds.
    pub stage_delay: f64,
    pub events: Vec<ClickEvent>,
}

/// Where a simulated click came from. Only the simulator knows this; it is
/// kept for validating the post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventOrigin {
    /// Both photons of emitted pair `id` were detected.
    Pair(u64),
    /// A lone detected photon.
    Single,
    Dark,
}

/// Multiplicative coupling-efficiency factor per bin, applied to both ports.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPerturbation {
    factors: Vec<f64>,
}

impl CouplingPerturbation {
    pub fn new(factors: Vec<f64>) -> Result<Self> {
        if let Some(i) = factors.iter().position(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "coupling factor in bin {i} must be finite and non-negative"
            )));
        }
        Ok(Self { factors })
    }

    pub fn identity(n_bins: usize) -> Self {
        Self {
            factors: alloc::vec![1.0; n_bins],
        }
    }

    /// Linear tilt across the band: `1 - tilt` at the first bin rising to
    /// `1 + tilt` at the last.
    pub fn tilt(n_bins: usize, tilt: f64) -> Result<Self> {
        let span = (n_bins.max(2) - 1) as f64;
        Self::new(
            (0..n_bins)
                .map(|i| 1.0 + tilt * (2.0 * i as f64 / span - 1.0))
                .collect(),
        )
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }
}

/// Scales both ports' detection efficiencies by the perturbation.
pub fn apply_perturbation(
    config: &MeasurementConfig,
    perturbation: &CouplingPerturbation,
) -> Result<MeasurementConfig> {
    config.grid().check_len(perturbation.factors.len())?;
    let mut out = config.clone();
    for (k, (a, b)) in perturbation.factors.iter().zip(
        out.detection
            .efficiency_a
            .iter_mut()
            .zip(out.detection.efficiency_b.iter_mut()),
    ) {
        *a *= k;
        *b *= k;
    }
    out.validate()?;
    Ok(out)
}

/// Stable hash of every numeric parameter of a configuration.
pub fn config_hash(config: &MeasurementConfig) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C908u64;
    let mut feed = |v: f64| h = mix64(h ^ v.to_bits()).wrapping_add(0x9E37_79B9_7F4A_7C15);
    feed(config.grid().n_bins() as f64);
    feed(config.grid().pump_frequency());
    feed(config.grid().spacing());
    feed(config.source.pair_probability());
    config.source.amplitude().iter().for_each(|&v| feed(v));
    let arms = &config.arms;
    for v in [
        &arms.sample_transmission,
        &arms.reference_transmission,
        &arms.sample_phase,
        &arms.scattering_loss,
    ] {
        v.iter().for_each(|&x| feed(x));
    }
    feed(arms.stage_delay);
    feed(arms.cuvette_delay);
    let det = &config.detection;
    det.efficiency_a
        .iter()
        .chain(&det.efficiency_b)
        .for_each(|&x| feed(x));
    feed(det.mode_overlap);
    feed(det.dark_rate);
    feed(det.timing_jitter_sigma);
    feed(config.exposure_seconds);
    feed(config.pair_generation_rate);
    h
}

/// Per-exposure seed from a master seed and the exposure's position in a
/// campaign. The master seed keys a ChaCha12 generator and the packed
/// `(configuration, repeat, delay)` triple selects its stream, so every
/// exposure draws from an independent, reproducible sequence.
pub fn derive_seed(master: u64, configuration: u32, repeat: u32, delay_index: u32) -> u64 {
    debug_assert!(repeat < (1 << 24) && delay_index < (1 << 24));
    let counter = ((configuration as u64) << 48) | ((repeat as u64) << 24) | delay_index as u64;
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    rng.set_stream(counter);
    rng.next_u64()
}

/// Simulates one exposure of `duration` seconds.
pub fn simulate_exposure(
    config: &MeasurementConfig,
    duration: f64,
    seed: u64,
) -> Result<ExposureRecord> {
    let (record, _) = simulate_exposure_labeled(config, duration, seed)?;
    Ok(record)
}

/// Like [`simulate_exposure`] but also returns the origin of every event,
/// aligned with `record.events`.
pub fn simulate_exposure_labeled(
    config: &MeasurementConfig,
    duration: f64,
    seed: u64,
) -> Result<(ExposureRecord, Vec<EventOrigin>)> {
    config.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidConfig(
            "exposure duration must be positive".into(),
        ));
    }
    let n = config.grid().n_bins();
    if n > u16::MAX as usize + 1 {
        return Err(Error::InvalidConfig(
            "bin index does not fit the event format".into(),
        ));
    }
    let probs = outcome_probabilities(config)?;
    let t = &probs.tallies;
    let attempts = config.attempts(duration);
    let duration_ns = (duration * 1e9).round() as u64;

    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        jitter: if config.detection.timing_jitter_sigma > 0.0 {
            Normal::new(0.0, config.detection.timing_jitter_sigma * 1e9).ok()
        } else {
            None
        },
        duration_ns,
        span_ns: duration * 1e9,
        out: Vec::new(),
        next_pair: 0,
    };

    for (channel, probs) in [(Channel::A, &t.single_a), (Channel::B, &t.single_b)] {
        for (bin, &p) in probs.iter().enumerate() {
            for _ in 0..gen.poisson(attempts * p) {
                let t0 = gen.arrival();
                gen.click(t0, channel, bin, EventOrigin::Single);
            }
        }
    }
    for (first, second, joint, bins) in [
        (Channel::A, Channel::A, &t.aa, n / 2),
        (Channel::B, Channel::B, &t.bb, n / 2),
        (Channel::A, Channel::B, &t.ab, n),
    ] {
        for (bin, &p) in joint.iter().take(bins).enumerate() {
            for _ in 0..gen.poisson(attempts * p) {
                let t0 = gen.arrival();
                let id = gen.next_pair;
                gen.next_pair += 1;
                gen.click(t0, first, bin, EventOrigin::Pair(id));
                gen.click(t0, second, n - 1 - bin, EventOrigin::Pair(id));
            }
        }
    }
    let dark_mean = config.detection.dark_rate * duration;
    for channel in [Channel::A, Channel::B] {
        for _ in 0..gen.poisson(dark_mean) {
            let t0 = gen.arrival();
            let bin = gen.rng.random_range(0..n);
            gen.place(t0, channel, bin, EventOrigin::Dark);
        }
    }

    let mut labeled = gen.out;
    labeled.sort_by_key(|a| a.0);
    let (events, origins) = labeled.into_iter().unzip();
    Ok((
        ExposureRecord {
            config_hash: config_hash(config),
            seed,
            n_bins: n,
            duration_ns,
            stage_delay: config.arms.stage_delay,
            events,
        },
        origins,
    ))
}

struct Generator {
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    duration_ns: u64,
    span_ns: f64,
    out: Vec<(ClickEvent, EventOrigin)>,
    next_pair: u64,
}

impl Generator {
    fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) {
            return 0;
        }
        match Poisson::new(mean) {
            Ok(d) => d.sample(&mut self.rng) as u64,
            Err(_) => 0,
        }
    }

    fn arrival(&mut self) -> f64 {
        self.rng.random::<f64>() * self.span_ns
    }

    /// Records a photon click with timing jitter; clicks jittered outside the
    /// exposure are lost.
    fn click(&mut self, t_ns: f64, channel: Channel, bin: usize, origin: EventOrigin) {
        let jitter = match &self.jitter {
            Some(d) => d.sample(&mut self.rng),
            None => 0.0,
        };
        self.place(t_ns + jitter, channel, bin, origin);
    }

    fn place(&mut self, t_ns: f64, channel: Channel, bin: usize, origin: EventOrigin) {
        if t_ns < 0.0 {
            return;
        }
        let ts = t_ns.floor() as u64;
        if ts >= self.duration_ns {
            return;
        }
        self.out.push((
            ClickEvent {
                timestamp_ns: ts,
                channel,
                bin: bin as u16,
            },
            origin,
        ));
    }
}
