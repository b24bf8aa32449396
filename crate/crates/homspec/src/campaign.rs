//! The four-configuration delay-scan protocol run end to end: simulation,
//! tag processing, per-scan spectra, reconstruction and the output tree.
//!
//! Every exposure is identified by `(configuration, repeat, delay index)` and
//! seeded with [`exposure_seed`], so results do not depend on scheduling or
//! on the number of worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use rayon::prelude::*;
use serde::Serialize;

use homspec_core::model::EfficiencyRatio;
use homspec_core::protocol::Protocol;
use homspec_core::reconstruction::{
    aggregate_repeats, reconstruct, CampaignSpectra, ReconstructionResult, ReconstructionSettings,
    ScanSpectra, Weighting,
};
use homspec_core::simulator::{derive_seed, simulate_exposure, ClickEvent, ExposureRecord};
use homspec_core::tags::{estimate_efficiency_ratio, ProcessingReport, RawSpectra, TagProcessor};
use homspec_core::{Configuration, ProcessorSettings, SpectralGrid};

use crate::config::{CampaignConfig, EventFormat};
use crate::error::FormatResult;
use crate::events::{write_binary, write_csv, EventHeader};
use crate::manifest::{Manifest, Status};
use crate::tables::{
    fs_to_seconds, write_interferogram, write_joint, write_result, write_sample, write_spectra,
    GridSpec, ScanFile,
};

/// A failure tagged with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {error:#}")]
pub struct StageError {
    pub stage: &'static str,
    pub error: anyhow::Error,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}

/// Seed of one exposure, from the master seed and its campaign coordinates.
pub fn exposure_seed(
    master: u64,
    configuration: Configuration,
    repeat: u32,
    delay_index: u32,
) -> u64 {
    derive_seed(master, configuration.index() as u32, repeat, delay_index)
}

/// Overrides supplied on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            output: None,
            parallelism: None,
            scale: 1.0,
        }
    }
}

/// Everything needed to run exposures, resolved once from a configuration.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: CampaignConfig,
    pub protocol: Protocol,
    pub grid: SpectralGrid,
    pub master_seed: u64,
    pub scale: f64,
    pub delays_fs: Vec<f64>,
}

impl Plan {
    pub fn new(config: &CampaignConfig, seed: Option<u64>, scale: f64) -> anyhow::Result<Self> {
        let mut config = config.clone();
        if let Some(s) = seed {
            config.campaign.seed = s;
        }
        Ok(Self {
            protocol: config.protocol(scale)?,
            grid: config.grid()?,
            master_seed: config.campaign.seed,
            scale,
            delays_fs: config.scan.delays_fs(),
            config,
        })
    }

    pub fn simulate(
        &self,
        configuration: Configuration,
        repeat: u32,
        delay_index: u32,
    ) -> anyhow::Result<(EventHeader, ExposureRecord)> {
        let delay_fs = *self.delays_fs.get(delay_index as usize).with_context(|| {
            format!(
                "delay index {delay_index} outside the scan of {}",
                self.delays_fs.len()
            )
        })?;
        ensure!(
            (repeat as usize) < self.config.campaign.repeats,
            "repeat {repeat} outside the campaign"
        );
        let mc = self
            .protocol
            .measurement(configuration)?
            .with_stage_delay(fs_to_seconds(delay_fs));
        let seed = exposure_seed(self.master_seed, configuration, repeat, delay_index);
        let record = simulate_exposure(&mc, self.config.scan.exposure_seconds, seed)?;
        Ok((EventHeader::for_record(&record, delay_fs), record))
    }
}

/// Runs the tag processor over a stream of events and checks conservation.
pub fn process_stream<I>(
    events: I,
    grid: &SpectralGrid,
    settings: ProcessorSettings,
) -> anyhow::Result<(RawSpectra, ProcessingReport)>
where
    I: IntoIterator<Item = FormatResult<ClickEvent>>,
{
    let mut p = TagProcessor::new(grid, settings)?;
    for e in events {
        p.push(e?)?;
    }
    let (raw, report) = p.finish()?;
    if !report.is_conserved() {
        bail!("event conservation violated:\n{report}");
    }
    Ok((raw, report))
}

pub fn write_events_file(
    path: &Path,
    format: EventFormat,
    header: &EventHeader,
    events: &[ClickEvent],
) -> anyhow::Result<()> {
    let w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    match format {
        EventFormat::Binary => write_binary(w, header, events),
        EventFormat::Csv => write_csv(w, header, events),
    }
    .with_context(|| format!("writing {}", path.display()))
}

pub fn event_file_name(format: EventFormat, delay_index: u32) -> String {
    match format {
        EventFormat::Binary => format!("d{delay_index:03}.hev"),
        EventFormat::Csv => format!("d{delay_index:03}.csv"),
    }
}

/// Processing outcome of one exposure.
#[derive(Debug, Clone)]
pub struct ExposureSummary {
    pub configuration: Configuration,
    pub repeat: u32,
    pub delay_index: u32,
    pub report: ProcessingReport,
}

/// Simulated and processed campaign, before anything but event files is written.
#[derive(Debug, Clone)]
pub struct CampaignData {
    /// One scan per (repeat, configuration), repeat-major.
    pub scans: Vec<ScanFile>,
    pub scan_reports: Vec<ProcessingReport>,
    pub exposures: Vec<ExposureSummary>,
    /// Kept-pair joint spectra pooled over repeats and delays.
    pub joint: BTreeMap<Configuration, BTreeMap<(u16, u16), u64>>,
}

/// Simulates and processes every exposure. Event files are written below
/// `event_dir` when it is given.
pub fn simulate_campaign(
    plan: &Plan,
    event_dir: Option<&Path>,
    threads: Option<usize>,
) -> Result<CampaignData, StageError> {
    let repeats = plan.config.campaign.repeats as u32;
    let n_delays = plan.delays_fs.len() as u32;
    let jobs: Vec<(u32, Configuration, u32)> = (0..repeats)
        .flat_map(|r| {
            Configuration::ALL
                .into_iter()
                .flat_map(move |c| (0..n_delays).map(move |k| (r, c, k)))
        })
        .collect();
    let format = plan.config.output.event_format;
    if let Some(dir) = event_dir {
        for r in 0..repeats {
            for c in Configuration::ALL {
                let d = dir.join(format!("r{r:02}")).join(c.label());
                fs::create_dir_all(&d)
                    .with_context(|| format!("creating {}", d.display()))
                    .stage("simulate")?;
            }
        }
    }
    let settings = plan.config.processor_settings();
    let run_job = |&(r, c, k): &(u32, Configuration, u32)| -> Result<(RawSpectra, ProcessingReport), StageError> {
        let (header, record) = plan
            .simulate(c, r, k)
            .with_context(|| format!("{c} repeat {r} delay {k}"))
            .stage("simulate")?;
        if let Some(dir) = event_dir {
            let path = dir.join(format!("r{r:02}")).join(c.label()).join(event_file_name(format, k));
            write_events_file(&path, format, &header, &record.events).stage("simulate")?;
        }
        process_stream(record.events.into_iter().map(Ok), &plan.grid, settings)
            .with_context(|| format!("{c} repeat {r} delay {k}"))
            .stage("process")
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(anyhow::Error::from)
        .stage("simulate")?;
    let outcomes: Vec<(RawSpectra, ProcessingReport)> =
        pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>, _>>())?;

    let grid_spec = plan.config.grid_spec();
    let mut data = CampaignData {
        scans: vec![],
        scan_reports: vec![],
        exposures: vec![],
        joint: BTreeMap::new(),
    };
    let mut outcomes = outcomes.into_iter();
    for r in 0..repeats {
        for c in Configuration::ALL {
            let mut scan = ScanFile {
                grid: grid_spec,
                configuration: c,
                repeat: r,
                delays_fs: plan.delays_fs.clone(),
                spectra: Vec::with_capacity(n_delays as usize),
            };
            let mut scan_report = ProcessingReport::default();
            let joint = data.joint.entry(c).or_default();
            for k in 0..n_delays {
                let (mut raw, report) = outcomes.next().expect("one outcome per job");
                for map in [&mut raw.joint_aa, &mut raw.joint_bb, &mut raw.joint_ab] {
                    for (key, v) in std::mem::take(map) {
                        *joint.entry(key).or_default() += v;
                    }
                }
                scan_report.merge(&report);
                data.exposures.push(ExposureSummary {
                    configuration: c,
                    repeat: r,
                    delay_index: k,
                    report,
                });
                scan.spectra.push(raw);
            }
            data.scans.push(scan);
            data.scan_reports.push(scan_report);
        }
    }
    Ok(data)
}

/// Efficiency ratio pooled over the click histograms of every scan.
pub fn pooled_ratio(scans: &[ScanFile]) -> anyhow::Result<EfficiencyRatio> {
    let n = scans.first().context("no scans")?.grid.n_bins;
    let (mut a, mut b) = (vec![0u64; n], vec![0u64; n]);
    for s in scans {
        let (sa, sb) = s.clicks();
        ensure!(sa.len() == n, "scans disagree on the number of bins");
        a.iter_mut().zip(&sa).for_each(|(x, y)| *x += y);
        b.iter_mut().zip(&sb).for_each(|(x, y)| *x += y);
    }
    Ok(estimate_efficiency_ratio(&a, &b)?)
}

/// Reconstruction of a set of scans, with the intermediate products that
/// are written next to the result.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: GridSpec,
    pub delays_fs: Vec<f64>,
    pub weighting: Weighting,
    pub ratio: EfficiencyRatio,
    pub per_repeat: Vec<ReconstructionResult>,
    pub combined: ReconstructionResult,
    /// Mean corrected `C-` over repeats, per configuration, rows = delays.
    pub interferograms: Vec<(Configuration, Vec<Vec<f64>>)>,
}

/// Groups scans by repeat, pools the efficiency ratio over all of them,
/// reconstructs each repeat and aggregates.
pub fn reconstruct_scans(
    scans: &[ScanFile],
    settings: &ReconstructionSettings,
) -> anyhow::Result<Reconstruction> {
    let first = scans.first().context("no spectra given")?;
    let mut by_repeat: BTreeMap<u32, [Option<&ScanFile>; 4]> = BTreeMap::new();
    for s in scans {
        ensure!(
            s.grid == first.grid,
            "repeat {} {} was recorded on a different grid",
            s.repeat,
            s.configuration
        );
        ensure!(
            s.delays_fs == first.delays_fs,
            "repeat {} {} has a different delay axis",
            s.repeat,
            s.configuration
        );
        let slot = &mut by_repeat.entry(s.repeat).or_default()[s.configuration.index()];
        ensure!(
            slot.is_none(),
            "duplicate spectra for repeat {} {}",
            s.repeat,
            s.configuration
        );
        *slot = Some(s);
    }
    let grid = first.grid.build()?;
    let ratio = pooled_ratio(scans)?;
    let n_delays = first.delays_fs.len();
    let mut interferograms: Vec<(Configuration, Vec<Vec<f64>>)> = Configuration::ALL
        .into_iter()
        .map(|c| (c, vec![vec![0.0; grid.n_bins()]; n_delays]))
        .collect();
    let mut per_repeat = Vec::new();
    for (repeat, set) in &by_repeat {
        let mut spectra = Vec::with_capacity(4);
        for c in Configuration::ALL {
            let scan = set[c.index()]
                .with_context(|| format!("repeat {repeat} lacks the {c} configuration"))?;
            let sets = scan.corrected(&ratio)?;
            for (row, s) in interferograms[c.index()].1.iter_mut().zip(&sets) {
                row.iter_mut().zip(&s.c_minus).for_each(|(x, y)| *x += y);
            }
            spectra.push(ScanSpectra::new(sets)?);
        }
        let [s, r, z, zp]: [ScanSpectra; 4] = spectra.try_into().expect("four configurations");
        let campaign = CampaignSpectra::new(s, r, z, zp)?;
        per_repeat.push(
            reconstruct(&campaign, &grid, settings).with_context(|| format!("repeat {repeat}"))?,
        );
    }
    let m = by_repeat.len() as f64;
    for (_, rows) in &mut interferograms {
        rows.iter_mut().flatten().for_each(|v| *v /= m);
    }
    Ok(Reconstruction {
        grid: first.grid,
        delays_fs: first.delays_fs.clone(),
        weighting: settings.weighting,
        ratio,
        combined: aggregate_repeats(&per_repeat)?,
        per_repeat,
        interferograms,
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Serialize)]
struct MaskCounts {
    transmission: usize,
    singles_only: usize,
    phase: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    repeats: usize,
    n_bins: usize,
    center_wavelength_nm: f64,
    bandwidth_nm: f64,
    delay_steps: usize,
    weighting: &'static str,
    cuvette_delay_sample_fs: Option<f64>,
    cuvette_delay_sample_stderr_fs: Option<f64>,
    cuvette_delay_reference_fs: Option<f64>,
    cuvette_delay_reference_stderr_fs: Option<f64>,
    cuvette_delay_sample_per_repeat_fs: Vec<Option<f64>>,
    cuvette_delay_reference_per_repeat_fs: Vec<Option<f64>>,
    reduced_chi2_sample: Option<f64>,
    reduced_chi2_reference: Option<f64>,
    result_bins: usize,
    masked_bins: MaskCounts,
    efficiency_ratio_masked_bins: usize,
}

impl Reconstruction {
    fn summary(&self) -> Summary {
        let c = &self.combined;
        let fs = |v: f64| finite(v * 1e15);
        let masked = |s: &homspec_core::MaskedSeries| s.len() - s.n_valid();
        Summary {
            repeats: c.repeats,
            n_bins: self.grid.n_bins,
            center_wavelength_nm: self.grid.center_wavelength_nm,
            bandwidth_nm: self.grid.bandwidth_nm,
            delay_steps: self.delays_fs.len(),
            weighting: match self.weighting {
                Weighting::Uniform => "uniform",
                Weighting::Poisson => "poisson",
            },
            cuvette_delay_sample_fs: fs(c.cuvette_delay_sample),
            cuvette_delay_sample_stderr_fs: fs(c.cuvette_delay_sample_stderr),
            cuvette_delay_reference_fs: fs(c.cuvette_delay_reference),
            cuvette_delay_reference_stderr_fs: fs(c.cuvette_delay_reference_stderr),
            cuvette_delay_sample_per_repeat_fs: self
                .per_repeat
                .iter()
                .map(|r| fs(r.cuvette_delay_sample))
                .collect(),
            cuvette_delay_reference_per_repeat_fs: self
                .per_repeat
                .iter()
                .map(|r| fs(r.cuvette_delay_reference))
                .collect(),
            reduced_chi2_sample: c.reduced_chi2_sample.and_then(finite),
            reduced_chi2_reference: c.reduced_chi2_reference.and_then(finite),
            result_bins: c.transmission.len(),
            masked_bins: MaskCounts {
                transmission: masked(&c.transmission),
                singles_only: masked(&c.singles_only),
                phase: masked(&c.phase),
            },
            efficiency_ratio_masked_bins: self.ratio.0.iter().filter(|r| r.is_none()).count(),
        }
    }

    /// Writes `result.csv`, `summary.json` and one interferogram per
    /// configuration into `dir`.
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let create = |name: &str| -> anyhow::Result<BufWriter<fs::File>> {
            let p = dir.join(name);
            Ok(BufWriter::new(
                fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
            ))
        };
        write_result(create("result.csv")?, &self.grid, &self.combined, None)?;
        let mut w = create("summary.json")?;
        serde_json::to_writer_pretty(&mut w, &self.summary())?;
        writeln!(w)?;
        w.flush()?;
        for (c, rows) in &self.interferograms {
            write_interferogram(
                create(&format!("interferogram_{c}.csv"))?,
                &self.grid,
                *c,
                &self.delays_fs,
                rows,
            )?;
        }
        Ok(())
    }
}

pub fn scan_file_name(scan: &ScanFile) -> String {
    format!("r{:02}_{}.csv", scan.repeat, scan.configuration)
}

/// Writes a scan table, with corrected columns from the ratio pooled over
/// the scan itself.
pub fn write_scan(path: &Path, scan: &ScanFile) -> anyhow::Result<()> {
    let ratio = pooled_ratio(std::slice::from_ref(scan))?;
    let w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    write_spectra(w, scan, &ratio).with_context(|| format!("writing {}", path.display()))
}

pub fn write_report(path: &Path, report: &ProcessingReport) -> anyhow::Result<()> {
    fs::write(path, report.to_string()).with_context(|| format!("writing {}", path.display()))
}

/// Outcome of a full campaign run.
#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub output: PathBuf,
    pub plan: Plan,
    pub data: CampaignData,
    pub reconstruction: Reconstruction,
}

/// Runs a campaign and writes its output tree. On failure the MANIFEST
/// records the failing stage and the files written so far.
pub fn run_campaign(
    config: &CampaignConfig,
    options: &RunOptions,
) -> Result<CampaignRun, StageError> {
    let output = options
        .output
        .clone()
        .unwrap_or_else(|| config.base_dir.join(&config.output.directory));
    fs::create_dir_all(&output)
        .with_context(|| format!("creating {}", output.display()))
        .stage("configure")?;
    let result = run_into(config, options, &output);
    let status = match &result {
        Ok(_) => Status::Complete,
        Err(e) => Status::Failed {
            stage: e.stage.to_string(),
        },
    };
    let manifest = Manifest::scan(&output).and_then(|m| m.write(&output, &status));
    let run = result?;
    manifest.context("writing MANIFEST").stage("manifest")?;
    Ok(run)
}

fn run_into(
    config: &CampaignConfig,
    options: &RunOptions,
    output: &Path,
) -> Result<CampaignRun, StageError> {
    let plan = Plan::new(config, options.seed, options.scale).stage("configure")?;
    write_ground_truth(&plan, output).stage("configure")?;

    let event_dir = plan
        .config
        .output
        .write_events
        .then(|| output.join("events"));
    let data = simulate_campaign(&plan, event_dir.as_deref(), options.parallelism)?;

    let write_scans = || -> anyhow::Result<()> {
        for sub in ["spectra", "reports", "joint"] {
            fs::create_dir_all(output.join(sub))?;
        }
        for (scan, report) in data.scans.iter().zip(&data.scan_reports) {
            write_scan(&output.join("spectra").join(scan_file_name(scan)), scan)?;
            let name = format!("r{:02}_{}.txt", scan.repeat, scan.configuration);
            write_report(&output.join("reports").join(name), report)?;
        }
        for (c, joint) in &data.joint {
            let path = output.join("joint").join(format!("{c}.csv"));
            write_joint(
                BufWriter::new(fs::File::create(&path)?),
                &plan.config.grid_spec(),
                *c,
                joint,
            )?;
        }
        Ok(())
    };
    write_scans().stage("write spectra")?;

    let reconstruction = reconstruct_scans(&data.scans, &plan.config.reconstruction_settings())
        .stage("reconstruct")?;
    reconstruction.write(output).stage("reconstruct")?;
    Ok(CampaignRun {
        output: output.to_path_buf(),
        plan,
        data,
        reconstruction,
    })
}

fn write_ground_truth(plan: &Plan, output: &Path) -> anyhow::Result<()> {
    let mut resolved = plan.config.clone();
    resolved.campaign.seed = plan.master_seed;
    let mut text = resolved.to_toml()?;
    text.push_str(&format!("\n# run\n# scale = {}\n", plan.scale));
    fs::write(output.join("config.resolved.toml"), text)?;

    let spec = plan.config.grid_spec();
    let p = &plan.protocol;
    write_sample(
        BufWriter::new(fs::File::create(output.join("sample.csv"))?),
        &spec,
        &p.sample,
    )?;
    write_sample(
        BufWriter::new(fs::File::create(output.join("reference.csv"))?),
        &spec,
        &p.reference,
    )?;
    let mut w = BufWriter::new(fs::File::create(output.join("truth.csv"))?);
    writeln!(w, "# homspec truth")?;
    writeln!(w, "bin,wavelength_nm,T_ratio,phase_rad")?;
    for (i, (t, ph)) in p
        .true_transmission_ratio()
        .iter()
        .zip(p.true_differential_phase())
        .enumerate()
    {
        writeln!(w, "{i},{},{t},{ph}", plan.grid.wavelengths_nm()[i])?;
    }
    w.flush()?;
    Ok(())
}
