//! Command-line interface. Each subcommand reads and writes the documented
//! file formats, so the stages compose through files alone.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use anyhow::{ensure, Context};
use clap::{Parser, Subcommand, ValueEnum};

use homspec_core::reconstruction::{ReconstructionSettings, Weighting};
use homspec_core::sample::kramers_kronig_phase;
use homspec_core::tags::RawSpectra;
use homspec_core::{Configuration, SampleResponse};

use crate::campaign::{
    process_stream, reconstruct_scans, run_campaign, write_events_file, write_report, write_scan,
    Plan, RunOptions,
};
use crate::config::{CampaignConfig, EventFormat};
use crate::events::EventReader;
use crate::tables::{read_sample, read_spectra, write_sample, ScanFile};

#[derive(Debug, Parser)]
#[command(
    name = "homspec",
    version,
    about = "Two-photon interference spectroscopy: simulate, process, reconstruct"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConfigurationArg {
    Sample,
    Reference,
    BlockedReference,
    BlockedSample,
}

impl From<ConfigurationArg> for Configuration {
    fn from(c: ConfigurationArg) -> Self {
        match c {
            ConfigurationArg::Sample => Configuration::Sample,
            ConfigurationArg::Reference => Configuration::Reference,
            ConfigurationArg::BlockedReference => Configuration::BlockedReference,
            ConfigurationArg::BlockedSample => Configuration::BlockedSample,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    Poisson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one exposure of a campaign and write its event file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, value_enum)]
        configuration: ConfigurationArg,
        #[arg(long, default_value_t = 0)]
        repeat: u32,
        #[arg(long)]
        delay_index: u32,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
        format: FormatArg,
    },
    /// Process the event files of one delay scan into a spectra table.
    Process {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        configuration: ConfigurationArg,
        #[arg(long, default_value_t = 0)]
        repeat: u32,
        /// Stage delay for event files without a header (zero-length files).
        #[arg(long, default_value_t = 0.0)]
        delay_fs: f64,
        #[arg(long)]
        output: PathBuf,
        /// Key-value processing report summed over the inputs.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Event files in increasing delay order.
        #[arg(required = true)]
        events: Vec<PathBuf>,
    },
    /// Reconstruct transmission and phase from the spectra of all four
    /// configurations of one or more repeats.
    Reconstruct {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
        weighting: WeightingArg,
        #[arg(required = true)]
        spectra: Vec<PathBuf>,
    },
    /// Run a full campaign.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Multiplies the pair generation and dark rates.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Phase implied by an absorbance table through the Kramers-Kronig relations.
    Kk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Simulate {
            config,
            seed,
            scale,
            configuration,
            repeat,
            delay_index,
            output,
            format,
        } => {
            let cfg = CampaignConfig::load(&config)?;
            let plan = Plan::new(&cfg, seed, scale)?;
            let (header, record) = plan
                .simulate(configuration.into(), repeat, delay_index)
                .context("simulate stage failed")?;
            let format = match format {
                FormatArg::Binary => EventFormat::Binary,
                FormatArg::Csv => EventFormat::Csv,
            };
            write_events_file(&output, format, &header, &record.events)
        }
        Command::Process {
            config,
            configuration,
            repeat,
            delay_fs,
            output,
            report,
            events,
        } => {
            let cfg = CampaignConfig::load(&config)?;
            let grid = cfg.grid()?;
            let mut scan = ScanFile {
                grid: cfg.grid_spec(),
                configuration: configuration.into(),
                repeat,
                delays_fs: vec![],
                spectra: vec![],
            };
            let mut total = homspec_core::ProcessingReport::default();
            for path in &events {
                let ctx = || format!("process stage failed on {}", path.display());
                let file = fs::File::open(path).with_context(ctx)?;
                let reader = EventReader::new(BufReader::new(file)).with_context(ctx)?;
                let delay = match reader.header() {
                    Some(h) => {
                        ensure!(
                            h.n_bins as usize == grid.n_bins(),
                            "{}: event file has {} bins, the grid has {}",
                            path.display(),
                            h.n_bins,
                            grid.n_bins()
                        );
                        h.delay_fs
                    }
                    None => delay_fs,
                };
                if let Some(&last) = scan.delays_fs.last() {
                    ensure!(
                        delay > last,
                        "{}: event files must be given in increasing delay order",
                        path.display()
                    );
                }
                let (mut raw, rep): (RawSpectra, _) =
                    process_stream(reader, &grid, cfg.processor_settings()).with_context(ctx)?;
                raw.joint_aa.clear();
                raw.joint_bb.clear();
                raw.joint_ab.clear();
                total.merge(&rep);
                scan.delays_fs.push(delay);
                scan.spectra.push(raw);
            }
            write_scan(&output, &scan)?;
            if let Some(p) = report {
                write_report(&p, &total)?;
            }
            Ok(())
        }
        Command::Reconstruct {
            output,
            weighting,
            spectra,
        } => {
            let scans = spectra
                .iter()
                .map(|p| {
                    let f =
                        fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                    read_spectra(BufReader::new(f)).with_context(|| {
                        format!("reconstruct stage failed reading {}", p.display())
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let settings = ReconstructionSettings {
                weighting: match weighting {
                    WeightingArg::Uniform => Weighting::Uniform,
                    WeightingArg::Poisson => Weighting::Poisson,
                },
            };
            let rec = reconstruct_scans(&scans, &settings).context("reconstruct stage failed")?;
            rec.write(&output)
        }
        Command::Campaign {
            config,
            seed,
            output,
            parallelism,
            scale,
        } => {
            let cfg = CampaignConfig::load(&config)?;
            let options = RunOptions {
                seed,
                output,
                parallelism,
                scale,
            };
            let run = run_campaign(&cfg, &options)?;
            let r = &run.reconstruction.combined;
            println!(
                "campaign complete: {} exposures, {} repeats, output in {}",
                run.data.exposures.len(),
                r.repeats,
                run.output.display()
            );
            println!(
                "cuvette delay sample {:.2} fs, reference {:.2} fs; unmasked bins T {} phase {}",
                r.cuvette_delay_sample * 1e15,
                r.cuvette_delay_reference * 1e15,
                r.transmission.n_valid(),
                r.phase.n_valid()
            );
            Ok(())
        }
        Command::Kk { input, output } => {
            let f =
                fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let table = read_sample(BufReader::new(f))
                .with_context(|| format!("kk stage failed reading {}", input.display()))?;
            let spec = table.grid.with_context(|| {
                format!(
                    "{}: the kk transform needs the `# grid` header",
                    input.display()
                )
            })?;
            let grid = spec.build()?;
            let absorbance = table.to_response(&grid)?.absorbance().to_vec();
            let phase = kramers_kronig_phase(&grid, &absorbance)?;
            let out = SampleResponse::new(&grid, absorbance, phase)?;
            let w = BufWriter::new(
                fs::File::create(&output)
                    .with_context(|| format!("creating {}", output.display()))?,
            );
            Ok(write_sample(w, &spec, &out)?)
        }
    }
}
