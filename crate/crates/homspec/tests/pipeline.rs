use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use homspec::campaign::{run_campaign, RunOptions};
use homspec::config::CampaignConfig;
use homspec::manifest::Manifest;
use homspec::tables::{read_result, read_sample, read_spectra, write_sample, GridSpec};
use homspec_core::sample::lorentzian_response;
use homspec_core::Configuration;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn smoke_path() -> PathBuf {
    manifest_dir().join("tests/fixtures/smoke.toml")
}

fn smoke() -> CampaignConfig {
    CampaignConfig::load(&smoke_path()).unwrap()
}

fn run_cli(args: &[&str]) -> anyhow::Result<()> {
    let mut all = vec!["homspec"];
    all.extend_from_slice(args);
    homspec::cli::run(all)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn annotated_config_matches_golden_resolution() {
    let path = manifest_dir().join("../../docs/campaign.toml");
    let config = CampaignConfig::load(&path).unwrap();
    let resolved = config.to_toml().unwrap();
    let golden = manifest_dir().join("tests/golden/campaign.resolved.toml");
    if std::env::var_os("HOMSPEC_UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &resolved).unwrap();
    }
    assert_eq!(resolved, fs::read_to_string(&golden).unwrap());
    assert_eq!(config.scan.count, 100);
    assert_eq!(config.campaign.repeats, 10);
    assert!(!config.output.write_events);
}

#[test]
fn smoke_campaign_writes_complete_tree() {
    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        output: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let run = run_campaign(&smoke(), &options).unwrap();
    assert_eq!(run.data.exposures.len(), 2 * 4 * 5);
    assert!(run.data.exposures.iter().all(|e| e.report.is_conserved()));

    let (status, manifest) = Manifest::read(dir.path()).unwrap();
    assert_eq!(status, "complete");
    for f in [
        "result.csv",
        "summary.json",
        "truth.csv",
        "sample.csv",
        "config.resolved.toml",
        "interferogram_sample.csv",
        "spectra/r01_blocked_sample.csv",
        "reports/r00_reference.txt",
        "joint/sample.csv",
        "events/r01/reference/d004.hev",
    ] {
        assert!(manifest.entries.contains_key(f), "missing {f}");
    }
    let result = read_result(fs::File::open(dir.path().join("result.csv")).unwrap()).unwrap();
    assert_eq!(result.repeats, 2);
    assert_eq!(result.transmission.len(), 8);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["repeats"], 2);
    assert_eq!(summary["delay_steps"], 5);
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = smoke();
    let run = |dir: &Path, threads| {
        let options = RunOptions {
            output: Some(dir.to_path_buf()),
            parallelism: Some(threads),
            ..Default::default()
        };
        run_campaign(&config, &options).unwrap();
        Manifest::read(dir).unwrap().1
    };
    let ma = run(a.path(), 1);
    let mb = run(b.path(), 4);
    assert!(!ma.entries.is_empty());
    assert_eq!(ma, mb);

    let c = tempfile::tempdir().unwrap();
    let other = RunOptions {
        output: Some(c.path().to_path_buf()),
        seed: Some(8),
        ..Default::default()
    };
    run_campaign(&config, &other).unwrap();
    let mc = Manifest::read(c.path()).unwrap().1;
    assert_ne!(ma.entries["result.csv"], mc.entries["result.csv"]);
}

#[test]
fn stages_compose_through_files() {
    let campaign_dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        output: Some(campaign_dir.path().to_path_buf()),
        ..Default::default()
    };
    run_campaign(&smoke(), &options).unwrap();

    let work = tempfile::tempdir().unwrap();
    let config = smoke_path();
    let mut spectra = Vec::new();
    for repeat in 0..2 {
        for c in Configuration::ALL {
            let label = c.label().replace('_', "-");
            let mut events = Vec::new();
            for k in 0..5 {
                let path = work.path().join(format!("r{repeat}_{c}_{k}.hev"));
                run_cli(&[
                    "simulate",
                    "--config",
                    s(&config),
                    "--configuration",
                    &label,
                    "--repeat",
                    &repeat.to_string(),
                    "--delay-index",
                    &k.to_string(),
                    "--output",
                    s(&path),
                ])
                .unwrap();
                // The event file matches the one the campaign wrote.
                let campaign_file = campaign_dir
                    .path()
                    .join(format!("events/r{repeat:02}/{c}/d{k:03}.hev"));
                assert_eq!(fs::read(&path).unwrap(), fs::read(campaign_file).unwrap());
                events.push(path);
            }
            let out = work.path().join(format!("r{repeat:02}_{c}.csv"));
            let mut args = vec![
                "process".to_string(),
                "--config".into(),
                s(&config).into(),
                "--configuration".into(),
                label,
                "--repeat".into(),
                repeat.to_string(),
                "--output".into(),
                s(&out).into(),
            ];
            args.extend(events.iter().map(|p| s(p).to_string()));
            run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
            let theirs = campaign_dir
                .path()
                .join(format!("spectra/r{repeat:02}_{c}.csv"));
            assert_eq!(
                fs::read(&out).unwrap(),
                fs::read(theirs).unwrap(),
                "spectra {repeat} {c}"
            );
            spectra.push(out);
        }
    }
    let rec_dir = work.path().join("rec");
    let mut args = vec![
        "reconstruct".to_string(),
        "--output".into(),
        s(&rec_dir).into(),
    ];
    args.extend(spectra.iter().map(|p| s(p).to_string()));
    run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
    for f in [
        "result.csv",
        "summary.json",
        "interferogram_sample.csv",
        "interferogram_blocked_reference.csv",
    ] {
        assert_eq!(
            fs::read(rec_dir.join(f)).unwrap(),
            fs::read(campaign_dir.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn csv_and_binary_events_process_identically() {
    let work = tempfile::tempdir().unwrap();
    let config = smoke_path();
    let mut outs = Vec::new();
    for format in ["binary", "csv"] {
        let ev = work.path().join(format!("ev.{format}"));
        run_cli(&[
            "simulate",
            "--config",
            s(&config),
            "--configuration",
            "sample",
            "--delay-index",
            "2",
            "--output",
            s(&ev),
            "--format",
            format,
        ])
        .unwrap();
        let out = work.path().join(format!("{format}.csv"));
        run_cli(&[
            "process",
            "--config",
            s(&config),
            "--configuration",
            "sample",
            "--output",
            s(&out),
            s(&ev),
        ])
        .unwrap();
        outs.push(fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn empty_event_file_gives_zero_spectra() {
    let work = tempfile::tempdir().unwrap();
    let ev = work.path().join("empty.hev");
    fs::write(&ev, b"").unwrap();
    let out = work.path().join("spectra.csv");
    let report = work.path().join("report.txt");
    let status = Command::new(env!("CARGO_BIN_EXE_homspec"))
        .args([
            "process",
            "--config",
            s(&smoke_path()),
            "--configuration",
            "reference",
        ])
        .args(["--output", s(&out), "--report", s(&report), s(&ev)])
        .status()
        .unwrap();
    assert!(status.success());
    let scan = read_spectra(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(scan.spectra.len(), 1);
    let raw = &scan.spectra[0];
    for v in [
        &raw.clicks_a,
        &raw.clicks_b,
        &raw.single_a,
        &raw.single_b,
        &raw.aa,
        &raw.bb,
        &raw.ab,
    ] {
        assert!(v.iter().all(|&x| x == 0));
    }
    let text = fs::read_to_string(&out).unwrap();
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(data_rows.len(), 16);
    assert!(
        data_rows.iter().all(|r| r.ends_with(",0,0,0,0")),
        "{}",
        data_rows[0]
    );
    assert!(fs::read_to_string(report)
        .unwrap()
        .contains("total_events=0"));
}

#[test]
fn malformed_inputs_name_stage_and_offset() {
    let work = tempfile::tempdir().unwrap();
    let ev = work.path().join("ev.hev");
    run_cli(&[
        "simulate",
        "--config",
        s(&smoke_path()),
        "--configuration",
        "sample",
        "--delay-index",
        "0",
        "--output",
        s(&ev),
    ])
    .unwrap();
    let bytes = fs::read(&ev).unwrap();
    fs::write(&ev, &bytes[..bytes.len() - 3]).unwrap();
    let out = work.path().join("x.csv");
    let output = Command::new(env!("CARGO_BIN_EXE_homspec"))
        .args([
            "process",
            "--config",
            s(&smoke_path()),
            "--configuration",
            "sample",
            "--output",
            s(&out),
            s(&ev),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(
        err.contains("process stage") && err.contains("byte offset"),
        "{err}"
    );

    let bad = work.path().join("bad.csv");
    fs::write(&bad, "# homspec spectra\n# grid n_bins=2 pump_wavelength_nm=405 min_wavelength_nm=700 max_wavelength_nm=900\n").unwrap();
    let err = run_cli(&["reconstruct", "--output", s(work.path()), s(&bad)]).unwrap_err();
    assert!(format!("{err:#}").contains("reconstruct stage"), "{err:#}");
}

#[test]
fn failed_campaign_is_flagged_in_manifest() {
    let mut config = smoke();
    // Dip far outside the scan: reconstruction cannot locate it.
    config.sample.cuvette_delay_fs = 500.0;
    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        output: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let err = run_campaign(&config, &options).unwrap_err();
    assert_eq!(err.stage, "reconstruct");
    let (status, manifest) = Manifest::read(dir.path()).unwrap();
    assert_eq!(status, "failed stage=reconstruct");
    assert!(manifest.entries.contains_key("spectra/r00_sample.csv"));
    assert!(!manifest.entries.contains_key("result.csv"));
}

#[test]
fn kk_reproduces_lorentzian_fixture_phase() {
    let grid_spec = GridSpec {
        center_wavelength_nm: 810.0,
        bandwidth_nm: 155.0,
        n_bins: 256,
    };
    let grid = grid_spec.build().unwrap();
    let truth = lorentzian_response(&grid, 810.0, 5.0, 2.0).unwrap();
    let fixture = manifest_dir().join("tests/fixtures/lorentzian.csv");
    let mut expected = Vec::new();
    write_sample(&mut expected, &grid_spec, &truth).unwrap();
    if std::env::var_os("HOMSPEC_UPDATE_GOLDEN").is_some() {
        fs::write(&fixture, &expected).unwrap();
    }
    assert_eq!(fs::read(&fixture).unwrap(), expected, "fixture is stale");

    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("phase.csv");
    run_cli(&["kk", "--input", s(&fixture), "--output", s(&out)]).unwrap();
    let table = read_sample(fs::File::open(&out).unwrap()).unwrap();
    let phase = table.phase.unwrap();
    let peak = truth.phase().iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let n = phase.len();
    let worst = (n / 10..n - n / 10)
        .map(|i| (phase[i] - truth.phase()[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.01 * peak, "worst {worst} vs peak {peak}");
    assert_eq!(table.absorbance, truth.absorbance());
}
