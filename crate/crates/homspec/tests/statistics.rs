//! Repeat-based error bars checked against Monte Carlo campaigns.

use std::path::Path;

use homspec::campaign::{reconstruct_scans, simulate_campaign, Plan, Reconstruction};
use homspec::config::{CampaignConfig, SampleModel, WeightingChoice};
use homspec_core::reconstruction::ReconstructionSettings;

fn config(repeats: usize, seed: u64) -> CampaignConfig {
    let text = format!(
        r#"
[grid]
center_wavelength_nm = 810.0
bandwidth_nm = 155.0
n_bins = 256

[source]
pair_probability = 0.01
pair_generation_rate_hz = 4.056e7

[detection]
efficiency_a = 0.008956
efficiency_b = 0.008956
mode_overlap = 0.95

[sample]
model = "flat"
transmittance = 0.8

[scan]
start_fs = -40.0
step_fs = 4.0
count = 20
exposure_seconds = 3.0

[campaign]
repeats = {repeats}
seed = {seed}
"#
    );
    CampaignConfig::parse(&text, Path::new(".")).unwrap()
}

fn run(config: &CampaignConfig) -> (Plan, Reconstruction) {
    let plan = Plan::new(config, None, 1.0).unwrap();
    let data = simulate_campaign(&plan, None, None).unwrap();
    let rec = reconstruct_scans(&data.scans, &config.reconstruction_settings()).unwrap();
    (plan, rec)
}

#[test]
fn flat_transmission_is_covered_by_repeat_errors() {
    let (plan, rec) = run(&config(10, 1));
    let t = &rec.combined.transmission;
    let truth = plan.protocol.true_transmission_ratio();
    assert!((truth[0] - 0.8).abs() < 1e-12);
    let valid: Vec<usize> = (0..t.len()).filter(|&i| t.valid[i]).collect();
    assert!(valid.len() > 100, "{} valid bins", valid.len());
    let hits = valid
        .iter()
        .filter(|&&i| (t.values[i] - 0.8).abs() <= 3.0 * t.stderr[i])
        .count();
    let frac = hits as f64 / valid.len() as f64;
    assert!(
        frac >= 0.95,
        "{hits} of {} bins within 3 standard errors",
        valid.len()
    );
}

#[test]
fn standard_error_scales_with_repeats() {
    let (_, four) = run(&config(4, 2));
    let (_, sixteen) = run(&config(16, 3));
    let (a, b) = (&four.combined.transmission, &sixteen.combined.transmission);
    let mut ratios: Vec<f64> = (0..a.len())
        .filter(|&i| a.valid[i] && b.valid[i] && b.stderr[i] > 0.0)
        .map(|i| a.stderr[i] / b.stderr[i])
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    // sqrt(16 / 4) = 2
    assert!((median / 2.0 - 1.0).abs() < 0.3, "median ratio {median}");
}

#[test]
fn poisson_weighted_fits_have_consistent_chi_square() {
    let mut c = config(1, 4);
    c.sample.model = SampleModel::None;
    c.scan.count = 100;
    c.scan.start_fs = -200.0;
    c.processing.weighting = WeightingChoice::Poisson;
    let (_, rec) = run(&c);
    assert_eq!(
        ReconstructionSettings::default().weighting,
        Default::default()
    );
    for chi2 in [
        rec.combined.reduced_chi2_sample,
        rec.combined.reduced_chi2_reference,
    ] {
        let chi2 = chi2.expect("variances were supplied");
        assert!((0.5..=2.0).contains(&chi2), "reduced chi-square {chi2}");
    }
}
