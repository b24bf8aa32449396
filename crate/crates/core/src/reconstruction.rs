//! Estimators: calibrated transmission ratio, singles-only transmission,
//! HOM-dip delay compensation, fringe phase fits and the differential
//! phase, plus aggregation over repeated campaigns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::model::SpectraSet;
use crate::protocol::Configuration;
use crate::stats::{invert3, mean_and_stderr, wrap_phase};
#[allow(unused_imports)]
use num_traits::Float;

/// Fewest delay steps a scan may have.
pub const MIN_DELAY_STEPS: usize = 5;

/// Weights of the fringe least-squares fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Inverse Poisson variance of every point.
    Poisson,
}

/// One configuration's delay scan: a [`SpectraSet`] per stage delay, in
/// increasing delay order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpectra {
    sets: Vec<SpectraSet>,
}

/// Delay-summed rates of a scan with their Poisson variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SummedRates {
    pub s: Vec<f64>,
    pub s_var: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub c_plus_var: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ScanSpectra {
    pub fn new(sets: Vec<SpectraSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::Insufficient(
                "a scan needs at least one delay step".into(),
            ));
        };
        let n = first.n_bins();
        if let Some(bad) = sets.iter().find(|s| s.n_bins() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.n_bins(),
            });
        }
        if sets.windows(2).any(|w| !(w[1].delay > w[0].delay)) {
            return Err(Error::InvalidConfig(
                "scan delays must be strictly increasing".into(),
            ));
        }
        Ok(Self { sets })
    }

    pub fn sets(&self) -> &[SpectraSet] {
        &self.sets
    }

    pub fn n_bins(&self) -> usize {
        self.sets[0].n_bins()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.delay).collect()
    }

    pub fn summed(&self) -> SummedRates {
        let n = self.n_bins();
        let mut out = SummedRates {
            s: vec![0.0; n],
            s_var: vec![0.0; n],
            c_plus: vec![0.0; n],
            c_plus_var: vec![0.0; n],
            valid: vec![true; n],
        };
        for set in &self.sets {
            for i in 0..n {
                out.s[i] += set.s[i];
                out.s_var[i] += set.s_var[i];
                out.c_plus[i] += set.c_plus[i];
                out.c_plus_var[i] += set.c_plus_var[i];
                out.valid[i] &= set.valid[i];
            }
        }
        out
    }

    /// `C-` of bin `i` at every delay.
    pub fn c_minus_column(&self, i: usize) -> Vec<f64> {
        self.sets.iter().map(|s| s.c_minus[i]).collect()
    }

    pub fn c_minus_var_column(&self, i: usize) -> Vec<f64> {
        self.sets.iter().map(|s| s.c_minus_var[i]).collect()
    }

    /// `C-` matrix, one row per delay.
    pub fn interferogram(&self) -> Vec<Vec<f64>> {
        self.sets.iter().map(|s| s.c_minus.clone()).collect()
    }

    /// Dip profile `D(tau) = sum_i C-_i(tau)` over bins valid at every delay.
    pub fn dip_profile(&self) -> Vec<f64> {
        let valid = self.summed().valid;
        self.sets
            .iter()
            .map(|s| {
                s.c_minus
                    .iter()
                    .zip(&valid)
                    .filter(|(_, v)| **v)
                    .map(|(c, _)| c)
                    .sum()
            })
            .collect()
    }
}

/// The four scans of one campaign repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpectra {
    scans: [ScanSpectra; 4],
}

impl CampaignSpectra {
    pub fn new(
        sample: ScanSpectra,
        reference: ScanSpectra,
        blocked_reference: ScanSpectra,
        blocked_sample: ScanSpectra,
    ) -> Result<Self> {
        let scans = [sample, reference, blocked_reference, blocked_sample];
        let n = scans[0].n_bins();
        let delays = scans[0].delays();
        for s in &scans[1..] {
            if s.n_bins() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: s.n_bins(),
                });
            }
            if s.delays() != delays {
                return Err(Error::InvalidConfig(
                    "all configurations must share one delay axis".into(),
                ));
            }
        }
        Ok(Self { scans })
    }

    pub fn get(&self, configuration: Configuration) -> &ScanSpectra {
        &self.scans[configuration.index()]
    }

    pub fn n_bins(&self) -> usize {
        self.scans[0].n_bins()
    }
}

/// Per-bin estimates with standard errors; masked bins hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSeries {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MaskedSeries {
    pub fn masked(len: usize) -> Self {
        Self {
            values: vec![f64::NAN; len],
            stderr: vec![f64::NAN; len],
            valid: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    fn set(&mut self, i: usize, value: f64, stderr: f64) {
        if value.is_finite() && stderr.is_finite() {
            self.values[i] = value;
            self.stderr[i] = stderr;
            self.valid[i] = true;
        }
    }
}

/// Evaluates `f` and its first-order standard error for independent inputs
/// with the given variances. `None` when `f` is undefined near `x`.
fn propagate<const K: usize>(
    x: [f64; K],
    var: [f64; K],
    f: impl Fn(&[f64; K]) -> Option<f64>,
) -> Option<(f64, f64)> {
    let value = f(&x)?;
    let mut total = 0.0;
    for k in 0..K {
        if var[k] == 0.0 {
            continue;
        }
        let h = 1e-6 * x[k].abs().max(var[k].sqrt()).max(f64::MIN_POSITIVE);
        let mut up = x;
        let mut down = x;
        up[k] += h;
        down[k] -= h;
        let d = (f(&up)? - f(&down)?) / (2.0 * h);
        total += d * d * var[k];
    }
    Some((value, total.sqrt()))
}

fn nonzero(v: f64) -> Option<f64> {
    (v != 0.0 && v.is_finite()).then_some(v)
}

/// The heralded transmission estimator `(1 + K) Q - K`, where `K` is the
/// singles-based correction for the herald-side path and `Q` the fractional
/// change in the coincidence-to-singles ratio between sample and reference.
///
/// Inputs in order: `S0_j, S0'_j, S0'_i, S0_i, Sr_i, C+s_i, Ss_j, C+r_i, Sr_j`.
pub fn transmission_estimator(x: &[f64; 9]) -> Option<f64> {
    let [s0_j, s0p_j, s0p_i, s0_i, sr_i, cs_i, ss_j, cr_i, sr_j] = *x;
    let k = (s0_j / nonzero(s0p_j)?) * (s0p_i / nonzero(s0_i)?) * (s0_i / nonzero(sr_i - s0p_i)?);
    let q = (cs_i / nonzero(ss_j)?) / (nonzero(cr_i)? / nonzero(sr_j)?);
    let t = (1.0 + k) * q - k;
    t.is_finite().then_some(t)
}

/// Calibrated sample-to-reference transmission ratio on bins `i < N/2`, from
/// delay-summed rates of all four configurations.
pub fn estimate_transmission(campaign: &CampaignSpectra) -> Result<MaskedSeries> {
    let n = campaign.n_bins();
    let [s, r, z, zp] = Configuration::ALL.map(|c| campaign.get(c).summed());
    let mut out = MaskedSeries::masked(n / 2);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let all_valid = [&s, &r, &z, &zp].iter().all(|c| c.valid[i] && c.valid[j]);
        if !all_valid {
            continue;
        }
        let x = [
            z.s[j],
            zp.s[j],
            zp.s[i],
            z.s[i],
            r.s[i],
            s.c_plus[i],
            s.s[j],
            r.c_plus[i],
            r.s[j],
        ];
        let v = [
            z.s_var[j],
            zp.s_var[j],
            zp.s_var[i],
            z.s_var[i],
            r.s_var[i],
            s.c_plus_var[i],
            s.s_var[j],
            r.c_plus_var[i],
            r.s_var[j],
        ];
        if let Some((t, se)) = propagate(x, v, transmission_estimator) {
            out.set(i, t, se);
        }
    }
    Ok(out)
}

/// Background-subtracted singles ratio `(Ss - S0') / (Sr - S0')` on bins
/// `i < N/2`.
pub fn singles_only_transmission(campaign: &CampaignSpectra) -> Result<MaskedSeries> {
    let n = campaign.n_bins();
    let s = campaign.get(Configuration::Sample).summed();
    let r = campaign.get(Configuration::Reference).summed();
    let zp = campaign.get(Configuration::BlockedSample).summed();
    let mut out = MaskedSeries::masked(n / 2);
    let f = |x: &[f64; 3]| {
        let t = (x[0] - x[2]) / nonzero(x[1] - x[2])?;
        t.is_finite().then_some(t)
    };
    for i in 0..n / 2 {
        if !(s.valid[i] && r.valid[i] && zp.valid[i]) {
            continue;
        }
        if let Some((t, se)) = propagate(
            [s.s[i], r.s[i], zp.s[i]],
            [s.s_var[i], r.s_var[i], zp.s_var[i]],
            f,
        ) {
            out.set(i, t, se);
        }
    }
    Ok(out)
}

/// Cuvette delay from a dip profile sampled at `delays`: the negated
/// location of the profile maximum, refined by a parabola through the
/// maximum and its two neighbours.
pub fn estimate_cuvette_delay(delays: &[f64], profile: &[f64]) -> Result<f64> {
    if delays.len() != profile.len() {
        return Err(Error::LengthMismatch {
            expected: delays.len(),
            got: profile.len(),
        });
    }
    if delays.len() < MIN_DELAY_STEPS {
        return Err(Error::Insufficient(format!(
            "dip search needs at least {MIN_DELAY_STEPS} delay steps, got {}",
            delays.len()
        )));
    }
    if profile.iter().any(|p| !p.is_finite()) {
        return Err(Error::Insufficient("dip profile is not finite".into()));
    }
    let k = profile
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > profile[best] { i } else { best });
    if k == 0 || k == profile.len() - 1 {
        return Err(Error::DipNotCaptured);
    }
    let (x0, x1, x2) = (delays[k - 1], delays[k], delays[k + 1]);
    let (y0, y1, y2) = (profile[k - 1], profile[k], profile[k + 1]);
    // Vertex of the parabola through the three points.
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    let peak = if den != 0.0 { x1 - 0.5 * num / den } else { x1 };
    Ok(-peak)
}

/// Least-squares fit of `a cos(dw tau) + b sin(dw tau) + c` at fixed
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    /// Sample phase difference `Phi_i - Phi_partner` after removing the
    /// cuvette delay, wrapped to (-pi, pi]; NaN when masked.
    pub phase: f64,
    pub phase_stderr: f64,
    pub amplitude: f64,
    pub amplitude_stderr: f64,
    pub offset: f64,
    /// Reduced chi-square against the supplied variances, if any.
    pub reduced_chi2: Option<f64>,
    pub masked: bool,
}

impl FringeFit {
    fn masked() -> Self {
        Self {
            phase: f64::NAN,
            phase_stderr: f64::NAN,
            amplitude: f64::NAN,
            amplitude_stderr: f64::NAN,
            offset: f64::NAN,
            reduced_chi2: None,
            masked: true,
        }
    }
}

struct LinearFit {
    coef: [f64; 3],
    cov_unscaled: [[f64; 3]; 3],
    rss: f64,
}

fn fit_fixed_frequency(
    delays: &[f64],
    values: &[f64],
    weights: Option<&[f64]>,
    omega: f64,
) -> Option<LinearFit> {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (k, (&tau, &y)) in delays.iter().zip(values).enumerate() {
        let w = weights.map_or(1.0, |w| w[k]);
        let row = [(omega * tau).cos(), (omega * tau).sin(), 1.0];
        for p in 0..3 {
            atb[p] += w * row[p] * y;
            for q in 0..3 {
                ata[p][q] += w * row[p] * row[q];
            }
        }
    }
    let inv = invert3(ata)?;
    let mut coef = [0.0; 3];
    for p in 0..3 {
        coef[p] = (0..3).map(|q| inv[p][q] * atb[q]).sum();
    }
    let rss = delays
        .iter()
        .zip(values)
        .enumerate()
        .map(|(k, (&tau, &y))| {
            let w = weights.map_or(1.0, |w| w[k]);
            let r = y - coef[0] * (omega * tau).cos() - coef[1] * (omega * tau).sin() - coef[2];
            w * r * r
        })
        .sum();
    Some(LinearFit {
        coef,
        cov_unscaled: inv,
        rss,
    })
}

/// Fits the fringe of one bin at its known difference frequency and returns
/// the phase offset with the cuvette-delay term `dw * tau_c` removed.
///
/// Masked when the scan covers less than one fringe period, when the system
/// is singular, or when the amplitude is below twice its standard error.
pub fn fit_fringe_phase(
    delays: &[f64],
    values: &[f64],
    variances: Option<&[f64]>,
    delta_omega: f64,
    tau_c: f64,
    weighting: Weighting,
) -> Result<FringeFit> {
    let n = delays.len();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if let Some(v) = variances {
        if v.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    if n < 4 {
        return Err(Error::Insufficient(format!(
            "fringe fit needs at least 4 points, got {n}"
        )));
    }
    let span = delays[n - 1] - delays[0];
    if !(delta_omega.abs() * span >= 2.0 * PI) {
        return Ok(FringeFit::masked());
    }
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Uniform => None,
        Weighting::Poisson => {
            let v = variances
                .ok_or_else(|| Error::InvalidConfig("Poisson weighting needs variances".into()))?;
            Some(
                v.iter()
                    .map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 })
                    .collect(),
            )
        }
    };
    let Some(fit) = fit_fixed_frequency(delays, values, weights.as_deref(), delta_omega) else {
        return Ok(FringeFit::masked());
    };
    let dof = (n - 3) as f64;
    let scale = match weighting {
        Weighting::Uniform => fit.rss / dof,
        Weighting::Poisson => 1.0,
    };
    let cov = |p: usize, q: usize| fit.cov_unscaled[p][q] * scale;
    let [a, b, c] = fit.coef;
    let amp2 = a * a + b * b;
    let amplitude = amp2.sqrt();
    let (ja, jb) = (-b / amp2, a / amp2);
    let phase_var = ja * ja * cov(0, 0) + 2.0 * ja * jb * cov(0, 1) + jb * jb * cov(1, 1);
    let (ka, kb) = (a / amplitude, b / amplitude);
    let amp_var = ka * ka * cov(0, 0) + 2.0 * ka * kb * cov(0, 1) + kb * kb * cov(1, 1);
    let amplitude_stderr = amp_var.max(0.0).sqrt();
    let reduced_chi2 = variances.map(|v| {
        let chi2: f64 = delays
            .iter()
            .zip(values)
            .zip(v)
            .filter(|(_, v)| **v > 0.0)
            .map(|((&tau, &y), &v)| {
                let r = y - a * (delta_omega * tau).cos() - b * (delta_omega * tau).sin() - c;
                r * r / v
            })
            .sum();
        chi2 / dof
    });
    let masked = !(amplitude >= 2.0 * amplitude_stderr) || !amplitude.is_finite();
    if masked {
        return Ok(FringeFit {
            reduced_chi2,
            ..FringeFit::masked()
        });
    }
    Ok(FringeFit {
        phase: wrap_phase(b.atan2(a) + delta_omega * tau_c),
        phase_stderr: phase_var.max(0.0).sqrt(),
        amplitude,
        amplitude_stderr,
        offset: c,
        reduced_chi2,
        masked: false,
    })
}

/// Fringe angular frequency of a sampled signal, searched on `(0, omega_max]`:
/// a dense scan of the fixed-frequency fit residual followed by a
/// golden-section refinement around the best point.
pub fn estimate_fringe_frequency(delays: &[f64], values: &[f64], omega_max: f64) -> Result<f64> {
    let n = delays.len();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if n < 4 {
        return Err(Error::Insufficient(format!(
            "frequency search needs at least 4 points, got {n}"
        )));
    }
    let span = delays[n - 1] - delays[0];
    if !(span > 0.0) || !(omega_max > 0.0) {
        return Err(Error::InvalidConfig(
            "frequency search needs a positive span and limit".into(),
        ));
    }
    let rss =
        |w: f64| fit_fixed_frequency(delays, values, None, w).map_or(f64::INFINITY, |f| f.rss);
    let step = 2.0 * PI / span / 8.0;
    let points = (omega_max / step).ceil() as usize;
    let (mut best, mut best_rss) = (step, f64::INFINITY);
    for k in 1..=points {
        let w = (k as f64 * step).min(omega_max);
        let r = rss(w);
        if r < best_rss {
            best = w;
            best_rss = r;
        }
    }
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(omega_max));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    for _ in 0..100 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = rss(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = rss(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    Ok(if rss(refined) <= best_rss {
        refined
    } else {
        best
    })
}

/// Fits every bin of a scan.
///
/// The variance of `C-` at any delay is the expected total coincidence
/// count of the bin, which does not depend on the delay, so the per-step
/// count variances are averaged over the scan before weighting. This keeps
/// sparse bins, where many steps see zero counts, from being dominated by
/// their noisiest points.
pub fn fit_scan(
    scan: &ScanSpectra,
    grid: &SpectralGrid,
    tau_c: f64,
    weighting: Weighting,
) -> Result<Vec<FringeFit>> {
    grid.check_len(scan.n_bins())?;
    let delays = scan.delays();
    let valid = scan.summed().valid;
    (0..scan.n_bins())
        .map(|i| {
            if !valid[i] {
                return Ok(FringeFit::masked());
            }
            let var = scan.c_minus_var_column(i);
            let pooled = var.iter().sum::<f64>() / var.len() as f64;
            let var = vec![pooled; var.len()];
            fit_fringe_phase(
                &delays,
                &scan.c_minus_column(i),
                Some(&var),
                grid.difference_frequency(i),
                tau_c,
                weighting,
            )
        })
        .collect()
}

/// Sample-minus-reference phase on bins `i < N/2`, wrapped to (-pi, pi].
pub fn differential_phase(fits_s: &[FringeFit], fits_r: &[FringeFit]) -> Result<MaskedSeries> {
    if fits_s.len() != fits_r.len() {
        return Err(Error::LengthMismatch {
            expected: fits_s.len(),
            got: fits_r.len(),
        });
    }
    let half = fits_s.len() / 2;
    let mut out = MaskedSeries::masked(half);
    for i in 0..half {
        let (s, r) = (&fits_s[i], &fits_r[i]);
        if s.masked || r.masked {
            continue;
        }
        out.set(
            i,
            wrap_phase(s.phase - r.phase),
            s.phase_stderr.hypot(r.phase_stderr),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReconstructionSettings {
    pub weighting: Weighting,
}

/// Everything recovered from one or more campaign repeats. Series cover the
/// short-wavelength half, bins `0..N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub transmission: MaskedSeries,
    pub singles_only: MaskedSeries,
    pub phase: MaskedSeries,
    pub cuvette_delay_sample: f64,
    pub cuvette_delay_reference: f64,
    /// Standard errors of the cuvette delays over repeats, NaN for one repeat.
    pub cuvette_delay_sample_stderr: f64,
    pub cuvette_delay_reference_stderr: f64,
    /// Mean reduced chi-square of the unmasked fringe fits.
    pub reduced_chi2_sample: Option<f64>,
    pub reduced_chi2_reference: Option<f64>,
    pub repeats: usize,
}

fn mean_chi2(fits: &[FringeFit]) -> Option<f64> {
    let v: Vec<f64> = fits
        .iter()
        .filter(|f| !f.masked)
        .filter_map(|f| f.reduced_chi2)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every estimator on one campaign repeat.
pub fn reconstruct(
    campaign: &CampaignSpectra,
    grid: &SpectralGrid,
    settings: &ReconstructionSettings,
) -> Result<ReconstructionResult> {
    grid.check_len(campaign.n_bins())?;
    let sample = campaign.get(Configuration::Sample);
    let reference = campaign.get(Configuration::Reference);
    let delays = sample.delays();
    let tau_s = estimate_cuvette_delay(&delays, &sample.dip_profile())?;
    let tau_r = estimate_cuvette_delay(&delays, &reference.dip_profile())?;
    let fits_s = fit_scan(sample, grid, tau_s, settings.weighting)?;
    let fits_r = fit_scan(reference, grid, tau_r, settings.weighting)?;
    Ok(ReconstructionResult {
        transmission: estimate_transmission(campaign)?,
        singles_only: singles_only_transmission(campaign)?,
        phase: differential_phase(&fits_s, &fits_r)?,
        cuvette_delay_sample: tau_s,
        cuvette_delay_reference: tau_r,
        cuvette_delay_sample_stderr: f64::NAN,
        cuvette_delay_reference_stderr: f64::NAN,
        reduced_chi2_sample: mean_chi2(&fits_s),
        reduced_chi2_reference: mean_chi2(&fits_r),
        repeats: 1,
    })
}

fn aggregate_series(series: &[&MaskedSeries], phase: bool) -> MaskedSeries {
    let len = series[0].len();
    let mut out = MaskedSeries::masked(len);
    for i in 0..len {
        if series.iter().any(|s| !s.valid[i]) {
            continue;
        }
        let first = series[0].values[i];
        let values: Vec<f64> = series
            .iter()
            .map(|s| {
                let v = s.values[i];
                if phase {
                    v + 2.0 * PI * ((first - v) / (2.0 * PI)).round()
                } else {
                    v
                }
            })
            .collect();
        let (mean, se) = mean_and_stderr(&values);
        out.set(i, if phase { wrap_phase(mean) } else { mean }, se);
    }
    out
}

/// Mean and standard error of the mean over repeats. A bin masked in any
/// repeat is masked in the aggregate; phases are unwrapped against the
/// first repeat before averaging. A single repeat is returned unchanged.
pub fn aggregate_repeats(results: &[ReconstructionResult]) -> Result<ReconstructionResult> {
    let Some(first) = results.first() else {
        return Err(Error::Insufficient("no repeats to aggregate".into()));
    };
    if results.len() == 1 {
        return Ok(first.clone());
    }
    for r in results {
        for (a, b) in [
            (&r.transmission, &first.transmission),
            (&r.singles_only, &first.singles_only),
            (&r.phase, &first.phase),
        ] {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    expected: b.len(),
                    got: a.len(),
                });
            }
        }
    }
    let pick =
        |f: fn(&ReconstructionResult) -> &MaskedSeries| results.iter().map(f).collect::<Vec<_>>();
    let (tau_s, tau_s_se) = mean_and_stderr(
        &results
            .iter()
            .map(|r| r.cuvette_delay_sample)
            .collect::<Vec<_>>(),
    );
    let (tau_r, tau_r_se) = mean_and_stderr(
        &results
            .iter()
            .map(|r| r.cuvette_delay_reference)
            .collect::<Vec<_>>(),
    );
    let chi = |f: fn(&ReconstructionResult) -> Option<f64>| {
        let v: Vec<f64> = results.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(ReconstructionResult {
        transmission: aggregate_series(&pick(|r| &r.transmission), false),
        singles_only: aggregate_series(&pick(|r| &r.singles_only), false),
        phase: aggregate_series(&pick(|r| &r.phase), true),
        cuvette_delay_sample: tau_s,
        cuvette_delay_reference: tau_r,
        cuvette_delay_sample_stderr: tau_s_se,
        cuvette_delay_reference_stderr: tau_r_se,
        reduced_chi2_sample: chi(|r| r.reduced_chi2_sample),
        reduced_chi2_reference: chi(|r| r.reduced_chi2_reference),
        repeats: results.len(),
    })
}
