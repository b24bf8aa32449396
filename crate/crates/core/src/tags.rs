//! Post-processing of time-tagged clicks: coincidence windowing, the
//! energy-conservation filter and accumulation into per-bin histograms.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::model::{
    corrected_rates, efficiency_ratio_from_singles, DetectionTallies, EfficiencyRatio, SpectraSet,
};
use crate::simulator::{Channel, ClickEvent};

/// Default coincidence window, nanoseconds.
pub const DEFAULT_WINDOW_NS: u64 = 25;
/// Default energy-conservation tolerance, bins.
pub const DEFAULT_ENERGY_TOLERANCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessorSettings {
    /// Clicks no further than this from the first click of a window share
    /// the window (inclusive).
    pub coincidence_window_ns: u64,
    /// Largest accepted `|i + j - (N - 1)|` for a pair in bins `i`, `j`.
    pub energy_tolerance_bins: usize,
}

impl Default for ProcessorSettings {
    fn default() -> Self {
        Self {
            coincidence_window_ns: DEFAULT_WINDOW_NS,
            energy_tolerance_bins: DEFAULT_ENERGY_TOLERANCE,
        }
    }
}

impl ProcessorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.coincidence_window_ns == 0 {
            return Err(Error::InvalidConfig(
                "coincidence window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Two clicks in one coincidence window, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickPair {
    pub first: ClickEvent,
    pub second: ClickEvent,
}

impl ClickPair {
    /// Energy-conservation violation `|i + j - (N - 1)|` in bins.
    pub fn energy_mismatch(&self, n_bins: usize) -> usize {
        let sum = self.first.bin as isize + self.second.bin as isize;
        (sum - (n_bins as isize - 1)).unsigned_abs()
    }
}

/// Result of [`pair_events`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    pub pairs: Vec<ClickPair>,
    pub singles: Vec<ClickEvent>,
    /// Clicks dropped because their window held three or more clicks.
    pub discarded: usize,
}

/// Greedy forward windowing. A window opens at the first unassigned click
/// and collects every following click within the coincidence window. One
/// click is a single, two are a candidate pair, more are discarded.
pub fn pair_events(events: &[ClickEvent], settings: &ProcessorSettings) -> Result<Pairing> {
    settings.validate()?;
    check_sorted(events)?;
    let mut out = Pairing::default();
    let mut start = 0;
    while start < events.len() {
        let t0 = events[start].timestamp_ns;
        let mut end = start + 1;
        while end < events.len() && events[end].timestamp_ns - t0 <= settings.coincidence_window_ns
        {
            end += 1;
        }
        match &events[start..end] {
            [single] => out.singles.push(*single),
            [first, second] => out.pairs.push(ClickPair {
                first: *first,
                second: *second,
            }),
            many => out.discarded += many.len(),
        }
        start = end;
    }
    Ok(out)
}

fn check_sorted(events: &[ClickEvent]) -> Result<()> {
    match events.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::UnsortedEvents(i + 1)),
        None => Ok(()),
    }
}

/// Splits pairs into those obeying energy conservation within the tolerance
/// and those violating it.
pub fn energy_filter(
    pairs: &[ClickPair],
    grid: &SpectralGrid,
    settings: &ProcessorSettings,
) -> Result<(Vec<ClickPair>, Vec<ClickPair>)> {
    let n = grid.n_bins();
    for p in pairs {
        for e in [p.first, p.second] {
            if e.bin as usize >= n {
                return Err(Error::BinOutOfRange {
                    index: e.bin as usize,
                    n_bins: n,
                });
            }
        }
    }
    Ok(pairs
        .iter()
        .partition(|p| p.energy_mismatch(n) <= settings.energy_tolerance_bins))
}

/// Integer detection histograms of one or more processed exposures.
///
/// The pair histograms follow the layout of [`DetectionTallies`]: a kept
/// pair is projected onto the partner diagonal, bunched pairs are stored at
/// both ends of the diagonal and antibunched pairs at the bin of the A click.
/// `paired_a` and `paired_b` record the bins the paired clicks actually fell
/// in, and `clicks_a`, `clicks_b` count every input click whatever its
/// classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSpectra {
    pub clicks_a: Vec<u64>,
    pub clicks_b: Vec<u64>,
    pub single_a: Vec<u64>,
    pub single_b: Vec<u64>,
    pub paired_a: Vec<u64>,
    pub paired_b: Vec<u64>,
    pub aa: Vec<u64>,
    pub bb: Vec<u64>,
    pub ab: Vec<u64>,
    /// Kept A-A pairs keyed by (earlier bin, later bin).
    pub joint_aa: BTreeMap<(u16, u16), u64>,
    /// Kept B-B pairs keyed by (earlier bin, later bin).
    pub joint_bb: BTreeMap<(u16, u16), u64>,
    /// Kept A-B pairs keyed by (A bin, B bin).
    pub joint_ab: BTreeMap<(u16, u16), u64>,
}

impl RawSpectra {
    pub fn zeros(n_bins: usize) -> Self {
        Self {
            clicks_a: vec![0; n_bins],
            clicks_b: vec![0; n_bins],
            single_a: vec![0; n_bins],
            single_b: vec![0; n_bins],
            paired_a: vec![0; n_bins],
            paired_b: vec![0; n_bins],
            aa: vec![0; n_bins],
            bb: vec![0; n_bins],
            ab: vec![0; n_bins],
            joint_aa: BTreeMap::new(),
            joint_bb: BTreeMap::new(),
            joint_ab: BTreeMap::new(),
        }
    }

    /// Histograms of classified clicks; the click totals cover only the
    /// clicks given here.
    pub fn from_classified(
        n_bins: usize,
        kept: &[ClickPair],
        singles: &[ClickEvent],
    ) -> Result<Self> {
        let mut raw = Self::zeros(n_bins);
        for e in singles {
            raw.add_click(e)?;
            raw.add_single(e)?;
        }
        for p in kept {
            raw.add_click(&p.first)?;
            raw.add_click(&p.second)?;
            raw.add_pair(p)?;
        }
        Ok(raw)
    }

    pub fn n_bins(&self) -> usize {
        self.single_a.len()
    }

    fn check_bin(&self, bin: u16) -> Result<usize> {
        let n = self.n_bins();
        if (bin as usize) < n {
            Ok(bin as usize)
        } else {
            Err(Error::BinOutOfRange {
                index: bin as usize,
                n_bins: n,
            })
        }
    }

    pub fn add_click(&mut self, e: &ClickEvent) -> Result<()> {
        let b = self.check_bin(e.bin)?;
        match e.channel {
            Channel::A => self.clicks_a[b] += 1,
            Channel::B => self.clicks_b[b] += 1,
        }
        Ok(())
    }

    pub fn add_single(&mut self, e: &ClickEvent) -> Result<()> {
        let b = self.check_bin(e.bin)?;
        match e.channel {
            Channel::A => self.single_a[b] += 1,
            Channel::B => self.single_b[b] += 1,
        }
        Ok(())
    }

    pub fn add_pair(&mut self, p: &ClickPair) -> Result<()> {
        let n = self.n_bins();
        let (u, v) = (self.check_bin(p.first.bin)?, self.check_bin(p.second.bin)?);
        for e in [p.first, p.second] {
            match e.channel {
                Channel::A => self.paired_a[e.bin as usize] += 1,
                Channel::B => self.paired_b[e.bin as usize] += 1,
            }
        }
        match (p.first.channel, p.second.channel) {
            (Channel::A, Channel::A) | (Channel::B, Channel::B) => {
                let lo = u.min(v);
                let hi = u.max(v);
                let k = ((lo + (n - 1 - hi)) / 2).min(n / 2 - 1);
                let (hist, joint) = if p.first.channel == Channel::A {
                    (&mut self.aa, &mut self.joint_aa)
                } else {
                    (&mut self.bb, &mut self.joint_bb)
                };
                hist[k] += 1;
                hist[n - 1 - k] += 1;
                *joint.entry((p.first.bin, p.second.bin)).or_insert(0) += 1;
            }
            _ => {
                let (a, b) = if p.first.channel == Channel::A {
                    (u, v)
                } else {
                    (v, u)
                };
                self.ab[(a + (n - 1 - b)) / 2] += 1;
                *self.joint_ab.entry((a as u16, b as u16)).or_insert(0) += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum. Counts are integers, so merging in any order gives
    /// identical results.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.n_bins() != self.n_bins() {
            return Err(Error::LengthMismatch {
                expected: self.n_bins(),
                got: other.n_bins(),
            });
        }
        for (dst, src) in [
            (&mut self.clicks_a, &other.clicks_a),
            (&mut self.clicks_b, &other.clicks_b),
            (&mut self.single_a, &other.single_a),
            (&mut self.single_b, &other.single_b),
            (&mut self.paired_a, &other.paired_a),
            (&mut self.paired_b, &other.paired_b),
            (&mut self.aa, &other.aa),
            (&mut self.bb, &other.bb),
            (&mut self.ab, &other.ab),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        for (dst, src) in [
            (&mut self.joint_aa, &other.joint_aa),
            (&mut self.joint_bb, &other.joint_bb),
            (&mut self.joint_ab, &other.joint_ab),
        ] {
            for (k, v) in src {
                *dst.entry(*k).or_insert(0) += v;
            }
        }
        Ok(())
    }

    /// All port-A clicks per bin, paired or not.
    pub fn unconditioned_a(&self) -> Vec<u64> {
        self.single_a
            .iter()
            .zip(&self.paired_a)
            .map(|(s, p)| s + p)
            .collect()
    }

    /// All port-B clicks per bin, paired or not.
    pub fn unconditioned_b(&self) -> Vec<u64> {
        self.single_b
            .iter()
            .zip(&self.paired_b)
            .map(|(s, p)| s + p)
            .collect()
    }

    pub fn to_tallies(&self) -> DetectionTallies {
        let f = |v: &[u64]| v.iter().map(|&c| c as f64).collect::<Vec<f64>>();
        DetectionTallies {
            single_a: f(&self.single_a),
            single_b: f(&self.single_b),
            paired_a: f(&self.paired_a),
            paired_b: f(&self.paired_b),
            aa: f(&self.aa),
            bb: f(&self.bb),
            ab: f(&self.ab),
        }
    }
}

/// Counts of every classification category for one or more exposures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProcessingReport {
    pub total_events: u64,
    pub singles: u64,
    pub kept_pairs: u64,
    pub rejected_pairs: u64,
    pub discarded_events: u64,
    pub discarded_windows: u64,
    pub kept_aa: u64,
    pub kept_bb: u64,
    pub kept_ab: u64,
}

impl ProcessingReport {
    /// Every input click is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.singles + 2 * self.kept_pairs + 2 * self.rejected_pairs + self.discarded_events
            == self.total_events
    }

    pub fn merge(&mut self, other: &Self) {
        self.total_events += other.total_events;
        self.singles += other.singles;
        self.kept_pairs += other.kept_pairs;
        self.rejected_pairs += other.rejected_pairs;
        self.discarded_events += other.discarded_events;
        self.discarded_windows += other.discarded_windows;
        self.kept_aa += other.kept_aa;
        self.kept_bb += other.kept_bb;
        self.kept_ab += other.kept_ab;
    }
}

impl fmt::Display for ProcessingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_events={}", self.total_events)?;
        writeln!(f, "singles={}", self.singles)?;
        writeln!(f, "kept_pairs={}", self.kept_pairs)?;
        writeln!(f, "kept_aa={}", self.kept_aa)?;
        writeln!(f, "kept_bb={}", self.kept_bb)?;
        writeln!(f, "kept_ab={}", self.kept_ab)?;
        writeln!(f, "rejected_pairs={}", self.rejected_pairs)?;
        writeln!(f, "discarded_events={}", self.discarded_events)?;
        writeln!(f, "discarded_windows={}", self.discarded_windows)?;
        writeln!(f, "conserved={}", self.is_conserved())
    }
}

/// Single-pass processor for a time-sorted click stream. Memory is bounded
/// by the window occupancy plus the histograms.
#[derive(Debug, Clone)]
pub struct TagProcessor {
    settings: ProcessorSettings,
    n_bins: usize,
    window: Vec<ClickEvent>,
    last: Option<ClickEvent>,
    raw: RawSpectra,
    report: ProcessingReport,
}

impl TagProcessor {
    pub fn new(grid: &SpectralGrid, settings: ProcessorSettings) -> Result<Self> {
        settings.validate()?;
        let n_bins = grid.n_bins();
        Ok(Self {
            settings,
            n_bins,
            window: Vec::with_capacity(4),
            last: None,
            raw: RawSpectra::zeros(n_bins),
            report: ProcessingReport::default(),
        })
    }

    pub fn push(&mut self, event: ClickEvent) -> Result<()> {
        if let Some(last) = self.last {
            if event < last {
                return Err(Error::UnsortedEvents(self.report.total_events as usize));
            }
        }
        if event.bin as usize >= self.n_bins {
            return Err(Error::BinOutOfRange {
                index: event.bin as usize,
                n_bins: self.n_bins,
            });
        }
        self.last = Some(event);
        self.report.total_events += 1;
        self.raw.add_click(&event)?;
        if let Some(first) = self.window.first() {
            if event.timestamp_ns - first.timestamp_ns > self.settings.coincidence_window_ns {
                self.close_window()?;
            }
        }
        self.window.push(event);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = ClickEvent>>(&mut self, events: I) -> Result<()> {
        events.into_iter().try_for_each(|e| self.push(e))
    }

    fn close_window(&mut self) -> Result<()> {
        match self.window.as_slice() {
            [] => {}
            [single] => {
                self.raw.add_single(single)?;
                self.report.singles += 1;
            }
            [first, second] => {
                let pair = ClickPair {
                    first: *first,
                    second: *second,
                };
                if pair.energy_mismatch(self.n_bins) <= self.settings.energy_tolerance_bins {
                    self.raw.add_pair(&pair)?;
                    self.report.kept_pairs += 1;
                    match (first.channel, second.channel) {
                        (Channel::A, Channel::A) => self.report.kept_aa += 1,
                        (Channel::B, Channel::B) => self.report.kept_bb += 1,
                        _ => self.report.kept_ab += 1,
                    }
                } else {
                    self.report.rejected_pairs += 1;
                }
            }
            many => {
                self.report.discarded_events += many.len() as u64;
                self.report.discarded_windows += 1;
            }
        }
        self.window.clear();
        Ok(())
    }

    pub fn finish(mut self) -> Result<(RawSpectra, ProcessingReport)> {
        self.close_window()?;
        Ok((self.raw, self.report))
    }
}

/// Runs the full windowing and filtering chain over a sorted event list.
pub fn process_events(
    events: &[ClickEvent],
    grid: &SpectralGrid,
    settings: &ProcessorSettings,
) -> Result<(RawSpectra, ProcessingReport)> {
    let mut p = TagProcessor::new(grid, *settings)?;
    p.extend(events.iter().copied())?;
    p.finish()
}

/// Efficiency-corrected rates from classified clicks.
pub fn accumulate(
    kept: &[ClickPair],
    singles: &[ClickEvent],
    ratio: &EfficiencyRatio,
    grid: &SpectralGrid,
    delay: f64,
) -> Result<SpectraSet> {
    let raw = RawSpectra::from_classified(grid.n_bins(), kept, singles)?;
    corrected_rates(&raw.to_tallies(), ratio, delay)
}

/// `eta_B / eta_A` per bin from measured click histograms of the two ports.
pub fn estimate_efficiency_ratio(clicks_a: &[u64], clicks_b: &[u64]) -> Result<EfficiencyRatio> {
    let f = |v: &[u64]| v.iter().map(|&c| c as f64).collect::<Vec<f64>>();
    efficiency_ratio_from_singles(&f(clicks_a), &f(clicks_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: u64, ch: Channel, bin: u16) -> ClickEvent {
        ClickEvent {
            timestamp_ns: t,
            channel: ch,
            bin,
        }
    }

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(810.0, 155.0, n).unwrap()
    }

    #[test]
    fn ten_ns_apart_is_a_pair() {
        let p = pair_events(
            &[ev(100, Channel::A, 3), ev(110, Channel::B, 12)],
            &ProcessorSettings::default(),
        )
        .unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert!(p.singles.is_empty());
    }

    #[test]
    fn thirty_ns_apart_are_singles() {
        let p = pair_events(
            &[ev(100, Channel::A, 3), ev(130, Channel::B, 12)],
            &ProcessorSettings::default(),
        )
        .unwrap();
        assert!(p.pairs.is_empty());
        assert_eq!(p.singles.len(), 2);
    }

    #[test]
    fn window_edge_is_inclusive() {
        let s = ProcessorSettings::default();
        assert_eq!(
            pair_events(&[ev(0, Channel::A, 0), ev(25, Channel::A, 1)], &s)
                .unwrap()
                .pairs
                .len(),
            1
        );
        assert_eq!(
            pair_events(&[ev(0, Channel::A, 0), ev(26, Channel::A, 1)], &s)
                .unwrap()
                .pairs
                .len(),
            0
        );
    }

    #[test]
    fn triple_window_discarded() {
        let events = [
            ev(0, Channel::A, 0),
            ev(5, Channel::B, 1),
            ev(20, Channel::A, 2),
            ev(100, Channel::A, 3),
        ];
        let p = pair_events(&events, &ProcessorSettings::default()).unwrap();
        assert_eq!(p.discarded, 3);
        assert_eq!(p.singles.len(), 1);
    }

    #[test]
    fn unsorted_rejected() {
        let events = [ev(10, Channel::A, 0), ev(5, Channel::A, 1)];
        assert!(matches!(
            pair_events(&events, &ProcessorSettings::default()),
            Err(Error::UnsortedEvents(1))
        ));
        let mut p = TagProcessor::new(&grid(4), ProcessorSettings::default()).unwrap();
        assert!(p.extend(events).is_err());
    }

    #[test]
    fn energy_filter_examples() {
        let g = grid(256);
        let s = ProcessorSettings::default();
        let partner = ClickPair {
            first: ev(0, Channel::A, 10),
            second: ev(3, Channel::B, 245),
        };
        let same = ClickPair {
            first: ev(0, Channel::A, 10),
            second: ev(3, Channel::B, 10),
        };
        let (kept, rejected) = energy_filter(&[partner, same], &g, &s).unwrap();
        assert_eq!(kept, vec![partner]);
        assert_eq!(rejected, vec![same]);
        let strict = ProcessorSettings {
            energy_tolerance_bins: 0,
            ..s
        };
        assert_eq!(energy_filter(&[partner], &g, &strict).unwrap().0.len(), 1);
    }

    #[test]
    fn no_pairs_gives_singles_only() {
        let g = grid(8);
        let singles = [
            ev(0, Channel::A, 1),
            ev(100, Channel::B, 1),
            ev(200, Channel::A, 6),
        ];
        let ratio = EfficiencyRatio(vec![Some(1.0); 8]);
        let set = accumulate(&[], &singles, &ratio, &g, 0.0).unwrap();
        assert!(set.c_plus.iter().chain(&set.c_minus).all(|&c| c == 0.0));
        assert_eq!(set.s[1], 2.0);
        assert_eq!(set.s[6], 1.0);
    }

    #[test]
    fn antibunched_pairs_are_negative() {
        let g = grid(8);
        let kept: Vec<ClickPair> = (0..8u16)
            .map(|i| ClickPair {
                first: ev(i as u64 * 100, Channel::A, i),
                second: ev(i as u64 * 100 + 2, Channel::B, 7 - i),
            })
            .collect();
        let ratio = EfficiencyRatio(vec![Some(1.0); 8]);
        let set = accumulate(&kept, &[], &ratio, &g, 0.0).unwrap();
        assert!(set.c_minus.iter().all(|&c| c < 0.0));
        assert!(set.c_plus.iter().all(|&c| c == 2.0));
    }

    #[test]
    fn bunched_pair_stored_on_both_ends() {
        let mut raw = RawSpectra::zeros(8);
        raw.add_pair(&ClickPair {
            first: ev(0, Channel::B, 6),
            second: ev(1, Channel::B, 1),
        })
        .unwrap();
        assert_eq!(raw.bb, vec![0, 1, 0, 0, 0, 0, 1, 0]);
        assert_eq!(raw.paired_b, vec![0, 1, 0, 0, 0, 0, 1, 0]);
        assert_eq!(raw.joint_bb.get(&(6, 1)), Some(&1));
    }

    #[test]
    fn off_diagonal_pairs_project_onto_diagonal() {
        let mut raw = RawSpectra::zeros(8);
        // A in bin 2, B in bin 4: partner of 4 is 3, so the A photon sits
        // between bins 2 and 3.
        raw.add_pair(&ClickPair {
            first: ev(0, Channel::A, 2),
            second: ev(1, Channel::B, 4),
        })
        .unwrap();
        assert_eq!(raw.ab[2], 1);
        raw.add_pair(&ClickPair {
            first: ev(0, Channel::A, 3),
            second: ev(1, Channel::A, 3),
        })
        .unwrap();
        assert_eq!(raw.aa[3] + raw.aa[4], 2);
    }

    #[test]
    fn efficiency_ratio_from_counts() {
        let r = estimate_efficiency_ratio(&[100, 0, 50], &[50, 10, 50]).unwrap();
        assert_eq!(r.0, vec![Some(0.5), None, Some(1.0)]);
    }

    fn arb_events(n_bins: u16) -> impl Strategy<Value = Vec<ClickEvent>> {
        prop::collection::vec((0u64..40, any::<bool>(), 0..n_bins), 0..300).prop_map(|gaps| {
            let mut t = 0;
            let mut events: Vec<ClickEvent> = gaps
                .into_iter()
                .map(|(gap, b, bin)| {
                    t += gap;
                    ev(t, if b { Channel::B } else { Channel::A }, bin)
                })
                .collect();
            events.sort();
            events
        })
    }

    proptest! {
        #[test]
        fn events_are_conserved(events in arb_events(16), tol in 0usize..4, window in 1u64..40) {
            let g = grid(16);
            let settings = ProcessorSettings { coincidence_window_ns: window, energy_tolerance_bins: tol };
            let (raw, report) = process_events(&events, &g, &settings).unwrap();
            prop_assert!(report.is_conserved());
            prop_assert_eq!(report.total_events, events.len() as u64);
            let pairing = pair_events(&events, &settings).unwrap();
            let (kept, rejected) = energy_filter(&pairing.pairs, &g, &settings).unwrap();
            prop_assert_eq!(pairing.singles.len() as u64, report.singles);
            prop_assert_eq!(kept.len() as u64, report.kept_pairs);
            prop_assert_eq!(rejected.len() as u64, report.rejected_pairs);
            prop_assert_eq!(pairing.discarded as u64, report.discarded_events);
            let mut expected = RawSpectra::from_classified(16, &kept, &pairing.singles).unwrap();
            prop_assert_eq!(raw.clicks_a.iter().chain(&raw.clicks_b).sum::<u64>(), events.len() as u64);
            expected.clicks_a = raw.clicks_a.clone();
            expected.clicks_b = raw.clicks_b.clone();
            prop_assert_eq!(raw, expected);
        }

        #[test]
        fn isolated_events_are_singles(n in 0usize..50, bins in prop::collection::vec(0u16..16, 50)) {
            let events: Vec<ClickEvent> = (0..n).map(|k| ev(k as u64 * 26, Channel::A, bins[k])).collect();
            let p = pair_events(&events, &ProcessorSettings::default()).unwrap();
            prop_assert_eq!(p.singles.len(), n);
            prop_assert!(p.pairs.is_empty());
        }

        #[test]
        fn merge_is_commutative(a in arb_events(8), b in arb_events(8)) {
            let g = grid(8);
            let s = ProcessorSettings::default();
            let (ra, _) = process_events(&a, &g, &s).unwrap();
            let (rb, _) = process_events(&b, &g, &s).unwrap();
            let mut ab = ra.clone();
            ab.merge(&rb).unwrap();
            let mut ba = rb;
            ba.merge(&ra).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
