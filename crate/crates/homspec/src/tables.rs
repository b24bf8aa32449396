//! CSV tables: sample responses, per-scan spectra, reconstruction results,
//! interferograms and joint spectra.
//!
//! Every table starts with `#` metadata lines, the first naming the table
//! kind and the second the grid it was computed on. Floats are written in
//! the shortest form that parses back to the same value, so reading a table
//! written here is lossless.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use homspec_core::model::{corrected_rates, EfficiencyRatio, SpectraSet};
use homspec_core::reconstruction::{MaskedSeries, ReconstructionResult};
use homspec_core::tags::RawSpectra;
use homspec_core::{Configuration, SampleResponse, SpectralGrid};

use crate::error::{FormatError, FormatResult};

/// The parameters a grid was built from, recorded next to its provenance so
/// that readers rebuild a bit-identical grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub center_wavelength_nm: f64,
    pub bandwidth_nm: f64,
    pub n_bins: usize,
}

impl GridSpec {
    pub fn build(&self) -> homspec_core::Result<SpectralGrid> {
        SpectralGrid::new(self.center_wavelength_nm, self.bandwidth_nm, self.n_bins)
    }

    fn header_line(&self) -> FormatResult<String> {
        let grid = self.build()?;
        Ok(format!(
            "# {} center_wavelength_nm={} bandwidth_nm={}",
            grid.provenance(),
            self.center_wavelength_nm,
            self.bandwidth_nm
        ))
    }

    fn parse(meta: &Meta) -> FormatResult<Self> {
        let line = meta
            .grid_line
            .ok_or_else(|| FormatError::text(1, "missing `# grid ...` header"))?;
        let get = |k: &str| -> FormatResult<&str> {
            meta.grid
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| FormatError::text(line, format!("grid header lacks `{k}`")))
        };
        let num = |k: &str| -> FormatResult<f64> {
            let v = get(k)?;
            v.parse()
                .map_err(|_| FormatError::text(line, format!("invalid {k} `{v}`")))
        };
        let n_bins = get("n_bins")?
            .parse()
            .map_err(|_| FormatError::text(line, "invalid n_bins"))?;
        let spec = match (
            meta.grid.contains_key("center_wavelength_nm"),
            meta.grid.contains_key("bandwidth_nm"),
        ) {
            (true, true) => Self {
                center_wavelength_nm: num("center_wavelength_nm")?,
                bandwidth_nm: num("bandwidth_nm")?,
                n_bins,
            },
            _ => Self {
                center_wavelength_nm: 2.0 * num("pump_wavelength_nm")?,
                bandwidth_nm: num("max_wavelength_nm")? - num("min_wavelength_nm")?,
                n_bins,
            },
        };
        spec.build()
            .map_err(|e| FormatError::text(line, e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Default)]
struct Meta {
    kind: Option<String>,
    grid_line: Option<u64>,
    grid: BTreeMap<String, String>,
    fields: BTreeMap<String, (u64, String)>,
}

impl Meta {
    fn scan(text: &str) -> Self {
        let mut meta = Meta::default();
        for (k, line) in text.lines().enumerate() {
            let Some(body) = line.trim().strip_prefix('#') else {
                break;
            };
            let body = body.trim();
            let number = k as u64 + 1;
            if let Some(rest) = body.strip_prefix("grid ") {
                meta.grid_line = Some(number);
                for kv in rest.split_whitespace() {
                    if let Some((a, b)) = kv.split_once('=') {
                        meta.grid.insert(a.to_string(), b.to_string());
                    }
                }
            } else if let Some((a, b)) = body.split_once('=') {
                meta.fields
                    .insert(a.trim().to_string(), (number, b.trim().to_string()));
            } else if meta.kind.is_none() {
                meta.kind = Some(body.to_string());
            }
        }
        meta
    }

    fn expect_kind(&self, kind: &str) -> FormatResult<()> {
        match self.kind.as_deref() {
            Some(k) if k == kind => Ok(()),
            other => Err(FormatError::text(
                1,
                format!("expected a `# {kind}` table, found {other:?}"),
            )),
        }
    }

    fn field<T: std::str::FromStr>(&self, key: &str) -> FormatResult<T> {
        let (line, v) = self
            .fields
            .get(key)
            .ok_or_else(|| FormatError::text(1, format!("missing `# {key}=` header")))?;
        v.parse()
            .map_err(|_| FormatError::text(*line, format!("invalid value for {key}: `{v}`")))
    }
}

struct Table {
    meta: Meta,
    columns: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read<R: Read>(mut reader: R) -> FormatResult<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let meta = Meta::scan(&text);
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns = csv.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Self {
            meta,
            columns,
            rows,
        })
    }

    fn expect_columns(&self, prefix: &[&str]) -> FormatResult<()> {
        let ok = prefix.len() <= self.columns.len()
            && prefix.iter().zip(&self.columns).all(|(a, b)| a == b);
        if !ok {
            let line = self.meta.fields.len() as u64 + 3;
            return Err(FormatError::text(
                line,
                format!("expected columns starting with {}", prefix.join(",")),
            ));
        }
        Ok(())
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn parse_cell<T: std::str::FromStr>(
    row: &(u64, csv::StringRecord),
    idx: usize,
    name: &str,
) -> FormatResult<T> {
    let v = row
        .1
        .get(idx)
        .ok_or_else(|| FormatError::text(row.0, format!("missing column `{name}`")))?;
    v.parse()
        .map_err(|_| FormatError::text(row.0, format!("invalid {name} `{v}`")))
}

fn flag(valid: bool) -> u8 {
    u8::from(!valid)
}

// ---------------------------------------------------------------- samples

const SAMPLE_KIND: &str = "homspec sample";

/// Writes a sample response table (`wavelength_nm,absorbance,phase_rad`).
pub fn write_sample<W: Write>(
    mut w: W,
    grid: &GridSpec,
    sample: &SampleResponse,
) -> FormatResult<()> {
    let g = grid.build()?;
    writeln!(w, "# {SAMPLE_KIND}")?;
    writeln!(w, "{}", grid.header_line()?)?;
    writeln!(w, "wavelength_nm,absorbance,phase_rad")?;
    for ((wl, a), p) in g
        .wavelengths_nm()
        .iter()
        .zip(sample.absorbance())
        .zip(sample.phase())
    {
        writeln!(w, "{wl},{a},{p}")?;
    }
    w.flush()?;
    Ok(())
}

/// A sample table as read back: its grid (when recorded), wavelengths,
/// absorbance and phase. The phase column is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub grid: Option<GridSpec>,
    pub wavelengths_nm: Vec<f64>,
    pub absorbance: Vec<f64>,
    pub phase: Option<Vec<f64>>,
}

pub fn read_sample<R: Read>(reader: R) -> FormatResult<SampleTable> {
    let t = Table::read(reader)?;
    t.expect_columns(&["wavelength_nm", "absorbance"])?;
    let grid = if t.meta.grid_line.is_some() {
        Some(GridSpec::parse(&t.meta)?)
    } else {
        None
    };
    let phase_col = t.column("phase_rad");
    let mut out = SampleTable {
        grid,
        wavelengths_nm: vec![],
        absorbance: vec![],
        phase: phase_col.map(|_| vec![]),
    };
    for row in &t.rows {
        out.wavelengths_nm
            .push(parse_cell(row, 0, "wavelength_nm")?);
        out.absorbance.push(parse_cell(row, 1, "absorbance")?);
        if let (Some(c), Some(p)) = (phase_col, out.phase.as_mut()) {
            p.push(parse_cell(row, c, "phase_rad")?);
        }
    }
    if let Some(g) = &out.grid {
        if g.n_bins != out.absorbance.len() {
            return Err(FormatError::text(
                t.meta.grid_line.unwrap_or(1),
                format!(
                    "grid has {} bins but the table has {} rows",
                    g.n_bins,
                    out.absorbance.len()
                ),
            ));
        }
    }
    Ok(out)
}

impl SampleTable {
    /// The response on `grid`, checking that the rows match its bins.
    pub fn to_response(&self, grid: &SpectralGrid) -> FormatResult<SampleResponse> {
        if self.absorbance.len() != grid.n_bins() {
            return Err(FormatError::text(
                1,
                format!(
                    "table has {} rows but the grid has {} bins",
                    self.absorbance.len(),
                    grid.n_bins()
                ),
            ));
        }
        for (k, (a, b)) in self
            .wavelengths_nm
            .iter()
            .zip(grid.wavelengths_nm())
            .enumerate()
        {
            if (a - b).abs() > 1e-6 * b {
                return Err(FormatError::text(
                    1,
                    format!("row {k}: wavelength {a} nm does not match grid bin at {b} nm"),
                ));
            }
        }
        let phase = self
            .phase
            .clone()
            .unwrap_or_else(|| vec![0.0; grid.n_bins()]);
        Ok(SampleResponse::new(grid, self.absorbance.clone(), phase)?)
    }
}

// ---------------------------------------------------------------- spectra

const SPECTRA_KIND: &str = "homspec spectra";
const SPECTRA_COLUMNS: [&str; 16] = [
    "delay_fs",
    "bin",
    "wavelength_nm",
    "clicks_a",
    "clicks_b",
    "single_a",
    "single_b",
    "paired_a",
    "paired_b",
    "aa",
    "bb",
    "ab",
    "S",
    "C_plus",
    "C_minus",
    "valid",
];

/// Raw tallies of one configuration's delay scan in one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFile {
    pub grid: GridSpec,
    pub configuration: Configuration,
    pub repeat: u32,
    pub delays_fs: Vec<f64>,
    pub spectra: Vec<RawSpectra>,
}

impl ScanFile {
    /// Click histograms of both ports summed over the scan.
    pub fn clicks(&self) -> (Vec<u64>, Vec<u64>) {
        let n = self.grid.n_bins;
        let (mut a, mut b) = (vec![0; n], vec![0; n]);
        for s in &self.spectra {
            a.iter_mut().zip(&s.clicks_a).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(&s.clicks_b).for_each(|(x, y)| *x += y);
        }
        (a, b)
    }

    /// Corrected spectra of every delay step using `ratio`.
    pub fn corrected(&self, ratio: &EfficiencyRatio) -> homspec_core::Result<Vec<SpectraSet>> {
        self.delays_fs
            .iter()
            .zip(&self.spectra)
            .map(|(&d, raw)| corrected_rates(&raw.to_tallies(), ratio, fs_to_seconds(d)))
            .collect()
    }
}

/// Stage delays are kept in femtoseconds in files and converted here, once.
pub fn fs_to_seconds(fs: f64) -> f64 {
    fs * 1e-15
}

/// Writes a scan table. The corrected columns use `ratio`; readers recompute
/// them from the raw tallies.
pub fn write_spectra<W: Write>(
    mut w: W,
    scan: &ScanFile,
    ratio: &EfficiencyRatio,
) -> FormatResult<()> {
    let grid = scan.grid.build()?;
    writeln!(w, "# {SPECTRA_KIND}")?;
    writeln!(w, "{}", scan.grid.header_line()?)?;
    writeln!(w, "# configuration={}", scan.configuration)?;
    writeln!(w, "# repeat={}", scan.repeat)?;
    writeln!(w, "{}", SPECTRA_COLUMNS.join(","))?;
    let sets = scan.corrected(ratio)?;
    for ((d, raw), set) in scan.delays_fs.iter().zip(&scan.spectra).zip(&sets) {
        for i in 0..grid.n_bins() {
            writeln!(
                w,
                "{d},{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                grid.wavelengths_nm()[i],
                raw.clicks_a[i],
                raw.clicks_b[i],
                raw.single_a[i],
                raw.single_b[i],
                raw.paired_a[i],
                raw.paired_b[i],
                raw.aa[i],
                raw.bb[i],
                raw.ab[i],
                set.s[i],
                set.c_plus[i],
                set.c_minus[i],
                u8::from(set.valid[i]),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectra<R: Read>(reader: R) -> FormatResult<ScanFile> {
    let t = Table::read(reader)?;
    t.meta.expect_kind(SPECTRA_KIND)?;
    t.expect_columns(&SPECTRA_COLUMNS[..12])?;
    let grid = GridSpec::parse(&t.meta)?;
    let configuration: String = t.meta.field("configuration")?;
    let configuration = configuration
        .parse::<Configuration>()
        .map_err(|e| FormatError::text(t.meta.fields["configuration"].0, e.to_string()))?;
    let repeat = t.meta.field("repeat")?;
    let n = grid.n_bins;
    let mut scan = ScanFile {
        grid,
        configuration,
        repeat,
        delays_fs: vec![],
        spectra: vec![],
    };
    for (k, row) in t.rows.iter().enumerate() {
        let bin: usize = parse_cell(row, 1, "bin")?;
        if bin != k % n {
            return Err(FormatError::text(
                row.0,
                format!("expected bin {}, found {bin}", k % n),
            ));
        }
        let delay: f64 = parse_cell(row, 0, "delay_fs")?;
        if bin == 0 {
            if let Some(&last) = scan.delays_fs.last() {
                if !(delay > last) {
                    return Err(FormatError::text(
                        row.0,
                        "delays must be strictly increasing",
                    ));
                }
            }
            scan.delays_fs.push(delay);
            scan.spectra.push(RawSpectra::zeros(n));
        } else if delay != *scan.delays_fs.last().unwrap() {
            return Err(FormatError::text(
                row.0,
                "delay changes inside a block of bins",
            ));
        }
        let raw = scan.spectra.last_mut().unwrap();
        let cols: [(&mut Vec<u64>, usize); 9] = [
            (&mut raw.clicks_a, 3),
            (&mut raw.clicks_b, 4),
            (&mut raw.single_a, 5),
            (&mut raw.single_b, 6),
            (&mut raw.paired_a, 7),
            (&mut raw.paired_b, 8),
            (&mut raw.aa, 9),
            (&mut raw.bb, 10),
            (&mut raw.ab, 11),
        ];
        for (v, c) in cols {
            v[bin] = parse_cell(row, c, SPECTRA_COLUMNS[c])?;
        }
    }
    if t.rows.len() % n != 0 {
        let line = t.rows.last().map(|r| r.0).unwrap_or(1);
        return Err(FormatError::text(
            line,
            format!("last delay block has {} of {n} bins", t.rows.len() % n),
        ));
    }
    Ok(scan)
}

// ---------------------------------------------------------------- results

const RESULT_KIND: &str = "homspec result";
pub const RESULT_COLUMNS: [&str; 11] = [
    "bin",
    "wavelength_nm",
    "T_ratio",
    "T_ratio_stderr",
    "T_singles_only",
    "T_singles_only_stderr",
    "phase_rad",
    "phase_stderr",
    "T_ratio_masked",
    "T_singles_only_masked",
    "phase_masked",
];

/// Writes the reconstruction over the short-wavelength half. `truth` adds
/// ground-truth columns when the sample is known.
pub fn write_result<W: Write>(
    mut w: W,
    grid: &GridSpec,
    result: &ReconstructionResult,
    truth: Option<(&[f64], &[f64])>,
) -> FormatResult<()> {
    let g = grid.build()?;
    writeln!(w, "# {RESULT_KIND}")?;
    writeln!(w, "{}", grid.header_line()?)?;
    writeln!(w, "# repeats={}", result.repeats)?;
    let mut cols: Vec<&str> = RESULT_COLUMNS.to_vec();
    if truth.is_some() {
        cols.extend(["true_T_ratio", "true_phase_rad"]);
    }
    writeln!(w, "{}", cols.join(","))?;
    let (t, s, p) = (&result.transmission, &result.singles_only, &result.phase);
    for i in 0..t.len() {
        write!(
            w,
            "{i},{},{},{},{},{},{},{},{},{},{}",
            g.wavelengths_nm()[i],
            t.values[i],
            t.stderr[i],
            s.values[i],
            s.stderr[i],
            p.values[i],
            p.stderr[i],
            flag(t.valid[i]),
            flag(s.valid[i]),
            flag(p.valid[i]),
        )?;
        if let Some((tt, tp)) = truth {
            write!(w, ",{},{}", tt[i], tp[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Result series read back from a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub grid: GridSpec,
    pub repeats: usize,
    pub transmission: MaskedSeries,
    pub singles_only: MaskedSeries,
    pub phase: MaskedSeries,
}

pub fn read_result<R: Read>(reader: R) -> FormatResult<ResultTable> {
    let t = Table::read(reader)?;
    t.meta.expect_kind(RESULT_KIND)?;
    t.expect_columns(&RESULT_COLUMNS)?;
    let grid = GridSpec::parse(&t.meta)?;
    let len = t.rows.len();
    let mut out = ResultTable {
        grid,
        repeats: t.meta.field("repeats")?,
        transmission: MaskedSeries::masked(len),
        singles_only: MaskedSeries::masked(len),
        phase: MaskedSeries::masked(len),
    };
    for (k, row) in t.rows.iter().enumerate() {
        for (series, v, e, m) in [
            (&mut out.transmission, 2, 3, 8),
            (&mut out.singles_only, 4, 5, 9),
            (&mut out.phase, 6, 7, 10),
        ] {
            series.values[k] = parse_cell(row, v, RESULT_COLUMNS[v])?;
            series.stderr[k] = parse_cell(row, e, RESULT_COLUMNS[e])?;
            series.valid[k] = parse_cell::<u8>(row, m, RESULT_COLUMNS[m])? == 0;
        }
    }
    Ok(out)
}

// ----------------------------------------------------- matrices

/// Rows are stage delays, columns the short-half bins `i` (paired with
/// `N - 1 - i`), values the corrected antibunching difference `C-`.
pub fn write_interferogram<W: Write>(
    mut w: W,
    grid: &GridSpec,
    configuration: Configuration,
    delays_fs: &[f64],
    rows: &[Vec<f64>],
) -> FormatResult<()> {
    let n = grid.n_bins;
    writeln!(w, "# homspec interferogram")?;
    writeln!(w, "{}", grid.header_line()?)?;
    writeln!(w, "# configuration={configuration}")?;
    write!(w, "delay_fs")?;
    for i in 0..n / 2 {
        write!(w, ",pair_{i}_{}", n - 1 - i)?;
    }
    writeln!(w)?;
    for (d, row) in delays_fs.iter().zip(rows) {
        write!(w, "{d}")?;
        for v in &row[..n / 2] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Dense joint spectrum of kept pairs: entry `(u, v)` counts pairs whose
/// lower bin is `u` and higher bin `v`.
pub fn write_joint<W: Write>(
    mut w: W,
    grid: &GridSpec,
    configuration: Configuration,
    counts: &BTreeMap<(u16, u16), u64>,
) -> FormatResult<()> {
    let n = grid.n_bins;
    let mut dense = vec![0u64; n * n];
    for (&(u, v), &c) in counts {
        let (lo, hi) = (u.min(v) as usize, u.max(v) as usize);
        dense[lo * n + hi] += c;
    }
    writeln!(w, "# homspec joint")?;
    writeln!(w, "{}", grid.header_line()?)?;
    writeln!(w, "# configuration={configuration}")?;
    write!(w, "bin")?;
    for j in 0..n {
        write!(w, ",{j}")?;
    }
    writeln!(w)?;
    for i in 0..n {
        write!(w, "{i}")?;
        for j in 0..n {
            write!(w, ",{}", dense[i * n + j])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use homspec_core::sample::lorentzian_response;

    fn spec() -> GridSpec {
        GridSpec {
            center_wavelength_nm: 810.0,
            bandwidth_nm: 155.0,
            n_bins: 8,
        }
    }

    #[test]
    fn sample_round_trip_is_lossless() {
        let g = spec().build().unwrap();
        let s = lorentzian_response(&g, 770.0, 10.0, 2.0).unwrap();
        let mut buf = Vec::new();
        write_sample(&mut buf, &spec(), &s).unwrap();
        let back = read_sample(&buf[..]).unwrap();
        assert_eq!(back.grid, Some(spec()));
        assert_eq!(back.to_response(&g).unwrap(), s);
    }

    #[test]
    fn sample_without_phase_or_grid() {
        let text = "wavelength_nm,absorbance\n1,0.5\n2,0.25\n";
        let t = read_sample(text.as_bytes()).unwrap();
        assert!(t.grid.is_none() && t.phase.is_none());
        assert_eq!(t.absorbance, vec![0.5, 0.25]);
    }

    fn scan() -> ScanFile {
        let mut a = RawSpectra::zeros(8);
        a.clicks_a[1] = 5;
        a.clicks_b[6] = 3;
        a.single_a[1] = 2;
        a.ab[1] = 1;
        a.ab[6] = 1;
        let mut b = RawSpectra::zeros(8);
        b.aa[2] = 4;
        ScanFile {
            grid: spec(),
            configuration: Configuration::BlockedSample,
            repeat: 3,
            delays_fs: vec![-0.1, 4.0],
            spectra: vec![a, b],
        }
    }

    #[test]
    fn spectra_round_trip_keeps_raw_tallies() {
        let s = scan();
        let mut buf = Vec::new();
        write_spectra(&mut buf, &s, &EfficiencyRatio(vec![Some(1.0); 8])).unwrap();
        assert_eq!(read_spectra(&buf[..]).unwrap(), s);
    }

    #[test]
    fn spectra_errors_name_the_line() {
        let mut buf = Vec::new();
        write_spectra(&mut buf, &scan(), &EfficiencyRatio(vec![Some(1.0); 8])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[8] = lines[8].replacen(",3,", ",x,", 1);
        let err = read_spectra(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Text { line: 9, .. }), "{err}");

        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(read_spectra(truncated.as_bytes()).is_err());
    }

    #[test]
    fn result_round_trip() {
        let mut t = MaskedSeries::masked(4);
        t.values = vec![1.0, 0.5, f64::NAN, 2.0];
        t.stderr = vec![0.1, 0.0, f64::NAN, 0.2];
        t.valid = vec![true, true, false, true];
        let r = ReconstructionResult {
            transmission: t.clone(),
            singles_only: t.clone(),
            phase: t,
            cuvette_delay_sample: 0.0,
            cuvette_delay_reference: 0.0,
            cuvette_delay_sample_stderr: f64::NAN,
            cuvette_delay_reference_stderr: f64::NAN,
            reduced_chi2_sample: None,
            reduced_chi2_reference: None,
            repeats: 2,
        };
        let mut buf = Vec::new();
        write_result(&mut buf, &spec(), &r, None).unwrap();
        let back = read_result(&buf[..]).unwrap();
        assert_eq!(back.repeats, 2);
        assert_eq!(back.transmission.valid, r.transmission.valid);
        assert_eq!(back.phase.values[3], 2.0);
        assert!(back.phase.values[2].is_nan());
    }
}
