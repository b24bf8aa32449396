//! Event files: the bit-exact binary format and its lossless CSV export.
//!
//! Binary layout (little endian): a 64-byte header
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 8 | magic `HOMEVT01` |
//! | 8 | 4 | format version (1) |
//! | 12 | 4 | number of spectral bins |
//! | 16 | 8 | exposure duration, ns |
//! | 24 | 8 | exposure seed |
//! | 32 | 8 | configuration hash |
//! | 40 | 8 | stage delay, fs (IEEE 754 double) |
//! | 48 | 16 | zero |
//!
//! followed by 11-byte records: timestamp (u64 ns), channel (u8, 0 = A,
//! 1 = B), bin (u16).

use std::io::{self, BufRead, Read, Write};

use homspec_core::simulator::{Channel, ClickEvent, ExposureRecord};

use crate::error::{FormatError, FormatResult};

pub const MAGIC: &[u8; 8] = b"HOMEVT01";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
pub const RECORD_LEN: usize = 11;
const CSV_BANNER: &str = "# homspec events";
const CSV_COLUMNS: &str = "timestamp_ns,channel,bin";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHeader {
    pub n_bins: u32,
    pub duration_ns: u64,
    pub seed: u64,
    pub config_hash: u64,
    pub delay_fs: f64,
}

impl EventHeader {
    pub fn for_record(record: &ExposureRecord, delay_fs: f64) -> Self {
        Self {
            n_bins: record.n_bins as u32,
            duration_ns: record.duration_ns,
            seed: record.seed,
            config_hash: record.config_hash,
            delay_fs,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(MAGIC);
        b[8..12].copy_from_slice(&VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.n_bins.to_le_bytes());
        b[16..24].copy_from_slice(&self.duration_ns.to_le_bytes());
        b[24..32].copy_from_slice(&self.seed.to_le_bytes());
        b[32..40].copy_from_slice(&self.config_hash.to_le_bytes());
        b[40..48].copy_from_slice(&self.delay_fs.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> FormatResult<Self> {
        if &b[0..8] != MAGIC {
            return Err(FormatError::binary(
                0,
                "bad magic, not a homspec event file",
            ));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(FormatError::binary(
                8,
                format!("unsupported format version {version}"),
            ));
        }
        let n_bins = u32_at(12);
        if n_bins == 0 || n_bins > u16::MAX as u32 + 1 {
            return Err(FormatError::binary(
                12,
                format!("invalid bin count {n_bins}"),
            ));
        }
        let delay_fs = f64::from_bits(u64_at(40));
        if !delay_fs.is_finite() {
            return Err(FormatError::binary(40, "stage delay is not finite"));
        }
        Ok(Self {
            n_bins,
            duration_ns: u64_at(16),
            seed: u64_at(24),
            config_hash: u64_at(32),
            delay_fs,
        })
    }
}

pub fn encode_event(e: &ClickEvent) -> [u8; RECORD_LEN] {
    let mut b = [0u8; RECORD_LEN];
    b[0..8].copy_from_slice(&e.timestamp_ns.to_le_bytes());
    b[8] = e.channel as u8;
    b[9..11].copy_from_slice(&e.bin.to_le_bytes());
    b
}

pub fn write_binary<W: Write>(
    mut w: W,
    header: &EventHeader,
    events: &[ClickEvent],
) -> io::Result<()> {
    w.write_all(&header.to_bytes())?;
    for e in events {
        w.write_all(&encode_event(e))?;
    }
    w.flush()
}

pub fn write_csv<W: Write>(
    mut w: W,
    header: &EventHeader,
    events: &[ClickEvent],
) -> io::Result<()> {
    writeln!(w, "{CSV_BANNER}")?;
    writeln!(w, "# version={VERSION}")?;
    writeln!(w, "# n_bins={}", header.n_bins)?;
    writeln!(w, "# duration_ns={}", header.duration_ns)?;
    writeln!(w, "# seed={}", header.seed)?;
    writeln!(w, "# config_hash={}", header.config_hash)?;
    writeln!(w, "# delay_fs={}", header.delay_fs)?;
    writeln!(w, "{CSV_COLUMNS}")?;
    for e in events {
        writeln!(w, "{},{},{}", e.timestamp_ns, e.channel as u8, e.bin)?;
    }
    w.flush()
}

enum Body<R> {
    Binary { reader: R, offset: u64 },
    Csv { lines: io::Lines<R>, line: u64 },
    Empty,
}

/// Streaming reader for either event format, detected from the first bytes.
///
/// Records are validated as they are read: channel codes, bin range and time
/// ordering failures report the byte offset (binary) or line (CSV).
pub struct EventReader<R> {
    header: Option<EventHeader>,
    body: Body<R>,
    previous: Option<ClickEvent>,
    failed: bool,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(mut reader: R) -> FormatResult<Self> {
        let peek = reader.fill_buf()?;
        if peek.is_empty() {
            return Ok(Self {
                header: None,
                body: Body::Empty,
                previous: None,
                failed: false,
            });
        }
        if peek[0] == b'#' || peek[0].is_ascii_digit() || peek[0] == b't' {
            return Self::csv(reader);
        }
        let mut buf = [0u8; HEADER_LEN];
        read_exact_at(&mut reader, &mut buf, 0, "truncated header")?;
        let header = EventHeader::from_bytes(&buf)?;
        Ok(Self {
            header: Some(header),
            body: Body::Binary {
                reader,
                offset: HEADER_LEN as u64,
            },
            previous: None,
            failed: false,
        })
    }

    fn csv(reader: R) -> FormatResult<Self> {
        let mut lines = reader.lines();
        let mut line = 0u64;
        let mut fields = std::collections::BTreeMap::new();
        loop {
            line += 1;
            let Some(text) = lines.next().transpose()? else {
                return Err(FormatError::text(line, "missing column header"));
            };
            let text = text.trim();
            if let Some(meta) = text.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    fields.insert(k.trim().to_string(), (line, v.trim().to_string()));
                }
                continue;
            }
            if text != CSV_COLUMNS {
                return Err(FormatError::text(
                    line,
                    format!("expected column header `{CSV_COLUMNS}`"),
                ));
            }
            break;
        }
        fn get<T: std::str::FromStr>(
            fields: &std::collections::BTreeMap<String, (u64, String)>,
            key: &str,
            header_line: u64,
        ) -> FormatResult<T> {
            let (l, v) = fields.get(key).ok_or_else(|| {
                FormatError::text(header_line, format!("missing `# {key}=` header"))
            })?;
            v.parse()
                .map_err(|_| FormatError::text(*l, format!("invalid value for {key}: `{v}`")))
        }
        let version: u32 = get(&fields, "version", line)?;
        if version != VERSION {
            return Err(FormatError::text(
                line,
                format!("unsupported format version {version}"),
            ));
        }
        let header = EventHeader {
            n_bins: get(&fields, "n_bins", line)?,
            duration_ns: get(&fields, "duration_ns", line)?,
            seed: get(&fields, "seed", line)?,
            config_hash: get(&fields, "config_hash", line)?,
            delay_fs: get(&fields, "delay_fs", line)?,
        };
        Ok(Self {
            header: Some(header),
            body: Body::Csv { lines, line },
            previous: None,
            failed: false,
        })
    }

    /// Header of the file; `None` for a zero-length file.
    pub fn header(&self) -> Option<&EventHeader> {
        self.header.as_ref()
    }

    fn next_raw(&mut self) -> FormatResult<Option<(ClickEvent, Location)>> {
        let n_bins = self.header.map(|h| h.n_bins).unwrap_or(0);
        match &mut self.body {
            Body::Empty => Ok(None),
            Body::Binary { reader, offset } => {
                let at = *offset;
                let mut buf = [0u8; RECORD_LEN];
                let mut filled = 0;
                while filled < RECORD_LEN {
                    let n = reader.read(&mut buf[filled..])?;
                    if n == 0 {
                        break;
                    }
                    filled += n;
                }
                if filled == 0 {
                    return Ok(None);
                }
                if filled < RECORD_LEN {
                    return Err(FormatError::binary(
                        at,
                        format!("truncated record ({filled} of {RECORD_LEN} bytes)"),
                    ));
                }
                *offset += RECORD_LEN as u64;
                let timestamp_ns = u64::from_le_bytes(buf[0..8].try_into().unwrap());
                let channel = Channel::from_u8(buf[8]).ok_or_else(|| {
                    FormatError::binary(at + 8, format!("invalid channel code {}", buf[8]))
                })?;
                let bin = u16::from_le_bytes([buf[9], buf[10]]);
                if bin as u32 >= n_bins {
                    return Err(FormatError::binary(
                        at + 9,
                        format!("bin {bin} out of range for {n_bins} bins"),
                    ));
                }
                Ok(Some((
                    ClickEvent {
                        timestamp_ns,
                        channel,
                        bin,
                    },
                    Location::Offset(at),
                )))
            }
            Body::Csv { lines, line } => loop {
                let Some(text) = lines.next().transpose()? else {
                    return Ok(None);
                };
                *line += 1;
                let l = *line;
                let text = text.trim();
                if text.is_empty() || text.starts_with('#') {
                    continue;
                }
                let mut parts = text.split(',');
                let mut field = |name: &str| -> FormatResult<&str> {
                    parts
                        .next()
                        .map(str::trim)
                        .ok_or_else(|| FormatError::text(l, format!("missing field `{name}`")))
                };
                let ts = field("timestamp_ns")?;
                let ch = field("channel")?;
                let bin = field("bin")?;
                if parts.next().is_some() {
                    return Err(FormatError::text(l, "too many fields"));
                }
                let timestamp_ns = ts
                    .parse()
                    .map_err(|_| FormatError::text(l, format!("invalid timestamp `{ts}`")))?;
                let channel = ch
                    .parse::<u8>()
                    .ok()
                    .and_then(Channel::from_u8)
                    .ok_or_else(|| FormatError::text(l, format!("invalid channel `{ch}`")))?;
                let bin: u16 = bin
                    .parse()
                    .map_err(|_| FormatError::text(l, format!("invalid bin `{bin}`")))?;
                if bin as u32 >= n_bins {
                    return Err(FormatError::text(
                        l,
                        format!("bin {bin} out of range for {n_bins} bins"),
                    ));
                }
                return Ok(Some((
                    ClickEvent {
                        timestamp_ns,
                        channel,
                        bin,
                    },
                    Location::Line(l),
                )));
            },
        }
    }
}

#[derive(Clone, Copy)]
enum Location {
    Offset(u64),
    Line(u64),
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = FormatResult<ClickEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = match self.next_raw() {
            Ok(Some((e, at))) => match self.previous {
                Some(p) if e < p => Err(match at {
                    Location::Offset(o) => FormatError::binary(o, "events are not time-sorted"),
                    Location::Line(l) => FormatError::text(l, "events are not time-sorted"),
                }),
                _ => {
                    self.previous = Some(e);
                    Ok(e)
                }
            },
            Ok(None) => return None,
            Err(e) => Err(e),
        };
        self.failed = item.is_err();
        Some(item)
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> FormatResult<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::binary(offset, what),
        _ => FormatError::Io(e),
    })
}

/// Reads a whole event file into memory.
pub fn read_all<R: BufRead>(reader: R) -> FormatResult<(Option<EventHeader>, Vec<ClickEvent>)> {
    let mut r = EventReader::new(reader)?;
    let header = r.header;
    let events = r.by_ref().collect::<FormatResult<Vec<_>>>()?;
    Ok((header, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (EventHeader, Vec<ClickEvent>) {
        let header = EventHeader {
            n_bins: 8,
            duration_ns: 1000,
            seed: 42,
            config_hash: 7,
            delay_fs: -12.5,
        };
        let events = vec![
            ClickEvent {
                timestamp_ns: 3,
                channel: Channel::A,
                bin: 1,
            },
            ClickEvent {
                timestamp_ns: 3,
                channel: Channel::B,
                bin: 6,
            },
            ClickEvent {
                timestamp_ns: u64::MAX,
                channel: Channel::B,
                bin: 7,
            },
        ];
        (header, events)
    }

    #[test]
    fn record_layout_is_bit_exact() {
        let e = ClickEvent {
            timestamp_ns: 0x0102_0304_0506_0708,
            channel: Channel::B,
            bin: 0x0A0B,
        };
        assert_eq!(encode_event(&e), [8, 7, 6, 5, 4, 3, 2, 1, 1, 0x0B, 0x0A]);
        let (h, _) = sample();
        let b = h.to_bytes();
        assert_eq!(&b[0..8], b"HOMEVT01");
        assert_eq!(&b[8..12], &[1, 0, 0, 0]);
        assert_eq!(&b[12..16], &[8, 0, 0, 0]);
        assert!(b[48..].iter().all(|&x| x == 0));
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let (h, ev) = sample();
        let mut bin = Vec::new();
        write_binary(&mut bin, &h, &ev).unwrap();
        assert_eq!(bin.len(), HEADER_LEN + 3 * RECORD_LEN);
        let (hb, eb) = read_all(&bin[..]).unwrap();
        assert_eq!((hb.unwrap(), eb.clone()), (h, ev.clone()));

        let mut csv = Vec::new();
        write_csv(&mut csv, &h, &ev).unwrap();
        let (hc, ec) = read_all(&csv[..]).unwrap();
        assert_eq!((hc.unwrap(), ec), (h, ev));
    }

    #[test]
    fn empty_input_has_no_header_and_no_events() {
        let (h, ev) = read_all(&b""[..]).unwrap();
        assert!(h.is_none() && ev.is_empty());
    }

    #[test]
    fn diagnostics_carry_offsets() {
        let (h, mut ev) = sample();
        let mut bin = Vec::new();
        write_binary(&mut bin, &h, &ev).unwrap();

        let err = read_all(&bin[..bin.len() - 2]).unwrap_err();
        assert!(
            matches!(err, FormatError::Binary { offset, .. } if offset == 86),
            "{err}"
        );

        let mut bad = bin.clone();
        bad[HEADER_LEN + 8] = 9;
        assert!(matches!(
            read_all(&bad[..]).unwrap_err(),
            FormatError::Binary { offset: 72, .. }
        ));

        let mut bad = bin.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_all(&bad[..]).unwrap_err(),
            FormatError::Binary { offset: 0, .. }
        ));

        assert!(matches!(
            read_all(&bin[..20]).unwrap_err(),
            FormatError::Binary { offset: 0, .. }
        ));

        ev.swap(0, 2);
        let mut bin = Vec::new();
        write_binary(&mut bin, &h, &ev).unwrap();
        let err = read_all(&bin[..]).unwrap_err();
        assert!(
            matches!(err, FormatError::Binary { offset: 75, .. }),
            "{err}"
        );
    }

    #[test]
    fn csv_diagnostics_carry_lines() {
        let (h, ev) = sample();
        let mut csv = Vec::new();
        write_csv(&mut csv, &h, &ev).unwrap();
        let text = String::from_utf8(csv).unwrap().replace("3,1,6", "3,1,60");
        let err = read_all(text.as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Text { line: 10, .. }), "{err}");
    }
}
