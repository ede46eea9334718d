//! Detection records and the two event-file formats.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! header   "ETOA" | version: u8 = 1 | record count: u64          13 bytes
//! record   trigger_id: u64 | channel: u8 | time: f64 (IEEE-754)   17 bytes
//! ```
//!
//! Text layout: a `trigger_id,channel,time` header line, then one CSV line
//! per record with the time printed to 17 significant digits.

use std::fmt;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ETOA";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 13;
pub const RECORD_LEN: usize = 17;
pub const TEXT_HEADER: &str = "trigger_id,channel,time";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Channel {
    Trigger = 0,
    Detector1 = 1,
    Detector2 = 2,
}

impl Channel {
    pub fn from_u8(v: u8) -> Option<Channel> {
        match v {
            0 => Some(Channel::Trigger),
            1 => Some(Channel::Detector1),
            2 => Some(Channel::Detector2),
            _ => None,
        }
    }
}

/// One detection: trigger index, channel, and time relative to the trigger
/// in natural units.
#[derive(Debug, Clone, Copy)]
pub struct EventRecord {
    pub trigger_id: u64,
    pub channel: Channel,
    pub time: f64,
}

impl PartialEq for EventRecord {
    /// Bit-exact on the time.
    fn eq(&self, other: &Self) -> bool {
        self.trigger_id == other.trigger_id
            && self.channel == other.channel
            && self.time.to_bits() == other.time.to_bits()
    }
}

impl Eq for EventRecord {}

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"ETOA\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt record at byte offset {offset}: channel {channel}")]
    CorruptChannel { offset: u64, channel: u8 },
    #[error(
        "truncated file: header announces {expected} records, found {found} bytes of record data"
    )]
    Truncated { expected: u64, found: u64 },
    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),
    #[error("{0} trailing bytes after the announced records")]
    TrailingBytes(u64),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
    #[error("record {index}: trigger ids must be nondecreasing ({previous} then {current})")]
    Unordered {
        index: usize,
        previous: u64,
        current: u64,
    },
    #[error("record {index}: second {channel:?} record for trigger {trigger_id}")]
    Duplicate {
        index: usize,
        trigger_id: u64,
        channel: Channel,
    },
    #[error("record {index}: non-finite time")]
    NonFinite { index: usize },
}

/// Time-ordered detection records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventBatch {
    records: Vec<EventRecord>,
}

impl EventBatch {
    /// Validates ordering: trigger ids nondecreasing, at most one record per
    /// (trigger, channel), finite times.
    pub fn new(records: Vec<EventRecord>) -> Result<Self, FormatError> {
        let mut seen = [false; 3];
        for (index, rec) in records.iter().enumerate() {
            if !rec.time.is_finite() {
                return Err(FormatError::NonFinite { index });
            }
            if index > 0 {
                let prev = records[index - 1].trigger_id;
                if rec.trigger_id < prev {
                    return Err(FormatError::Unordered {
                        index,
                        previous: prev,
                        current: rec.trigger_id,
                    });
                }
                if rec.trigger_id != prev {
                    seen = [false; 3];
                }
            }
            let slot = &mut seen[rec.channel as usize];
            if *slot {
                return Err(FormatError::Duplicate {
                    index,
                    trigger_id: rec.trigger_id,
                    channel: rec.channel,
                });
            }
            *slot = true;
        }
        Ok(EventBatch { records })
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(t1, t2)` for every trigger with both detectors present, in trigger
    /// order.
    pub fn coincidences(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut i = 0;
        let recs = &self.records;
        while i < recs.len() {
            let id = recs[i].trigger_id;
            let (mut t1, mut t2) = (None, None);
            while i < recs.len() && recs[i].trigger_id == id {
                match recs[i].channel {
                    Channel::Detector1 => t1 = Some(recs[i].time),
                    Channel::Detector2 => t2 = Some(recs[i].time),
                    Channel::Trigger => {}
                }
                i += 1;
            }
            if let (Some(a), Some(b)) = (t1, t2) {
                out.push((a, b));
            }
        }
        out
    }

    pub fn trigger_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.channel == Channel::Trigger)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Binary,
    Text,
}

impl fmt::Display for EventFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventFormat::Binary => "binary",
            EventFormat::Text => "text",
        })
    }
}

impl std::str::FromStr for EventFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(EventFormat::Binary),
            "text" => Ok(EventFormat::Text),
            other => Err(format!("unknown event format {other:?} (binary|text)")),
        }
    }
}

/// Error from reading or writing an event stream.
#[derive(Debug, Error)]
pub enum EventIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub fn write_events<W: Write>(
    batch: &EventBatch,
    sink: W,
    format: EventFormat,
) -> std::io::Result<()> {
    let mut sink = std::io::BufWriter::new(sink);
    match format {
        EventFormat::Binary => {
            sink.write_all(MAGIC)?;
            sink.write_all(&[VERSION])?;
            sink.write_all(&(batch.records.len() as u64).to_le_bytes())?;
            let mut rec = [0u8; RECORD_LEN];
            for r in &batch.records {
                rec[..8].copy_from_slice(&r.trigger_id.to_le_bytes());
                rec[8] = r.channel as u8;
                rec[9..].copy_from_slice(&r.time.to_le_bytes());
                sink.write_all(&rec)?;
            }
        }
        EventFormat::Text => {
            writeln!(sink, "{TEXT_HEADER}")?;
            for r in &batch.records {
                writeln!(
                    sink,
                    "{},{},{}",
                    r.trigger_id,
                    r.channel as u8,
                    format_time(r.time)
                )?;
            }
        }
    }
    sink.flush()
}

/// Scientific notation with 17 significant digits; parses back to the same
/// bits.
pub fn format_time(t: f64) -> String {
    format!("{t:.16e}")
}

pub fn parse_events<R: Read>(source: R, format: EventFormat) -> Result<EventBatch, EventIoError> {
    match format {
        EventFormat::Binary => parse_binary(source),
        EventFormat::Text => parse_text(std::io::BufReader::new(source)),
    }
}

fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn parse_binary<R: Read>(source: R) -> Result<EventBatch, EventIoError> {
    let mut source = std::io::BufReader::new(source);
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(&mut source, &mut header)?;
    if got < 4 {
        return Err(FormatError::TruncatedHeader(got).into());
    }
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    if got < HEADER_LEN {
        return Err(FormatError::TruncatedHeader(got).into());
    }
    if header[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(header[4]).into());
    }
    let count = u64::from_le_bytes(header[5..13].try_into().unwrap());
    let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_LEN];
    for k in 0..count {
        let got = read_full(&mut source, &mut rec)?;
        if got < RECORD_LEN {
            return Err(FormatError::Truncated {
                expected: count,
                found: k * RECORD_LEN as u64 + got as u64,
            }
            .into());
        }
        let offset = HEADER_LEN as u64 + k * RECORD_LEN as u64;
        let channel = Channel::from_u8(rec[8]).ok_or(FormatError::CorruptChannel {
            offset: offset + 8,
            channel: rec[8],
        })?;
        records.push(EventRecord {
            trigger_id: u64::from_le_bytes(rec[..8].try_into().unwrap()),
            channel,
            time: f64::from_le_bytes(rec[9..].try_into().unwrap()),
        });
    }
    let mut rest = Vec::new();
    source.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(FormatError::TrailingBytes(rest.len() as u64).into());
    }
    Ok(EventBatch::new(records)?)
}

fn parse_text<R: BufRead>(source: R) -> Result<EventBatch, EventIoError> {
    let mut lines = source.lines();
    let text_err = |line: usize, message: String| FormatError::Text { line, message };
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(TEXT_HEADER) {
        return Err(text_err(1, format!("expected header {TEXT_HEADER:?}")).into());
    }
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(id), Some(ch), Some(t), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(text_err(lineno, "expected three comma-separated fields".into()).into());
        };
        let trigger_id: u64 = id
            .trim()
            .parse()
            .map_err(|_| text_err(lineno, format!("bad trigger id {id:?}")))?;
        let channel_raw: u8 = ch
            .trim()
            .parse()
            .map_err(|_| text_err(lineno, format!("bad channel {ch:?}")))?;
        let channel = Channel::from_u8(channel_raw)
            .ok_or_else(|| text_err(lineno, format!("channel {channel_raw} outside 0..=2")))?;
        let time: f64 = t
            .trim()
            .parse()
            .map_err(|_| text_err(lineno, format!("non-numeric time {t:?}")))?;
        records.push(EventRecord {
            trigger_id,
            channel,
            time,
        });
    }
    Ok(EventBatch::new(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trigger_id: u64, channel: Channel, time: f64) -> EventRecord {
        EventRecord {
            trigger_id,
            channel,
            time,
        }
    }

    fn sample() -> EventBatch {
        EventBatch::new(vec![
            rec(0, Channel::Trigger, 0.0),
            rec(1, Channel::Trigger, 0.0),
            rec(1, Channel::Detector1, 612.125),
            rec(1, Channel::Detector2, -3.0e-7),
            rec(4, Channel::Trigger, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn empty_binary_is_header_only() {
        let mut buf = Vec::new();
        write_events(&EventBatch::default(), &mut buf, EventFormat::Binary).unwrap();
        assert_eq!(buf.len(), 13);
        assert_eq!(&buf[..4], b"ETOA");
        assert_eq!(buf[4], 1);
        let back = parse_events(&buf[..], EventFormat::Binary).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_events(&sample(), &mut buf, EventFormat::Binary).unwrap();
        assert_eq!(buf.len(), 13 + 5 * 17);
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 5);
        let third = 13 + 2 * 17;
        assert_eq!(
            u64::from_le_bytes(buf[third..third + 8].try_into().unwrap()),
            1
        );
        assert_eq!(buf[third + 8], 1);
        assert_eq!(
            f64::from_le_bytes(buf[third + 9..third + 17].try_into().unwrap()),
            612.125
        );
    }

    #[test]
    fn text_layout() {
        let mut buf = Vec::new();
        write_events(&sample(), &mut buf, EventFormat::Text).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("trigger_id,channel,time"));
        assert_eq!(lines.next(), Some("0,0,0.0000000000000000e0"));
        assert_eq!(lines.nth(1), Some("1,1,6.1212500000000000e2"));
    }

    #[test]
    fn corrupt_channel_reports_offset() {
        let mut buf = Vec::new();
        write_events(&sample(), &mut buf, EventFormat::Binary).unwrap();
        let offset = 13 + 3 * 17 + 8;
        buf[offset] = 7;
        let err = parse_events(&buf[..], EventFormat::Binary).unwrap_err();
        match err {
            EventIoError::Format(FormatError::CorruptChannel { offset: o, channel }) => {
                assert_eq!(o, offset as u64);
                assert_eq!(channel, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_and_count_mismatch() {
        let mut buf = Vec::new();
        write_events(&sample(), &mut buf, EventFormat::Binary).unwrap();
        let cut = &buf[..buf.len() - 5];
        assert!(matches!(
            parse_events(cut, EventFormat::Binary),
            Err(EventIoError::Format(FormatError::Truncated {
                expected: 5,
                ..
            }))
        ));
        let mut more = buf.clone();
        more[5..13].copy_from_slice(&4u64.to_le_bytes());
        assert!(matches!(
            parse_events(&more[..], EventFormat::Binary),
            Err(EventIoError::Format(FormatError::TrailingBytes(17)))
        ));
        assert!(matches!(
            parse_events(&buf[..7], EventFormat::Binary),
            Err(EventIoError::Format(FormatError::TruncatedHeader(7)))
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = Vec::new();
        write_events(&sample(), &mut buf, EventFormat::Binary).unwrap();
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(matches!(
            parse_events(&wrong[..], EventFormat::Binary),
            Err(EventIoError::Format(FormatError::BadMagic(_)))
        ));
        buf[4] = 2;
        assert!(matches!(
            parse_events(&buf[..], EventFormat::Binary),
            Err(EventIoError::Format(FormatError::UnsupportedVersion(2)))
        ));
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let bad = "trigger_id,channel,time\n0,0,0\n1,1,abc\n";
        match parse_events(bad.as_bytes(), EventFormat::Text) {
            Err(EventIoError::Format(FormatError::Text { line, .. })) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_channel = "trigger_id,channel,time\n0,7,0\n";
        assert!(matches!(
            parse_events(bad_channel.as_bytes(), EventFormat::Text),
            Err(EventIoError::Format(FormatError::Text { line: 2, .. }))
        ));
    }

    #[test]
    fn ordering_rules() {
        assert!(matches!(
            EventBatch::new(vec![
                rec(2, Channel::Trigger, 0.0),
                rec(1, Channel::Trigger, 0.0)
            ]),
            Err(FormatError::Unordered { index: 1, .. })
        ));
        assert!(matches!(
            EventBatch::new(vec![
                rec(2, Channel::Detector1, 1.0),
                rec(2, Channel::Detector1, 2.0)
            ]),
            Err(FormatError::Duplicate { index: 1, .. })
        ));
    }

    #[test]
    fn coincidences_pair_by_trigger() {
        assert_eq!(sample().coincidences(), vec![(612.125, -3.0e-7)]);
        assert_eq!(sample().trigger_count(), 3);
    }
}
