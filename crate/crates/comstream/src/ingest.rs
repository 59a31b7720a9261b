//! Newline-delimited record input.
//!
//! Each line is an object with exactly the keys `id`, `text` and `timestamp`
//! (RFC 3339). Records must arrive in non-decreasing timestamp order; with
//! `lenient` set, late records are dropped and counted instead of failing
//! the run. Blank lines are ignored.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use comstream_core::{EventClock, Timestamp};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("read error at line {line}: {source}")]
    Io { line: usize, source: std::io::Error },
    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: timestamp {got} is earlier than the previous record ({previous})")]
    OutOfOrder { line: usize, previous: String, got: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub timestamp: Timestamp,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    id: String,
    text: String,
    timestamp: String,
}

/// Parses an RFC 3339 date-time, truncating to whole seconds.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, chrono::ParseError> {
    DateTime::parse_from_rfc3339(text).map(|t| Timestamp(t.timestamp()))
}

/// Formats as RFC 3339 in UTC with a `Z` suffix.
pub fn format_timestamp(ts: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(ts.secs(), 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.secs().to_string())
}

pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    lenient: bool,
    seen: HashSet<String>,
    clock: EventClock,
    dropped: usize,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R, lenient: bool) -> Self {
        RecordReader {
            lines: reader.lines(),
            line_no: 0,
            lenient,
            seen: HashSet::new(),
            clock: EventClock::new(),
            dropped: 0,
        }
    }

    /// Records dropped for arriving out of order (lenient mode only).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn clock(&self) -> &EventClock {
        &self.clock
    }

    fn parse_line(&mut self, line: &str) -> Result<Option<RawRecord>, IngestError> {
        let line_no = self.line_no;
        let wire: WireRecord = serde_json::from_str(line).map_err(|e| IngestError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if wire.id.is_empty() {
            return Err(IngestError::Malformed {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        let timestamp = parse_timestamp(&wire.timestamp).map_err(|e| IngestError::Malformed {
            line: line_no,
            reason: format!("bad timestamp {:?}: {e}", wire.timestamp),
        })?;
        if let Err(comstream_core::clock::ClockError::Backwards { current, next }) = self.clock.advance(timestamp) {
            if self.lenient {
                self.dropped += 1;
                log::debug!("line {line_no}: dropping out-of-order record {}", wire.id);
                return Ok(None);
            }
            return Err(IngestError::OutOfOrder {
                line: line_no,
                previous: format_timestamp(current),
                got: format_timestamp(next),
            });
        }
        if !self.seen.insert(wire.id.clone()) {
            return Err(IngestError::DuplicateId {
                line: line_no,
                id: wire.id,
            });
        }
        Ok(Some(RawRecord {
            id: wire.id,
            text: wire.text,
            timestamp,
        }))
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<RawRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    return Some(Err(IngestError::Io {
                        line: self.line_no,
                        source,
                    }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Ok(Some(record)) => return Some(Ok(record)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn open_stream(path: &Path, lenient: bool) -> Result<RecordReader<BufReader<File>>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Open {
        path: path.display().to_string(),
        source,
    })?;
    Ok(RecordReader::new(BufReader::new(file), lenient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(input: &str, lenient: bool) -> (Vec<Result<RawRecord, IngestError>>, usize) {
        let mut reader = RecordReader::new(Cursor::new(input.to_string()), lenient);
        let out: Vec<_> = reader.by_ref().collect();
        (out, reader.dropped())
    }

    #[test]
    fn parses_a_record() {
        let (out, _) = read(r#"{"id":"1","text":"hello","timestamp":"2020-04-06T19:25:28Z"}"#, false);
        let rec = out.into_iter().next().unwrap().unwrap();
        assert_eq!(rec.id, "1");
        assert_eq!(rec.text, "hello");
        assert_eq!(format_timestamp(rec.timestamp), "2020-04-06T19:25:28Z");
    }

    #[test]
    fn empty_input() {
        let (out, dropped) = read("", false);
        assert!(out.is_empty());
        assert_eq!(dropped, 0);
    }

    #[test]
    fn lenient_drops_late_records() {
        let input = "{\"id\":\"a\",\"text\":\"x\",\"timestamp\":\"2012-05-05T10:00:00Z\"}\n\
                     {\"id\":\"b\",\"text\":\"y\",\"timestamp\":\"2012-05-05T09:59:00Z\"}\n";
        let (out, dropped) = read(input, true);
        assert_eq!(out.len(), 1);
        assert_eq!(dropped, 1);
        let (out, _) = read(input, false);
        assert!(matches!(out[1], Err(IngestError::OutOfOrder { line: 2, .. })));
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        let input = "{\"id\":\"a\",\"text\":\"x\",\"timestamp\":\"2012-05-05T10:00:00Z\"}\n\
                     {\"id\":\"a\",\"text\":\"y\",\"timestamp\":\"2012-05-05T10:00:00Z\"}\n";
        let (out, _) = read(input, true);
        assert!(matches!(out[1], Err(IngestError::DuplicateId { line: 2, .. })));

        let (out, _) = read("\nnot json\n", false);
        assert!(matches!(out[0], Err(IngestError::Malformed { line: 2, .. })));
        let (out, _) = read(
            r#"{"id":"a","text":"x","timestamp":"2012-05-05T10:00:00Z","extra":1}"#,
            false,
        );
        assert!(matches!(out[0], Err(IngestError::Malformed { line: 1, .. })));
        let (out, _) = read(r#"{"id":"a","text":"x","timestamp":"yesterday"}"#, false);
        assert!(matches!(out[0], Err(IngestError::Malformed { .. })));
        let (out, _) = read(r#"{"id":"","text":"x","timestamp":"2012-05-05T10:00:00Z"}"#, false);
        assert!(matches!(out[0], Err(IngestError::Malformed { .. })));
    }

    #[test]
    fn clock_ends_at_the_last_timestamp() {
        let input = "{\"id\":\"a\",\"text\":\"x\",\"timestamp\":\"2012-05-05T16:00:00Z\"}\n\
                     {\"id\":\"b\",\"text\":\"y\",\"timestamp\":\"2012-05-05T18:30:00+00:00\"}\n";
        let mut reader = RecordReader::new(Cursor::new(input), false);
        assert_eq!(reader.by_ref().count(), 2);
        let start = parse_timestamp("2012-05-05T16:00:00Z").unwrap();
        assert_eq!(reader.clock().elapsed_since(start).unwrap(), 9000);
    }
}
