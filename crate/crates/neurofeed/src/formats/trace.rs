//! Recorded-trace CSV:
//! `t_ms,engagement,excitement,meditation,frustration,valence,long_term_excitement,quality_summary`.
//! Aux columns may be empty.

use std::io::{Read, Write};
use std::path::Path;

use neurofeed_core::signal::{AuxMetrics, ContactQuality, ReplaySource, SignalError, SignalFrame};

use super::{check_header, fmt_f64, fmt_opt, parse_field, parse_opt_f64, FormatError};

pub const TRACE_HEADER: [&str; 8] = [
    "t_ms",
    "engagement",
    "excitement",
    "meditation",
    "frustration",
    "valence",
    "long_term_excitement",
    "quality_summary",
];

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<SignalFrame>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(SignalError::EmptyTrace.into());
    }
    check_header(&header, &TRACE_HEADER)?;
    let mut frames = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != TRACE_HEADER.len() {
            return Err(FormatError::Parse {
                line,
                message: format!("expected {} fields, found {}", TRACE_HEADER.len(), row.len()),
            });
        }
        let t_ms: u64 = parse_field(line, "t_ms", &row[0])?;
        let engagement: f64 = parse_field(line, "engagement", &row[1])?;
        let mut aux = [None; 5];
        for (i, slot) in aux.iter_mut().enumerate() {
            *slot = parse_opt_f64(line, TRACE_HEADER[i + 2], &row[i + 2])?;
        }
        let quality = ContactQuality::parse_summary(&row[7]).map_err(|e| FormatError::Parse {
            line,
            message: e.to_string(),
        })?;
        let frame = SignalFrame {
            t_ms,
            engagement,
            aux: AuxMetrics::from_values(aux),
            quality,
        };
        frame.validate().map_err(|e| FormatError::Parse {
            line,
            message: e.to_string(),
        })?;
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(SignalError::EmptyTrace.into());
    }
    Ok(frames)
}

pub fn write_trace<W: Write>(frames: &[SignalFrame], writer: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for f in frames {
        let aux = f.aux.values();
        w.write_record([
            f.t_ms.to_string(),
            fmt_f64(f.engagement),
            fmt_opt(aux[0]),
            fmt_opt(aux[1]),
            fmt_opt(aux[2]),
            fmt_opt(aux[3]),
            fmt_opt(aux[4]),
            f.quality.to_summary(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Opens a trace file as a replay source.
pub fn replay_source(path: &Path) -> Result<ReplaySource, FormatError> {
    let frames = read_trace(std::fs::File::open(path)?)?;
    Ok(ReplaySource::new(frames)?)
}
