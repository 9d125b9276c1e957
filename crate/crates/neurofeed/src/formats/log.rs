//! Session log CSV: one row per engine tick, fixed column order.

use std::io::Read;

use neurofeed_core::intervention::{EventKind, Playback};
use neurofeed_core::session::{Phase, SessionLogRecord};
use neurofeed_core::signal::{AuxMetrics, SignalFrame};

use super::{check_header, fmt_f64, fmt_opt, parse_field, parse_opt_f64, FormatError};

pub const LOG_HEADER: [&str; 17] = [
    "t_ms",
    "phase",
    "raw_engagement",
    "smoothed_engagement",
    "baseline",
    "engaged",
    "video_state",
    "video_position_ms",
    "maze_speed",
    "drops_video",
    "drops_maze",
    "event",
    "excitement",
    "meditation",
    "frustration",
    "valence",
    "long_term_excitement",
];

fn row(r: &SessionLogRecord) -> [String; 17] {
    let aux = r.aux.values();
    [
        r.t_ms.to_string(),
        r.phase.as_str().to_string(),
        fmt_f64(r.raw_engagement),
        fmt_f64(r.smoothed_engagement),
        fmt_opt(r.baseline),
        r.engaged.to_string(),
        r.video_state.map(|s| s.as_str().to_string()).unwrap_or_default(),
        r.video_position_ms.to_string(),
        fmt_opt(r.maze_speed),
        r.drops_video.to_string(),
        r.drops_maze.to_string(),
        r.event.map(|e| e.as_str().to_string()).unwrap_or_default(),
        fmt_opt(aux[0]),
        fmt_opt(aux[1]),
        fmt_opt(aux[2]),
        fmt_opt(aux[3]),
        fmt_opt(aux[4]),
    ]
}

/// Renders the log as CSV: header line, then one line per record.
pub fn export_log(records: &[SessionLogRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(LOG_HEADER).expect("in-memory write");
    for r in records {
        w.write_record(row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn parse_playback(line: u64, raw: &str) -> Result<Option<Playback>, FormatError> {
    match raw {
        "" => Ok(None),
        "playing" => Ok(Some(Playback::Playing)),
        "paused" => Ok(Some(Playback::Paused)),
        other => Err(FormatError::Parse {
            line,
            message: format!("column `video_state`: unknown value `{other}`"),
        }),
    }
}

pub fn parse_log<R: Read>(reader: R) -> Result<Vec<SessionLogRecord>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers()?, &LOG_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != LOG_HEADER.len() {
            return Err(FormatError::Parse {
                line,
                message: format!("expected {} fields, found {}", LOG_HEADER.len(), rec.len()),
            });
        }
        let mut aux = [None; 5];
        for (i, slot) in aux.iter_mut().enumerate() {
            *slot = parse_opt_f64(line, LOG_HEADER[12 + i], &rec[12 + i])?;
        }
        out.push(SessionLogRecord {
            t_ms: parse_field(line, "t_ms", &rec[0])?,
            phase: parse_field::<Phase>(line, "phase", &rec[1])?,
            raw_engagement: parse_field(line, "raw_engagement", &rec[2])?,
            smoothed_engagement: parse_field(line, "smoothed_engagement", &rec[3])?,
            baseline: parse_opt_f64(line, "baseline", &rec[4])?,
            engaged: parse_field(line, "engaged", &rec[5])?,
            video_state: parse_playback(line, &rec[6])?,
            video_position_ms: parse_field(line, "video_position_ms", &rec[7])?,
            maze_speed: parse_opt_f64(line, "maze_speed", &rec[8])?,
            drops_video: parse_field(line, "drops_video", &rec[9])?,
            drops_maze: parse_field(line, "drops_maze", &rec[10])?,
            event: if rec[11].is_empty() {
                None
            } else {
                Some(parse_field::<EventKind>(line, "event", &rec[11])?)
            },
            aux: AuxMetrics::from_values(aux),
        });
    }
    Ok(out)
}

/// Recovers the input frames a log was produced from. Contact quality is not
/// logged, so replayed frames report a good contact.
pub fn frames_from_log(records: &[SessionLogRecord]) -> Vec<SignalFrame> {
    records
        .iter()
        .map(|r| SignalFrame {
            t_ms: r.t_ms,
            engagement: r.raw_engagement,
            aux: r.aux,
            quality: Default::default(),
        })
        .collect()
}
