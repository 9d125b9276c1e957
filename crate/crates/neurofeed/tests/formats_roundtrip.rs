use neurofeed::formats::demographics::{read_demographics, write_demographics};
use neurofeed::formats::log::{export_log, parse_log};
use neurofeed::formats::trace::{read_trace, write_trace};
use neurofeed::sim::{replay_log, simulate};
use neurofeed_core::session::{Chronotype, Demographics, SessionConfig};
use neurofeed_core::signal::{
    ContactQuality, SignalError, SignalFrame, SignalSource, TrajectorySource, TrajectorySpec,
};

/// Passes frames through and keeps a copy of each.
struct Recording<S> {
    inner: S,
    frames: Vec<SignalFrame>,
}

impl<S: SignalSource> SignalSource for Recording<S> {
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError> {
        let f = self.inner.next_frame(t_ms)?;
        self.frames.push(f);
        Ok(f)
    }

    fn quality(&self) -> ContactQuality {
        self.inner.quality()
    }
}

fn short_config() -> SessionConfig {
    SessionConfig {
        participant_code: "P03".into(),
        fixation_s: 5.0,
        eyes_closed_s: 5.0,
        video_s: 20.0,
        maze_s: 10.0,
        ..SessionConfig::default()
    }
}

fn walk(seed: u64) -> TrajectorySpec {
    TrajectorySpec::RandomWalk {
        mean: 0.5,
        reversion_rate: 0.4,
        volatility: 0.6,
        seed,
    }
}

#[test]
fn trace_of_simulated_run_round_trips() {
    let mut src = Recording {
        inner: TrajectorySource::new(&walk(11)).unwrap(),
        frames: Vec::new(),
    };
    simulate(short_config(), &mut src, &[]).unwrap();
    let mut buf = Vec::new();
    write_trace(&src.frames, &mut buf).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    assert_eq!(back, src.frames);

    let mut again = Vec::new();
    write_trace(&back, &mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn log_export_parse_export_is_identical() {
    let mut src = TrajectorySource::new(&walk(5)).unwrap();
    let session = simulate(short_config(), &mut src, &[]).unwrap();
    let csv = export_log(session.records());
    let parsed = parse_log(csv.as_bytes()).unwrap();
    assert_eq!(parsed, session.records());
    assert_eq!(export_log(&parsed), csv);
    assert_eq!(csv.lines().count(), session.records().len() + 1);
}

#[test]
fn replayed_log_matches_original() {
    let mut src = TrajectorySource::new(&walk(21)).unwrap();
    let session = simulate(short_config(), &mut src, &[]).unwrap();
    let csv = export_log(session.records());
    let replayed = replay_log(short_config(), &parse_log(csv.as_bytes()).unwrap(), &[]).unwrap();
    assert_eq!(export_log(replayed.records()), csv);
}

#[test]
fn same_inputs_same_bytes() {
    let run = || {
        let mut src = TrajectorySource::new(&walk(77)).unwrap();
        export_log(simulate(short_config(), &mut src, &[]).unwrap().records())
    };
    assert_eq!(run(), run());
}

#[test]
fn demographics_round_trip() {
    let rows = vec![
        Demographics {
            participant_code: "P01".into(),
            gender: "m".into(),
            age_band: "24-30".into(),
            mature: true,
            cs_student: false,
            wears_glasses: true,
            chronotype: Chronotype::Night,
            java_level: 2,
            programming_frequency: 4,
            prior_programming: true,
        },
        Demographics {
            participant_code: "P02".into(),
            gender: "f".into(),
            age_band: "18-23".into(),
            mature: false,
            cs_student: true,
            wears_glasses: false,
            chronotype: Chronotype::NoPreference,
            java_level: 5,
            programming_frequency: 1,
            prior_programming: false,
        },
    ];
    let mut buf = Vec::new();
    write_demographics(&rows, &mut buf).unwrap();
    assert_eq!(read_demographics(buf.as_slice()).unwrap(), rows);
}
