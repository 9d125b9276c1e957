//! The fixed experimental protocol as a tick-driven state machine.
//!
//! Phases run in a fixed order: calibration (fixation, then eyes closed),
//! video, video survey, maze, maze survey. The engine owns the session clock.
//! Each tick must carry the frame for [`Session::next_tick_ms`], and survey
//! phases stop the clock until a response is ingested.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationError, CalibrationResult, RunningMean};
use crate::intervention::{
    is_engaged, Controller, EvaluatorConfig, EventKind, InterventionError, InterventionEvent,
    MazeThrottle, Playback, Smoother, VideoState,
};
use crate::maze::{
    advance, generate_maze, plan_route, CaterpillarState, MazeError, MazeGrid, DEFAULT_MAZE_SIZE,
};
use crate::signal::{
    quality_gate, tick_time_ms, AuxMetrics, ContactQuality, SignalError, SignalFrame,
    SignalSource, DEFAULT_SAMPLE_RATE_HZ, MAX_SAMPLE_RATE_HZ, MIN_SAMPLE_RATE_HZ,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    CalibrationFixation,
    CalibrationEyesClosed,
    Video,
    VideoSurvey,
    Maze,
    MazeSurvey,
    Complete,
}

impl Phase {
    pub const ORDER: [Phase; 8] = [
        Phase::Idle,
        Phase::CalibrationFixation,
        Phase::CalibrationEyesClosed,
        Phase::Video,
        Phase::VideoSurvey,
        Phase::Maze,
        Phase::MazeSurvey,
        Phase::Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::CalibrationFixation => "calibration_fixation",
            Phase::CalibrationEyesClosed => "calibration_eyes_closed",
            Phase::Video => "video",
            Phase::VideoSurvey => "video_survey",
            Phase::Maze => "maze",
            Phase::MazeSurvey => "maze_survey",
            Phase::Complete => "complete",
        }
    }

    /// Phases that consume signal frames.
    pub fn is_ticking(self) -> bool {
        matches!(
            self,
            Phase::CalibrationFixation | Phase::CalibrationEyesClosed | Phase::Video | Phase::Maze
        )
    }

    pub fn survey_task(self) -> Option<SurveyTask> {
        match self {
            Phase::VideoSurvey => Some(SurveyTask::Video),
            Phase::MazeSurvey => Some(SurveyTask::Maze),
            _ => None,
        }
    }

    fn successor(self, skip_calibration: bool) -> Option<Phase> {
        Some(match self {
            Phase::Idle if skip_calibration => Phase::Video,
            Phase::Idle => Phase::CalibrationFixation,
            Phase::CalibrationFixation => Phase::CalibrationEyesClosed,
            Phase::CalibrationEyesClosed => Phase::Video,
            Phase::Video => Phase::VideoSurvey,
            Phase::VideoSurvey => Phase::Maze,
            Phase::Maze => Phase::MazeSurvey,
            Phase::MazeSurvey => Phase::Complete,
            Phase::Complete => return None,
        })
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ORDER
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SessionError::UnknownPhase(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("cannot advance from {phase}: {unmet}")]
    Protocol { phase: Phase, unmet: &'static str },
    #[error("phase {0} does not accept frames")]
    NotTicking(Phase),
    #[error("frame at {got} ms does not match session clock ({expected} ms)")]
    ClockMismatch { expected: u64, got: u64 },
    #[error("invalid config field `{field}`: {reason}")]
    Config {
        field: &'static str,
        reason: &'static str,
    },
    #[error("survey for {got:?} submitted during {phase}")]
    SurveyMismatch { phase: Phase, got: SurveyTask },
    #[error("survey field `{0}` must be an integer rating 1-5")]
    InvalidRating(&'static str),
    #[error("unknown phase `{0}`")]
    UnknownPhase(String),
    #[error("contact quality gate not passed")]
    QualityGate,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Intervention(#[from] InterventionError),
    #[error(transparent)]
    Maze(#[from] MazeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub participant_code: String,
    pub sample_rate_hz: u32,
    pub fixation_s: f64,
    pub eyes_closed_s: f64,
    pub video_s: f64,
    pub maze_s: f64,
    #[serde(flatten)]
    pub evaluator: EvaluatorConfig,
    pub maze_width: usize,
    pub maze_height: usize,
    pub maze_seed: u64,
    pub skip_calibration: bool,
    pub video_wall_cap_multiplier: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            participant_code: String::from("P00"),
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            fixation_s: 60.0,
            eyes_closed_s: 60.0,
            video_s: 480.0,
            maze_s: 180.0,
            evaluator: EvaluatorConfig::default(),
            maze_width: DEFAULT_MAZE_SIZE,
            maze_height: DEFAULT_MAZE_SIZE,
            maze_seed: 0,
            skip_calibration: false,
            video_wall_cap_multiplier: 3.0,
        }
    }
}

fn seconds_to_ms(s: f64) -> u64 {
    libm::round(s * 1000.0) as u64
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let cfg = |field, reason| Err(SessionError::Config { field, reason });
        if !(MIN_SAMPLE_RATE_HZ..=MAX_SAMPLE_RATE_HZ).contains(&self.sample_rate_hz) {
            return cfg("sample_rate_hz", "must be within 1-128");
        }
        for (field, v) in [
            ("fixation_s", self.fixation_s),
            ("eyes_closed_s", self.eyes_closed_s),
            ("video_s", self.video_s),
            ("maze_s", self.maze_s),
        ] {
            if !(v.is_finite() && seconds_to_ms(v) >= 1) {
                return cfg(field, "must be a positive duration");
            }
        }
        if !(self.video_wall_cap_multiplier.is_finite() && self.video_wall_cap_multiplier >= 1.0) {
            return cfg("video_wall_cap_multiplier", "must be at least 1");
        }
        if self.maze_width < 2 {
            return cfg("maze_width", "must be at least 2");
        }
        if self.maze_height < 2 {
            return cfg("maze_height", "must be at least 2");
        }
        if self.evaluator.validate().is_err() {
            return cfg("smoothing_window_s", "must be positive with finite coefficients");
        }
        Ok(())
    }

    pub fn fixation_ms(&self) -> u64 {
        seconds_to_ms(self.fixation_s)
    }

    pub fn eyes_closed_ms(&self) -> u64 {
        seconds_to_ms(self.eyes_closed_s)
    }

    pub fn video_ms(&self) -> u64 {
        seconds_to_ms(self.video_s)
    }

    pub fn maze_ms(&self) -> u64 {
        seconds_to_ms(self.maze_s)
    }

    pub fn video_wall_cap_ms(&self) -> u64 {
        seconds_to_ms(self.video_s * self.video_wall_cap_multiplier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyTask {
    Video,
    Maze,
}

/// Post-task questionnaire: challenged, interesting, engaging on 1-5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub phase: SurveyTask,
    pub challenged: u8,
    pub interesting: u8,
    pub engaging: u8,
    #[serde(default)]
    pub free_text: String,
}

impl SurveyResponse {
    pub fn validate(&self) -> Result<(), SessionError> {
        for (field, v) in [
            ("challenged", self.challenged),
            ("interesting", self.interesting),
            ("engaging", self.engaging),
        ] {
            if !(1..=5).contains(&v) {
                return Err(SessionError::InvalidRating(field));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chronotype {
    Morning,
    Night,
    NoPreference,
}

/// Background questionnaire row, joined to sessions by participant code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub participant_code: String,
    pub gender: String,
    pub age_band: String,
    pub mature: bool,
    pub cs_student: bool,
    pub wears_glasses: bool,
    pub chronotype: Chronotype,
    pub java_level: u8,
    pub programming_frequency: u8,
    pub prior_programming: bool,
}

/// Age above which a participant counts as mature.
pub const MATURE_AGE: u32 = 23;

impl Demographics {
    pub fn is_mature_age(age: u32) -> bool {
        age > MATURE_AGE
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if !(1..=5).contains(&self.java_level) {
            return Err(SessionError::InvalidRating("java_level"));
        }
        if !(1..=5).contains(&self.programming_frequency) {
            return Err(SessionError::InvalidRating("programming_frequency"));
        }
        Ok(())
    }
}

/// One tick of engine state; the unit of the CSV export and of replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLogRecord {
    pub t_ms: u64,
    pub phase: Phase,
    pub raw_engagement: f64,
    pub smoothed_engagement: f64,
    /// `None` until calibration has produced a baseline.
    pub baseline: Option<f64>,
    pub engaged: bool,
    pub video_state: Option<Playback>,
    pub video_position_ms: u64,
    pub maze_speed: Option<f64>,
    pub drops_video: u64,
    pub drops_maze: u64,
    pub event: Option<EventKind>,
    #[serde(flatten)]
    pub aux: AuxMetrics,
}

/// Point-in-time view of a session, sent to late stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub participant_code: String,
    pub phase: Phase,
    pub next_tick_ms: u64,
    pub baseline: Option<f64>,
    pub calibration: Option<CalibrationResult>,
    pub video: VideoState,
    pub caterpillar: CaterpillarState,
    pub head_cell: usize,
    pub drops_video: u64,
    pub drops_maze: u64,
    pub awaiting_survey: Option<SurveyTask>,
    pub last_record: Option<SessionLogRecord>,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    phase: Phase,
    tick_index: u64,
    phase_start_ms: u64,
    quality_ok: bool,
    smoother: Smoother,
    fixation: RunningMean,
    eyes_closed: RunningMean,
    calibration: Option<CalibrationResult>,
    video: VideoState,
    maze: MazeGrid,
    route: Vec<usize>,
    caterpillar: CaterpillarState,
    throttle: MazeThrottle,
    survey_received: bool,
    records: Vec<SessionLogRecord>,
    events: Vec<InterventionEvent>,
    surveys: Vec<SurveyResponse>,
    transitions: Vec<(u64, Phase)>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let maze = generate_maze(config.maze_width, config.maze_height, config.maze_seed)?;
        let route = plan_route(&maze);
        Ok(Session {
            smoother: Smoother::new(config.evaluator.smoothing_window_s),
            config,
            phase: Phase::Idle,
            tick_index: 0,
            phase_start_ms: 0,
            quality_ok: false,
            fixation: RunningMean::default(),
            eyes_closed: RunningMean::default(),
            calibration: None,
            video: VideoState::default(),
            maze,
            route,
            caterpillar: CaterpillarState::default(),
            throttle: MazeThrottle::default(),
            survey_received: false,
            records: Vec::new(),
            events: Vec::new(),
            surveys: Vec::new(),
            transitions: alloc::vec![(0, Phase::Idle)],
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn next_tick_ms(&self) -> u64 {
        tick_time_ms(self.tick_index, self.config.sample_rate_hz)
    }

    fn tick_dt_ms(&self) -> u64 {
        let rate = self.config.sample_rate_hz;
        tick_time_ms(self.tick_index + 1, rate) - tick_time_ms(self.tick_index, rate)
    }

    fn phase_elapsed_ms(&self) -> u64 {
        self.next_tick_ms() - self.phase_start_ms
    }

    /// Records the contact quality seen before the session starts.
    pub fn observe_quality(&mut self, quality: &ContactQuality) {
        self.quality_ok = quality_gate(quality);
    }

    /// `Ok` when the current phase may be left; otherwise the unmet condition.
    pub fn completion(&self) -> Result<(), &'static str> {
        let elapsed = self.phase_elapsed_ms();
        match self.phase {
            Phase::Idle if !self.quality_ok => Err("contact quality gate not passed"),
            Phase::CalibrationFixation if elapsed < self.config.fixation_ms() => {
                Err("fixation stage still running")
            }
            Phase::CalibrationEyesClosed if elapsed < self.config.eyes_closed_ms() => {
                Err("eyes-closed stage still running")
            }
            Phase::Video
                if self.video.position_ms < self.config.video_ms()
                    && elapsed < self.config.video_wall_cap_ms() =>
            {
                Err("video still playing")
            }
            Phase::Maze if elapsed < self.config.maze_ms() => Err("maze still running"),
            Phase::VideoSurvey | Phase::MazeSurvey if !self.survey_received => {
                Err("survey response not submitted")
            }
            Phase::Complete => Err("session complete"),
            _ => Ok(()),
        }
    }

    pub fn can_advance(&self) -> bool {
        self.completion().is_ok()
    }

    pub fn advance_phase(&mut self) -> Result<Phase, SessionError> {
        let phase = self.phase;
        self.completion()
            .map_err(|unmet| SessionError::Protocol { phase, unmet })?;
        let next = phase
            .successor(self.config.skip_calibration)
            .ok_or(SessionError::Protocol {
                phase,
                unmet: "session complete",
            })?;
        match (phase, next) {
            (Phase::Idle, Phase::Video) => self.calibration = Some(CalibrationResult::skipped()),
            (Phase::CalibrationEyesClosed, _) => {
                self.calibration = Some(CalibrationResult::from_stages(
                    &self.fixation,
                    &self.eyes_closed,
                )?);
            }
            _ => {}
        }
        self.phase = next;
        self.phase_start_ms = self.next_tick_ms();
        self.survey_received = false;
        self.transitions.push((self.phase_start_ms, next));
        Ok(next)
    }

    pub fn ingest_survey(&mut self, response: SurveyResponse) -> Result<(), SessionError> {
        match self.phase.survey_task() {
            Some(task) if task == response.phase => {}
            _ => {
                return Err(SessionError::SurveyMismatch {
                    phase: self.phase,
                    got: response.phase,
                })
            }
        }
        response.validate()?;
        self.surveys.push(response);
        self.survey_received = true;
        Ok(())
    }

    pub fn tick(&mut self, frame: SignalFrame) -> Result<&SessionLogRecord, SessionError> {
        let phase = self.phase;
        if !phase.is_ticking() {
            return Err(SessionError::NotTicking(phase));
        }
        let expected = self.next_tick_ms();
        if frame.t_ms != expected {
            return Err(SessionError::ClockMismatch {
                expected,
                got: frame.t_ms,
            });
        }
        if self.can_advance() {
            return Err(SessionError::Protocol {
                phase,
                unmet: "phase finished; advance before ticking",
            });
        }
        frame.validate()?;

        let dt_ms = self.tick_dt_ms();
        let raw = frame.engagement;
        let smoothed = self.smoother.push(frame.t_ms, raw);
        let baseline = self.calibration.map(|c| c.baseline);
        let engaged = baseline.is_some_and(|b| is_engaged(smoothed, b));
        let mut event = None;
        let mut video_state = None;
        let mut speed = None;

        match phase {
            Phase::CalibrationFixation => self.fixation.push(raw),
            Phase::CalibrationEyesClosed => self.eyes_closed.push(raw),
            Phase::Video => {
                event = self.video.step(engaged, dt_ms);
                video_state = Some(self.video.playback);
            }
            Phase::Maze => {
                let b = baseline.expect("maze runs after calibration");
                event = self.throttle.step(engaged, dt_ms);
                let v = self.config.evaluator.maze_speed(smoothed, b);
                self.caterpillar = advance(self.caterpillar, v, dt_ms, &self.route);
                self.caterpillar.drop_count = self.throttle.drop_count;
                speed = Some(v);
            }
            _ => unreachable!("checked is_ticking"),
        }
        if let Some(kind) = event {
            self.events.push(InterventionEvent {
                t_ms: frame.t_ms,
                kind,
            });
        }
        self.records.push(SessionLogRecord {
            t_ms: frame.t_ms,
            phase,
            raw_engagement: raw,
            smoothed_engagement: smoothed,
            baseline,
            engaged,
            video_state,
            video_position_ms: self.video.position_ms,
            maze_speed: speed,
            drops_video: self.video.drop_count,
            drops_maze: self.throttle.drop_count,
            event,
            aux: frame.aux,
        });
        self.tick_index += 1;
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn records(&self) -> &[SessionLogRecord] {
        &self.records
    }

    pub fn events(&self) -> &[InterventionEvent] {
        &self.events
    }

    pub fn surveys(&self) -> &[SurveyResponse] {
        &self.surveys
    }

    /// `(t_ms, phase)` for every phase entered, starting with `Idle`.
    pub fn transitions(&self) -> &[(u64, Phase)] {
        &self.transitions
    }

    pub fn calibration(&self) -> Option<&CalibrationResult> {
        self.calibration.as_ref()
    }

    pub fn video_state(&self) -> &VideoState {
        &self.video
    }

    pub fn caterpillar(&self) -> &CaterpillarState {
        &self.caterpillar
    }

    pub fn maze(&self) -> &MazeGrid {
        &self.maze
    }

    pub fn route(&self) -> &[usize] {
        &self.route
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            participant_code: self.config.participant_code.clone(),
            phase: self.phase,
            next_tick_ms: self.next_tick_ms(),
            baseline: self.calibration.map(|c| c.baseline),
            calibration: self.calibration,
            video: self.video,
            caterpillar: self.caterpillar,
            head_cell: self.caterpillar.head_cell(&self.route),
            drops_video: self.video.drop_count,
            drops_maze: self.throttle.drop_count,
            awaiting_survey: self
                .phase
                .survey_task()
                .filter(|_| !self.survey_received),
            last_record: self.records.last().cloned(),
        }
    }
}

/// Drives a session to completion against `source`, advancing every phase as
/// soon as its condition is met and asking `surveys` for each questionnaire.
pub fn run_session<S, F>(
    session: &mut Session,
    source: &mut S,
    mut surveys: F,
) -> Result<(), SessionError>
where
    S: SignalSource + ?Sized,
    F: FnMut(SurveyTask) -> SurveyResponse,
{
    if session.phase() == Phase::Idle {
        session.observe_quality(&source.quality());
        if !session.can_advance() {
            return Err(SessionError::QualityGate);
        }
    }
    loop {
        while session.can_advance() {
            if session.advance_phase()? == Phase::Complete {
                return Ok(());
            }
        }
        let phase = session.phase();
        if let Some(task) = phase.survey_task() {
            session.ingest_survey(surveys(task))?;
        } else if phase.is_ticking() {
            let frame = source.next_frame(session.next_tick_ms())?;
            session.tick(frame)?;
        } else {
            return Err(SessionError::Protocol {
                phase,
                unmet: "no progress possible",
            });
        }
    }
}

/// Survey answers used by unattended simulation runs.
pub fn neutral_survey(task: SurveyTask) -> SurveyResponse {
    SurveyResponse {
        phase: task,
        challenged: 3,
        interesting: 3,
        engaging: 3,
        free_text: String::new(),
    }
}
