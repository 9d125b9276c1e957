//! Threshold evaluation and the two feedback controllers.
//!
//! Engagement is smoothed over a trailing window and compared with the
//! participant's baseline. The video controller latches a pause until
//! engagement recovers; the maze controller re-evaluates the caterpillar's
//! speed every tick.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterventionError {
    #[error("no frames inside the smoothing window")]
    InsufficientData,
    #[error("invalid event log at index {index}: {reason}")]
    InvalidLog { index: usize, reason: &'static str },
    #[error("invalid evaluator config: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown event tag `{0}`")]
    UnknownEvent(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub smoothing_window_s: f64,
    pub fast_slope: f64,
    pub fast_intercept: f64,
    pub slow_slope: f64,
    pub slow_intercept: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            smoothing_window_s: 1.0,
            fast_slope: 10.0,
            fast_intercept: 1.0,
            slow_slope: 1.0,
            slow_intercept: 0.1,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<(), InterventionError> {
        if !(self.smoothing_window_s > 0.0 && self.smoothing_window_s.is_finite()) {
            return Err(InterventionError::InvalidConfig(
                "smoothing_window_s must be positive",
            ));
        }
        let coeffs = [
            self.fast_slope,
            self.fast_intercept,
            self.slow_slope,
            self.slow_intercept,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(InterventionError::InvalidConfig("speed coefficients must be finite"));
        }
        Ok(())
    }

    pub fn smoothing_window_ms(&self) -> f64 {
        self.smoothing_window_s * 1000.0
    }

    /// Caterpillar speed in cells per second.
    pub fn maze_speed(&self, engagement: f64, baseline: f64) -> f64 {
        if is_engaged(engagement, baseline) {
            self.fast_slope * engagement + self.fast_intercept
        } else {
            self.slow_slope * engagement + self.slow_intercept
        }
    }
}

/// Strictly above the baseline. Equality counts as disengaged.
pub fn is_engaged(smoothed: f64, baseline: f64) -> bool {
    smoothed > baseline
}

/// `10·E + 1` above the baseline, `E + 0.1` otherwise.
pub fn maze_speed(engagement: f64, baseline: f64) -> f64 {
    EvaluatorConfig::default().maze_speed(engagement, baseline)
}

fn in_window(latest: u64, t: u64, window_ms: f64) -> bool {
    ((latest - t) as f64) < window_ms
}

/// Mean of the values in the trailing window `(t − window, t]`, where `t` is
/// the newest frame's timestamp. `frames` must be time-ordered.
pub fn smooth(frames: &[(u64, f64)], window_s: f64) -> Result<f64, InterventionError> {
    let Some(&(latest, _)) = frames.last() else {
        return Err(InterventionError::InsufficientData);
    };
    let window_ms = window_s * 1000.0;
    let n = frames
        .iter()
        .rev()
        .take_while(|(t, _)| in_window(latest, *t, window_ms))
        .count();
    if n == 0 {
        return Err(InterventionError::InsufficientData);
    }
    let sum: f64 = frames[frames.len() - n..].iter().map(|(_, v)| v).sum();
    Ok(sum / n as f64)
}

/// Streaming form of [`smooth`].
#[derive(Debug, Clone)]
pub struct Smoother {
    window_ms: f64,
    buf: VecDeque<(u64, f64)>,
}

impl Smoother {
    pub fn new(window_s: f64) -> Self {
        Smoother {
            window_ms: window_s * 1000.0,
            buf: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t_ms: u64, value: f64) -> f64 {
        self.buf.push_back((t_ms, value));
        while let Some(&(t, _)) = self.buf.front() {
            if in_window(t_ms, t, self.window_ms) {
                break;
            }
            self.buf.pop_front();
        }
        // Summed oldest-first, same order as the batch form.
        self.buf.iter().map(|(_, v)| v).sum::<f64>() / self.buf.len() as f64
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    VideoPause,
    VideoResume,
    MazeSlow,
    MazeRestore,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::VideoPause => "video_pause",
            EventKind::VideoResume => "video_resume",
            EventKind::MazeSlow => "maze_slow",
            EventKind::MazeRestore => "maze_restore",
        }
    }

    pub fn task(self) -> Task {
        match self {
            EventKind::VideoPause | EventKind::VideoResume => Task::Video,
            EventKind::MazeSlow | EventKind::MazeRestore => Task::Maze,
        }
    }

    /// Pause or slow: the kind that counts as a drop.
    pub fn is_disengage(self) -> bool {
        matches!(self, EventKind::VideoPause | EventKind::MazeSlow)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = InterventionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "video_pause" => Ok(EventKind::VideoPause),
            "video_resume" => Ok(EventKind::VideoResume),
            "maze_slow" => Ok(EventKind::MazeSlow),
            "maze_restore" => Ok(EventKind::MazeRestore),
            other => Err(InterventionError::UnknownEvent(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Video,
    Maze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionEvent {
    pub t_ms: u64,
    pub kind: EventKind,
}

/// Number of drops for `task`, validating that its events are time-ordered
/// and alternate starting with the disengage kind.
pub fn count_drops(events: &[InterventionEvent], task: Task) -> Result<u64, InterventionError> {
    let mut expect_disengage = true;
    let mut last_t: Option<u64> = None;
    let mut drops = 0;
    for (index, ev) in events.iter().enumerate() {
        if last_t.is_some_and(|t| ev.t_ms < t) {
            return Err(InterventionError::InvalidLog {
                index,
                reason: "events out of time order",
            });
        }
        last_t = Some(ev.t_ms);
        if ev.kind.task() != task {
            continue;
        }
        if ev.kind.is_disengage() != expect_disengage {
            return Err(InterventionError::InvalidLog {
                index,
                reason: "events do not alternate",
            });
        }
        if expect_disengage {
            drops += 1;
        }
        expect_disengage = !expect_disengage;
    }
    Ok(drops)
}

/// A feedback controller advanced once per tick with the threshold decision.
/// Video pause and maze speed are the two shipped implementations.
pub trait Controller {
    fn step(&mut self, engaged: bool, dt_ms: u64) -> Option<EventKind>;
    fn drop_count(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Playback {
    #[default]
    Playing,
    Paused,
}

impl Playback {
    pub fn as_str(self) -> &'static str {
        match self {
            Playback::Playing => "playing",
            Playback::Paused => "paused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VideoState {
    pub playback: Playback,
    pub position_ms: u64,
    pub drop_count: u64,
}

/// One tick of the latched pause controller. Position advances only on ticks
/// that start and end in `Playing`.
pub fn video_step(state: VideoState, engaged: bool, dt_ms: u64) -> (VideoState, Option<EventKind>) {
    match (state.playback, engaged) {
        (Playback::Playing, false) => (
            VideoState {
                playback: Playback::Paused,
                drop_count: state.drop_count + 1,
                ..state
            },
            Some(EventKind::VideoPause),
        ),
        (Playback::Paused, true) => (
            VideoState {
                playback: Playback::Playing,
                ..state
            },
            Some(EventKind::VideoResume),
        ),
        (Playback::Playing, true) => (
            VideoState {
                position_ms: state.position_ms + dt_ms,
                ..state
            },
            None,
        ),
        (Playback::Paused, false) => (state, None),
    }
}

impl Controller for VideoState {
    fn step(&mut self, engaged: bool, dt_ms: u64) -> Option<EventKind> {
        let (next, ev) = video_step(*self, engaged, dt_ms);
        *self = next;
        ev
    }

    fn drop_count(&self) -> u64 {
        self.drop_count
    }
}

/// Tracks the fast/slow branch of the caterpillar so branch changes can be
/// reported as slow/restore events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MazeThrottle {
    pub slowed: bool,
    pub drop_count: u64,
}

impl Controller for MazeThrottle {
    fn step(&mut self, engaged: bool, _dt_ms: u64) -> Option<EventKind> {
        match (self.slowed, engaged) {
            (false, false) => {
                self.slowed = true;
                self.drop_count += 1;
                Some(EventKind::MazeSlow)
            }
            (true, true) => {
                self.slowed = false;
                Some(EventKind::MazeRestore)
            }
            _ => None,
        }
    }

    fn drop_count(&self) -> u64 {
        self.drop_count
    }
}

/// Runs a controller over a sequence of engagement decisions and collects
/// the stamped events.
pub fn run_controller<C: Controller>(
    controller: &mut C,
    decisions: &[(u64, bool)],
    dt_ms: u64,
) -> Vec<InterventionEvent> {
    decisions
        .iter()
        .filter_map(|&(t_ms, engaged)| {
            controller
                .step(engaged, dt_ms)
                .map(|kind| InterventionEvent { t_ms, kind })
        })
        .collect()
}
