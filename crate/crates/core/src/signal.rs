//! Engagement signal stream and the sources that produce it.
//!
//! Every source answers [`SignalSource::next_frame`] for a caller-chosen
//! timestamp. Timestamps must strictly increase per source; the engine owns
//! the clock, the source only supplies values.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 8;
pub const MIN_SAMPLE_RATE_HZ: u32 = 1;
pub const MAX_SAMPLE_RATE_HZ: u32 = 128;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("non-monotonic timestamp: requested {requested} ms after {previous} ms")]
    NonMonotonic { previous: u64, requested: u64 },
    #[error("{field} value {value} outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("source exhausted: requested {requested} ms, last recorded {last} ms")]
    Exhausted { requested: u64, last: u64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("trace contains no frames")]
    EmptyTrace,
    #[error("unknown channel label `{0}`")]
    UnknownChannel(String),
    #[error("unknown contact quality `{0}`")]
    UnknownQuality(String),
    #[error("malformed quality summary: {0}")]
    MalformedQuality(String),
}

/// One of the 14 EPOC sensor positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    AF3,
    F7,
    F3,
    FC5,
    T7,
    P7,
    O1,
    O2,
    P8,
    T8,
    FC6,
    F4,
    F8,
    AF4,
}

impl ChannelId {
    pub const COUNT: usize = 14;

    /// Headset order, which is also the encoding order of quality summaries.
    pub const ALL: [ChannelId; 14] = [
        ChannelId::AF3,
        ChannelId::F7,
        ChannelId::F3,
        ChannelId::FC5,
        ChannelId::T7,
        ChannelId::P7,
        ChannelId::O1,
        ChannelId::O2,
        ChannelId::P8,
        ChannelId::T8,
        ChannelId::FC6,
        ChannelId::F4,
        ChannelId::F8,
        ChannelId::AF4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelId::AF3 => "AF3",
            ChannelId::F7 => "F7",
            ChannelId::F3 => "F3",
            ChannelId::FC5 => "FC5",
            ChannelId::T7 => "T7",
            ChannelId::P7 => "P7",
            ChannelId::O1 => "O1",
            ChannelId::O2 => "O2",
            ChannelId::P8 => "P8",
            ChannelId::T8 => "T8",
            ChannelId::FC6 => "FC6",
            ChannelId::F4 => "F4",
            ChannelId::F8 => "F8",
            ChannelId::AF4 => "AF4",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelId {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| SignalError::UnknownChannel(s.to_string()))
    }
}

/// Per-sensor contact level as reported by the headset software.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLevel {
    None,
    Poor,
    Fair,
    Good,
}

impl QualityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityLevel::None => "none",
            QualityLevel::Poor => "poor",
            QualityLevel::Fair => "fair",
            QualityLevel::Good => "good",
        }
    }
}

impl FromStr for QualityLevel {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(QualityLevel::None),
            "poor" => Ok(QualityLevel::Poor),
            "fair" => Ok(QualityLevel::Fair),
            "good" => Ok(QualityLevel::Good),
            other => Err(SignalError::UnknownQuality(other.to_string())),
        }
    }
}

/// Contact level for every channel. Backed by a fixed array so each of the
/// 14 channels is present exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContactQuality([QualityLevel; ChannelId::COUNT]);

impl ContactQuality {
    pub const fn uniform(level: QualityLevel) -> Self {
        ContactQuality([level; ChannelId::COUNT])
    }

    pub const fn all_good() -> Self {
        Self::uniform(QualityLevel::Good)
    }

    pub fn get(&self, channel: ChannelId) -> QualityLevel {
        self.0[channel.index()]
    }

    pub fn set(&mut self, channel: ChannelId, level: QualityLevel) {
        self.0[channel.index()] = level;
    }

    pub fn with(mut self, channel: ChannelId, level: QualityLevel) -> Self {
        self.set(channel, level);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChannelId, QualityLevel)> + '_ {
        ChannelId::ALL.iter().map(move |&c| (c, self.get(c)))
    }

    /// Comma-free summary: `good` when every channel is good, otherwise
    /// `AF3:poor|F7:good|...` in headset order.
    pub fn to_summary(&self) -> String {
        if quality_gate(self) {
            return "good".to_string();
        }
        let mut out = String::new();
        for (i, (channel, level)) in self.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            out.push_str(channel.as_str());
            out.push(':');
            out.push_str(level.as_str());
        }
        out
    }

    /// Inverse of [`ContactQuality::to_summary`]. The long form must name all
    /// 14 channels exactly once, in any order.
    pub fn parse_summary(s: &str) -> Result<Self, SignalError> {
        let s = s.trim();
        if s == "good" {
            return Ok(Self::all_good());
        }
        let mut levels: [Option<QualityLevel>; ChannelId::COUNT] = [None; ChannelId::COUNT];
        for part in s.split('|') {
            let (label, level) = part
                .split_once(':')
                .ok_or_else(|| SignalError::MalformedQuality(part.to_string()))?;
            let channel: ChannelId = label.parse()?;
            let level: QualityLevel = level.parse()?;
            let slot = &mut levels[channel.index()];
            if slot.is_some() {
                return Err(SignalError::MalformedQuality(alloc::format!(
                    "channel {channel} listed twice"
                )));
            }
            *slot = Some(level);
        }
        let mut quality = Self::uniform(QualityLevel::None);
        for channel in ChannelId::ALL {
            match levels[channel.index()] {
                Some(level) => quality.set(channel, level),
                None => {
                    return Err(SignalError::MalformedQuality(alloc::format!(
                        "channel {channel} missing"
                    )))
                }
            }
        }
        Ok(quality)
    }
}

impl Default for ContactQuality {
    fn default() -> Self {
        Self::all_good()
    }
}

/// True iff every one of the 14 channels reports a good contact.
pub fn quality_gate(quality: &ContactQuality) -> bool {
    quality.0.iter().all(|&l| l == QualityLevel::Good)
}

/// Auxiliary affective metrics. Logged, never used for control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxMetrics {
    pub excitement: Option<f64>,
    pub meditation: Option<f64>,
    pub frustration: Option<f64>,
    pub valence: Option<f64>,
    pub long_term_excitement: Option<f64>,
}

impl AuxMetrics {
    pub const FIELDS: [&'static str; 5] = [
        "excitement",
        "meditation",
        "frustration",
        "valence",
        "long_term_excitement",
    ];

    pub fn values(&self) -> [Option<f64>; 5] {
        [
            self.excitement,
            self.meditation,
            self.frustration,
            self.valence,
            self.long_term_excitement,
        ]
    }

    pub fn from_values(v: [Option<f64>; 5]) -> Self {
        AuxMetrics {
            excitement: v[0],
            meditation: v[1],
            frustration: v[2],
            valence: v[3],
            long_term_excitement: v[4],
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        for (field, value) in Self::FIELDS.iter().zip(self.values()) {
            if let Some(v) = value {
                check_unit(field, v)?;
            }
        }
        Ok(())
    }
}

/// One timestamped engagement reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub t_ms: u64,
    pub engagement: f64,
    pub aux: AuxMetrics,
    pub quality: ContactQuality,
}

impl SignalFrame {
    pub fn new(t_ms: u64, engagement: f64) -> Result<Self, SignalError> {
        check_unit("engagement", engagement)?;
        Ok(SignalFrame {
            t_ms,
            engagement,
            aux: AuxMetrics::default(),
            quality: ContactQuality::all_good(),
        })
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        check_unit("engagement", self.engagement)?;
        self.aux.validate()
    }
}

pub(crate) fn check_unit(field: &'static str, value: f64) -> Result<(), SignalError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SignalError::OutOfRange { field, value })
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// A clocked producer of engagement frames.
pub trait SignalSource {
    /// Frame for exactly `t_ms`. `t_ms` must exceed the previous call's.
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError>;

    /// Current contact quality, observable without advancing the source.
    fn quality(&self) -> ContactQuality {
        ContactQuality::all_good()
    }
}

impl<S: SignalSource + ?Sized> SignalSource for alloc::boxed::Box<S> {
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError> {
        (**self).next_frame(t_ms)
    }

    fn quality(&self) -> ContactQuality {
        (**self).quality()
    }
}

/// Enforces strictly increasing request timestamps.
#[derive(Debug, Clone, Copy, Default)]
struct Sequencer {
    last: Option<u64>,
}

impl Sequencer {
    fn accept(&mut self, t_ms: u64) -> Result<Option<u64>, SignalError> {
        if let Some(previous) = self.last {
            if t_ms <= previous {
                return Err(SignalError::NonMonotonic {
                    previous,
                    requested: t_ms,
                });
            }
        }
        Ok(self.last.replace(t_ms))
    }
}

/// Piecewise-linear script over strictly increasing breakpoints. Values
/// before the first and after the last breakpoint hold the endpoint value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    points: Vec<(u64, f64)>,
}

impl Script {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self, SignalError> {
        if points.is_empty() {
            return Err(SignalError::InvalidTrajectory("script has no breakpoints".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SignalError::InvalidTrajectory(alloc::format!(
                    "breakpoints not strictly increasing at {} ms",
                    w[1].0
                )));
            }
        }
        for &(_, v) in &points {
            if !v.is_finite() {
                return Err(SignalError::InvalidTrajectory("non-finite breakpoint value".into()));
            }
        }
        Ok(Script { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn value_at(&self, t_ms: u64) -> f64 {
        let pts = &self.points;
        let v = match pts.binary_search_by_key(&t_ms, |p| p.0) {
            Ok(i) => pts[i].1,
            Err(0) => pts[0].1,
            Err(i) if i == pts.len() => pts[i - 1].1,
            Err(i) => {
                let (t0, v0) = pts[i - 1];
                let (t1, v1) = pts[i];
                let frac = (t_ms - t0) as f64 / (t1 - t0) as f64;
                v0 + (v1 - v0) * frac
            }
        };
        clamp_unit(v)
    }
}

/// Synthetic engagement trajectories standing in for the headset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySpec {
    Constant {
        level: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period_s: f64,
        phase_s: f64,
    },
    /// Mean-reverting walk:
    /// `v += reversion_rate·(mean − v)·dt + volatility·√dt·z`, then clamp.
    RandomWalk {
        mean: f64,
        reversion_rate: f64,
        volatility: f64,
        seed: u64,
    },
    Scripted {
        points: Vec<(u64, f64)>,
    },
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: &str| Err(SignalError::InvalidTrajectory(m.to_string()));
        match self {
            TrajectorySpec::Constant { level } if !level.is_finite() => bad("non-finite level"),
            TrajectorySpec::Sinusoid { period_s, .. } if period_s.is_nan() || *period_s <= 0.0 => {
                bad("sinusoid period must be positive")
            }
            TrajectorySpec::Sinusoid {
                mean,
                amplitude,
                phase_s,
                ..
            } if !(mean.is_finite() && amplitude.is_finite() && phase_s.is_finite()) => {
                bad("non-finite sinusoid parameter")
            }
            TrajectorySpec::RandomWalk {
                mean,
                reversion_rate,
                volatility,
                ..
            } if !(mean.is_finite()
                && reversion_rate.is_finite()
                && *reversion_rate >= 0.0
                && volatility.is_finite()
                && *volatility >= 0.0) =>
            {
                bad("random walk parameters must be finite and non-negative")
            }
            TrajectorySpec::Scripted { points } => Script::new(points.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Generator {
    Constant(f64),
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period_s: f64,
        phase_s: f64,
    },
    Walk {
        mean: f64,
        reversion_rate: f64,
        volatility: f64,
        rng: ChaCha8Rng,
        value: f64,
    },
    Script(Script),
}

/// Source driven by a [`TrajectorySpec`].
#[derive(Debug, Clone)]
pub struct TrajectorySource {
    generator: Generator,
    seq: Sequencer,
    contact: ContactQuality,
}

impl TrajectorySource {
    pub fn new(spec: &TrajectorySpec) -> Result<Self, SignalError> {
        spec.validate()?;
        let generator = match spec.clone() {
            TrajectorySpec::Constant { level } => Generator::Constant(clamp_unit(level)),
            TrajectorySpec::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_s,
            } => Generator::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_s,
            },
            TrajectorySpec::RandomWalk {
                mean,
                reversion_rate,
                volatility,
                seed,
            } => Generator::Walk {
                mean,
                reversion_rate,
                volatility,
                rng: ChaCha8Rng::seed_from_u64(seed),
                value: clamp_unit(mean),
            },
            TrajectorySpec::Scripted { points } => Generator::Script(Script::new(points)?),
        };
        Ok(TrajectorySource {
            generator,
            seq: Sequencer::default(),
            contact: ContactQuality::all_good(),
        })
    }

    /// Override the contact quality reported with every frame.
    pub fn with_contact(mut self, quality: ContactQuality) -> Self {
        self.contact = quality;
        self
    }
}

impl SignalSource for TrajectorySource {
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError> {
        let previous = self.seq.accept(t_ms)?;
        let engagement = match &mut self.generator {
            Generator::Constant(level) => *level,
            Generator::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_s,
            } => {
                let t_s = t_ms as f64 / 1000.0;
                let angle = 2.0 * core::f64::consts::PI * (t_s + *phase_s) / *period_s;
                clamp_unit(*mean + *amplitude * libm::sin(angle))
            }
            Generator::Walk {
                mean,
                reversion_rate,
                volatility,
                rng,
                value,
            } => {
                if let Some(prev) = previous {
                    let dt = (t_ms - prev) as f64 / 1000.0;
                    let z: f64 = StandardNormal.sample(rng);
                    let next = *value
                        + *reversion_rate * (*mean - *value) * dt
                        + *volatility * libm::sqrt(dt) * z;
                    *value = clamp_unit(next);
                }
                *value
            }
            Generator::Script(script) => script.value_at(t_ms),
        };
        Ok(SignalFrame {
            t_ms,
            engagement,
            aux: AuxMetrics::default(),
            quality: self.contact,
        })
    }

    fn quality(&self) -> ContactQuality {
        self.contact
    }
}

/// Replays recorded frames. Requests at a recorded timestamp return that
/// frame verbatim; requests between recordings interpolate engagement and
/// carry the earlier frame's aux metrics and contact quality. Requests past
/// the final recording fail with [`SignalError::Exhausted`].
#[derive(Debug, Clone)]
pub struct ReplaySource {
    frames: Vec<SignalFrame>,
    seq: Sequencer,
    cursor: usize,
}

impl ReplaySource {
    pub fn new(frames: Vec<SignalFrame>) -> Result<Self, SignalError> {
        if frames.is_empty() {
            return Err(SignalError::EmptyTrace);
        }
        for f in &frames {
            f.validate()?;
        }
        for w in frames.windows(2) {
            if w[1].t_ms <= w[0].t_ms {
                return Err(SignalError::NonMonotonic {
                    previous: w[0].t_ms,
                    requested: w[1].t_ms,
                });
            }
        }
        Ok(ReplaySource {
            frames,
            seq: Sequencer::default(),
            cursor: 0,
        })
    }

    pub fn frames(&self) -> &[SignalFrame] {
        &self.frames
    }

    pub fn last_t_ms(&self) -> u64 {
        self.frames[self.frames.len() - 1].t_ms
    }
}

impl SignalSource for ReplaySource {
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError> {
        let last = self.last_t_ms();
        if t_ms > last {
            return Err(SignalError::Exhausted {
                requested: t_ms,
                last,
            });
        }
        self.seq.accept(t_ms)?;
        // Requests are monotonic, so the cursor only moves forward.
        while self.cursor + 1 < self.frames.len() && self.frames[self.cursor + 1].t_ms <= t_ms {
            self.cursor += 1;
        }
        let here = self.frames[self.cursor];
        if here.t_ms == t_ms {
            return Ok(here);
        }
        if t_ms < here.t_ms {
            // before the first recording
            return Ok(SignalFrame { t_ms, ..here });
        }
        let next = self.frames[self.cursor + 1];
        let frac = (t_ms - here.t_ms) as f64 / (next.t_ms - here.t_ms) as f64;
        let engagement = clamp_unit(here.engagement + (next.engagement - here.engagement) * frac);
        Ok(SignalFrame {
            t_ms,
            engagement,
            ..here
        })
    }

    fn quality(&self) -> ContactQuality {
        self.frames[self.cursor].quality
    }
}

/// Operator-controlled source: every frame carries the last pushed value.
#[derive(Debug, Clone)]
pub struct ManualSource {
    value: f64,
    contact: ContactQuality,
    seq: Sequencer,
}

impl ManualSource {
    pub fn new(initial: f64) -> Result<Self, SignalError> {
        check_unit("engagement", initial)?;
        Ok(ManualSource {
            value: initial,
            contact: ContactQuality::all_good(),
            seq: Sequencer::default(),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn set_value(&mut self, value: f64) -> Result<(), SignalError> {
        check_unit("engagement", value)?;
        self.value = value;
        Ok(())
    }

    pub fn set_contact(&mut self, quality: ContactQuality) {
        self.contact = quality;
    }
}

impl SignalSource for ManualSource {
    fn next_frame(&mut self, t_ms: u64) -> Result<SignalFrame, SignalError> {
        self.seq.accept(t_ms)?;
        Ok(SignalFrame {
            t_ms,
            engagement: self.value,
            aux: AuxMetrics::default(),
            quality: self.contact,
        })
    }

    fn quality(&self) -> ContactQuality {
        self.contact
    }
}

/// Timestamp of the `index`-th tick at `rate_hz`, in whole milliseconds.
/// Rates that do not divide 1000 produce a jittered but strictly increasing
/// schedule.
pub fn tick_time_ms(index: u64, rate_hz: u32) -> u64 {
    index * 1000 / rate_hz as u64
}
