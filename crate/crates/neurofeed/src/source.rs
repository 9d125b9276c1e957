//! Source selection for the CLI and gateway.
//!
//! Compact CLI forms:
//! `constant:0.7`, `sinusoid:MEAN,AMP,PERIOD_S[,PHASE_S]`,
//! `walk:MEAN,REVERSION,VOLATILITY,SEED`, `script:T:V;T:V;...`,
//! `manual[:INITIAL]`, `trace:PATH`. A bare path ending in `.json` is read
//! as a JSON source spec; one ending in `.csv` is replayed as a trace.

use std::path::PathBuf;
use std::str::FromStr;

use neurofeed_core::signal::{ManualSource, SignalSource, TrajectorySource, TrajectorySpec};
use serde::{Deserialize, Serialize};

use crate::formats::{trace, FormatError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Manual {
        #[serde(default = "half")]
        initial: f64,
    },
    Trajectory {
        trajectory: TrajectorySpec,
    },
    Trace {
        path: PathBuf,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Manual { initial: 0.5 }
    }
}

/// A constructed source. Manual sources are kept concrete so the gateway can
/// push values into them.
pub enum BuiltSource {
    Manual(ManualSource),
    Other(Box<dyn SignalSource + Send>),
}

impl BuiltSource {
    pub fn as_source(&mut self) -> &mut dyn SignalSource {
        match self {
            BuiltSource::Manual(m) => m,
            BuiltSource::Other(s) => s.as_mut(),
        }
    }
}

impl SourceSpec {
    pub fn build(&self) -> Result<BuiltSource, FormatError> {
        Ok(match self {
            SourceSpec::Manual { initial } => BuiltSource::Manual(ManualSource::new(*initial)?),
            SourceSpec::Trajectory { trajectory } => {
                BuiltSource::Other(Box::new(TrajectorySource::new(trajectory)?))
            }
            SourceSpec::Trace { path } => BuiltSource::Other(Box::new(trace::replay_source(path)?)),
        })
    }
}

fn numbers(s: &str, n_min: usize, n_max: usize) -> Result<Vec<f64>, FormatError> {
    let vals = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FormatError::Invalid(format!("bad number in `{s}`: {e}")))?;
    if vals.len() < n_min || vals.len() > n_max {
        return Err(FormatError::Invalid(format!(
            "`{s}`: expected {n_min}-{n_max} values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

impl FromStr for SourceSpec {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let traj = |t| Ok(SourceSpec::Trajectory { trajectory: t });
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "constant" => traj(TrajectorySpec::Constant {
                level: numbers(rest, 1, 1)?[0],
            }),
            "sinusoid" => {
                let v = numbers(rest, 3, 4)?;
                traj(TrajectorySpec::Sinusoid {
                    mean: v[0],
                    amplitude: v[1],
                    period_s: v[2],
                    phase_s: v.get(3).copied().unwrap_or(0.0),
                })
            }
            "walk" => {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 4 {
                    return Err(FormatError::Invalid(format!("`{s}`: walk needs 4 values")));
                }
                let v = numbers(&parts[..3].join(","), 3, 3)?;
                let seed = parts[3]
                    .trim()
                    .parse()
                    .map_err(|e| FormatError::Invalid(format!("bad seed: {e}")))?;
                traj(TrajectorySpec::RandomWalk {
                    mean: v[0],
                    reversion_rate: v[1],
                    volatility: v[2],
                    seed,
                })
            }
            "script" => {
                let points = rest
                    .split(';')
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        let (t, v) = p
                            .split_once(':')
                            .ok_or_else(|| FormatError::Invalid(format!("bad breakpoint `{p}`")))?;
                        let t = t.trim().parse::<u64>();
                        let v = v.trim().parse::<f64>();
                        match (t, v) {
                            (Ok(t), Ok(v)) => Ok((t, v)),
                            _ => Err(FormatError::Invalid(format!("bad breakpoint `{p}`"))),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let spec = TrajectorySpec::Scripted { points };
                spec.validate()?;
                traj(spec)
            }
            "manual" => Ok(SourceSpec::Manual {
                initial: if rest.is_empty() {
                    0.5
                } else {
                    numbers(rest, 1, 1)?[0]
                },
            }),
            "trace" => Ok(SourceSpec::Trace { path: rest.into() }),
            _ if s.ends_with(".json") => Ok(serde_json::from_str(&std::fs::read_to_string(s)?)?),
            _ if s.ends_with(".csv") => Ok(SourceSpec::Trace { path: s.into() }),
            _ => Err(FormatError::Invalid(format!("unrecognised source `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_forms() {
        assert_eq!(
            "constant:0.7".parse::<SourceSpec>().unwrap(),
            SourceSpec::Trajectory {
                trajectory: TrajectorySpec::Constant { level: 0.7 }
            }
        );
        assert!(matches!(
            "sinusoid:0.5,0.3,60".parse::<SourceSpec>().unwrap(),
            SourceSpec::Trajectory {
                trajectory: TrajectorySpec::Sinusoid { phase_s, .. }
            } if phase_s == 0.0
        ));
        assert!(matches!(
            "walk:0.5,0.2,0.1,42".parse::<SourceSpec>().unwrap(),
            SourceSpec::Trajectory {
                trajectory: TrajectorySpec::RandomWalk { seed: 42, .. }
            }
        ));
        assert_eq!(
            "script:0:0.2;1000:0.6".parse::<SourceSpec>().unwrap(),
            SourceSpec::Trajectory {
                trajectory: TrajectorySpec::Scripted {
                    points: vec![(0, 0.2), (1000, 0.6)]
                }
            }
        );
        assert_eq!(
            "manual".parse::<SourceSpec>().unwrap(),
            SourceSpec::Manual { initial: 0.5 }
        );
        assert!("script:5:0.1;2:0.3".parse::<SourceSpec>().is_err());
        assert!("bogus".parse::<SourceSpec>().is_err());
    }

    #[test]
    fn json_form() {
        let spec: SourceSpec = serde_json::from_str(
            r#"{"kind":"trajectory","trajectory":{"constant":{"level":0.25}}}"#,
        )
        .unwrap();
        assert!(matches!(spec, SourceSpec::Trajectory { .. }));
        let manual: SourceSpec = serde_json::from_str(r#"{"kind":"manual"}"#).unwrap();
        assert_eq!(manual, SourceSpec::default());
    }
}
