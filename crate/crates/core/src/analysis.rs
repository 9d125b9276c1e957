//! Offline statistics over completed sessions.
//!
//! Group differences are screened with a two-sided Welch t-test and flagged
//! when `p < 0.15`. The Student-t tail comes from the regularized incomplete
//! beta function, evaluated by continued fraction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::session::{Chronotype, Demographics, Phase, SessionLogRecord, SurveyResponse, SurveyTask};

/// Screening threshold: anything below is treated as potentially important.
pub const SCREENING_P: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no values to summarise")]
    Empty,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("participants without demographics: {0:?}")]
    Unjoined(Vec<String>),
    #[error("group `{label}` has {n} participants; need at least 2")]
    GroupTooSmall { label: String, n: usize },
}

fn check_finite(values: &[f64]) -> Result<(), AnalysisError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AnalysisError::NonFinite)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Most frequent value; the smallest one among ties.
    pub mode: f64,
    pub max: f64,
    pub min: f64,
    pub range: f64,
}

pub fn descriptive(values: &[f64]) -> Result<DescriptiveStats, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let (mut mode, mut best) = (sorted[0], 0usize);
    for run in sorted.chunk_by(|a, b| a == b) {
        // strict `>` keeps the first (smallest) value on ties
        if run.len() > best {
            best = run.len();
            mode = run[0];
        }
    }
    let (min, max) = (sorted[0], sorted[n - 1]);
    Ok(DescriptiveStats {
        n,
        // Sum in sorted order so the result does not depend on input order.
        mean: mean(&sorted),
        median,
        mode,
        max,
        min,
        range: max - min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSplit {
    pub population_mean: f64,
    pub low: Vec<String>,
    pub high: Vec<String>,
}

/// Splits participants around the mean of all baselines: strictly below goes
/// low, at or above goes high.
pub fn split_by_population_mean(
    baselines: &BTreeMap<String, f64>,
) -> Result<PopulationSplit, AnalysisError> {
    if baselines.len() < 2 {
        return Err(AnalysisError::TooFew {
            needed: 2,
            got: baselines.len(),
        });
    }
    let values: Vec<f64> = baselines.values().copied().collect();
    check_finite(&values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding in the sum can push the mean a hair outside [min, max].
    let population_mean = mean(&values).clamp(lo, hi);
    let (low, high): (Vec<_>, Vec<_>) = baselines
        .iter()
        .partition(|(_, &b)| b < population_mean);
    Ok(PopulationSplit {
        population_mean,
        low: low.into_iter().map(|(k, _)| k.clone()).collect(),
        high: high.into_iter().map(|(k, _)| k.clone()).collect(),
    })
}

/// Why a comparison bypassed the t distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// Both samples constant and equal: p = 1.
    Identical,
    /// Both samples constant with different values: p = 0.
    ExactSeparation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_a_label: String,
    pub group_b_label: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub welch_df: f64,
    pub p_value: f64,
    pub flagged: bool,
    pub degenerate: Option<Degeneracy>,
}

impl GroupComparison {
    pub fn with_labels(mut self, a: &str, b: &str) -> Self {
        self.group_a_label = a.to_string();
        self.group_b_label = b.to_string();
        self
    }
}

fn sample_variance(values: &[f64], m: f64) -> f64 {
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Two-sided Welch (unequal variance) t-test of `a` against `b`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<GroupComparison, AnalysisError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AnalysisError::TooFew {
                needed: 2,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let (mean_a, mean_b) = (mean(a), mean(b));
    let va = sample_variance(a, mean_a) / n_a;
    let vb = sample_variance(b, mean_b) / n_b;
    let se2 = va + vb;

    let (t, df, p, degenerate) = if se2 == 0.0 {
        let df = n_a + n_b - 2.0;
        if mean_a == mean_b {
            (0.0, df, 1.0, Some(Degeneracy::Identical))
        } else {
            let t = if mean_a > mean_b {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            (t, df, 0.0, Some(Degeneracy::ExactSeparation))
        }
    } else {
        let t = (mean_a - mean_b) / libm::sqrt(se2);
        let df = se2 * se2 / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
        (t, df, student_t_two_sided(t, df), None)
    };
    Ok(GroupComparison {
        group_a_label: "a".into(),
        group_b_label: "b".into(),
        n_a: a.len(),
        n_b: b.len(),
        mean_a,
        mean_b,
        t_statistic: t,
        welch_df: df,
        p_value: p,
        flagged: p < SCREENING_P,
        degenerate,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a.is_nan() || b.is_nan() || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // The continued fraction converges fastest for x < (a + 1) / (a + b + 2).
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// A small English stopword list for free-text survey answers.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had",
    "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just",
    "me", "more", "my", "no", "not", "of", "on", "or", "other", "our", "out", "over", "s", "she",
    "so", "some", "such", "t", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "to", "too", "up", "very", "was", "we", "were", "what", "when", "which",
    "while", "who", "will", "with", "would", "you", "your",
];

/// Lowercased alphabetic tokens minus stopwords, counted and sorted by count
/// descending then word ascending.
pub fn word_frequency<S: AsRef<str>>(texts: &[S], stopwords: &[&str]) -> Vec<(String, usize)> {
    let stop: BTreeSet<String> = stopwords.iter().map(|w| w.to_lowercase()).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        for token in text.as_ref().split(|c: char| !c.is_alphabetic()) {
            if token.is_empty() {
                continue;
            }
            let word = token.to_lowercase();
            if !stop.contains(&word) {
                *counts.entry(word).or_default() += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap already yields words ascending; a stable sort keeps that order
    // within equal counts.
    out.sort_by_key(|w| core::cmp::Reverse(w.1));
    out
}

/// Per-participant measures extracted from one session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub participant_code: String,
    pub baseline: Option<f64>,
    pub fixation_mean: Option<f64>,
    pub eyes_closed_mean: Option<f64>,
    pub range_open_shut: Option<f64>,
    pub drops_video: u64,
    pub drops_maze: u64,
}

impl ParticipantSummary {
    pub fn from_records(participant_code: &str, records: &[SessionLogRecord]) -> Self {
        let stage_mean = |phase: Phase| {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.phase == phase)
                .map(|r| r.raw_engagement)
                .collect();
            (!xs.is_empty()).then(|| mean(&xs))
        };
        let fixation_mean = stage_mean(Phase::CalibrationFixation);
        let eyes_closed_mean = stage_mean(Phase::CalibrationEyesClosed);
        let last = records.last();
        ParticipantSummary {
            participant_code: participant_code.to_string(),
            baseline: records.iter().find_map(|r| r.baseline),
            fixation_mean,
            eyes_closed_mean,
            range_open_shut: fixation_mean.zip(eyes_closed_mean).map(|(f, e)| f - e),
            drops_video: last.map_or(0, |r| r.drops_video),
            drops_maze: last.map_or(0, |r| r.drops_maze),
        }
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::DropsVideo => Some(self.drops_video as f64),
            Metric::DropsMaze => Some(self.drops_maze as f64),
            Metric::Baseline => self.baseline,
            Metric::FixationMean => self.fixation_mean,
            Metric::RangeOpenShut => self.range_open_shut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DropsVideo,
    DropsMaze,
    Baseline,
    FixationMean,
    RangeOpenShut,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::DropsVideo,
        Metric::DropsMaze,
        Metric::Baseline,
        Metric::FixationMean,
        Metric::RangeOpenShut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::DropsVideo => "drops_video",
            Metric::DropsMaze => "drops_maze",
            Metric::Baseline => "baseline",
            Metric::FixationMean => "fixation_mean",
            Metric::RangeOpenShut => "range_open_shut",
        }
    }
}

/// Demographic partitions used in the group comparisons. Each assigns a
/// participant to group A, group B, or neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Baseline below the population mean (A) vs at/above it (B).
    BaselineBelowMean,
    /// Java self-rating 1-3 (A) vs 4-5 (B).
    JavaLevelLow,
    Mature,
    WearsGlasses,
    CsStudent,
    PriorProgramming,
    /// Programming frequency 4-5 (A) vs 2-3 (B); 1 excluded.
    FrequentProgrammer,
    Chronotypes(Chronotype, Chronotype),
}

impl Split {
    pub fn labels(&self) -> (String, String) {
        let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
        match self {
            Split::BaselineBelowMean => pair("baseline_low", "baseline_high"),
            Split::JavaLevelLow => pair("java_1_3", "java_4_5"),
            Split::Mature => pair("mature", "non_mature"),
            Split::WearsGlasses => pair("glasses", "no_glasses"),
            Split::CsStudent => pair("cs", "non_cs"),
            Split::PriorProgramming => pair("prior_programming", "no_prior_programming"),
            Split::FrequentProgrammer => pair("frequency_4_5", "frequency_2_3"),
            Split::Chronotypes(a, b) => (chronotype_label(*a), chronotype_label(*b)),
        }
    }
}

fn chronotype_label(c: Chronotype) -> String {
    match c {
        Chronotype::Morning => "morning",
        Chronotype::Night => "night",
        Chronotype::NoPreference => "no_preference",
    }
    .to_string()
}

/// Joins summaries to demographics, partitions by `split`, and runs a Welch
/// test on `metric`. Participants whose metric is unavailable are left out.
pub fn compare_groups(
    summaries: &[ParticipantSummary],
    demographics: &[Demographics],
    split: &Split,
    metric: Metric,
) -> Result<GroupComparison, AnalysisError> {
    let by_code: BTreeMap<&str, &Demographics> = demographics
        .iter()
        .map(|d| (d.participant_code.as_str(), d))
        .collect();
    let missing: Vec<String> = summaries
        .iter()
        .filter(|s| !by_code.contains_key(s.participant_code.as_str()))
        .map(|s| s.participant_code.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::Unjoined(missing));
    }

    let population = if *split == Split::BaselineBelowMean {
        let baselines: BTreeMap<String, f64> = summaries
            .iter()
            .filter_map(|s| s.baseline.map(|b| (s.participant_code.clone(), b)))
            .collect();
        Some(split_by_population_mean(&baselines)?)
    } else {
        None
    };

    let assign = |s: &ParticipantSummary, d: &Demographics| -> Option<bool> {
        match split {
            Split::BaselineBelowMean => {
                let pop = population.as_ref()?;
                if pop.low.contains(&s.participant_code) {
                    Some(true)
                } else if pop.high.contains(&s.participant_code) {
                    Some(false)
                } else {
                    None
                }
            }
            Split::JavaLevelLow => Some(d.java_level <= 3),
            Split::Mature => Some(d.mature),
            Split::WearsGlasses => Some(d.wears_glasses),
            Split::CsStudent => Some(d.cs_student),
            Split::PriorProgramming => Some(d.prior_programming),
            Split::FrequentProgrammer => match d.programming_frequency {
                4..=5 => Some(true),
                2..=3 => Some(false),
                _ => None,
            },
            Split::Chronotypes(a, b) => {
                if d.chronotype == *a {
                    Some(true)
                } else if d.chronotype == *b {
                    Some(false)
                } else {
                    None
                }
            }
        }
    };

    let (mut group_a, mut group_b) = (Vec::new(), Vec::new());
    for s in summaries {
        let d = by_code[s.participant_code.as_str()];
        let (Some(side), Some(value)) = (assign(s, d), s.metric(metric)) else {
            continue;
        };
        if side {
            group_a.push(value);
        } else {
            group_b.push(value);
        }
    }
    let (label_a, label_b) = split.labels();
    for (label, group) in [(&label_a, &group_a), (&label_b, &group_b)] {
        if group.len() < 2 {
            return Err(AnalysisError::GroupTooSmall {
                label: label.clone(),
                n: group.len(),
            });
        }
    }
    Ok(welch_t_test(&group_a, &group_b)?.with_labels(&label_a, &label_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub challenged: DescriptiveStats,
    pub interesting: DescriptiveStats,
    pub engaging: DescriptiveStats,
}

/// Descriptives of the three rating items for one task's questionnaires.
pub fn survey_summary(
    responses: &[SurveyResponse],
    task: SurveyTask,
) -> Result<SurveySummary, AnalysisError> {
    let pick = |f: fn(&SurveyResponse) -> u8| -> Vec<f64> {
        responses
            .iter()
            .filter(|r| r.phase == task)
            .map(|r| f(r) as f64)
            .collect()
    };
    Ok(SurveySummary {
        challenged: descriptive(&pick(|r| r.challenged))?,
        interesting: descriptive(&pick(|r| r.interesting))?,
        engaging: descriptive(&pick(|r| r.engaging))?,
    })
}
