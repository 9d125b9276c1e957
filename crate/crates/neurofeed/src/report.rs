//! Cohort analysis over a directory of session logs plus demographics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use neurofeed_core::analysis::{
    compare_groups, descriptive, split_by_population_mean, survey_summary, word_frequency,
    AnalysisError, DescriptiveStats, GroupComparison, Metric, ParticipantSummary,
    PopulationSplit, Split, SurveySummary, DEFAULT_STOPWORDS,
};
use neurofeed_core::session::{Chronotype, Demographics, SurveyResponse, SurveyTask};
use serde::{Deserialize, Serialize};

use crate::formats::log::parse_log;
use crate::formats::meta::{meta_path_for, read_meta};
use crate::formats::FormatError;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantData {
    pub summary: ParticipantSummary,
    pub surveys: Vec<SurveyResponse>,
}

/// Reads every `*.csv` log in `dir` (sorted by name). The participant code
/// and surveys come from the `.meta.json` sidecar when present; otherwise the
/// file stem is the code.
pub fn load_logs(dir: &Path) -> Result<Vec<ParticipantData>, FormatError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let records = parse_log(std::fs::File::open(&path)?)
            .map_err(|e| FormatError::Invalid(format!("{}: {e}", path.display())))?;
        let meta_path = meta_path_for(&path);
        let (code, surveys) = if meta_path.exists() {
            let meta = read_meta(&meta_path)?;
            (meta.participant_code, meta.surveys)
        } else {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            (stem, Vec::new())
        };
        out.push(ParticipantData {
            summary: ParticipantSummary::from_records(&code, &records),
            surveys,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub split: Split,
    pub metric: Metric,
    #[serde(flatten)]
    pub result: GroupComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedComparison {
    pub split: Split,
    pub metric: Metric,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordFrequencies {
    pub video: Vec<(String, usize)>,
    pub maze: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub participants: usize,
    pub descriptives: BTreeMap<String, DescriptiveStats>,
    pub surveys: BTreeMap<String, SurveySummary>,
    pub population_split: Option<PopulationSplit>,
    pub comparisons: Vec<ComparisonEntry>,
    pub skipped: Vec<SkippedComparison>,
    pub word_frequencies: WordFrequencies,
}

/// Demographic splits screened by `analyze`.
pub fn standard_splits() -> Vec<Split> {
    vec![
        Split::BaselineBelowMean,
        Split::JavaLevelLow,
        Split::Mature,
        Split::WearsGlasses,
        Split::CsStudent,
        Split::PriorProgramming,
        Split::FrequentProgrammer,
        Split::Chronotypes(Chronotype::Morning, Chronotype::Night),
        Split::Chronotypes(Chronotype::Morning, Chronotype::NoPreference),
        Split::Chronotypes(Chronotype::NoPreference, Chronotype::Night),
    ]
}

pub fn analyze(
    participants: &[ParticipantData],
    demographics: &[Demographics],
) -> Result<Report, AnalysisError> {
    let summaries: Vec<ParticipantSummary> =
        participants.iter().map(|p| p.summary.clone()).collect();
    let known: std::collections::BTreeSet<&str> =
        demographics.iter().map(|d| d.participant_code.as_str()).collect();
    let missing: Vec<String> = summaries
        .iter()
        .filter(|s| !known.contains(s.participant_code.as_str()))
        .map(|s| s.participant_code.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::Unjoined(missing));
    }

    let mut descriptives = BTreeMap::new();
    for metric in Metric::ALL {
        let values: Vec<f64> = summaries.iter().filter_map(|s| s.metric(metric)).collect();
        if let Ok(d) = descriptive(&values) {
            descriptives.insert(metric.as_str().to_string(), d);
        }
    }

    let all_surveys: Vec<SurveyResponse> =
        participants.iter().flat_map(|p| p.surveys.iter().cloned()).collect();
    let mut surveys = BTreeMap::new();
    for (name, task) in [("video", SurveyTask::Video), ("maze", SurveyTask::Maze)] {
        if let Ok(s) = survey_summary(&all_surveys, task) {
            surveys.insert(name.to_string(), s);
        }
    }

    let baselines: BTreeMap<String, f64> = summaries
        .iter()
        .filter_map(|s| s.baseline.map(|b| (s.participant_code.clone(), b)))
        .collect();
    let population_split = split_by_population_mean(&baselines).ok();

    let mut comparisons = Vec::new();
    let mut skipped = Vec::new();
    for split in standard_splits() {
        for metric in Metric::ALL {
            if split == Split::BaselineBelowMean && metric == Metric::Baseline {
                continue;
            }
            match compare_groups(&summaries, demographics, &split, metric) {
                Ok(result) => comparisons.push(ComparisonEntry {
                    split: split.clone(),
                    metric,
                    result,
                }),
                Err(e) => skipped.push(SkippedComparison {
                    split: split.clone(),
                    metric,
                    reason: e.to_string(),
                }),
            }
        }
    }

    let texts = |task: SurveyTask| -> Vec<&str> {
        all_surveys
            .iter()
            .filter(|s| s.phase == task)
            .map(|s| s.free_text.as_str())
            .collect()
    };
    let word_frequencies = WordFrequencies {
        video: word_frequency(&texts(SurveyTask::Video), DEFAULT_STOPWORDS),
        maze: word_frequency(&texts(SurveyTask::Maze), DEFAULT_STOPWORDS),
    };

    Ok(Report {
        participants: summaries.len(),
        descriptives,
        surveys,
        population_split,
        comparisons,
        skipped,
        word_frequencies,
    })
}

/// Plain-text rendering of a report.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "participants: {}", report.participants);
    let _ = writeln!(
        out,
        "\n{:<18} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "metric", "n", "mean", "median", "mode", "min", "max"
    );
    for (name, d) in &report.descriptives {
        let _ = writeln!(
            out,
            "{:<18} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            name, d.n, d.mean, d.median, d.mode, d.min, d.max
        );
    }
    if let Some(split) = &report.population_split {
        let _ = writeln!(
            out,
            "\npopulation mean baseline {:.6}: low n={}, high n={}",
            split.population_mean,
            split.low.len(),
            split.high.len()
        );
    }
    let _ = writeln!(
        out,
        "\n{:<44} {:<16} {:>4} {:>4} {:>9} {:>9} {:>8} {:>7} {:>8}",
        "groups", "metric", "n_a", "n_b", "mean_a", "mean_b", "t", "df", "p"
    );
    for c in &report.comparisons {
        let r = &c.result;
        let _ = writeln!(
            out,
            "{:<44} {:<16} {:>4} {:>4} {:>9.3} {:>9.3} {:>8.3} {:>7.2} {:>8.4}{}",
            format!("{} vs {}", r.group_a_label, r.group_b_label),
            c.metric.as_str(),
            r.n_a,
            r.n_b,
            r.mean_a,
            r.mean_b,
            r.t_statistic,
            r.welch_df,
            r.p_value,
            if r.flagged { " *" } else { "" }
        );
    }
    for (task, words) in [
        ("video", &report.word_frequencies.video),
        ("maze", &report.word_frequencies.maze),
    ] {
        let top: Vec<String> = words.iter().take(10).map(|(w, c)| format!("{w}({c})")).collect();
        let _ = writeln!(out, "\ntop words ({task}): {}", top.join(", "));
    }
    out
}
