//! Accelerated-clock session runs: simulation from a source, and replay of
//! an exported log.

use neurofeed_core::session::{
    neutral_survey, run_session, Session, SessionConfig, SessionError, SessionLogRecord,
    SurveyResponse, SurveyTask,
};
use neurofeed_core::signal::{ReplaySource, SignalSource};

use crate::formats::log::frames_from_log;
use crate::formats::FormatError;

/// Answers each questionnaire from `answers` when one matches the task,
/// otherwise with neutral ratings.
pub fn survey_provider(answers: &[SurveyResponse]) -> impl FnMut(SurveyTask) -> SurveyResponse + '_ {
    move |task| {
        answers
            .iter()
            .find(|a| a.phase == task)
            .cloned()
            .unwrap_or_else(|| neutral_survey(task))
    }
}

pub fn simulate(
    config: SessionConfig,
    source: &mut dyn SignalSource,
    answers: &[SurveyResponse],
) -> Result<Session, SessionError> {
    let mut session = Session::new(config)?;
    run_session(&mut session, source, survey_provider(answers))?;
    Ok(session)
}

/// Re-runs a session from the raw engagement and aux columns of its log.
pub fn replay_log(
    config: SessionConfig,
    records: &[SessionLogRecord],
    answers: &[SurveyResponse],
) -> Result<Session, FormatError> {
    let mut source = ReplaySource::new(frames_from_log(records))?;
    Ok(simulate(config, &mut source, answers)?)
}
