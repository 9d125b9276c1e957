//! Sidecar JSON written next to each session log (`<name>.meta.json`):
//! participant code, config, calibration result and survey answers.

use std::path::{Path, PathBuf};

use neurofeed_core::calibration::CalibrationResult;
use neurofeed_core::session::{Session, SessionConfig, SurveyResponse};
use serde::{Deserialize, Serialize};

use super::FormatError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub participant_code: String,
    pub config: SessionConfig,
    pub calibration: Option<CalibrationResult>,
    pub surveys: Vec<SurveyResponse>,
}

impl SessionMeta {
    pub fn from_session(session: &Session) -> Self {
        SessionMeta {
            participant_code: session.config().participant_code.clone(),
            config: session.config().clone(),
            calibration: session.calibration().copied(),
            surveys: session.surveys().to_vec(),
        }
    }
}

pub fn meta_path_for(log_path: &Path) -> PathBuf {
    log_path.with_extension("meta.json")
}

pub fn write_meta(path: &Path, meta: &SessionMeta) -> Result<(), FormatError> {
    std::fs::write(path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<SessionMeta, FormatError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
