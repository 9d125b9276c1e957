//! Flat key-value session config, TOML or JSON by file extension.

use std::path::Path;

use neurofeed_core::session::SessionConfig;

use super::FormatError;

pub fn parse_config_toml(text: &str) -> Result<SessionConfig, FormatError> {
    let cfg: SessionConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config_json(text: &str) -> Result<SessionConfig, FormatError> {
    let cfg: SessionConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SessionConfig, FormatError> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_config_json(&text),
        Some("toml") => parse_config_toml(&text),
        _ => Err(FormatError::Invalid(format!(
            "{}: config must be .toml or .json",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let cfg = parse_config_toml(
            "participant_code = \"P07\"\nsample_rate_hz = 16\nsmoothing_window_s = 0.5\nskip_calibration = true\n",
        )
        .unwrap();
        assert_eq!(cfg.participant_code, "P07");
        assert_eq!(cfg.sample_rate_hz, 16);
        assert_eq!(cfg.evaluator.smoothing_window_s, 0.5);
        assert_eq!(cfg.evaluator.fast_slope, 10.0);
        assert_eq!(cfg.video_s, 480.0);
        assert!(cfg.skip_calibration);
    }

    #[test]
    fn json_and_toml_agree() {
        let a = parse_config_json(r#"{"maze_seed": 9, "maze_s": 30}"#).unwrap();
        let b = parse_config_toml("maze_seed = 9\nmaze_s = 30.0\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_rate_rejected() {
        assert!(matches!(
            parse_config_json(r#"{"sample_rate_hz": 500}"#),
            Err(FormatError::Session(_))
        ));
    }
}
