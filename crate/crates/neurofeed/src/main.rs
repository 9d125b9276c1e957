use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use neurofeed::formats::config::load_config;
use neurofeed::formats::demographics::read_demographics;
use neurofeed::formats::log::{export_log, parse_log};
use neurofeed::formats::meta::{meta_path_for, read_meta, write_meta, SessionMeta};
use neurofeed::gateway::actor::Clock;
use neurofeed::gateway::{serve, GatewayOptions};
use neurofeed::report::{analyze, load_logs, render_text};
use neurofeed::sim::{replay_log, simulate};
use neurofeed::source::SourceSpec;
use neurofeed_core::session::{SessionConfig, SurveyResponse};

#[derive(Parser)]
#[command(name = "neurofeed", version, about = "Engagement-driven neurofeedback sessions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a full session on an accelerated clock and write its log.
    Run {
        /// Session config (.toml or .json); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Signal source, e.g. `constant:0.6`, `walk:0.5,0.2,0.1,7`, `trace:rec.csv`.
        #[arg(long)]
        source: String,
        #[arg(long)]
        out: PathBuf,
        /// JSON array of survey responses; missing ones are answered neutrally.
        #[arg(long)]
        surveys: Option<PathBuf>,
    },
    /// Re-run a session from the raw engagement column of an exported log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config stored next to the log.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Cohort statistics over a directory of logs.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        demographics: PathBuf,
        /// JSON report path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a plain-text rendering here.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Start the HTTP/WebSocket gateway.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Clock acceleration factor.
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
    },
}

fn read_config(path: Option<&Path>) -> Result<SessionConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(SessionConfig::default()),
    }
}

fn write_outputs(out: &Path, meta: &SessionMeta, csv: &str) -> Result<()> {
    fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    write_meta(&meta_path_for(out), meta)?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Cmd::Run {
            config,
            source,
            out,
            surveys,
        } => {
            let config = read_config(config.as_deref())?;
            let spec: SourceSpec = source
                .parse()
                .with_context(|| format!("invalid --source `{source}`"))?;
            if matches!(spec, SourceSpec::Manual { .. }) {
                bail!("manual sources need the gateway; use `serve`");
            }
            let answers: Vec<SurveyResponse> = match surveys {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("reading surveys {}", p.display()))?,
                None => Vec::new(),
            };
            let mut built = spec.build()?;
            let session = simulate(config, built.as_source(), &answers)?;
            write_outputs(&out, &SessionMeta::from_session(&session), &export_log(session.records()))?;
            eprintln!(
                "{} records, {} events -> {}",
                session.records().len(),
                session.events().len(),
                out.display()
            );
        }
        Cmd::Replay { log, out, config } => {
            let records = parse_log(fs::File::open(&log)?)?;
            let meta_path = meta_path_for(&log);
            let meta = meta_path.exists().then(|| read_meta(&meta_path)).transpose()?;
            let config = match (config, &meta) {
                (Some(p), _) => read_config(Some(&p))?,
                (None, Some(m)) => m.config.clone(),
                (None, None) => SessionConfig::default(),
            };
            let answers = meta.map(|m| m.surveys).unwrap_or_default();
            let session = replay_log(config, &records, &answers)?;
            write_outputs(&out, &SessionMeta::from_session(&session), &export_log(session.records()))?;
        }
        Cmd::Analyze {
            logs,
            demographics,
            out,
            text,
        } => {
            let participants = load_logs(&logs)?;
            let demo = read_demographics(fs::File::open(&demographics)?)?;
            let report = analyze(&participants, &demo)?;
            fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            if let Some(t) = text {
                fs::write(t, render_text(&report))?;
            }
        }
        Cmd::Serve {
            port,
            host,
            speedup,
        } => {
            let options = GatewayOptions {
                clock: Clock::Realtime { speedup },
                ..Default::default()
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(SocketAddr::new(host, port), options))?;
        }
    }
    Ok(())
}
