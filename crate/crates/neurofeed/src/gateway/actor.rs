//! One task per session. It owns the engine and its source, serialises every
//! command, and publishes engine output to the hub in engine order.

use std::time::Duration;

use neurofeed_core::intervention::InterventionEvent;
use neurofeed_core::maze::MazeView;
use neurofeed_core::session::{Phase, Session, SessionSnapshot, SurveyResponse};
use tokio::sync::{mpsc, oneshot, watch};

use super::hub::{Hub, Subscription};
use super::wire::{ErrorPayload, Outbound, PhaseChange};
use super::ApiError;
use crate::formats::log::export_log;
use crate::source::BuiltSource;

/// How the actor's clock advances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    /// Tick at the configured rate, `speedup` times faster than real time.
    Realtime { speedup: f64 },
    /// Tick only on [`Command::Step`].
    Stepped,
}

pub type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

pub enum Command {
    Snapshot(oneshot::Sender<SessionSnapshot>),
    Advance(Reply<Phase>),
    Survey(SurveyResponse, Reply<()>),
    Manual(f64, Reply<()>),
    Export(oneshot::Sender<String>),
    Maze(oneshot::Sender<MazeView>),
    Subscribe(oneshot::Sender<Subscription>),
    /// Runs up to `n` ticks; replies with the number actually run.
    Step(u64, oneshot::Sender<u64>),
}

pub struct Actor {
    session: Session,
    source: BuiltSource,
    hub: Hub,
    frame_budget: usize,
    phase_tx: watch::Sender<Phase>,
    halted: bool,
}

impl Actor {
    pub fn new(
        session: Session,
        source: BuiltSource,
        frame_budget: usize,
        phase_tx: watch::Sender<Phase>,
    ) -> Self {
        Actor {
            session,
            source,
            hub: Hub::new(),
            frame_budget,
            phase_tx,
            halted: false,
        }
    }

    pub async fn run(mut self, mut commands: mpsc::Receiver<Command>, clock: Clock) {
        let period = match clock {
            Clock::Realtime { speedup } => {
                let rate = self.session.config().sample_rate_hz as f64;
                Some(Duration::from_secs_f64(1.0 / (rate * speedup.max(1e-6))))
            }
            Clock::Stepped => None,
        };
        let mut interval = period.map(|p| {
            let mut i = tokio::time::interval(p);
            i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);
            i
        });
        loop {
            let ticking = self.ticking();
            tokio::select! {
                cmd = commands.recv() => match cmd {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                },
                _ = async { interval.as_mut().unwrap().tick().await }, if ticking && interval.is_some() => {
                    self.tick_once();
                }
            }
        }
        self.hub.close_all();
    }

    fn ticking(&self) -> bool {
        !self.halted && self.session.phase().is_ticking()
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Snapshot(tx) => {
                let _ = tx.send(self.session.snapshot());
            }
            Command::Advance(tx) => {
                let _ = tx.send(self.advance());
            }
            Command::Survey(resp, tx) => {
                let r = self.session.ingest_survey(resp).map_err(ApiError::from);
                if r.is_ok() {
                    self.auto_advance();
                }
                let _ = tx.send(r);
            }
            Command::Manual(v, tx) => {
                let r = match &mut self.source {
                    BuiltSource::Manual(m) => m.set_value(v).map_err(|e| {
                        ApiError::bad_request(e.to_string()).with_field("value")
                    }),
                    BuiltSource::Other(_) => {
                        Err(ApiError::conflict("session source is not manual"))
                    }
                };
                let _ = tx.send(r);
            }
            Command::Export(tx) => {
                let _ = tx.send(export_log(self.session.records()));
            }
            Command::Maze(tx) => {
                let _ = tx.send(MazeView::new(self.session.maze(), self.session.route()));
            }
            Command::Subscribe(tx) => {
                let snapshot = Outbound::State(Box::new(self.session.snapshot()));
                let _ = tx.send(self.hub.subscribe(snapshot, self.frame_budget));
            }
            Command::Step(n, tx) => {
                let mut done = 0;
                while done < n && self.ticking() {
                    self.tick_once();
                    done += 1;
                }
                let _ = tx.send(done);
            }
        }
    }

    fn advance(&mut self) -> Result<Phase, ApiError> {
        if self.session.phase() == Phase::Idle {
            let q = self.source.as_source().quality();
            self.session.observe_quality(&q);
        }
        let next = self.session.advance_phase()?;
        self.publish_phase(next);
        self.auto_advance();
        Ok(self.session.phase())
    }

    /// Leaves every phase whose completion condition holds, except Idle,
    /// which waits for an explicit advance.
    fn auto_advance(&mut self) {
        while self.session.phase() != Phase::Idle && self.session.can_advance() {
            match self.session.advance_phase() {
                Ok(p) => self.publish_phase(p),
                Err(e) => {
                    self.fail(e.to_string());
                    return;
                }
            }
        }
    }

    fn publish_phase(&mut self, phase: Phase) {
        let _ = self.phase_tx.send(phase);
        self.hub.publish(Outbound::Phase(PhaseChange {
            phase,
            t_ms: self.session.next_tick_ms(),
        }));
    }

    fn fail(&mut self, message: String) {
        tracing::warn!(%message, "session halted");
        self.halted = true;
        self.hub
            .publish(Outbound::Error(ErrorPayload { code: 500, message }));
    }

    fn tick_once(&mut self) {
        let t = self.session.next_tick_ms();
        let frame = match self.source.as_source().next_frame(t) {
            Ok(f) => f,
            Err(e) => return self.fail(e.to_string()),
        };
        let record = match self.session.tick(frame) {
            Ok(r) => r.clone(),
            Err(e) => return self.fail(e.to_string()),
        };
        let event = record.event.map(|kind| InterventionEvent {
            t_ms: record.t_ms,
            kind,
        });
        self.hub.publish(Outbound::Frame(record));
        if let Some(ev) = event {
            self.hub.publish(Outbound::Event(ev));
        }
        self.auto_advance();
    }
}
