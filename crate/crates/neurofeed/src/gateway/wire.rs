//! WebSocket message schema. Frame payloads use the session-log column names.

use neurofeed_core::intervention::InterventionEvent;
use neurofeed_core::session::{Phase, SessionLogRecord, SessionSnapshot};
use serde::{Deserialize, Serialize};

/// Engine output before a connection assigns it a sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Outbound {
    Frame(SessionLogRecord),
    Event(InterventionEvent),
    Phase(PhaseChange),
    State(Box<SessionSnapshot>),
    Error(ErrorPayload),
}

impl Outbound {
    /// Only frame messages may be dropped under back-pressure.
    pub fn droppable(&self) -> bool {
        matches!(self, Outbound::Frame(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: Phase,
    pub t_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: u16,
    pub message: String,
}

/// `{"type": ..., "payload": ..., "seq": n}` as sent on the socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(flatten)]
    pub body: Outbound,
    pub seq: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use neurofeed_core::intervention::EventKind;

    #[test]
    fn event_shape() {
        let m = WireMessage {
            body: Outbound::Event(InterventionEvent {
                t_ms: 250,
                kind: EventKind::VideoPause,
            }),
            seq: 3,
        };
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"type": "event", "seq": 3, "payload": {"t_ms": 250, "kind": "video_pause"}})
        );
        let back: WireMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
