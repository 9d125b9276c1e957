//! Per-session fan-out. Publishing never blocks the engine: each subscriber
//! has its own queue, frame messages beyond the queue's frame budget are
//! dropped, and every other message is always enqueued.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use tokio::sync::Notify;

use super::wire::{Outbound, WireMessage};

pub const DEFAULT_FRAME_BUDGET: usize = 256;

#[derive(Debug, Default)]
struct QueueState {
    buf: VecDeque<Outbound>,
    frames: usize,
    dropped_frames: u64,
    closed: bool,
}

#[derive(Debug)]
struct Queue {
    state: Mutex<QueueState>,
    notify: Notify,
    frame_budget: usize,
}

#[derive(Debug, Default)]
pub struct Hub {
    subscribers: Vec<Arc<Queue>>,
}

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a subscriber whose queue starts with `first`.
    pub fn subscribe(&mut self, first: Outbound, frame_budget: usize) -> Subscription {
        let queue = Arc::new(Queue {
            state: Mutex::new(QueueState::default()),
            notify: Notify::new(),
            frame_budget,
        });
        push(&queue, first);
        self.subscribers.push(queue.clone());
        Subscription { queue, next_seq: 0 }
    }

    pub fn publish(&mut self, msg: Outbound) {
        self.subscribers
            .retain(|q| !q.state.lock().expect("queue lock").closed);
        for q in &self.subscribers {
            push(q, msg.clone());
        }
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    /// Marks every subscriber closed; they drain what is queued, then end.
    pub fn close_all(&mut self) {
        for q in self.subscribers.drain(..) {
            q.state.lock().expect("queue lock").closed = true;
            q.notify.notify_one();
        }
    }
}

fn push(q: &Queue, msg: Outbound) {
    {
        let mut st = q.state.lock().expect("queue lock");
        if msg.droppable() {
            if st.frames >= q.frame_budget {
                st.dropped_frames += 1;
                return;
            }
            st.frames += 1;
        }
        st.buf.push_back(msg);
    }
    q.notify.notify_one();
}

/// Receiving end of one connection. Sequence numbers are assigned on
/// delivery, so they are gapless even when frames were dropped.
#[derive(Debug)]
pub struct Subscription {
    queue: Arc<Queue>,
    next_seq: u64,
}

impl Subscription {
    fn pop(&mut self) -> Result<Option<WireMessage>, ()> {
        let mut st = self.queue.state.lock().expect("queue lock");
        match st.buf.pop_front() {
            Some(body) => {
                if body.droppable() {
                    st.frames -= 1;
                }
                let seq = self.next_seq;
                self.next_seq += 1;
                Ok(Some(WireMessage { body, seq }))
            }
            None if st.closed => Err(()),
            None => Ok(None),
        }
    }

    /// Next message, or `None` once the session has closed the stream and
    /// the queue is drained.
    pub async fn recv(&mut self) -> Option<WireMessage> {
        let queue = self.queue.clone();
        loop {
            let notified = queue.notify.notified();
            match self.pop() {
                Ok(Some(m)) => return Some(m),
                Err(()) => return None,
                Ok(None) => notified.await,
            }
        }
    }

    pub fn try_recv(&mut self) -> Option<WireMessage> {
        self.pop().ok().flatten()
    }

    pub fn dropped_frames(&self) -> u64 {
        self.queue.state.lock().expect("queue lock").dropped_frames
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.queue.state.lock().expect("queue lock").closed = true;
    }
}
