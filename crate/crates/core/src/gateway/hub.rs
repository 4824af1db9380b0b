//! Session registry and event fan-out.
//!
//! The hub owns the client-visible copy of the network list and connection
//! state. Updating that copy and fanning the resulting event out happen under
//! one lock, so a joining session's `hello` never lands in the middle of a
//! broadcast.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::SystemTime;

use tokio::sync::mpsc;
use tokio_util::sync::CancellationToken;
use tracing::{debug, warn};

use super::protocol::{EncodedEvent, ErrorCode, ServerEvent};
use crate::connection::{ConnectionState, EventSink, MachineEvent};
use crate::model::{NetworkDiff, NetworkSnapshot};
use crate::scan::SnapshotPublisher;

pub const DEFAULT_SESSION_BUFFER: usize = 256;

pub type SessionId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Text(String),
    Close,
}

/// Receiving half of a session: queued frames plus a kill switch that fires
/// when the hub gives up on the session.
pub struct SessionHandle {
    pub id: SessionId,
    pub outbound: mpsc::Receiver<Outbound>,
    pub killed: CancellationToken,
}

struct Slot {
    next_seq: u64,
    tx: mpsc::Sender<Outbound>,
    kill: CancellationToken,
    #[allow(dead_code)]
    connected_at: SystemTime,
}

impl Slot {
    fn push(&mut self, event: &EncodedEvent) -> bool {
        match self.tx.try_send(Outbound::Text(event.with_seq(self.next_seq))) {
            Ok(()) => {
                self.next_seq += 1;
                true
            }
            Err(_) => false,
        }
    }
}

struct Inner {
    snapshot: NetworkSnapshot,
    state: ConnectionState,
    sessions: BTreeMap<SessionId, Slot>,
    next_id: SessionId,
    closed: bool,
}

pub struct Hub {
    inner: Mutex<Inner>,
    buffer: usize,
}

impl Hub {
    /// `buffer` is the number of frames a session may lag behind before it
    /// is dropped.
    pub fn new(buffer: usize) -> Self {
        Hub {
            inner: Mutex::new(Inner {
                snapshot: NetworkSnapshot::default(),
                state: ConnectionState::disconnected(),
                sessions: BTreeMap::new(),
                next_id: 1,
                closed: false,
            }),
            buffer: buffer.max(1),
        }
    }

    /// Registers a session and queues its `hello` (seq 0). Returns `None`
    /// once the hub is shut down.
    pub fn open_session(&self) -> Option<SessionHandle> {
        let mut inner = self.inner.lock().unwrap();
        if inner.closed {
            return None;
        }
        let id = inner.next_id;
        inner.next_id += 1;
        let (tx, rx) = mpsc::channel(self.buffer);
        let kill = CancellationToken::new();
        let mut slot = Slot {
            next_seq: 0,
            tx,
            kill: kill.clone(),
            connected_at: SystemTime::now(),
        };
        let hello = ServerEvent::hello(inner.snapshot.networks.clone(), &inner.state).encode();
        if !slot.push(&hello) {
            return None;
        }
        inner.sessions.insert(id, slot);
        debug!(target: "gateway", session = id, "session opened");
        Some(SessionHandle {
            id,
            outbound: rx,
            killed: kill,
        })
    }

    pub fn close_session(&self, id: SessionId) {
        if self.inner.lock().unwrap().sessions.remove(&id).is_some() {
            debug!(target: "gateway", session = id, "session closed");
        }
    }

    pub fn session_count(&self) -> usize {
        self.inner.lock().unwrap().sessions.len()
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        self.inner.lock().unwrap().snapshot.clone()
    }

    pub fn state(&self) -> ConnectionState {
        self.inner.lock().unwrap().state.clone()
    }

    fn fan_out(inner: &mut Inner, event: &ServerEvent) {
        let encoded = event.encode();
        let mut dead = Vec::new();
        for (id, slot) in inner.sessions.iter_mut() {
            if !slot.push(&encoded) {
                dead.push(*id);
            }
        }
        for id in dead {
            if let Some(slot) = inner.sessions.remove(&id) {
                warn!(target: "gateway", session = id, "dropping session that stopped reading");
                slot.kill.cancel();
            }
        }
    }

    /// Sends `event` to every live session.
    pub fn broadcast(&self, event: &ServerEvent) {
        Self::fan_out(&mut self.inner.lock().unwrap(), event);
    }

    /// Sends `event` to one session. Returns false if it is gone.
    pub fn send_to(&self, id: SessionId, event: &ServerEvent) -> bool {
        let mut inner = self.inner.lock().unwrap();
        let Some(slot) = inner.sessions.get_mut(&id) else {
            return false;
        };
        if slot.push(&event.encode()) {
            return true;
        }
        if let Some(slot) = inner.sessions.remove(&id) {
            slot.kill.cancel();
        }
        false
    }

    pub fn publish_networks(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot) {
        let mut inner = self.inner.lock().unwrap();
        inner.snapshot = snapshot.clone();
        Self::fan_out(&mut inner, &ServerEvent::networks(diff));
    }

    pub fn publish_machine_event(&self, event: &MachineEvent) {
        let mut inner = self.inner.lock().unwrap();
        match event {
            MachineEvent::StateChanged { state, .. } => {
                inner.state = state.clone();
                Self::fan_out(&mut inner, &ServerEvent::state(state));
            }
            MachineEvent::AttemptFailed(failure) => {
                let event = ServerEvent::error(failure.reason.into(), failure.reason.message());
                Self::fan_out(&mut inner, &event);
            }
            MachineEvent::DisconnectFailed => {
                let event = ServerEvent::error(ErrorCode::BackendError, "Disconnect failed");
                Self::fan_out(&mut inner, &event);
            }
        }
    }

    /// Asks every session to close and refuses new ones.
    pub fn shutdown(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.closed = true;
        for (_, slot) in std::mem::take(&mut inner.sessions) {
            if slot.tx.try_send(Outbound::Close).is_err() {
                slot.kill.cancel();
            }
        }
    }
}

impl Default for Hub {
    fn default() -> Self {
        Hub::new(DEFAULT_SESSION_BUFFER)
    }
}

impl SnapshotPublisher for Hub {
    fn publish(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot) {
        self.publish_networks(diff, snapshot);
    }
}

impl EventSink for Hub {
    fn emit(&self, event: &MachineEvent) {
        self.publish_machine_event(event);
    }
}
