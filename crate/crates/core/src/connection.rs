//! Connection state machine and the task that owns it.
//!
//! [`ConnectionMachine`] is the pure transition logic. [`ConnectionManager`]
//! wraps it in a single-owner task: client requests and backend phases go
//! through one ordered mailbox, and backend calls run on side tasks so the
//! mailbox is never blocked.
//!
//! Legal transitions:
//!
//! ```text
//! disconnected   -> authenticating | connecting
//! authenticating -> connecting | disconnected
//! connecting     -> connected | disconnected
//! connected      -> disconnecting
//! disconnecting  -> disconnected
//! ```

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tokio_util::sync::CancellationToken;
use tracing::{debug, info, warn};

use crate::backend::{BackendError, ConnectionPhase, FailureReason, WirelessBackend};
use crate::model::{NetworkSnapshot, Psk, Ssid};

pub const DEFAULT_CONNECT_TIMEOUT_MS: u64 = 15_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Disconnected,
    Authenticating,
    Connecting,
    Connected,
    Disconnecting,
}

impl LinkState {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkState::Disconnected => "disconnected",
            LinkState::Authenticating => "authenticating",
            LinkState::Connecting => "connecting",
            LinkState::Connected => "connected",
            LinkState::Disconnecting => "disconnecting",
        }
    }
}

impl fmt::Display for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn is_legal_transition(from: LinkState, to: LinkState) -> bool {
    use LinkState::*;
    matches!(
        (from, to),
        (Disconnected, Authenticating)
            | (Disconnected, Connecting)
            | (Authenticating, Connecting)
            | (Authenticating, Disconnected)
            | (Connecting, Connected)
            | (Connecting, Disconnected)
            | (Connected, Disconnecting)
            | (Disconnecting, Disconnected)
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub reason: FailureReason,
    pub ssid: Ssid,
}

/// `ssid` is present exactly when not disconnected; `failure` only while
/// disconnected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionState {
    state: LinkState,
    ssid: Option<Ssid>,
    failure: Option<Failure>,
}

impl ConnectionState {
    pub fn disconnected() -> Self {
        ConnectionState {
            state: LinkState::Disconnected,
            ssid: None,
            failure: None,
        }
    }

    pub fn failed(failure: Failure) -> Self {
        ConnectionState {
            failure: Some(failure),
            ..Self::disconnected()
        }
    }

    /// Panics if `state` is `Disconnected`.
    pub fn active(state: LinkState, ssid: Ssid) -> Self {
        assert_ne!(state, LinkState::Disconnected, "active state needs an SSID");
        ConnectionState {
            state,
            ssid: Some(ssid),
            failure: None,
        }
    }

    pub fn state(&self) -> LinkState {
        self.state
    }

    pub fn ssid(&self) -> Option<&Ssid> {
        self.ssid.as_ref()
    }

    pub fn failure(&self) -> Option<&Failure> {
        self.failure.as_ref()
    }
}

impl Default for ConnectionState {
    fn default() -> Self {
        Self::disconnected()
    }
}

#[derive(Debug, Clone)]
pub struct ConnectRequest {
    pub ssid: Ssid,
    pub psk: Option<Psk>,
    pub request_id: Option<String>,
}

impl ConnectRequest {
    pub fn new(ssid: Ssid, psk: Option<Psk>) -> Self {
        ConnectRequest {
            ssid,
            psk,
            request_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("another connection request is in progress")]
    Busy,
    #[error("network is not in the current scan results")]
    UnknownSsid,
    #[error("network requires a password")]
    PskRequired,
    #[error("password format is invalid")]
    PskInvalid,
    #[error("not connected")]
    NotConnected,
}

impl Rejection {
    pub fn code(self) -> &'static str {
        match self {
            Rejection::Busy => "busy",
            Rejection::UnknownSsid => "unknown_ssid",
            Rejection::PskRequired => "psk_required",
            Rejection::PskInvalid => "psk_invalid",
            Rejection::NotConnected => "not_connected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttemptId(u64);

/// Backend work the owner must start after a step.
#[derive(Debug, Clone)]
pub enum Effect {
    StartConnect {
        attempt: AttemptId,
        ssid: Ssid,
        psk: Option<Psk>,
    },
    CancelConnect {
        attempt: AttemptId,
    },
    StartDisconnect {
        attempt: AttemptId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineEvent {
    StateChanged {
        from: LinkState,
        state: ConnectionState,
    },
    AttemptFailed(Failure),
    DisconnectFailed,
}

#[derive(Debug, Default)]
pub struct Step {
    pub events: Vec<MachineEvent>,
    pub effect: Option<Effect>,
}

#[derive(Debug, Default)]
pub struct ConnectionMachine {
    state: ConnectionState,
    attempt: Option<AttemptId>,
    next_attempt: u64,
}

impl ConnectionMachine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> &ConnectionState {
        &self.state
    }

    /// True while a connect or disconnect is running against the backend.
    pub fn attempt_in_flight(&self) -> bool {
        self.attempt.is_some()
    }

    pub fn current_attempt(&self) -> Option<AttemptId> {
        self.attempt
    }

    fn new_attempt(&mut self) -> AttemptId {
        self.next_attempt += 1;
        let id = AttemptId(self.next_attempt);
        self.attempt = Some(id);
        id
    }

    fn transition(&mut self, to: ConnectionState, events: &mut Vec<MachineEvent>) {
        let from = self.state.state;
        debug_assert!(is_legal_transition(from, to.state), "{from} -> {}", to.state);
        self.state = to.clone();
        events.push(MachineEvent::StateChanged { from, state: to });
    }

    pub fn request_connect(&mut self, req: ConnectRequest, snapshot: &NetworkSnapshot) -> Result<Step, Rejection> {
        if self.state.state != LinkState::Disconnected {
            return Err(Rejection::Busy);
        }
        let network = snapshot.get(&req.ssid).ok_or(Rejection::UnknownSsid)?;
        if network.secure && req.psk.is_none() {
            return Err(Rejection::PskRequired);
        }
        let first = if network.secure {
            LinkState::Authenticating
        } else {
            LinkState::Connecting
        };
        let attempt = self.new_attempt();
        let mut step = Step::default();
        self.transition(ConnectionState::active(first, req.ssid.clone()), &mut step.events);
        step.effect = Some(Effect::StartConnect {
            attempt,
            ssid: req.ssid,
            psk: if network.secure { req.psk } else { None },
        });
        Ok(step)
    }

    pub fn request_disconnect(&mut self) -> Result<Step, Rejection> {
        let mut step = Step::default();
        match self.state.state {
            LinkState::Disconnected => return Err(Rejection::NotConnected),
            LinkState::Disconnecting => return Err(Rejection::Busy),
            LinkState::Connected => {
                let ssid = self.state.ssid.clone().expect("connected state has an ssid");
                let attempt = self.new_attempt();
                self.transition(ConnectionState::active(LinkState::Disconnecting, ssid), &mut step.events);
                step.effect = Some(Effect::StartDisconnect { attempt });
            }
            LinkState::Authenticating | LinkState::Connecting => {
                let attempt = self.attempt.take().expect("attempt in flight");
                self.transition(ConnectionState::disconnected(), &mut step.events);
                step.effect = Some(Effect::CancelConnect { attempt });
            }
        }
        Ok(step)
    }

    /// Applies a backend phase. Phases from stale attempts, or ones that do
    /// not fit the current state, produce an empty step.
    pub fn on_phase(&mut self, attempt: AttemptId, phase: ConnectionPhase) -> Step {
        let mut step = Step::default();
        if self.attempt != Some(attempt) {
            debug!(target: "connection", ?phase, "dropping phase from a finished attempt");
            return step;
        }
        let current = self.state.state;
        let Some(ssid) = self.state.ssid.clone() else {
            return step;
        };
        match (current, phase) {
            (LinkState::Authenticating, ConnectionPhase::Authenticating)
            | (LinkState::Connecting, ConnectionPhase::Connecting) => {}
            (LinkState::Authenticating, ConnectionPhase::Connecting) => {
                self.transition(ConnectionState::active(LinkState::Connecting, ssid), &mut step.events);
            }
            (LinkState::Authenticating, ConnectionPhase::Connected) => {
                // Backend skipped the connecting report; pass through it.
                self.transition(ConnectionState::active(LinkState::Connecting, ssid.clone()), &mut step.events);
                self.attempt = None;
                self.transition(ConnectionState::active(LinkState::Connected, ssid), &mut step.events);
            }
            (LinkState::Connecting, ConnectionPhase::Connected) => {
                self.attempt = None;
                self.transition(ConnectionState::active(LinkState::Connected, ssid), &mut step.events);
            }
            (LinkState::Authenticating | LinkState::Connecting, ConnectionPhase::Failed(reason)) => {
                self.attempt = None;
                let failure = Failure { reason, ssid };
                self.transition(ConnectionState::failed(failure.clone()), &mut step.events);
                step.events.push(MachineEvent::AttemptFailed(failure));
            }
            _ => {
                warn!(target: "connection", state = %current, ?phase, "dropping out-of-order phase");
            }
        }
        step
    }

    pub fn on_disconnect_complete(&mut self, attempt: AttemptId, result: Result<(), BackendError>) -> Step {
        let mut step = Step::default();
        if self.attempt != Some(attempt) || self.state.state != LinkState::Disconnecting {
            return step;
        }
        self.attempt = None;
        self.transition(ConnectionState::disconnected(), &mut step.events);
        if let Err(e) = result {
            warn!(target: "connection", error = %e, "backend reported a disconnect failure");
            step.events.push(MachineEvent::DisconnectFailed);
        }
        step
    }
}

/// Consumer of state-machine events, called in emission order.
pub trait EventSink: Send + Sync {
    fn emit(&self, event: &MachineEvent);
}

impl EventSink for mpsc::UnboundedSender<MachineEvent> {
    fn emit(&self, event: &MachineEvent) {
        let _ = self.send(event.clone());
    }
}

enum Command {
    Connect(ConnectRequest, oneshot::Sender<Result<(), Rejection>>),
    Disconnect(oneshot::Sender<Result<(), Rejection>>),
    Phase(AttemptId, ConnectionPhase),
    DisconnectDone(AttemptId, Result<(), BackendError>),
}

#[derive(Debug, Clone)]
pub struct ManagerConfig {
    pub interface: String,
    pub connect_timeout: Duration,
}

impl ManagerConfig {
    pub fn new(interface: impl Into<String>) -> Self {
        ManagerConfig {
            interface: interface.into(),
            connect_timeout: Duration::from_millis(DEFAULT_CONNECT_TIMEOUT_MS),
        }
    }
}

/// Cloneable handle to the connection task.
#[derive(Clone)]
pub struct ConnectionManager {
    tx: mpsc::UnboundedSender<Command>,
    state: watch::Receiver<ConnectionState>,
    busy: watch::Receiver<bool>,
}

impl ConnectionManager {
    pub fn spawn(
        backend: Arc<dyn WirelessBackend>,
        config: ManagerConfig,
        snapshots: watch::Receiver<NetworkSnapshot>,
        sink: Arc<dyn EventSink>,
        shutdown: CancellationToken,
    ) -> (Self, JoinHandle<()>) {
        let (tx, rx) = mpsc::unbounded_channel();
        let (state_tx, state_rx) = watch::channel(ConnectionState::disconnected());
        let (busy_tx, busy_rx) = watch::channel(false);
        let actor = Actor {
            machine: ConnectionMachine::new(),
            backend,
            config,
            snapshots,
            sink,
            mailbox: tx.clone(),
            state_tx,
            busy_tx,
            driver: None,
        };
        let handle = tokio::spawn(actor.run(rx, shutdown));
        (
            ConnectionManager {
                tx,
                state: state_rx,
                busy: busy_rx,
            },
            handle,
        )
    }

    pub async fn connect(&self, req: ConnectRequest) -> Result<(), Rejection> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Connect(req, reply))
            .map_err(|_| Rejection::Busy)?;
        rx.await.unwrap_or(Err(Rejection::Busy))
    }

    pub async fn disconnect(&self) -> Result<(), Rejection> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Disconnect(reply))
            .map_err(|_| Rejection::Busy)?;
        rx.await.unwrap_or(Err(Rejection::Busy))
    }

    pub fn state(&self) -> ConnectionState {
        self.state.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<ConnectionState> {
        self.state.clone()
    }

    /// Reads true while a backend connect or disconnect is running.
    pub fn busy(&self) -> watch::Receiver<bool> {
        self.busy.clone()
    }
}

struct Actor {
    machine: ConnectionMachine,
    backend: Arc<dyn WirelessBackend>,
    config: ManagerConfig,
    snapshots: watch::Receiver<NetworkSnapshot>,
    sink: Arc<dyn EventSink>,
    mailbox: mpsc::UnboundedSender<Command>,
    state_tx: watch::Sender<ConnectionState>,
    busy_tx: watch::Sender<bool>,
    driver: Option<(AttemptId, JoinHandle<()>)>,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>, shutdown: CancellationToken) {
        loop {
            let cmd = tokio::select! {
                biased;
                _ = shutdown.cancelled() => break,
                cmd = rx.recv() => match cmd {
                    Some(cmd) => cmd,
                    None => break,
                },
            };
            self.handle(cmd);
        }
        if let Some((_, driver)) = self.driver.take() {
            driver.abort();
        }
        debug!(target: "connection", "connection manager stopped");
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Connect(req, reply) => {
                let ssid = req.ssid.clone();
                let result = {
                    let snapshot = self.snapshots.borrow();
                    self.machine.request_connect(req, &snapshot)
                };
                match result {
                    Ok(step) => {
                        info!(target: "connection", ssid = %ssid, "connect accepted");
                        let _ = reply.send(Ok(()));
                        self.apply(step);
                    }
                    Err(rejection) => {
                        info!(target: "connection", ssid = %ssid, reason = rejection.code(), "connect rejected");
                        let _ = reply.send(Err(rejection));
                    }
                }
            }
            Command::Disconnect(reply) => match self.machine.request_disconnect() {
                Ok(step) => {
                    info!(target: "connection", "disconnect accepted");
                    let _ = reply.send(Ok(()));
                    self.apply(step);
                }
                Err(rejection) => {
                    let _ = reply.send(Err(rejection));
                }
            },
            Command::Phase(attempt, phase) => {
                let step = self.machine.on_phase(attempt, phase);
                self.apply(step);
            }
            Command::DisconnectDone(attempt, result) => {
                let step = self.machine.on_disconnect_complete(attempt, result);
                self.apply(step);
            }
        }
    }

    fn apply(&mut self, step: Step) {
        for event in &step.events {
            match event {
                MachineEvent::StateChanged { from, state } => {
                    info!(
                        target: "connection",
                        from = %from,
                        to = %state.state(),
                        ssid = state.ssid().map(|s| s.display().into_owned()).unwrap_or_default(),
                        "state changed"
                    );
                }
                MachineEvent::AttemptFailed(f) => {
                    info!(target: "connection", ssid = %f.ssid, reason = f.reason.as_str(), "connect failed");
                }
                MachineEvent::DisconnectFailed => {}
            }
            self.sink.emit(event);
        }
        if let Some(effect) = step.effect {
            self.start(effect);
        }
        if self.driver.as_ref().is_some_and(|(id, _)| Some(*id) != self.machine.current_attempt()) {
            self.driver = None;
        }
        self.state_tx.send_replace(self.machine.state().clone());
        self.busy_tx.send_replace(self.machine.attempt_in_flight());
    }

    fn start(&mut self, effect: Effect) {
        match effect {
            Effect::StartConnect { attempt, ssid, psk } => {
                let stream = self.backend.begin_connect(&self.config.interface, &ssid, psk.as_ref());
                let mailbox = self.mailbox.clone();
                let deadline = Instant::now() + self.config.connect_timeout;
                let driver = tokio::spawn(drive_connect(attempt, stream, deadline, mailbox));
                self.driver = Some((attempt, driver));
            }
            Effect::CancelConnect { attempt } => {
                if let Some((id, driver)) = self.driver.take() {
                    if id == attempt {
                        driver.abort();
                    }
                }
                // Leave the supplicant idle after an aborted association.
                let backend = Arc::clone(&self.backend);
                let interface = self.config.interface.clone();
                tokio::spawn(async move {
                    if let Err(e) = backend.begin_disconnect(&interface).await {
                        warn!(target: "connection", error = %e, "cleanup after cancel failed");
                    }
                });
            }
            Effect::StartDisconnect { attempt } => {
                let backend = Arc::clone(&self.backend);
                let interface = self.config.interface.clone();
                let mailbox = self.mailbox.clone();
                tokio::spawn(async move {
                    let result = backend.begin_disconnect(&interface).await;
                    let _ = mailbox.send(Command::DisconnectDone(attempt, result));
                });
            }
        }
    }
}

async fn drive_connect(
    attempt: AttemptId,
    mut stream: crate::backend::PhaseStream,
    deadline: Instant,
    mailbox: mpsc::UnboundedSender<Command>,
) {
    loop {
        let phase = match tokio::time::timeout_at(deadline, stream.recv()).await {
            Ok(Some(phase)) => phase,
            Ok(None) => ConnectionPhase::Failed(FailureReason::BackendError),
            Err(_) => ConnectionPhase::Failed(FailureReason::Timeout),
        };
        let terminal = phase.is_terminal();
        if mailbox.send(Command::Phase(attempt, phase)).is_err() || terminal {
            return;
        }
    }
}
