//! Wireless layer abstraction.
//!
//! Two implementations exist: [`sim::SimBackend`], a deterministic simulator
//! driven by virtual time, and [`system::SystemBackend`], which shells out to
//! an iwlist-compatible scanner and supplicant control commands.

use std::fmt;
use std::str::FromStr;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;

use crate::model::{AccessPoint, Psk, Ssid};

pub mod iwlist;
pub mod sim;
pub mod system;

pub use iwlist::{parse_scan_bytes, parse_scan_output, ScanParse};
pub use sim::{load_environment, SimAccessPoint, SimBackend, SimEnvironment, SignalDrift};
pub use system::{SystemBackend, SystemCommands};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[serde(alias = "simulated")]
    Sim,
    System,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" | "simulated" => Ok(BackendKind::Sim),
            "system" => Ok(BackendKind::System),
            other => Err(format!("unknown backend {other:?} (expected sim or system)")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Sim => "sim",
            BackendKind::System => "system",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    AuthFailed,
    Timeout,
    NotFound,
    BackendError,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::AuthFailed => "auth_failed",
            FailureReason::Timeout => "timeout",
            FailureReason::NotFound => "not_found",
            FailureReason::BackendError => "backend_error",
        }
    }

    /// User-facing text shown by clients.
    pub fn message(self) -> &'static str {
        match self {
            FailureReason::AuthFailed => "Password Incorrect",
            FailureReason::Timeout => "Connection timed out",
            FailureReason::NotFound => "Network not found",
            FailureReason::BackendError => "Connection failed",
        }
    }
}

impl FromStr for FailureReason {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auth_failed" => Ok(FailureReason::AuthFailed),
            "timeout" => Ok(FailureReason::Timeout),
            "not_found" => Ok(FailureReason::NotFound),
            "backend_error" => Ok(FailureReason::BackendError),
            _ => Err(()),
        }
    }
}

/// One step of an association attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionPhase {
    Authenticating,
    Connecting,
    Connected,
    Failed(FailureReason),
}

impl ConnectionPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, ConnectionPhase::Connected | ConnectionPhase::Failed(_))
    }

    fn rank(self) -> u8 {
        match self {
            ConnectionPhase::Authenticating => 0,
            ConnectionPhase::Connecting => 1,
            ConnectionPhase::Connected | ConnectionPhase::Failed(_) => 2,
        }
    }
}

/// Enforces `authenticating? connecting? (connected | failed)` on a phase
/// sequence: phases that would go backwards, repeat, or follow a terminal
/// phase are rejected.
#[derive(Debug, Default, Clone)]
pub struct PhaseGrammar {
    last: Option<ConnectionPhase>,
}

impl PhaseGrammar {
    pub fn accept(&mut self, phase: ConnectionPhase) -> bool {
        let ok = match self.last {
            None => true,
            Some(prev) => !prev.is_terminal() && phase.rank() > prev.rank(),
        };
        if ok {
            self.last = Some(phase);
        }
        ok
    }

    pub fn finished(&self) -> bool {
        self.last.is_some_and(ConnectionPhase::is_terminal)
    }
}

/// Phases of one connect attempt, in emission order. Dropping the receiver
/// cancels the attempt.
pub type PhaseStream = mpsc::Receiver<ConnectionPhase>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("interface {0} is down")]
    InterfaceDown(String),
    #[error("wireless backend unavailable: {0}")]
    Unavailable(String),
}

#[async_trait]
pub trait WirelessBackend: Send + Sync + 'static {
    /// Lists currently visible broadcast-SSID access points.
    async fn scan(&self, interface: &str) -> Result<Vec<AccessPoint>, BackendError>;

    /// Starts associating with `ssid`. Must be called inside a tokio runtime.
    fn begin_connect(&self, interface: &str, ssid: &Ssid, psk: Option<&Psk>) -> PhaseStream;

    /// Releases the current association. Idempotent.
    async fn begin_disconnect(&self, interface: &str) -> Result<(), BackendError>;

    /// Whether scanning may continue while an association attempt is running.
    fn scans_while_connecting(&self) -> bool {
        true
    }
}
