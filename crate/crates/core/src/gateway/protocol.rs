//! JSON wire format.
//!
//! Server messages carry a per-session `seq`; client messages carry none.
//! Field names are part of the public protocol.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::FailureReason;
use crate::connection::{ConnectionState, LinkState, Rejection};
use crate::model::{NetworkDiff, NetworkView, Ssid};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    AuthFailed,
    NotConnected,
    Busy,
    UnknownSsid,
    PskRequired,
    PskInvalid,
    BadRequest,
    Timeout,
    NotFound,
    BackendError,
}

impl From<Rejection> for ErrorCode {
    fn from(r: Rejection) -> Self {
        match r {
            Rejection::Busy => ErrorCode::Busy,
            Rejection::UnknownSsid => ErrorCode::UnknownSsid,
            Rejection::PskRequired => ErrorCode::PskRequired,
            Rejection::PskInvalid => ErrorCode::PskInvalid,
            Rejection::NotConnected => ErrorCode::NotConnected,
        }
    }
}

impl From<FailureReason> for ErrorCode {
    fn from(r: FailureReason) -> Self {
        match r {
            FailureReason::AuthFailed => ErrorCode::AuthFailed,
            FailureReason::Timeout => ErrorCode::Timeout,
            FailureReason::NotFound => ErrorCode::NotFound,
            FailureReason::BackendError => ErrorCode::BackendError,
        }
    }
}

/// Retained failure shown to clients that join after an attempt failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureBody {
    pub reason: FailureReason,
    pub ssid: Ssid,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateBody {
    pub state: LinkState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssid: Option<Ssid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureBody>,
}

impl From<&ConnectionState> for StateBody {
    fn from(s: &ConnectionState) -> Self {
        StateBody {
            state: s.state(),
            ssid: s.ssid().cloned(),
            failure: s.failure().map(|f| FailureBody {
                reason: f.reason,
                ssid: f.ssid.clone(),
                message: f.reason.message().to_owned(),
            }),
        }
    }
}

/// A server-to-client event before a sequence number is attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Hello {
        version: String,
        networks: Vec<NetworkView>,
        state: StateBody,
    },
    Networks {
        added: Vec<NetworkView>,
        removed: Vec<Ssid>,
        changed: Vec<NetworkView>,
    },
    State {
        state: LinkState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ssid: Option<Ssid>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerEvent {
    pub fn hello(networks: Vec<NetworkView>, state: &ConnectionState) -> Self {
        ServerEvent::Hello {
            version: PROTOCOL_VERSION.to_owned(),
            networks,
            state: state.into(),
        }
    }

    pub fn networks(diff: &NetworkDiff) -> Self {
        ServerEvent::Networks {
            added: diff.added.clone(),
            removed: diff.removed.clone(),
            changed: diff.changed.clone(),
        }
    }

    pub fn state(state: &ConnectionState) -> Self {
        ServerEvent::State {
            state: state.state(),
            ssid: state.ssid().cloned(),
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerEvent::Error {
            code,
            message: message.into(),
        }
    }

    pub fn rejection(r: Rejection) -> Self {
        Self::error(r.into(), capitalize(&r.to_string()))
    }

    pub fn type_tag(&self) -> &'static str {
        match self {
            ServerEvent::Hello { .. } => "hello",
            ServerEvent::Networks { .. } => "networks",
            ServerEvent::State { .. } => "state",
            ServerEvent::Error { .. } => "error",
        }
    }

    pub fn encode(&self) -> EncodedEvent {
        EncodedEvent::new(self)
    }
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// An event serialized once, ready to be stamped with any session's `seq`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedEvent {
    tag: &'static str,
    /// Serialized fields after the tag: either `}` or `,"field":...}`.
    rest: String,
}

impl EncodedEvent {
    fn new(event: &ServerEvent) -> Self {
        let json = serde_json::to_string(event).expect("server events always serialize");
        let tag = event.type_tag();
        let prefix = format!("{{\"type\":\"{tag}\"");
        let rest = json
            .strip_prefix(&prefix)
            .expect("internally tagged enums serialize the tag first")
            .to_owned();
        EncodedEvent { tag, rest }
    }

    pub fn with_seq(&self, seq: u64) -> String {
        let mut out = String::with_capacity(self.rest.len() + 40);
        out.push_str("{\"type\":\"");
        out.push_str(self.tag);
        out.push_str("\",\"seq\":");
        out.push_str(&seq.to_string());
        out.push_str(&self.rest);
        out
    }
}

/// A decoded server message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub event: ServerEvent,
}

impl ServerMessage {
    pub fn decode(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Connect {
        ssid: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psk: Option<String>,
    },
    Disconnect {},
    Scan {},
}

impl ClientMessage {
    pub fn decode(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialize")
    }
}

impl fmt::Debug for ClientMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientMessage::Connect { ssid, psk } => f
                .debug_struct("Connect")
                .field("ssid", ssid)
                .field("psk", &psk.as_ref().map(|_| "<redacted>"))
                .finish(),
            ClientMessage::Disconnect {} => f.write_str("Disconnect"),
            ClientMessage::Scan {} => f.write_str("Scan"),
        }
    }
}
