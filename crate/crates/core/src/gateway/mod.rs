//! Client-facing protocol endpoint.
//!
//! Sessions get a full `hello` on join, then sequence-numbered `networks`,
//! `state` and `error` events. Commands from any session go to the single
//! connection manager; rejections are answered only to the sender.

use std::sync::Arc;

use tokio::sync::Notify;
use tracing::{debug, info};

use crate::connection::{ConnectRequest, ConnectionManager, Rejection};
use crate::model::{validate_psk, validate_ssid, Ssid};

pub mod hub;
pub mod protocol;
pub mod server;

pub use hub::{Hub, Outbound, SessionHandle, SessionId};
pub use protocol::{ClientMessage, EncodedEvent, ErrorCode, ServerEvent, ServerMessage, PROTOCOL_VERSION};
pub use server::router;

pub struct Gateway {
    hub: Arc<Hub>,
    manager: ConnectionManager,
    scan_nudge: Arc<Notify>,
}

impl Gateway {
    pub fn new(hub: Arc<Hub>, manager: ConnectionManager, scan_nudge: Arc<Notify>) -> Self {
        Gateway {
            hub,
            manager,
            scan_nudge,
        }
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    /// Maps client text to SSID bytes. Names that are not valid UTF-8 reach
    /// clients in lossy form, so an unmatched name is also checked against the
    /// lossy form of the current list.
    fn resolve_ssid(&self, text: &str) -> Option<Ssid> {
        let snapshot = self.hub.snapshot();
        let exact = validate_ssid(text.as_bytes()).ok();
        if let Some(ssid) = exact.as_ref().filter(|s| snapshot.contains(s)) {
            return Some(ssid.clone());
        }
        snapshot
            .networks
            .into_iter()
            .map(|n| n.ssid)
            .find(|s| !s.is_utf8() && s.display() == text)
            .or(exact)
    }

    fn resolve_request(&self, ssid: &str, psk: Option<&str>) -> Result<ConnectRequest, Rejection> {
        let ssid = self.resolve_ssid(ssid).ok_or(Rejection::UnknownSsid)?;
        let psk = psk
            .map(validate_psk)
            .transpose()
            .map_err(|_| Rejection::PskInvalid)?;
        Ok(ConnectRequest::new(ssid, psk))
    }

    pub async fn on_client_message(&self, session: SessionId, raw: &str) {
        let msg = match ClientMessage::decode(raw) {
            Ok(msg) => msg,
            Err(e) => {
                debug!(target: "gateway", session, error = %e, "bad client message");
                self.hub.send_to(
                    session,
                    &ServerEvent::error(ErrorCode::BadRequest, "Malformed or unknown message"),
                );
                return;
            }
        };
        debug!(target: "gateway", session, ?msg, "client message");
        let result = match msg {
            ClientMessage::Connect { ssid, psk } => match self.resolve_request(&ssid, psk.as_deref()) {
                Ok(req) => {
                    info!(target: "gateway", session, ssid = %req.ssid, "connect requested");
                    self.manager.connect(req).await
                }
                Err(r) => Err(r),
            },
            ClientMessage::Disconnect {} => self.manager.disconnect().await,
            ClientMessage::Scan {} => {
                self.scan_nudge.notify_one();
                Ok(())
            }
        };
        if let Err(rejection) = result {
            self.hub.send_to(session, &ServerEvent::rejection(rejection));
        }
    }
}
