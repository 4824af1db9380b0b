//! HTTP surface: `GET /ws` upgrades to the event protocol, everything else is
//! served from the UI directory.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tower_http::services::ServeDir;
use tracing::debug;

use super::hub::Outbound;
use super::{ErrorCode, Gateway, ServerEvent};

const CLOSE_GOING_AWAY: u16 = 1001;

const PLACEHOLDER_PAGE: &str = "<!doctype html><title>awci</title><p>No UI bundle is installed. \
The event protocol is served at <code>/ws</code>.</p>";

pub fn router(gateway: Arc<Gateway>, ui_dir: Option<PathBuf>) -> Router {
    let router = Router::new().route("/ws", get(ws_upgrade)).with_state(gateway);
    match ui_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.fallback(|| async { Html(PLACEHOLDER_PAGE) }),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(gateway): State<Arc<Gateway>>) -> Response {
    ws.on_upgrade(move |socket| serve_session(gateway, socket))
        .into_response()
}

async fn serve_session(gateway: Arc<Gateway>, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let Some(handle) = gateway.hub().open_session() else {
        let _ = sink
            .send(Message::Close(Some(CloseFrame {
                code: CLOSE_GOING_AWAY,
                reason: "shutting down".into(),
            })))
            .await;
        return;
    };
    let id = handle.id;
    let killed = handle.killed.clone();
    let mut outbound = handle.outbound;

    let writer_kill = killed.clone();
    let writer = tokio::spawn(async move {
        loop {
            let next = tokio::select! {
                _ = writer_kill.cancelled() => break,
                next = outbound.recv() => next,
            };
            let frame = match next {
                Some(Outbound::Text(text)) => Message::Text(text.into()),
                Some(Outbound::Close) => Message::Close(Some(CloseFrame {
                    code: CLOSE_GOING_AWAY,
                    reason: "server shutting down".into(),
                })),
                None => break,
            };
            let closing = matches!(frame, Message::Close(_));
            let sent = tokio::select! {
                _ = writer_kill.cancelled() => break,
                sent = sink.send(frame) => sent,
            };
            if sent.is_err() || closing {
                break;
            }
        }
        let _ = sink.close().await;
    });

    loop {
        let msg = tokio::select! {
            _ = killed.cancelled() => break,
            msg = stream.next() => msg,
        };
        match msg {
            Some(Ok(Message::Text(text))) => gateway.on_client_message(id, text.as_str()).await,
            Some(Ok(Message::Binary(_))) => {
                gateway.hub().send_to(id, &ServerEvent::error(ErrorCode::BadRequest, "Binary frames are not supported"));
            }
            Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
            Some(Ok(_)) => {}
        }
    }
    debug!(target: "gateway", session = id, "session reader finished");
    gateway.hub().close_session(id);
    killed.cancel();
    let _ = writer.await;
}
