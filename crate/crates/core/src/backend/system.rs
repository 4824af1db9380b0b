//! Backend that drives the host's wireless tools through subprocesses.
//!
//! Each operation is a command template. Templates are split with shell
//! quoting rules (no shell is involved) and these placeholders are expanded
//! inside every argument:
//!
//! | placeholder   | value                                   |
//! |---------------|-----------------------------------------|
//! | `{interface}` | interface name                          |
//! | `{ssid}`      | SSID text (lossy UTF-8)                 |
//! | `{ssid_hex}`  | SSID bytes as lowercase hex             |
//!
//! The connect command receives the PSK on stdin (one line, empty for open
//! networks) so the secret never shows up in the process table. It reports
//! progress on stdout, one phase per line: `authenticating`, `connecting`,
//! `connected`, or `failed <reason>` where reason is one of `auth_failed`,
//! `timeout`, `not_found`, `backend_error`. Exiting without a terminal line
//! counts as `failed backend_error`.

use std::process::Stdio;

use async_trait::async_trait;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::process::Command;
use tokio::sync::mpsc;
use tracing::{debug, warn};

use super::iwlist::parse_scan_bytes;
use super::{
    BackendError, ConnectionPhase, FailureReason, PhaseGrammar, PhaseStream, WirelessBackend,
};
use crate::model::{AccessPoint, Psk, Ssid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemCommands {
    pub scan: String,
    pub connect: String,
    pub disconnect: String,
}

impl Default for SystemCommands {
    fn default() -> Self {
        SystemCommands {
            scan: "iwlist {interface} scan".into(),
            connect: "awci-wpa-connect {interface} {ssid_hex}".into(),
            disconnect: "wpa_cli -i {interface} disconnect".into(),
        }
    }
}

pub struct SystemBackend {
    commands: SystemCommands,
}

impl SystemBackend {
    pub fn new(commands: SystemCommands) -> Self {
        SystemBackend { commands }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn render(template: &str, interface: &str, ssid: Option<&Ssid>) -> Result<Vec<String>, BackendError> {
    let words = shell_words::split(template)
        .map_err(|e| BackendError::Unavailable(format!("bad command template {template:?}: {e}")))?;
    if words.is_empty() {
        return Err(BackendError::Unavailable("empty command template".into()));
    }
    let ssid_text = ssid.map(|s| s.display().into_owned()).unwrap_or_default();
    let ssid_hex = ssid.map(|s| hex(s.as_bytes())).unwrap_or_default();
    Ok(words
        .into_iter()
        .map(|w| {
            w.replace("{interface}", interface)
                .replace("{ssid_hex}", &ssid_hex)
                .replace("{ssid}", &ssid_text)
        })
        .collect())
}

fn command(argv: &[String]) -> Command {
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..]).kill_on_drop(true).stdin(Stdio::null());
    cmd
}

fn parse_phase_line(line: &str) -> Option<ConnectionPhase> {
    let mut words = line.split_whitespace();
    match words.next()? {
        "authenticating" => Some(ConnectionPhase::Authenticating),
        "connecting" => Some(ConnectionPhase::Connecting),
        "connected" => Some(ConnectionPhase::Connected),
        "failed" => Some(ConnectionPhase::Failed(
            words
                .next()
                .and_then(|r| r.parse().ok())
                .unwrap_or(FailureReason::BackendError),
        )),
        _ => None,
    }
}

async fn run_connect(
    argv: Vec<String>,
    psk: Option<Psk>,
    tx: mpsc::Sender<ConnectionPhase>,
) {
    let fail = |tx: mpsc::Sender<ConnectionPhase>| async move {
        let _ = tx.send(ConnectionPhase::Failed(FailureReason::BackendError)).await;
    };
    let mut cmd = command(&argv);
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => {
            warn!(target: "backend", program = %argv[0], error = %e, "connect command failed to start");
            return fail(tx).await;
        }
    };
    if let Some(mut stdin) = child.stdin.take() {
        let mut line = psk.as_ref().map(|p| p.expose().to_owned()).unwrap_or_default();
        line.push('\n');
        // The child may exit without reading; that is its call.
        let _ = stdin.write_all(line.as_bytes()).await;
    }
    let Some(stdout) = child.stdout.take() else {
        return fail(tx).await;
    };

    let mut grammar = PhaseGrammar::default();
    let mut lines = BufReader::new(stdout).lines();
    loop {
        let line = tokio::select! {
            line = lines.next_line() => line,
            _ = tx.closed() => return, // cancelled; kill_on_drop reaps the child
        };
        let Ok(Some(line)) = line else { break };
        let Some(phase) = parse_phase_line(&line) else {
            continue;
        };
        if !grammar.accept(phase) {
            debug!(target: "backend", ?phase, "ignoring out-of-order phase from connect command");
            continue;
        }
        if tx.send(phase).await.is_err() {
            return;
        }
        if phase.is_terminal() {
            let _ = child.wait().await;
            return;
        }
    }
    let status = child.wait().await;
    debug!(target: "backend", ?status, "connect command exited without a terminal phase");
    fail(tx).await
}

#[async_trait]
impl WirelessBackend for SystemBackend {
    async fn scan(&self, interface: &str) -> Result<Vec<AccessPoint>, BackendError> {
        let argv = render(&self.commands.scan, interface, None)?;
        let output = command(&argv)
            .output()
            .await
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", argv[0])))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            if stderr.contains("Network is down") || stderr.contains("No such device") {
                return Err(BackendError::InterfaceDown(interface.to_owned()));
            }
            return Err(BackendError::Unavailable(format!(
                "{} exited with {}: {}",
                argv[0],
                output.status,
                stderr.trim()
            )));
        }
        let parsed = parse_scan_bytes(&output.stdout);
        if parsed.malformed_cells > 0 {
            debug!(target: "backend", count = parsed.malformed_cells, "scan output had malformed cells");
        }
        Ok(parsed.access_points)
    }

    fn begin_connect(&self, interface: &str, ssid: &Ssid, psk: Option<&Psk>) -> PhaseStream {
        let (tx, rx) = mpsc::channel(4);
        match render(&self.commands.connect, interface, Some(ssid)) {
            Ok(argv) => {
                tokio::spawn(run_connect(argv, psk.cloned(), tx));
            }
            Err(e) => {
                warn!(target: "backend", error = %e, "cannot build connect command");
                let _ = tx.try_send(ConnectionPhase::Failed(FailureReason::BackendError));
            }
        }
        rx
    }

    async fn begin_disconnect(&self, interface: &str) -> Result<(), BackendError> {
        let argv = render(&self.commands.disconnect, interface, None)?;
        let status = command(&argv)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .await
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", argv[0])))?;
        if status.success() {
            Ok(())
        } else {
            Err(BackendError::Unavailable(format!("{} exited with {status}", argv[0])))
        }
    }

    fn scans_while_connecting(&self) -> bool {
        false
    }
}
