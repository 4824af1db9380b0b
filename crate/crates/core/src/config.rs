//! Daemon configuration: command-line flags, then `AWCI_*` environment
//! variables, then built-in defaults.

use std::collections::HashMap;
use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use crate::backend::{BackendKind, SystemCommands};
use crate::connection::DEFAULT_CONNECT_TIMEOUT_MS;
use crate::scan::{ScanConfig, DEFAULT_REMOVAL_GRACE, DEFAULT_SCAN_INTERVAL_MS};

pub const DEFAULT_INTERFACE: &str = "wlan0";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8472";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaemonConfig {
    pub backend: BackendKind,
    pub interface: String,
    pub listen: SocketAddr,
    pub scan: ScanConfig,
    pub connect_timeout: Duration,
    pub env_file: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub commands: SystemCommands,
    pub log_filter: Option<String>,
}

impl DaemonConfig {
    /// Simulator config with defaults for everything else.
    pub fn simulated(env_file: impl Into<PathBuf>) -> Self {
        DaemonConfig {
            backend: BackendKind::Sim,
            env_file: Some(env_file.into()),
            ..Self::default()
        }
    }
}

impl Default for DaemonConfig {
    fn default() -> Self {
        DaemonConfig {
            backend: BackendKind::System,
            interface: DEFAULT_INTERFACE.into(),
            listen: DEFAULT_LISTEN.parse().unwrap(),
            scan: ScanConfig::default(),
            connect_timeout: Duration::from_millis(DEFAULT_CONNECT_TIMEOUT_MS),
            env_file: None,
            ui_dir: None,
            commands: SystemCommands::default(),
            log_filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutcome {
    Run(Box<DaemonConfig>),
    /// `--help` or `--version` was given; print and exit successfully.
    Exit(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "awci",
    version,
    about = "Wireless network control daemon with a live WebSocket event protocol",
    after_help = "Every flag can also be set through an AWCI_* environment variable \
(for example AWCI_LISTEN). Flags take precedence. AWCI_LOG sets the log filter."
)]
struct Flags {
    /// Wireless backend: sim or system
    #[arg(long, value_name = "KIND")]
    backend: Option<String>,
    /// Wireless interface name [default: wlan0]
    #[arg(long, value_name = "NAME")]
    interface: Option<String>,
    /// Address to serve HTTP and WebSocket on [default: 127.0.0.1:8472]
    #[arg(long, value_name = "HOST:PORT")]
    listen: Option<String>,
    /// Milliseconds between scan starts, at least 250 [default: 3000]
    #[arg(long, value_name = "MS")]
    scan_interval_ms: Option<String>,
    /// Consecutive missed scans before a network is removed [default: 2]
    #[arg(long = "removal-grace", value_name = "SCANS")]
    removal_grace: Option<String>,
    /// Give up on a connect attempt after this long [default: 15000]
    #[arg(long, value_name = "MS")]
    connect_timeout_ms: Option<String>,
    /// Simulator environment file (required with --backend sim)
    #[arg(long, value_name = "PATH")]
    env_file: Option<PathBuf>,
    /// Directory with the browser UI bundle, served at /
    #[arg(long, value_name = "PATH")]
    ui_dir: Option<PathBuf>,
    /// Scan command template for the system backend
    #[arg(long, value_name = "TEMPLATE")]
    scan_command: Option<String>,
    /// Connect command template for the system backend
    #[arg(long, value_name = "TEMPLATE")]
    connect_command: Option<String>,
    /// Disconnect command template for the system backend
    #[arg(long, value_name = "TEMPLATE")]
    disconnect_command: Option<String>,
}

/// Picks the flag value, else the environment value, tagging where it came
/// from for error messages.
fn layered(flag: Option<String>, flag_name: &str, env: &HashMap<String, String>, var: &str) -> Option<(String, String)> {
    flag.map(|v| (v, format!("--{flag_name}")))
        .or_else(|| env.get(var).map(|v| (v.clone(), var.to_owned())))
}

fn parse_value<T: FromStr>(found: Option<(String, String)>) -> Result<Option<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    found
        .map(|(value, source)| {
            value
                .parse::<T>()
                .map_err(|e| UsageError(format!("invalid value {value:?} for {source}: {e}")))
        })
        .transpose()
}

pub fn parse_config<I, T>(args: I, env: &HashMap<String, String>) -> Result<ParseOutcome, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(flags) => flags,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(ParseOutcome::Exit(e.render().to_string()));
        }
        Err(e) => return Err(UsageError(e.render().to_string())),
    };
    let defaults = DaemonConfig::default();

    let backend = parse_value::<BackendKind>(layered(flags.backend, "backend", env, "AWCI_BACKEND"))?
        .unwrap_or(defaults.backend);
    let interface = layered(flags.interface, "interface", env, "AWCI_INTERFACE")
        .map(|(v, _)| v)
        .unwrap_or(defaults.interface);
    if interface.is_empty() {
        return Err(UsageError("interface name must not be empty".into()));
    }
    let listen = parse_value::<SocketAddr>(layered(flags.listen, "listen", env, "AWCI_LISTEN"))?
        .unwrap_or(defaults.listen);
    let interval_ms = parse_value::<u64>(layered(flags.scan_interval_ms, "scan-interval-ms", env, "AWCI_SCAN_INTERVAL_MS"))?
        .unwrap_or(DEFAULT_SCAN_INTERVAL_MS);
    let grace = parse_value::<u32>(layered(flags.removal_grace, "removal-grace", env, "AWCI_REMOVAL_GRACE"))?
        .unwrap_or(DEFAULT_REMOVAL_GRACE);
    let scan = ScanConfig::new(interval_ms, grace).map_err(|e| UsageError(e.to_string()))?;
    let timeout_ms = parse_value::<u64>(layered(flags.connect_timeout_ms, "connect-timeout-ms", env, "AWCI_CONNECT_TIMEOUT_MS"))?
        .unwrap_or(DEFAULT_CONNECT_TIMEOUT_MS);
    if timeout_ms == 0 {
        return Err(UsageError("connect timeout must be positive".into()));
    }
    let env_file = flags
        .env_file
        .or_else(|| env.get("AWCI_ENV_FILE").map(PathBuf::from));
    if backend == BackendKind::Sim && env_file.is_none() {
        return Err(UsageError(
            "the sim backend needs an environment file (--env-file or AWCI_ENV_FILE)".into(),
        ));
    }
    let ui_dir = flags.ui_dir.or_else(|| env.get("AWCI_UI_DIR").map(PathBuf::from));

    let pick = |flag: Option<String>, var: &str, default: String| {
        flag.or_else(|| env.get(var).cloned()).unwrap_or(default)
    };
    let commands = SystemCommands {
        scan: pick(flags.scan_command, "AWCI_SCAN_COMMAND", defaults.commands.scan),
        connect: pick(flags.connect_command, "AWCI_CONNECT_COMMAND", defaults.commands.connect),
        disconnect: pick(flags.disconnect_command, "AWCI_DISCONNECT_COMMAND", defaults.commands.disconnect),
    };

    Ok(ParseOutcome::Run(Box::new(DaemonConfig {
        backend,
        interface,
        listen,
        scan,
        connect_timeout: Duration::from_millis(timeout_ms),
        env_file,
        ui_dir,
        commands,
        log_filter: env.get("AWCI_LOG").cloned(),
    })))
}
