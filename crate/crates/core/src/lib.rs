//! Wireless network control daemon.
//!
//! The daemon scans for access points, keeps a ranked list of networks, and
//! streams list diffs and connection-state changes to WebSocket clients. Connect
//! and disconnect requests run against a pluggable backend: a deterministic
//! simulator or the host's iwlist/supplicant tools.

pub mod backend;
pub mod config;
pub mod connection;
pub mod daemon;
pub mod gateway;
pub mod logging;
pub mod model;
pub mod scan;

pub use model::{
    apply_diff, dedupe_and_rank, diff_snapshots, signal_percent, validate_psk, validate_ssid,
    AccessPoint, Bssid, NetworkDiff, NetworkSnapshot, NetworkView, Psk, Security, Ssid,
};

pub use config::DaemonConfig;
pub use connection::{ConnectionState, LinkState};
pub use daemon::Daemon;
