//! Periodic scanning with flap damping.
//!
//! Each tick turns a raw scan into a ranked snapshot. Networks that drop out of
//! a scan are kept at their last-seen values until they have been missing for
//! `removal_grace_scans` consecutive ticks. New networks and signal changes are
//! published immediately.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::{mpsc, watch, Notify};
use tokio::time::{interval, Instant, MissedTickBehavior};
use tokio_util::sync::CancellationToken;
use tracing::{debug, warn};

use crate::backend::WirelessBackend;
use crate::model::{dedupe_and_rank, diff_snapshots, AccessPoint, NetworkDiff, NetworkSnapshot, Ssid};

pub const DEFAULT_SCAN_INTERVAL_MS: u64 = 3000;
pub const MIN_SCAN_INTERVAL_MS: u64 = 250;
pub const DEFAULT_REMOVAL_GRACE: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanConfigError {
    #[error("scan interval {0} ms is below the 250 ms minimum")]
    IntervalTooShort(u64),
    #[error("removal grace must be at least one scan")]
    ZeroGrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanConfig {
    interval_ms: u64,
    removal_grace_scans: u32,
}

impl ScanConfig {
    pub fn new(interval_ms: u64, removal_grace_scans: u32) -> Result<Self, ScanConfigError> {
        if interval_ms < MIN_SCAN_INTERVAL_MS {
            return Err(ScanConfigError::IntervalTooShort(interval_ms));
        }
        if removal_grace_scans == 0 {
            return Err(ScanConfigError::ZeroGrace);
        }
        Ok(ScanConfig {
            interval_ms,
            removal_grace_scans,
        })
    }

    pub fn interval(&self) -> Duration {
        Duration::from_millis(self.interval_ms)
    }

    pub fn interval_ms(&self) -> u64 {
        self.interval_ms
    }

    pub fn removal_grace_scans(&self) -> u32 {
        self.removal_grace_scans
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            interval_ms: DEFAULT_SCAN_INTERVAL_MS,
            removal_grace_scans: DEFAULT_REMOVAL_GRACE,
        }
    }
}

/// Published snapshot plus per-network miss counters.
///
/// Every SSID in `miss_counts` is in `current`, with a count below the grace.
#[derive(Debug, Clone, Default)]
pub struct ScanState {
    current: NetworkSnapshot,
    miss_counts: HashMap<Ssid, u32>,
}

impl ScanState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> &NetworkSnapshot {
        &self.current
    }

    pub fn miss_count(&self, ssid: &Ssid) -> u32 {
        self.miss_counts.get(ssid).copied().unwrap_or(0)
    }

    /// Folds one scan result in. Returns the diff against the previously
    /// published snapshot, or `None` when nothing visible changed.
    pub fn tick(&mut self, raw: &[AccessPoint], config: &ScanConfig, now_ms: u64) -> Option<NetworkDiff> {
        let candidate = dedupe_and_rank(raw, now_ms);
        let mut networks = candidate.networks;
        let mut misses = HashMap::new();

        for old in &self.current.networks {
            if networks.iter().any(|n| n.ssid == old.ssid) {
                continue;
            }
            let missed = self.miss_count(&old.ssid) + 1;
            if missed < config.removal_grace_scans {
                misses.insert(old.ssid.clone(), missed);
                networks.push(old.clone());
            }
        }

        let next = NetworkSnapshot::ranked(networks, now_ms);
        let diff = diff_snapshots(&self.current, &next);
        self.current = next;
        self.miss_counts = misses;
        (!diff.is_empty()).then_some(diff)
    }
}

/// Receives every non-empty diff together with the snapshot it produced.
pub trait SnapshotPublisher: Send + Sync {
    fn publish(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot);
}

impl SnapshotPublisher for mpsc::UnboundedSender<(NetworkDiff, NetworkSnapshot)> {
    fn publish(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot) {
        let _ = self.send((diff.clone(), snapshot.clone()));
    }
}

impl<P: SnapshotPublisher + ?Sized> SnapshotPublisher for Arc<P> {
    fn publish(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot) {
        (**self).publish(diff, snapshot)
    }
}

/// The scan loop for one interface.
pub struct ScanLoop {
    backend: Arc<dyn WirelessBackend>,
    interface: String,
    config: ScanConfig,
    nudge: Arc<Notify>,
    paused: Option<watch::Receiver<bool>>,
}

impl ScanLoop {
    pub fn new(backend: Arc<dyn WirelessBackend>, interface: impl Into<String>, config: ScanConfig) -> Self {
        ScanLoop {
            backend,
            interface: interface.into(),
            config,
            nudge: Arc::new(Notify::new()),
            paused: None,
        }
    }

    /// Handle that pulls the next scan forward. Nudges never start a second
    /// concurrent scan.
    pub fn nudge_handle(&self) -> Arc<Notify> {
        Arc::clone(&self.nudge)
    }

    /// Skips ticks while the flag reads true.
    pub fn pause_when(mut self, paused: watch::Receiver<bool>) -> Self {
        self.paused = Some(paused);
        self
    }

    /// Scans every interval (start to start) until `shutdown` fires. Scan
    /// failures keep the last published snapshot.
    pub async fn run<P: SnapshotPublisher>(self, publisher: P, shutdown: CancellationToken) {
        let mut ticker = interval(self.config.interval());
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let epoch = Instant::now();
        let mut state = ScanState::new();

        loop {
            tokio::select! {
                biased;
                _ = shutdown.cancelled() => break,
                _ = ticker.tick() => {}
                _ = self.nudge.notified() => {
                    debug!(target: "scan", "scan requested early");
                    ticker.reset();
                }
            }
            if self.paused.as_ref().is_some_and(|p| *p.borrow()) {
                debug!(target: "scan", "skipping scan while an association is in progress");
                continue;
            }
            let result = tokio::select! {
                biased;
                _ = shutdown.cancelled() => break,
                r = self.backend.scan(&self.interface) => r,
            };
            match result {
                Ok(raw) => {
                    let now_ms = epoch.elapsed().as_millis() as u64;
                    if let Some(diff) = state.tick(&raw, &self.config, now_ms) {
                        debug!(
                            target: "scan",
                            added = diff.added.len(),
                            removed = diff.removed.len(),
                            changed = diff.changed.len(),
                            "network list changed"
                        );
                        publisher.publish(&diff, state.current());
                    }
                }
                Err(e) => warn!(target: "scan", error = %e, "scan failed, keeping previous results"),
            }
        }
        debug!(target: "scan", "scan loop stopped");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bssid, Security};

    fn ap(name: &str, dbm: i32) -> AccessPoint {
        AccessPoint::new(name.parse().unwrap(), Bssid([2, 0, 0, 0, 0, name.len() as u8]), dbm, Security::Open, 1).unwrap()
    }

    fn names(snap: &NetworkSnapshot) -> Vec<String> {
        snap.networks.iter().map(|n| n.ssid.to_string()).collect()
    }

    #[test]
    fn config_bounds() {
        assert_eq!(ScanConfig::new(249, 2), Err(ScanConfigError::IntervalTooShort(249)));
        assert_eq!(ScanConfig::new(250, 0), Err(ScanConfigError::ZeroGrace));
        assert!(ScanConfig::new(250, 1).is_ok());
        let d = ScanConfig::default();
        assert_eq!((d.interval_ms(), d.removal_grace_scans()), (3000, 2));
    }

    #[test]
    fn steady_state_has_no_diff() {
        let cfg = ScanConfig::default();
        let mut state = ScanState::new();
        let raw = [ap("A", -50), ap("BB", -60)];
        assert!(state.tick(&raw, &cfg, 0).is_some());
        assert!(state.tick(&raw, &cfg, 1).is_none());
    }

    #[test]
    fn removal_after_grace_ticks() {
        // Hand-stepped script with grace 2:
        //   tick 0: {A, BB} -> added both
        //   tick 1: {A}     -> BB missed once, retained, no diff
        //   tick 2: {A}     -> BB missed twice, removed
        let cfg = ScanConfig::new(1000, 2).unwrap();
        let mut state = ScanState::new();
        state.tick(&[ap("A", -50), ap("BB", -60)], &cfg, 0);

        assert_eq!(state.tick(&[ap("A", -50)], &cfg, 1), None);
        assert_eq!(names(state.current()), ["A", "BB"]);
        assert_eq!(state.miss_count(&"BB".parse().unwrap()), 1);

        let diff = state.tick(&[ap("A", -50)], &cfg, 2).unwrap();
        assert_eq!(diff.removed, vec!["BB".parse::<Ssid>().unwrap()]);
        assert_eq!(names(state.current()), ["A"]);
        assert_eq!(state.miss_count(&"BB".parse().unwrap()), 0);
    }

    #[test]
    fn reappearance_resets_miss_count() {
        let cfg = ScanConfig::new(1000, 2).unwrap();
        let mut state = ScanState::new();
        state.tick(&[ap("A", -50)], &cfg, 0);
        state.tick(&[], &cfg, 1);
        state.tick(&[ap("A", -50)], &cfg, 2);
        assert_eq!(state.miss_count(&"A".parse().unwrap()), 0);
        assert_eq!(state.tick(&[], &cfg, 3), None);
        assert!(state.tick(&[], &cfg, 4).is_some());
    }

    #[test]
    fn additions_are_immediate() {
        let cfg = ScanConfig::default();
        let mut state = ScanState::new();
        state.tick(&[ap("A", -50)], &cfg, 0);
        let diff = state.tick(&[ap("A", -50), ap("New", -80)], &cfg, 1).unwrap();
        assert_eq!(diff.added.len(), 1);
        assert_eq!(diff.added[0].ssid.to_string(), "New");
    }

    #[test]
    fn grace_one_removes_on_first_miss() {
        let cfg = ScanConfig::new(1000, 1).unwrap();
        let mut state = ScanState::new();
        state.tick(&[ap("A", -50)], &cfg, 0);
        assert_eq!(state.tick(&[], &cfg, 1).unwrap().removed.len(), 1);
    }

    #[test]
    fn retained_network_keeps_last_seen_values() {
        let cfg = ScanConfig::new(1000, 3).unwrap();
        let mut state = ScanState::new();
        state.tick(&[ap("A", -50), ap("BB", -70)], &cfg, 0);
        state.tick(&[ap("A", -50)], &cfg, 1);
        let bb = state.current().get(&"BB".parse().unwrap()).unwrap();
        assert_eq!(bb.signal_percent, 60);
    }
}
