#![allow(dead_code)]

pub mod fixtures;
pub mod machine;
pub mod messages;

use awci::model::{NetworkDiff, NetworkSnapshot, NetworkView, Ssid};
use proptest::prelude::*;

pub const SSID_POOL: &[&str] = &["REDMI", "Cafe", "Office", "Home", "home", "Lab-5G", "x", "Library"];

pub fn view(ssid: &str, signal: u8, secure: bool, bssids: u32) -> NetworkView {
    NetworkView {
        ssid: ssid.parse().unwrap(),
        signal_percent: signal,
        secure,
        bssid_count: bssids,
    }
}

/// Snapshots over a small shared name pool so random pairs overlap.
pub fn arb_snapshot() -> impl Strategy<Value = NetworkSnapshot> {
    proptest::collection::vec(
        (any::<bool>(), 0u8..=100, any::<bool>(), 1u32..4),
        SSID_POOL.len(),
    )
    .prop_map(|slots| {
        let views = slots
            .into_iter()
            .zip(SSID_POOL)
            .filter(|((present, ..), _)| *present)
            .map(|((_, signal, secure, n), name)| view(name, signal, secure, n))
            .collect();
        NetworkSnapshot::ranked(views, 0)
    })
}

/// Sort key for display order, written out independently of the crate.
pub fn display_key(v: &NetworkView) -> (std::cmp::Reverse<u8>, Vec<u8>) {
    (std::cmp::Reverse(v.signal_percent), v.ssid.as_bytes().to_vec())
}

/// Linear-scan patch: remove, overwrite, append, then sort.
pub fn oracle_patch(prev: &NetworkSnapshot, diff: &NetworkDiff) -> Vec<NetworkView> {
    let mut out: Vec<NetworkView> = prev
        .networks
        .iter()
        .filter(|n| !diff.removed.contains(&n.ssid))
        .cloned()
        .collect();
    for changed in &diff.changed {
        for slot in out.iter_mut() {
            if slot.ssid == changed.ssid {
                *slot = changed.clone();
            }
        }
    }
    out.extend(diff.added.iter().cloned());
    out.sort_by_key(display_key);
    out
}

pub fn ssid(s: &str) -> Ssid {
    s.parse().unwrap()
}
