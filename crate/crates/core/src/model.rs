//! Pure domain types: identifiers, signal mapping, snapshot ranking and diffing.
//!
//! Nothing in here touches I/O. Every value is immutable once built and can be
//! shared freely between tasks.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_SSID_LEN: usize = 32;
pub const MIN_PASSPHRASE_LEN: usize = 8;
pub const MAX_PASSPHRASE_LEN: usize = 63;
pub const RAW_KEY_LEN: usize = 64;

pub const MIN_SIGNAL_DBM: i32 = -100;
pub const MAX_SIGNAL_DBM: i32 = -10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SsidError {
    #[error("SSID is empty")]
    Empty,
    #[error("SSID is {0} bytes long, at most 32 are allowed")]
    TooLong(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PskError {
    #[error("passphrase is shorter than 8 characters")]
    TooShort,
    #[error("passphrase is longer than 63 characters")]
    TooLong,
    #[error("passphrase contains non-printable characters")]
    NonPrintable,
    #[error("64-character key is not hexadecimal")]
    NonHexRawKey,
}

/// A network name: 1 to 32 raw octets, compared byte-for-byte.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ssid(Box<[u8]>);

impl Ssid {
    pub fn new(raw: impl AsRef<[u8]>) -> Result<Self, SsidError> {
        validate_ssid(raw.as_ref())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Text form used in client payloads. Invalid UTF-8 is replaced.
    pub fn display(&self) -> Cow<'_, str> {
        String::from_utf8_lossy(&self.0)
    }

    pub fn is_utf8(&self) -> bool {
        std::str::from_utf8(&self.0).is_ok()
    }
}

pub fn validate_ssid(raw: &[u8]) -> Result<Ssid, SsidError> {
    match raw.len() {
        0 => Err(SsidError::Empty),
        n if n > MAX_SSID_LEN => Err(SsidError::TooLong(n)),
        _ => Ok(Ssid(raw.into())),
    }
}

impl fmt::Display for Ssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

impl fmt::Debug for Ssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ssid({:?})", self.display())
    }
}

impl FromStr for Ssid {
    type Err = SsidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_ssid(s.as_bytes())
    }
}

impl Serialize for Ssid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.display())
    }
}

impl<'de> Deserialize<'de> for Ssid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        validate_ssid(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

/// A pre-shared key. Deliberately not `Serialize` and never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct Psk(String);

impl Psk {
    pub fn new(raw: &str) -> Result<Self, PskError> {
        validate_psk(raw)
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// True for the 64 hex digit form.
    pub fn is_raw_key(&self) -> bool {
        self.0.len() == RAW_KEY_LEN
    }
}

impl fmt::Debug for Psk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Psk(<redacted>)")
    }
}

pub fn validate_psk(raw: &str) -> Result<Psk, PskError> {
    let len = raw.chars().count();
    if len == RAW_KEY_LEN {
        return if raw.bytes().all(|b| b.is_ascii_hexdigit()) {
            Ok(Psk(raw.to_owned()))
        } else {
            Err(PskError::NonHexRawKey)
        };
    }
    if len < MIN_PASSPHRASE_LEN {
        return Err(PskError::TooShort);
    }
    if len > MAX_PASSPHRASE_LEN {
        return Err(PskError::TooLong);
    }
    if !raw.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
        return Err(PskError::NonPrintable);
    }
    Ok(Psk(raw.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Security {
    Open,
    PskProtected,
}

impl Security {
    pub fn from_secure(secure: bool) -> Self {
        if secure {
            Security::PskProtected
        } else {
            Security::Open
        }
    }

    pub fn is_secure(self) -> bool {
        self == Security::PskProtected
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MAC address {0:?}")]
pub struct BssidParseError(pub String);

/// Six-octet radio MAC address. Text form is lowercase and colon-separated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bssid(pub [u8; 6]);

impl FromStr for Bssid {
    type Err = BssidParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || BssidParseError(s.to_owned());
        let mut octets = [0u8; 6];
        let mut parts = s.split(':');
        for octet in octets.iter_mut() {
            let part = parts.next().ok_or_else(err)?;
            if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(err());
            }
            *octet = u8::from_str_radix(part, 16).map_err(|_| err())?;
        }
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(Bssid(octets))
    }
}

impl fmt::Display for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.0;
        write!(f, "{a:02x}:{b:02x}:{c:02x}:{d:02x}:{e:02x}:{g:02x}")
    }
}

impl fmt::Debug for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bssid({self})")
    }
}

impl Serialize for Bssid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bssid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One observed BSS from a scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessPoint {
    pub ssid: Ssid,
    pub bssid: Bssid,
    pub signal_dbm: i32,
    pub security: Security,
    pub channel: u32,
}

impl AccessPoint {
    /// Builds an access point, clamping the signal into `[-100, -10]` dBm.
    /// Returns `None` for channel 0.
    pub fn new(
        ssid: Ssid,
        bssid: Bssid,
        signal_dbm: i32,
        security: Security,
        channel: u32,
    ) -> Option<Self> {
        if channel == 0 {
            return None;
        }
        Some(AccessPoint {
            ssid,
            bssid,
            signal_dbm: clamp_dbm(signal_dbm as i64),
            security,
            channel,
        })
    }
}

pub fn clamp_dbm(dbm: i64) -> i32 {
    dbm.clamp(MIN_SIGNAL_DBM as i64, MAX_SIGNAL_DBM as i64) as i32
}

/// Linear dBm to percent map: `clamp(2 * (dbm + 100), 0, 100)`.
pub fn signal_percent(dbm: i32) -> u8 {
    (2 * (dbm as i64 + 100)).clamp(0, 100) as u8
}

/// Client-facing entry: one per distinct SSID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkView {
    pub ssid: Ssid,
    #[serde(rename = "signal")]
    pub signal_percent: u8,
    pub secure: bool,
    #[serde(rename = "bssids")]
    pub bssid_count: u32,
}

/// Display order: strongest first, then SSID bytes ascending.
pub fn rank_order(a: &NetworkView, b: &NetworkView) -> Ordering {
    b.signal_percent
        .cmp(&a.signal_percent)
        .then_with(|| a.ssid.cmp(&b.ssid))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetworkSnapshot {
    pub networks: Vec<NetworkView>,
    pub taken_at_ms: u64,
}

impl NetworkSnapshot {
    pub fn empty(taken_at_ms: u64) -> Self {
        NetworkSnapshot {
            networks: Vec::new(),
            taken_at_ms,
        }
    }

    /// Sorts into display order. Callers must supply unique SSIDs.
    pub fn ranked(mut networks: Vec<NetworkView>, taken_at_ms: u64) -> Self {
        networks.sort_by(rank_order);
        NetworkSnapshot {
            networks,
            taken_at_ms,
        }
    }

    pub fn get(&self, ssid: &Ssid) -> Option<&NetworkView> {
        self.networks.iter().find(|n| &n.ssid == ssid)
    }

    pub fn contains(&self, ssid: &Ssid) -> bool {
        self.get(ssid).is_some()
    }

    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    /// True when ordering and uniqueness hold.
    pub fn is_well_formed(&self) -> bool {
        self.networks
            .windows(2)
            .all(|w| rank_order(&w[0], &w[1]) == Ordering::Less)
    }
}

/// Groups access points by SSID. The strongest BSS supplies the signal and
/// security; ties between equally strong BSSes go to the lowest BSSID.
pub fn dedupe_and_rank(aps: &[AccessPoint], taken_at_ms: u64) -> NetworkSnapshot {
    let mut groups: HashMap<&Ssid, (&AccessPoint, u32)> = HashMap::new();
    for ap in aps {
        groups
            .entry(&ap.ssid)
            .and_modify(|(best, count)| {
                *count += 1;
                let stronger = ap.signal_dbm > best.signal_dbm
                    || (ap.signal_dbm == best.signal_dbm && ap.bssid < best.bssid);
                if stronger {
                    *best = ap;
                }
            })
            .or_insert((ap, 1));
    }
    let views = groups
        .into_values()
        .map(|(best, count)| NetworkView {
            ssid: best.ssid.clone(),
            signal_percent: signal_percent(best.signal_dbm),
            secure: best.security.is_secure(),
            bssid_count: count,
        })
        .collect();
    NetworkSnapshot::ranked(views, taken_at_ms)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetworkDiff {
    pub added: Vec<NetworkView>,
    pub removed: Vec<Ssid>,
    pub changed: Vec<NetworkView>,
}

impl NetworkDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

pub fn diff_snapshots(prev: &NetworkSnapshot, next: &NetworkSnapshot) -> NetworkDiff {
    let before: HashMap<&Ssid, &NetworkView> =
        prev.networks.iter().map(|n| (&n.ssid, n)).collect();
    let after: HashMap<&Ssid, &NetworkView> =
        next.networks.iter().map(|n| (&n.ssid, n)).collect();

    let mut diff = NetworkDiff::default();
    for view in &next.networks {
        match before.get(&view.ssid) {
            None => diff.added.push(view.clone()),
            Some(old) if *old != view => diff.changed.push(view.clone()),
            Some(_) => {}
        }
    }
    diff.removed = prev
        .networks
        .iter()
        .filter(|n| !after.contains_key(&n.ssid))
        .map(|n| n.ssid.clone())
        .collect();
    diff
}

/// Applies `diff` to `prev` and re-ranks the result.
pub fn apply_diff(prev: &NetworkSnapshot, diff: &NetworkDiff, taken_at_ms: u64) -> NetworkSnapshot {
    let mut by_ssid: HashMap<Ssid, NetworkView> = prev
        .networks
        .iter()
        .map(|n| (n.ssid.clone(), n.clone()))
        .collect();
    for ssid in &diff.removed {
        by_ssid.remove(ssid);
    }
    for view in diff.added.iter().chain(&diff.changed) {
        by_ssid.insert(view.ssid.clone(), view.clone());
    }
    NetworkSnapshot::ranked(by_ssid.into_values().collect(), taken_at_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(ssid: &str, mac_tail: u8, dbm: i32, secure: bool) -> AccessPoint {
        AccessPoint::new(
            ssid.parse().unwrap(),
            Bssid([0xaa, 0xbb, 0xcc, 0xdd, 0xee, mac_tail]),
            dbm,
            Security::from_secure(secure),
            6,
        )
        .unwrap()
    }

    #[test]
    fn ssid_examples() {
        assert_eq!(validate_ssid(b"REDMI").unwrap().as_bytes(), b"REDMI");
        assert_eq!(validate_ssid(b""), Err(SsidError::Empty));
        assert_eq!(validate_ssid(&[b'a'; 33]), Err(SsidError::TooLong(33)));
    }

    #[test]
    fn ssid_length_boundary_is_exhaustive() {
        for len in 0..=33usize {
            let raw = vec![0xffu8; len];
            assert_eq!(validate_ssid(&raw).is_ok(), (1..=32).contains(&len), "len {len}");
        }
    }

    #[test]
    fn ssid_is_case_sensitive_and_preserves_bytes() {
        let a: Ssid = "Home".parse().unwrap();
        let b: Ssid = "home".parse().unwrap();
        assert_ne!(a, b);
        let raw = Ssid::new([0x41, 0xff, 0x42]).unwrap();
        assert_eq!(raw.as_bytes(), &[0x41, 0xff, 0x42]);
        assert_eq!(raw.display(), "A\u{fffd}B");
        assert!(!raw.is_utf8());
    }

    #[test]
    fn psk_examples() {
        assert!(validate_psk("pass1234").is_ok());
        assert_eq!(validate_psk("short"), Err(PskError::TooShort));
        let raw = validate_psk(&"a".repeat(64)).unwrap();
        assert!(raw.is_raw_key());
        assert_eq!(validate_psk(&"g".repeat(64)), Err(PskError::NonHexRawKey));
        assert_eq!(validate_psk(&"a".repeat(65)), Err(PskError::TooLong));
        assert!(validate_psk(&"a".repeat(63)).is_ok());
        assert_eq!(validate_psk("pass\u{7}word"), Err(PskError::NonPrintable));
        assert_eq!(validate_psk("pässwörd"), Err(PskError::NonPrintable));
    }

    #[test]
    fn psk_debug_is_redacted() {
        let psk = validate_psk("hunter22secret").unwrap();
        assert!(!format!("{psk:?}").contains("hunter22"));
    }

    #[test]
    fn signal_percent_examples() {
        assert_eq!(signal_percent(-100), 0);
        assert_eq!(signal_percent(-50), 100);
        assert_eq!(signal_percent(-75), 50);
        assert_eq!(signal_percent(-120), 0);
        assert_eq!(signal_percent(-10), 100);
        assert_eq!(signal_percent(i32::MIN), 0);
        assert_eq!(signal_percent(i32::MAX), 100);
    }

    #[test]
    fn bssid_text_form() {
        let b: Bssid = "AA:bb:0C:dd:ee:01".parse().unwrap();
        assert_eq!(b.to_string(), "aa:bb:0c:dd:ee:01");
        for bad in ["", "aa:bb", "aa:bb:cc:dd:ee:ff:00", "aa:bb:cc:dd:ee:f", "zz:bb:cc:dd:ee:ff", "+a:bb:cc:dd:ee:ff"] {
            assert!(bad.parse::<Bssid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn dedupe_examples() {
        assert!(dedupe_and_rank(&[], 0).is_empty());

        let snap = dedupe_and_rank(&[ap("REDMI", 1, -60, true), ap("REDMI", 2, -40, true)], 0);
        assert_eq!(snap.len(), 1);
        // stronger BSS is -40 dBm: 2 * (-40 + 100) = 120, clamped to 100
        assert_eq!(snap.networks[0].signal_percent, 100);
        assert_eq!(snap.networks[0].bssid_count, 2);

        let snap = dedupe_and_rank(&[ap("B", 1, -70, false), ap("A", 2, -70, false)], 0);
        let names: Vec<_> = snap.networks.iter().map(|n| n.ssid.to_string()).collect();
        assert_eq!(names, ["A", "B"]);
    }

    #[test]
    fn security_follows_strongest_bss() {
        let snap = dedupe_and_rank(&[ap("X", 1, -80, false), ap("X", 2, -60, true)], 0);
        assert!(snap.networks[0].secure);
        assert_eq!(snap.networks[0].signal_percent, 80);
    }

    #[test]
    fn diff_examples() {
        let s = dedupe_and_rank(&[ap("REDMI", 1, -55, true)], 0);
        assert!(diff_snapshots(&s, &s).is_empty());
        let d = diff_snapshots(&s, &NetworkSnapshot::empty(1));
        assert_eq!(d.removed, vec!["REDMI".parse::<Ssid>().unwrap()]);
        assert!(d.added.is_empty() && d.changed.is_empty());
    }

    #[test]
    fn diff_detects_changes_in_each_field() {
        let base = dedupe_and_rank(&[ap("N", 1, -70, false)], 0);
        for next in [
            dedupe_and_rank(&[ap("N", 1, -60, false)], 1),
            dedupe_and_rank(&[ap("N", 1, -70, true)], 1),
            dedupe_and_rank(&[ap("N", 1, -70, false), ap("N", 2, -80, false)], 1),
        ] {
            let d = diff_snapshots(&base, &next);
            assert_eq!(d.changed.len(), 1);
            assert_eq!(apply_diff(&base, &d, 1), next);
        }
    }
}
