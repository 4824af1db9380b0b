//! Parser for `iwlist <iface> scan` output.
//!
//! Output is a sequence of cell blocks:
//!
//! ```text
//!           Cell 01 - Address: AA:BB:CC:DD:EE:01
//!                     Channel:6
//!                     Quality=55/70  Signal level=-55 dBm
//!                     Encryption key:on
//!                     ESSID:"REDMI"
//! ```
//!
//! Signal comes either as `Signal level=<n> dBm` or, for drivers that only
//! report link quality, `Quality=<x>/70` which maps to `x - 110` dBm. When both
//! are present the dBm reading wins. Unknown lines are ignored.

use tracing::debug;

use crate::model::{validate_ssid, AccessPoint, Bssid, Security};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanParse {
    pub access_points: Vec<AccessPoint>,
    /// Cells whose address line could not be parsed.
    pub malformed_cells: usize,
    /// Cells dropped for a hidden or oversized ESSID, or for missing signal
    /// or channel.
    pub skipped_cells: usize,
}

#[derive(Debug, Default)]
struct CellBuilder {
    bssid: Option<Bssid>,
    essid: Option<Vec<u8>>,
    signal_dbm: Option<i64>,
    quality_dbm: Option<i64>,
    encrypted: bool,
    channel: Option<u32>,
    frequency_channel: Option<u32>,
}

impl CellBuilder {
    fn finish(self) -> Option<AccessPoint> {
        let ssid = validate_ssid(self.essid.as_deref()?).ok()?;
        let dbm = self.signal_dbm.or(self.quality_dbm)?;
        let channel = self.channel.or(self.frequency_channel)?;
        let dbm = dbm.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
        AccessPoint::new(
            ssid,
            self.bssid?,
            dbm,
            Security::from_secure(self.encrypted),
            channel,
        )
    }

    fn feed(&mut self, line: &str) {
        if let Some(rest) = line.strip_prefix("ESSID:") {
            self.essid = parse_essid(rest);
        } else if let Some(rest) = line.strip_prefix("Encryption key:") {
            self.encrypted = rest.trim().eq_ignore_ascii_case("on");
        } else if let Some(rest) = line.strip_prefix("Channel:") {
            self.channel = rest.trim().parse().ok().filter(|c| *c > 0);
        } else if let Some(rest) = line.strip_prefix("Frequency:") {
            self.frequency_channel = rest
                .find("(Channel ")
                .and_then(|at| {
                    let tail = &rest[at + "(Channel ".len()..];
                    tail.split(')').next()?.trim().parse().ok()
                })
                .filter(|c: &u32| *c > 0);
        } else {
            if let Some(at) = line.find("Signal level=") {
                if let Some(dbm) = parse_dbm(&line[at + "Signal level=".len()..]) {
                    self.signal_dbm = Some(dbm);
                }
            }
            if let Some(at) = line.find("Quality=") {
                if let Some(q) = parse_quality(&line[at + "Quality=".len()..]) {
                    self.quality_dbm = Some(q - 110);
                }
            }
        }
    }
}

fn leading_integer(text: &str) -> Option<(i64, &str)> {
    let end = text
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && c == '-')))
        .map_or(text.len(), |(i, _)| i);
    let value = text[..end].parse::<i64>().ok()?;
    Some((value, &text[end..]))
}

fn parse_dbm(text: &str) -> Option<i64> {
    let (value, rest) = leading_integer(text)?;
    rest.trim_start().starts_with("dBm").then_some(value)
}

fn parse_quality(text: &str) -> Option<i64> {
    let (value, rest) = leading_integer(text)?;
    let (scale, _) = leading_integer(rest.strip_prefix('/')?)?;
    (scale == 70 && (0..=70).contains(&value)).then_some(value)
}

/// Extracts the quoted ESSID, decoding `\xHH` escapes. `ESSID:off/any` and
/// unquoted forms yield `None`.
fn parse_essid(rest: &str) -> Option<Vec<u8>> {
    let rest = rest.trim();
    let body = rest.strip_prefix('"')?;
    let body = body.strip_suffix('"').unwrap_or(body);
    let raw = body.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'\\' && raw.get(i + 1) == Some(&b'x') {
            let hex = raw.get(i + 2..i + 4).and_then(|h| std::str::from_utf8(h).ok());
            if let Some(byte) = hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                out.push(byte);
                i += 4;
                continue;
            }
        }
        out.push(raw[i]);
        i += 1;
    }
    Some(out)
}

/// Returns the address text of a `Cell NN - Address: ...` line.
fn cell_address(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("Cell ")?;
    let at = rest.find("Address:")?;
    Some(rest[at + "Address:".len()..].trim())
}

pub fn parse_scan_output(text: &str) -> ScanParse {
    let mut out = ScanParse::default();
    // None while outside a cell or inside a malformed one.
    let mut current: Option<CellBuilder> = None;

    for line in text.lines() {
        let line = line.trim();
        if let Some(addr) = cell_address(line) {
            close_cell(current.take(), &mut out);
            match addr.parse::<Bssid>() {
                Ok(bssid) => {
                    current = Some(CellBuilder {
                        bssid: Some(bssid),
                        ..CellBuilder::default()
                    })
                }
                Err(_) => {
                    debug!(target: "iwlist", address = addr, "skipping cell with malformed address");
                    out.malformed_cells += 1;
                }
            }
        } else if let Some(cell) = current.as_mut() {
            cell.feed(line);
        }
    }
    close_cell(current, &mut out);
    out
}

fn close_cell(cell: Option<CellBuilder>, out: &mut ScanParse) {
    if let Some(cell) = cell {
        match cell.finish() {
            Some(ap) => out.access_points.push(ap),
            None => out.skipped_cells += 1,
        }
    }
}

/// Byte-level entry point; invalid UTF-8 is replaced before parsing.
pub fn parse_scan_bytes(raw: &[u8]) -> ScanParse {
    parse_scan_output(&String::from_utf8_lossy(raw))
}
