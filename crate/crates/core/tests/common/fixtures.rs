//! Expected parses of the bundled iwlist captures.

use awci::model::{AccessPoint, Security};

fn ap(ssid: &str, bssid: &str, dbm: i32, secure: bool, channel: u32) -> AccessPoint {
    AccessPoint {
        ssid: ssid.parse().unwrap(),
        bssid: bssid.parse().unwrap(),
        signal_dbm: dbm,
        security: Security::from_secure(secure),
        channel,
    }
}

pub fn read(name: &str) -> String {
    let path = format!("{}/tests/fixtures/iwlist/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

/// (file, expected access points, malformed cells, skipped cells)
pub fn expected() -> Vec<(&'static str, Vec<AccessPoint>, usize, usize)> {
    vec![
        (
            "dbm.txt",
            vec![
                ap("REDMI", "aa:bb:cc:dd:ee:01", -55, true, 6),
                ap("REDMI", "aa:bb:cc:dd:ee:02", -44, true, 36),
                ap("Cafe Guest", "10:20:30:40:50:60", -87, false, 11),
            ],
            0,
            0,
        ),
        (
            // Quality=x/70 maps to x - 110 dBm: 40 -> -70, 70 -> -40, 5 -> -105 (clamped)
            "quality.txt",
            vec![
                ap("Library", "00:1a:2b:3c:4d:5e", -70, false, 1),
                ap("Lab - 5G", "00:1a:2b:3c:4d:5f", -40, true, 149),
                ap("Dormitory", "00:1a:2b:3c:4d:60", -100, true, 3),
            ],
            0,
            0,
        ),
        (
            // two bad MACs; empty ESSID, missing channel, ESSID:off/any
            "malformed.txt",
            vec![ap("Survivor", "00:11:22:33:44:77", -50, true, 6)],
            2,
            3,
        ),
    ]
}
