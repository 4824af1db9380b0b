mod common;

use awci::backend::{parse_scan_bytes, parse_scan_output};
use awci::model::{MAX_SIGNAL_DBM, MIN_SIGNAL_DBM};
use common::fixtures::{self, read as fixture};
use proptest::prelude::*;

#[test]
fn bundled_fixtures_parse_exactly() {
    for (name, want, malformed, skipped) in fixtures::expected() {
        let parsed = parse_scan_output(&fixture(name));
        assert_eq!(parsed.access_points, want, "{name}");
        assert_eq!((parsed.malformed_cells, parsed.skipped_cells), (malformed, skipped), "{name}");
    }
}

fn cell(signal_line: &str) -> String {
    format!("Cell 01 - Address: 02:00:00:00:00:01\nChannel:3\n{signal_line}\nEncryption key:off\nESSID:\"Q\"\n")
}

#[test]
fn quality_and_dbm_forms_agree() {
    for x in 0..=70i32 {
        let from_quality = parse_scan_output(&cell(&format!("Quality={x}/70")));
        let from_dbm = parse_scan_output(&cell(&format!("Signal level={} dBm", x - 110)));
        assert_eq!(from_quality, from_dbm, "x = {x}");
        assert_eq!(from_quality.access_points.len(), 1);
    }
}

fn assert_invariants(raw: &[u8]) {
    let parsed = parse_scan_bytes(raw);
    for ap in parsed.access_points {
        assert!((1..=32).contains(&ap.ssid.as_bytes().len()));
        assert!((MIN_SIGNAL_DBM..=MAX_SIGNAL_DBM).contains(&ap.signal_dbm));
        assert!(ap.channel > 0);
        let text = ap.bssid.to_string();
        assert_eq!(text.len(), 17);
        assert!(text.chars().all(|c| c == ':' || c.is_ascii_digit() || ('a'..='f').contains(&c)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn random_bytes_never_abort(raw in proptest::collection::vec(any::<u8>(), 0..2048)) {
        assert_invariants(&raw);
    }

    #[test]
    fn mutated_fixtures_never_abort(
        which in 0usize..3,
        cuts in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 0..40),
    ) {
        let name = ["dbm.txt", "quality.txt", "malformed.txt"][which];
        let mut raw = fixture(name).into_bytes();
        for (at, byte) in cuts {
            let i = at.index(raw.len());
            raw[i] = byte;
        }
        assert_invariants(&raw);
    }

    #[test]
    fn grammar_shaped_noise_never_aborts(
        lines in proptest::collection::vec(
            prop_oneof![
                "Cell [0-9]{2} - Address: [0-9A-Fa-fG:]{0,20}",
                "ESSID:\"[ -~]{0,40}\"",
                "ESSID:\"(\\\\x[0-9a-fA-F]{0,2}){0,12}",
                "Signal level=-?[0-9]{0,22} ?dBm",
                "Quality=[0-9]{0,4}/[0-9]{0,3}",
                "Channel:[0-9-]{0,12}",
                "Frequency:[0-9.]{0,6} GHz \\(Channel [0-9]{0,12}\\)?",
                "Encryption key:(on|off|ON|)",
                "[ -~]{0,60}",
            ],
            0..60,
        )
    ) {
        assert_invariants(lines.join("\n").as_bytes());
    }
}
