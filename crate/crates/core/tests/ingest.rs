use proptest::prelude::*;
use telewb_core::ingest::{parse_channel, ChannelKind};

fn saa_line() -> impl Strategy<Value = (String, bool)> {
    prop_oneof![
        3 => (0i64..10_000_000, 0.0f64..360.0, 0.0f64..360.0, 0.0f64..360.0, 0.0f64..360.0)
            .prop_map(|(t, a, b, c, d)| (format!("{},{a},{b},{c},{d}", 1_219_622_400_000 + t), true)),
        1 => prop_oneof![
            Just("not,a,row".to_owned()),
            Just("1219622400000,1.0,2.0".to_owned()),
            Just("abc,1,2,3,4".to_owned()),
            Just("1219622400000,x,2,3,4".to_owned()),
        ]
        .prop_map(|s| (s, false)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_plus_rejected_is_line_count(lines in proptest::collection::vec(saa_line(), 1..40)) {
        let mut text = String::from("ut_ms,sa,sx,sy,sz\n");
        for (l, _) in &lines {
            text.push_str(l);
            text.push('\n');
        }
        let (table, report) = parse_channel(ChannelKind::Saa, "saa.csv", text.as_bytes()).unwrap();
        prop_assert_eq!(report.accepted + report.rejected, lines.len());
        prop_assert_eq!(report.accepted, lines.iter().filter(|l| l.1).count());
        prop_assert_eq!(report.rejection_reasons.len(), report.rejected);
        prop_assert!(table.rows.windows(2).all(|w| w[0].time_ms <= w[1].time_ms));

        // deterministic
        let again = parse_channel(ChannelKind::Saa, "saa.csv", text.as_bytes()).unwrap();
        prop_assert_eq!(&again.0, &table);
        prop_assert_eq!(&again.1, &report);

        // round trip through the channel schema
        let csv = table.to_csv().unwrap();
        let (back, back_report) = parse_channel(ChannelKind::Saa, "saa.csv", &csv).unwrap();
        prop_assert_eq!(back_report.rejected, 0);
        prop_assert_eq!(back.rows, table.rows);
    }
}

#[test]
fn every_kind_has_one_schema() {
    assert_eq!(ChannelKind::ALL.len(), 9);
    for kind in ChannelKind::ALL {
        assert!(!kind.time_column().is_empty(), "{kind:?}");
    }
}

#[test]
fn header_problems_are_fatal() {
    assert!(parse_channel(ChannelKind::Saa, "saa.csv", b"").is_err());
    assert!(parse_channel(ChannelKind::Saa, "saa.csv", b"ut_ms,sa\n1,2\n").is_err());
}
