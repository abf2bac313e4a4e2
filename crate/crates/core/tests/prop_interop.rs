use govsim_core::interop::{
    convert_legacy, schema, to_legacy, upgrade_message, validate_bytes, validate_message, FieldType,
    LegacyMapping, MsgType,
};
use proptest::prelude::*;

const TYPES: [MsgType; 4] = [
    MsgType::ComplianceReport,
    MsgType::RiskAssessment,
    MsgType::TransactionData,
    MsgType::AuditRequest,
];

fn cell(ty: FieldType) -> BoxedStrategy<String> {
    match ty {
        FieldType::Text => "[a-zA-Z0-9 _:./é漢-]{0,12}".boxed(),
        FieldType::Int => any::<i32>().prop_map(|n| n.to_string()).boxed(),
        FieldType::Decimal => (any::<bool>(), 0..100_000u64, prop::option::of("[0-9]{1,5}"))
            .prop_map(|(neg, i, f)| {
                let sign = if neg { "-" } else { "" };
                match f {
                    Some(f) => format!("{sign}{i}.{f}"),
                    None => format!("{sign}{i}"),
                }
            })
            .boxed(),
        FieldType::Bool => any::<bool>().prop_map(|b| b.to_string()).boxed(),
        FieldType::Date => (1900..2100u32, 1..=12u32, 1..=28u32)
            .prop_map(|(y, m, d)| format!("{y:04}-{m:02}-{d:02}"))
            .boxed(),
    }
}

/// A mapping with shuffled columns and one matching row.
fn legacy_row(version: u32) -> impl Strategy<Value = (LegacyMapping, String)> {
    (0..4usize, prop::sample::select(vec![',', ';', '|', '\t']))
        .prop_flat_map(move |(t, delimiter)| {
            let fields = schema(TYPES[t], version).unwrap();
            let names: Vec<String> = fields.iter().map(|f| f.name.to_string()).collect();
            let cells: Vec<BoxedStrategy<String>> = fields.iter().map(|f| cell(f.ty)).collect();
            (Just(TYPES[t]), Just(delimiter), Just(names).prop_shuffle(), cells)
        })
        .prop_map(move |(msg_type, delimiter, columns, cells)| {
            let fields = schema(msg_type, version).unwrap();
            let row: Vec<String> = columns
                .iter()
                .map(|c| cells[fields.iter().position(|f| f.name == c).unwrap()].clone())
                .collect();
            let mapping = LegacyMapping { msg_type, schema_version: version, delimiter, columns, header: false };
            (mapping, row.join(&delimiter.to_string()))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn legacy_rows_round_trip_byte_exactly((mapping, row) in prop_oneof![legacy_row(1), legacy_row(2)]) {
        let msg = convert_legacy(&row, &mapping).unwrap();
        prop_assert!(validate_message(&msg).is_empty());
        prop_assert_eq!(to_legacy(&msg, &mapping).unwrap(), row);
        let bytes = msg.to_canonical_json().into_bytes();
        prop_assert!(validate_bytes(&bytes).is_empty());
    }

    #[test]
    fn every_v1_message_upgrades_to_a_valid_v2((mapping, row) in legacy_row(1)) {
        let v1 = convert_legacy(&row, &mapping).unwrap();
        let v2 = upgrade_message(&v1, 2).unwrap();
        prop_assert_eq!(v2.schema_version, 2);
        prop_assert!(validate_message(&v2).is_empty(), "{:?}", validate_message(&v2));
        prop_assert_eq!(upgrade_message(&v2, 2).unwrap(), v2.clone());
        let declared: Vec<&str> = schema(mapping.msg_type, 2).unwrap().iter().map(|f| f.name).collect();
        prop_assert!(v2.payload.keys().all(|k| declared.contains(&k.as_str())));
    }

    #[test]
    fn validation_is_total_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = validate_bytes(&bytes);
    }

    #[test]
    fn mutated_messages_never_panic((mapping, row) in legacy_row(1), at in any::<prop::sample::Index>(), b in any::<u8>()) {
        let mut bytes = convert_legacy(&row, &mapping).unwrap().to_canonical_json().into_bytes();
        let i = at.index(bytes.len());
        let changed = bytes[i] != b;
        bytes[i] = b;
        let v = validate_bytes(&bytes);
        // Whitespace, escapes and checksum hex case aside, an edit must not pass unnoticed.
        if changed && bytes[i].is_ascii_alphanumeric() && v.is_empty() {
            let parse = |b: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(b).unwrap();
                let sum = v["checksum"].as_str().unwrap().to_ascii_lowercase();
                v["checksum"] = sum.into();
                v
            };
            let original = convert_legacy(&row, &mapping).unwrap().to_canonical_json();
            prop_assert_eq!(parse(&bytes), parse(original.as_bytes()));
        }
    }
}
