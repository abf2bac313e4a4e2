//! Scans sealed payloads for raw monitored-metric values.

use std::collections::BTreeMap;

use crate::compliance::{encode_metrics, MetricValue, Metrics};
use crate::ledger::{Block, EventKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leak {
    pub event_id: u64,
    pub kind: EventKind,
    pub did: String,
    pub metric: String,
}

fn find(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Byte patterns that would reveal `(name, value)` in a payload.
fn needles(name: &str, value: &MetricValue) -> Vec<Vec<u8>> {
    let single: Metrics = BTreeMap::from([(name.to_string(), value.clone())]);
    // Drop the 4-byte entry count.
    let canonical = encode_metrics(&single)[4..].to_vec();
    let mut out = vec![canonical];
    // A bare `(name, bool)` is indistinguishable from a rule verdict whose id
    // equals the metric name, so booleans are matched in tagged form only.
    if let MetricValue::Number(x) = value {
        out.push(bincode::serialize(&(name, *x)).expect("serializes"));
        out.push(bincode::serialize(&(name, x.to_bits())).expect("serializes"));
    }
    out
}

/// Every event whose payload contains a private metric in any of the
/// encodings the system uses. ORACLE_UPDATE payloads carry public feed data
/// and are skipped. Assessment and audit payloads are also checked for the
/// bare 8-byte value of each numeric metric.
pub fn scan_for_metrics(
    blocks: &[Block],
    private: &BTreeMap<String, Vec<(String, MetricValue)>>,
) -> Vec<Leak> {
    let patterns: Vec<(&str, &str, Vec<Vec<u8>>, Option<[u8; 8]>)> = private
        .iter()
        .flat_map(|(did, values)| {
            values.iter().map(move |(name, v)| {
                let raw = match v {
                    MetricValue::Number(x) => Some(x.to_bits().to_le_bytes()),
                    MetricValue::Bool(_) => None,
                };
                (did.as_str(), name.as_str(), needles(name, v), raw)
            })
        })
        .collect();
    let mut leaks = Vec::new();
    for ev in blocks.iter().flat_map(|b| &b.events) {
        if ev.kind == EventKind::OracleUpdate {
            continue;
        }
        let scan_raw = matches!(ev.kind, EventKind::AssessmentRecorded | EventKind::AuditRecorded);
        for (did, name, ns, raw) in &patterns {
            let hit = ns.iter().any(|n| find(&ev.payload, n))
                || (scan_raw && raw.is_some_and(|r| find(&ev.payload, &r)));
            if hit {
                leaks.push(Leak {
                    event_id: ev.event_id,
                    kind: ev.kind,
                    did: did.to_string(),
                    metric: name.to_string(),
                });
            }
        }
    }
    leaks
}
