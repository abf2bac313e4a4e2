//! Canonical interchange messages: schemas, validation, legacy row
//! conversion and forward-only version upgrades.
//!
//! The wire form is UTF-8 JSON with lexicographically sorted keys. The
//! checksum is SHA-256 over the canonical JSON of
//! `{"msg_type", "payload", "schema_version"}`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::crypto::Digest;
pub use crate::types::MsgType;

pub const LATEST_VERSION: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    /// Free text without the legacy delimiter.
    Text,
    /// Canonical base-10 integer (no leading zeros, no `+`).
    Int,
    /// Exact decimal carried as a string to keep its spelling.
    Decimal,
    Bool,
    /// `YYYY-MM-DD`.
    Date,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: &'static str,
    pub ty: FieldType,
    /// Value a field added in this version receives on upgrade.
    pub default: Option<&'static str>,
}

const fn f(name: &'static str, ty: FieldType) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        default: None,
    }
}

const fn d(name: &'static str, ty: FieldType, default: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        default: Some(default),
    }
}

/// Declared fields of `(msg_type, version)`, or `None` for unknown versions.
pub fn schema(msg_type: MsgType, version: u32) -> Option<Vec<FieldSpec>> {
    use FieldType::*;
    let v1 = match msg_type {
        MsgType::ComplianceReport => vec![
            f("system_did", Text),
            f("epoch", Int),
            f("rule_id", Text),
            f("outcome", Text),
            f("score", Decimal),
        ],
        MsgType::RiskAssessment => vec![
            f("system_did", Text),
            f("epoch", Int),
            f("score", Decimal),
            f("tier", Text),
        ],
        MsgType::TransactionData => vec![
            f("tx_id", Text),
            f("amount", Decimal),
            f("currency", Text),
            f("legacy_ref", Text),
        ],
        MsgType::AuditRequest => vec![
            f("system_did", Text),
            f("auditor_id", Text),
            f("epoch", Int),
        ],
    };
    match version {
        1 => Some(v1),
        2 => {
            let mut v2 = v1;
            match msg_type {
                MsgType::ComplianceReport => v2.push(d("jurisdiction", Text, "GLOBAL")),
                MsgType::RiskAssessment => v2.push(d("forecast", Decimal, "1")),
                MsgType::TransactionData => {
                    v2.retain(|s| s.name != "legacy_ref");
                    v2.push(d("settlement_date", Date, "1970-01-01"));
                }
                MsgType::AuditRequest => v2.push(d("priority", Int, "0")),
            }
            Some(v2)
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalMessage {
    pub msg_type: MsgType,
    pub schema_version: u32,
    pub payload: BTreeMap<String, Value>,
    pub checksum: Digest,
}

#[derive(Serialize)]
struct ChecksumInput<'a> {
    msg_type: MsgType,
    payload: &'a BTreeMap<String, Value>,
    schema_version: u32,
}

pub fn checksum(msg_type: MsgType, schema_version: u32, payload: &BTreeMap<String, Value>) -> Digest {
    let bytes = serde_json::to_vec(&ChecksumInput {
        msg_type,
        payload,
        schema_version,
    })
    .expect("JSON values always serialize");
    Digest::of(&bytes)
}

impl CanonicalMessage {
    pub fn new(msg_type: MsgType, schema_version: u32, payload: BTreeMap<String, Value>) -> Self {
        let checksum = checksum(msg_type, schema_version, &payload);
        CanonicalMessage {
            msg_type,
            schema_version,
            payload,
            checksum,
        }
    }

    pub fn reseal(&mut self) {
        self.checksum = checksum(self.msg_type, self.schema_version, &self.payload);
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("JSON values always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    Malformed(String),
    UnknownVersion { msg_type: String, version: u64 },
    MissingField(String),
    UnexpectedField(String),
    TypeMismatch { field: String, expected: FieldType },
    ChecksumMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Malformed(m) => write!(f, "malformed message: {m}"),
            Violation::UnknownVersion { msg_type, version } => {
                write!(f, "unknown schema {msg_type} v{version}")
            }
            Violation::MissingField(n) => write!(f, "missing field {n}"),
            Violation::UnexpectedField(n) => write!(f, "unexpected field {n}"),
            Violation::TypeMismatch { field, expected } => {
                write!(f, "field {field} is not a valid {expected:?}")
            }
            Violation::ChecksumMismatch => f.write_str("checksum mismatch"),
        }
    }
}

fn is_canonical_int(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && s != "-0"
        && s.parse::<i64>().is_ok()
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && (int == "0" || !int.starts_with('0')) && frac.is_none_or(digits)
}

fn is_date(s: &str) -> bool {
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .is_ok_and(|d| d.format("%Y-%m-%d").to_string() == s)
}

/// Checks one payload value against its declared type.
pub fn value_matches(ty: FieldType, v: &Value) -> bool {
    match (ty, v) {
        (FieldType::Text, Value::String(_)) => true,
        (FieldType::Int, Value::Number(n)) => n.is_i64(),
        (FieldType::Decimal, Value::String(s)) => is_decimal(s),
        (FieldType::Bool, Value::Bool(_)) => true,
        (FieldType::Date, Value::String(s)) => is_date(s),
        _ => false,
    }
}

/// All violations of `msg`; empty means valid.
pub fn validate_message(msg: &CanonicalMessage) -> Vec<Violation> {
    let Some(fields) = schema(msg.msg_type, msg.schema_version) else {
        return vec![Violation::UnknownVersion {
            msg_type: msg.msg_type.to_string(),
            version: msg.schema_version as u64,
        }];
    };
    let mut out = Vec::new();
    for spec in &fields {
        match msg.payload.get(spec.name) {
            None => out.push(Violation::MissingField(spec.name.to_string())),
            Some(v) if !value_matches(spec.ty, v) => out.push(Violation::TypeMismatch {
                field: spec.name.to_string(),
                expected: spec.ty,
            }),
            Some(_) => {}
        }
    }
    for name in msg.payload.keys() {
        if !fields.iter().any(|s| s.name == name) {
            out.push(Violation::UnexpectedField(name.clone()));
        }
    }
    if checksum(msg.msg_type, msg.schema_version, &msg.payload) != msg.checksum {
        out.push(Violation::ChecksumMismatch);
    }
    out
}

/// Validates raw bytes. Total: any input yields a violation list.
pub fn validate_bytes(bytes: &[u8]) -> Vec<Violation> {
    match serde_json::from_slice::<CanonicalMessage>(bytes) {
        Ok(msg) => validate_message(&msg),
        Err(e) => vec![Violation::Malformed(e.to_string())],
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InteropError {
    #[error("expected {expected} columns, found {found}")]
    MalformedRecord { expected: usize, found: usize },
    #[error("column {column:?}: cannot convert {value:?} to {expected:?}")]
    ConversionError {
        column: String,
        value: String,
        expected: FieldType,
    },
    #[error("cannot downgrade from v{from} to v{to}")]
    UnsupportedDowngrade { from: u32, to: u32 },
    #[error("unknown schema version {0}")]
    UnknownVersion(u32),
    #[error("invalid mapping: {0}")]
    InvalidMapping(String),
    #[error("invalid message: {0:?}")]
    Invalid(Vec<Violation>),
}

fn default_delimiter() -> char {
    ','
}

/// Legacy row layout: which canonical field each column holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegacyMapping {
    pub msg_type: MsgType,
    pub schema_version: u32,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub columns: Vec<String>,
    /// The input's first line names the columns and is skipped.
    #[serde(default)]
    pub header: bool,
}

impl LegacyMapping {
    pub fn check(&self) -> Result<Vec<FieldSpec>, InteropError> {
        let fields = schema(self.msg_type, self.schema_version)
            .ok_or(InteropError::UnknownVersion(self.schema_version))?;
        let mut names: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        names.sort_unstable();
        let mut declared: Vec<&str> = fields.iter().map(|f| f.name).collect();
        declared.sort_unstable();
        if names != declared {
            return Err(InteropError::InvalidMapping(format!(
                "columns {:?} must cover exactly {:?}",
                self.columns, declared
            )));
        }
        Ok(fields)
    }

    pub fn header_line(&self) -> String {
        self.columns.join(&self.delimiter.to_string())
    }
}

/// Maps one delimited row onto a canonical message.
pub fn convert_legacy(row: &str, mapping: &LegacyMapping) -> Result<CanonicalMessage, InteropError> {
    let fields = mapping.check()?;
    let cells: Vec<&str> = row.split(mapping.delimiter).collect();
    if cells.len() != mapping.columns.len() {
        return Err(InteropError::MalformedRecord {
            expected: mapping.columns.len(),
            found: cells.len(),
        });
    }
    let mut payload = BTreeMap::new();
    for (column, cell) in mapping.columns.iter().zip(cells) {
        let ty = fields
            .iter()
            .find(|f| f.name == column)
            .expect("mapping checked")
            .ty;
        let bad = || InteropError::ConversionError {
            column: column.clone(),
            value: cell.to_string(),
            expected: ty,
        };
        let value = match ty {
            FieldType::Text => Value::String(cell.to_string()),
            FieldType::Int if is_canonical_int(cell) => {
                Value::from(cell.parse::<i64>().map_err(|_| bad())?)
            }
            FieldType::Decimal if is_decimal(cell) => Value::String(cell.to_string()),
            FieldType::Bool if cell == "true" || cell == "false" => Value::Bool(cell == "true"),
            FieldType::Date if is_date(cell) => Value::String(cell.to_string()),
            _ => return Err(bad()),
        };
        payload.insert(column.clone(), value);
    }
    Ok(CanonicalMessage::new(mapping.msg_type, mapping.schema_version, payload))
}

/// Renders a message back into the legacy row layout.
pub fn to_legacy(msg: &CanonicalMessage, mapping: &LegacyMapping) -> Result<String, InteropError> {
    mapping.check()?;
    let violations = validate_message(msg);
    if !violations.is_empty() {
        return Err(InteropError::Invalid(violations));
    }
    let cells: Vec<String> = mapping
        .columns
        .iter()
        .map(|c| match &msg.payload[c] {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
        .collect();
    Ok(cells.join(&mapping.delimiter.to_string()))
}

/// Converts every non-empty line of `input`.
pub fn convert_file(input: &str, mapping: &LegacyMapping) -> Result<Vec<CanonicalMessage>, InteropError> {
    let mut lines = input.lines().filter(|l| !l.is_empty());
    if mapping.header {
        lines.next();
    }
    lines.map(|l| convert_legacy(l, mapping)).collect()
}

/// Applies each step `n -> n+1` up to `to`. New fields take their declared
/// default; removed fields are dropped.
pub fn upgrade_message(msg: &CanonicalMessage, to: u32) -> Result<CanonicalMessage, InteropError> {
    if to < msg.schema_version {
        return Err(InteropError::UnsupportedDowngrade {
            from: msg.schema_version,
            to,
        });
    }
    let mut out = msg.clone();
    while out.schema_version < to {
        let next = out.schema_version + 1;
        let fields = schema(out.msg_type, next).ok_or(InteropError::UnknownVersion(next))?;
        out.payload.retain(|k, _| {
            let keep = fields.iter().any(|f| f.name == k);
            if !keep {
                log::info!("{} v{next}: dropping removed field {k}", out.msg_type);
            }
            keep
        });
        for spec in &fields {
            if !out.payload.contains_key(spec.name) {
                let default = spec.default.ok_or_else(|| {
                    InteropError::InvalidMapping(format!("{} has no default", spec.name))
                })?;
                let value = match spec.ty {
                    FieldType::Int => Value::from(default.parse::<i64>().expect("static default")),
                    FieldType::Bool => Value::Bool(default == "true"),
                    _ => Value::String(default.to_string()),
                };
                out.payload.insert(spec.name.to_string(), value);
            }
        }
        out.schema_version = next;
    }
    out.reseal();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> LegacyMapping {
        LegacyMapping {
            msg_type: MsgType::ComplianceReport,
            schema_version: 1,
            delimiter: ',',
            columns: ["system_did", "epoch", "rule_id", "outcome", "score"]
                .map(String::from)
                .to_vec(),
            header: false,
        }
    }

    const ROW: &str = "did:govsim:ab12,5,capital_adequacy,FAIL,0.750";

    #[test]
    fn legacy_row_round_trips() {
        let m = convert_legacy(ROW, &mapping()).unwrap();
        assert!(validate_message(&m).is_empty());
        assert_eq!(m.payload["score"], Value::String("0.750".into()));
        assert_eq!(to_legacy(&m, &mapping()).unwrap(), ROW);
    }

    #[test]
    fn malformed_rows() {
        assert_eq!(
            convert_legacy("a,5,r,PASS", &mapping()),
            Err(InteropError::MalformedRecord { expected: 5, found: 4 })
        );
        assert!(matches!(
            convert_legacy("a,five,r,PASS,1", &mapping()),
            Err(InteropError::ConversionError { column, .. }) if column == "epoch"
        ));
        assert!(matches!(
            convert_legacy("a,05,r,PASS,1", &mapping()),
            Err(InteropError::ConversionError { .. })
        ));
        assert!(matches!(
            convert_legacy("a,5,r,PASS,1e3", &mapping()),
            Err(InteropError::ConversionError { column, .. }) if column == "score"
        ));
    }

    #[test]
    fn violations_are_listed() {
        let mut m = convert_legacy(ROW, &mapping()).unwrap();
        m.payload.remove("rule_id");
        m.reseal();
        assert_eq!(validate_message(&m), vec![Violation::MissingField("rule_id".into())]);

        let mut m = convert_legacy(ROW, &mapping()).unwrap();
        m.payload.insert("outcome".into(), Value::String("PASS".into()));
        assert_eq!(validate_message(&m), vec![Violation::ChecksumMismatch]);

        let mut m = convert_legacy(ROW, &mapping()).unwrap();
        m.schema_version = 9;
        assert!(matches!(validate_message(&m)[..], [Violation::UnknownVersion { .. }]));
    }

    #[test]
    fn byte_flip_breaks_checksum() {
        let json = convert_legacy(ROW, &mapping()).unwrap().to_canonical_json();
        let flipped = json.replacen("capital_adequacy", "capital_adequacz", 1);
        assert_eq!(validate_bytes(flipped.as_bytes()), vec![Violation::ChecksumMismatch]);
        assert!(validate_bytes(json.as_bytes()).is_empty());
        assert!(matches!(validate_bytes(b"\xff\x00{")[..], [Violation::Malformed(_)]));
    }

    #[test]
    fn upgrades() {
        let v1 = convert_legacy(ROW, &mapping()).unwrap();
        let v2 = upgrade_message(&v1, 2).unwrap();
        assert!(validate_message(&v2).is_empty());
        assert_eq!(v2.payload["jurisdiction"], Value::String("GLOBAL".into()));
        assert_eq!(upgrade_message(&v2, 2).unwrap(), v2);
        assert_eq!(
            upgrade_message(&v2, 1),
            Err(InteropError::UnsupportedDowngrade { from: 2, to: 1 })
        );
        assert_eq!(upgrade_message(&v1, 3), Err(InteropError::UnknownVersion(3)));
    }

    #[test]
    fn transaction_upgrade_drops_legacy_ref() {
        let map = LegacyMapping {
            msg_type: MsgType::TransactionData,
            schema_version: 1,
            delimiter: ';',
            columns: ["tx_id", "amount", "currency", "legacy_ref"].map(String::from).to_vec(),
            header: false,
        };
        let v1 = convert_legacy("tx-1;100.25;EUR;OLD/77", &map).unwrap();
        let v2 = upgrade_message(&v1, 2).unwrap();
        assert!(!v2.payload.contains_key("legacy_ref"));
        assert_eq!(v2.payload["settlement_date"], Value::String("1970-01-01".into()));
        assert!(validate_message(&v2).is_empty());
    }

    #[test]
    fn mapping_must_cover_schema() {
        let mut m = mapping();
        m.columns.pop();
        assert!(matches!(m.check(), Err(InteropError::InvalidMapping(_))));
    }

    #[test]
    fn date_and_number_checks() {
        assert!(is_date("2024-02-29") && !is_date("2023-02-29") && !is_date("2024-2-9"));
        assert!(is_decimal("0.5") && is_decimal("-12") && !is_decimal("01") && !is_decimal("1.") && !is_decimal(""));
        assert!(is_canonical_int("0") && !is_canonical_int("-0") && !is_canonical_int("+1"));
    }
}
