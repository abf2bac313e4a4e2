use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::compliance::{ComplianceError, MetricValue, Metrics};
use crate::scalar::{format_rational, parse_rational};
use crate::types::{RiskTier, RuleDomain};
use crate::Rational;

pub const MAX_DEPTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "number")]
    Number,
    #[serde(rename = "bool")]
    Bool,
}

/// Declared metric names and their value kinds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCatalog(pub BTreeMap<String, MetricKind>);

impl Default for MetricCatalog {
    fn default() -> Self {
        MetricCatalog(
            [
                ("capital_ratio", MetricKind::Number),
                ("data_privacy_consent", MetricKind::Bool),
                ("model_bias_metric", MetricKind::Number),
                ("audit_trail_complete", MetricKind::Bool),
            ]
            .into_iter()
            .map(|(n, k)| (n.to_string(), k))
            .collect(),
        )
    }
}

impl MetricCatalog {
    pub fn kind(&self, name: &str) -> Option<MetricKind> {
        self.0.get(name).copied()
    }

    pub fn declare(&mut self, name: &str, kind: MetricKind) {
        self.0.insert(name.to_string(), kind);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CmpOp {
    fn apply<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

/// Comparison constant. Numbers are exact decimals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    Number(Rational),
    Bool(bool),
}

#[derive(Serialize, Deserialize)]
enum ThresholdRepr {
    Number(String),
    Bool(bool),
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match (self, s.is_human_readable()) {
            (Threshold::Bool(b), true) => s.serialize_bool(*b),
            (Threshold::Number(r), true) => s.serialize_str(&format_rational(r)),
            (Threshold::Bool(b), false) => ThresholdRepr::Bool(*b).serialize(s),
            (Threshold::Number(r), false) => ThresholdRepr::Number(format_rational(r)).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        if !d.is_human_readable() {
            return match ThresholdRepr::deserialize(d)? {
                ThresholdRepr::Bool(b) => Ok(Threshold::Bool(b)),
                ThresholdRepr::Number(s) => parse_rational(&s)
                    .map(Threshold::Number)
                    .map_err(D::Error::custom),
            };
        }
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(b) => Ok(Threshold::Bool(b)),
            serde_json::Value::String(s) => parse_rational(&s)
                .map(Threshold::Number)
                .map_err(D::Error::custom),
            serde_json::Value::Number(n) => parse_rational(&n.to_string())
                .map(Threshold::Number)
                .map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("invalid threshold {other}"))),
        }
    }
}

/// Structured predicate over named metrics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Cmp {
        metric: String,
        op: CmpOp,
        value: Threshold,
    },
    And(Vec<Condition>),
    Or(Vec<Condition>),
    Not(Box<Condition>),
}

impl Condition {
    pub fn cmp(metric: &str, op: CmpOp, value: Threshold) -> Self {
        Condition::Cmp {
            metric: metric.to_string(),
            op,
            value,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Condition::Cmp { .. } => 1,
            Condition::And(cs) | Condition::Or(cs) => {
                1 + cs.iter().map(Condition::depth).max().unwrap_or(0)
            }
            Condition::Not(c) => 1 + c.depth(),
        }
    }

    pub fn metrics(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Condition::Cmp { metric, .. } => {
                out.insert(metric);
            }
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.collect(out)),
            Condition::Not(c) => c.collect(out),
        }
    }

    pub fn validate(&self, catalog: &MetricCatalog) -> Result<(), String> {
        if self.depth() > MAX_DEPTH {
            return Err(format!("condition depth {} exceeds {MAX_DEPTH}", self.depth()));
        }
        self.check(catalog)
    }

    fn check(&self, catalog: &MetricCatalog) -> Result<(), String> {
        match self {
            Condition::Cmp { metric, op, value } => match (catalog.kind(metric), value) {
                (None, _) => Err(format!("undeclared metric {metric:?}")),
                (Some(MetricKind::Number), Threshold::Number(_)) => Ok(()),
                (Some(MetricKind::Bool), Threshold::Bool(_))
                    if matches!(op, CmpOp::Eq | CmpOp::Ne) =>
                {
                    Ok(())
                }
                (Some(kind), _) => Err(format!("{metric:?} is {kind:?}, cannot compare {op:?} {value:?}")),
            },
            Condition::And(cs) | Condition::Or(cs) => {
                if cs.is_empty() {
                    return Err("empty AND/OR".into());
                }
                cs.iter().try_for_each(|c| c.check(catalog))
            }
            Condition::Not(c) => c.check(catalog),
        }
    }

    /// Evaluates against `metrics`; every referenced metric must be present.
    pub fn eval(&self, metrics: &Metrics) -> Result<bool, ComplianceError> {
        match self {
            Condition::Cmp { metric, op, value } => {
                let got = metrics
                    .get(metric)
                    .ok_or_else(|| ComplianceError::MissingInput(metric.clone()))?;
                match (got, value) {
                    (MetricValue::Number(x), Threshold::Number(t)) => {
                        Ok(op.apply(&number_to_rational(metric, *x)?, t))
                    }
                    (MetricValue::Bool(b), Threshold::Bool(t)) => Ok(op.apply(b, t)),
                    _ => Err(ComplianceError::TypeMismatch(metric.clone())),
                }
            }
            Condition::And(cs) => {
                let mut all = true;
                for c in cs {
                    all &= c.eval(metrics)?;
                }
                Ok(all)
            }
            Condition::Or(cs) => {
                let mut any = false;
                for c in cs {
                    any |= c.eval(metrics)?;
                }
                Ok(any)
            }
            Condition::Not(c) => Ok(!c.eval(metrics)?),
        }
    }
}

/// Exact value of the shortest decimal that round-trips `x`.
pub fn number_to_rational(metric: &str, x: f64) -> Result<Rational, ComplianceError> {
    if !x.is_finite() {
        return Err(ComplianceError::TypeMismatch(metric.to_string()));
    }
    parse_rational(&format!("{x}")).map_err(|_| ComplianceError::TypeMismatch(metric.to_string()))
}

fn default_weight() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceRuleModule {
    pub rule_id: String,
    pub domain: RuleDomain,
    /// Assigned by the registry on registration.
    #[serde(default)]
    pub version: u32,
    pub predicate: Condition,
    pub mandatory: bool,
    pub applicable_tiers: BTreeSet<RiskTier>,
    #[serde(default = "default_weight")]
    pub weight: u32,
}

impl ComplianceRuleModule {
    pub fn validate(&self, catalog: &MetricCatalog) -> Result<(), ComplianceError> {
        if self.rule_id.is_empty() {
            return Err(ComplianceError::InvalidRule("empty rule_id".into()));
        }
        if self.weight == 0 {
            return Err(ComplianceError::InvalidRule(format!("{}: weight must be positive", self.rule_id)));
        }
        self.predicate
            .validate(catalog)
            .map_err(|e| ComplianceError::InvalidRule(format!("{}: {e}", self.rule_id)))
    }

    pub fn applies_to(&self, tier: RiskTier) -> bool {
        self.applicable_tiers.contains(&tier)
    }

    /// Same content ignoring the version number.
    pub fn same_content(&self, other: &ComplianceRuleModule) -> bool {
        ComplianceRuleModule { version: 0, ..self.clone() }
            == ComplianceRuleModule { version: 0, ..other.clone() }
    }
}

impl fmt::Display for ComplianceRuleModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@v{}", self.rule_id, self.version)
    }
}

/// The four-rule standard pack: capital ratio, consent, bias and audit trail.
pub fn standard_rule_pack() -> Vec<ComplianceRuleModule> {
    use RiskTier::{High, Limited};
    let tiers = |ts: &[RiskTier]| ts.iter().copied().collect::<BTreeSet<_>>();
    let rule = |id: &str, domain, predicate, ts: &[RiskTier]| ComplianceRuleModule {
        rule_id: id.to_string(),
        domain,
        version: 0,
        predicate,
        mandatory: true,
        applicable_tiers: tiers(ts),
        weight: 1,
    };
    vec![
        rule(
            "capital_adequacy",
            RuleDomain::CapitalAdequacy,
            Condition::cmp("capital_ratio", CmpOp::Ge, Threshold::Number(Rational::new(8, 100))),
            &[High],
        ),
        rule(
            "data_privacy_consent",
            RuleDomain::DataPrivacy,
            Condition::cmp("data_privacy_consent", CmpOp::Eq, Threshold::Bool(true)),
            &[High, Limited],
        ),
        rule(
            "model_bias",
            RuleDomain::RiskAssessment,
            Condition::cmp("model_bias_metric", CmpOp::Le, Threshold::Number(Rational::new(1, 5))),
            &[High, Limited],
        ),
        rule(
            "audit_trail",
            RuleDomain::Transparency,
            Condition::cmp("audit_trail_complete", CmpOp::Eq, Threshold::Bool(true)),
            &[High],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(pairs: &[(&str, MetricValue)]) -> Metrics {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn json_shape_round_trips() {
        let json = r#"{"rule_id":"capital_adequacy","domain":"CAPITAL_ADEQUACY","mandatory":true,
            "applicable_tiers":["HIGH"],
            "predicate":{"and":[{"cmp":{"metric":"capital_ratio","op":">=","value":0.08}},
                                {"not":{"cmp":{"metric":"audit_trail_complete","op":"==","value":false}}}]}}"#;
        let rule: ComplianceRuleModule = serde_json::from_str(json).unwrap();
        assert_eq!(rule.weight, 1);
        assert_eq!(rule.predicate.depth(), 3);
        let back: ComplianceRuleModule =
            serde_json::from_str(&serde_json::to_string(&rule).unwrap()).unwrap();
        assert_eq!(back, rule);
        let bin = crate::codec::encode_body(&rule);
        assert_eq!(crate::codec::decode_body::<ComplianceRuleModule>(&bin).unwrap(), rule);
    }

    #[test]
    fn decimal_boundaries_are_exact() {
        let c = Condition::cmp("model_bias_metric", CmpOp::Le, Threshold::Number(Rational::new(1, 5)));
        assert!(c.eval(&metrics(&[("model_bias_metric", MetricValue::Number(0.2))])).unwrap());
        assert!(!c.eval(&metrics(&[("model_bias_metric", MetricValue::Number(0.2000001))])).unwrap());
        let c = Condition::cmp("capital_ratio", CmpOp::Ge, Threshold::Number(Rational::new(8, 100)));
        assert!(c.eval(&metrics(&[("capital_ratio", MetricValue::Number(0.08))])).unwrap());
        assert!(!c.eval(&metrics(&[("capital_ratio", MetricValue::Number(0.07))])).unwrap());
    }

    #[test]
    fn validation_rejects_bad_trees() {
        let cat = MetricCatalog::default();
        let undeclared = Condition::cmp("vibes", CmpOp::Ge, Threshold::Number(Rational::new(1, 2)));
        assert!(undeclared.validate(&cat).is_err());
        let wrong_type = Condition::cmp("capital_ratio", CmpOp::Eq, Threshold::Bool(true));
        assert!(wrong_type.validate(&cat).is_err());
        let ordered_bool = Condition::cmp("audit_trail_complete", CmpOp::Ge, Threshold::Bool(true));
        assert!(ordered_bool.validate(&cat).is_err());
        let mut deep = Condition::cmp("capital_ratio", CmpOp::Ge, Threshold::Number(Rational::new(0, 1)));
        for _ in 0..15 {
            deep = Condition::Not(Box::new(deep));
        }
        assert_eq!(deep.depth(), 16);
        assert!(deep.validate(&cat).is_ok());
        assert!(Condition::Not(Box::new(deep)).validate(&cat).is_err());
        assert!(Condition::And(vec![]).validate(&cat).is_err());
    }

    #[test]
    fn missing_metric_is_named() {
        let c = Condition::cmp("capital_ratio", CmpOp::Ge, Threshold::Number(Rational::new(8, 100)));
        assert!(matches!(
            c.eval(&Metrics::new()),
            Err(ComplianceError::MissingInput(m)) if m == "capital_ratio"
        ));
    }

    #[test]
    fn standard_pack_validates() {
        let cat = MetricCatalog::default();
        for r in standard_rule_pack() {
            r.validate(&cat).unwrap();
        }
    }
}
