//! Risk scoring, tier reclassification, EWMA compliance forecasting and the
//! incident-response state machine.

use std::collections::BTreeMap;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{IdentityError, IdentityRegistry};
use crate::ledger::{
    DidChange, EventBody, EventSink, IncidentAdvancedBody, IncidentRaisedBody,
    MitigationSource, MitigationTriggeredBody, RiskAssessedBody, RiskReclassifiedBody,
};
use crate::scalar::{rational_to_f64, Scalar};
use crate::types::{ComplianceStatus, IncidentState, Principal, RiskTier, Severity};
use crate::{Rational, RiskWeights};

const ACTOR: &str = "protocol:risk";
const PRINCIPAL: Principal = Principal::Protocol("risk");

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("risk input out of range: {0}")]
    InvalidInput(String),
    #[error("forecast needs at least one observation")]
    InsufficientHistory,
    #[error("incident {0} already filed its postmortem")]
    TerminalState(u64),
    #[error("unknown incident {0}")]
    UnknownIncident(u64),
    #[error("system {0} is not tracked")]
    UnknownSystem(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

/// Term weights of the score and the incident saturation count.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreWeights<T> {
    pub noncompliance: T,
    pub audit_failure: T,
    pub incidents: T,
    pub exposure: T,
    pub incident_cap: u32,
}

impl<T: Scalar> Default for ScoreWeights<T> {
    fn default() -> Self {
        ScoreWeights {
            noncompliance: T::ratio(1, 2),
            audit_failure: T::ratio(1, 5),
            incidents: T::ratio(1, 5),
            exposure: T::ratio(1, 10),
            incident_cap: 3,
        }
    }
}

/// Per-epoch inputs of one system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskInputs<T> {
    /// Compliance aggregate in [0, 1].
    pub aggregate: T,
    pub audit_failed: bool,
    pub open_incidents: u32,
    /// Exposure weight in [0, 1].
    pub exposure: T,
}

/// `clamp01(wc(1-a) + wf f + wi min(i,cap)/cap + ww w)`.
pub fn compute_risk_score<T: Scalar>(
    inputs: &RiskInputs<T>,
    weights: &ScoreWeights<T>,
) -> Result<T, RiskError> {
    let unit = |v: T| v >= T::zero() && v <= T::one();
    if !unit(inputs.aggregate) {
        return Err(RiskError::InvalidInput(format!("aggregate {:?}", inputs.aggregate)));
    }
    if !unit(inputs.exposure) {
        return Err(RiskError::InvalidInput(format!("exposure {:?}", inputs.exposure)));
    }
    let f = if inputs.audit_failed { T::one() } else { T::zero() };
    let cap = weights.incident_cap.max(1) as u64;
    let i = T::from_count((inputs.open_incidents as u64).min(cap)) / T::from_count(cap);
    let score = weights.noncompliance * (T::one() - inputs.aggregate)
        + weights.audit_failure * f
        + weights.incidents * i
        + weights.exposure * inputs.exposure;
    Ok(score.clamp_unit())
}

/// Lower score bounds of the UNACCEPTABLE, HIGH and LIMITED tiers.
#[derive(Clone, Debug, PartialEq)]
pub struct TierThresholds<T> {
    pub unacceptable: T,
    pub high: T,
    pub limited: T,
}

impl<T: Scalar> Default for TierThresholds<T> {
    fn default() -> Self {
        TierThresholds {
            unacceptable: T::ratio(9, 10),
            high: T::ratio(3, 5),
            limited: T::ratio(3, 10),
        }
    }
}

pub fn tier_for_score<T: Scalar>(score: T, t: &TierThresholds<T>) -> RiskTier {
    if score >= t.unacceptable {
        RiskTier::Unacceptable
    } else if score >= t.high {
        RiskTier::High
    } else if score >= t.limited {
        RiskTier::Limited
    } else {
        RiskTier::Minimal
    }
}

/// EWMA with `s_1 = x_1`; returns `(s_T, s_T < flag_below)`.
pub fn forecast_compliance<F: Float>(
    history: &[F],
    alpha: F,
    flag_below: F,
) -> Result<(F, bool), RiskError> {
    let (first, rest) = history.split_first().ok_or(RiskError::InsufficientHistory)?;
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(RiskError::InvalidInput("alpha must lie in (0, 1)".into()));
    }
    let s = rest
        .iter()
        .fold(*first, |s, x| alpha * *x + (F::one() - alpha) * s);
    Ok((s, s < flag_below))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    #[serde(with = "crate::scalar::serde_rational")]
    pub w_noncompliance: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub w_audit_failure: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub w_incidents: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub w_exposure: Rational,
    pub alpha: f64,
    pub flag_below: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        let w = RiskWeights::default();
        RiskConfig {
            w_noncompliance: w.noncompliance,
            w_audit_failure: w.audit_failure,
            w_incidents: w.incidents,
            w_exposure: w.exposure,
            alpha: 0.3,
            flag_below: 0.7,
        }
    }
}

impl RiskConfig {
    pub fn weights(&self) -> RiskWeights {
        ScoreWeights {
            noncompliance: self.w_noncompliance,
            audit_failure: self.w_audit_failure,
            incidents: self.w_incidents,
            exposure: self.w_exposure,
            incident_cap: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSample {
    pub epoch: u64,
    #[serde(with = "crate::scalar::serde_rational")]
    pub score: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub aggregate: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub system_did: String,
    /// Tier declared at registration; reclassification never goes below it.
    pub base_tier: RiskTier,
    pub tier: RiskTier,
    pub history: Vec<RiskSample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskOutcome {
    pub score: Rational,
    pub tier: RiskTier,
    pub reclassified: Option<(RiskTier, RiskTier)>,
    pub forecast: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub incident_id: u64,
    pub system_did: String,
    pub severity: Severity,
    pub state: IncidentState,
    /// Epoch at which each state was entered.
    pub transitions: Vec<(IncidentState, u64)>,
}

impl Incident {
    pub fn is_open(&self) -> bool {
        matches!(self.state, IncidentState::Raised | IncidentState::Contained)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RiskEngine {
    config: RiskConfig,
    weights: RiskWeights,
    thresholds: TierThresholds<Rational>,
    profiles: BTreeMap<String, RiskProfile>,
    incidents: BTreeMap<u64, Incident>,
}

impl RiskEngine {
    pub fn new(config: RiskConfig) -> Self {
        RiskEngine {
            weights: config.weights(),
            config,
            thresholds: TierThresholds::default(),
            profiles: BTreeMap::new(),
            incidents: BTreeMap::new(),
        }
    }

    pub fn track(&mut self, did: &str, base_tier: RiskTier) {
        self.profiles.insert(
            did.to_string(),
            RiskProfile {
                system_did: did.to_string(),
                base_tier,
                tier: base_tier,
                history: Vec::new(),
            },
        );
    }

    pub fn profile(&self, did: &str) -> Option<&RiskProfile> {
        self.profiles.get(did)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &RiskProfile> {
        self.profiles.values()
    }

    pub fn incidents(&self) -> impl Iterator<Item = &Incident> {
        self.incidents.values()
    }

    pub fn open_incidents(&self, did: &str) -> u32 {
        self.incidents
            .values()
            .filter(|i| i.system_did == did && i.is_open())
            .count() as u32
    }

    fn critical_open(&self, did: &str) -> bool {
        self.incidents
            .values()
            .any(|i| i.system_did == did && i.severity == Severity::Critical && i.is_open())
    }

    /// Scores one system, forecasts its compliance trend and writes any tier
    /// change through to the identity registry.
    pub fn assess(
        &mut self,
        did: &str,
        aggregate: Rational,
        audit_failed: bool,
        exposure: Rational,
        epoch: u64,
        identity: &mut IdentityRegistry,
        sink: &mut dyn EventSink,
    ) -> Result<RiskOutcome, RiskError> {
        let open = self.open_incidents(did);
        let inputs = RiskInputs {
            aggregate,
            audit_failed,
            open_incidents: open,
            exposure,
        };
        let score = compute_risk_score(&inputs, &self.weights)?;
        let profile = self
            .profiles
            .get_mut(did)
            .ok_or_else(|| RiskError::UnknownSystem(did.to_string()))?;
        profile.history.push(RiskSample {
            epoch,
            score,
            aggregate,
        });
        let series: Vec<f64> = profile
            .history
            .iter()
            .map(|s| rational_to_f64(&s.aggregate))
            .collect();
        let (forecast, flagged) =
            forecast_compliance(&series, self.config.alpha, self.config.flag_below)?;
        let tier = RiskTier::riskier(profile.base_tier, tier_for_score(score, &self.thresholds));
        let from = profile.tier;
        profile.tier = tier;
        sink.emit(
            ACTOR,
            EventBody::from(RiskAssessedBody {
                did: did.to_string(),
                score,
                forecast,
                flagged,
            }),
        );
        if flagged {
            sink.emit(
                ACTOR,
                EventBody::from(MitigationTriggeredBody {
                    did: did.to_string(),
                    source: MitigationSource::Forecast,
                }),
            );
        }
        let mut reclassified = None;
        if tier != from {
            sink.emit(
                ACTOR,
                EventBody::from(RiskReclassifiedBody {
                    did: did.to_string(),
                    from,
                    to: tier,
                    score,
                }),
            );
            identity.update_did(did, DidChange::RiskTier(tier), &PRINCIPAL, None, sink)?;
            reclassified = Some((from, tier));
            if tier == RiskTier::Unacceptable {
                set_status(identity, did, ComplianceStatus::Suspended, sink)?;
            } else if from == RiskTier::Unacceptable && !self.critical_open(did) {
                set_status(identity, did, ComplianceStatus::UnderReview, sink)?;
            }
        }
        Ok(RiskOutcome {
            score,
            tier,
            reclassified,
            forecast,
            flagged,
        })
    }

    pub fn raise_incident(
        &mut self,
        did: &str,
        severity: Severity,
        epoch: u64,
        identity: &mut IdentityRegistry,
        sink: &mut dyn EventSink,
    ) -> Result<Incident, RiskError> {
        if identity.get(did).is_none() {
            return Err(RiskError::UnknownSystem(did.to_string()));
        }
        let incident_id = self.incidents.len() as u64 + 1;
        let incident = Incident {
            incident_id,
            system_did: did.to_string(),
            severity,
            state: IncidentState::Raised,
            transitions: vec![(IncidentState::Raised, epoch)],
        };
        sink.emit(
            ACTOR,
            EventBody::from(IncidentRaisedBody {
                incident_id,
                did: did.to_string(),
                severity,
            }),
        );
        self.incidents.insert(incident_id, incident.clone());
        if severity == Severity::Critical {
            set_status(identity, did, ComplianceStatus::Suspended, sink)?;
        }
        Ok(incident)
    }

    pub fn advance_incident(
        &mut self,
        incident_id: u64,
        epoch: u64,
        identity: &mut IdentityRegistry,
        sink: &mut dyn EventSink,
    ) -> Result<IncidentState, RiskError> {
        let incident = self
            .incidents
            .get_mut(&incident_id)
            .ok_or(RiskError::UnknownIncident(incident_id))?;
        let from = incident.state;
        let to = from.next().ok_or(RiskError::TerminalState(incident_id))?;
        incident.state = to;
        incident.transitions.push((to, epoch));
        let did = incident.system_did.clone();
        let severity = incident.severity;
        sink.emit(
            ACTOR,
            EventBody::from(IncidentAdvancedBody {
                incident_id,
                did: did.clone(),
                from,
                to,
            }),
        );
        let suspended = identity
            .get(&did)
            .is_some_and(|r| r.compliance_status == ComplianceStatus::Suspended);
        let tier_ok = self.profiles.get(&did).is_none_or(|p| p.tier != RiskTier::Unacceptable);
        if to == IncidentState::Resolved
            && severity == Severity::Critical
            && suspended
            && tier_ok
            && !self.critical_open(&did)
        {
            set_status(identity, &did, ComplianceStatus::UnderReview, sink)?;
        }
        Ok(to)
    }

    /// Advances every non-terminal incident by one step.
    pub fn advance_all(
        &mut self,
        epoch: u64,
        identity: &mut IdentityRegistry,
        sink: &mut dyn EventSink,
    ) -> Result<(), RiskError> {
        let raised_now: Vec<u64> = self
            .incidents
            .values()
            .filter(|i| i.state != IncidentState::PostmortemFiled)
            .filter(|i| i.transitions.last().is_some_and(|(_, e)| *e < epoch))
            .map(|i| i.incident_id)
            .collect();
        for id in raised_now {
            self.advance_incident(id, epoch, identity, sink)?;
        }
        Ok(())
    }
}

fn set_status(
    identity: &mut IdentityRegistry,
    did: &str,
    status: ComplianceStatus,
    sink: &mut dyn EventSink,
) -> Result<(), RiskError> {
    if identity.get(did).map(|r| r.compliance_status) != Some(status) {
        identity.update_did(did, DidChange::Status(status), &PRINCIPAL, None, sink)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::EventKind;
    use num_traits::{One, Zero};

    type Sink = Vec<(String, EventBody)>;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn score(a: Rational, f: bool, i: u32, w: Rational) -> Rational {
        compute_risk_score(
            &RiskInputs {
                aggregate: a,
                audit_failed: f,
                open_incidents: i,
                exposure: w,
            },
            &RiskWeights::default(),
        )
        .unwrap()
    }

    #[test]
    fn score_examples() {
        let t = TierThresholds::default();
        let best = score(Rational::one(), false, 0, Rational::zero());
        assert_eq!(best, Rational::zero());
        assert_eq!(tier_for_score(best, &t), RiskTier::Minimal);
        let worst = score(Rational::zero(), true, 7, Rational::one());
        assert_eq!(worst, Rational::one());
        assert_eq!(tier_for_score(worst, &t), RiskTier::Unacceptable);
        // 1/4 + 0 + 1/15 + 3/100 = 104/300.
        let mid = score(r(1, 2), false, 1, r(3, 10));
        assert_eq!(mid, r(26, 75));
        assert_eq!(tier_for_score(mid, &t), RiskTier::Limited);
    }

    #[test]
    fn score_rejects_out_of_range() {
        assert!(matches!(
            compute_risk_score(
                &RiskInputs {
                    aggregate: r(3, 2),
                    audit_failed: false,
                    open_incidents: 0,
                    exposure: Rational::zero()
                },
                &RiskWeights::default()
            ),
            Err(RiskError::InvalidInput(_))
        ));
    }

    #[test]
    fn score_kernel_runs_over_f64() {
        let s = compute_risk_score(
            &RiskInputs {
                aggregate: 0.5,
                audit_failed: false,
                open_incidents: 1,
                exposure: 0.3,
            },
            &ScoreWeights::<f64>::default(),
        )
        .unwrap();
        assert!((s - 0.346_666_666_666_666_7).abs() < 1e-12);
    }

    #[test]
    fn tier_boundaries() {
        let t = TierThresholds::default();
        assert_eq!(tier_for_score(r(9, 10), &t), RiskTier::Unacceptable);
        assert_eq!(tier_for_score(r(3, 5), &t), RiskTier::High);
        assert_eq!(tier_for_score(r(3, 10), &t), RiskTier::Limited);
        assert_eq!(tier_for_score(r(29, 100), &t), RiskTier::Minimal);
    }

    #[test]
    fn ewma_examples() {
        assert_eq!(forecast_compliance(&[0.9, 0.9, 0.9], 0.3, 0.7).unwrap().1, false);
        let (f, flagged) = forecast_compliance(&[1.0, 0.5], 0.3, 0.7).unwrap();
        assert!((f - 0.85).abs() < 1e-15 && !flagged);
        assert!(forecast_compliance(&[0.6, 0.6, 0.6], 0.3, 0.7).unwrap().1);
        assert!(matches!(
            forecast_compliance::<f64>(&[], 0.3, 0.7),
            Err(RiskError::InsufficientHistory)
        ));
    }

    fn registry_with(tier: RiskTier) -> (IdentityRegistry, String) {
        let mut reg = IdentityRegistry::default();
        let did = reg
            .register_did(b"k", "scoring", tier, "bank", true, &mut Sink::new())
            .unwrap();
        (reg, did)
    }

    #[test]
    fn reclassification_writes_through() {
        let (mut reg, did) = registry_with(RiskTier::Limited);
        let mut eng = RiskEngine::new(RiskConfig::default());
        eng.track(&did, RiskTier::Limited);
        let mut sink = Sink::new();
        let out = eng
            .assess(&did, Rational::zero(), true, Rational::zero(), 1, &mut reg, &mut sink)
            .unwrap();
        // 0.5 + 0.2 = 0.7 -> HIGH.
        assert_eq!(out.reclassified, Some((RiskTier::Limited, RiskTier::High)));
        assert_eq!(reg.get(&did).unwrap().risk_tier, RiskTier::High);
        let kinds: Vec<_> = sink.iter().map(|(_, b)| b.kind()).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::RiskAssessed,
                EventKind::MitigationTriggered,
                EventKind::RiskReclassified,
                EventKind::AccessLogged,
                EventKind::DidUpdated
            ]
        );
        sink.clear();
        let out = eng
            .assess(&did, Rational::one(), false, Rational::zero(), 2, &mut reg, &mut sink)
            .unwrap();
        assert_eq!(out.reclassified, Some((RiskTier::High, RiskTier::Limited)));
    }

    #[test]
    fn incident_lifecycle() {
        let (mut reg, did) = registry_with(RiskTier::High);
        let mut eng = RiskEngine::new(RiskConfig::default());
        eng.track(&did, RiskTier::High);
        let mut sink = Sink::new();
        let inc = eng
            .raise_incident(&did, Severity::Critical, 3, &mut reg, &mut sink)
            .unwrap();
        assert_eq!(reg.get(&did).unwrap().compliance_status, ComplianceStatus::Suspended);
        assert_eq!(eng.open_incidents(&did), 1);
        let states: Vec<_> = (0..3)
            .map(|k| eng.advance_incident(inc.incident_id, 4 + k, &mut reg, &mut sink).unwrap())
            .collect();
        assert_eq!(
            states,
            vec![IncidentState::Contained, IncidentState::Resolved, IncidentState::PostmortemFiled]
        );
        assert_eq!(reg.get(&did).unwrap().compliance_status, ComplianceStatus::UnderReview);
        assert!(matches!(
            eng.advance_incident(inc.incident_id, 9, &mut reg, &mut sink),
            Err(RiskError::TerminalState(_))
        ));
    }

    #[test]
    fn advance_all_skips_same_epoch_raises() {
        let (mut reg, did) = registry_with(RiskTier::High);
        let mut eng = RiskEngine::new(RiskConfig::default());
        let mut sink = Sink::new();
        eng.raise_incident(&did, Severity::Low, 3, &mut reg, &mut sink).unwrap();
        eng.advance_all(3, &mut reg, &mut sink).unwrap();
        assert_eq!(eng.incidents().next().unwrap().state, IncidentState::Raised);
        eng.advance_all(4, &mut reg, &mut sink).unwrap();
        assert_eq!(eng.incidents().next().unwrap().state, IncidentState::Contained);
    }
}
