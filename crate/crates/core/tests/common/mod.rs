//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use govsim_core::governance::{Governance, GovernanceConfig};
use govsim_core::ledger::{Account, Block, EventBody, TransferReason};
use govsim_core::tokens::{PoolFractions, TokenLedger};
use govsim_core::types::{Pool, Role};
use govsim_core::Weights;
use govsim_core::sim::Scenario;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub type Sink = Vec<(String, EventBody)>;

pub const CREDIT: &str = include_str!("../../fixtures/scenarios/credit_scoring.json");
pub const COLLUSION: &str = include_str!("../../fixtures/scenarios/collusion_attack.json");
pub const REGULATION: &str = include_str!("../../fixtures/scenarios/regulation_shift.json");

pub fn scenario(text: &str) -> Scenario {
    Scenario::from_json(text).expect("fixture parses")
}

pub fn bodies(blocks: &[Block]) -> Vec<(u64, String, EventBody)> {
    blocks
        .iter()
        .flat_map(|b| &b.events)
        .map(|e| (e.epoch, e.actor.clone(), e.body().expect("sealed payloads decode")))
        .collect()
}

/// Random stakeholders, systems and violations over `epochs` epochs.
pub fn random_world_scenario(r: &mut ChaCha8Rng, epochs: u64) -> Scenario {
    let roles = ["REGULATOR", "BANK", "FINTECH", "DEVELOPER"];
    let n = r.gen_range(4..=9);
    let mut stakeholders: Vec<Value> = (0..n)
        .map(|i| {
            let grant = r.gen_range(100_000..5_000_000u64);
            json!({
                "id": format!("s{i}"),
                "role": roles[i % roles.len()],
                "grant": grant,
                "stake": r.gen_range(0..grant / 2),
                "lock_epochs": r.gen_range(1..=12),
            })
        })
        .collect();
    for a in ["aud-1", "aud-2"] {
        stakeholders.push(json!({"id": a, "role": "AUDITOR", "grant": 200_000, "stake": 50_000}));
    }
    let tiers = ["HIGH", "LIMITED", "MINIMAL"];
    let systems: Vec<Value> = (0..r.gen_range(1..=3))
        .map(|k| {
            json!({
                "name": format!("sys-{k}"),
                "owner": format!("s{}", 1 + k % 2),
                "purpose": "random workload",
                "risk_tier": tiers[r.gen_range(0..3)],
                "exposure": format!("{}/10", r.gen_range(0..=10)),
                "metrics": {
                    "capital_ratio": r.gen_range(0.06..0.2),
                    "data_privacy_consent": r.gen_bool(0.9),
                    "model_bias_metric": r.gen_range(0.0..0.25),
                    "audit_trail_complete": r.gen_bool(0.9),
                },
            })
        })
        .collect();
    let violations: Vec<Value> = (0..r.gen_range(0..6))
        .map(|_| {
            json!({"epoch": r.gen_range(1..=epochs), "event": {
                "type": "VIOLATION", "system": "sys-0",
                "metrics": {"capital_ratio": 0.01}, "duration": r.gen_range(1..4)}})
        })
        .collect();
    let all = ["CAPITAL_ADEQUACY", "DATA_PRIVACY", "RISK_ASSESSMENT", "TRANSPARENCY"];
    let doc = json!({
        "name": "random",
        "seed": r.gen::<u64>(),
        "epochs": epochs,
        "stakeholders": stakeholders,
        "ai_systems": systems,
        "accreditors": ["board"],
        "auditors": [
            {"id": "aud-1", "body": "board", "scopes": all},
            {"id": "aud-2", "body": "board", "scopes": all},
        ],
        "injected_events": violations,
        "config": {"activity": {
            "token_ops_per_epoch": r.gen_range(10..16),
            "proposals_per_epoch": r.gen_range(0..2),
            "access_checks_per_epoch": 1,
        }},
    });
    Scenario::from_json(&doc.to_string()).expect("generated scenario is valid")
}

/// Governance and token state seeded with `(id, role, stake)` members.
pub struct World {
    pub gov: Governance,
    pub tokens: TokenLedger,
    pub sink: Sink,
}

pub fn world(members: &[(String, Role, u64)]) -> World {
    let mut tokens = TokenLedger::mint_genesis(1 << 50, &PoolFractions::default()).unwrap();
    let mut gov = Governance::new(Weights::default(), GovernanceConfig::default()).unwrap();
    let mut sink = Sink::new();
    for (id, role, stake) in members {
        tokens.open_account(id);
        gov.add_stakeholder(id, *role).unwrap();
        let grant = stake + 1_000_000;
        tokens
            .transfer(
                &Account::Pool(Pool::Development),
                &Account::Holder(id.clone()),
                grant,
                TransferReason::Grant,
                "test",
                &mut sink,
            )
            .unwrap();
        if *stake > 0 {
            tokens.stake(id, *stake, 4, 0, &mut sink).unwrap();
        }
    }
    gov.sync_stakes(&tokens);
    World { gov, tokens, sink }
}
