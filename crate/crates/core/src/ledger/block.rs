use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::Digest;
use crate::ledger::event::{EventKind, GovernanceEvent};

/// A sealed batch of events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub events: Vec<GovernanceEvent>,
    pub sealer_signatures: Vec<(String, Vec<u8>)>,
    pub block_hash: Digest,
}

/// Canonical bytes of an event list: `u32` count, then each event.
pub fn encode_events(events: &[GovernanceEvent]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.u32(events.len() as u32);
    for ev in events {
        ev.encode_into(&mut e);
    }
    e.finish()
}

/// `SHA-256(height || prev_hash || canonical event bytes)`.
pub fn compute_block_hash(height: u64, prev_hash: &Digest, events: &[GovernanceEvent]) -> Digest {
    let mut e = Encoder::new();
    e.raw(b"govsim/block").u64(height).digest(prev_hash);
    e.raw(&encode_events(events));
    Digest::of(&e.finish())
}

impl Block {
    pub fn recompute_hash(&self) -> Digest {
        compute_block_hash(self.height, &self.prev_hash, &self.events)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.height).digest(&self.prev_hash);
        e.raw(&encode_events(&self.events));
        e.digest(&self.block_hash);
        e.u32(self.sealer_signatures.len() as u32);
        for (id, sig) in &self.sealer_signatures {
            e.str(id).bytes(sig);
        }
        e.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Block, DecodeError> {
        let mut d = Decoder::new(bytes);
        let height = d.u64()?;
        let prev_hash = d.digest()?;
        let n = d.u32()? as usize;
        let mut events = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let event_id = d.u64()?;
            let code = d.u8()?;
            let kind = EventKind::from_code(code)
                .ok_or_else(|| DecodeError::Invalid(format!("unknown event kind code {code}")))?;
            let epoch = d.u64()?;
            let actor = d.str()?;
            let payload = d.bytes()?.to_vec();
            events.push(GovernanceEvent {
                event_id,
                kind,
                epoch,
                payload,
                actor,
            });
        }
        let block_hash = d.digest()?;
        let s = d.u32()? as usize;
        let mut sealer_signatures = Vec::with_capacity(s.min(256));
        for _ in 0..s {
            let id = d.str()?;
            let sig = d.bytes()?.to_vec();
            sealer_signatures.push((id, sig));
        }
        d.finish()?;
        Ok(Block {
            height,
            prev_hash,
            events,
            sealer_signatures,
            block_hash,
        })
    }
}
