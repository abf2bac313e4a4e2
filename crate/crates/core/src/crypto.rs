//! Digests and the authority signature schemes.

use std::fmt;

use ed25519_dalek::{Signer as _, Verifier as _};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

/// 256-bit SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(data: &[u8]) -> Digest {
        Digest(Sha256::digest(data).into())
    }

    /// Digest over several byte slices, each length-prefixed.
    pub fn of_parts(parts: &[&[u8]]) -> Digest {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u32).to_le_bytes());
            h.update(p);
        }
        Digest(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let bytes = hex::decode(s).ok()?;
        Some(Digest(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&self.to_hex())
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let s = String::deserialize(d)?;
            Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
        } else {
            Ok(Digest(<[u8; 32]>::deserialize(d)?))
        }
    }
}

/// Signature scheme used by sealing authorities.
///
/// `SeededHash` is a desk-scale stand-in: the "public" key equals the secret
/// and a signature is `SHA-256(secret || message)`. It is deterministic and
/// fast, and offers no security against anyone holding the chain file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureScheme {
    #[default]
    Ed25519,
    SeededHash,
}

/// Signing half of an authority keypair.
#[derive(Clone)]
pub struct KeyPair {
    scheme: SignatureScheme,
    secret: [u8; 32],
    public: Vec<u8>,
}

impl KeyPair {
    /// Derives a keypair deterministically from arbitrary seed material.
    pub fn from_seed(scheme: SignatureScheme, seed: &[u8]) -> KeyPair {
        let secret = Digest::of_parts(&[b"govsim/authority-key", seed]).0;
        let public = match scheme {
            SignatureScheme::Ed25519 => ed25519_dalek::SigningKey::from_bytes(&secret)
                .verifying_key()
                .to_bytes()
                .to_vec(),
            SignatureScheme::SeededHash => secret.to_vec(),
        };
        KeyPair {
            scheme,
            secret,
            public,
        }
    }

    pub fn scheme(&self) -> SignatureScheme {
        self.scheme
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        match self.scheme {
            SignatureScheme::Ed25519 => ed25519_dalek::SigningKey::from_bytes(&self.secret)
                .sign(message)
                .to_bytes()
                .to_vec(),
            SignatureScheme::SeededHash => Digest::of_parts(&[&self.secret, message]).0.to_vec(),
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("scheme", &self.scheme)
            .field("public", &hex::encode(&self.public))
            .finish_non_exhaustive()
    }
}

pub fn verify_signature(
    scheme: SignatureScheme,
    public_key: &[u8],
    message: &[u8],
    signature: &[u8],
) -> bool {
    match scheme {
        SignatureScheme::Ed25519 => {
            let Ok(pk_bytes) = <[u8; 32]>::try_from(public_key) else {
                return false;
            };
            let Ok(sig_bytes) = <[u8; 64]>::try_from(signature) else {
                return false;
            };
            let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
                return false;
            };
            vk.verify(message, &ed25519_dalek::Signature::from_bytes(&sig_bytes))
                .is_ok()
        }
        SignatureScheme::SeededHash => {
            signature == Digest::of_parts(&[public_key, message]).0.as_slice()
        }
    }
}
