//! Seeded stand-ins for the VRF, the key-evolving signature scheme and the
//! random oracle.
//!
//! Verification goes through a [`KeyRegistry`] that holds every registered
//! secret, in the style of an ideal functionality: a tuple verifies only if
//! recomputing it from the registered secret reproduces it exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::types::{Digest, PartyId, Slot};

pub const TEST: &[u8] = b"TEST";
pub const NONCE: &[u8] = b"NONCE";
pub const DEFAULT_L_VRF: u32 = 32;

/// Random-oracle digest of a byte string.
pub fn ro_hash(input: &[u8]) -> Digest {
    Digest(Sha256::digest(input).into())
}

/// Hash of several fields, each length-prefixed so concatenations can't collide.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// VRF input `nonce || slot || tag`.
pub fn vrf_input(nonce: &Digest, sl: Slot, tag: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(32 + 8 + tag.len());
    v.extend_from_slice(nonce.as_bytes());
    v.extend_from_slice(&sl.to_be_bytes());
    v.extend_from_slice(tag);
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrfKeypair {
    secret: Digest,
    pub public: Digest,
}

impl VrfKeypair {
    pub fn from_seed(seed: &[u8]) -> Self {
        let secret = hash_parts(&[b"vrf-sk", seed]);
        let public = hash_parts(&[b"vrf-pk", secret.as_bytes()]);
        Self { secret, public }
    }

    /// Deterministic keys for a party in a seeded run.
    pub fn derive(run_seed: u64, party: PartyId) -> Self {
        let mut s = run_seed.to_be_bytes().to_vec();
        s.extend_from_slice(&party.to_be_bytes());
        Self::from_seed(&s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrfOutput {
    pub y: u64,
    pub proof: Digest,
}

fn vrf_compute(secret: &Digest, input: &[u8], l_vrf: u32) -> VrfOutput {
    let proof = hash_parts(&[b"vrf-proof", secret.as_bytes(), input]);
    let out = hash_parts(&[b"vrf-out", proof.as_bytes()]);
    let y = if l_vrf >= 64 {
        out.prefix_u64()
    } else {
        out.prefix_u64() >> (64 - l_vrf)
    };
    VrfOutput { y, proof }
}

/// Evaluates the VRF; `y` is uniform over `[0, 2^l_vrf)`.
pub fn vrf_eval(key: &VrfKeypair, input: &[u8], l_vrf: u32) -> VrfOutput {
    vrf_compute(&key.secret, input, l_vrf)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KesError {
    #[error("forward-security violation: slot {slot} is below current period {period}")]
    ForwardSecurity { slot: Slot, period: Slot },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KesKey {
    secret: Digest,
    pub public: Digest,
    period: Slot,
}

impl KesKey {
    pub fn from_seed(seed: &[u8]) -> Self {
        let secret = hash_parts(&[b"kes-sk", seed]);
        let public = hash_parts(&[b"kes-pk", secret.as_bytes()]);
        Self {
            secret,
            public,
            period: 0,
        }
    }

    pub fn derive(run_seed: u64, party: PartyId) -> Self {
        let mut s = run_seed.to_be_bytes().to_vec();
        s.extend_from_slice(&party.to_be_bytes());
        Self::from_seed(&s)
    }

    pub fn current_period(&self) -> Slot {
        self.period
    }

    /// Signs `message` for `slot`; the key can no longer sign earlier slots.
    pub fn sign(&mut self, message: &[u8], slot: Slot) -> Result<Digest, KesError> {
        self.check(slot)?;
        self.period = slot;
        Ok(kes_compute(&self.secret, message, slot))
    }

    /// Evolves past `slot` without producing a signature.
    pub fn evolve(&mut self, slot: Slot) -> Result<(), KesError> {
        self.check(slot)?;
        self.period = slot + 1;
        Ok(())
    }

    fn check(&self, slot: Slot) -> Result<(), KesError> {
        if slot < self.period {
            Err(KesError::ForwardSecurity {
                slot,
                period: self.period,
            })
        } else {
            Ok(())
        }
    }
}

fn kes_compute(secret: &Digest, message: &[u8], slot: Slot) -> Digest {
    hash_parts(&[b"kes-sig", secret.as_bytes(), &slot.to_be_bytes(), message])
}

/// Ideal-functionality registry used for verification.
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    vrf: BTreeMap<Digest, Digest>,
    kes: BTreeMap<Digest, Digest>,
    pub l_vrf: u32,
}

impl KeyRegistry {
    pub fn new(l_vrf: u32) -> Self {
        Self {
            vrf: BTreeMap::new(),
            kes: BTreeMap::new(),
            l_vrf,
        }
    }

    pub fn register_vrf(&mut self, key: &VrfKeypair) {
        self.vrf.insert(key.public, key.secret);
    }

    pub fn register_kes(&mut self, key: &KesKey) {
        self.kes.insert(key.public, key.secret);
    }

    pub fn vrf_verify(&self, public: &Digest, input: &[u8], y: u64, proof: &Digest) -> bool {
        match self.vrf.get(public) {
            Some(sk) => {
                let out = vrf_compute(sk, input, self.l_vrf);
                out.y == y && out.proof == *proof
            }
            None => false,
        }
    }

    pub fn kes_verify(&self, public: &Digest, message: &[u8], slot: Slot, sig: &Digest) -> bool {
        match self.kes.get(public) {
            Some(sk) => kes_compute(sk, message, slot) == *sig,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry_with(v: &VrfKeypair, k: &KesKey) -> KeyRegistry {
        let mut r = KeyRegistry::new(DEFAULT_L_VRF);
        r.register_vrf(v);
        r.register_kes(k);
        r
    }

    #[test]
    fn vrf_is_deterministic_and_verifies() {
        let v = VrfKeypair::derive(1, 2);
        let k = KesKey::derive(1, 2);
        let reg = registry_with(&v, &k);
        let input = vrf_input(&Digest::default(), 5, TEST);
        let a = vrf_eval(&v, &input, 32);
        let b = vrf_eval(&v, &input, 32);
        assert_eq!(a, b);
        assert!(a.y < 1u64 << 32);
        assert!(reg.vrf_verify(&v.public, &input, a.y, &a.proof));
    }

    #[test]
    fn vrf_rejects_tampering_and_wrong_key() {
        let v = VrfKeypair::derive(1, 2);
        let other = VrfKeypair::derive(1, 3);
        let k = KesKey::derive(1, 2);
        let mut reg = registry_with(&v, &k);
        reg.register_vrf(&other);
        let input = vrf_input(&Digest::default(), 5, TEST);
        let out = vrf_eval(&v, &input, 32);
        assert!(!reg.vrf_verify(&v.public, &input, out.y ^ 1, &out.proof));
        assert!(!reg.vrf_verify(&other.public, &input, out.y, &out.proof));
        let other_input = vrf_input(&Digest::default(), 6, TEST);
        assert!(!reg.vrf_verify(&v.public, &other_input, out.y, &out.proof));
    }

    #[test]
    fn vrf_output_is_uniform() {
        let v = VrfKeypair::derive(42, 0);
        let n = 100_000u64;
        let mut sum = 0.0;
        for sl in 0..n {
            let out = vrf_eval(&v, &vrf_input(&Digest::default(), sl, TEST), 32);
            sum += out.y as f64 / (1u64 << 32) as f64;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn kes_forward_security() {
        let mut k = KesKey::derive(3, 1);
        k.sign(b"block", 5).unwrap();
        assert_eq!(
            k.sign(b"older", 4),
            Err(KesError::ForwardSecurity { slot: 4, period: 5 })
        );
        k.evolve(5).unwrap();
        assert_eq!(k.current_period(), 6);
        assert!(k.sign(b"again", 5).is_err());
    }

    #[test]
    fn kes_verify_contract() {
        let v = VrfKeypair::derive(3, 1);
        let mut k = KesKey::derive(3, 1);
        let reg = registry_with(&v, &k);
        let public = k.public;
        let sig = k.sign(b"msg", 7).unwrap();
        assert!(reg.kes_verify(&public, b"msg", 7, &sig));
        assert!(!reg.kes_verify(&public, b"msh", 7, &sig));
        assert!(!reg.kes_verify(&public, b"msg", 8, &sig));
    }

    #[test]
    fn ro_hash_is_fixed_length_and_deterministic() {
        assert_eq!(ro_hash(b"x"), ro_hash(b"x"));
        assert_ne!(ro_hash(b"x"), ro_hash(b"y"));
        assert_eq!(ro_hash(b"").as_bytes().len(), Digest::LEN);
    }
}
