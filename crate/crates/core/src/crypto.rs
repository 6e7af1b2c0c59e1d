//! Signatures, emulated threshold signatures and hashing.
//!
//! Two modes share one interface. `Real` signs with Ed25519. `Fast` uses a keyed SHA-256
//! tag whose verification needs the signer's secret; it is only honest against the
//! protocols in this crate (which never read other processes' secrets), not against an
//! actual adversary. Hashing is SHA-256 in both modes.
//!
//! A threshold signature is a canonical set of `k` valid partial signatures over one
//! digest. Metrics count it as a single word.

use std::fmt;
use std::sync::Arc;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::validity::{ProcessId, SystemParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CryptoMode {
    Real,
    #[default]
    Fast,
}

/// SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex()[..16])
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

pub fn hash(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

/// Incremental, unambiguous encoding of structured data into a digest.
///
/// Every field is length- or width-prefixed, so distinct field sequences never share an
/// encoding.
#[derive(Clone, Default)]
pub struct DigestWriter(Sha256);

impl DigestWriter {
    pub fn new(domain: &str) -> Self {
        let mut w = DigestWriter(Sha256::new());
        w.write_str(domain);
        w
    }

    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write_bytes(s.as_bytes())
    }

    pub fn write_bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn write_u64(&mut self, x: u64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn write_i64(&mut self, x: i64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn write_digest(&mut self, d: &Digest) -> &mut Self {
        self.0.update(d.0);
        self
    }

    pub fn finish(self) -> Digest {
        Digest(self.0.finalize().into())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub signer: ProcessId,
    pub bytes: [u8; 64],
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.bytes[..4].iter().map(|b| format!("{b:02x}")).collect();
        write!(f, "Sig({}, {hex}..)", self.signer)
    }
}

#[derive(Clone)]
enum Secret {
    Ed(SigningKey),
    Tag([u8; 32]),
}

/// Verification material of one process.
#[derive(Clone)]
pub enum PublicKey {
    Ed(ProcessId, VerifyingKey),
    /// Fast mode: verification recomputes the tag, so it holds the secret.
    Tag(ProcessId, [u8; 32]),
}

impl PublicKey {
    pub fn process(&self) -> ProcessId {
        match self {
            PublicKey::Ed(p, _) | PublicKey::Tag(p, _) => *p,
        }
    }
}

#[derive(Clone)]
pub struct KeyPair {
    pub process: ProcessId,
    secret: Secret,
    pub public: PublicKey,
}

impl KeyPair {
    fn generate(process: ProcessId, mode: CryptoMode, rng: &mut ChaCha8Rng) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        match mode {
            CryptoMode::Real => {
                let sk = SigningKey::from_bytes(&seed);
                let vk = sk.verifying_key();
                KeyPair { process, secret: Secret::Ed(sk), public: PublicKey::Ed(process, vk) }
            }
            CryptoMode::Fast => KeyPair { process, secret: Secret::Tag(seed), public: PublicKey::Tag(process, seed) },
        }
    }
}

fn tag(secret: &[u8; 32], m: &[u8]) -> [u8; 64] {
    let inner = Sha256::digest(m);
    let outer = Sha256::new().chain_update(secret).chain_update(inner).finalize();
    let mut out = [0u8; 64];
    out[..32].copy_from_slice(&outer);
    out
}

pub fn sign(m: &[u8], key: &KeyPair) -> Signature {
    let bytes = match &key.secret {
        Secret::Ed(sk) => sk.sign(m).to_bytes(),
        Secret::Tag(s) => tag(s, m),
    };
    Signature { signer: key.process, bytes }
}

pub fn verify_sig(m: &[u8], sig: &Signature, public: &PublicKey) -> bool {
    if sig.signer != public.process() {
        return false;
    }
    match public {
        PublicKey::Ed(_, vk) => vk.verify(m, &ed25519_dalek::Signature::from_bytes(&sig.bytes)).is_ok(),
        PublicKey::Tag(_, s) => tag(s, m) == sig.bytes,
    }
}

/// One process's share towards a threshold signature over `digest`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PartialSignature {
    pub digest: Digest,
    pub sig: Signature,
}

impl PartialSignature {
    pub fn signer(&self) -> ProcessId {
        self.sig.signer
    }
}

/// `k` partial signatures from distinct signers over one digest, sorted by signer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThresholdSignature {
    pub digest: Digest,
    pub k: usize,
    partials: Vec<Signature>,
}

impl ThresholdSignature {
    pub fn signers(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.partials.iter().map(|s| s.signer)
    }

    /// Replaces the share of `signer`; for tests that tamper with certificates.
    pub fn with_substituted(&self, replacement: Signature) -> Self {
        let mut out = self.clone();
        if let Some(s) = out.partials.iter_mut().find(|s| s.signer == replacement.signer) {
            *s = replacement;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("insufficient partial signatures: {got} < {need}")]
    InsufficientPartials { got: usize, need: usize },
    #[error("partial signatures over different digests")]
    MixedDigests,
    #[error("duplicate partial signature from {0}")]
    DuplicateSigner(ProcessId),
    #[error("invalid partial signature from {0}")]
    InvalidPartial(ProcessId),
}

fn partial_message(d: &Digest) -> [u8; 40] {
    let mut m = [0u8; 40];
    m[..8].copy_from_slice(b"PARTIAL\0");
    m[8..].copy_from_slice(&d.0);
    m
}

/// All key material of a run, derived from the scenario seed.
#[derive(Clone)]
pub struct Keyring {
    mode: CryptoMode,
    threshold: usize,
    keys: Arc<Vec<KeyPair>>,
}

impl fmt::Debug for Keyring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Keyring({:?}, n={}, k={})", self.mode, self.keys.len(), self.threshold)
    }
}

impl Keyring {
    /// Keys for processes `1..=n`; threshold `k = n - t`.
    pub fn generate(params: SystemParams, mode: CryptoMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7972_696e_6700);
        let keys = params.processes().map(|p| KeyPair::generate(p, mode, &mut rng)).collect();
        Keyring { mode, threshold: params.quorum(), keys: Arc::new(keys) }
    }

    pub fn mode(&self) -> CryptoMode {
        self.mode
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn n(&self) -> usize {
        self.keys.len()
    }

    pub fn key(&self, p: ProcessId) -> &KeyPair {
        &self.keys[p.index()]
    }

    pub fn public(&self, p: ProcessId) -> Option<&PublicKey> {
        if p.0 == 0 {
            return None;
        }
        self.keys.get(p.index()).map(|k| &k.public)
    }

    pub fn sign(&self, p: ProcessId, m: &[u8]) -> Signature {
        sign(m, self.key(p))
    }

    pub fn verify(&self, m: &[u8], sig: &Signature) -> bool {
        self.public(sig.signer).is_some_and(|pk| verify_sig(m, sig, pk))
    }

    pub fn sign_partial(&self, p: ProcessId, d: Digest) -> PartialSignature {
        PartialSignature { digest: d, sig: self.sign(p, &partial_message(&d)) }
    }

    pub fn verify_partial(&self, part: &PartialSignature) -> bool {
        self.verify(&partial_message(&part.digest), &part.sig)
    }

    /// Combines at least `k` valid partials from distinct signers over one digest. The
    /// result keeps the `k` lowest signers.
    pub fn combine(&self, partials: &[PartialSignature]) -> Result<ThresholdSignature, CryptoError> {
        let need = self.threshold;
        if partials.len() < need {
            return Err(CryptoError::InsufficientPartials { got: partials.len(), need });
        }
        let digest = partials[0].digest;
        if partials.iter().any(|p| p.digest != digest) {
            return Err(CryptoError::MixedDigests);
        }
        let mut sigs: Vec<Signature> = partials.iter().map(|p| p.sig).collect();
        sigs.sort_by_key(|s| s.signer);
        if let Some(w) = sigs.windows(2).find(|w| w[0].signer == w[1].signer) {
            return Err(CryptoError::DuplicateSigner(w[0].signer));
        }
        if let Some(bad) = partials.iter().find(|p| !self.verify_partial(p)) {
            return Err(CryptoError::InvalidPartial(bad.signer()));
        }
        sigs.truncate(need);
        Ok(ThresholdSignature { digest, k: need, partials: sigs })
    }

    /// True iff `tsig` attests `n - t` distinct valid signers over `d`.
    pub fn verify_threshold(&self, d: &Digest, tsig: &ThresholdSignature) -> bool {
        if tsig.digest != *d || tsig.k != self.threshold || tsig.partials.len() != self.threshold {
            return false;
        }
        let m = partial_message(d);
        tsig.partials.windows(2).all(|w| w[0].signer < w[1].signer)
            && tsig.partials.iter().all(|s| self.verify(&m, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(mode: CryptoMode) -> Keyring {
        Keyring::generate(SystemParams::new(4, 1).unwrap(), mode, 7)
    }

    fn p(i: u32) -> ProcessId {
        ProcessId(i)
    }

    #[test]
    fn sign_verify_both_modes() {
        for mode in [CryptoMode::Real, CryptoMode::Fast] {
            let r = ring(mode);
            let s = r.sign(p(2), b"hello");
            assert!(verify_sig(b"hello", &s, &r.key(p(2)).public));
            assert!(!verify_sig(b"hellp", &s, &r.key(p(2)).public));
            assert!(!verify_sig(b"hello", &s, &r.key(p(3)).public));
            let mut forged = s;
            forged.signer = p(3);
            assert!(!r.verify(b"hello", &forged));
            forged.signer = ProcessId(9);
            assert!(!r.verify(b"hello", &forged));
        }
    }

    #[test]
    fn keyring_is_seed_deterministic() {
        let a = Keyring::generate(SystemParams::new(4, 1).unwrap(), CryptoMode::Real, 1);
        let b = Keyring::generate(SystemParams::new(4, 1).unwrap(), CryptoMode::Real, 1);
        let c = Keyring::generate(SystemParams::new(4, 1).unwrap(), CryptoMode::Real, 2);
        assert_eq!(a.sign(p(1), b"m"), b.sign(p(1), b"m"));
        assert_ne!(a.sign(p(1), b"m"), c.sign(p(1), b"m"));
    }

    #[test]
    fn threshold_combine_and_verify() {
        for mode in [CryptoMode::Real, CryptoMode::Fast] {
            let r = ring(mode);
            let d = hash(b"vector");
            let d2 = hash(b"other");
            let parts: Vec<_> = (1..=3).map(|i| r.sign_partial(p(i), d)).collect();
            let ts = r.combine(&parts).unwrap();
            assert!(r.verify_threshold(&d, &ts));
            assert!(!r.verify_threshold(&d2, &ts));

            assert_eq!(
                r.combine(&parts[..2]),
                Err(CryptoError::InsufficientPartials { got: 2, need: 3 })
            );
            let mixed = vec![parts[0], parts[1], r.sign_partial(p(3), d2)];
            assert_eq!(r.combine(&mixed), Err(CryptoError::MixedDigests));
            let dup = vec![parts[0], parts[1], parts[1]];
            assert_eq!(r.combine(&dup), Err(CryptoError::DuplicateSigner(p(2))));
            let mut bad = parts.clone();
            bad[2].sig.bytes[0] ^= 1;
            assert_eq!(r.combine(&bad), Err(CryptoError::InvalidPartial(p(3))));

            let forged = Signature { signer: p(2), bytes: [7; 64] };
            assert!(!r.verify_threshold(&d, &ts.with_substituted(forged)));

            // four partials combine to the canonical lowest three
            let four: Vec<_> = (1..=4).rev().map(|i| r.sign_partial(p(i), d)).collect();
            assert_eq!(r.combine(&four).unwrap(), ts);
        }
    }

    #[test]
    fn empty_digest_golden() {
        // SHA-256 of the empty string, computed independently (hashlib)
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn digest_writer_is_unambiguous() {
        let enc = |parts: &[&str]| {
            let mut w = DigestWriter::new("x");
            for s in parts {
                w.write_str(s);
            }
            w.finish()
        };
        assert_ne!(enc(&["ab", "c"]), enc(&["a", "bc"]));
        assert_eq!(enc(&["ab", "c"]), enc(&["ab", "c"]));
    }
}
