//! Vector consensus: processes agree on `n - t` process-proposal pairs whose correct
//! entries are genuine proposals.
//!
//! Three variants share the [`VectorContext`]: [`AuthVector`] (signed proposals and
//! provable consensus), [`NonAuthVector`] (reliable broadcast and one binary consensus per
//! process) and [`LowCommVector`] (vector dissemination, provable consensus on a certified
//! digest, then data dissemination of the preimage).

mod add;
mod auth;
mod dissemination;
mod lowcomm;
mod nonauth;

pub use add::{Add, AddNode, AddShare};
pub use auth::{AuthMsg, AuthVector};
pub use dissemination::{DisseminationMsg, DisseminationNode, Disseminator};
pub use lowcomm::{CertifiedDigest, LowCommMsg, LowCommTimer, LowCommVector};
pub use nonauth::{NonAuthMsg, NonAuthTimer, NonAuthVector};

use serde::{Deserialize, Serialize};

use crate::core_consensus::{BinaryBackend, ProvablePair};
use crate::crypto::{Digest, DigestWriter, Keyring, Signature};
use crate::simnet::{Tick, WordCost};
use crate::validity::{InputConfiguration, ProcessId, SystemParams, Value, ValueSpace};

/// Which vector consensus runs underneath.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorBackend {
    #[default]
    Auth,
    Nonauth,
    Lowcomm,
}

impl VectorBackend {
    pub const ALL: [VectorBackend; 3] = [VectorBackend::Auth, VectorBackend::Nonauth, VectorBackend::Lowcomm];

    pub fn name(self) -> &'static str {
        match self {
            VectorBackend::Auth => "auth",
            VectorBackend::Nonauth => "nonauth",
            VectorBackend::Lowcomm => "lowcomm",
        }
    }
}

impl std::fmt::Display for VectorBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for VectorBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        VectorBackend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown vector backend `{s}` (expected auth, nonauth or lowcomm)"))
    }
}

/// Everything a vector-consensus process knows before the run starts.
#[derive(Clone, Debug)]
pub struct VectorContext {
    pub params: SystemParams,
    pub space: ValueSpace,
    pub keyring: Keyring,
    pub delta: Tick,
    pub binary: BinaryBackend,
}

impl VectorContext {
    pub fn new(params: SystemParams, space: ValueSpace, keyring: Keyring, delta: Tick) -> Self {
        VectorContext { params, space, keyring, delta, binary: BinaryBackend::default() }
    }

    pub fn with_binary(mut self, binary: BinaryBackend) -> Self {
        self.binary = binary;
        self
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn t(&self) -> usize {
        self.params.t()
    }

    pub fn quorum(&self) -> usize {
        self.params.quorum()
    }

    /// A signed vector the caller may accept: `n - t` pairs of input values, each backed by
    /// its owner's signed proposal.
    pub fn valid_signed_vector(&self, sv: &SignedVector) -> bool {
        sv.vector.len() == self.quorum()
            && sv.vector.pairs().iter().all(|pp| pp.process.0 as usize <= self.n() && self.space.is_input(pp.value))
            && verify_vector_proof(&self.keyring, &sv.vector, &sv.proofs)
    }

    pub fn valid_proposal(&self, from: ProcessId, sp: &SignedProposal) -> bool {
        sp.process == from && self.space.is_input(sp.value) && sp.verify(&self.keyring)
    }
}

fn proposal_message(v: Value) -> [u8; 32] {
    let mut w = DigestWriter::new("PROPOSAL");
    w.write_i64(v.0);
    w.finish().0
}

/// `<PROPOSAL, v>` signed by its sender.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedProposal {
    pub process: ProcessId,
    pub value: Value,
    pub sig: Signature,
}

impl SignedProposal {
    pub fn sign(keyring: &Keyring, process: ProcessId, value: Value) -> Self {
        SignedProposal { process, value, sig: keyring.sign(process, &proposal_message(value)) }
    }

    pub fn verify(&self, keyring: &Keyring) -> bool {
        self.sig.signer == self.process && keyring.verify(&proposal_message(self.value), &self.sig)
    }

    pub fn cost(&self) -> WordCost {
        WordCost::values(1) + WordCost::signatures(1)
    }
}

/// True iff every pair `(P_j, v_j)` of `vector` is matched by a valid signed proposal of
/// `v_j` from `P_j` in `proofs`.
pub fn verify_vector_proof(keyring: &Keyring, vector: &InputConfiguration, proofs: &[SignedProposal]) -> bool {
    vector.pairs().iter().all(|pp| {
        proofs
            .iter()
            .any(|sp| sp.process == pp.process && sp.value == pp.value && sp.verify(keyring))
    })
}

/// Hash of a vector's pairs.
pub fn vector_digest(vector: &InputConfiguration) -> Digest {
    let mut w = DigestWriter::new("vector");
    w.write_u64(vector.len() as u64);
    for pp in vector.pairs() {
        w.write_u64(pp.process.0 as u64).write_i64(pp.value.0);
    }
    w.finish()
}

/// A vector with its proof set.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedVector {
    pub vector: InputConfiguration,
    pub proofs: Vec<SignedProposal>,
}

impl SignedVector {
    /// From received proposals, one per process.
    pub fn from_proposals<'a>(proposals: impl IntoIterator<Item = &'a SignedProposal>) -> Self {
        let mut proofs: Vec<SignedProposal> = proposals.into_iter().copied().collect();
        proofs.sort_by_key(|p| p.process);
        let vector = InputConfiguration::new(proofs.iter().map(|p| (p.process, p.value)))
            .expect("one proposal per process");
        SignedVector { vector, proofs }
    }
}

impl ProvablePair for SignedVector {
    fn digest(&self) -> Digest {
        vector_digest(&self.vector)
    }

    fn cost(&self) -> WordCost {
        WordCost::vector(self.vector.len() as u64) + WordCost::signatures(self.proofs.len() as u64)
    }
}

fn vector_json(v: &InputConfiguration) -> serde_json::Value {
    serde_json::Value::String(v.to_compact())
}
