//! Blocks, chains, genesis data, stake distributions, validation and chain
//! selection.

mod fold;
mod select;
mod stake;
mod validate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::{ro_hash, VrfOutput};
use crate::types::{Digest, PartyId, Slot, Tick};

pub use fold::{
    adjust_round_length, AdjustOutcome, ChainParams, EpochInfo, PrefixState, WindowSummary,
};
pub use select::{fork_index, maxvalid_bg, maxvalid_mc};
pub use stake::{phi, threshold, ParamError, StakeDistribution};
pub use validate::{
    check_chain, is_valid_chain, update_stake_dist, ChainValidator, InvalidChain, StakeDistError,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeHolder {
    pub id: PartyId,
    pub vrf_key: Digest,
    pub kes_key: Digest,
    pub stake: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisBlock {
    pub stakeholders: Vec<StakeHolder>,
    pub nonce: Digest,
    pub t_start: Tick,
    pub t_round_1: Tick,
}

impl GenesisBlock {
    pub fn hash(&self) -> Digest {
        ro_hash(canonical_json(self).as_bytes())
    }

    pub fn holder(&self, id: PartyId) -> Option<&StakeHolder> {
        self.stakeholders.iter().find(|h| h.id == id)
    }

    pub fn distribution(&self) -> StakeDistribution {
        StakeDistribution::from_pairs(self.stakeholders.iter().map(|h| (h.id, h.stake)))
    }
}

/// Stake transfer; the only transaction semantics the simulator interprets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tx {
    pub from: PartyId,
    pub to: PartyId,
    pub amount: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub hash: Digest,
    pub slot: Slot,
    pub t_now: Tick,
}

/// Round-delay measurement `(B_last, T_recv, P, y, pi)`; `slot` is the
/// leadership slot the VRF proof belongs to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AdjustRecord {
    pub last: Option<BlockRef>,
    pub recv: Option<Tick>,
    pub party: PartyId,
    pub slot: Slot,
    pub y: u64,
    pub proof: Digest,
}

impl AdjustRecord {
    pub fn is_complete(&self) -> bool {
        self.last.is_some() && self.recv.is_some()
    }

    /// Both-or-neither invariant on `last` and `recv`.
    pub fn is_well_formed(&self) -> bool {
        self.last.is_some() == self.recv.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedAdjust {
    pub record: AdjustRecord,
    /// Arrival tick of the record at the embedding leader.
    pub t_adj: Tick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderCert {
    pub party: PartyId,
    pub y: u64,
    pub proof: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockBody {
    pub prev: Digest,
    pub txs: Vec<Tx>,
    pub slot: Slot,
    pub t_now: Tick,
    pub crt: LeaderCert,
    pub rho: VrfOutput,
    pub adjusts: Vec<EmbeddedAdjust>,
}

impl BlockBody {
    pub fn signing_bytes(&self) -> Vec<u8> {
        canonical_json(self).into_bytes()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub body: BlockBody,
    pub sig: Digest,
}

/// A block with its hash computed once at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBlock {
    pub block: Block,
    pub hash: Digest,
}

impl SealedBlock {
    pub fn seal(block: Block) -> Self {
        let hash = ro_hash(canonical_json(&block).as_bytes());
        Self { block, hash }
    }

    pub fn slot(&self) -> Slot {
        self.block.body.slot
    }

    pub fn t_now(&self) -> Tick {
        self.block.body.t_now
    }

    pub fn creator(&self) -> PartyId {
        self.block.body.crt.party
    }

    pub fn body(&self) -> &BlockBody {
        &self.block.body
    }

    pub fn block_ref(&self) -> BlockRef {
        BlockRef {
            hash: self.hash,
            slot: self.slot(),
            t_now: self.t_now(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub genesis: Arc<GenesisBlock>,
    genesis_hash: Digest,
    blocks: Vec<Arc<SealedBlock>>,
}

impl PartialEq for Chain {
    fn eq(&self, other: &Self) -> bool {
        self.genesis_hash == other.genesis_hash
            && self.blocks.len() == other.blocks.len()
            && self.head_hash() == other.head_hash()
    }
}

impl Eq for Chain {}

impl Chain {
    pub fn new(genesis: Arc<GenesisBlock>) -> Self {
        let genesis_hash = genesis.hash();
        Self {
            genesis,
            genesis_hash,
            blocks: Vec::new(),
        }
    }

    pub fn genesis_hash(&self) -> Digest {
        self.genesis_hash
    }

    pub fn blocks(&self) -> &[Arc<SealedBlock>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head(&self) -> Option<&Arc<SealedBlock>> {
        self.blocks.last()
    }

    pub fn head_hash(&self) -> Digest {
        self.head().map_or(self.genesis_hash, |b| b.hash)
    }

    pub fn head_slot(&self) -> Slot {
        self.head().map_or(0, |b| b.slot())
    }

    pub fn push(&mut self, b: Arc<SealedBlock>) {
        self.blocks.push(b);
    }

    /// Chain with the last `k` blocks removed.
    pub fn truncated(&self, k: usize) -> Chain {
        let keep = self.blocks.len().saturating_sub(k);
        Chain {
            genesis: self.genesis.clone(),
            genesis_hash: self.genesis_hash,
            blocks: self.blocks[..keep].to_vec(),
        }
    }

    /// Blocks with slot below `slot`.
    pub fn prefix_before_slot(&self, slot: Slot) -> Chain {
        let keep = self.blocks.partition_point(|b| b.slot() < slot);
        self.truncated(self.blocks.len() - keep)
    }

    /// Whether a block with this slot and hash lies on the chain.
    pub fn contains(&self, slot: Slot, hash: &Digest) -> bool {
        match self.blocks.binary_search_by_key(&slot, |b| b.slot()) {
            Ok(i) => self.blocks[i].hash == *hash,
            Err(_) => false,
        }
    }

    /// Number of blocks with slot in `[lo, hi]`.
    pub fn count_in_slots(&self, lo: Slot, hi: Slot) -> usize {
        if hi < lo {
            return 0;
        }
        let a = self.blocks.partition_point(|b| b.slot() < lo);
        let b = self.blocks.partition_point(|b| b.slot() <= hi);
        b - a
    }

    pub fn is_prefix_of(&self, other: &Chain) -> bool {
        self.genesis_hash == other.genesis_hash
            && self.blocks.len() <= other.blocks.len()
            && self.blocks.last().is_none_or(|h| other.blocks[self.blocks.len() - 1].hash == h.hash)
    }

    /// Concatenated transaction payload.
    pub fn payload_state(&self) -> Vec<Tx> {
        self.blocks.iter().flat_map(|b| b.body().txs.iter().copied()).collect()
    }

    pub fn to_serializable(&self) -> SerializedChain {
        SerializedChain {
            genesis: (*self.genesis).clone(),
            blocks: self.blocks.iter().map(|b| b.block.clone()).collect(),
        }
    }

    pub fn from_serializable(s: SerializedChain) -> Chain {
        let mut c = Chain::new(Arc::new(s.genesis));
        for b in s.blocks {
            c.push(Arc::new(SealedBlock::seal(b)));
        }
        c
    }

    pub fn canonical_json(&self) -> String {
        canonical_json(&self.to_serializable())
    }

    pub fn digest(&self) -> Digest {
        ro_hash(self.canonical_json().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedChain {
    pub genesis: GenesisBlock,
    pub blocks: Vec<Block>,
}

/// JSON with object keys sorted, so equal values serialize identically.
pub fn canonical_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable value");
    serde_json::to_string(&value).expect("json value")
}

#[cfg(test)]
pub(crate) mod testutil;
