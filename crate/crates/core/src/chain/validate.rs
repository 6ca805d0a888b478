use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::{
    threshold, AdjustRecord, Chain, ChainParams, EpochInfo, GenesisBlock, PrefixState, SealedBlock,
};
use crate::crypto::{vrf_input, KeyRegistry, NONCE, TEST};
use crate::types::{epoch_of, Digest, PartyId, Slot, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum InvalidChain {
    #[error("genesis block does not match")]
    GenesisMismatch,
    #[error("head block at slot {slot} has t_now {t_now} in the future")]
    FutureBlock { slot: Slot, t_now: Tick },
    #[error("slot {slot} does not increase")]
    NonIncreasingSlot { slot: Slot },
    #[error("previous-hash link broken at slot {slot}")]
    BrokenLink { slot: Slot },
    #[error("epoch {epoch} follows an epoch without blocks")]
    EmptyEpoch { epoch: u64 },
    #[error("t_now {t_now} outside the interval of slot {slot}")]
    BadTiming { slot: Slot, t_now: Tick },
    #[error("unknown leader {party} at slot {slot}")]
    UnknownLeader { slot: Slot, party: PartyId },
    #[error("invalid leader proof at slot {slot}")]
    BadLeaderProof { slot: Slot },
    #[error("invalid nonce proof at slot {slot}")]
    BadNonceProof { slot: Slot },
    #[error("invalid signature at slot {slot}")]
    BadSignature { slot: Slot },
    #[error("invalid adjust record at slot {slot}")]
    BadAdjust { slot: Slot },
    #[error("duplicate adjust record at slot {slot}")]
    DuplicateAdjust { slot: Slot },
    #[error("transaction overdraws at slot {slot}")]
    Overdraw { slot: Slot },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StakeDistError {
    #[error("chain head is in epoch {head_epoch}, epoch {needed} or later is required")]
    ChainTooShort { head_epoch: u64, needed: u64 },
}

fn leader_ok(
    registry: &KeyRegistry,
    g: &GenesisBlock,
    info: &EpochInfo,
    params: &ChainParams,
    party: PartyId,
    sl: Slot,
    y: u64,
    proof: &Digest,
) -> Result<bool, ()> {
    let holder = g.holder(party).ok_or(())?;
    if !registry.vrf_verify(&holder.vrf_key, &vrf_input(&info.nonce, sl, TEST), y, proof) {
        return Ok(false);
    }
    let t = threshold(params.f, info.dist.relative(party), params.l_vrf).map_err(|_| ())?;
    Ok((y as u128) < t)
}

impl PrefixState {
    /// Whether a block at slot `sl` extending this prefix may embed `r`.
    pub fn record_valid(
        &self,
        r: &AdjustRecord,
        sl: Slot,
        g: &GenesisBlock,
        params: &ChainParams,
        registry: &KeyRegistry,
    ) -> bool {
        if !r.is_complete() || r.slot == 0 || r.slot > sl {
            return false;
        }
        let info = self.epoch_info(epoch_of(r.slot, params.epoch_len), g, params);
        leader_ok(registry, g, &info, params, r.party, r.slot, r.y, &r.proof) == Ok(true)
    }

    /// Validates `b` as the next block of this prefix and absorbs it.
    /// `on_prefix` reports whether a record already appears in the prefix.
    pub(crate) fn step(
        &mut self,
        b: &SealedBlock,
        g: &GenesisBlock,
        params: &ChainParams,
        registry: &KeyRegistry,
        on_prefix: &dyn Fn(&AdjustRecord) -> bool,
    ) -> Result<(), InvalidChain> {
        let body = b.body();
        let sl = b.slot();
        if sl == 0 || (self.head.is_some() && sl <= self.head_slot()) {
            return Err(InvalidChain::NonIncreasingSlot { slot: sl });
        }
        if body.prev != self.head_hash(g) {
            return Err(InvalidChain::BrokenLink { slot: sl });
        }
        let ep = epoch_of(sl, params.epoch_len);
        let prev_ep = self.head.map_or(0, |h| epoch_of(h.slot, params.epoch_len));
        if ep > prev_ep + 1 {
            return Err(InvalidChain::EmptyEpoch { epoch: ep });
        }
        self.advance_to(ep, g, params);
        let info = self.epochs[ep as usize - 1].clone();
        let start = info.slot_start(sl, params.epoch_len);
        if b.t_now() < start || b.t_now() >= start + info.round {
            return Err(InvalidChain::BadTiming { slot: sl, t_now: b.t_now() });
        }

        let party = body.crt.party;
        let holder = g
            .holder(party)
            .ok_or(InvalidChain::UnknownLeader { slot: sl, party })?;
        match leader_ok(registry, g, &info, params, party, sl, body.crt.y, &body.crt.proof) {
            Ok(true) => {}
            _ => return Err(InvalidChain::BadLeaderProof { slot: sl }),
        }
        let nonce_in = vrf_input(&info.nonce, sl, NONCE);
        if !registry.vrf_verify(&holder.vrf_key, &nonce_in, body.rho.y, &body.rho.proof) {
            return Err(InvalidChain::BadNonceProof { slot: sl });
        }
        if !registry.kes_verify(&holder.kes_key, &body.signing_bytes(), sl, &b.block.sig) {
            return Err(InvalidChain::BadSignature { slot: sl });
        }

        let mut in_block = HashSet::new();
        for e in &body.adjusts {
            let r = &e.record;
            if !self.record_valid(r, sl, g, params, registry) {
                return Err(InvalidChain::BadAdjust { slot: sl });
            }
            if !in_block.insert(r) || on_prefix(r) {
                return Err(InvalidChain::DuplicateAdjust { slot: sl });
            }
        }

        let mut bal = self.balances.as_ref().clone();
        for tx in &body.txs {
            let from = bal.get(&tx.from).copied().unwrap_or(0);
            if from < tx.amount {
                return Err(InvalidChain::Overdraw { slot: sl });
            }
            bal.insert(tx.from, from - tx.amount);
            *bal.entry(tx.to).or_default() += tx.amount;
        }

        self.absorb(b, g, params);
        Ok(())
    }
}

/// Full validation of `chain` at local time `time`.
pub fn check_chain(
    chain: &Chain,
    genesis: &GenesisBlock,
    time: Tick,
    params: &ChainParams,
    registry: &KeyRegistry,
) -> Result<PrefixState, InvalidChain> {
    if chain.genesis_hash() != genesis.hash() {
        return Err(InvalidChain::GenesisMismatch);
    }
    if let Some(h) = chain.head() {
        if h.t_now() > time {
            return Err(InvalidChain::FutureBlock { slot: h.slot(), t_now: h.t_now() });
        }
    }
    let mut st = PrefixState::genesis(genesis);
    let mut seen: HashSet<AdjustRecord> = HashSet::new();
    for b in chain.blocks() {
        st.step(b, genesis, params, registry, &|r| seen.contains(r))?;
        seen.extend(b.body().adjusts.iter().map(|e| e.record.clone()));
    }
    Ok(st)
}

pub fn is_valid_chain(
    chain: &Chain,
    genesis: &GenesisBlock,
    time: Tick,
    params: &ChainParams,
    registry: &KeyRegistry,
) -> bool {
    check_chain(chain, genesis, time, params, registry).is_ok()
}

/// Epoch parameters (stake distribution, nonce, round length) that `chain`
/// determines for epoch `ep`.
pub fn update_stake_dist(
    chain: &Chain,
    ep: u64,
    params: &ChainParams,
) -> Result<Arc<EpochInfo>, StakeDistError> {
    let head_epoch = epoch_of(chain.head_slot(), params.epoch_len);
    if ep > 2 && head_epoch < ep - 2 {
        return Err(StakeDistError::ChainTooShort { head_epoch, needed: ep - 2 });
    }
    let g = &chain.genesis;
    let st = PrefixState::from_chain(&chain.prefix_before_slot(crate::types::first_slot_of(ep, params.epoch_len)), g, params);
    Ok(st.epoch_info(ep, g, params))
}

/// Validation cache keyed by block hash. A block's validity depends only on
/// its prefix, so each block is checked once across all candidate chains.
#[derive(Debug)]
pub struct ChainValidator {
    genesis: Arc<GenesisBlock>,
    genesis_hash: Digest,
    params: ChainParams,
    root: Arc<PrefixState>,
    states: HashMap<Digest, Arc<PrefixState>>,
    invalid: HashMap<Digest, InvalidChain>,
    records: HashMap<AdjustRecord, Vec<(Slot, Digest)>>,
}

impl ChainValidator {
    pub fn new(genesis: Arc<GenesisBlock>, params: ChainParams) -> Self {
        let genesis_hash = genesis.hash();
        let root = Arc::new(PrefixState::genesis(&genesis));
        Self {
            genesis,
            genesis_hash,
            params,
            root,
            states: HashMap::new(),
            invalid: HashMap::new(),
            records: HashMap::new(),
        }
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn genesis(&self) -> &Arc<GenesisBlock> {
        &self.genesis
    }

    pub fn cached_blocks(&self) -> usize {
        self.states.len()
    }

    pub fn check(
        &mut self,
        chain: &Chain,
        time: Tick,
        registry: &KeyRegistry,
    ) -> Result<Arc<PrefixState>, InvalidChain> {
        if chain.genesis_hash() != self.genesis_hash {
            return Err(InvalidChain::GenesisMismatch);
        }
        if let Some(h) = chain.head() {
            if h.t_now() > time {
                return Err(InvalidChain::FutureBlock { slot: h.slot(), t_now: h.t_now() });
            }
        }
        let blocks = chain.blocks();
        let mut i = blocks.len();
        let mut start = None;
        while i > 0 {
            let h = &blocks[i - 1].hash;
            if let Some(s) = self.states.get(h) {
                start = Some(s.clone());
                break;
            }
            if let Some(e) = self.invalid.get(h) {
                return Err(e.clone());
            }
            i -= 1;
        }
        let mut st = start.unwrap_or_else(|| self.root.clone());
        for b in &blocks[i..] {
            let mut next = st.as_ref().clone();
            let records = &self.records;
            let sl = b.slot();
            let on_prefix = |r: &AdjustRecord| {
                records
                    .get(r)
                    .is_some_and(|v| v.iter().any(|(s, h)| *s < sl && chain.contains(*s, h)))
            };
            if let Err(e) = next.step(b, &self.genesis, &self.params, registry, &on_prefix) {
                self.invalid.insert(b.hash, e.clone());
                return Err(e);
            }
            for e in &b.body().adjusts {
                self.records.entry(e.record.clone()).or_default().push((sl, b.hash));
            }
            st = Arc::new(next);
            self.states.insert(b.hash, st.clone());
        }
        Ok(st)
    }

    /// Whether `r` is embedded in some block of `chain` seen by this cache.
    pub fn record_on_chain(&self, r: &AdjustRecord, chain: &Chain) -> bool {
        self.records
            .get(r)
            .is_some_and(|v| v.iter().any(|(s, h)| chain.contains(*s, h)))
    }

    pub fn is_valid(&mut self, chain: &Chain, time: Tick, registry: &KeyRegistry) -> bool {
        self.check(chain, time, registry).is_ok()
    }

    /// Fold state of a chain already known to be valid (or the caller's own).
    pub fn state(&mut self, chain: &Chain, registry: &KeyRegistry) -> Result<Arc<PrefixState>, InvalidChain> {
        self.check(chain, Tick::MAX, registry)
    }
}
