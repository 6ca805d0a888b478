//! Per-participant protocol state machine.
//!
//! The scheduler activates every party once per tick. Procedures that wait
//! (genesis, joining, pre-waiting, the idle part of a round) are resumed
//! from the explicit [`Phase`] on the next activation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{
    maxvalid_bg, maxvalid_mc, threshold, AdjustRecord, Block, BlockBody, BlockRef, Chain, ChainParams,
    ChainValidator, EmbeddedAdjust, EpochInfo, GenesisBlock, InvalidChain, LeaderCert, PrefixState,
    SealedBlock, Tx,
};
use crate::clock::Clock;
use crate::crypto::{vrf_eval, vrf_input, KesKey, KeyRegistry, VrfKeypair, VrfOutput, NONCE, TEST};
use crate::network::{Leak, Network};
use crate::types::{epoch_of, first_slot_of, PartyId, Slot, Tick};

/// Payload carried by the three network instances.
#[derive(Clone, Debug)]
pub enum Message {
    Chain(Arc<Chain>),
    Tx(Tx),
    Adjust(Vec<AdjustRecord>),
    /// New-party announcement; answered with the responder's chain.
    Hello(PartyId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    LongestChain,
    Density,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyConfig {
    /// Execution period as a fraction of the round length.
    pub t_run_frac: f64,
    /// Pre-wait as a fraction of the execution period.
    pub prewait_frac: f64,
    pub rule: SelectionRule,
    /// Fork depth handled by the longest-chain branch of the density rule.
    pub k: usize,
    /// Density window in slots.
    pub s: Slot,
    /// A party that resynchronizes mid-round skips leader election until the
    /// next round boundary.
    pub desync_vrf_gate: bool,
}

impl Default for PartyConfig {
    fn default() -> Self {
        Self {
            t_run_frac: 0.4,
            prewait_frac: 0.5,
            rule: SelectionRule::LongestChain,
            k: 20,
            s: 50,
            desync_vrf_gate: true,
        }
    }
}

impl PartyConfig {
    pub fn t_run(&self, round: Tick) -> Tick {
        ((self.t_run_frac * round as f64).round() as Tick).clamp(1, round.max(1))
    }

    pub fn prewait(&self, round: Tick) -> Tick {
        (self.prewait_frac * self.t_run(round) as f64).floor() as Tick
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    RandomOracle,
    Clock,
    Ledger,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub ro: bool,
    pub clock: bool,
    pub ledger: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Availability {
    pub operational: bool,
    pub time_aware: bool,
    pub online: bool,
    pub synchronized: bool,
}

impl Availability {
    pub fn alert(&self) -> bool {
        self.operational && self.online && self.synchronized && self.time_aware
    }

    pub fn active(&self) -> bool {
        self.operational && self.online && self.time_aware
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Phase {
    Fresh,
    AwaitGenesis,
    Joining { until: Tick, heard: bool },
    /// Waiting for `t_next`.
    Parked,
    /// Leader holding its block until a chain arrives or `until`.
    PreWait { until: Tick },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingLeader {
    pub slot: Slot,
    pub y: u64,
    pub proof: crate::types::Digest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTiming {
    pub slot: Slot,
    pub t_begin: Tick,
    pub t_next: Tick,
    pub t_round: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimingError {
    #[error("chain ending at slot {head_slot} cannot determine epoch {epoch}")]
    ResyncNeeded { epoch: u64, head_slot: Slot },
}

/// Trace events emitted by parties.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PartyEvent {
    Round {
        tick: Tick,
        party: PartyId,
        slot: Slot,
        epoch: u64,
        t_round: Tick,
        t_next: Tick,
        branch: &'static str,
    },
    RoundLength {
        tick: Tick,
        party: PartyId,
        epoch: u64,
        previous: Tick,
        new_round: Tick,
        raw: Option<f64>,
        samples: Vec<usize>,
        negative_b: usize,
    },
    Block {
        tick: Tick,
        party: PartyId,
        slot: Slot,
        hash: String,
        len: usize,
        adjusts: usize,
        txs: usize,
    },
    Adopt {
        tick: Tick,
        party: PartyId,
        len: usize,
        head: String,
        t_rec: Tick,
    },
    Reject {
        tick: Tick,
        party: PartyId,
        #[serde(flatten)]
        reason: InvalidChain,
    },
    Join {
        tick: Tick,
        party: PartyId,
        until: Tick,
    },
    Resync {
        tick: Tick,
        party: PartyId,
        slot: Slot,
        t_next: Tick,
        t_round: Tick,
    },
    Leader {
        tick: Tick,
        party: PartyId,
        slot: Slot,
        produced: bool,
    },
    Ignored {
        tick: Tick,
        party: PartyId,
        what: &'static str,
    },
}

/// Which network a multicast went out on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Bc,
    Tx,
    Adj,
}

/// Leakage of one honest multicast, handed to the adversary.
#[derive(Clone, Debug)]
pub struct LeakRecord {
    pub channel: Channel,
    pub sender: PartyId,
    pub now: Tick,
    pub deadline: Tick,
    pub copies: Vec<Leak>,
    /// Slot of the block for chain multicasts.
    pub block_slot: Option<Slot>,
}

/// Shared functionalities a party talks to during one activation.
pub struct Env<'a> {
    pub now: Tick,
    pub genesis: &'a Arc<GenesisBlock>,
    pub params: &'a ChainParams,
    pub clock: &'a mut Clock,
    pub bc: &'a mut Network<Message>,
    pub tx: &'a mut Network<Message>,
    pub adj: &'a mut Network<Message>,
    pub registry: &'a KeyRegistry,
    pub validator: &'a mut ChainValidator,
    pub leaks: &'a mut Vec<LeakRecord>,
    pub events: &'a mut Vec<PartyEvent>,
}

#[derive(Default)]
struct Fetched {
    chains: Vec<(Arc<Chain>, Tick)>,
    welcome: bool,
}

/// Leadership evaluation for one slot.
pub fn leader_eval(
    key: &VrfKeypair,
    party: PartyId,
    info: &EpochInfo,
    sl: Slot,
    params: &ChainParams,
) -> (VrfOutput, VrfOutput, bool) {
    let rho = vrf_eval(key, &vrf_input(&info.nonce, sl, NONCE), params.l_vrf);
    let test = vrf_eval(key, &vrf_input(&info.nonce, sl, TEST), params.l_vrf);
    let t = threshold(params.f, info.dist.relative(party), params.l_vrf).unwrap_or(0);
    (rho, test, (test.y as u128) < t)
}

/// Assembles and signs a block extending `chain`.
#[allow(clippy::too_many_arguments)]
pub fn build_block(
    chain: &Chain,
    party: PartyId,
    kes: &mut KesKey,
    sl: Slot,
    t_now: Tick,
    test: VrfOutput,
    rho: VrfOutput,
    txs: Vec<Tx>,
    adjusts: Vec<EmbeddedAdjust>,
) -> Arc<SealedBlock> {
    let body = BlockBody {
        prev: chain.head_hash(),
        txs,
        slot: sl,
        t_now,
        crt: LeaderCert {
            party,
            y: test.y,
            proof: test.proof,
        },
        rho,
        adjusts,
    };
    let sig = kes
        .sign(&body.signing_bytes(), sl)
        .expect("block signing respects KES periods");
    Arc::new(SealedBlock::seal(Block { body, sig }))
}

/// Slot containing `t_now` according to the round lengths `state` fixes.
pub fn current_slot_number(
    t_now: Tick,
    state: &PrefixState,
    g: &GenesisBlock,
    params: &ChainParams,
) -> Result<SlotTiming, TimingError> {
    if t_now < 0 {
        return Ok(SlotTiming {
            slot: 0,
            t_begin: -g.t_start,
            t_next: 0,
            t_round: g.t_round_1,
        });
    }
    let r = params.epoch_len;
    let head_slot = state.head_slot();
    let mut ep = 1;
    loop {
        if ep >= 2 && head_slot <= (ep - 2) * r {
            return Err(TimingError::ResyncNeeded { epoch: ep, head_slot });
        }
        let info = state.epoch_info(ep, g, params);
        if t_now < info.end(r) {
            let idx = (t_now - info.start) / info.round;
            let t_begin = info.start + idx * info.round;
            return Ok(SlotTiming {
                slot: first_slot_of(ep, r) + idx as Slot,
                t_begin,
                t_next: t_begin + info.round,
                t_round: info.round,
            });
        }
        ep += 1;
    }
}

/// Local head at the start of a round, after chain selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Onset {
    pub slot: Slot,
    pub tick: Tick,
    pub head: crate::types::Digest,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct Party {
    pub id: PartyId,
    pub cfg: PartyConfig,
    vrf: VrfKeypair,
    kes: KesKey,
    reg: Registration,
    is_init: bool,
    phase: Phase,
    chain: Chain,
    tx_buffer: Vec<Tx>,
    adj_buffer: Vec<EmbeddedAdjust>,
    s_adj: Vec<PendingLeader>,
    adj_out: Vec<AdjustRecord>,
    join_buffer: Vec<(Arc<Chain>, Tick)>,
    pending_chains: Vec<(Arc<Chain>, Tick)>,
    sl: Slot,
    ep: u64,
    t_round: Tick,
    t_begin: Tick,
    t_next: Tick,
    t_rec: Option<Tick>,
    last_adopted: Option<BlockRef>,
    t_on: Slot,
    synchronized: bool,
    offline_memory: bool,
    stalled: bool,
    skip_staking: bool,
    welcome_pending: bool,
    epoch_info: Option<Arc<EpochInfo>>,
    onset: Option<Onset>,
    pub blocks_produced: u64,
    pub leader_slots: u64,
}

impl Party {
    pub fn new(id: PartyId, vrf: VrfKeypair, kes: KesKey, genesis: Arc<GenesisBlock>, cfg: PartyConfig) -> Self {
        let t_round = genesis.t_round_1;
        Self {
            id,
            cfg,
            vrf,
            kes,
            reg: Registration::default(),
            is_init: false,
            phase: Phase::Fresh,
            chain: Chain::new(genesis),
            tx_buffer: Vec::new(),
            adj_buffer: Vec::new(),
            s_adj: Vec::new(),
            adj_out: Vec::new(),
            join_buffer: Vec::new(),
            pending_chains: Vec::new(),
            sl: 0,
            ep: 0,
            t_round,
            t_begin: 0,
            t_next: 0,
            t_rec: None,
            last_adopted: None,
            t_on: 0,
            synchronized: false,
            offline_memory: false,
            stalled: false,
            skip_staking: false,
            welcome_pending: false,
            epoch_info: None,
            onset: None,
            blocks_produced: 0,
            leader_slots: 0,
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn vrf_key(&self) -> &VrfKeypair {
        &self.vrf
    }

    pub fn kes_key_mut(&mut self) -> &mut KesKey {
        &mut self.kes
    }

    pub fn timing(&self) -> SlotTiming {
        SlotTiming {
            slot: self.sl,
            t_begin: self.t_begin,
            t_next: self.t_next,
            t_round: self.t_round,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.ep
    }

    pub fn t_rec(&self) -> Option<Tick> {
        self.t_rec
    }

    pub fn pending_leaders(&self) -> &[PendingLeader] {
        &self.s_adj
    }

    pub fn outgoing_adjusts(&self) -> &[AdjustRecord] {
        &self.adj_out
    }

    pub fn registration(&self) -> Registration {
        self.reg
    }

    pub fn is_initialized(&self) -> bool {
        self.is_init
    }

    pub fn last_online_slot(&self) -> Slot {
        self.t_on
    }

    pub fn availability(&self) -> Availability {
        Availability {
            operational: self.reg.ro,
            time_aware: self.reg.clock,
            online: self.reg.ledger,
            synchronized: self.synchronized,
        }
    }

    /// Onset recorded by the latest round start, cleared on read.
    pub fn take_onset(&mut self) -> Option<Onset> {
        self.onset.take()
    }

    pub fn is_alert(&self) -> bool {
        self.availability().alert()
    }

    /// Registers with a resource. Ledger registration requires the random
    /// oracle first and attaches the party to the networks.
    pub fn register(&mut self, res: Resource, env: &mut Env) -> bool {
        match res {
            Resource::RandomOracle => {
                self.reg.ro = true;
                true
            }
            Resource::Clock => {
                if !self.reg.clock {
                    env.clock.register_party(self.id);
                    self.reg.clock = true;
                }
                true
            }
            Resource::Ledger => {
                if !self.reg.ro {
                    env.events.push(PartyEvent::Ignored {
                        tick: env.now,
                        party: self.id,
                        what: "ledger registration before random oracle",
                    });
                    return false;
                }
                if !self.reg.ledger {
                    env.bc.register(self.id);
                    env.tx.register(self.id);
                    env.adj.register(self.id);
                    self.reg.ledger = true;
                }
                true
            }
        }
    }

    pub fn deregister(&mut self, res: Resource, env: &mut Env) {
        match res {
            Resource::RandomOracle => self.reg.ro = false,
            Resource::Clock => {
                if self.reg.clock {
                    env.clock.deregister_party(self.id);
                    self.reg.clock = false;
                    self.synchronized = false;
                    self.offline_memory = true;
                }
            }
            Resource::Ledger => {
                if self.reg.ledger {
                    env.bc.deregister(self.id);
                    env.tx.deregister(self.id);
                    env.adj.deregister(self.id);
                    self.reg.ledger = false;
                    self.synchronized = false;
                    self.offline_memory = true;
                }
            }
        }
    }

    /// Payload of the local chain without its last `k` blocks.
    pub fn read_state(&mut self, k: usize, env: &mut Env) -> Vec<Tx> {
        if !self.is_init {
            return Vec::new();
        }
        if self.reg.ledger {
            let f = self.fetch(env);
            self.select(&f.chains, env);
            self.pending_chains.extend(f.chains);
            self.welcome_pending |= f.welcome;
        }
        self.chain.truncated(k).payload_state()
    }

    fn report(&self, env: &mut Env, value: Option<Tick>) {
        if self.reg.clock && !env.clock.has_reported(self.id) {
            let _ = env.clock.update(self.id, value);
        }
    }

    /// One maintenance activation.
    pub fn activate(&mut self, env: &mut Env) {
        if !self.reg.clock {
            return;
        }
        if !self.reg.ledger {
            self.report(env, None);
            return;
        }
        if !self.is_init {
            self.initialize(env);
            return;
        }
        if self.offline_memory {
            self.offline_memory = false;
            self.start_join(env);
            self.report(env, None);
            return;
        }
        if !self.reg.ro {
            // Stalled: keep listening, stay out of the round.
            self.stalled = true;
            let f = self.fetch(env);
            self.select(&f.chains, env);
            self.report(env, None);
            return;
        }
        match self.phase.clone() {
            Phase::Fresh => self.initialize(env),
            Phase::AwaitGenesis => {
                if env.now >= 0 {
                    self.phase = Phase::Parked;
                    self.synchronized = true;
                    self.round(env);
                } else {
                    self.report(env, Some(0));
                }
            }
            Phase::Joining { until, heard } => self.continue_join(until, heard, env),
            Phase::Parked => {
                if env.now >= self.t_next {
                    self.round(env);
                } else {
                    self.report(env, Some(self.t_next));
                }
            }
            Phase::PreWait { until } => {
                let f = self.fetch(env);
                self.select(&f.chains, env);
                self.pending_chains.extend(f.chains);
                self.welcome_pending |= f.welcome;
                let deadline = self.t_begin + self.cfg.t_run(self.t_round) - 1;
                if self.t_rec.is_some() || env.now >= until || env.now >= deadline {
                    self.produce(env);
                    self.finish_activation(env);
                }
            }
        }
    }

    fn initialize(&mut self, env: &mut Env) {
        self.is_init = true;
        if env.now < 0 {
            self.t_round = env.genesis.t_round_1;
            self.t_next = 0;
            self.phase = Phase::AwaitGenesis;
            self.report(env, Some(0));
        } else {
            self.chain = Chain::new(env.genesis.clone());
            self.start_join(env);
            self.report(env, None);
        }
    }

    fn start_join(&mut self, env: &mut Env) {
        self.synchronized = false;
        self.join_buffer.clear();
        let until = env.now + 3 * env.genesis.t_round_1;
        self.phase = Phase::Joining { until, heard: false };
        let _ = env.bc.honest_multicast(self.id, Message::Hello(self.id), until, env.now);
        env.events.push(PartyEvent::Join {
            tick: env.now,
            party: self.id,
            until,
        });
    }

    fn continue_join(&mut self, until: Tick, heard: bool, env: &mut Env) {
        let f = self.fetch(env);
        let heard = heard || !f.chains.is_empty();
        self.join_buffer.extend(f.chains);
        if env.now < until {
            self.phase = Phase::Joining { until, heard };
            self.report(env, None);
            return;
        }
        let buffered = std::mem::take(&mut self.join_buffer);
        self.select(&buffered, env);
        if !heard {
            self.start_join(env);
            self.report(env, None);
            return;
        }
        if !self.resync(env) {
            self.start_join(env);
        }
        self.report(env, None);
    }

    /// Recomputes timing from the local chain. The party is synchronized
    /// afterwards and waits for the next boundary.
    fn resync(&mut self, env: &mut Env) -> bool {
        let st = match env.validator.state(&self.chain, env.registry) {
            Ok(st) => st,
            Err(_) => return false,
        };
        match current_slot_number(env.now, &st, env.genesis, env.params) {
            Ok(t) => {
                self.apply_timing(t, env.params);
                self.synchronized = true;
                self.phase = Phase::Parked;
                env.events.push(PartyEvent::Resync {
                    tick: env.now,
                    party: self.id,
                    slot: t.slot,
                    t_next: t.t_next,
                    t_round: t.t_round,
                });
                true
            }
            Err(_) => false,
        }
    }

    fn apply_timing(&mut self, t: SlotTiming, params: &ChainParams) {
        self.sl = t.slot;
        self.t_begin = t.t_begin;
        self.t_next = t.t_next;
        self.t_round = t.t_round;
        self.ep = epoch_of(t.slot, params.epoch_len);
    }

    fn fetch(&mut self, env: &mut Env) -> Fetched {
        let mut out = Fetched::default();
        for (m, d) in env.bc.fetch(self.id, env.now) {
            match m {
                Message::Chain(c) => out.chains.push((c, d)),
                Message::Hello(p) if p != self.id => out.welcome = true,
                _ => {}
            }
        }
        for (m, _) in env.tx.fetch(self.id, env.now) {
            if let Message::Tx(t) = m {
                self.tx_buffer.push(t);
            }
        }
        for (m, d) in env.adj.fetch(self.id, env.now) {
            if let Message::Adjust(rs) = m {
                for r in rs {
                    if !self.adj_buffer.iter().any(|e| e.record == r) {
                        self.adj_buffer.push(EmbeddedAdjust { record: r, t_adj: d });
                    }
                }
            }
        }
        out.chains.sort_by_key(|(_, d)| *d);
        out
    }

    /// Adopts the preferred valid chain among `cands` (sorted by arrival).
    fn select(&mut self, cands: &[(Arc<Chain>, Tick)], env: &mut Env) {
        let mut valid: Vec<(&Chain, Tick)> = Vec::new();
        for (c, d) in cands {
            match env.validator.check(c, env.now, env.registry) {
                Ok(_) => valid.push((c.as_ref(), *d)),
                Err(reason) => env.events.push(PartyEvent::Reject {
                    tick: env.now,
                    party: self.id,
                    reason,
                }),
            }
        }
        if valid.is_empty() {
            return;
        }
        let best = match self.cfg.rule {
            SelectionRule::LongestChain => maxvalid_mc(&self.chain, valid.iter().map(|(c, _)| *c)),
            SelectionRule::Density => maxvalid_bg(&self.chain, valid.iter().map(|(c, _)| *c), self.cfg.k, self.cfg.s),
        };
        if std::ptr::eq(best, &self.chain) || *best == self.chain {
            return;
        }
        let arrival = valid
            .iter()
            .find(|(c, _)| std::ptr::eq(*c, best))
            .map(|(_, d)| *d)
            .expect("winner comes from the candidates");
        let adopted = best.clone();
        let fork = crate::chain::fork_index(&self.chain, &adopted);
        let new_txs: Vec<Tx> = adopted.blocks()[fork..]
            .iter()
            .flat_map(|b| b.body().txs.iter().copied())
            .collect();
        self.tx_buffer.retain(|t| !new_txs.contains(t));
        self.chain = adopted;
        self.t_rec = Some(arrival);
        self.last_adopted = self.chain.head().map(|h| h.block_ref());
        env.events.push(PartyEvent::Adopt {
            tick: env.now,
            party: self.id,
            len: self.chain.len(),
            head: self.chain.head_hash().to_hex(),
            t_rec: arrival,
        });
    }

    /// Round body at a boundary (or on return from a stall).
    fn round(&mut self, env: &mut Env) {
        self.t_rec = None;
        self.last_adopted = None;
        self.adj_out.clear();
        let was_stalled = std::mem::take(&mut self.stalled);
        let mut f = self.fetch(env);
        f.chains.splice(0..0, std::mem::take(&mut self.pending_chains));
        f.welcome |= std::mem::take(&mut self.welcome_pending);
        self.select(&f.chains, env);

        let t_run = self.cfg.t_run(self.t_round);
        let branch;
        if self.t_next + t_run > env.now && !was_stalled {
            branch = "normal";
            self.sl += 1;
            let ep = epoch_of(self.sl, env.params.epoch_len);
            if ep > 1 && first_slot_of(ep, env.params.epoch_len) == self.sl {
                match env.validator.state(&self.chain, env.registry) {
                    Ok(st) => {
                        let info = st.epoch_info(ep, env.genesis, env.params);
                        if let Some(a) = &info.adjust {
                            env.events.push(PartyEvent::RoundLength {
                                tick: env.now,
                                party: self.id,
                                epoch: ep,
                                previous: a.previous,
                                new_round: a.new_round,
                                raw: a.raw,
                                samples: a.windows.iter().map(|w| w.samples).collect(),
                                negative_b: a.windows.iter().map(|w| w.negative_b).sum(),
                            });
                        }
                        self.t_round = info.round;
                    }
                    Err(_) => {
                        self.start_join(env);
                        self.report(env, None);
                        return;
                    }
                }
            }
            self.t_begin = self.t_next;
            self.t_next += self.t_round;
            self.ep = ep;
            self.skip_staking = false;
        } else {
            branch = "stalled";
            if !self.resync(env) {
                self.start_join(env);
                self.report(env, None);
                return;
            }
            self.skip_staking = self.cfg.desync_vrf_gate;
        }
        self.t_on = self.sl;
        self.onset = Some(Onset {
            slot: self.sl,
            tick: env.now,
            head: self.chain.head_hash(),
            len: self.chain.len(),
        });
        env.events.push(PartyEvent::Round {
            tick: env.now,
            party: self.id,
            slot: self.sl,
            epoch: self.ep,
            t_round: self.t_round,
            t_next: self.t_next,
            branch,
        });

        if !self.update_stake_dist(env) {
            self.start_join(env);
            self.report(env, None);
            return;
        }
        self.stake(env);
        if f.welcome {
            let c = Arc::new(self.chain.clone());
            self.multicast(env, Channel::Bc, Message::Chain(c), None);
            for t in self.tx_buffer.clone() {
                self.multicast(env, Channel::Tx, Message::Tx(t), None);
            }
        }
        self.complete_pending(&f.chains);
        if !matches!(self.phase, Phase::PreWait { .. }) {
            self.finish_activation(env);
        }
    }

    fn update_stake_dist(&mut self, env: &mut Env) -> bool {
        let r = env.params.epoch_len;
        let head_epoch = epoch_of(self.chain.head_slot(), r);
        if self.ep > 2 && head_epoch < self.ep - 2 {
            return false;
        }
        match env.validator.state(&self.chain, env.registry) {
            Ok(st) => {
                self.epoch_info = Some(st.epoch_info(self.ep, env.genesis, env.params));
                true
            }
            Err(_) => false,
        }
    }

    fn stake(&mut self, env: &mut Env) {
        let sl = self.sl;
        if self.skip_staking {
            let _ = self.kes.evolve(sl);
            return;
        }
        let info = self.epoch_info.clone().expect("stake distribution updated");
        let (_, _, leader) = leader_eval(&self.vrf, self.id, &info, sl, env.params);
        if !leader {
            let _ = self.kes.evolve(sl);
            return;
        }
        self.leader_slots += 1;
        let t_run = self.cfg.t_run(self.t_round);
        if env.now >= self.t_begin + t_run {
            let _ = self.kes.evolve(sl);
            self.remember_leadership(env);
            env.events.push(PartyEvent::Leader {
                tick: env.now,
                party: self.id,
                slot: sl,
                produced: false,
            });
            return;
        }
        let prewait = self.cfg.prewait(self.t_round);
        if self.t_rec.is_none() && env.now < self.t_begin + prewait {
            self.phase = Phase::PreWait {
                until: self.t_begin + prewait,
            };
            return;
        }
        self.produce(env);
    }

    /// Leadership memory for round-length measurement.
    fn remember_leadership(&mut self, env: &mut Env) {
        let Some(info) = self.epoch_info.clone() else { return };
        let (_, test, _) = leader_eval(&self.vrf, self.id, &info, self.sl, env.params);
        match (self.t_rec, self.last_adopted) {
            (Some(t), Some(b)) => self.adj_out.push(AdjustRecord {
                last: Some(b),
                recv: Some(t),
                party: self.id,
                slot: self.sl,
                y: test.y,
                proof: test.proof,
            }),
            _ => self.s_adj.push(PendingLeader {
                slot: self.sl,
                y: test.y,
                proof: test.proof,
            }),
        }
    }

    fn produce(&mut self, env: &mut Env) {
        self.phase = Phase::Parked;
        let sl = self.sl;
        // the chain may have changed while pre-waiting
        if !self.update_stake_dist(env) {
            return;
        }
        let info = self.epoch_info.clone().expect("stake distribution updated");
        let (rho, test, leader) = leader_eval(&self.vrf, self.id, &info, sl, env.params);
        let produced = leader && self.chain.head_slot() < sl;
        env.events.push(PartyEvent::Leader {
            tick: env.now,
            party: self.id,
            slot: sl,
            produced,
        });
        if !produced {
            let _ = self.kes.evolve(sl);
            return;
        }
        let st = env
            .validator
            .state(&self.chain, env.registry)
            .expect("local chain is valid");
        let mut bal = st.balances().clone();
        let mut txs = Vec::new();
        for t in &self.tx_buffer {
            let from = bal.get(&t.from).copied().unwrap_or(0);
            if from >= t.amount {
                bal.insert(t.from, from - t.amount);
                *bal.entry(t.to).or_default() += t.amount;
                txs.push(*t);
            }
        }
        let mut adjusts: Vec<EmbeddedAdjust> = Vec::new();
        for e in &self.adj_buffer {
            if adjusts.iter().any(|a| a.record == e.record)
                || env.validator.record_on_chain(&e.record, &self.chain)
                || !st.record_valid(&e.record, sl, env.genesis, env.params, env.registry)
            {
                continue;
            }
            adjusts.push(e.clone());
        }
        let block = build_block(&self.chain, self.id, &mut self.kes, sl, env.now, test, rho, txs.clone(), adjusts.clone());
        let mut next = self.chain.clone();
        next.push(block.clone());
        if let Err(reason) = env.validator.check(&next, env.now, env.registry) {
            env.events.push(PartyEvent::Reject {
                tick: env.now,
                party: self.id,
                reason,
            });
            return;
        }
        self.chain = next;
        self.blocks_produced += 1;
        self.tx_buffer.retain(|t| !txs.contains(t));
        self.adj_buffer.retain(|e| !adjusts.iter().any(|a| a.record == e.record));
        env.events.push(PartyEvent::Block {
            tick: env.now,
            party: self.id,
            slot: sl,
            hash: block.hash.to_hex(),
            len: self.chain.len(),
            adjusts: adjusts.len(),
            txs: txs.len(),
        });
        let c = Arc::new(self.chain.clone());
        self.multicast(env, Channel::Bc, Message::Chain(c), Some(sl));
        self.remember_leadership(env);
    }

    /// Completes pending leadership entries from chains fetched this round
    /// and drops entries older than two slots.
    fn complete_pending(&mut self, fetched: &[(Arc<Chain>, Tick)]) {
        let sl = self.sl;
        let mut keep = Vec::new();
        for p in std::mem::take(&mut self.s_adj) {
            let hit = fetched
                .iter()
                .find(|(c, _)| c.head().is_some_and(|h| h.slot() == p.slot));
            if let Some((c, d)) = hit {
                self.adj_out.push(AdjustRecord {
                    last: c.head().map(|h| h.block_ref()),
                    recv: Some(*d),
                    party: self.id,
                    slot: p.slot,
                    y: p.y,
                    proof: p.proof,
                });
            } else if sl.saturating_sub(p.slot) <= 2 {
                keep.push(p);
            }
        }
        self.s_adj = keep;
    }

    fn finish_activation(&mut self, env: &mut Env) {
        if !self.adj_out.is_empty() {
            let batch = self.adj_out.clone();
            self.multicast(env, Channel::Adj, Message::Adjust(batch), None);
        }
        self.phase = Phase::Parked;
        self.report(env, Some(self.t_next));
    }

    fn multicast(&mut self, env: &mut Env, ch: Channel, m: Message, block_slot: Option<Slot>) {
        let net = match ch {
            Channel::Bc => &mut *env.bc,
            Channel::Tx => &mut *env.tx,
            Channel::Adj => &mut *env.adj,
        };
        if let Ok(copies) = net.honest_multicast(self.id, m, self.t_next, env.now) {
            env.leaks.push(LeakRecord {
                channel: ch,
                sender: self.id,
                now: env.now,
                deadline: self.t_next,
                copies,
                block_slot,
            });
        }
    }

    /// Environment input: a transaction to gossip.
    pub fn submit_tx(&mut self, tx: Tx, env: &mut Env) {
        self.tx_buffer.push(tx);
        if self.reg.ledger {
            self.multicast(env, Channel::Tx, Message::Tx(tx), None);
        }
    }

    /// Used for corrupted parties the adversary drives directly.
    pub fn set_chain(&mut self, c: Chain) {
        self.chain = c;
    }
}

#[cfg(test)]
mod tests;
