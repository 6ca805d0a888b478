//! Tick-driven execution of a scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::adversary::{
    check_admissibility, AdvContext, Adversary, CorruptAt, NetCommand, WrapperConstraints, WrapperState,
};
use crate::chain::{phi, ChainParams, PrefixState, ChainValidator, GenesisBlock, StakeHolder, Tx};
use crate::clock::Clock;
use crate::crypto::{hash_parts, KesKey, KeyRegistry, VrfKeypair};
use crate::metrics::{
    bot_reduction, check_cg, check_cg2, check_cp, check_cq, check_ecq, divergence, rate_audit, real_reduction,
    BlockStore, BoundTable, CharString, Snapshot, Symbol, Violation,
};
use crate::network::{Network, Rd};
use crate::party::{leader_eval, Channel, Env, LeakRecord, Message, Party, PartyEvent, Resource, SlotTiming};
use crate::types::{epoch_of, PartyId, Slot, Tick};

use super::report::{
    ChainSummary, Delivery, EpochRounds, LeaderRate, Outcome, RunOutput, RunReport, SyncReport, SCHEMA_VERSION,
};
use super::scenario::{Action, ConfigError, Event, Scenario};

const MAX_SYNC_WITNESSES: usize = 20;

/// Shared functionalities and static run data.
struct World {
    genesis: Arc<GenesisBlock>,
    params: ChainParams,
    registry: KeyRegistry,
    clock: Clock,
    bc: Network<Message>,
    tx: Network<Message>,
    adj: Network<Message>,
    validator: ChainValidator,
}

impl World {
    fn env<'a>(
        &'a mut self,
        now: Tick,
        leaks: &'a mut Vec<LeakRecord>,
        events: &'a mut Vec<PartyEvent>,
    ) -> Env<'a> {
        Env {
            now,
            genesis: &self.genesis,
            params: &self.params,
            clock: &mut self.clock,
            bc: &mut self.bc,
            tx: &mut self.tx,
            adj: &mut self.adj,
            registry: &self.registry,
            validator: &mut self.validator,
            leaks,
            events,
        }
    }

    fn net(&mut self, ch: Channel) -> &mut Network<Message> {
        match ch {
            Channel::Bc => &mut self.bc,
            Channel::Tx => &mut self.tx,
            Channel::Adj => &mut self.adj,
        }
    }
}

/// Leaders of one slot as seen from the reference party's epoch data.
#[derive(Clone, Debug, Default)]
struct SlotRecord {
    honest: Vec<PartyId>,
    adversarial: Vec<PartyId>,
    alert_stake: u64,
    participating_stake: u64,
    total_stake: u64,
}

impl SlotRecord {
    fn symbol(&self) -> Symbol {
        match (self.honest.len(), self.adversarial.len()) {
            (0, 0) => Symbol::Bot,
            (1, 0) => Symbol::Zero,
            _ => Symbol::One,
        }
    }
}

pub struct Simulation {
    sc: Scenario,
    world: World,
    parties: Vec<Party>,
    adversary: Adversary,
    wrapper: Option<WrapperConstraints>,
    rng: ChaCha8Rng,
    events: Vec<Event>,
    next_event: usize,
    corruptions: Vec<CorruptAt>,
    next_corruption: usize,
    store: BlockStore,
    snaps: Vec<Snapshot>,
    records: BTreeMap<Slot, SlotRecord>,
    traffic: BTreeMap<Slot, (u64, u64)>,
    copies: u64,
    on_time: u64,
    rounds: BTreeMap<u64, BTreeSet<Tick>>,
    sync_checked: u64,
    sync_violations: Vec<Violation>,
    sync_count: u64,
    resyncs: u64,
    resync_mismatches: u64,
    trace: Vec<String>,
    halted: Option<String>,
    extensions: u64,
    max_ticks: Tick,
    last_slot: Slot,
    done: bool,
}

impl Simulation {
    pub fn new(sc: Scenario) -> Result<Self, ConfigError> {
        sc.validate()?;
        let seed = sc.seed;
        let n = sc.n_parties;
        let (genesis, vrf, kes) = build_genesis(&sc);
        let params = sc.chain_params();
        let mut registry = KeyRegistry::new(sc.l_vrf);
        for i in 0..n as usize {
            registry.register_vrf(&vrf[i]);
            registry.register_kes(&kes[i]);
        }
        let cfg = sc.party_config();
        let mut bc = Network::new("bc", sc.eta, seed.wrapping_mul(3).wrapping_add(1));
        let mut tx = Network::new("tx", sc.eta, seed.wrapping_mul(3).wrapping_add(2));
        let mut adj = Network::new("adj", sc.eta, seed.wrapping_mul(3).wrapping_add(3));
        for net in [&mut bc, &mut tx, &mut adj] {
            net.set_tracing(sc.trace && sc.trace_network);
        }
        let world = World {
            clock: Clock::new(sc.t_start, cfg.t_run(sc.t_round_1)),
            validator: ChainValidator::new(genesis.clone(), params.clone()),
            genesis: genesis.clone(),
            params,
            registry,
            bc,
            tx,
            adj,
        };
        let parties = vrf
            .into_iter()
            .zip(kes)
            .enumerate()
            .map(|(i, (v, k))| Party::new(i as PartyId, v, k, genesis.clone(), cfg.clone()))
            .collect();
        let mut events = sc.events.clone();
        events.sort_by_key(|e| e.tick);
        let mut corruptions = sc.adversary.corrupt_at.clone();
        corruptions.sort_by_key(|c| c.tick);
        let max_ticks = sc.max_ticks.unwrap_or_else(|| {
            let per_slot = sc.t_round_1.max(sc.min_round) * 8;
            sc.t_start + (sc.slots as Tick + 2) * per_slot + 1000
        });
        let mut sim = Self {
            adversary: Adversary::new(sc.adversary.clone(), seed),
            wrapper: sc.wrapper(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a7e),
            world,
            parties,
            events,
            next_event: 0,
            corruptions,
            next_corruption: 0,
            store: BlockStore::new(genesis.hash()),
            snaps: Vec::new(),
            records: BTreeMap::new(),
            traffic: BTreeMap::new(),
            copies: 0,
            on_time: 0,
            rounds: BTreeMap::new(),
            sync_checked: 0,
            sync_violations: Vec::new(),
            sync_count: 0,
            resyncs: 0,
            resync_mismatches: 0,
            trace: Vec::new(),
            halted: None,
            extensions: 0,
            max_ticks,
            last_slot: 0,
            done: false,
            sc,
        };
        sim.bootstrap();
        Ok(sim)
    }

    fn bootstrap(&mut self) {
        if self.sc.trace {
            self.trace.push(
                json!({
                    "event": "header",
                    "schema": SCHEMA_VERSION,
                    "seed": self.sc.seed,
                    "genesis": self.world.genesis.hash().to_hex(),
                    "scenario": self.sc,
                })
                .to_string(),
            );
        }
        let late: BTreeSet<PartyId> = self
            .sc
            .events
            .iter()
            .filter(|e| e.action == Action::Join)
            .map(|e| e.party)
            .collect();
        let now = self.world.clock.now();
        let mut leaks = Vec::new();
        let mut evs = Vec::new();
        let driven: BTreeSet<PartyId> = (0..self.sc.n_parties).filter(|&p| self.is_driven(p)).collect();
        for p in &mut self.parties {
            if late.contains(&p.id) || driven.contains(&p.id) {
                continue;
            }
            let mut env = self.world.env(now, &mut leaks, &mut evs);
            p.register(Resource::RandomOracle, &mut env);
            p.register(Resource::Clock, &mut env);
            p.register(Resource::Ledger, &mut env);
        }
        self.absorb(evs);
    }

    fn is_driven(&self, p: PartyId) -> bool {
        self.adversary.strategy().drives_parties() && self.adversary.is_corrupted(p)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn now(&self) -> Tick {
        self.world.clock.now()
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn genesis(&self) -> &Arc<GenesisBlock> {
        &self.world.genesis
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.world.registry
    }

    pub fn params(&self) -> &ChainParams {
        &self.world.params
    }

    pub fn store(&self) -> &BlockStore {
        &self.store
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snaps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Lowest-id alert honest party.
    pub fn reference(&self) -> Option<&Party> {
        self.parties
            .iter()
            .find(|p| !self.adversary.is_corrupted(p.id) && p.is_alert())
    }

    fn reference_timing(&self) -> Option<SlotTiming> {
        self.reference().map(|p| p.timing())
    }

    fn round_len(&self) -> Tick {
        self.reference_timing().map_or(self.sc.t_round_1, |t| t.t_round)
    }

    fn absorb(&mut self, evs: Vec<PartyEvent>) {
        if !self.sc.trace {
            return;
        }
        for e in evs {
            self.trace.push(serde_json::to_string(&e).expect("event serializes"));
        }
    }

    fn apply_events(&mut self, now: Tick, evs: &mut Vec<PartyEvent>, leaks: &mut Vec<LeakRecord>) {
        while self.next_event < self.events.len() && self.events[self.next_event].tick <= now {
            let e = self.events[self.next_event].clone();
            self.next_event += 1;
            if self.is_driven(e.party) {
                continue;
            }
            let p = &mut self.parties[e.party as usize];
            let mut env = self.world.env(now, leaks, evs);
            match e.action {
                Action::Join => {
                    p.register(Resource::RandomOracle, &mut env);
                    p.register(Resource::Clock, &mut env);
                    p.register(Resource::Ledger, &mut env);
                }
                Action::Offline => p.deregister(Resource::Ledger, &mut env),
                Action::Online => {
                    p.register(Resource::Ledger, &mut env);
                }
                Action::Stall => p.deregister(Resource::RandomOracle, &mut env),
                Action::Resume => {
                    p.register(Resource::RandomOracle, &mut env);
                }
                Action::Desync => p.deregister(Resource::Clock, &mut env),
                Action::Resync => {
                    p.register(Resource::Clock, &mut env);
                }
                Action::Tx => {
                    let tx = Tx {
                        from: e.party,
                        to: e.to.expect("validated"),
                        amount: e.amount.expect("validated"),
                    };
                    p.submit_tx(tx, &mut env);
                }
            }
            if self.sc.trace {
                self.trace.push(json!({"event": "env", "tick": now, "party": e.party, "action": e.action}).to_string());
            }
        }
        while self.next_corruption < self.corruptions.len() && self.corruptions[self.next_corruption].tick <= now {
            let c = self.corruptions[self.next_corruption];
            self.next_corruption += 1;
            self.adversary.corrupt(c.party);
            if self.adversary.strategy().drives_parties() {
                let p = &mut self.parties[c.party as usize];
                let mut env = self.world.env(now, leaks, evs);
                p.deregister(Resource::Ledger, &mut env);
                p.deregister(Resource::Clock, &mut env);
            }
            if self.sc.trace {
                self.trace.push(json!({"event": "corrupt", "tick": now, "party": c.party}).to_string());
            }
        }
    }

    fn handle_leaks(&mut self, now: Tick, leaks: Vec<LeakRecord>) {
        let round = self.round_len();
        let slot = self.reference_timing().map_or(0, |t| t.slot);
        for leak in leaks {
            let on_time = leak.copies.iter().filter(|c| c.rd == Rd::OnTimeUnset).count() as u64;
            let n = leak.copies.len() as u64;
            self.copies += n;
            self.on_time += on_time;
            let t = self.traffic.entry(slot).or_default();
            t.0 += n;
            t.1 += on_time;
            let cmds = self.adversary.on_leak(&leak, round);
            let w = &mut self.world;
            Adversary::apply(&cmds, now, &mut w.bc, &mut w.tx, &mut w.adj);
            if let Some([lo, hi]) = self.sc.latency {
                let touched: BTreeSet<_> = cmds
                    .iter()
                    .filter_map(|c| match c {
                        NetCommand::Delay { mid, .. } => Some(*mid),
                        _ => None,
                    })
                    .collect();
                let cap = leak.deadline - now;
                let pairs: Vec<(Tick, u64)> = leak
                    .copies
                    .iter()
                    .filter(|c| c.rd == Rd::OnTimeUnset && !touched.contains(&c.mid))
                    .map(|c| (self.rng.gen_range(lo..=hi).min(cap.max(0)), c.mid))
                    .collect();
                self.world.net(leak.channel).set_delays(&pairs, now);
            }
            if self.sc.trace {
                for c in &cmds {
                    let mut v = serde_json::to_value(c).expect("command serializes");
                    v["event"] = json!("adversary");
                    v["tick"] = json!(now);
                    self.trace.push(v.to_string());
                }
            }
        }
    }

    fn record_slot(&mut self, slot: Slot) {
        if self.records.contains_key(&slot) || slot == 0 || slot > self.sc.slots {
            return;
        }
        let Some(chain) = self.reference().map(|r| r.chain().clone()) else { return };
        let Ok(state) = self.world.validator.state(&chain, &self.world.registry) else {
            return;
        };
        let info = state.epoch_info(epoch_of(slot, self.sc.epoch_len), &self.world.genesis, &self.world.params);
        let mut rec = SlotRecord {
            total_stake: info.dist.total(),
            ..SlotRecord::default()
        };
        for p in &self.parties {
            let corrupted = self.adversary.is_corrupted(p.id);
            if !corrupted && !p.is_alert() {
                continue;
            }
            let stake = info.dist.stake(p.id);
            rec.participating_stake += stake;
            if !corrupted {
                rec.alert_stake += stake;
            }
            if leader_eval(p.vrf_key(), p.id, &info, slot, &self.world.params).2 {
                if corrupted {
                    rec.adversarial.push(p.id);
                } else {
                    rec.honest.push(p.id);
                }
            }
        }
        if let Some(c) = self.wrapper {
            let st = WrapperState {
                alert_stake: rec.alert_stake,
                participating_stake: rec.participating_stake,
                total_stake: rec.total_stake,
                copies: self.copies,
                on_time: self.on_time,
            };
            let v = check_admissibility(&st, &c);
            if !v.ok && self.halted.is_none() {
                let reason = format!("slot {slot}: {}", v.reason.unwrap_or_default());
                if self.sc.trace {
                    self.trace.push(json!({"event": "halt", "slot": slot, "reason": reason}).to_string());
                }
                self.halted = Some(reason);
            }
        }
        self.records.insert(slot, rec);
    }

    fn observe(&mut self, now: Tick, evs: &[PartyEvent]) {
        let corrupted: BTreeSet<PartyId> = self.adversary.corrupted().clone();
        let mut round_started = false;
        for e in evs {
            match *e {
                PartyEvent::Round { party, epoch, t_round, .. } if !corrupted.contains(&party) => {
                    round_started = true;
                    self.rounds.entry(epoch).or_default().insert(t_round);
                }
                PartyEvent::Resync { party, slot, t_next, .. } => {
                    if let Some(r) = self.reference().filter(|r| r.id != party) {
                        let t = r.timing();
                        self.resyncs += 1;
                        if t.slot != slot || t.t_next != t_next {
                            self.resync_mismatches += 1;
                        }
                    }
                }
                _ => {}
            }
        }
        for i in 0..self.parties.len() {
            let Some(o) = self.parties[i].take_onset() else { continue };
            let p = &self.parties[i];
            if corrupted.contains(&p.id) || !p.is_alert() || o.slot > self.sc.slots {
                continue;
            }
            self.store.insert_chain(p.chain(), |c| !corrupted.contains(&c));
            if let Some(head) = self.store.id(&o.head) {
                self.snaps.push(Snapshot {
                    party: p.id,
                    slot: o.slot,
                    tick: o.tick,
                    head,
                    len: o.len as u32,
                });
            }
        }
        if round_started {
            self.check_round_sync(now);
        }
        if let Some(t) = self.reference_timing() {
            self.record_slot(t.slot);
            self.last_slot = self.last_slot.max(t.slot.min(self.sc.slots));
            if t.slot > self.sc.slots {
                self.done = true;
            }
        }
    }

    fn check_round_sync(&mut self, now: Tick) {
        let alert: Vec<(PartyId, SlotTiming)> = self
            .parties
            .iter()
            .filter(|p| !self.adversary.is_corrupted(p.id) && p.is_alert())
            .map(|p| (p.id, p.timing()))
            .collect();
        let Some((first, t0)) = alert.first().copied() else { return };
        self.sync_checked += 1;
        let key = |t: &SlotTiming| (t.slot, t.t_round, t.t_next);
        if let Some((p, t)) = alert.iter().find(|(_, t)| key(t) != key(&t0)) {
            self.sync_count += 1;
            if self.sync_violations.len() < MAX_SYNC_WITNESSES {
                self.sync_violations.push(Violation {
                    slot: t0.slot,
                    party: Some(*p),
                    detail: format!(
                        "tick {now}: party {p} at (sl {}, round {}, next {}) vs party {first} at (sl {}, round {}, next {})",
                        t.slot, t.t_round, t.t_next, t0.slot, t0.t_round, t0.t_next
                    ),
                });
            }
        }
    }

    /// Executes one tick. Returns `false` once the run has finished.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        let now = self.world.clock.now();
        let mut evs = Vec::new();
        let mut leaks = Vec::new();
        self.apply_events(now, &mut evs, &mut leaks);

        let round = self.round_len();
        for net in [&mut self.world.bc, &mut self.world.tx, &mut self.world.adj] {
            net.auto_promote(now, round);
        }

        let mut order: Vec<usize> = (0..self.parties.len()).collect();
        if self.sc.shuffle {
            order.shuffle(&mut self.rng);
        }
        for i in order {
            if self.is_driven(i as PartyId) {
                continue;
            }
            let mut env = self.world.env(now, &mut leaks, &mut evs);
            self.parties[i].activate(&mut env);
        }
        self.handle_leaks(now, leaks);

        let reference = self.reference_timing();
        let t_run = self.sc.party_config().t_run(reference.map_or(self.sc.t_round_1, |t| t.t_round));
        let w = &mut self.world;
        let mut cx = AdvContext {
            now,
            genesis: &w.genesis,
            params: &w.params,
            registry: &w.registry,
            validator: &mut w.validator,
            bc: &mut w.bc,
            parties: &mut self.parties,
            reference,
            t_run,
        };
        self.adversary.act(&mut cx);

        self.observe(now, &evs);
        self.absorb(evs);
        if self.sc.trace && self.sc.trace_network {
            for net in [&mut self.world.bc, &mut self.world.tx, &mut self.world.adj] {
                let name = net.name.clone();
                for e in net.drain_events() {
                    let mut v = serde_json::to_value(&e).expect("net event serializes");
                    v["net"] = json!(name);
                    self.trace.push(v.to_string());
                }
            }
        }

        if self.halted.is_some() {
            self.done = true;
        }
        if self.sc.abort_on_bad_event && self.sync_count > 0 {
            self.done = true;
        }
        if now >= self.max_ticks {
            self.done = true;
        }
        if !self.done && self.world.clock.advance().is_err() {
            self.extensions += 1;
            self.world.clock.extend_to(now + 1);
            self.world.clock.advance().expect("horizon extended");
        }
        !self.done
    }

    pub fn run(mut self) -> RunOutput {
        while self.step() {}
        self.finish()
    }

    fn char_string(&self) -> (CharString, Vec<bool>) {
        let l = self.sc.slots as usize;
        let mut w = Vec::with_capacity(l);
        for sl in 1..=self.sc.slots {
            w.push(self.records.get(&sl).map_or(Symbol::Bot, SlotRecord::symbol));
        }
        let mut honest_at: BTreeMap<Slot, Vec<u32>> = BTreeMap::new();
        for id in 1..self.store.len() as u32 {
            let n = self.store.node(id);
            if n.honest {
                honest_at.entry(n.slot).or_default().push(id);
            }
        }
        let delivered = (1..=self.sc.slots)
            .map(|sl| {
                let Some(rec) = self.records.get(&sl).filter(|r| r.symbol() == Symbol::Zero) else {
                    return true;
                };
                let leader = rec.honest[0];
                let Some(&block) = honest_at
                    .get(&sl)
                    .and_then(|ids| ids.iter().find(|&&id| self.store.node(id).creator == Some(leader)))
                else {
                    return false;
                };
                match honest_at.get(&(sl - 1)) {
                    None => true,
                    Some(prev) => prev.iter().any(|&p| self.store.is_ancestor(p, block)),
                }
            })
            .collect();
        (CharString(w), delivered)
    }

    /// Runs the property checkers and assembles the report.
    pub fn finish(self) -> RunOutput {
        let rc = self.sc.resolved_checks();
        let mut properties = Vec::new();
        if self.sc.checks.enabled {
            let (st, sn) = (&self.store, &self.snaps[..]);
            properties.push(check_cp(st, sn, rc.cp_k));
            properties.push(check_cg(st, sn, rc.cg_tau, rc.cg_s));
            properties.push(check_cq(st, sn, rc.cq_mu, rc.cq_k));
            properties.push(check_ecq(st, sn, rc.ecq_s));
            properties.push(check_cg2(sn, rc.cg_tau, rc.cg2_s));
        }

        let (w, delivered) = self.char_string();
        let reduced = real_reduction(&w, &delivered);
        let div = divergence(&bot_reduction(&reduced));
        let (alpha_sum, active_sum, n) = self.records.values().fold((0.0, 0.0, 0usize), |(a, b, n), r| {
            let alpha = if r.participating_stake == 0 {
                0.0
            } else {
                r.alert_stake as f64 / r.participating_stake as f64
            };
            let active = if r.total_stake == 0 {
                0.0
            } else {
                r.participating_stake as f64 / r.total_stake as f64
            };
            (a + alpha, b + active, n + 1)
        });
        let n = n.max(1) as f64;
        let eta = if self.copies == 0 {
            self.sc.eta
        } else {
            self.on_time as f64 / self.copies as f64
        };
        let audit = rate_audit(&w, &reduced, alpha_sum / n, self.sc.f, eta, active_sum / n);

        let total: u64 = self.sc.stakes().iter().sum();
        let mut leaders: BTreeMap<PartyId, u64> = BTreeMap::new();
        for r in self.records.values() {
            for p in r.honest.iter().chain(&r.adversarial) {
                *leaders.entry(*p).or_default() += 1;
            }
        }
        let slots = self.records.len().max(1) as f64;
        let leader_rates = self
            .parties
            .iter()
            .zip(self.sc.stakes())
            .map(|(p, stake)| {
                let count = leaders.get(&p.id).copied().unwrap_or(0);
                LeaderRate {
                    party: p.id,
                    stake,
                    leader_slots: count,
                    blocks: p.blocks_produced,
                    rate: count as f64 / slots,
                    expected: phi(self.sc.f, stake as f64 / total as f64).unwrap_or(0.0),
                }
            })
            .collect();

        let final_chain = self
            .reference()
            .or_else(|| self.parties.iter().find(|p| !self.adversary.is_corrupted(p.id)))
            .map(|p| p.chain().clone());
        let chain = match &final_chain {
            Some(c) => {
                let adversarial = c
                    .blocks()
                    .iter()
                    .filter(|b| self.adversary.is_corrupted(b.creator()))
                    .count() as u64;
                ChainSummary {
                    final_len: c.len(),
                    final_head: c.head_hash().to_hex(),
                    honest_blocks: c.len() as u64 - adversarial,
                    adversarial_blocks: adversarial,
                    distinct_blocks: self.store.len() - 1,
                }
            }
            None => ChainSummary {
                final_len: 0,
                final_head: self.world.genesis.hash().to_hex(),
                honest_blocks: 0,
                adversarial_blocks: 0,
                distinct_blocks: self.store.len() - 1,
            },
        };

        let sync = SyncReport {
            checked: self.sync_checked,
            violations: self.sync_count,
            witnesses: self.sync_violations.clone(),
            resyncs: self.resyncs,
            resync_mismatches: self.resync_mismatches,
        };
        let outcome = if self.halted.is_some() {
            Outcome::Halted
        } else if self.sync_count > 0 || self.resync_mismatches > 0 || properties.iter().any(|p| !p.ok()) {
            Outcome::Violation
        } else if self.last_slot < self.sc.slots {
            Outcome::Incomplete
        } else {
            Outcome::Clean
        };
        let per_slot = (1..=self.sc.slots)
            .map(|sl| match self.traffic.get(&sl) {
                Some(&(c, o)) if c > 0 => Some(o as f64 / c as f64),
                _ => None,
            })
            .collect();
        let report = RunReport {
            schema: SCHEMA_VERSION,
            seed: self.sc.seed,
            outcome,
            halt_reason: self.halted.clone(),
            slots_completed: self.last_slot,
            ticks: self.world.clock.now(),
            clock_extensions: self.extensions,
            checks: rc.clone(),
            properties,
            round_sync: sync,
            round_lengths: self
                .rounds
                .iter()
                .map(|(&epoch, set)| EpochRounds {
                    epoch,
                    t_round: set.iter().copied().collect(),
                    uniform: set.len() == 1,
                })
                .collect(),
            delivery: Delivery {
                copies: self.copies,
                on_time: self.on_time,
                realized_eta: (self.copies > 0).then_some(eta),
                per_slot,
            },
            leader_rates,
            char_string: w,
            reduced,
            divergence: div,
            rate_audit: audit,
            chain,
            adversary: self.adversary.stats.clone(),
            bounds: BoundTable::compute(self.sc.bound_params(), rc.cp_k as f64, rc.cg_s as f64),
            scenario: self.sc.clone(),
        };
        let mut trace = self.trace;
        if self.sc.trace {
            trace.push(json!({"event": "end", "outcome": outcome, "ticks": report.ticks}).to_string());
        }
        RunOutput { report, trace }
    }
}

/// Genesis block and key material for a scenario.
pub fn build_genesis(sc: &Scenario) -> (Arc<GenesisBlock>, Vec<VrfKeypair>, Vec<KesKey>) {
    let stakes = sc.stakes();
    let vrf: Vec<VrfKeypair> = (0..sc.n_parties).map(|i| VrfKeypair::derive(sc.seed, i)).collect();
    let kes: Vec<KesKey> = (0..sc.n_parties).map(|i| KesKey::derive(sc.seed, i)).collect();
    let genesis = Arc::new(GenesisBlock {
        stakeholders: (0..sc.n_parties as usize)
            .map(|i| StakeHolder {
                id: i as PartyId,
                vrf_key: vrf[i].public,
                kes_key: kes[i].public,
                stake: stakes[i],
            })
            .collect(),
        nonce: hash_parts(&[b"genesis-nonce", &sc.seed.to_be_bytes()]),
        t_start: sc.t_start,
        t_round_1: sc.t_round_1,
    });
    (genesis, vrf, kes)
}

/// Leaders of the first-epoch slots `1..=slots` under the scenario's seed.
pub fn epoch_one_leaders(sc: &Scenario, slots: Slot) -> Vec<Vec<PartyId>> {
    let (genesis, vrf, _) = build_genesis(sc);
    let params = sc.chain_params();
    let info = PrefixState::genesis(&genesis).epoch_info(1, &genesis, &params);
    (1..=slots)
        .map(|sl| {
            (0..sc.n_parties)
                .filter(|&p| leader_eval(&vrf[p as usize], p, &info, sl, &params).2)
                .collect()
        })
        .collect()
}

/// Convenience wrapper: validate, run, summarize.
pub fn run(sc: Scenario) -> Result<RunOutput, ConfigError> {
    Ok(Simulation::new(sc)?.run())
}
