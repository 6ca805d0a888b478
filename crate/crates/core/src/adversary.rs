//! Adversary strategies and the admissibility wrapper.
//!
//! The adversary sees every honest multicast through its leakage and may
//! delay, reorder or mix queued copies. Under `delay-attack` and
//! `private-fork` it also produces blocks for corrupted parties with their
//! own keys; under `passive` and `max-delay` corrupted parties keep running
//! the honest code and only count as adversarial.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{fork_index, Chain, ChainParams, ChainValidator, GenesisBlock};
use crate::crypto::KeyRegistry;
use crate::network::{MessageId, Network, Rd};
use crate::party::{build_block, leader_eval, Channel, LeakRecord, Message, Party, SlotTiming};
use crate::types::{epoch_of, PartyId, Slot, Tick};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Passive,
    MaxDelay,
    DelayAttack,
    PrivateFork,
}

impl Strategy {
    /// Whether corrupted parties are driven by the adversary instead of the
    /// honest code.
    pub fn drives_parties(self) -> bool {
        matches!(self, Strategy::DelayAttack | Strategy::PrivateFork)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptAt {
    pub party: PartyId,
    pub tick: Tick,
}

/// Fixed delay for the copy of the block of `slot` sent to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedDelay {
    pub slot: Slot,
    pub to: PartyId,
    pub delay: Tick,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub strategy: Strategy,
    /// Corrupted from the start.
    #[serde(default)]
    pub corrupted: Vec<PartyId>,
    #[serde(default)]
    pub corrupt_at: Vec<CorruptAt>,
    /// Copies the strategy does not otherwise touch get a delay drawn
    /// uniformly from `[0, jitter]` (capped at the deadline for on-time
    /// copies).
    #[serde(default)]
    pub jitter: Option<Tick>,
    /// Delay-attack blocks go out this far into the execution period.
    #[serde(default = "default_lag")]
    pub attack_lag_frac: f64,
    /// Private fork is released once it would displace at least this many
    /// honest blocks.
    #[serde(default = "default_release_depth")]
    pub release_depth: usize,
    #[serde(default)]
    pub script: Vec<ScriptedDelay>,
}

fn default_lag() -> f64 {
    0.5
}

fn default_release_depth() -> usize {
    1
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Passive,
            corrupted: Vec::new(),
            corrupt_at: Vec::new(),
            jitter: None,
            attack_lag_frac: default_lag(),
            release_depth: default_release_depth(),
            script: Vec::new(),
        }
    }
}

/// Network knob invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum NetCommand {
    Delay { channel: Channel, mid: MessageId, delay: Tick },
    Mix { channel: Channel, a: MessageId, b: MessageId },
    Swap { channel: Channel, a: MessageId, b: MessageId },
}

/// What the adversary may touch while driving corrupted parties.
pub struct AdvContext<'a> {
    pub now: Tick,
    pub genesis: &'a Arc<GenesisBlock>,
    pub params: &'a ChainParams,
    pub registry: &'a KeyRegistry,
    pub validator: &'a mut ChainValidator,
    pub bc: &'a mut Network<Message>,
    pub parties: &'a mut [Party],
    /// Timing of the reference honest party, if any is alert.
    pub reference: Option<SlotTiming>,
    pub t_run: Tick,
}

#[derive(Clone, Debug)]
struct PendingAttack {
    party: PartyId,
    slot: Slot,
    at: Tick,
    base: Chain,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AdversaryStats {
    pub blocks: u64,
    pub releases: u64,
    pub commands: u64,
}

#[derive(Clone, Debug)]
pub struct Adversary {
    pub cfg: AdversaryConfig,
    corrupted: BTreeSet<PartyId>,
    rng: ChaCha8Rng,
    last_slot: Slot,
    private: Option<Chain>,
    pending: Vec<PendingAttack>,
    pub stats: AdversaryStats,
}

impl Adversary {
    pub fn new(cfg: AdversaryConfig, seed: u64) -> Self {
        let corrupted = cfg.corrupted.iter().copied().collect();
        Self {
            cfg,
            corrupted,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xad5e_5a11),
            last_slot: 0,
            private: None,
            pending: Vec::new(),
            stats: AdversaryStats::default(),
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.cfg.strategy
    }

    pub fn corrupted(&self) -> &BTreeSet<PartyId> {
        &self.corrupted
    }

    pub fn is_corrupted(&self, p: PartyId) -> bool {
        self.corrupted.contains(&p)
    }

    pub fn corrupt(&mut self, p: PartyId) {
        self.corrupted.insert(p);
    }

    fn draw(&mut self) -> Option<Tick> {
        self.cfg.jitter.map(|j| self.rng.gen_range(0..=j.max(0)))
    }

    /// Reaction to one honest multicast. `round` is the current round length.
    pub fn on_leak(&mut self, leak: &LeakRecord, round: Tick) -> Vec<NetCommand> {
        let mut out = Vec::new();
        let channel = leak.channel;
        for c in &leak.copies {
            let scripted = leak.block_slot.and_then(|sl| {
                self.cfg
                    .script
                    .iter()
                    .find(|s| s.slot == sl && s.to == c.recipient && channel == Channel::Bc)
                    .map(|s| s.delay)
            });
            let to_deadline = leak.deadline - leak.now;
            let delay = match (scripted, self.cfg.strategy) {
                (Some(d), _) => Some(d),
                (None, Strategy::MaxDelay) => Some(match c.rd {
                    Rd::OnTimeUnset => to_deadline,
                    _ => to_deadline.max(0) + 2 * round + 1,
                }),
                (None, _) => self.draw().map(|d| match c.rd {
                    Rd::OnTimeUnset => d.min(to_deadline),
                    _ => d,
                }),
            };
            if let Some(delay) = delay {
                out.push(NetCommand::Delay {
                    channel,
                    mid: c.mid,
                    delay,
                });
            }
        }
        self.stats.commands += out.len() as u64;
        out
    }

    /// Applies commands; the network ignores invalid ones.
    pub fn apply(
        cmds: &[NetCommand],
        now: Tick,
        bc: &mut Network<Message>,
        tx: &mut Network<Message>,
        adj: &mut Network<Message>,
    ) {
        for cmd in cmds {
            let pick = |ch: Channel, bc, tx, adj| match ch {
                Channel::Bc => bc,
                Channel::Tx => tx,
                Channel::Adj => adj,
            };
            match *cmd {
                NetCommand::Delay { channel, mid, delay } => {
                    pick(channel, &mut *bc, &mut *tx, &mut *adj).set_delays(&[(delay, mid)], now)
                }
                NetCommand::Mix { channel, a, b } => {
                    pick(channel, &mut *bc, &mut *tx, &mut *adj).mix(a, b);
                }
                NetCommand::Swap { channel, a, b } => pick(channel, &mut *bc, &mut *tx, &mut *adj).swap_order(a, b),
            }
        }
    }

    /// Per-tick block production for driven corrupted parties.
    pub fn act(&mut self, cx: &mut AdvContext) {
        if !self.cfg.strategy.drives_parties() || self.corrupted.is_empty() {
            return;
        }
        let Some(reference) = cx.reference else { return };
        let best = self.best_honest(cx.parties);
        if reference.slot > self.last_slot && reference.slot > 0 {
            self.last_slot = reference.slot;
            self.on_new_slot(reference, &best, cx);
        }
        match self.cfg.strategy {
            Strategy::DelayAttack => self.fire_attacks(cx),
            Strategy::PrivateFork => self.maybe_release(&best, cx),
            _ => {}
        }
    }

    fn best_honest(&self, parties: &[Party]) -> Chain {
        let mut best: Option<&Chain> = None;
        for p in parties.iter().filter(|p| !self.is_corrupted(p.id) && p.is_alert()) {
            if best.is_none_or(|b| p.chain().len() > b.len()) {
                best = Some(p.chain());
            }
        }
        best.cloned().unwrap_or_else(|| parties[0].chain().truncated(usize::MAX))
    }

    fn on_new_slot(&mut self, t: SlotTiming, best: &Chain, cx: &mut AdvContext) {
        let sl = t.slot;
        match self.cfg.strategy {
            Strategy::DelayAttack => {
                // Pretend the previous round's block never arrived.
                let base = if best.head_slot() + 1 == sl {
                    best.prefix_before_slot(sl - 1)
                } else {
                    best.clone()
                };
                let lag = (self.cfg.attack_lag_frac * cx.t_run as f64).round() as Tick;
                let at = t.t_begin + lag.clamp(0, (cx.t_run - 1).max(0));
                for &c in &self.corrupted {
                    self.pending.push(PendingAttack {
                        party: c,
                        slot: sl,
                        at,
                        base: base.clone(),
                    });
                }
            }
            Strategy::PrivateFork => {
                let base = match &self.private {
                    Some(p) if p.len() >= best.len() => p.clone(),
                    _ => best.clone(),
                };
                let corrupted: Vec<PartyId> = self.corrupted.iter().copied().collect();
                for c in corrupted {
                    if let Some(next) = self.forge(c, sl, &base, cx) {
                        self.private = Some(next);
                        break;
                    }
                }
                if self.private.as_ref().is_some_and(|p| p.len() < best.len()) {
                    self.private = None;
                }
            }
            _ => {}
        }
    }

    /// Block for `party` in `sl` on top of `base`, if the party leads.
    fn forge(&mut self, party: PartyId, sl: Slot, base: &Chain, cx: &mut AdvContext) -> Option<Chain> {
        if base.head_slot() >= sl {
            return None;
        }
        let st = cx.validator.state(base, cx.registry).ok()?;
        let info = st.epoch_info(epoch_of(sl, cx.params.epoch_len), cx.genesis, cx.params);
        let idx = cx.parties.iter().position(|p| p.id == party)?;
        let key = cx.parties[idx].vrf_key().clone();
        let (rho, test, leader) = leader_eval(&key, party, &info, sl, cx.params);
        if !leader {
            return None;
        }
        let kes = cx.parties[idx].kes_key_mut();
        if kes.current_period() > sl {
            return None;
        }
        let block = build_block(base, party, kes, sl, cx.now, test, rho, Vec::new(), Vec::new());
        let mut next = base.clone();
        next.push(block);
        cx.validator.check(&next, cx.now, cx.registry).ok()?;
        self.stats.blocks += 1;
        cx.parties[idx].set_chain(next.clone());
        Some(next)
    }

    fn fire_attacks(&mut self, cx: &mut AdvContext) {
        let due: Vec<PendingAttack> = {
            let (due, keep) = std::mem::take(&mut self.pending).into_iter().partition(|p| p.at <= cx.now);
            self.pending = keep;
            due
        };
        let mut done_slots = BTreeSet::new();
        for p in due {
            if done_slots.contains(&p.slot) {
                continue;
            }
            if let Some(chain) = self.forge(p.party, p.slot, &p.base, cx) {
                done_slots.insert(p.slot);
                self.send(chain, cx);
            }
        }
    }

    fn maybe_release(&mut self, best: &Chain, cx: &mut AdvContext) {
        let Some(private) = &self.private else { return };
        if private.len() <= best.len() {
            return;
        }
        let displaced = best.len() - fork_index(private, best);
        if displaced < self.cfg.release_depth {
            return;
        }
        let chain = self.private.take().expect("checked above");
        self.stats.releases += 1;
        self.send(chain, cx);
    }

    fn send(&mut self, chain: Chain, cx: &mut AdvContext) {
        let msg = Arc::new(chain);
        let honest: Vec<PartyId> = cx
            .bc
            .parties()
            .filter(|p| !self.corrupted.contains(p))
            .collect();
        let mut targets = Vec::with_capacity(honest.len());
        let mut delays = Vec::new();
        for r in honest {
            match self.draw() {
                Some(d) => {
                    delays.push(d);
                    targets.push((Message::Chain(msg.clone()), r, Rd::LossyUnset, cx.now));
                }
                None => targets.push((Message::Chain(msg.clone()), r, Rd::OnTimeSet, cx.now)),
            }
        }
        let leaks = cx.bc.adversarial_multicast(targets, cx.now);
        let pairs: Vec<(Tick, MessageId)> = delays.into_iter().zip(leaks.iter().map(|l| l.mid)).collect();
        cx.bc.set_delays(&pairs, cx.now);
    }
}

/// Bounds the wrapper enforces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperConstraints {
    /// Alert share of participating stake.
    pub alpha: f64,
    /// Participating share of total stake.
    pub beta: f64,
    pub eta: f64,
    pub eps: f64,
    pub f: f64,
}

impl WrapperConstraints {
    /// `alpha (1 - f)^2 eta > (1 + eps) / 2`.
    pub fn predicate(&self) -> bool {
        self.alpha * (1.0 - self.f).powi(2) * self.eta > (1.0 + self.eps) / 2.0
    }
}

/// Observed quantities the wrapper checks each round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WrapperState {
    pub alert_stake: u64,
    pub participating_stake: u64,
    pub total_stake: u64,
    /// Cumulative honest copies and on-time copies.
    pub copies: u64,
    pub on_time: u64,
}

/// Minimum number of copies before the delivery ratio is judged.
pub const MIN_COPIES: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub ok: bool,
    pub reason: Option<String>,
}

/// Admissibility of the current round. The delivery ratio gets three
/// standard errors of slack and is only judged after [`MIN_COPIES`].
pub fn check_admissibility(s: &WrapperState, c: &WrapperConstraints) -> Verdict {
    let fail = |r: String| Verdict { ok: false, reason: Some(r) };
    if s.total_stake > 0 {
        let beta = s.participating_stake as f64 / s.total_stake as f64;
        if beta + 1e-12 < c.beta {
            return fail(format!("participating stake {beta:.4} below {}", c.beta));
        }
    }
    if s.participating_stake > 0 {
        let alpha = s.alert_stake as f64 / s.participating_stake as f64;
        if alpha + 1e-12 < c.alpha {
            return fail(format!("alert stake {alpha:.4} below {}", c.alpha));
        }
    }
    if s.copies >= MIN_COPIES {
        let eta = s.on_time as f64 / s.copies as f64;
        let sigma = (c.eta * (1.0 - c.eta) / s.copies as f64).sqrt();
        if eta < c.eta - 3.0 * sigma {
            return fail(format!("delivery ratio {eta:.4} below {}", c.eta));
        }
    }
    Verdict { ok: true, reason: None }
}
