//! Lossy multicast network with per-copy delivery state and adversarial
//! delay, reorder and mix controls.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{PartyId, Tick};

pub type MessageId = u64;

/// Delivery state of one queued copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rd {
    /// Deliverable by the deadline; delay not yet chosen.
    OnTimeUnset = 0,
    /// At the adversary's mercy; delay not yet chosen.
    LossyUnset = 1,
    /// On time with the delay fixed.
    OnTimeSet = 2,
    /// Delay fixed, possibly unbounded.
    DelayedSet = 3,
}

impl Rd {
    pub fn is_set(self) -> bool {
        matches!(self, Rd::OnTimeSet | Rd::DelayedSet)
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone)]
pub struct NetMessage<P> {
    pub payload: P,
    pub mid: MessageId,
    pub delivery: Tick,
    pub deadline: Tick,
    pub recipient: PartyId,
    pub rd: Rd,
}

/// What the adversary learns about each copy of a multicast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    pub recipient: PartyId,
    pub mid: MessageId,
    pub rd: Rd,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("party {0} is not registered with the network")]
    Unregistered(PartyId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NetEvent {
    Enqueue {
        tick: Tick,
        mid: MessageId,
        rd: u8,
        recipient: PartyId,
        delivery: Tick,
        deadline: Tick,
    },
    Delay {
        tick: Tick,
        mid: MessageId,
        rd: u8,
        delivery: Tick,
    },
    Fetch {
        tick: Tick,
        mid: MessageId,
        recipient: PartyId,
        delivery: Tick,
    },
    /// Release rule applied to a copy the adversary left unset.
    AutoPromote {
        tick: Tick,
        mid: MessageId,
        rd: u8,
        recipient: PartyId,
        delivery: Tick,
    },
}

#[derive(Debug, Clone)]
pub struct Network<P> {
    pub name: String,
    queue: Vec<NetMessage<P>>,
    parties: BTreeSet<PartyId>,
    eta: f64,
    rng: ChaCha8Rng,
    next_mid: MessageId,
    trace: bool,
    events: Vec<NetEvent>,
}

impl<P: Clone> Network<P> {
    pub fn new(name: &str, eta: f64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            queue: Vec::new(),
            parties: BTreeSet::new(),
            eta: eta.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_mid: 0,
            trace: false,
            events: Vec::new(),
        }
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on;
    }

    pub fn drain_events(&mut self) -> Vec<NetEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn register(&mut self, p: PartyId) {
        self.parties.insert(p);
    }

    pub fn deregister(&mut self, p: PartyId) {
        self.parties.remove(&p);
    }

    pub fn is_registered(&self, p: PartyId) -> bool {
        self.parties.contains(&p)
    }

    pub fn parties(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.parties.iter().copied()
    }

    pub fn queue(&self) -> &[NetMessage<P>] {
        &self.queue
    }

    pub fn get(&self, mid: MessageId) -> Option<&NetMessage<P>> {
        self.index_of(mid).map(|i| &self.queue[i])
    }

    fn index_of(&self, mid: MessageId) -> Option<usize> {
        self.queue.iter().position(|m| m.mid == mid)
    }

    fn fresh_mid(&mut self) -> MessageId {
        let m = self.next_mid;
        self.next_mid += 1;
        m
    }

    fn enqueue(&mut self, payload: P, recipient: PartyId, rd: Rd, now: Tick, deadline: Tick) -> Leak {
        let mid = self.fresh_mid();
        if self.trace {
            self.events.push(NetEvent::Enqueue {
                tick: now,
                mid,
                rd: rd.code(),
                recipient,
                delivery: now,
                deadline,
            });
        }
        self.queue.push(NetMessage {
            payload,
            mid,
            delivery: now,
            deadline,
            recipient,
            rd,
        });
        Leak { recipient, mid, rd }
    }

    /// One copy per registered party other than the sender; each copy is
    /// on-time with probability `eta` and lossy otherwise.
    pub fn honest_multicast(
        &mut self,
        sender: PartyId,
        payload: P,
        t_next: Tick,
        now: Tick,
    ) -> Result<Vec<Leak>, NetError> {
        if !self.parties.contains(&sender) {
            return Err(NetError::Unregistered(sender));
        }
        let recipients: Vec<PartyId> = self.parties.iter().copied().filter(|p| *p != sender).collect();
        let mut leaks = Vec::with_capacity(recipients.len());
        for r in recipients {
            let rd = if self.rng.gen_bool(self.eta) {
                Rd::OnTimeUnset
            } else {
                Rd::LossyUnset
            };
            leaks.push(self.enqueue(payload.clone(), r, rd, now, t_next));
        }
        Ok(leaks)
    }

    /// Adversary-chosen copies; recipients outside the party set are skipped.
    pub fn adversarial_multicast(&mut self, targets: Vec<(P, PartyId, Rd, Tick)>, now: Tick) -> Vec<Leak> {
        let mut leaks = Vec::new();
        for (payload, recipient, rd, t_next) in targets {
            if self.parties.contains(&recipient) {
                leaks.push(self.enqueue(payload, recipient, rd, now, t_next));
            }
        }
        leaks
    }

    /// Applies `(delay, mid)` pairs; invalid pairs are ignored.
    pub fn set_delays(&mut self, pairs: &[(Tick, MessageId)], now: Tick) {
        for &(t, mid) in pairs {
            if t < 0 {
                continue;
            }
            let Some(i) = self.index_of(mid) else { continue };
            let m = &mut self.queue[i];
            match m.rd {
                Rd::LossyUnset => {
                    m.delivery = m.delivery.saturating_add(t);
                    m.rd = Rd::DelayedSet;
                }
                Rd::OnTimeUnset if m.delivery + t <= m.deadline => {
                    m.delivery += t;
                    m.rd = Rd::OnTimeSet;
                }
                _ => continue,
            }
            if self.trace {
                let m = &self.queue[i];
                self.events.push(NetEvent::Delay {
                    tick: now,
                    mid,
                    rd: m.rd.code(),
                    delivery: m.delivery,
                });
            }
        }
    }

    /// Swaps the delivery flags of two unset copies.
    pub fn mix(&mut self, a: MessageId, b: MessageId) -> bool {
        let (Some(i), Some(j)) = (self.index_of(a), self.index_of(b)) else {
            return false;
        };
        let unset = |rd: Rd| matches!(rd, Rd::OnTimeUnset | Rd::LossyUnset);
        if !unset(self.queue[i].rd) || !unset(self.queue[j].rd) {
            return false;
        }
        let tmp = self.queue[i].rd;
        self.queue[i].rd = self.queue[j].rd;
        self.queue[j].rd = tmp;
        true
    }

    pub fn swap_order(&mut self, a: MessageId, b: MessageId) {
        if let (Some(i), Some(j)) = (self.index_of(a), self.index_of(b)) {
            self.queue.swap(i, j);
        }
    }

    /// Removes and returns every deliverable copy for `party`, in queue order.
    pub fn fetch(&mut self, party: PartyId, now: Tick) -> Vec<(P, Tick)> {
        let mut out = Vec::new();
        let mut kept = Vec::with_capacity(self.queue.len());
        for m in self.queue.drain(..) {
            if m.recipient == party && m.rd.is_set() && m.delivery <= now {
                if self.trace {
                    self.events.push(NetEvent::Fetch {
                        tick: now,
                        mid: m.mid,
                        recipient: party,
                        delivery: m.delivery,
                    });
                }
                out.push((m.payload, m.delivery));
            } else {
                kept.push(m);
            }
        }
        self.queue = kept;
        out
    }

    /// Release rule: on-time copies past their deadline are delivered with no
    /// added delay; lossy copies get `2 * round + 1` extra ticks.
    pub fn auto_promote(&mut self, now: Tick, round_len: Tick) -> usize {
        let mut promoted = 0;
        for m in self.queue.iter_mut() {
            let changed = match m.rd {
                Rd::OnTimeUnset if m.deadline <= now => {
                    m.rd = Rd::OnTimeSet;
                    true
                }
                Rd::LossyUnset => {
                    m.delivery = m.delivery.saturating_add(2 * round_len + 1);
                    m.rd = Rd::DelayedSet;
                    true
                }
                _ => false,
            };
            if changed {
                promoted += 1;
                if self.trace {
                    self.events.push(NetEvent::AutoPromote {
                        tick: now,
                        mid: m.mid,
                        rd: m.rd.code(),
                        recipient: m.recipient,
                        delivery: m.delivery,
                    });
                }
            }
        }
        promoted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(eta: f64, n: u32) -> Network<u32> {
        let mut nw = Network::new("bc", eta, 7);
        for p in 0..=n {
            nw.register(p);
        }
        nw
    }

    #[test]
    fn degenerate_eta() {
        let mut a = net(1.0, 4);
        let leaks = a.honest_multicast(0, 1, 20, 0).unwrap();
        assert_eq!(leaks.len(), 4);
        assert!(leaks.iter().all(|l| l.rd == Rd::OnTimeUnset));
        let mut b = net(0.0, 4);
        assert!(b.honest_multicast(0, 1, 20, 0).unwrap().iter().all(|l| l.rd == Rd::LossyUnset));
    }

    #[test]
    fn unregistered_sender_is_rejected() {
        let mut a = net(1.0, 2);
        assert_eq!(a.honest_multicast(9, 1, 20, 0), Err(NetError::Unregistered(9)));
    }

    #[test]
    fn calibration_two_thirds() {
        let mut a = net(2.0 / 3.0, 1);
        let mut on_time = 0;
        let n = 30_000;
        for _ in 0..n {
            let l = a.honest_multicast(0, 0, 10, 0).unwrap();
            on_time += l.iter().filter(|x| x.rd == Rd::OnTimeUnset).count();
        }
        let frac = on_time as f64 / n as f64;
        assert!((frac - 2.0 / 3.0).abs() <= 0.01, "{frac}");
    }

    fn single(rd: Rd, delivery: Tick, deadline: Tick) -> (Network<u32>, MessageId) {
        let mut a = net(1.0, 1);
        a.adversarial_multicast(vec![(5, 1, rd, deadline)], delivery);
        (a, 0)
    }

    #[test]
    fn set_delays_on_time_within_deadline() {
        let (mut a, mid) = single(Rd::OnTimeUnset, 10, 20);
        a.set_delays(&[(5, mid)], 10);
        let m = a.get(mid).unwrap();
        assert_eq!((m.delivery, m.rd), (15, Rd::OnTimeSet));
    }

    #[test]
    fn set_delays_past_deadline_is_ignored() {
        let (mut a, mid) = single(Rd::OnTimeUnset, 10, 20);
        a.set_delays(&[(15, mid)], 10);
        let m = a.get(mid).unwrap();
        assert_eq!((m.delivery, m.rd), (10, Rd::OnTimeUnset));
    }

    #[test]
    fn set_delays_lossy_unbounded() {
        let (mut a, mid) = single(Rd::LossyUnset, 10, 20);
        a.set_delays(&[(1_000_000, mid), (3, 999)], 10);
        let m = a.get(mid).unwrap();
        assert_eq!((m.delivery, m.rd), (1_000_010, Rd::DelayedSet));
        assert!(a.fetch(1, 50).is_empty());
    }

    #[test]
    fn mix_rules() {
        let mut a = net(1.0, 2);
        a.adversarial_multicast(
            vec![(0, 1, Rd::OnTimeUnset, 9), (1, 2, Rd::LossyUnset, 9), (2, 1, Rd::OnTimeSet, 9)],
            0,
        );
        assert!(a.mix(0, 1));
        assert_eq!(a.get(0).unwrap().rd, Rd::LossyUnset);
        assert_eq!(a.get(1).unwrap().rd, Rd::OnTimeUnset);
        assert!(!a.mix(2, 1));
        assert!(!a.mix(0, 77));
    }

    #[test]
    fn fetch_boundaries_and_order() {
        let mut a = net(1.0, 1);
        a.adversarial_multicast(
            vec![(10, 1, Rd::OnTimeSet, 20), (11, 1, Rd::OnTimeSet, 20), (12, 1, Rd::OnTimeUnset, 20)],
            10,
        );
        a.swap_order(0, 1);
        let got = a.fetch(1, 10);
        assert_eq!(got, vec![(11, 10), (10, 10)]);
        assert!(a.fetch(1, 100).is_empty(), "rd=0 is never fetched directly");
    }

    #[test]
    fn swap_twice_is_identity() {
        let mut a = net(1.0, 1);
        a.adversarial_multicast(vec![(1, 1, Rd::OnTimeSet, 9), (2, 1, Rd::OnTimeSet, 9)], 0);
        a.swap_order(0, 1);
        a.swap_order(0, 1);
        a.swap_order(0, 0);
        assert_eq!(a.fetch(1, 0), vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn release_rule() {
        let mut a = net(1.0, 1);
        a.adversarial_multicast(vec![(1, 1, Rd::OnTimeUnset, 20), (2, 1, Rd::LossyUnset, 20)], 10);
        assert_eq!(a.auto_promote(15, 10), 1);
        assert!(a.fetch(1, 19).is_empty());
        assert_eq!(a.auto_promote(20, 10), 1);
        assert_eq!(a.fetch(1, 20), vec![(1, 10)]);
        assert_eq!(a.fetch(1, 31), vec![(2, 31)]);
    }

    #[test]
    fn empty_adversarial_multicast_is_noop() {
        let mut a = net(1.0, 1);
        assert!(a.adversarial_multicast(vec![], 0).is_empty());
        assert!(a.queue().is_empty());
    }
}
