//! Global reference clock with the environment pacing contract.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{PartyId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Requester {
    Party(PartyId),
    Functionality(u32),
    Environment,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("{0:?} is not registered with the clock")]
    Unregistered(Requester),
    #[error("pacing stall at tick {now}: horizon not extended")]
    PacingStall { now: Tick },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Report {
    flag: bool,
    value: Option<Tick>,
}

#[derive(Debug, Clone)]
pub struct Clock {
    now: Tick,
    next: Tick,
    t_run: Tick,
    parties: BTreeMap<PartyId, Report>,
    /// Registered but excluded from the round-update quorum (corrupted).
    passive: BTreeSet<PartyId>,
    functionalities: BTreeMap<u32, bool>,
    round_updates: u64,
}

impl Clock {
    pub fn new(t_start: Tick, t_run: Tick) -> Self {
        Self {
            now: -t_start,
            next: 0,
            t_run,
            parties: BTreeMap::new(),
            passive: BTreeSet::new(),
            functionalities: BTreeMap::new(),
            round_updates: 0,
        }
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn next(&self) -> Tick {
        self.next
    }

    pub fn round_updates(&self) -> u64 {
        self.round_updates
    }

    pub fn register_party(&mut self, id: PartyId) {
        self.parties.entry(id).or_default();
    }

    pub fn deregister_party(&mut self, id: PartyId) {
        self.parties.remove(&id);
        self.passive.remove(&id);
        self.maybe_round_update();
    }

    pub fn is_registered(&self, id: PartyId) -> bool {
        self.parties.contains_key(&id)
    }

    /// Corrupted parties keep read access but no longer gate round updates.
    pub fn set_passive(&mut self, id: PartyId) {
        self.passive.insert(id);
        self.maybe_round_update();
    }

    pub fn register_functionality(&mut self, id: u32) {
        self.functionalities.entry(id).or_insert(false);
    }

    pub fn read(&self, who: Requester) -> Result<Tick, ClockError> {
        match who {
            Requester::Environment | Requester::Adversary => Ok(self.now),
            Requester::Party(id) if self.parties.contains_key(&id) => Ok(self.now),
            Requester::Functionality(id) if self.functionalities.contains_key(&id) => Ok(self.now),
            _ => Err(ClockError::Unregistered(who)),
        }
    }

    pub fn advance(&mut self) -> Result<Tick, ClockError> {
        if self.now >= self.next {
            return Err(ClockError::PacingStall { now: self.now });
        }
        self.now += 1;
        Ok(self.now)
    }

    /// The environment may always push the horizon forward.
    pub fn extend_to(&mut self, next: Tick) {
        self.next = self.next.max(next);
    }

    pub fn update(&mut self, party: PartyId, t_next: Option<Tick>) -> Result<(), ClockError> {
        let r = self
            .parties
            .get_mut(&party)
            .ok_or(ClockError::Unregistered(Requester::Party(party)))?;
        r.flag = true;
        r.value = t_next;
        self.maybe_round_update();
        Ok(())
    }

    pub fn functionality_update(&mut self, id: u32) -> Result<(), ClockError> {
        let f = self
            .functionalities
            .get_mut(&id)
            .ok_or(ClockError::Unregistered(Requester::Functionality(id)))?;
        *f = true;
        self.maybe_round_update();
        Ok(())
    }

    pub fn has_reported(&self, party: PartyId) -> bool {
        self.parties.get(&party).is_some_and(|r| r.flag)
    }

    fn maybe_round_update(&mut self) {
        let quorum: Vec<&Report> = self
            .parties
            .iter()
            .filter(|(id, _)| !self.passive.contains(id))
            .map(|(_, r)| r)
            .collect();
        if quorum.is_empty() && self.functionalities.is_empty() {
            return;
        }
        if !quorum.iter().all(|r| r.flag) || !self.functionalities.values().all(|f| *f) {
            return;
        }
        let values: Vec<Tick> = quorum.iter().filter_map(|r| r.value).collect();
        if let Some(m) = majority(&values) {
            self.next = self.next.max(self.t_run + m);
        }
        for r in self.parties.values_mut() {
            *r = Report::default();
        }
        for f in self.functionalities.values_mut() {
            *f = false;
        }
        self.round_updates += 1;
    }
}

/// Most frequent value; ties go to the smallest.
pub fn majority(values: &[Tick]) -> Option<Tick> {
    let mut counts: BTreeMap<Tick, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(*v).or_default() += 1;
    }
    let mut best: Option<(Tick, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}
