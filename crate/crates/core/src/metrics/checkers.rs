//! Property checkers over onset snapshots.
//!
//! Every block ever held by a recorded party is interned in a [`BlockStore`];
//! a [`Snapshot`] names a party's head at the start of one of its slots.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::chain::Chain;
use crate::types::{Digest, PartyId, Slot};

pub type NodeId = u32;
const GENESIS: NodeId = 0;
const MAX_WITNESSES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub hash: Digest,
    pub parent: NodeId,
    pub slot: Slot,
    pub height: u32,
    pub creator: Option<PartyId>,
    pub honest: bool,
}

#[derive(Clone, Debug)]
pub struct BlockStore {
    ids: HashMap<Digest, NodeId>,
    nodes: Vec<Node>,
}

impl BlockStore {
    pub fn new(genesis_hash: Digest) -> Self {
        let root = Node {
            hash: genesis_hash,
            parent: GENESIS,
            slot: 0,
            height: 0,
            creator: None,
            honest: true,
        };
        Self {
            ids: HashMap::from([(genesis_hash, GENESIS)]),
            nodes: vec![root],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn id(&self, hash: &Digest) -> Option<NodeId> {
        self.ids.get(hash).copied()
    }

    /// Interns every block of `chain` not seen before and returns the head id.
    /// `honest` classifies a block creator at insertion time.
    pub fn insert_chain(&mut self, chain: &Chain, honest: impl Fn(PartyId) -> bool) -> NodeId {
        let blocks = chain.blocks();
        let mut start = blocks.len();
        while start > 0 && !self.ids.contains_key(&blocks[start - 1].hash) {
            start -= 1;
        }
        let mut parent = if start == 0 {
            GENESIS
        } else {
            self.ids[&blocks[start - 1].hash]
        };
        for b in &blocks[start..] {
            let id = self.nodes.len() as NodeId;
            let creator = b.creator();
            self.nodes.push(Node {
                hash: b.hash,
                parent,
                slot: b.slot(),
                height: self.node(parent).height + 1,
                creator: Some(creator),
                honest: honest(creator),
            });
            self.ids.insert(b.hash, id);
            parent = id;
        }
        parent
    }

    /// Path from the first block to `id`, indexed by `height - 1`.
    pub fn path(&self, mut id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.node(id).height as usize);
        while id != GENESIS {
            out.push(id);
            id = self.node(id).parent;
        }
        out.reverse();
        out
    }

    pub fn ancestor_at(&self, mut id: NodeId, height: u32) -> NodeId {
        while self.node(id).height > height {
            id = self.node(id).parent;
        }
        id
    }

    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        self.ancestor_at(b, self.node(a).height) == a
    }

    pub fn common_ancestor(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        let h = self.node(a).height.min(self.node(b).height);
        a = self.ancestor_at(a, h);
        b = self.ancestor_at(b, h);
        while a != b {
            a = self.node(a).parent;
            b = self.node(b).parent;
        }
        a
    }
}

/// Head of an alert party's chain at the start of one of its slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub party: PartyId,
    pub slot: Slot,
    pub tick: i64,
    pub head: NodeId,
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub slot: Slot,
    pub party: Option<PartyId>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: String,
    pub checked: u64,
    pub violations: u64,
    pub witnesses: Vec<Violation>,
}

impl CheckReport {
    fn new(property: impl Into<String>) -> Self {
        Self {
            property: property.into(),
            checked: 0,
            violations: 0,
            witnesses: Vec::new(),
        }
    }

    fn fail(&mut self, v: impl FnOnce() -> Violation) {
        self.violations += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(v());
        }
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Largest onset slot (and a party) at which each distinct head was held.
fn latest_by_head(snaps: &[Snapshot]) -> BTreeMap<NodeId, (Slot, PartyId)> {
    let mut out: BTreeMap<NodeId, (Slot, PartyId)> = BTreeMap::new();
    for s in snaps {
        let e = out.entry(s.head).or_insert((s.slot, s.party));
        if s.slot > e.0 {
            *e = (s.slot, s.party);
        }
    }
    out
}

/// Common prefix: a chain held at slot `u`, minus its last `k` blocks, is a
/// prefix of every chain held at any slot `v >= u`.
pub fn check_cp(store: &BlockStore, snaps: &[Snapshot], k: u32) -> CheckReport {
    let mut rep = CheckReport::new(format!("CP(k={k})"));
    let mut earliest: BTreeMap<NodeId, (Slot, PartyId)> = BTreeMap::new();
    for s in snaps {
        let t = store.ancestor_at(s.head, s.len.saturating_sub(k));
        let e = earliest.entry(t).or_insert((s.slot, s.party));
        if s.slot < e.0 {
            *e = (s.slot, s.party);
        }
    }
    let latest = latest_by_head(snaps);
    let paths: Vec<(NodeId, Slot, PartyId, Vec<NodeId>)> = latest
        .iter()
        .map(|(&h, &(v, p))| (h, v, p, store.path(h)))
        .collect();
    for (&t, &(u, pu)) in &earliest {
        let th = store.node(t).height as usize;
        for (h, v, pv, path) in &paths {
            if *v < u {
                continue;
            }
            rep.checked += 1;
            let ok = th == 0 || path.get(th - 1) == Some(&t);
            if !ok {
                rep.fail(|| {
                    let fork = store.common_ancestor(t, *h);
                    Violation {
                        slot: *v,
                        party: Some(*pv),
                        detail: format!(
                            "truncated chain of party {pu} at slot {u} (tip {:?}) not a prefix of head {:?}; fork after slot {}",
                            store.node(t).hash,
                            store.node(*h).hash,
                            store.node(fork).slot
                        ),
                    }
                });
            }
        }
    }
    rep
}

/// Chain growth: every window of `s` consecutive slots before the onset slot
/// holds at least `tau * s` blocks of the held chain.
pub fn check_cg(store: &BlockStore, snaps: &[Snapshot], tau: f64, s: u64) -> CheckReport {
    let mut rep = CheckReport::new(format!("CG(tau={tau},s={s})"));
    let need = (tau * s as f64).ceil() as usize;
    for (&h, &(u, p)) in &latest_by_head(snaps) {
        let slots: Vec<Slot> = store.path(h).iter().map(|&id| store.node(id).slot).collect();
        sliding_windows(&slots, u, s, |lo, count| {
            rep.checked += 1;
            if count < need {
                rep.fail(|| Violation {
                    slot: u,
                    party: Some(p),
                    detail: format!("slots {lo}..{} hold {count} blocks, need {need}", lo + s - 1),
                });
            }
        });
    }
    rep
}

/// Existential chain quality: every window of `s` consecutive slots before
/// the onset slot holds at least one honest block of the held chain.
pub fn check_ecq(store: &BlockStore, snaps: &[Snapshot], s: u64) -> CheckReport {
    let mut rep = CheckReport::new(format!("ECQ(s={s})"));
    for (&h, &(u, p)) in &latest_by_head(snaps) {
        let slots: Vec<Slot> = store
            .path(h)
            .iter()
            .map(|&id| store.node(id))
            .filter(|n| n.honest)
            .map(|n| n.slot)
            .collect();
        sliding_windows(&slots, u, s, |lo, count| {
            rep.checked += 1;
            if count == 0 {
                rep.fail(|| Violation {
                    slot: u,
                    party: Some(p),
                    detail: format!("no honest block in slots {lo}..{}", lo + s - 1),
                });
            }
        });
    }
    rep
}

/// Calls `f(lo, count)` for each window `[lo, lo + s - 1]` inside
/// `[1, u - 1]`, where `count` is the number of entries of sorted `slots`
/// inside the window.
fn sliding_windows(slots: &[Slot], u: Slot, s: u64, mut f: impl FnMut(Slot, usize)) {
    if s == 0 || u <= s {
        return;
    }
    let (mut a, mut b) = (0usize, 0usize);
    for lo in 1..=(u - s) {
        let hi = lo + s - 1;
        while a < slots.len() && slots[a] < lo {
            a += 1;
        }
        while b < slots.len() && slots[b] <= hi {
            b += 1;
        }
        f(lo, b.max(a) - a);
    }
}

/// Chain quality: any `k` consecutive blocks of a held chain include at
/// least `mu * k` honest ones.
pub fn check_cq(store: &BlockStore, snaps: &[Snapshot], mu: f64, k: usize) -> CheckReport {
    let mut rep = CheckReport::new(format!("CQ(mu={mu},k={k})"));
    if k == 0 {
        return rep;
    }
    let need = (mu * k as f64).ceil() as usize;
    for (&h, &(u, p)) in &latest_by_head(snaps) {
        let honest: Vec<bool> = store.path(h).iter().map(|&id| store.node(id).honest).collect();
        if honest.len() < k {
            continue;
        }
        let mut count = honest[..k].iter().filter(|x| **x).count();
        for start in 0..=honest.len() - k {
            if start > 0 {
                count = count + honest[start + k - 1] as usize - honest[start - 1] as usize;
            }
            rep.checked += 1;
            if count < need {
                rep.fail(|| Violation {
                    slot: u,
                    party: Some(p),
                    detail: format!("blocks {}..{} include {count} honest, need {need}", start + 1, start + k),
                });
            }
        }
    }
    rep
}

/// Cross-party growth: for slots `u + s <= v`, any chain held at `v` is at
/// least `tau * (v - u)` blocks longer than any chain held at `u`.
pub fn check_cg2(snaps: &[Snapshot], tau: f64, s: u64) -> CheckReport {
    let mut rep = CheckReport::new(format!("CG2(tau={tau},s={s})"));
    let mut min_len: BTreeMap<Slot, (u32, PartyId)> = BTreeMap::new();
    let mut max_len: BTreeMap<Slot, (u32, PartyId)> = BTreeMap::new();
    for sn in snaps {
        let e = min_len.entry(sn.slot).or_insert((sn.len, sn.party));
        if sn.len < e.0 {
            *e = (sn.len, sn.party);
        }
        let e = max_len.entry(sn.slot).or_insert((sn.len, sn.party));
        if sn.len > e.0 {
            *e = (sn.len, sn.party);
        }
    }
    // Running max of len - tau * u over slots u <= v - s.
    let mut best: Option<(f64, Slot, u32, PartyId)> = None;
    let mut pending = max_len.iter().peekable();
    for (&v, &(lv, pv)) in &min_len {
        while let Some((&u, &(lu, pu))) = pending.peek() {
            if u + s > v {
                break;
            }
            let score = lu as f64 - tau * u as f64;
            if best.is_none_or(|b| score > b.0) {
                best = Some((score, u, lu, pu));
            }
            pending.next();
        }
        if let Some((score, u, lu, pu)) = best {
            rep.checked += 1;
            if (lv as f64 - tau * v as f64) < score - 1e-9 {
                rep.fail(|| Violation {
                    slot: v,
                    party: Some(pv),
                    detail: format!(
                        "party {pv} holds {lv} blocks at slot {v}, party {pu} held {lu} at slot {u}"
                    ),
                });
            }
        }
    }
    rep
}
