//! Forward fold over a chain: balances, per-epoch nonces, stake snapshots,
//! round lengths and slot timing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BlockRef, Chain, EmbeddedAdjust, GenesisBlock, SealedBlock, StakeDistribution};
use crate::crypto::hash_parts;
use crate::types::{epoch_of, first_slot_of, Digest, PartyId, Slot, Tick};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Epoch length R in slots.
    pub epoch_len: u64,
    /// Active-slot coefficient.
    pub f: f64,
    pub l_vrf: u32,
    pub omega1: f64,
    pub omega2: f64,
    /// Lower bound on any adjusted round length.
    pub min_round: Tick,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            epoch_len: 100,
            f: 0.1,
            l_vrf: crate::crypto::DEFAULT_L_VRF,
            omega1: 0.3,
            omega2: 0.1,
            min_round: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub round: Tick,
    pub samples: usize,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub value: Option<f64>,
    /// Samples whose arrival-to-arrival duration came out negative.
    pub negative_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustOutcome {
    pub previous: Tick,
    pub new_round: Tick,
    /// Average of the per-window weighted deviations, before clamping.
    pub raw: Option<f64>,
    pub windows: Vec<WindowSummary>,
}

/// Round length for the next epoch from the two measurement windows.
///
/// Each window contributes `w1 * (mean(t_a) - r_j) + w2 * (mean(t_b) - r_j)`;
/// the average over non-empty windows is applied as a delta to `current`,
/// clamped to `[current / 2, 2 * current]` and floored at `min_round`.
pub fn adjust_round_length(
    window1: (&[EmbeddedAdjust], Tick),
    window2: Option<(&[EmbeddedAdjust], Tick)>,
    current: Tick,
    params: &ChainParams,
) -> AdjustOutcome {
    let mut seen = BTreeSet::new();
    let mut summaries = Vec::new();
    let windows = std::iter::once(window1).chain(window2);
    for (entries, round) in windows {
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        for e in entries {
            let (Some(last), Some(recv)) = (e.record.last, e.record.recv) else { continue };
            if !seen.insert(&e.record) {
                continue;
            }
            let a = recv - last.t_now;
            if a <= 2 * round {
                ta.push(a as f64);
                tb.push((recv - e.t_adj) as f64);
            }
        }
        let negative_b = tb.iter().filter(|b| **b < 0.0).count();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let (ma, mb) = (mean(&ta), mean(&tb));
        let value = match (ma, mb) {
            (Some(a), Some(b)) => {
                let r = round as f64;
                Some(params.omega1 * (a - r) + params.omega2 * (b - r))
            }
            _ => None,
        };
        summaries.push(WindowSummary {
            round,
            samples: ta.len(),
            mean_a: ma,
            mean_b: mb,
            value,
            negative_b,
        });
    }
    let values: Vec<f64> = summaries.iter().filter_map(|w| w.value).collect();
    let raw = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    let new_round = match raw {
        None => current,
        Some(v) => {
            let c = current as f64;
            let clamped = (c + v).clamp(c / 2.0, 2.0 * c);
            (clamped.round() as Tick).max(params.min_round)
        }
    };
    AdjustOutcome {
        previous: current,
        new_round,
        raw,
        windows: summaries,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochInfo {
    pub epoch: u64,
    pub start: Tick,
    pub round: Tick,
    pub nonce: Digest,
    pub dist: Arc<StakeDistribution>,
    pub adjust: Option<AdjustOutcome>,
}

impl EpochInfo {
    pub fn slot_start(&self, sl: Slot, epoch_len: u64) -> Tick {
        self.start + (sl - first_slot_of(self.epoch, epoch_len)) as Tick * self.round
    }

    pub fn end(&self, epoch_len: u64) -> Tick {
        self.start + epoch_len as Tick * self.round
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct EpochAccum {
    pub material: Vec<u64>,
    pub first_half: Vec<EmbeddedAdjust>,
    pub second_half: Vec<EmbeddedAdjust>,
}

#[derive(Clone, Debug)]
pub(crate) struct ClosedEpoch {
    pub end_balances: Arc<BTreeMap<PartyId, u64>>,
    pub accum: EpochAccum,
}

/// Derived state of a chain prefix.
#[derive(Clone, Debug)]
pub struct PrefixState {
    pub len: usize,
    pub head: Option<BlockRef>,
    pub(crate) balances: Arc<BTreeMap<PartyId, u64>>,
    pub(crate) epochs: Arc<Vec<Arc<EpochInfo>>>,
    pub(crate) closed: Arc<Vec<Arc<ClosedEpoch>>>,
    pub(crate) accum: EpochAccum,
}

impl PrefixState {
    pub fn genesis(g: &GenesisBlock) -> Self {
        let dist = g.distribution();
        let first = EpochInfo {
            epoch: 1,
            start: 0,
            round: g.t_round_1,
            nonce: g.nonce,
            dist: Arc::new(dist.clone()),
            adjust: None,
        };
        Self {
            len: 0,
            head: None,
            balances: Arc::new(dist.as_map().clone()),
            epochs: Arc::new(vec![Arc::new(first)]),
            closed: Arc::new(Vec::new()),
            accum: EpochAccum::default(),
        }
    }

    /// Folds every block without validating it.
    pub fn from_chain(chain: &Chain, g: &GenesisBlock, params: &ChainParams) -> Self {
        let mut s = Self::genesis(g);
        for b in chain.blocks() {
            s.absorb(b, g, params);
        }
        s
    }

    pub fn balances(&self) -> &BTreeMap<PartyId, u64> {
        &self.balances
    }

    pub fn current_epoch(&self) -> u64 {
        self.epochs.len() as u64
    }

    pub fn head_slot(&self) -> Slot {
        self.head.map_or(0, |h| h.slot)
    }

    pub fn head_hash(&self, g: &GenesisBlock) -> Digest {
        self.head.map_or_else(|| g.hash(), |h| h.hash)
    }

    pub(crate) fn opened(&self, ep: u64) -> Option<&Arc<EpochInfo>> {
        self.epochs.get(ep.max(1) as usize - 1)
    }

    /// Epoch parameters as determined by this prefix; epochs beyond the head
    /// are derived with empty measurement windows.
    pub fn epoch_info(&self, ep: u64, g: &GenesisBlock, params: &ChainParams) -> Arc<EpochInfo> {
        let ep = ep.max(1);
        if let Some(e) = self.opened(ep) {
            return e.clone();
        }
        let mut s = self.clone();
        s.advance_to(ep, g, params);
        s.epochs[ep as usize - 1].clone()
    }

    pub(crate) fn advance_to(&mut self, ep: u64, g: &GenesisBlock, params: &ChainParams) {
        while self.current_epoch() < ep {
            let closing = std::mem::take(&mut self.accum);
            Arc::make_mut(&mut self.closed).push(Arc::new(ClosedEpoch {
                end_balances: self.balances.clone(),
                accum: closing,
            }));
            let next = self.open_next(g, params);
            Arc::make_mut(&mut self.epochs).push(Arc::new(next));
        }
    }

    fn open_next(&self, g: &GenesisBlock, params: &ChainParams) -> EpochInfo {
        let e = self.current_epoch() + 1;
        let prev = &self.epochs[e as usize - 2];
        let prev_closed = &self.closed[e as usize - 2];
        let nonce = if e <= 2 {
            g.nonce
        } else {
            let material: Vec<u8> = prev_closed
                .accum
                .material
                .iter()
                .flat_map(|y| y.to_be_bytes())
                .collect();
            hash_parts(&[b"eta", prev.nonce.as_bytes(), &e.to_be_bytes(), &material])
        };
        let dist = if e <= 2 {
            Arc::new(g.distribution())
        } else {
            let snap = &self.closed[e as usize - 3].end_balances;
            Arc::new(StakeDistribution::from_pairs(snap.iter().map(|(p, s)| (*p, *s))))
        };
        let w1 = (&prev_closed.accum.first_half[..], prev.round);
        let w2 = (e >= 3).then(|| {
            let older = &self.epochs[e as usize - 3];
            (&self.closed[e as usize - 3].accum.second_half[..], older.round)
        });
        let outcome = adjust_round_length(w1, w2, prev.round, params);
        EpochInfo {
            epoch: e,
            start: prev.end(params.epoch_len),
            round: outcome.new_round,
            nonce,
            dist,
            adjust: Some(outcome),
        }
    }

    /// Applies a block's effects. Transfers that would overdraw are skipped;
    /// validation rejects them before this point.
    pub(crate) fn absorb(&mut self, b: &SealedBlock, g: &GenesisBlock, params: &ChainParams) {
        let sl = b.slot();
        let ep = epoch_of(sl, params.epoch_len);
        self.advance_to(ep, g, params);
        let balances = Arc::make_mut(&mut self.balances);
        for tx in &b.body().txs {
            let from = balances.get(&tx.from).copied().unwrap_or(0);
            if from >= tx.amount {
                balances.insert(tx.from, from - tx.amount);
                *balances.entry(tx.to).or_default() += tx.amount;
            }
        }
        let r = params.epoch_len;
        let offset = sl - first_slot_of(ep, r) + 1;
        if offset <= 2 * r / 3 {
            self.accum.material.push(b.body().rho.y);
        }
        if offset <= r / 2 {
            self.accum.first_half.extend(b.body().adjusts.iter().cloned());
        }
        if offset > r - r / 2 {
            self.accum.second_half.extend(b.body().adjusts.iter().cloned());
        }
        self.len += 1;
        self.head = Some(b.block_ref());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::AdjustRecord;
    use approx::assert_relative_eq;

    fn entry(t_last: Tick, recv: Tick, t_adj: Tick, tag: u64) -> EmbeddedAdjust {
        EmbeddedAdjust {
            record: AdjustRecord {
                last: Some(BlockRef {
                    hash: Digest::default(),
                    slot: tag,
                    t_now: t_last,
                }),
                recv: Some(recv),
                party: 0,
                slot: tag,
                y: tag,
                proof: Digest::default(),
            },
            t_adj,
        }
    }

    #[test]
    fn worked_example() {
        // t_a = (12, 14), t_b = (11, 13), round 10
        let w = vec![entry(0, 12, 1, 1), entry(100, 114, 101, 2)];
        let out = adjust_round_length((&w, 10), None, 10, &ChainParams::default());
        let raw = out.raw.unwrap();
        // brute-force sum of the same formula
        let oracle = 0.3 * ((12.0 + 14.0) / 2.0 - 10.0) + 0.1 * ((11.0 + 13.0) / 2.0 - 10.0);
        assert_relative_eq!(raw, oracle, epsilon = 1e-12);
        assert_relative_eq!(raw, 1.1, epsilon = 1e-12);
        assert_eq!(out.new_round, 11);
    }

    #[test]
    fn zero_deviation_is_fixpoint() {
        let w = vec![entry(0, 10, 0, 1), entry(50, 60, 50, 2)];
        let w2 = vec![entry(7, 17, 7, 3)];
        let out = adjust_round_length((&w, 10), Some((&w2, 10)), 10, &ChainParams::default());
        assert_eq!(out.raw, Some(0.0));
        assert_eq!(out.new_round, 10);
    }

    #[test]
    fn empty_windows_keep_round() {
        let out = adjust_round_length((&[], 10), Some((&[], 10)), 10, &ChainParams::default());
        assert_eq!(out.raw, None);
        assert_eq!(out.new_round, 10);
    }

    #[test]
    fn clamp_and_far_records() {
        let p = ChainParams::default();
        // receipt more than two rounds after creation is ignored
        let far = vec![entry(0, 25, 0, 1)];
        assert_eq!(adjust_round_length((&far, 10), None, 10, &p).raw, None);
        let slow = vec![entry(0, 20, -200, 1)];
        assert_eq!(adjust_round_length((&slow, 10), None, 10, &p).new_round, 20);
        let fast = vec![entry(0, 0, 500, 1)];
        assert_eq!(adjust_round_length((&fast, 10), None, 10, &p).new_round, 5);
    }

    #[test]
    fn duplicates_count_once() {
        let e = entry(0, 12, 1, 1);
        let out = adjust_round_length((&[e.clone(), e.clone()], 10), Some((&[e], 10)), 10, &ChainParams::default());
        assert_eq!(out.windows[0].samples, 1);
        assert_eq!(out.windows[1].samples, 0);
    }
}
