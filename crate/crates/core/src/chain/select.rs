use super::Chain;
use crate::types::Slot;

/// Length of the common prefix of two chains over the same genesis.
pub fn fork_index(a: &Chain, b: &Chain) -> usize {
    let (ab, bb) = (a.blocks(), b.blocks());
    let n = ab.len().min(bb.len());
    // hashes commit to the whole prefix, so equality is monotone in the index
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ab[mid - 1].hash == bb[mid - 1].hash {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Longest-chain rule. Candidates are scanned in arrival order; only a
/// strictly longer chain displaces the current best, so ties keep `local`.
pub fn maxvalid_mc<'a>(local: &'a Chain, candidates: impl IntoIterator<Item = &'a Chain>) -> &'a Chain {
    let mut best = local;
    for c in candidates {
        if c.len() > best.len() {
            best = c;
        }
    }
    best
}

/// Forks at most `k` blocks deep follow the longest-chain rule; deeper forks
/// compare block counts in the `s` slots after the fork point.
pub fn maxvalid_bg<'a>(
    local: &'a Chain,
    candidates: impl IntoIterator<Item = &'a Chain>,
    k: usize,
    s: Slot,
) -> &'a Chain {
    let mut best = local;
    for c in candidates {
        if prefers_bg(best, c, k, s) {
            best = c;
        }
    }
    best
}

fn prefers_bg(best: &Chain, cand: &Chain, k: usize, s: Slot) -> bool {
    let i = fork_index(best, cand);
    if best.len() - i <= k {
        return cand.len() > best.len();
    }
    let fork_slot = if i == 0 { 0 } else { best.blocks()[i - 1].slot() };
    let (lo, hi) = (fork_slot + 1, fork_slot + s);
    cand.count_in_slots(lo, hi) > best.count_in_slots(lo, hi)
}
