//! Fork divergence of a characteristic string.
//!
//! A fork is abstracted by two tracked tines and the deepest honest vertex:
//! `(a, b, c, h)` are the two tine lengths, the length of their common
//! prefix, and the honest depth. Honest slots add exactly one vertex at a
//! depth strictly above `h`; adversarial slots may extend either or both
//! tines. The divergence is the largest `min(a, b) - c` over final states
//! whose tines are both viable (`a, b >= h`). Empty slots are dropped first.

use std::collections::{HashMap, HashSet};

use super::charstring::{CharString, Symbol};

type State = (u32, u32, u32, u32);

fn canon((a, b, c, h): State) -> State {
    if a <= b {
        (a, b, c, h)
    } else {
        (b, a, c, h)
    }
}

/// Exhaustive search over every tine placement. Exponential in the worst
/// case; intended as the reference for short strings.
pub fn divergence_brute_force(w: &CharString) -> u32 {
    let mut states: HashSet<State> = HashSet::from([(0, 0, 0, 0)]);
    for sym in w.iter() {
        states = brute_step(&states, sym);
    }
    brute_value(&states)
}

fn brute_step(states: &HashSet<State>, sym: Symbol) -> HashSet<State> {
    let mut next = HashSet::new();
    for &(a, b, c, h) in states {
        let shared = a == b && b == c;
        match sym {
            Symbol::Bot => {
                next.insert((a, b, c, h));
            }
            Symbol::One => {
                next.insert((a, b, c, h));
                if shared {
                    next.insert((a + 1, b + 1, c + 1, h));
                }
                next.insert(canon((a + 1, b, c, h)));
                next.insert(canon((a, b + 1, c, h)));
                next.insert((a + 1, b + 1, c, h));
            }
            Symbol::Zero => {
                if shared && a >= h {
                    next.insert((a + 1, b + 1, c + 1, a + 1));
                }
                if a >= h {
                    next.insert(canon((a + 1, b, c, a + 1)));
                }
                if b >= h {
                    next.insert(canon((a, b + 1, c, b + 1)));
                }
                for d in h..=a.max(b) {
                    next.insert((a, b, c, d + 1));
                }
            }
        }
    }
    next
}

fn brute_value(states: &HashSet<State>) -> u32 {
    states
        .iter()
        .filter(|&&(a, b, _, h)| a >= h && b >= h)
        .map(|&(a, b, c, _)| a.min(b) - c)
        .max()
        .unwrap_or(0)
}

/// Calls `f(w, brute_force(w))` for every binary string of length at most
/// `max_len`, sharing work between strings with a common prefix.
pub fn for_each_binary_string(max_len: usize, mut f: impl FnMut(&CharString, u32)) {
    fn go(
        w: &mut Vec<Symbol>,
        states: &HashSet<State>,
        max_len: usize,
        f: &mut dyn FnMut(&CharString, u32),
    ) {
        let cs = CharString(w.clone());
        f(&cs, brute_value(states));
        if w.len() == max_len {
            return;
        }
        for sym in [Symbol::Zero, Symbol::One] {
            let next = brute_step(states, sym);
            w.push(sym);
            go(w, &next, max_len, f);
            w.pop();
        }
    }
    go(&mut Vec::new(), &HashSet::from([(0, 0, 0, 0)]), max_len, &mut f);
}

/// Same value as [`divergence_brute_force`], computed over coordinates
/// relative to the honest depth, `(x, y, z) = (a - h, b - h, h - c)`.
///
/// Off-tine honest vertices only need to sit one above the current honest
/// depth. For fixed `(x, y)` only the largest `z` matters, except for the
/// single shared configuration. Tines that sit so far below the honest depth
/// that the rest of the string cannot lift them back are dropped.
pub fn divergence(w: &CharString) -> u32 {
    let syms: Vec<Symbol> = w.iter().filter(|s| *s != Symbol::Bot).collect();
    // reach[i]: best cumulative (+1 per `1`, -1 per `0`) gain over syms[i..].
    let mut reach = vec![0i64; syms.len() + 1];
    let mut run = 0i64;
    for i in (0..syms.len()).rev() {
        run = (run + if syms[i] == Symbol::One { 1 } else { -1 }).max(0);
        reach[i] = run;
    }

    // Key (x, y, shared) with x <= y; value is z.
    type Key = (i64, i64, bool);
    let mut states: HashMap<Key, i64> = HashMap::from([((0, 0, true), 0)]);
    let push = |m: &mut HashMap<Key, i64>, x: i64, y: i64, z: i64, budget: i64| {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        if x + budget < 0 {
            return;
        }
        let key = (x, y, x == y && x + z == 0);
        let e = m.entry(key).or_insert(z);
        *e = (*e).max(z);
    };
    for (i, sym) in syms.iter().enumerate() {
        let budget = reach[i + 1];
        let mut next = HashMap::with_capacity(states.len() * 2);
        for (&(x, y, shared), &z) in &states {
            match sym {
                Symbol::One => {
                    push(&mut next, x, y, z, budget);
                    if shared {
                        push(&mut next, x + 1, y + 1, z - 1, budget);
                    }
                    push(&mut next, x + 1, y, z, budget);
                    push(&mut next, x, y + 1, z, budget);
                    push(&mut next, x + 1, y + 1, z, budget);
                }
                Symbol::Zero => {
                    if shared && x >= 0 {
                        push(&mut next, 0, 0, 0, budget);
                    }
                    if x >= 0 {
                        push(&mut next, 0, y - x - 1, z + x + 1, budget);
                    }
                    if y >= 0 {
                        push(&mut next, x - y - 1, 0, z + y + 1, budget);
                    }
                    push(&mut next, x - 1, y - 1, z + 1, budget);
                }
                Symbol::Bot => unreachable!(),
            }
        }
        states = next;
    }
    states
        .into_iter()
        .filter(|&((x, _, _), _)| x >= 0)
        .map(|((x, y, _), z)| (x.min(y) + z) as u32)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs(s: &str) -> CharString {
        s.parse().unwrap()
    }

    #[test]
    fn small_cases() {
        assert_eq!(divergence_brute_force(&cs("")), 0);
        assert_eq!(divergence_brute_force(&cs("0000")), 0);
        assert_eq!(divergence_brute_force(&cs("1")), 1);
        assert_eq!(divergence_brute_force(&cs("11")), 2);
        assert_eq!(divergence_brute_force(&cs("10")), 1);
        assert_eq!(divergence_brute_force(&cs("100")), 0);
        // One adversarial slot may label a vertex on each tine.
        assert_eq!(divergence_brute_force(&cs("010")), 2);
        assert_eq!(divergence_brute_force(&cs("⊥1⊥1")), 2);
    }

    #[test]
    fn fast_matches_brute_force_exhaustively() {
        let mut n = 0;
        for_each_binary_string(12, |w, expect| {
            n += 1;
            assert_eq!(divergence(w), expect, "w={w}");
        });
        assert_eq!(n, (1 << 13) - 1);
    }

    #[test]
    fn honest_majority_keeps_divergence_small() {
        let w: CharString = "0010".repeat(50).parse().unwrap();
        assert!(divergence(&w) <= 2, "{}", divergence(&w));
    }

    #[test]
    fn long_strings_are_tractable() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = CharString(
            (0..20_000)
                .map(|_| if rng.gen_bool(0.3) { Symbol::One } else { Symbol::Zero })
                .collect(),
        );
        assert!(divergence(&w) < 40);
    }

    proptest! {
        #[test]
        fn appending_adversarial_slot_never_decreases(
            bits in proptest::collection::vec(any::<bool>(), 0..30)
        ) {
            let w = CharString(bits.iter().map(|b| if *b { Symbol::One } else { Symbol::Zero }).collect());
            let mut w1 = w.clone();
            w1.0.push(Symbol::One);
            prop_assert!(divergence(&w1) >= divergence(&w));
        }

        #[test]
        fn bounded_by_adversarial_count(
            bits in proptest::collection::vec(any::<bool>(), 0..40)
        ) {
            let w = CharString(bits.iter().map(|b| if *b { Symbol::One } else { Symbol::Zero }).collect());
            // Each adversarial slot adds at most one vertex per tine; each
            // honest slot adds one vertex to at most one of the two tines.
            let cap = w.count(Symbol::One) as f64 + w.count(Symbol::Zero) as f64 / 2.0;
            prop_assert!(divergence(&w) as f64 <= cap);
        }
    }
}
