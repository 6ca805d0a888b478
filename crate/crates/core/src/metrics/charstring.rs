use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Per-slot outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Unique honest leader.
    Zero,
    /// Adversarial or multiple leaders.
    One,
    /// No leader.
    Bot,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Bot => '⊥',
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CharString(pub Vec<Symbol>);

impl CharString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, s: Symbol) -> usize {
        self.0.iter().filter(|x| **x == s).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for CharString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid characteristic symbol {0:?}")]
pub struct ParseCharError(pub char);

impl FromStr for CharString {
    type Err = ParseCharError;

    /// Accepts `0`, `1`, and `⊥` (or `_`) for empty slots.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Symbol::Zero),
                '1' => Ok(Symbol::One),
                '⊥' | '_' => Ok(Symbol::Bot),
                other => Err(ParseCharError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(CharString)
    }
}

impl Serialize for CharString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CharString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Honest slots whose predecessor round was not received become empty.
/// `delivered[i]` is consulted only where `w[i]` is `0`.
pub fn real_reduction(w: &CharString, delivered: &[bool]) -> CharString {
    assert_eq!(w.len(), delivered.len(), "one delivery flag per slot");
    CharString(
        w.iter()
            .zip(delivered)
            .map(|(s, d)| match s {
                Symbol::Zero if !d => Symbol::Bot,
                other => other,
            })
            .collect(),
    )
}

/// Drops every empty slot.
pub fn bot_reduction(w: &CharString) -> CharString {
    CharString(w.iter().filter(|s| *s != Symbol::Bot).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs(s: &str) -> CharString {
        s.parse().unwrap()
    }

    #[test]
    fn real_reduction_cases() {
        assert_eq!(real_reduction(&cs("11"), &[false, false]), cs("11"));
        assert_eq!(real_reduction(&cs("01"), &[false, true]), cs("⊥1"));
        assert_eq!(real_reduction(&cs("10"), &[true, false]), cs("1⊥"));
        assert_eq!(real_reduction(&cs("00"), &[true, true]), cs("00"));
    }

    #[test]
    fn bot_reduction_cases() {
        assert_eq!(bot_reduction(&cs("⊥⊥⊥")), cs(""));
        assert_eq!(bot_reduction(&cs("0⊥1⊥0")), cs("010"));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(cs("0_1").to_string(), "0⊥1");
        assert!("0x".parse::<CharString>().is_err());
        let j = serde_json::to_string(&cs("0⊥1")).unwrap();
        assert_eq!(serde_json::from_str::<CharString>(&j).unwrap(), cs("0⊥1"));
    }

    fn sym() -> impl Strategy<Value = Symbol> {
        prop_oneof![Just(Symbol::Zero), Just(Symbol::One), Just(Symbol::Bot)]
    }

    proptest! {
        #[test]
        fn bot_reduction_length(v in proptest::collection::vec(sym(), 50)) {
            let w = CharString(v);
            let nonbot = w.iter().filter(|s| *s != Symbol::Bot).count();
            prop_assert_eq!(bot_reduction(&w).len(), nonbot);
        }

        #[test]
        fn reductions_keep_ones(v in proptest::collection::vec(sym(), 0..60), seed in any::<u64>()) {
            let w = CharString(v);
            let delivered: Vec<bool> = (0..w.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let out = bot_reduction(&real_reduction(&w, &delivered));
            prop_assert_eq!(out.count(Symbol::One), w.count(Symbol::One));
        }

        #[test]
        fn full_delivery_is_identity(v in proptest::collection::vec(sym(), 0..60)) {
            let w = CharString(v);
            prop_assert_eq!(real_reduction(&w, &vec![true; w.len()]), w);
        }
    }
}
