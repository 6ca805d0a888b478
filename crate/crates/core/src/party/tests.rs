use super::*;
use crate::chain::testutil::World;

#[test]
fn config_periods() {
    let c = PartyConfig::default();
    assert_eq!(c.t_run(20), 8);
    assert_eq!(c.prewait(20), 4);
    assert_eq!(c.t_run(1), 1);
    assert_eq!(c.t_run(2), 1);
}

#[test]
fn slot_number_in_first_epoch() {
    let w = World::new(2, 1.0, 10);
    let st = PrefixState::genesis(&w.genesis);
    let t = current_slot_number(25, &st, &w.genesis, &w.params).unwrap();
    assert_eq!(t.slot, 3);
    assert_eq!((t.t_begin, t.t_next, t.t_round), (20, 30, 10));
    assert_eq!(current_slot_number(-3, &st, &w.genesis, &w.params).unwrap().slot, 0);
    // boundary tick belongs to the slot it opens
    assert_eq!(current_slot_number(0, &st, &w.genesis, &w.params).unwrap().slot, 1);
    assert_eq!(current_slot_number(10, &st, &w.genesis, &w.params).unwrap().slot, 2);
}

#[test]
fn slot_number_needs_recent_chain() {
    let w = World::new(2, 1.0, 10);
    let st = PrefixState::genesis(&w.genesis);
    // epoch 2 starts at tick 100
    assert_eq!(
        current_slot_number(105, &st, &w.genesis, &w.params).unwrap_err(),
        TimingError::ResyncNeeded { epoch: 2, head_slot: 0 }
    );
    let c = w.honest_chain(&[1, 4, 12, 15]);
    let st = PrefixState::from_chain(&c, &w.genesis, &w.params);
    let t = current_slot_number(105, &st, &w.genesis, &w.params).unwrap();
    assert_eq!(t.slot, 11);
    assert!(current_slot_number(205, &st, &w.genesis, &w.params).is_ok());
    assert!(current_slot_number(305, &st, &w.genesis, &w.params).is_err());
}

/// Walking the chain's epochs incrementally agrees with the direct lookup.
#[test]
fn slot_number_matches_incremental_tracker() {
    let w = World::new(3, 1.0, 10);
    let c = w.honest_chain(&[1, 3, 6, 11, 14, 19, 22, 27, 31, 35]);
    let st = PrefixState::from_chain(&c, &w.genesis, &w.params);
    let (mut sl, mut t_begin, mut round) = (1u64, 0i64, w.genesis.t_round_1);
    for t in 0..400 {
        if t >= t_begin + round {
            sl += 1;
            t_begin += round;
            if sl % 10 == 1 {
                round = st.epoch_info(epoch_of(sl, 10), &w.genesis, &w.params).round;
            }
        }
        let got = current_slot_number(t, &st, &w.genesis, &w.params).unwrap();
        assert_eq!((got.slot, got.t_begin, got.t_next), (sl, t_begin, t_begin + round), "tick {t}");
    }
}

#[test]
fn leader_eval_respects_stake() {
    let w = World::new(2, 1.0, 10);
    let info = PrefixState::genesis(&w.genesis).epoch_info(1, &w.genesis, &w.params);
    for sl in 1..20 {
        assert!(leader_eval(&w.vrf[0], 0, &info, sl, &w.params).2);
    }
    let unknown = VrfKeypair::derive(1, 77);
    assert!(!leader_eval(&unknown, 77, &info, 1, &w.params).2);
}
