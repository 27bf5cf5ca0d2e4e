use msgverif::gen::{random_program, GenConfig};
use msgverif::semantics::{
    explore, Action, BufferMode, ExploreMode, GlobalState, OpKind, OpRef, DEFAULT_EXPLORE_BUDGET,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn buffer_for(seed: u64) -> BufferMode {
    if seed % 4 == 0 {
        BufferMode::Zero
    } else {
        BufferMode::Infinite
    }
}

/// Checks commutation of every co-enabled pair whose first action is deterministic.
fn commutes_everywhere(s: &GlobalState) -> Result<(), String> {
    let en = s.enabled();
    for a in en.iter().filter(|a| !matches!(a, Action::SrStar { .. })) {
        for b in en.iter().filter(|b| *b != a) {
            let sa = s.apply(a).map_err(|e| e.to_string())?;
            let sb = s.apply(b).map_err(|e| e.to_string())?;
            if !sa.is_enabled(b) || !sb.is_enabled(a) {
                return Err(format!("{a} and {b} disable each other"));
            }
            let ab = sa.apply(b).map_err(|e| e.to_string())?;
            let ba = sb.apply(a).map_err(|e| e.to_string())?;
            if ab != ba {
                return Err(format!("{a} and {b} do not commute"));
            }
        }
    }
    Ok(())
}

/// Sum of issued and matched operations; every action strictly increases it.
fn progress(s: &GlobalState) -> usize {
    s.procs.iter().map(|p| p.seq.len() + p.matched.len()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn co_enabled_actions_commute(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prog = random_program(&mut rng, &GenConfig::default());
        let mut s = GlobalState::initial(&prog, buffer_for(seed)).unwrap();
        loop {
            prop_assert_eq!(commutes_everywhere(&s), Ok(()), "{}", prog);
            let en = s.enabled();
            if en.is_empty() {
                break;
            }
            let a = en[rng.gen_range(0..en.len())];
            let next = s.apply(&a).unwrap();
            prop_assert!(progress(&next) > progress(&s));
            s = next;
        }
    }

    #[test]
    fn reduced_exploration_preserves_outcomes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prog = random_program(&mut rng, &GenConfig::default());
        let s = GlobalState::initial(&prog, buffer_for(seed)).unwrap();
        let full = explore(&s, ExploreMode::Full, DEFAULT_EXPLORE_BUDGET).unwrap();
        let por = explore(&s, ExploreMode::Por, DEFAULT_EXPLORE_BUDGET).unwrap();
        prop_assert_eq!(&full.deadlocks, &por.deadlocks, "{}", prog);
        prop_assert_eq!(&full.terminals, &por.terminals, "{}", prog);
    }

    #[test]
    fn matches_never_overtake(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prog = random_program(&mut rng, &GenConfig::default());
        let mut s = GlobalState::initial(&prog, buffer_for(seed)).unwrap();
        loop {
            let en = s.enabled();
            if en.is_empty() {
                break;
            }
            let a = en[rng.gen_range(0..en.len())];
            if let Some((send, recv)) = a.pair() {
                // no earlier unmatched send from the same sender to the same receiver
                let sp = &s.procs[send.rank];
                let overtaken = sp.unmatched.iter().any(|&i| {
                    i < send.index && sp.seq[i].kind.is_send() && sp.seq[i].kind.dst() == Some(recv.rank)
                });
                prop_assert!(!overtaken, "{} overtakes in {}", a, prog);
                // no earlier unmatched receive that could take this message
                let rp = &s.procs[recv.rank];
                let earlier_recv = rp.unmatched.iter().any(|&i| {
                    i < recv.index
                        && rp.seq[i].kind.is_recv()
                        && !rp.seq[i].kind.is_wildcard()
                        && !matches!(rp.seq[i].kind, OpKind::IRecv { .. })
                        && rp.seq[i].kind.src() == s.op(recv).kind.src()
                });
                prop_assert!(!earlier_recv, "{} skips an earlier receive in {}", a, prog);
                let _: OpRef = send;
            }
            s = s.apply(&a).unwrap();
        }
    }
}
