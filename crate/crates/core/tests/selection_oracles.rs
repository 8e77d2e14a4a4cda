//! Selection rules against brute-force enumerators.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swipt_core::selection::{mrs_preselect, srs_select, Candidate};

#[test]
fn ten_thousand_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        common::check_random_instance(&mut rng, 8).unwrap();
    }
}

fn view_strategy() -> impl Strategy<Value = Vec<Candidate>> {
    prop::collection::vec((0u8..10, any::<bool>()), 1..=8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(id, (b, available))| Candidate { id, battery: b as f64, available })
            .collect()
    })
}

proptest! {
    #[test]
    fn srs_invariant_under_common_shift(view in view_strategy(), cost in 0u8..10, shift in 0u8..20) {
        let cost = cost as f64;
        let shift = shift as f64;
        let shifted: Vec<Candidate> = view.iter().map(|c| Candidate { battery: c.battery + shift, ..*c }).collect();
        prop_assert_eq!(srs_select(&view, cost), srs_select(&shifted, cost + shift));
    }

    #[test]
    fn preselect_sets_are_nested(view in view_strategy(), m in 1usize..8) {
        let small = mrs_preselect(&view, m);
        let large = mrs_preselect(&view, m + 1);
        prop_assert!(small.iter().all(|id| large.contains(id)));
        let available = view.iter().filter(|c| c.available).count();
        prop_assert_eq!(small.len(), m.min(available));
    }

    #[test]
    fn selection_is_pure(view in view_strategy(), m in 1usize..8) {
        prop_assert_eq!(mrs_preselect(&view, m), mrs_preselect(&view, m));
        prop_assert_eq!(srs_select(&view, 2.0), srs_select(&view, 2.0));
    }
}
