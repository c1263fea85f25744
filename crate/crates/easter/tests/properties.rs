//! Standalone property suites over the cost model, search, selector and
//! simulator. Run with `cargo test --test properties`.

mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_stays_within_bounds(updates in prop::collection::vec(-10.0f64..10.0, 0..40)) {
        prop_assert!(common::entropy_within_bounds(&updates));
    }

    #[test]
    fn adjacency_risk_decreases_with_distance(x in 16.0f64..80.0, gap in 0.1f64..40.0) {
        prop_assert!(common::adjacency_risk_monotone(x, gap));
    }

    #[test]
    fn step_costs_are_nonnegative(seed in 0u64..10_000) {
        prop_assert!(common::costs_nonnegative(seed));
    }

    #[test]
    fn argmin_invariant_under_uniform_weight_scaling(seed in 0u64..10_000, exp in -2i32..4) {
        prop_assert!(common::argmin_scale_invariant(seed, 2.0f64.powi(exp)));
    }
}

#[test]
fn search_invariant_under_rotation() {
    assert!(common::rotation_invariant(30.0f64.to_radians()));
}

#[test]
fn selector_does_not_wave_over_frozen_world() {
    assert!(common::frozen_world_no_waving(100));
}

#[test]
fn decisions_do_not_wave_over_static_traffic() {
    assert!(common::static_traffic_no_quick_return(3.0));
}

#[test]
fn simulation_is_bit_deterministic() {
    for seed in [0, 7, 12] {
        assert!(common::sim_deterministic(seed), "seed {seed}");
    }
}

#[test]
fn idm_traffic_never_collides() {
    for seed in 0..8 {
        assert!(common::idm_no_collision(seed), "seed {seed}");
    }
}
