//! Equivalence of the dispatch engine against the independently coded
//! step-by-step oracle in `support/oracle.rs`. Totals must agree to
//! 1e-9 kWh and the engine's conservation ledger must close on every run.

#[path = "support/oracle.rs"]
mod oracle;

use greennet_core::dispatch::{run_year, SharingMode};
use oracle::{assert_instance_matches, build_instance};

// ---------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------

#[test]
fn ten_randomized_48h_two_site_instances_match_oracle() {
    for seed in 0..10u64 {
        assert_instance_matches(build_instance(seed, 48));
    }
}

#[test]
fn toy_24h_two_site_case_matches_oracle() {
    assert_instance_matches(build_instance(1234, 24));
}

#[test]
fn conservation_holds_on_longer_mixed_runs() {
    for seed in [77u64, 203, 999] {
        let inst = build_instance(seed, 240);
        let report = run_year(&inst.engine, &inst.links, SharingMode::Hourly).unwrap();
        assert!(report.conservation_residual_kwh.abs() < 1e-9);
        // SOC bounds hold at every hour of every site.
        for (site, recs) in inst.engine.iter().zip(&report.hourly) {
            for r in recs {
                assert!(r.soc_kwh >= site.battery_floor_kwh - 1e-12);
                assert!(r.soc_kwh <= site.battery_capacity_kwh + 1e-12);
            }
        }
    }
}
