//! Deterministic seed derivation.
//!
//! Every random draw in a run is keyed off one master seed through a fixed
//! mixing rule, so results are reproducible regardless of thread count or
//! evaluation order. Each (purpose, index) pair gets an independent stream:
//! purpose separates layout, fading, and optimizer initialization; index is
//! the trial number.

pub const PURPOSE_LAYOUT: u64 = 1;
pub const PURPOSE_FADING: u64 = 2;
pub const PURPOSE_INIT: u64 = 3;

/// SplitMix64 finalizer. Bijective on u64, good avalanche behavior.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Seed for the RNG stream identified by (purpose, index) under `master`.
/// The nesting keeps the map bijective in each argument separately.
pub fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(purpose ^ splitmix64(index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn splitmix_reference_values() {
        // Finalizer applied to small counters; the first matches the
        // well-known opening output of the SplitMix64 stream seeded at 0.
        assert_eq!(splitmix64(0), 0xE220A8397B1DCDAF);
        assert_eq!(splitmix64(1), 0x910A2DEC89025CC1);
        assert_eq!(splitmix64(2), 0x975835DE1C9756CE);
    }

    #[test]
    fn derived_seeds_are_distinct_across_purposes_and_trials() {
        let mut seen = HashSet::new();
        for master in [0u64, 1, 42, u64::MAX] {
            for purpose in [PURPOSE_LAYOUT, PURPOSE_FADING, PURPOSE_INIT] {
                for index in 0..50 {
                    assert!(
                        seen.insert(derive_seed(master, purpose, index)),
                        "collision at master={master} purpose={purpose} index={index}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivation_is_pure() {
        assert_eq!(derive_seed(7, PURPOSE_FADING, 3), derive_seed(7, PURPOSE_FADING, 3));
    }
}
