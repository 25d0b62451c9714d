//! Benchmark fixtures.

use newer_core::simulate::{gen_regression_instance, RegressionConfig, RegressionInstance};
use newer_core::{Cascade, Event, WeibullParams};

pub fn regression_instance(users: usize) -> RegressionInstance {
    gen_regression_instance(&RegressionConfig {
        users,
        ..RegressionConfig::default()
    })
    .expect("default regression config is valid")
}

/// A broom-shaped cascade: `n` events, one per second, each replying to
/// one of the first ten users, with shared dynamics.
pub fn broom(n: usize) -> (Cascade, WeibullParams) {
    let events = (0..n)
        .map(|i| {
            let id = format!("u{i}");
            if i == 0 {
                Event::new(id, None, 0.0)
            } else {
                Event::new(id, Some(&format!("u{}", (i * 7) % i.min(10))), i as f64)
            }
        })
        .collect();
    (Cascade::new("b", events), WeibullParams::new(3600.0, 0.8).unwrap())
}
