mod common;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use validus::harness::Runner;
use validus::validity::Budget;

#[test]
fn repeated_runs_are_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let runner = Runner::new(Budget::default());
    for i in 0..100 {
        let sc = common::scenarios::random_scenario(&mut rng, i);
        let a = runner.run(&sc, Path::new(".")).unwrap();
        let b = runner.run(&sc, Path::new(".")).unwrap();
        assert!(a.trace.is_some());
        assert!(a.trace == b.trace, "{}: traces differ", sc.to_json());
        assert_eq!(a.metrics_csv(), b.metrics_csv(), "{}", sc.to_json());
        assert!(a.passed(), "{}\n{}", sc.to_json(), a.summary());
    }
}
