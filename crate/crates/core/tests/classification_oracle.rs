mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use validus::validity::{
    classify, Budget, InputConfiguration, PropertyTable, SystemParams, ValidityProperty, Value, ValueSpace,
};

fn to_cfg(c: &common::Cfg) -> InputConfiguration {
    InputConfiguration::from_slice(c).unwrap()
}

fn compare(prop: &ValidityProperty, n: usize, t: usize, values: &[i64], val: &BTreeMap<common::Cfg, BTreeSet<i64>>) {
    let configs = common::all(n, t, values);
    let oracle = common::classify(n, t, &configs, val, values);
    let space = ValueSpace::symmetric(values.iter().copied().map(Value).collect()).unwrap();
    let report = classify(prop, SystemParams::new(n, t).unwrap(), &space, Budget::default()).unwrap();
    let name = prop.name();
    assert_eq!(report.verdict.to_string(), oracle.verdict, "{name} at ({n},{t})");
    assert_eq!(report.trivial_witness.map(|v| v.0), oracle.witness, "{name} at ({n},{t})");
    if report.verdict.to_string() == "solvable_universal" {
        let ours: BTreeMap<common::Cfg, i64> = report
            .lambda
            .unwrap()
            .iter()
            .map(|(c, v)| (c.pairs().iter().map(|p| (p.process.0, p.value.0)).collect(), v.0))
            .collect();
        assert_eq!(Some(ours), oracle.lambda, "{name} at ({n},{t})");
    }
    if let Some(c) = report.cs_counterexample {
        let c: common::Cfg = c.pairs().iter().map(|p| (p.process.0, p.value.0)).collect();
        let mut inter: BTreeSet<i64> = values.iter().copied().collect();
        for o in configs.iter().filter(|o| common::similar(&c, o)) {
            inter = inter.intersection(&val[o]).copied().collect();
        }
        assert!(inter.is_empty(), "{name}: counterexample {c:?} has common value {inter:?}");
    }
}

#[test]
fn builtins_match_the_oracle() {
    for (n, t) in [(3, 1), (4, 1), (5, 1), (7, 2)] {
        for values in [vec![0, 1], vec![0, 1, 2]] {
            if n == 7 && values.len() == 3 {
                continue;
            }
            let configs = common::all(n, t, &values);
            for name in ["strong", "weak", "correct_proposal", "interval", "constant:0", "constant:1"] {
                let prop = ValidityProperty::builtin(name).unwrap();
                compare(&prop, n, t, &values, &common::named_table(name, n, &configs, &values));
            }
        }
    }
}

fn table_strategy(n: usize, t: usize) -> impl Strategy<Value = BTreeMap<common::Cfg, BTreeSet<i64>>> {
    let configs = common::all(n, t, &[0, 1]);
    // 1 = {0}, 2 = {1}, 3 = {0, 1}; biased towards full sets so some tables are solvable
    prop::collection::vec(prop_oneof![1 => Just(1u8), 1 => Just(2u8), 6 => Just(3u8)], configs.len()).prop_map(move |codes| {
        configs
            .iter()
            .zip(codes)
            .map(|(c, code)| {
                let set: BTreeSet<i64> = [0, 1].into_iter().filter(|v| code & (1 << v) != 0).collect();
                (c.clone(), set)
            })
            .collect()
    })
}

fn as_property(val: &BTreeMap<common::Cfg, BTreeSet<i64>>) -> ValidityProperty {
    ValidityProperty::Table(
        PropertyTable::new(val.iter().map(|(c, s)| (to_cfg(c), s.iter().copied().map(Value).collect()))).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_tables_match_the_oracle_at_4_1(val in table_strategy(4, 1)) {
        compare(&as_property(&val), 4, 1, &[0, 1], &val);
    }

    #[test]
    fn random_tables_match_the_oracle_at_3_1(val in table_strategy(3, 1)) {
        compare(&as_property(&val), 3, 1, &[0, 1], &val);
    }
}
