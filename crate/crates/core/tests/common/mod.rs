//! Brute-force classification written without the library's enumeration, similarity or
//! property code. Configurations are sorted `(process, value)` lists.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub type Cfg = Vec<(u32, i64)>;

/// Every configuration with between `n - t` and `n` processes.
pub fn all(n: usize, t: usize, values: &[i64]) -> Vec<Cfg> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let procs: Vec<u32> = (0..n as u32).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
        if procs.len() < n - t {
            continue;
        }
        let combos = values.len().pow(procs.len() as u32);
        for mut code in 0..combos {
            let mut cfg = Vec::with_capacity(procs.len());
            for p in &procs {
                cfg.push((*p, values[code % values.len()]));
                code /= values.len();
            }
            out.push(cfg);
        }
    }
    out
}

pub fn similar(a: &Cfg, b: &Cfg) -> bool {
    let mut shared = false;
    for (p, v) in a {
        if let Some((_, w)) = b.iter().find(|(q, _)| q == p) {
            if v != w {
                return false;
            }
            shared = true;
        }
    }
    shared
}

/// Named properties, evaluated from their definitions.
pub fn admissible(name: &str, c: &Cfg, n: usize, outputs: &[i64]) -> BTreeSet<i64> {
    let vals: BTreeSet<i64> = c.iter().map(|(_, v)| *v).collect();
    let all: BTreeSet<i64> = outputs.iter().copied().collect();
    let unanimous = (vals.len() == 1).then(|| *vals.iter().next().unwrap());
    match name {
        "strong" => match unanimous {
            Some(v) => [v].into(),
            None => all,
        },
        "weak" => match unanimous {
            Some(v) if c.len() == n => [v].into(),
            _ => all,
        },
        "correct_proposal" => vals.intersection(&all).copied().collect(),
        "interval" => {
            let (lo, hi) = (*vals.iter().next().unwrap(), *vals.iter().last().unwrap());
            all.into_iter().filter(|v| *v >= lo && *v <= hi).collect()
        }
        other => {
            let v: i64 = other.strip_prefix("constant:").expect("known property").parse().unwrap();
            [v].into()
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub verdict: &'static str,
    pub witness: Option<i64>,
    /// Least common admissible value per `(n - t)`-sized configuration, when Λ exists.
    pub lambda: Option<BTreeMap<Cfg, i64>>,
}

/// Classification from scratch, given `val` on every configuration of `I`.
pub fn classify(n: usize, t: usize, configs: &[Cfg], val: &BTreeMap<Cfg, BTreeSet<i64>>, outputs: &[i64]) -> OracleVerdict {
    let mut common: BTreeSet<i64> = outputs.iter().copied().collect();
    for c in configs {
        common = common.intersection(&val[c]).copied().collect();
    }
    let witness = common.iter().next().copied();
    let mut lambda = Some(BTreeMap::new());
    if n > 3 * t {
        for c in configs.iter().filter(|c| c.len() == n - t) {
            let mut inter: BTreeSet<i64> = outputs.iter().copied().collect();
            for other in configs.iter().filter(|o| similar(c, o)) {
                inter = inter.intersection(&val[other]).copied().collect();
            }
            match inter.iter().next() {
                Some(v) => {
                    lambda.as_mut().unwrap().insert(c.clone(), *v);
                }
                None => {
                    lambda = None;
                    break;
                }
            }
        }
    } else {
        lambda = None;
    }
    let verdict = if witness.is_some() {
        "solvable_trivial"
    } else if n > 3 * t && lambda.is_some() {
        "solvable_universal"
    } else {
        "unsolvable"
    };
    OracleVerdict { verdict, witness, lambda }
}

pub fn named_table(name: &str, n: usize, configs: &[Cfg], outputs: &[i64]) -> BTreeMap<Cfg, BTreeSet<i64>> {
    configs.iter().map(|c| (c.clone(), admissible(name, c, n, outputs))).collect()
}

pub mod brb;
pub mod scenarios;
