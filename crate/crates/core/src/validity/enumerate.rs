use std::ops::RangeInclusive;

use super::types::{InputConfiguration, ProcessId, SystemParams, Value, ValueSpace};
use super::ValidityError;

/// Environment variable overriding the enumeration cap.
pub const BUDGET_ENV: &str = "VALIDUS_BUDGET";

/// Hard cap on the number of configurations any single enumeration may produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub cap: u64,
}

impl Budget {
    pub const DEFAULT_CAP: u64 = 1_000_000;

    pub fn new(cap: u64) -> Self {
        Budget { cap }
    }

    /// Default cap, overridden by `VALIDUS_BUDGET` when set to a positive integer.
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .filter(|&cap| cap > 0)
            .map(Budget::new)
            .unwrap_or_default()
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(Self::DEFAULT_CAP)
    }
}

/// `sum over x in sizes of C(n, x) * |V_I|^x`, saturating.
pub fn count_configs(n: usize, inputs: usize, sizes: RangeInclusive<usize>) -> u128 {
    let mut total: u128 = 0;
    for x in sizes {
        if x > n {
            continue;
        }
        let mut binom: u128 = 1;
        for k in 0..x {
            binom = binom * (n - k) as u128 / (k + 1) as u128;
        }
        let pow = (inputs as u128).checked_pow(x as u32).unwrap_or(u128::MAX);
        total = total.saturating_add(binom.saturating_mul(pow));
    }
    total
}

/// Every valid configuration whose size lies in `sizes`, each exactly once.
///
/// Canonical order: by size ascending, then process subsets in lexicographic order, then
/// value tuples in lexicographic order of the sorted input set.
pub fn enumerate_configs(
    params: SystemParams,
    space: &ValueSpace,
    sizes: RangeInclusive<usize>,
    budget: Budget,
) -> Result<Vec<InputConfiguration>, ValidityError> {
    let (lo, hi) = (*sizes.start(), *sizes.end());
    if lo < params.quorum() || hi > params.n() || lo > hi {
        return Err(ValidityError::InvalidConfig(format!(
            "sizes {lo}..={hi} outside {}..={}",
            params.quorum(),
            params.n()
        )));
    }
    let count = count_configs(params.n(), space.inputs().len(), sizes.clone());
    if count > budget.cap as u128 {
        return Err(ValidityError::BudgetExceeded { count, cap: budget.cap });
    }

    let inputs = space.inputs();
    let mut out = Vec::with_capacity(count as usize);
    for size in sizes {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let mut digits = vec![0usize; size];
            loop {
                let cfg = InputConfiguration::new(
                    subset
                        .iter()
                        .zip(&digits)
                        .map(|(&p, &d)| (ProcessId::from_index(p), inputs[d])),
                )?;
                out.push(cfg);
                if !odometer(&mut digits, inputs.len()) {
                    break;
                }
            }
            if !next_combination(&mut subset, params.n()) {
                break;
            }
        }
    }
    Ok(out)
}

/// All of `I`: configurations of every size in `[n - t, n]`.
pub fn all_configs(
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Vec<InputConfiguration>, ValidityError> {
    enumerate_configs(params, space, params.quorum()..=params.n(), budget)
}

/// `sim(c)`: every configuration of `I` similar to `c`, in canonical order.
pub fn sim_set(
    c: &InputConfiguration,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Vec<InputConfiguration>, ValidityError> {
    c.validate(params, space)?;
    similar_configs(c, params, space, budget)
}

/// Generates `sim(c)` directly: process subsets meeting `c`, with `c`'s values on the
/// shared processes and every input on the rest.
pub(super) fn similar_configs(
    c: &InputConfiguration,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Vec<InputConfiguration>, ValidityError> {
    let count = count_configs(params.n(), space.inputs().len(), params.quorum()..=params.n());
    if count > budget.cap as u128 {
        return Err(ValidityError::BudgetExceeded { count, cap: budget.cap });
    }
    let inputs = space.inputs();
    let mut out = Vec::new();
    for size in params.quorum()..=params.n() {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let fixed: Vec<Option<Value>> = subset.iter().map(|&p| c.get(ProcessId::from_index(p))).collect();
            if fixed.iter().any(Option::is_some) {
                let free = fixed.iter().filter(|v| v.is_none()).count();
                let mut digits = vec![0usize; free];
                loop {
                    let mut d = digits.iter();
                    let pairs = subset.iter().zip(&fixed).map(|(&p, v)| {
                        (ProcessId::from_index(p), v.unwrap_or_else(|| inputs[*d.next().expect("one digit per free slot")]))
                    });
                    out.push(InputConfiguration::new(pairs.collect::<Vec<_>>())?);
                    if !odometer(&mut digits, inputs.len()) {
                        break;
                    }
                }
            }
            if !next_combination(&mut subset, params.n()) {
                break;
            }
        }
    }
    Ok(out)
}

fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validity::types::Value;

    fn params(n: usize, t: usize) -> SystemParams {
        SystemParams::new(n, t).unwrap()
    }

    #[test]
    fn two_processes_one_value() {
        let space = ValueSpace::symmetric(vec![Value(7)]).unwrap();
        let all = enumerate_configs(params(2, 1), &space, 1..=2, Budget::default()).unwrap();
        let rendered: Vec<String> = all.iter().map(|c| c.to_string()).collect();
        assert_eq!(rendered, ["[(P1,7)]", "[(P2,7)]", "[(P1,7),(P2,7)]"]);
    }

    #[test]
    fn counts_match_closed_form() {
        let b = ValueSpace::binary();
        assert_eq!(enumerate_configs(params(3, 1), &b, 2..=2, Budget::default()).unwrap().len(), 12);
        assert_eq!(enumerate_configs(params(4, 1), &b, 3..=4, Budget::default()).unwrap().len(), 48);
        assert_eq!(count_configs(7, 2, 5..=7), 1248);
    }

    #[test]
    fn value_tuples_follow_subsets() {
        let b = ValueSpace::binary();
        let all = enumerate_configs(params(3, 1), &b, 2..=2, Budget::default()).unwrap();
        assert_eq!(all[0].to_compact(), "1:0 2:0");
        assert_eq!(all[1].to_compact(), "1:0 2:1");
        assert_eq!(all[3].to_compact(), "1:1 2:1");
        assert_eq!(all[4].to_compact(), "1:0 3:0");
        assert_eq!(all[11].to_compact(), "2:1 3:1");
    }

    #[test]
    fn budget_is_enforced() {
        let b = ValueSpace::binary();
        let err = enumerate_configs(params(4, 1), &b, 3..=4, Budget::new(47)).unwrap_err();
        assert!(matches!(err, ValidityError::BudgetExceeded { count: 48, cap: 47 }));
    }

    #[test]
    fn sizes_outside_range_are_rejected() {
        let b = ValueSpace::binary();
        assert!(enumerate_configs(params(4, 1), &b, 2..=4, Budget::default()).is_err());
        assert!(enumerate_configs(params(4, 1), &b, 3..=5, Budget::default()).is_err());
    }

    #[test]
    fn sim_set_examples() {
        let b = ValueSpace::binary();
        let c = InputConfiguration::from_slice(&[(1, 0), (2, 1), (3, 0)]).unwrap();
        let s = sim_set(&c, params(3, 1), &b, Budget::default()).unwrap();
        assert!(s.contains(&InputConfiguration::from_slice(&[(1, 0), (3, 0)]).unwrap()));
        assert!(!s.contains(&InputConfiguration::from_slice(&[(1, 0), (2, 0)]).unwrap()));
        assert!(s.contains(&c));

        // frozen from an independent brute-force enumeration
        let c = InputConfiguration::from_slice(&[(1, 0), (2, 0), (3, 0)]).unwrap();
        assert_eq!(sim_set(&c, params(4, 1), &b, Budget::default()).unwrap().len(), 9);
    }

    #[test]
    fn env_budget_override_parses() {
        // not set in the test environment unless a caller exports it
        let b = Budget::from_env();
        assert!(b.cap > 0);
    }
}
