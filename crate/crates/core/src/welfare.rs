//! Optimal allocations and price-of-anarchy ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalAssignment {
    /// `x^v_i`; always sums to `k`.
    pub allocation: Vec<usize>,
    pub value: f64,
}

fn check_dims(vals: &[Valuation], k: usize) -> Result<()> {
    if vals.is_empty() {
        return Err(Error::Dimension("at least one bidder required".into()));
    }
    if let Some(v) = vals.iter().find(|v| v.k() != k) {
        return Err(Error::Dimension(format!(
            "valuation over {} units, expected {k}",
            v.k()
        )));
    }
    Ok(())
}

/// Welfare-maximizing split of exactly `k` units.
///
/// Since valuations are non-decreasing, restricting to allocations that sell
/// every unit loses nothing. Among maximizers the lexicographically smallest
/// allocation vector is returned.
pub fn optimal_allocation(vals: &[Valuation], k: usize) -> Result<OptimalAssignment> {
    check_dims(vals, k)?;
    let n = vals.len();
    // best[i][u]: max welfare of bidders i.. sharing exactly u units
    let mut best = vec![vec![f64::NEG_INFINITY; k + 1]; n + 1];
    best[n][0] = 0.0;
    for i in (0..n).rev() {
        for u in 0..=k {
            let mut m = f64::NEG_INFINITY;
            for x in 0..=u {
                let rest = best[i + 1][u - x];
                if rest > f64::NEG_INFINITY {
                    m = m.max(vals[i].value(x) + rest);
                }
            }
            best[i][u] = m;
        }
    }
    let mut allocation = Vec::with_capacity(n);
    let mut left = k;
    for i in 0..n {
        let target = best[i][left];
        let slack = 1e-12 * target.abs().max(1.0);
        let x = (0..=left)
            .find(|&x| {
                let rest = best[i + 1][left - x];
                rest > f64::NEG_INFINITY && vals[i].value(x) + rest >= target - slack
            })
            .expect("some split attains the maximum");
        allocation.push(x);
        left -= x;
    }
    let value = allocation.iter().zip(vals).map(|(&x, v)| v.value(x)).sum();
    Ok(OptimalAssignment { allocation, value })
}

/// Greedy optimum for submodular valuations: the `k` largest marginals win.
pub fn greedy_optimal_submodular(vals: &[Valuation], k: usize) -> Result<OptimalAssignment> {
    check_dims(vals, k)?;
    if let Some(i) = vals.iter().position(|v| !v.is_submodular()) {
        return Err(Error::ClassMismatch(format!(
            "bidder {i} is not submodular"
        )));
    }
    let mut allocation = vec![0usize; vals.len()];
    for _ in 0..k {
        let mut pick = 0;
        let mut top = f64::NEG_INFINITY;
        for (i, v) in vals.iter().enumerate() {
            if allocation[i] < k {
                let m = v.marginal(allocation[i] + 1);
                if m > top {
                    top = m;
                    pick = i;
                }
            }
        }
        allocation[pick] += 1;
    }
    let value = allocation.iter().zip(vals).map(|(&x, v)| v.value(x)).sum();
    Ok(OptimalAssignment { allocation, value })
}

/// `opt / eq`, rejecting non-positive equilibrium welfare.
pub fn poa_ratio(opt_value: f64, eq_welfare: f64) -> Result<f64> {
    if !(eq_welfare > 0.0) {
        return Err(Error::NonPositiveWelfare(eq_welfare));
    }
    Ok(opt_value / eq_welfare)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::{random_valuation, ValuationClass};
    use proptest::prelude::*;

    #[test]
    fn single_spike_bidder_takes_everything() {
        let k = 10;
        let mut v1 = vec![0.0];
        v1.extend((1..k).map(|_| 1.0));
        v1.push(2.0);
        let mut vals = vec![Valuation::new(v1).unwrap()];
        vals.push(Valuation::unit_demand(k, 1.0 / k as f64).unwrap());
        for _ in 2..k {
            vals.push(Valuation::unit_demand(k, 1e-6).unwrap());
        }
        let opt = optimal_allocation(&vals, k).unwrap();
        assert_eq!(opt.allocation[0], k);
        assert_eq!(opt.value, 2.0);
    }

    #[test]
    fn worthless_second_bidder() {
        let k = 7;
        let vals = vec![
            Valuation::additive(k, 1.0).unwrap(),
            Valuation::new(vec![0.0; k + 1]).unwrap(),
        ];
        let opt = optimal_allocation(&vals, k).unwrap();
        assert_eq!(opt.allocation, vec![k, 0]);
        assert_eq!(opt.value, k as f64);
    }

    #[test]
    fn padding_sells_every_unit() {
        let vals = vec![
            Valuation::unit_demand(3, 1.0).unwrap(),
            Valuation::unit_demand(3, 1.0).unwrap(),
        ];
        let opt = optimal_allocation(&vals, 3).unwrap();
        assert_eq!(opt.allocation.iter().sum::<usize>(), 3);
        assert_eq!(opt.allocation, vec![1, 2]);
        assert_eq!(opt.value, 2.0);
    }

    #[test]
    fn greedy_single_bidder_and_class_check() {
        let v = Valuation::new(vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            greedy_optimal_submodular(&[v], 2).unwrap().allocation,
            vec![2]
        );
        let spiky = Valuation::new(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            greedy_optimal_submodular(&[spiky], 3),
            Err(Error::ClassMismatch(_))
        ));
    }

    #[test]
    fn poa_ratio_examples() {
        assert_eq!(poa_ratio(3.0, 3.0).unwrap(), 1.0);
        let r = poa_ratio(1.0, 1.0 - 0.333 * 0.0014).unwrap();
        assert!((1.0004..1.0005).contains(&r));
        assert!(poa_ratio(1.0, 0.0).is_err());
        assert!(poa_ratio(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn greedy_matches_dp(seed in any::<u64>(), n in 1usize..6, k in 1usize..9) {
            let vals: Vec<Valuation> = (0..n)
                .map(|i| random_valuation(ValuationClass::Submodular, k, 1.0, seed.wrapping_add(i as u64)).unwrap())
                .collect();
            let dp = optimal_allocation(&vals, k).unwrap();
            let greedy = greedy_optimal_submodular(&vals, k).unwrap();
            prop_assert!((dp.value - greedy.value).abs() <= 1e-9);
            prop_assert_eq!(dp.allocation.iter().sum::<usize>(), k);
        }
    }
}
