use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Instance, MechanismKind, PricedOutcome, Valuation};
use crate::money::Money;
use crate::sigma::{allocate, sigma_table, TieK};

/// Best total bid achievable without any bidder from `instance`; zero when
/// nobody is left.
fn best_value(instance: &Instance, tie: TieK) -> Result<Money> {
    if instance.is_empty() {
        return Ok(Money::ZERO);
    }
    Ok(sigma_table(instance, tie)?.best())
}

/// VCG_CA on reported bids, treated as valuations.
///
/// Winner i pays `E₋ᵢ − E* + b_i`, where E₋ᵢ is recomputed from a fresh
/// table over the instance without i.
pub fn run_vcg_bids(bids: &Instance, tie: TieK) -> Result<PricedOutcome> {
    if bids.is_empty() {
        return Err(Error::NoAllocation { k: 1 });
    }
    let table = sigma_table(bids, tie)?;
    let best = table.best();
    let allocation = allocate(bids, table.k_star())?;
    let mut prices = BTreeMap::new();
    for &id in &allocation.winners {
        let without = best_value(&bids.without(id), tie)?;
        let own = bids.bid_of(id).unwrap().amount;
        prices.insert(id, without - best + own);
    }
    Ok(PricedOutcome {
        mechanism: MechanismKind::VcgCa,
        allocation,
        positions: None,
        revenue: prices.values().sum(),
        prices,
        efficiency: best,
    })
}

/// VCG_CA under truthful bidding.
pub fn run_vcg(valuations: &[Valuation], tie: TieK) -> Result<PricedOutcome> {
    run_vcg_bids(&Instance::from_valuations(valuations)?, tie)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals(pairs: &[(i64, usize)]) -> Vec<Valuation> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(v, c))| Valuation::new(i as u64 + 1, Money::units(v), c))
            .collect()
    }

    #[test]
    fn example1() {
        let o = run_vcg(&vals(&[(100, 1), (90, 2), (80, 2)]), TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![2, 3]);
        assert_eq!(o.price_of(2), Some(Money::units(20)));
        assert_eq!(o.price_of(3), Some(Money::units(10)));
        assert_eq!(o.revenue, Money::units(30));
        assert_eq!(o.efficiency, Money::units(170));
    }

    #[test]
    fn revenue_example() {
        let mut v = vals(&[(100, 1), (50, 2), (50, 2)]);
        v[0].value += Money::EPSILON;
        let o = run_vcg(&v, TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![1]);
        assert_eq!(o.price_of(1), Some(Money::units(100)));
    }

    #[test]
    fn single_bidder() {
        let o = run_vcg(&vals(&[(42, 1)]), TieK::Largest).unwrap();
        assert_eq!(o.price_of(1), Some(Money::ZERO));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(run_vcg(&[], TieK::Largest).is_err());
    }
}
