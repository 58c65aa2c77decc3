use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Allocation, BidderId, Instance, MechanismKind, PricedOutcome};
use crate::money::Money;
use crate::sigma::{allocate, sigma_table_with, RangeStructure, SigmaTable, TieK};

/// Σ over the best feasible allocation whose winner set differs from A*.
///
/// Either a different size k, or size k* with the lowest winner swapped for
/// the best eligible non-winner. Zero when no alternative exists.
pub fn second_best_sum(instance: &Instance, table: &SigmaTable) -> Money {
    let k_star = table.k_star();
    let mut best = table.defined().filter(|&(k, _)| k != k_star).map(|(_, s)| s).max();
    let mut eligible = instance.ranked().iter().filter(|b| b.cap >= k_star);
    let last_winner = eligible.by_ref().take(k_star).last();
    if let (Some(w), Some(e)) = (last_winner, eligible.next()) {
        best = best.max(Some(table.best() - w.amount + e.amount));
    }
    best.unwrap_or(Money::ZERO)
}

/// Running maxima of `values[k]` (1-based, undefined entries skipped) from
/// an anchor outwards: `from_left[k]` covers `anchor..=k`, `from_right[k]`
/// covers `k..=anchor`.
struct Anchored {
    from_left: Vec<Option<Money>>,
    from_right: Vec<Option<Money>>,
}

impl Anchored {
    fn new(values: &[Option<Money>], start: usize, end: usize) -> Self {
        let n = values.len();
        let mut from_left = vec![None; n + 2];
        let mut acc = None;
        for k in start.max(1)..=n {
            acc = acc.max(values[k - 1]);
            from_left[k] = acc;
        }
        let mut from_right = vec![None; n + 2];
        let mut acc = None;
        for k in (1..=end.min(n)).rev() {
            acc = acc.max(values[k - 1]);
            from_right[k] = acc;
        }
        Anchored { from_left, from_right }
    }

    /// Max over `start..=hi`.
    fn up_to(&self, hi: usize) -> Option<Money> {
        self.from_left.get(hi).copied().flatten()
    }

    /// Max over `lo..=end`.
    fn down_to(&self, lo: usize) -> Option<Money> {
        self.from_right.get(lo).copied().flatten()
    }
}

/// Computes minimum-pay prices for the winners of A*.
///
/// For winner i the price is the smallest bid that keeps k*, the winner set,
/// and i's position among the winners:
///
/// `max(S₂⁻ⁱ − Σ_{k*} + b_i, b_{next})`, raised by one micro-unit when the
/// tie at exactly that bid would be resolved against i.
///
/// `S₂⁻ⁱ` is the best alternative allocation not containing i. Removing i
/// from the size-k winner set only matters for k in `[α_i, β_i]`, where
/// β_i is i's cap and α_i the first size at which fewer than k eligible
/// bidders outrank i; there the alternative is `Σ_k − b_i + next_k` with
/// next_k the (k+1)-th eligible bid. Every maximum needed is over a range
/// that starts or ends at 1, k* or n, so running maxima answer each in O(1);
/// α_i never decreases along the winners, so all of them take O(n) counts.
pub struct MppPricer<'a> {
    instance: &'a Instance,
    rs: &'a RangeStructure,
    table: &'a SigmaTable,
    /// Rank of the (k+1)-th bidder with cap ≥ k.
    next_rank: Vec<Option<usize>>,
    /// Σ_k: maxima over `1..=hi` and `lo..=n`.
    plain: Anchored,
    /// Σ_k + next_k: maxima over `lo..=k*-1` and `k*+1..=hi`.
    swapped: Anchored,
}

impl<'a> MppPricer<'a> {
    pub fn new(instance: &'a Instance, rs: &'a RangeStructure, table: &'a SigmaTable) -> Self {
        let n = rs.len();
        // The (k+1)-th point with cap ≥ k never moves left as k grows.
        let mut next_rank: Vec<Option<usize>> = Vec::with_capacity(n);
        let mut prev = 0;
        for k in 1..=n {
            let r = rs.find_nth_from(k, k + 1, prev);
            prev = r.unwrap_or(prev);
            next_rank.push(r);
        }
        let plain: Vec<Option<Money>> = (1..=n).map(|k| table.sigma(k)).collect();
        let swapped: Vec<Option<Money>> = (1..=n)
            .map(|k| {
                let next = next_rank[k - 1].map(|r| instance.ranked()[r - 1].amount);
                Some(table.sigma(k)? + next?)
            })
            .collect();
        let k_star = table.k_star();
        MppPricer {
            instance,
            rs,
            table,
            next_rank,
            plain: Anchored::new(&plain, 1, n),
            swapped: Anchored::new(&swapped, k_star + 1, k_star.saturating_sub(1)),
        }
    }

    pub fn allocation(&self) -> Allocation {
        allocate(self.instance, self.table.k_star()).expect("k* is a defined size")
    }

    /// Price of the winner at index `j` of `alloc.winners`, whose α is `alpha`.
    fn price_at(&self, alloc: &Allocation, j: usize, rank: usize, alpha: usize) -> Money {
        let n = self.rs.len();
        let k_star = self.table.k_star();
        let s_star = self.table.best();
        let ranked = self.instance.ranked();
        let me = ranked[rank - 1];
        let id = me.bidder_id;
        let b = me.amount;
        let beta = me.cap.min(n);
        debug_assert!(alpha <= k_star && k_star <= beta);

        let minus_b = |m: Option<Money>| m.map(|m| m - b);
        let before = |hi: usize| if hi == 0 { None } else { self.plain.up_to(hi) };
        let smaller = before(alpha - 1).max(minus_b(if alpha < k_star { self.swapped.down_to(alpha) } else { None }));
        let larger = minus_b(if beta > k_star { self.swapped.up_to(beta) } else { None })
            .max(if beta < n { self.plain.down_to(beta + 1) } else { None });
        let swap_in = self.next_rank[k_star - 1].map(|r| &ranked[r - 1]);
        let same_size = swap_in.map(|e| s_star - b + e.amount);
        let alt = smaller.max(larger).max(same_size);

        let first = alt.map(|a| a - s_star + b);
        let next = alloc.winners.get(j + 1).map(|&w| *self.instance.bid_of(w).unwrap());
        let threshold = first
            .max(next.map(|w| w.amount))
            .unwrap_or(Money::ZERO)
            .max(Money::ZERO);

        let mut loses_tie = false;
        if first == Some(threshold) {
            let rival_size = match self.table.tie() {
                TieK::Smallest => smaller,
                TieK::Largest => larger,
            };
            loses_tie |= rival_size == alt;
            loses_tie |= same_size == alt && swap_in.is_some_and(|e| e.bidder_id < id);
        }
        if let Some(w) = next {
            loses_tie |= w.amount == threshold && w.bidder_id < id;
        }
        let price = if loses_tie { threshold + Money::EPSILON } else { threshold };
        debug_assert!(price <= b);
        price.min(b)
    }

    /// Prices for the winners of `alloc`, which must be the allocation of
    /// size k* (winners in canonical order).
    pub fn prices(&self, alloc: &Allocation) -> BTreeMap<BidderId, Money> {
        let mut alpha = 1;
        let mut out = BTreeMap::new();
        for (j, &id) in alloc.winners.iter().enumerate() {
            let rank = self.instance.rank_of(id).expect("winner is in the instance");
            // α: first k where fewer than k eligible bidders outrank i; it
            // only grows as rank grows.
            while self.rs.count(rank - 1, alpha) >= alpha {
                alpha += 1;
            }
            out.insert(id, self.price_at(alloc, j, rank, alpha));
        }
        out
    }

    pub fn outcome(&self) -> PricedOutcome {
        let allocation = self.allocation();
        let prices = self.prices(&allocation);
        PricedOutcome {
            mechanism: MechanismKind::MppCa,
            efficiency: self.table.best(),
            revenue: prices.values().sum(),
            positions: None,
            prices,
            allocation,
        }
    }
}

/// MPP_CA: allocate Σ_{k*} and charge minimum-pay prices.
pub fn run_mpp(instance: &Instance, tie: TieK) -> Result<PricedOutcome> {
    if instance.is_empty() {
        return Err(Error::NoAllocation { k: 1 });
    }
    let rs = RangeStructure::build(instance)?;
    let table = sigma_table_with(&rs, tie);
    Ok(run_mpp_with(instance, &rs, &table))
}

/// Prices an already computed table.
pub fn run_mpp_with(instance: &Instance, rs: &RangeStructure, table: &SigmaTable) -> PricedOutcome {
    MppPricer::new(instance, rs, table).outcome()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bid;
    use crate::sigma::sigma_table;
    use proptest::prelude::*;

    fn inst(pairs: &[(i64, usize)]) -> Instance {
        Instance::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(a, c))| Bid::new(i as u64 + 1, Money::units(a), c))
                .collect(),
        )
        .unwrap()
    }

    fn prices(o: &PricedOutcome) -> Vec<(u64, Money)> {
        o.prices.iter().map(|(&k, &v)| (k, v)).collect()
    }

    #[test]
    fn example2_truthful() {
        let o = run_mpp(&inst(&[(100, 1), (80, 2), (70, 2)]), TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![2, 3]);
        assert_eq!(prices(&o), vec![(2, Money::units(70)), (3, Money::units(20))]);
        assert_eq!(o.revenue, Money::units(90));
    }

    #[test]
    fn example2_deviated() {
        let o = run_mpp(&inst(&[(100, 1), (40, 2), (70, 2)]), TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![3, 2]);
        assert_eq!(prices(&o), vec![(2, Money::units(30)), (3, Money::units(60))]);
    }

    #[test]
    fn tightness_bids() {
        let o = run_mpp(&inst(&[(100, 1), (100, 2), (50, 2)]), TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![2, 3]);
        assert_eq!(prices(&o), vec![(2, Money::units(50)), (3, Money::ZERO)]);
    }

    #[test]
    fn smallest_rule_adds_epsilon_on_lost_ties() {
        // At 20, C would tie {A} at 100 and the smaller allocation would win.
        let o = run_mpp(&inst(&[(100, 1), (80, 2), (70, 2)]), TieK::Smallest).unwrap();
        assert_eq!(o.price_of(3), Some(Money::units(20) + Money::EPSILON));
        assert_eq!(o.price_of(2), Some(Money::units(70)));
    }

    #[test]
    fn position_tie_needs_lower_id() {
        // Winner 2 outranks winner 1 only by amount; at equal amounts id 1 goes first.
        let i = Instance::new(vec![
            Bid::new(1, Money::units(50), 2),
            Bid::new(2, Money::units(60), 2),
        ])
        .unwrap();
        let o = run_mpp(&i, TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![2, 1]);
        assert_eq!(o.price_of(2), Some(Money::units(50) + Money::EPSILON));
        assert_eq!(o.price_of(1), Some(Money::ZERO));
    }

    #[test]
    fn price_ignores_alternatives_containing_the_winner() {
        // The global second best {1,2,4} contains bidder 1, who can drop to 50
        // without losing anything.
        let i = inst(&[(100, 3), (50, 3), (40, 3), (39, 3)]);
        let o = run_mpp(&i, TieK::Largest).unwrap();
        assert_eq!(o.allocation.winners, vec![1, 2, 3]);
        assert_eq!(o.price_of(1), Some(Money::units(50)));
        assert_eq!(o.price_of(2), Some(Money::units(40)));
        assert_eq!(o.price_of(3), Some(Money::units(39)));
    }

    #[test]
    fn single_bidder_pays_zero() {
        let o = run_mpp(&inst(&[(10, 1)]), TieK::Largest).unwrap();
        assert_eq!(prices(&o), vec![(1, Money::ZERO)]);
    }

    #[test]
    fn second_best_examples() {
        let ex2 = inst(&[(100, 1), (80, 2), (70, 2)]);
        let t = sigma_table(&ex2, TieK::Largest).unwrap();
        assert_eq!(second_best_sum(&ex2, &t), Money::units(100));
        let one = inst(&[(10, 1)]);
        assert_eq!(second_best_sum(&one, &sigma_table(&one, TieK::Largest).unwrap()), Money::ZERO);
        let tight = inst(&[(100, 1), (100, 2), (50, 2)]);
        let t = sigma_table(&tight, TieK::Largest).unwrap();
        assert_eq!(second_best_sum(&tight, &t), Money::units(100));
    }

    #[test]
    fn empty_instance_has_no_allocation() {
        assert!(run_mpp(&Instance::new(vec![]).unwrap(), TieK::Largest).is_err());
    }

    proptest! {
        #[test]
        fn prices_are_minimum_pay(
            pairs in prop::collection::vec((0i64..12, 1usize..8), 1..9),
            largest: bool,
        ) {
            let tie = if largest { TieK::Largest } else { TieK::Smallest };
            let i = inst(&pairs);
            let base = run_mpp(&i, tie).unwrap();
            prop_assert_eq!(base.revenue, base.prices.values().copied().sum::<Money>());
            for (&id, &p) in &base.prices {
                let b = *i.bid_of(id).unwrap();
                prop_assert!(p >= Money::ZERO && p <= b.amount);
                let at = run_mpp(&i.with_bid(Bid::new(id, p, b.cap)).unwrap(), tie).unwrap();
                prop_assert_eq!(&at.allocation, &base.allocation);
                if p > Money::ZERO {
                    let below = run_mpp(&i.with_bid(Bid::new(id, p - Money::EPSILON, b.cap)).unwrap(), tie).unwrap();
                    prop_assert_ne!(&below.allocation, &base.allocation);
                }
            }
        }
    }
}
