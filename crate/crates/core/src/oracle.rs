//! Exhaustive reference implementations for small instances.
//!
//! Nothing here shares code with the fast paths beyond the domain types: the
//! cardinal oracles enumerate bitmasks over bidders, the prefix oracle
//! searches position assignments directly.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::mechanisms::PrefixInstance;
use crate::model::{canonical_cmp, Allocation, Bid, BidderId, Instance, Valuation};
use crate::money::Money;
use crate::sigma::TieK;

/// Environment variable overriding [`OracleBudget::max_n`].
pub const MAX_N_ENV: &str = "CARDAUCT_MAX_ORACLE_N";

/// Size limit for exhaustive searches; enumeration is exponential in n.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_n: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_n: 15 }
    }
}

impl OracleBudget {
    pub fn from_env() -> Result<Self> {
        match std::env::var(MAX_N_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(|max_n| OracleBudget { max_n })
                .map_err(|_| Error::Config(format!("{MAX_N_ENV} must be an integer, got {v:?}"))),
            Err(_) => Ok(OracleBudget::default()),
        }
    }

    fn check(&self, what: &'static str, actual: usize) -> Result<()> {
        // Bitmasks are u64; the limit is hard regardless of configuration.
        let limit = self.max_n.min(30);
        if actual > limit {
            return Err(Error::Budget { what, actual, limit });
        }
        Ok(())
    }
}

struct Subset {
    mask: u64,
    k: usize,
    total: Money,
    /// Sorted ids, the lexicographic tie key.
    ids: Vec<BidderId>,
}

fn feasible_subsets(bids: &[Bid]) -> impl Iterator<Item = Subset> + '_ {
    (0u64..1 << bids.len()).filter_map(move |mask| {
        let k = mask.count_ones() as usize;
        let members = || bids.iter().enumerate().filter(move |(i, _)| mask >> i & 1 == 1);
        if !members().all(|(_, b)| b.cap >= k) {
            return None;
        }
        let total = members().map(|(_, b)| b.amount).sum();
        let mut ids: Vec<_> = members().map(|(_, b)| b.bidder_id).collect();
        ids.sort_unstable();
        Some(Subset { mask, k, total, ids })
    })
}

fn better(a: &Subset, b: &Subset, tie: TieK) -> bool {
    if a.total != b.total {
        return a.total > b.total;
    }
    if a.k != b.k {
        return tie.prefers(a.k, b.k);
    }
    a.ids < b.ids
}

fn best_subset(bids: &[Bid], max_k: usize, tie: TieK) -> Option<Subset> {
    feasible_subsets(bids)
        .filter(|s| s.k >= 1 && s.k <= max_k)
        .fold(None, |best, s| match best {
            Some(b) if !better(&s, &b, tie) => Some(b),
            _ => Some(s),
        })
}

fn to_allocation(bids: &[Bid], s: &Subset) -> Allocation {
    let mut winners: Vec<&Bid> =
        bids.iter().enumerate().filter(|(i, _)| s.mask >> i & 1 == 1).map(|(_, b)| b).collect();
    winners.sort_by(|a, b| canonical_cmp(a, b));
    Allocation { k: s.k, winners: winners.into_iter().map(|b| b.bidder_id).collect() }
}

/// Best non-empty feasible allocation. Ties go to the size preferred by
/// `tie`, then to the lexicographically smallest sorted id list.
pub fn brute_best_allocation(
    instance: &Instance,
    tie: TieK,
    budget: OracleBudget,
) -> Result<(Allocation, Money)> {
    brute_best_allocation_upto(instance, instance.len(), tie, budget)
}

/// As [`brute_best_allocation`], restricted to allocations of at most `max_k`.
pub fn brute_best_allocation_upto(
    instance: &Instance,
    max_k: usize,
    tie: TieK,
    budget: OracleBudget,
) -> Result<(Allocation, Money)> {
    budget.check("bidders", instance.len())?;
    let bids = instance.bids();
    let best = best_subset(bids, max_k, tie).ok_or(Error::NoAllocation { k: 1 })?;
    Ok((to_allocation(bids, &best), best.total))
}

/// Best total bid of exactly `k` copies, if any allocation of that size exists.
pub fn brute_sigma(instance: &Instance, k: usize, budget: OracleBudget) -> Result<Option<Money>> {
    budget.check("bidders", instance.len())?;
    Ok(feasible_subsets(instance.bids()).filter(|s| s.k == k).map(|s| s.total).max())
}

/// Highest total bid among feasible allocations other than the optimal one
/// (the empty allocation counts, so the result is at least zero).
pub fn brute_second_best(instance: &Instance, tie: TieK, budget: OracleBudget) -> Result<Money> {
    budget.check("bidders", instance.len())?;
    let bids = instance.bids();
    let Some(best) = best_subset(bids, bids.len(), tie) else {
        return Ok(Money::ZERO);
    };
    Ok(feasible_subsets(bids)
        .filter(|s| s.mask != best.mask)
        .map(|s| s.total)
        .max()
        .unwrap_or(Money::ZERO))
}

/// VCG prices with every welfare term found by enumeration.
pub fn brute_vcg_prices(
    valuations: &[Valuation],
    tie: TieK,
    budget: OracleBudget,
) -> Result<BTreeMap<BidderId, Money>> {
    let instance = Instance::from_valuations(valuations)?;
    budget.check("bidders", instance.len())?;
    let bids = instance.bids();
    let best = best_subset(bids, bids.len(), tie).ok_or(Error::NoAllocation { k: 1 })?;
    let mut prices = BTreeMap::new();
    for (i, bid) in bids.iter().enumerate() {
        if best.mask >> i & 1 == 0 {
            continue;
        }
        let without = feasible_subsets(bids)
            .filter(|s| s.mask >> i & 1 == 0)
            .map(|s| s.total)
            .max()
            .unwrap_or(Money::ZERO);
        prices.insert(bid.bidder_id, without - best.total + bid.amount);
    }
    Ok(prices)
}

/// Maximum total value of any assignment of bidders to distinct positions
/// `1..=items` with each position within the bidder's cap.
pub fn brute_prefix_best(p: &PrefixInstance, budget: OracleBudget) -> Result<Money> {
    budget.check("bidders", p.bids.len())?;
    budget.check("items", p.items)?;
    fn search(
        bids: &[Bid],
        items: usize,
        i: usize,
        used: u32,
        memo: &mut HashMap<(usize, u32), Money>,
    ) -> Money {
        if i == bids.len() {
            return Money::ZERO;
        }
        if let Some(&m) = memo.get(&(i, used)) {
            return m;
        }
        let mut best = search(bids, items, i + 1, used, memo);
        for pos in 0..bids[i].cap.min(items) {
            if used >> pos & 1 == 0 {
                let v = bids[i].amount + search(bids, items, i + 1, used | 1 << pos, memo);
                best = best.max(v);
            }
        }
        memo.insert((i, used), best);
        best
    }
    Ok(search(p.bids.bids(), p.items, 0, 0, &mut HashMap::new()))
}
