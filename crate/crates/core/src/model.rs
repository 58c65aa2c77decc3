//! Bids, valuations, instances and outcomes shared by every mechanism.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

pub type BidderId = u64;

/// A submitted two-dimensional bid: pay at most `amount` if at most `cap`
/// copies are sold (cardinal model), or if placed within the first `cap`
/// positions (prefix model).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bid {
    pub bidder_id: BidderId,
    pub amount: Money,
    pub cap: usize,
}

impl Bid {
    pub fn new(bidder_id: BidderId, amount: Money, cap: usize) -> Self {
        Bid { bidder_id, amount, cap }
    }

    fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            return Err(Error::input(format!("bidder {}: cap must be >= 1", self.bidder_id)));
        }
        if self.amount.is_negative() {
            return Err(Error::input(format!(
                "bidder {}: amount must be >= 0",
                self.bidder_id
            )));
        }
        Ok(())
    }
}

/// A bidder's private type: true value and true cardinality limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Valuation {
    pub bidder_id: BidderId,
    pub value: Money,
    pub cap: usize,
}

impl Valuation {
    pub fn new(bidder_id: BidderId, value: Money, cap: usize) -> Self {
        Valuation { bidder_id, value, cap }
    }

    /// The truthful bid `(v_i, k_i)`.
    pub fn truthful_bid(&self) -> Bid {
        Bid::new(self.bidder_id, self.value, self.cap)
    }
}

/// Ordering used everywhere a ranking of bids is needed: amount descending,
/// then bidder id ascending.
pub fn canonical_cmp(a: &Bid, b: &Bid) -> std::cmp::Ordering {
    b.amount.cmp(&a.amount).then(a.bidder_id.cmp(&b.bidder_id))
}

/// A validated set of bids together with its canonical ranking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    bids: Vec<Bid>,
    canonical_order: Vec<usize>,
    ranked: Vec<Bid>,
    rank_by_id: HashMap<BidderId, usize>,
}

impl Instance {
    /// Validates ids, caps and amounts. The total of all amounts must fit in
    /// a [`Money`], which bounds every intermediate sum the mechanisms form.
    pub fn new(bids: Vec<Bid>) -> Result<Self> {
        let mut total = Money::ZERO;
        for bid in &bids {
            bid.validate()?;
            total = total
                .checked_add(bid.amount)
                .ok_or_else(|| Error::input("sum of bid amounts overflows"))?;
        }
        let mut canonical_order: Vec<usize> = (0..bids.len()).collect();
        canonical_order.sort_by(|&a, &b| canonical_cmp(&bids[a], &bids[b]));
        let ranked: Vec<Bid> = canonical_order.iter().map(|&i| bids[i]).collect();
        let mut rank_by_id = HashMap::with_capacity(bids.len());
        for (r, bid) in ranked.iter().enumerate() {
            if rank_by_id.insert(bid.bidder_id, r + 1).is_some() {
                return Err(Error::input(format!("duplicate bidder id {}", bid.bidder_id)));
            }
        }
        Ok(Instance { bids, canonical_order, ranked, rank_by_id })
    }

    pub fn from_valuations(valuations: &[Valuation]) -> Result<Self> {
        Instance::new(valuations.iter().map(Valuation::truthful_bid).collect())
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    /// Bids in input order.
    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    /// Permutation of input indices sorted canonically.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical_order
    }

    /// Bids in canonical order; `ranked()[r - 1]` has rank `r`.
    pub fn ranked(&self) -> &[Bid] {
        &self.ranked
    }

    /// 1-based canonical rank.
    pub fn rank_of(&self, id: BidderId) -> Option<usize> {
        self.rank_by_id.get(&id).copied()
    }

    pub fn bid_of(&self, id: BidderId) -> Option<&Bid> {
        self.rank_of(id).map(|r| &self.ranked[r - 1])
    }

    pub fn without(&self, id: BidderId) -> Instance {
        let bids = self.bids.iter().copied().filter(|b| b.bidder_id != id).collect();
        Instance::new(bids).expect("subset of a valid instance is valid")
    }

    /// Replaces the bid of `bid.bidder_id`.
    pub fn with_bid(&self, bid: Bid) -> Result<Instance> {
        if self.rank_of(bid.bidder_id).is_none() {
            return Err(Error::UnknownBidder(bid.bidder_id));
        }
        let bids = self
            .bids
            .iter()
            .map(|b| if b.bidder_id == bid.bidder_id { bid } else { *b })
            .collect();
        Instance::new(bids)
    }
}

/// `k` copies sold to `winners`, listed in canonical order (cardinal) or in
/// position order (prefix).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub k: usize,
    pub winners: Vec<BidderId>,
}

impl Allocation {
    pub fn empty() -> Self {
        Allocation::default()
    }

    pub fn contains(&self, id: BidderId) -> bool {
        self.winners.contains(&id)
    }

    /// 1-based index of `id` among the winners.
    pub fn position_of(&self, id: BidderId) -> Option<usize> {
        self.winners.iter().position(|&w| w == id).map(|p| p + 1)
    }
}

/// Cardinal feasibility: exactly `k` winners, each with cap at least `k`.
pub fn is_feasible(alloc: &Allocation, instance: &Instance) -> Result<bool> {
    let mut ok = alloc.winners.len() == alloc.k;
    for &id in &alloc.winners {
        let bid = instance.bid_of(id).ok_or(Error::UnknownBidder(id))?;
        ok &= bid.cap >= alloc.k;
    }
    Ok(ok)
}

/// Which mechanism produced an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    #[serde(rename = "mpp")]
    MppCa,
    #[serde(rename = "vcg")]
    VcgCa,
    Pvcg,
    Pgsp,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] =
        [MechanismKind::MppCa, MechanismKind::VcgCa, MechanismKind::Pvcg, MechanismKind::Pgsp];

    pub fn is_prefix(self) -> bool {
        matches!(self, MechanismKind::Pvcg | MechanismKind::Pgsp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::MppCa => "mpp",
            MechanismKind::VcgCa => "vcg",
            MechanismKind::Pvcg => "pvcg",
            MechanismKind::Pgsp => "pgsp",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mpp" | "mpp_ca" => Ok(MechanismKind::MppCa),
            "vcg" | "vcg_ca" => Ok(MechanismKind::VcgCa),
            "pvcg" => Ok(MechanismKind::Pvcg),
            "pgsp" => Ok(MechanismKind::Pgsp),
            other => Err(Error::input(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// Result of running one mechanism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricedOutcome {
    pub mechanism: MechanismKind,
    pub allocation: Allocation,
    /// Prefix mechanisms only: `positions[j]` is the position of `winners[j]`.
    pub positions: Option<Vec<usize>>,
    pub prices: BTreeMap<BidderId, Money>,
    /// Sum of winner values when the mechanism saw valuations, otherwise sum
    /// of winner bids.
    pub efficiency: Money,
    pub revenue: Money,
}

impl PricedOutcome {
    pub fn price_of(&self, id: BidderId) -> Option<Money> {
        self.prices.get(&id).copied()
    }

    pub fn position_of(&self, id: BidderId) -> Option<usize> {
        let j = self.allocation.winners.iter().position(|&w| w == id)?;
        match &self.positions {
            Some(p) => Some(p[j]),
            None => Some(j + 1),
        }
    }

    /// Sum of true values of the winners.
    pub fn value_efficiency(&self, valuations: &[Valuation]) -> Money {
        valuations
            .iter()
            .filter(|v| self.allocation.contains(v.bidder_id))
            .map(|v| v.value)
            .sum()
    }
}

/// Quasi-linear utility with a hard cardinality constraint.
///
/// Variant order makes `NegInf` compare below every finite utility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Utility {
    NegInf,
    Finite(Money),
}

impl Utility {
    pub fn finite(self) -> Option<Money> {
        match self {
            Utility::Finite(m) => Some(m),
            Utility::NegInf => None,
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::NegInf => f.write_str("-inf"),
            Utility::Finite(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for Utility {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Utility of `valuation` under `outcome`.
///
/// Cardinal mechanisms: a winner gets `v - p` when the allocation size is at
/// most her true cap and `NegInf` otherwise. Prefix mechanisms: a winner gets
/// `v - p` when placed within her first `cap` positions and `NegInf` otherwise.
/// Losers get zero in both models.
pub fn utility(valuation: &Valuation, outcome: &PricedOutcome) -> Utility {
    let id = valuation.bidder_id;
    let Some(price) = outcome.price_of(id) else {
        return Utility::Finite(Money::ZERO);
    };
    let depth = if outcome.mechanism.is_prefix() {
        outcome.position_of(id).expect("priced bidder is a winner")
    } else {
        outcome.allocation.k
    };
    if depth <= valuation.cap {
        Utility::Finite(valuation.value - price)
    } else {
        Utility::NegInf
    }
}
