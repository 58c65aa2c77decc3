use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Allocation, Bid, BidderId, Instance, MechanismKind, PricedOutcome};
use crate::money::Money;

/// Bids over `items` ordered identical copies; a bid's cap is the deepest
/// acceptable position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixInstance {
    pub bids: Instance,
    pub items: usize,
}

impl PrefixInstance {
    pub fn new(bids: Instance, items: usize) -> Result<Self> {
        if items == 0 {
            return Err(Error::input("prefix auction needs at least one item"));
        }
        Ok(PrefixInstance { bids, items })
    }
}

/// Value-maximizing assignment of bidders to positions with position ≤ cap.
///
/// Bidders are taken in canonical order and each is placed in the deepest
/// free position it accepts, or skipped. Returns `(bidder, position)` pairs
/// in canonical order.
pub fn prefix_assignment(bids: &Instance, items: usize) -> Vec<(BidderId, usize)> {
    let mut free: BTreeSet<usize> = (1..=items).collect();
    let mut out = Vec::new();
    for bid in bids.ranked() {
        if let Some(&pos) = free.range(..=bid.cap.min(items)).next_back() {
            free.remove(&pos);
            out.push((bid.bidder_id, pos));
        }
    }
    out
}

fn assignment_value(bids: &Instance, assignment: &[(BidderId, usize)]) -> Money {
    assignment.iter().map(|(id, _)| bids.bid_of(*id).unwrap().amount).sum()
}

fn outcome(
    mechanism: MechanismKind,
    bids: &Instance,
    assignment: Vec<(BidderId, usize)>,
    prices: BTreeMap<BidderId, Money>,
) -> PricedOutcome {
    PricedOutcome {
        mechanism,
        efficiency: assignment_value(bids, &assignment),
        revenue: prices.values().sum(),
        allocation: Allocation {
            k: assignment.len(),
            winners: assignment.iter().map(|a| a.0).collect(),
        },
        positions: Some(assignment.iter().map(|a| a.1).collect()),
        prices,
    }
}

/// pVCG: efficient prefix assignment with VCG prices.
pub fn run_pvcg(p: &PrefixInstance) -> Result<PricedOutcome> {
    if p.bids.is_empty() {
        return Err(Error::NoAllocation { k: 1 });
    }
    let assignment = prefix_assignment(&p.bids, p.items);
    let best = assignment_value(&p.bids, &assignment);
    let prices = assignment
        .iter()
        .map(|&(id, _)| {
            let rest = p.bids.without(id);
            let without = assignment_value(&rest, &prefix_assignment(&rest, p.items));
            (id, without - best + p.bids.bid_of(id).unwrap().amount)
        })
        .collect();
    Ok(outcome(MechanismKind::Pvcg, &p.bids, assignment, prices))
}

/// pGSP: a second-price auction for each position in turn among unassigned
/// bidders whose cap reaches it; stops at the first position nobody accepts.
pub fn run_pgsp(p: &PrefixInstance) -> Result<PricedOutcome> {
    if p.bids.is_empty() {
        return Err(Error::NoAllocation { k: 1 });
    }
    let mut open: Vec<&Bid> = p.bids.ranked().iter().collect();
    let mut assignment = Vec::new();
    let mut prices = BTreeMap::new();
    for pos in 1..=p.items {
        // `open` stays in canonical order, so the first two eligible bids are
        // the winner and the price setter.
        let mut eligible = open.iter().enumerate().filter(|(_, b)| b.cap >= pos);
        let Some((idx, winner)) = eligible.next() else { break };
        let price = eligible.next().map_or(Money::ZERO, |(_, b)| b.amount);
        assignment.push((winner.bidder_id, pos));
        prices.insert(winner.bidder_id, price);
        open.remove(idx);
    }
    Ok(outcome(MechanismKind::Pgsp, &p.bids, assignment, prices))
}
