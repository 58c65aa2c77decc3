//! Cross-checks of the fast engine against brute-force oracles on one bid file.

use cardauct_core::mechanisms::{run_mpp, run_pvcg, run_vcg, second_best_sum, PrefixInstance};
use cardauct_core::oracle::{self, OracleBudget};
use cardauct_core::{sigma_table, sigma_table_naive, Bid, Instance, Money, Result, TieK, Valuation};
use serde::Serialize;

/// Above this the quadratic reference table is skipped.
const NAIVE_MAX_N: usize = 5_000;
/// Above this the bid-perturbation check (two mechanism runs per winner) is skipped.
const MIN_PAY_MAX_N: usize = 2_000;

#[derive(Serialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Serialize, Debug)]
pub struct CheckRow {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Serialize, Debug)]
pub struct VerifyReport {
    pub n: usize,
    pub oracle_max_n: usize,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
}

struct Checks(Vec<CheckRow>);

impl Checks {
    fn record(&mut self, name: &'static str, outcome: std::result::Result<String, String>) {
        let (status, detail) = match outcome {
            Ok(d) => (Status::Pass, d),
            Err(d) => (Status::Fail, d),
        };
        self.0.push(CheckRow { name, status, detail });
    }

    fn skip(&mut self, name: &'static str, why: String) {
        self.0.push(CheckRow { name, status: Status::Skipped, detail: why });
    }
}

pub fn verify(bids: &Instance, tie: TieK, items: Option<usize>, budget: OracleBudget) -> Result<VerifyReport> {
    let n = bids.len();
    let mut checks = Checks(Vec::new());
    let table = sigma_table(bids, tie)?;

    if n <= NAIVE_MAX_N {
        let naive = sigma_table_naive(bids, n, tie)?;
        checks.record(
            "sigma_vs_naive",
            if naive == table {
                Ok(format!("{} defined entries, k* = {}", table.defined().count(), table.k_star()))
            } else {
                Err("range-structure table differs from the quadratic reference".into())
            },
        );
    } else {
        checks.skip("sigma_vs_naive", format!("n = {n} > {NAIVE_MAX_N}"));
    }

    let brute_ok = n <= budget.max_n;
    let too_big = || format!("n = {n} exceeds the oracle budget {}", budget.max_n);
    if brute_ok {
        let mut bad = None;
        for k in 1..=n {
            let b = oracle::brute_sigma(bids, k, budget)?;
            if b != table.sigma(k) {
                bad = Some(format!("sigma_{k}: fast {:?}, brute {:?}", table.sigma(k), b));
                break;
            }
        }
        checks.record("sigma_vs_brute", bad.map_or_else(|| Ok(format!("k = 1..{n}")), Err));

        let (alloc, best) = oracle::brute_best_allocation(bids, tie, budget)?;
        let mpp = run_mpp(bids, tie)?;
        checks.record(
            "optimal_allocation",
            if alloc == mpp.allocation && best == table.best() {
                Ok(format!("k = {}, value {best}", alloc.k))
            } else {
                Err(format!("fast {:?} ({}), brute {alloc:?} ({best})", mpp.allocation, table.best()))
            },
        );

        let second = oracle::brute_second_best(bids, tie, budget)?;
        let fast = second_best_sum(bids, &table);
        checks.record(
            "second_best",
            if second == fast { Ok(second.to_string()) } else { Err(format!("fast {fast}, brute {second}")) },
        );

        let vals: Vec<Valuation> = bids.bids().iter().map(|b| Valuation::new(b.bidder_id, b.amount, b.cap)).collect();
        let fast = run_vcg(&vals, tie)?.prices;
        let brute = oracle::brute_vcg_prices(&vals, tie, budget)?;
        checks.record(
            "vcg_prices",
            if fast == brute { Ok(format!("{} winners", fast.len())) } else { Err(format!("fast {fast:?}, brute {brute:?}")) },
        );

        let p = PrefixInstance::new(bids.clone(), items.unwrap_or(n).max(1))?;
        let fast = run_pvcg(&p)?.efficiency;
        let brute = oracle::brute_prefix_best(&p, budget)?;
        checks.record(
            "pvcg_efficiency",
            if fast == brute { Ok(fast.to_string()) } else { Err(format!("fast {fast}, brute {brute}")) },
        );
    } else {
        for name in ["sigma_vs_brute", "optimal_allocation", "second_best", "vcg_prices", "pvcg_efficiency"] {
            checks.skip(name, too_big());
        }
    }

    if n <= MIN_PAY_MAX_N {
        checks.record("mpp_minimum_pay", minimum_pay(bids, tie)?);
    } else {
        checks.skip("mpp_minimum_pay", format!("n = {n} > {MIN_PAY_MAX_N}"));
    }

    let passed = checks.0.iter().all(|c| c.status != Status::Fail);
    Ok(VerifyReport { n, oracle_max_n: budget.max_n, checks: checks.0, passed })
}

/// Each MPP winner keeps her copy and position when bidding exactly her
/// price, and loses them one micro-unit below it.
fn minimum_pay(bids: &Instance, tie: TieK) -> Result<std::result::Result<String, String>> {
    let base = run_mpp(bids, tie)?;
    for (&id, &p) in &base.prices {
        let b = *bids.bid_of(id).expect("winner submitted a bid");
        if p < Money::ZERO || p > b.amount {
            return Ok(Err(format!("bidder {id}: price {p} outside [0, {}]", b.amount)));
        }
        let at = run_mpp(&bids.with_bid(Bid::new(id, p, b.cap))?, tie)?;
        if at.allocation != base.allocation {
            return Ok(Err(format!("bidder {id}: bidding the price {p} changes the allocation")));
        }
        if p > Money::ZERO {
            let below = run_mpp(&bids.with_bid(Bid::new(id, p - Money::EPSILON, b.cap))?, tie)?;
            if below.allocation == base.allocation {
                return Ok(Err(format!("bidder {id}: still allocated at {}", p - Money::EPSILON)));
            }
        }
    }
    Ok(Ok(format!("{} winners", base.prices.len())))
}
