//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use cardauct_core::equilibrium::{
    enumerate_equilibria, is_nash, optimal_efficiency, poa, revenue_comparison, BidGrid, BidderMode,
    DeviationSpace, ExactRatio, LabConfig, improving_deviation,
};
use cardauct_core::instances::{generate, random_prefix_instance, random_valuations, CapDist, NamedInstance, RandomSpec, ValueDist};
use cardauct_core::mechanisms::{run_mpp, run_pvcg, run_vcg, second_best_sum, MppPricer, PrefixInstance};
use cardauct_core::oracle::{brute_best_allocation, brute_prefix_best, brute_second_best, brute_sigma, brute_vcg_prices, OracleBudget};
use cardauct_core::sigma::sigma_table_with;
use cardauct_core::{sigma_table, Bid, Instance, MechanismKind, Money, PricedOutcome, RangeStructure, TieK, Valuation};
use num_rational::Ratio;

type Check = Result<String, String>;

fn u(x: i64) -> Money {
    Money::units(x)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn prices(o: &PricedOutcome) -> Vec<(u64, Money)> {
    o.prices.iter().map(|(&k, &v)| (k, v)).collect()
}

fn criterion_1() -> Check {
    let tie = TieK::default();
    let e1 = run_vcg(&generate(NamedInstance::Example1).valuations, tie).map_err(|e| e.to_string())?;
    ensure(e1.allocation.winners == vec![2, 3], || format!("example 1 winners {:?}", e1.allocation.winners))?;
    ensure(prices(&e1) == vec![(2, u(20)), (3, u(10))], || format!("example 1 prices {:?}", e1.prices))?;
    ensure(e1.revenue == u(30), || format!("example 1 revenue {}", e1.revenue))?;

    let t = run_mpp(&generate(NamedInstance::Example2Truthful).bids, tie).map_err(|e| e.to_string())?;
    ensure(prices(&t) == vec![(2, u(70)), (3, u(20))], || format!("example 2 truthful prices {:?}", t.prices))?;
    let d = run_mpp(&generate(NamedInstance::Example2Deviated).bids, tie).map_err(|e| e.to_string())?;
    ensure(prices(&d) == vec![(2, u(30)), (3, u(60))], || format!("example 2 deviated prices {:?}", d.prices))?;
    let p = run_mpp(&generate(NamedInstance::PoaTight).bids, tie).map_err(|e| e.to_string())?;
    ensure(prices(&p) == vec![(2, u(50)), (3, u(0))], || format!("tightness prices {:?}", p.prices))?;
    let r = run_vcg(&generate(NamedInstance::RevenueHalf).valuations, tie).map_err(|e| e.to_string())?;
    ensure(prices(&r) == vec![(1, u(100))], || format!("revenue example prices {:?}", r.prices))?;
    Ok("examples 1, 2 (truthful and deviated), tightness and revenue example exact".into())
}

fn criterion_2() -> Check {
    let s = generate(NamedInstance::Seesaw);
    let t = sigma_table(&s.bids, TieK::default()).map_err(|e| e.to_string())?;
    let want = [(1, 1000), (2, 800), (3, 1200), (4, 1190)];
    for (k, v) in want {
        ensure(t.sigma(k) == Some(u(v)), || format!("sigma_{k} = {:?}, want {v}", t.sigma(k)))?;
    }
    let seq: Vec<Money> = t.defined().map(|(_, v)| v).collect();
    // unimodal: non-decreasing then non-increasing
    let peak = seq.iter().enumerate().max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i))).map(|(i, _)| i).unwrap();
    let unimodal = seq[..=peak].windows(2).all(|w| w[0] <= w[1]) && seq[peak..].windows(2).all(|w| w[0] >= w[1]);
    ensure(!unimodal, || format!("sigma sequence {seq:?} is unimodal"))?;
    let shown: Vec<String> = seq.iter().map(|m| m.to_string()).collect();
    Ok(format!("sigma = [{}], not unimodal", shown.join(", ")))
}

/// 1,000 seeded valuations, n in 1..=12, mixing distributions and small value
/// ranges so that ties are common.
fn corpus() -> Vec<Vec<Valuation>> {
    (0..1000u64)
        .map(|seed| {
            let spec = RandomSpec {
                value_dist: if seed % 3 == 0 { ValueDist::Exponential } else { ValueDist::Uniform },
                cap_dist: if seed % 2 == 0 { CapDist::Geometric } else { CapDist::Uniform1N },
                ..RandomSpec::new(1 + (seed as usize % 12), seed).step(u(1)).levels(if seed % 5 == 0 { 4 } else { 40 })
            };
            random_valuations(&spec).unwrap()
        })
        .collect()
}

fn criterion_3() -> Check {
    let budget = OracleBudget::default();
    let tie = TieK::default();
    let mut prefix_checked = 0;
    for (seed, vals) in corpus().iter().enumerate() {
        let inst = Instance::from_valuations(vals).unwrap();
        let ctx = |what: &str| format!("seed {seed}: {what}");
        let table = sigma_table(&inst, tie).map_err(|e| e.to_string())?;
        for k in 1..=inst.len() {
            let brute = brute_sigma(&inst, k, budget).map_err(|e| e.to_string())?;
            ensure(table.sigma(k) == brute, || ctx(&format!("sigma_{k} {:?} vs {:?}", table.sigma(k), brute)))?;
        }
        let (alloc, best) = brute_best_allocation(&inst, tie, budget).map_err(|e| e.to_string())?;
        let mpp = run_mpp(&inst, tie).map_err(|e| e.to_string())?;
        ensure(best == table.best(), || ctx("optimal value"))?;
        ensure(alloc == mpp.allocation, || ctx(&format!("allocation {alloc:?} vs {:?}", mpp.allocation)))?;
        let second = brute_second_best(&inst, tie, budget).map_err(|e| e.to_string())?;
        ensure(second == second_best_sum(&inst, &table), || ctx("second best"))?;
        let vcg = run_vcg(vals, tie).map_err(|e| e.to_string())?;
        let brute_vcg = brute_vcg_prices(vals, tie, budget).map_err(|e| e.to_string())?;
        ensure(vcg.prices == brute_vcg, || ctx(&format!("vcg {:?} vs {:?}", vcg.prices, brute_vcg)))?;
        if inst.len() <= 10 {
            let spec = RandomSpec::new(inst.len(), seed as u64).step(u(1)).levels(30);
            let p = random_prefix_instance(&spec).map_err(|e| e.to_string())?;
            let fast = run_pvcg(&p).map_err(|e| e.to_string())?.efficiency;
            let brute = brute_prefix_best(&p, budget).map_err(|e| e.to_string())?;
            ensure(fast == brute, || ctx(&format!("pvcg efficiency {fast} vs {brute}")))?;
            prefix_checked += 1;
        }
    }
    Ok(format!("1000 instances exact (sigma, A*, second best, VCG prices); {prefix_checked} prefix instances"))
}

fn same_assignment(a: &PricedOutcome, b: &PricedOutcome) -> bool {
    a.allocation == b.allocation
}

fn criterion_4() -> Check {
    let tie = TieK::default();
    let mut winners = 0;
    let mut literal_only = 0;
    for (seed, vals) in corpus().iter().enumerate() {
        let inst = Instance::from_valuations(vals).unwrap();
        let base = run_mpp(&inst, tie).map_err(|e| e.to_string())?;
        for (&id, &p) in &base.prices {
            winners += 1;
            let b = *inst.bid_of(id).unwrap();
            ensure(p >= Money::ZERO && p <= b.amount, || format!("seed {seed}: bidder {id} price {p} outside [0, {}]", b.amount))?;
            let at = run_mpp(&inst.with_bid(Bid::new(id, p, b.cap)).unwrap(), tie).unwrap();
            ensure(same_assignment(&at, &base), || format!("seed {seed}: bidder {id} bidding price {p} changes the assignment"))?;
            if p > Money::ZERO {
                let below = run_mpp(&inst.with_bid(Bid::new(id, p - Money::EPSILON, b.cap)).unwrap(), tie).unwrap();
                ensure(!same_assignment(&below, &base), || format!("seed {seed}: bidder {id} keeps the assignment at {}", p - Money::EPSILON))?;
                if below.allocation.k == base.allocation.k
                    && below.allocation.winners.iter().collect::<std::collections::BTreeSet<_>>()
                        == base.allocation.winners.iter().collect()
                {
                    literal_only += 1;
                }
            }
        }
    }
    Ok(format!(
        "{winners} winners: price keeps (k*, ordered winners), price - 1 micro-unit loses it; \
         {literal_only} of them keep the unordered winner set one micro-unit lower (position changed)"
    ))
}

fn criterion_5() -> Check {
    let mut vcg_checked = 0;
    let mut mpp_winners = 0;
    for seed in 0..200u64 {
        let spec = RandomSpec::new(1 + (seed as usize % 4), 10_000 + seed).step(u(5)).levels(20);
        let vals = random_valuations(&spec).unwrap();
        let grid = BidGrid::new(u(5), Ratio::from_integer(2)).unwrap();
        let truthful: Vec<Bid> = vals.iter().map(Valuation::truthful_bid).collect();
        let vcg = LabConfig::new(MechanismKind::VcgCa, grid, BidderMode::Rational);
        let r = is_nash(&vals, &truthful, &vcg).map_err(|e| e.to_string())?;
        ensure(r.is_nash, || format!("seed {seed}: VCG deviation {:?}", r.deviation))?;
        vcg_checked += 1;
        let mpp = LabConfig::new(MechanismKind::MppCa, grid, BidderMode::Rational);
        let outcome = run_mpp(&Instance::new(truthful.clone()).unwrap(), TieK::default()).unwrap();
        for (idx, v) in vals.iter().enumerate() {
            if !outcome.allocation.contains(v.bidder_id) {
                continue;
            }
            mpp_winners += 1;
            let dev = improving_deviation(&vals, &truthful, idx, &mpp, DeviationSpace::CapOnly).map_err(|e| e.to_string())?;
            ensure(dev.is_none(), || format!("seed {seed}: MPP cap deviation {dev:?}"))?;
        }
    }
    Ok(format!("{vcg_checked} truthful VCG profiles are grid NE; {mpp_winners} MPP winners gain nothing from l alone"))
}

fn lab(kind: MechanismKind, mode: BidderMode) -> LabConfig {
    LabConfig::new(kind, BidGrid::new(u(25), Ratio::from_integer(2)).unwrap(), mode)
}

fn small_corpus(salt: u64) -> Vec<Vec<Valuation>> {
    (0..300u64)
        .map(|seed| {
            let spec = RandomSpec::new(1 + (seed as usize % 3), salt + seed).step(u(25)).levels(6);
            random_valuations(&spec).unwrap()
        })
        .collect()
}

/// One theorem check: how many equilibria were examined, and the violations.
#[derive(Default)]
struct Tally {
    checked: usize,
    violations: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(msg());
        }
    }

    fn summary(&self, name: &str) -> String {
        match self.violations.first() {
            None => format!("{name}: {} ok", self.checked),
            Some(first) => format!("{name}: {}/{} violate, e.g. {first}", self.violations.len(), self.checked),
        }
    }
}

fn show(profile: &[Bid]) -> String {
    let parts: Vec<String> = profile.iter().map(|b| format!("({},{})", b.amount, b.cap)).collect();
    parts.join(" ")
}

fn show_vals(vals: &[Valuation]) -> String {
    let parts: Vec<String> = vals.iter().map(|v| format!("({},{})", v.value, v.cap)).collect();
    parts.join(" ")
}

/// Per-position envy-freeness of a prefix outcome: every bidder, winner or
/// loser, weakly prefers her own price to the price of any sold position
/// within min(k, k_i). Diagnostic only.
fn envy_free(vals: &[Valuation], outcome: &PricedOutcome) -> bool {
    let positions = outcome.positions.as_ref().unwrap();
    let k = outcome.allocation.k;
    let price_at = |pos: usize| {
        let j = positions.iter().position(|&p| p == pos)?;
        outcome.price_of(outcome.allocation.winners[j])
    };
    vals.iter().all(|v| {
        let own = outcome.price_of(v.bidder_id).map_or(Money::ZERO, |p| v.value - p);
        (1..=k.min(v.cap)).filter_map(price_at).all(|p| own >= v.value - p)
    })
}

fn criterion_6() -> Check {
    let step = u(25);
    let mut cons_eff = Tally::default();
    let mut cons_rev = Tally::default();
    let mut rat_eff = Tally::default();
    let mut gsp_eff = Tally::default();
    let mut gsp_rev = Tally::default();
    let mut gsp_bad_envy_free = 0;

    for vals in small_corpus(20_000) {
        let cons = lab(MechanismKind::MppCa, BidderMode::Conservative);
        let best = optimal_efficiency(&vals, &cons).map_err(|e| e.to_string())?;
        for r in enumerate_equilibria(&vals, &cons).map_err(|e| e.to_string())? {
            cons_eff.check(r.efficiency == best, || {
                format!("values {} profile {} efficiency {} < {best}", show_vals(&vals), show(&r.profile), r.efficiency)
            });
        }
        let rep = revenue_comparison(&vals, &cons).map_err(|e| e.to_string())?;
        if let ExactRatio(Some(q)) = rep.ratio {
            cons_rev.check(q >= Ratio::from_integer(1), || {
                format!("values {} profile {} revenue ratio {}", show_vals(&vals), show(&rep.witness.profile), rep.ratio)
            });
        }
        let rat = lab(MechanismKind::MppCa, BidderMode::Rational);
        let floor = Money::from_micros(best.micros() / 2) - step;
        for r in enumerate_equilibria(&vals, &rat).map_err(|e| e.to_string())? {
            rat_eff.check(r.efficiency >= floor, || {
                format!("values {} profile {} efficiency {} < {floor}", show_vals(&vals), show(&r.profile), r.efficiency)
            });
        }
    }

    for (i, vals) in small_corpus(30_000).into_iter().enumerate() {
        let mut cfg = lab(MechanismKind::Pgsp, BidderMode::Conservative);
        let items = 1 + (i % vals.len());
        cfg.mech.items = Some(items);
        let pv = run_pvcg(&PrefixInstance::new(Instance::from_valuations(&vals).unwrap(), items).unwrap())
            .map_err(|e| e.to_string())?;
        for r in enumerate_equilibria(&vals, &cfg).map_err(|e| e.to_string())? {
            if (r.efficiency != pv.efficiency || r.revenue < pv.revenue) && envy_free(&vals, &r.outcome) {
                gsp_bad_envy_free += 1;
            }
            gsp_eff.check(r.efficiency == pv.efficiency, || {
                format!("values {} items {items} profile {} efficiency {} < {}", show_vals(&vals), show(&r.profile), r.efficiency, pv.efficiency)
            });
            gsp_rev.check(r.revenue >= pv.revenue, || {
                format!("values {} items {items} profile {} revenue {} < {}", show_vals(&vals), show(&r.profile), r.revenue, pv.revenue)
            });
        }
    }

    let mut failures = Vec::new();
    let tight = poa(&generate(NamedInstance::PoaTight).valuations, &lab(MechanismKind::MppCa, BidderMode::Rational))
        .map_err(|e| e.to_string())?;
    let want = ExactRatio::of(u(100), u(50) + Money::EPSILON);
    if tight.ratio != want {
        failures.push(format!("tightness PoA {} want {want}", tight.ratio));
    }
    let half = revenue_comparison(&generate(NamedInstance::RevenueHalf).valuations, &lab(MechanismKind::MppCa, BidderMode::Rational))
        .map_err(|e| e.to_string())?;
    if half.ratio != ExactRatio(Some(Ratio::new(1, 2))) {
        failures.push(format!("revenue example ratio {}", half.ratio));
    }

    let tallies = [
        ("conservative MPP efficiency = E*", &cons_eff),
        ("conservative Rev(MPP) >= Rev(VCG)", &cons_rev),
        ("rational MPP efficiency >= E*/2 - step", &rat_eff),
        ("pGSP efficiency = pVCG", &gsp_eff),
        ("pGSP revenue >= pVCG", &gsp_rev),
    ];
    let mut parts: Vec<String> = tallies.iter().map(|(name, t)| t.summary(name)).collect();
    if !gsp_eff.violations.is_empty() || !gsp_rev.violations.is_empty() {
        parts.push(format!("pGSP violators that are also per-position envy-free: {gsp_bad_envy_free}"));
    }
    parts.push(format!("tightness PoA {}", tight.ratio));
    parts.push(format!("revenue example ratio {}", half.ratio));
    let detail = parts.join("; ");
    if failures.is_empty() && tallies.iter().all(|(_, t)| t.violations.is_empty()) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn criterion_7() -> Check {
    const REPS: usize = 9;
    let sizes = [100_000usize, 200_000, 400_000];
    let instances: Vec<Instance> = sizes
        .iter()
        .map(|&n| {
            let spec = RandomSpec::new(n, 7).step(Money::from_micros(1)).levels(1_000_000);
            Instance::from_valuations(&random_valuations(&spec).unwrap()).unwrap()
        })
        .collect();
    // Sizes are interleaved within each repetition so that background noise
    // hits all of them alike.
    let mut t_table = vec![Vec::new(); sizes.len()];
    let mut t_price = vec![Vec::new(); sizes.len()];
    for _ in 0..REPS {
        for (j, inst) in instances.iter().enumerate() {
            let start = Instant::now();
            let rs = RangeStructure::build(inst).unwrap();
            let table = sigma_table_with(&rs, TieK::default());
            t_table[j].push(start.elapsed());
            let start = Instant::now();
            let pricer = MppPricer::new(inst, &rs, &table);
            let prices = pricer.prices(&pricer.allocation());
            t_price[j].push(start.elapsed());
            std::hint::black_box(prices);
        }
    }
    let mut lines = Vec::new();
    let mut table_medians = Vec::new();
    for (j, &n) in sizes.iter().enumerate() {
        let (tt, tp) = (median(t_table[j].clone()), median(t_price[j].clone()));
        ensure(tp <= tt * 10, || format!("n={n}: pricing {tp:?} exceeds 10x sigma_table {tt:?}"))?;
        lines.push(format!("n={n} sigma {tt:.2?} pricing {tp:.2?}"));
        table_medians.push(tt);
    }
    let ratios: Vec<f64> = table_medians.windows(2).map(|w| w[1].as_secs_f64() / w[0].as_secs_f64()).collect();
    for r in &ratios {
        ensure(*r <= 2.6, || format!("scaling ratio {r:.2} > 2.6 ({})", lines.join("; ")))?;
    }
    Ok(format!("{}; ratios {:.2?}", lines.join("; "), ratios))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("1 worked examples", criterion_1),
        ("2 see-saw table", criterion_2),
        ("3 oracle equivalence", criterion_3),
        ("4 minimum-pay property", criterion_4),
        ("5 truthfulness", criterion_5),
        ("6 equilibrium theorems", criterion_6),
        ("7 scaling", criterion_7),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({took:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({took:.2?}): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
