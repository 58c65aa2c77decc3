//! Pure Nash equilibria of the auction games on a discrete bid grid.
//!
//! Every verdict here is relative to the grid: a profile is an equilibrium
//! when no bidder has a strictly improving unilateral deviation to a grid bid
//! and any cap in `1..=n` (or `1..=items` for prefix mechanisms).

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mechanisms::{self, MechanismConfig, PrefixInstance};
use crate::model::{utility, Bid, BidderId, Instance, MechanismKind, PricedOutcome, Utility, Valuation};
use crate::money::Money;
use crate::sigma::sigma_table;

/// How valuations that fall between grid points are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValuePolicy {
    /// A bidder's truthful grid bid is her value rounded down to the grid.
    #[default]
    Snap,
    /// Every value must be a grid point.
    Require,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BidGrid {
    pub step: Money,
    /// The grid spans `[0, max_multiplier * max value]`.
    pub max_multiplier: Ratio<i64>,
    pub policy: ValuePolicy,
}

impl BidGrid {
    pub fn new(step: Money, max_multiplier: Ratio<i64>) -> Result<Self> {
        if step <= Money::ZERO {
            return Err(Error::Config("grid step must be positive".into()));
        }
        if max_multiplier < Ratio::from_integer(1) {
            return Err(Error::Config("grid multiplier must be at least 1".into()));
        }
        Ok(BidGrid { step, max_multiplier, policy: ValuePolicy::Snap })
    }

    pub fn require_values(mut self) -> Self {
        self.policy = ValuePolicy::Require;
        self
    }

    /// Grid point a truthful bidder with value `v` submits.
    pub fn truthful(&self, v: Money) -> Result<Money> {
        let step = self.step.micros();
        let snapped = Money::from_micros(v.micros().div_euclid(step) * step);
        if snapped != v && self.policy == ValuePolicy::Require {
            return Err(Error::Config(format!("value {v} is not on the grid with step {}", self.step)));
        }
        Ok(snapped)
    }

    /// All grid points in increasing order.
    pub fn points(&self, valuations: &[Valuation]) -> Result<Vec<Money>> {
        for v in valuations {
            self.truthful(v.value)?;
        }
        let max_v = valuations.iter().map(|v| v.value).max().unwrap_or(Money::ZERO);
        let top = max_v.micros() as i128 * *self.max_multiplier.numer() as i128
            / *self.max_multiplier.denom() as i128;
        let count = top / self.step.micros() as i128;
        if count > 1_000_000 {
            return Err(Error::Budget { what: "grid points", actual: count as usize, limit: 1_000_000 });
        }
        Ok((0..=count as i64).map(|j| Money::from_micros(j * self.step.micros())).collect())
    }
}

impl fmt::Display for BidGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} up to {} x max value", self.step, self.max_multiplier)
    }
}

impl Serialize for BidGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("BidGrid", 3)?;
        st.serialize_field("step", &self.step)?;
        st.serialize_field("max_multiplier", &self.max_multiplier.to_string())?;
        st.serialize_field(
            "values",
            match self.policy {
                ValuePolicy::Snap => "snap",
                ValuePolicy::Require => "require",
            },
        )?;
        st.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BidderMode {
    /// Never bids above value.
    Conservative,
    /// May overbid, but an equilibrium needs every winner's price within her value.
    Rational,
}

impl std::str::FromStr for BidderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conservative" => Ok(BidderMode::Conservative),
            "rational" => Ok(BidderMode::Rational),
            _ => Err(Error::input(format!("unknown bidder mode {s:?}"))),
        }
    }
}

/// Limits for exhaustive profile scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumBudget {
    pub max_n: usize,
    pub max_grid: usize,
    pub max_profiles: u64,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget { max_n: 4, max_grid: 50, max_profiles: 5_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabConfig {
    pub mechanism: MechanismKind,
    pub grid: BidGrid,
    pub mode: BidderMode,
    pub mech: MechanismConfig,
    /// Scan reported caps as well as bids. Off: every bidder reports her true cap.
    pub enumerate_caps: bool,
    pub budget: EnumBudget,
    /// Worker threads for enumeration; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl LabConfig {
    pub fn new(mechanism: MechanismKind, grid: BidGrid, mode: BidderMode) -> Self {
        LabConfig {
            mechanism,
            grid,
            mode,
            mech: MechanismConfig::default(),
            enumerate_caps: false,
            budget: EnumBudget::default(),
            threads: None,
        }
    }

    fn cap_limit(&self, n: usize) -> usize {
        if self.mechanism.is_prefix() {
            self.mech.items.unwrap_or(n).max(1)
        } else {
            n
        }
    }
}

/// Why a profile is not an equilibrium.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Refutation {
    ProfitableDeviation { bidder_id: BidderId, bid: Bid, from: Utility, to: Utility },
    /// Rational mode only.
    PriceAboveValue { bidder_id: BidderId, price: Money, value: Money },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquilibriumReport {
    pub profile: Vec<Bid>,
    pub is_nash: bool,
    pub deviation: Option<Refutation>,
    pub outcome: PricedOutcome,
    /// Sum of the winners' true values.
    pub efficiency: Money,
    pub revenue: Money,
}

/// Which deviations [`improving_deviation`] tries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviationSpace {
    /// Every grid bid with every cap.
    Full,
    /// Keep the bid amount, change only the cap.
    CapOnly,
}

fn check_profile(valuations: &[Valuation], profile: &[Bid]) -> Result<()> {
    if valuations.len() != profile.len() {
        return Err(Error::input(format!(
            "profile has {} bids for {} valuations",
            profile.len(),
            valuations.len()
        )));
    }
    for (v, b) in valuations.iter().zip(profile) {
        if v.bidder_id != b.bidder_id {
            return Err(Error::input(format!("profile order differs from valuations at bidder {}", v.bidder_id)));
        }
    }
    Ok(())
}

fn evaluate(profile: &[Bid], cfg: &LabConfig) -> Result<PricedOutcome> {
    let inst = Instance::new(profile.to_vec())?;
    mechanisms::run(cfg.mechanism, &inst, &cfg.mech)
}

fn deviation_bids(points: &[Money], v: &Valuation, cfg: &LabConfig, cap_limit: usize) -> Vec<(Money, usize)> {
    let mut out = Vec::new();
    for &b in points {
        if cfg.mode == BidderMode::Conservative && b > v.value {
            break;
        }
        for l in 1..=cap_limit {
            out.push((b, l));
        }
    }
    out
}

/// First strictly improving deviation for bidder `idx`, if any.
pub fn improving_deviation(
    valuations: &[Valuation],
    profile: &[Bid],
    idx: usize,
    cfg: &LabConfig,
    space: DeviationSpace,
) -> Result<Option<Refutation>> {
    check_profile(valuations, profile)?;
    let points = cfg.grid.points(valuations)?;
    let current = utility(&valuations[idx], &evaluate(profile, cfg)?);
    improving_from(valuations, profile, idx, cfg, space, &points, current)
}

fn improving_from(
    valuations: &[Valuation],
    profile: &[Bid],
    idx: usize,
    cfg: &LabConfig,
    space: DeviationSpace,
    points: &[Money],
    current: Utility,
) -> Result<Option<Refutation>> {
    let v = &valuations[idx];
    let cap_limit = cfg.cap_limit(profile.len());
    let candidates = match space {
        DeviationSpace::Full => deviation_bids(points, v, cfg, cap_limit),
        DeviationSpace::CapOnly => (1..=cap_limit).map(|l| (profile[idx].amount, l)).collect(),
    };
    let mut trial = profile.to_vec();
    for (b, l) in candidates {
        trial[idx] = Bid::new(v.bidder_id, b, l);
        if trial[idx] == profile[idx] {
            continue;
        }
        let u = utility(v, &evaluate(&trial, cfg)?);
        if u > current {
            return Ok(Some(Refutation::ProfitableDeviation { bidder_id: v.bidder_id, bid: trial[idx], from: current, to: u }));
        }
    }
    Ok(None)
}

fn report(
    valuations: &[Valuation],
    profile: &[Bid],
    cfg: &LabConfig,
    points: &[Money],
    outcome: PricedOutcome,
) -> Result<EquilibriumReport> {
    let mut deviation = None;
    if cfg.mode == BidderMode::Rational {
        deviation = valuations.iter().find_map(|v| {
            let price = outcome.price_of(v.bidder_id)?;
            (price > v.value).then_some(Refutation::PriceAboveValue { bidder_id: v.bidder_id, price, value: v.value })
        });
    }
    if deviation.is_none() {
        for idx in 0..valuations.len() {
            let current = utility(&valuations[idx], &outcome);
            deviation = improving_from(valuations, profile, idx, cfg, DeviationSpace::Full, points, current)?;
            if deviation.is_some() {
                break;
            }
        }
    }
    Ok(EquilibriumReport {
        profile: profile.to_vec(),
        is_nash: deviation.is_none(),
        deviation,
        efficiency: outcome.value_efficiency(valuations),
        revenue: outcome.revenue,
        outcome,
    })
}

/// Checks `profile` (ordered like `valuations`) against every unilateral grid
/// deviation. The profile itself need not lie on the grid.
pub fn is_nash(valuations: &[Valuation], profile: &[Bid], cfg: &LabConfig) -> Result<EquilibriumReport> {
    check_profile(valuations, profile)?;
    if cfg.mode == BidderMode::Conservative {
        if let Some((v, _)) = valuations.iter().zip(profile).find(|(v, b)| b.amount > v.value) {
            return Err(Error::input(format!("bidder {} bids above value in conservative mode", v.bidder_id)));
        }
    }
    let points = cfg.grid.points(valuations)?;
    let outcome = evaluate(profile, cfg)?;
    report(valuations, profile, cfg, &points, outcome)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// All grid equilibria in which every losing bidder submits her truthful grid
/// bid and true cap. Reports are in profile enumeration order (first bidder
/// slowest, then bid, then cap).
pub fn enumerate_equilibria(valuations: &[Valuation], cfg: &LabConfig) -> Result<Vec<EquilibriumReport>> {
    let n = valuations.len();
    if n == 0 {
        return Err(Error::input("no valuations"));
    }
    if n > cfg.budget.max_n {
        return Err(Error::Budget { what: "bidders", actual: n, limit: cfg.budget.max_n });
    }
    let points = cfg.grid.points(valuations)?;
    if points.len() > cfg.budget.max_grid {
        return Err(Error::Budget { what: "grid points per bidder", actual: points.len(), limit: cfg.budget.max_grid });
    }
    let cap_limit = cfg.cap_limit(n);
    let truthful: Vec<Bid> = valuations
        .iter()
        .map(|v| Ok(Bid::new(v.bidder_id, cfg.grid.truthful(v.value)?, v.cap)))
        .collect::<Result<_>>()?;
    let strategies: Vec<Vec<Bid>> = valuations
        .iter()
        .map(|v| {
            let caps: Vec<usize> = if cfg.enumerate_caps { (1..=cap_limit).collect() } else { vec![v.cap] };
            points
                .iter()
                .take_while(|&&b| cfg.mode == BidderMode::Rational || b <= v.value)
                .flat_map(|&b| caps.iter().map(move |&l| Bid::new(v.bidder_id, b, l)))
                .collect()
        })
        .collect();
    let total = strategies.iter().try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64));
    let total = match total {
        Some(t) if t <= cfg.budget.max_profiles => t,
        _ => {
            return Err(Error::Budget {
                what: "profiles",
                actual: total.map_or(usize::MAX, |t| t as usize),
                limit: cfg.budget.max_profiles as usize,
            })
        }
    };

    let scan = |index: u64| -> Result<Option<EquilibriumReport>> {
        let mut rest = index;
        let mut profile = vec![truthful[0]; n];
        for i in (0..n).rev() {
            let len = strategies[i].len() as u64;
            profile[i] = strategies[i][(rest % len) as usize];
            rest /= len;
        }
        let outcome = evaluate(&profile, cfg)?;
        let losers_truthful = profile
            .iter()
            .zip(&truthful)
            .all(|(b, t)| outcome.allocation.contains(b.bidder_id) || b == t);
        if !losers_truthful {
            return Ok(None);
        }
        let r = report(valuations, &profile, cfg, &points, outcome)?;
        Ok(r.is_nash.then_some(r))
    };
    let found: Vec<Option<EquilibriumReport>> =
        with_threads(cfg.threads, || (0..total).into_par_iter().map(scan).collect::<Result<_>>())??;
    Ok(found.into_iter().flatten().collect())
}

/// Optimal welfare on truthful values.
pub fn optimal_efficiency(valuations: &[Valuation], cfg: &LabConfig) -> Result<Money> {
    let inst = Instance::from_valuations(valuations)?;
    if cfg.mechanism.is_prefix() {
        let p = PrefixInstance::new(inst, cfg.cap_limit(valuations.len()))?;
        Ok(mechanisms::run_pvcg(&p)?.efficiency)
    } else {
        Ok(sigma_table(&inst, cfg.mech.tie)?.best())
    }
}

/// An exact ratio; `None` when the denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactRatio(pub Option<Ratio<i128>>);

impl ExactRatio {
    pub fn of(num: Money, den: Money) -> Self {
        if den == Money::ZERO {
            ExactRatio(None)
        } else {
            ExactRatio(Some(Ratio::new(num.micros() as i128, den.micros() as i128)))
        }
    }
}

impl fmt::Display for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for ExactRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub ratio: ExactRatio,
    /// Numerator and denominator of `ratio`.
    pub numerator: Money,
    pub denominator: Money,
    pub grid: BidGrid,
    pub equilibria: usize,
    pub witness: EquilibriumReport,
}

/// Optimal efficiency over the worst equilibrium efficiency.
pub fn poa(valuations: &[Valuation], cfg: &LabConfig) -> Result<RatioReport> {
    let best = optimal_efficiency(valuations, cfg)?;
    let eqs = enumerate_equilibria(valuations, cfg)?;
    let count = eqs.len();
    let worst = eqs
        .into_iter()
        .min_by_key(|r| r.efficiency)
        .ok_or_else(|| Error::EmptyResult("no equilibrium on this grid".into()))?;
    Ok(RatioReport {
        ratio: ExactRatio::of(best, worst.efficiency),
        numerator: best,
        denominator: worst.efficiency,
        grid: cfg.grid,
        equilibria: count,
        witness: worst,
    })
}

/// Worst equilibrium revenue of `cfg.mechanism` over truthful revenue of the
/// matching VCG mechanism (VCG_CA for cardinal, pVCG for prefix).
pub fn revenue_comparison(valuations: &[Valuation], cfg: &LabConfig) -> Result<RatioReport> {
    let baseline_kind = if cfg.mechanism.is_prefix() { MechanismKind::Pvcg } else { MechanismKind::VcgCa };
    let mut mech = cfg.mech;
    if cfg.mechanism.is_prefix() {
        mech.items = Some(cfg.cap_limit(valuations.len()));
    }
    let baseline = mechanisms::run(baseline_kind, &Instance::from_valuations(valuations)?, &mech)?.revenue;
    let eqs = enumerate_equilibria(valuations, cfg)?;
    let count = eqs.len();
    let worst = eqs
        .into_iter()
        .min_by_key(|r| r.revenue)
        .ok_or_else(|| Error::EmptyResult("no equilibrium on this grid".into()))?;
    Ok(RatioReport {
        ratio: ExactRatio::of(worst.revenue, baseline),
        numerator: worst.revenue,
        denominator: baseline,
        grid: cfg.grid,
        equilibria: count,
        witness: worst,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResponseStep {
    pub round: usize,
    pub bidder_id: BidderId,
    pub bid: Bid,
    pub from: Utility,
    pub to: Utility,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Dynamics {
    /// Initial profile followed by the profile after each round.
    pub trajectory: Vec<Vec<Bid>>,
    pub steps: Vec<ResponseStep>,
    pub converged: bool,
}

/// Round-robin best responses. A bidder moves only on strict improvement, to
/// the lowest maximizing bid (then lowest cap).
pub fn best_response_dynamics(
    valuations: &[Valuation],
    initial: &[Bid],
    cfg: &LabConfig,
    max_rounds: usize,
) -> Result<Dynamics> {
    check_profile(valuations, initial)?;
    let points = cfg.grid.points(valuations)?;
    let cap_limit = cfg.cap_limit(initial.len());
    let mut profile = initial.to_vec();
    let mut dynamics = Dynamics { trajectory: vec![profile.clone()], steps: Vec::new(), converged: false };
    for round in 1..=max_rounds {
        let mut moved = false;
        for idx in 0..profile.len() {
            let v = &valuations[idx];
            let current = utility(v, &evaluate(&profile, cfg)?);
            let mut best: Option<(Utility, Bid)> = None;
            let mut trial = profile.clone();
            for (b, l) in deviation_bids(&points, v, cfg, cap_limit) {
                trial[idx] = Bid::new(v.bidder_id, b, l);
                let u = utility(v, &evaluate(&trial, cfg)?);
                if best.is_none_or(|(bu, _)| u > bu) {
                    best = Some((u, trial[idx]));
                }
            }
            if let Some((u, bid)) = best {
                if u > current {
                    profile[idx] = bid;
                    moved = true;
                    dynamics.steps.push(ResponseStep { round, bidder_id: v.bidder_id, bid, from: current, to: u });
                }
            }
        }
        dynamics.trajectory.push(profile.clone());
        if !moved {
            dynamics.converged = true;
            break;
        }
    }
    Ok(dynamics)
}
