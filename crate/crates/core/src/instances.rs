//! Named instances from the literature and seeded random corpora.
//!
//! Every ε below is one micro-unit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mechanisms::PrefixInstance;
use crate::model::{Bid, Instance, Valuation};
use crate::money::Money;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NamedInstance {
    Seesaw,
    Example1,
    Example2Truthful,
    Example2Deviated,
    PoaTight,
    RevenueHalf,
    PrelimShading,
}

/// True valuations together with the submitted bid profile.
#[derive(Clone, Debug)]
pub struct Named {
    pub valuations: Vec<Valuation>,
    pub bids: Instance,
}

impl NamedInstance {
    pub const ALL: [NamedInstance; 7] = [
        NamedInstance::Seesaw,
        NamedInstance::Example1,
        NamedInstance::Example2Truthful,
        NamedInstance::Example2Deviated,
        NamedInstance::PoaTight,
        NamedInstance::RevenueHalf,
        NamedInstance::PrelimShading,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NamedInstance::Seesaw => "seesaw",
            NamedInstance::Example1 => "example1",
            NamedInstance::Example2Truthful => "example2",
            NamedInstance::Example2Deviated => "example2-deviated",
            NamedInstance::PoaTight => "poa-tight",
            NamedInstance::RevenueHalf => "revenue-half",
            NamedInstance::PrelimShading => "prelim-shading",
        }
    }
}

impl fmt::Display for NamedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NamedInstance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let norm = match norm.as_str() {
            "example2-truthful" => "example2",
            other => other,
        };
        NamedInstance::ALL
            .into_iter()
            .find(|n| n.as_str() == norm)
            .ok_or_else(|| Error::input(format!("unknown instance name {s:?}")))
    }
}

const EPS: Money = Money::EPSILON;

fn u(x: i64) -> Money {
    Money::units(x)
}

fn vals(list: &[(Money, usize)]) -> Vec<Valuation> {
    list.iter()
        .enumerate()
        .map(|(i, &(v, c))| Valuation::new(i as u64 + 1, v, c))
        .collect()
}

fn bids(list: &[(Money, usize)]) -> Instance {
    let bids = list.iter().enumerate().map(|(i, &(b, c))| Bid::new(i as u64 + 1, b, c)).collect();
    Instance::new(bids).expect("named instances are valid")
}

/// Bidder ids are 1, 2, ... in the order listed (A = 1, B = 2, ...).
pub fn generate(name: NamedInstance) -> Named {
    let (v, b): (Vec<(Money, usize)>, Option<Vec<(Money, usize)>>) = match name {
        // Only the printed prefix of the sequence.
        NamedInstance::Seesaw => (
            vec![
                (u(1000), 1),
                (u(400), 3),
                (u(400), 3),
                (u(400), 3),
                (u(300), 5),
                (u(300), 5),
                (u(300), 5),
                (u(290), 5),
                (u(100), 5),
            ],
            None,
        ),
        NamedInstance::Example1 => (vec![(u(100), 1), (u(90), 2), (u(80), 2)], None),
        NamedInstance::Example2Truthful => (vec![(u(100), 1), (u(80), 2), (u(70), 2)], None),
        NamedInstance::Example2Deviated => (
            vec![(u(100), 1), (u(80), 2), (u(70), 2)],
            Some(vec![(u(100), 1), (u(40), 2), (u(70), 2)]),
        ),
        NamedInstance::PoaTight => (
            vec![(u(100), 1), (u(50), 2), (EPS, 2)],
            Some(vec![(u(100), 1), (u(100), 2), (u(50), 2)]),
        ),
        NamedInstance::RevenueHalf => (
            vec![(u(100) + EPS, 1), (u(50), 2), (u(50), 2)],
            Some(vec![(u(100), 1), (u(100), 2), (u(50), 2)]),
        ),
        NamedInstance::PrelimShading => (
            vec![(u(100), 1), (u(75), 2), (u(75), 2)],
            Some(vec![(u(100), 1), (u(1), 2), (u(1), 2)]),
        ),
    };
    let valuations = vals(&v);
    let bids = bids(b.as_deref().unwrap_or(&v));
    Named { valuations, bids }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueDist {
    /// Uniform over levels 1..=value_levels.
    Uniform,
    /// Geometric-like: small levels are much more frequent.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapDist {
    Uniform1N,
    /// 1 + Geometric(1/2), clamped to n.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSpec {
    pub n: usize,
    pub seed: u64,
    pub value_dist: ValueDist,
    pub cap_dist: CapDist,
    /// Values are multiples of this step.
    pub grid_step: Money,
    pub value_levels: u32,
}

impl RandomSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        RandomSpec {
            n,
            seed,
            value_dist: ValueDist::Uniform,
            cap_dist: CapDist::Uniform1N,
            grid_step: Money::units(5),
            value_levels: 20,
        }
    }

    pub fn step(mut self, step: Money) -> Self {
        self.grid_step = step;
        self
    }

    pub fn levels(mut self, levels: u32) -> Self {
        self.value_levels = levels;
        self
    }
}

/// `n=12,seed=7,step=5[,levels=20][,values=uniform|exp][,caps=uniform|geom]`
impl FromStr for RandomSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = RandomSpec::new(0, 0);
        let mut have_n = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("expected key=value, got {part:?}")))?;
            let bad = || Error::input(format!("bad value for {key}: {val:?}"));
            match key.trim() {
                "n" => {
                    spec.n = val.parse().map_err(|_| bad())?;
                    have_n = true;
                }
                "seed" => spec.seed = val.parse().map_err(|_| bad())?,
                "step" => spec.grid_step = val.parse()?,
                "levels" => spec.value_levels = val.parse().map_err(|_| bad())?,
                "values" => {
                    spec.value_dist = match val {
                        "uniform" => ValueDist::Uniform,
                        "exp" | "exponential" => ValueDist::Exponential,
                        _ => return Err(bad()),
                    }
                }
                "caps" => {
                    spec.cap_dist = match val {
                        "uniform" => CapDist::Uniform1N,
                        "geom" | "geometric" => CapDist::Geometric,
                        _ => return Err(bad()),
                    }
                }
                other => return Err(Error::input(format!("unknown random spec key {other:?}"))),
            }
        }
        if !have_n {
            return Err(Error::input("random spec needs n=..."));
        }
        Ok(spec)
    }
}

fn geometric(rng: &mut ChaCha8Rng, p_continue: f64, limit: u32) -> u32 {
    let mut x = 0;
    while x < limit && rng.gen_bool(p_continue) {
        x += 1;
    }
    x
}

/// Seeded random valuations with ids 1..=n.
pub fn random_valuations(spec: &RandomSpec) -> Result<Vec<Valuation>> {
    if spec.n == 0 {
        return Err(Error::input("random instance needs n >= 1"));
    }
    if spec.grid_step <= Money::ZERO || spec.value_levels == 0 {
        return Err(Error::input("random instance needs a positive step and at least one value level"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let top = spec.value_levels;
    (1..=spec.n)
        .map(|id| {
            let level = match spec.value_dist {
                ValueDist::Uniform => rng.gen_range(1..=top),
                ValueDist::Exponential => 1 + geometric(&mut rng, 0.75, top - 1),
            };
            let cap = match spec.cap_dist {
                CapDist::Uniform1N => rng.gen_range(1..=spec.n),
                CapDist::Geometric => 1 + geometric(&mut rng, 0.5, 64) as usize,
            }
            .clamp(1, spec.n);
            let value = Money::from_micros(
                spec.grid_step
                    .micros()
                    .checked_mul(level as i64)
                    .ok_or_else(|| Error::input("random value overflows"))?,
            );
            Ok(Valuation::new(id as u64, value, cap))
        })
        .collect()
}

/// Truthful bids of [`random_valuations`].
pub fn random_instance(spec: &RandomSpec) -> Result<Instance> {
    Instance::from_valuations(&random_valuations(spec)?)
}

/// Random prefix instance; item count drawn from 1..=n with the same RNG stream.
pub fn random_prefix_instance(spec: &RandomSpec) -> Result<PrefixInstance> {
    let bids = random_instance(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let items = rng.gen_range(1..=spec.n);
    PrefixInstance::new(bids, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigma::{sigma_table, TieK};
    use proptest::prelude::*;

    #[test]
    fn seesaw_prefix() {
        let s = generate(NamedInstance::Seesaw);
        assert_eq!(s.bids.len(), 9);
        let t = sigma_table(&s.bids, TieK::Largest).unwrap();
        assert_eq!(t.sigma(1), Some(u(1000)));
        assert_eq!(t.sigma(2), Some(u(800)));
        assert_eq!(t.sigma(3), Some(u(1200)));
        assert_eq!(t.sigma(4), Some(u(1190)));
    }

    #[test]
    fn named_lists() {
        let e1 = generate(NamedInstance::Example1);
        let got: Vec<_> = e1.valuations.iter().map(|v| (v.value, v.cap)).collect();
        assert_eq!(got, vec![(u(100), 1), (u(90), 2), (u(80), 2)]);

        let t = generate(NamedInstance::PoaTight);
        assert_eq!(t.valuations[2].value.to_string(), "0.000001");
        let b: Vec<_> = t.bids.bids().iter().map(|b| (b.amount, b.cap)).collect();
        assert_eq!(b, vec![(u(100), 1), (u(100), 2), (u(50), 2)]);

        let r = generate(NamedInstance::RevenueHalf);
        assert_eq!(r.valuations[0].value, u(100) + EPS);
        assert_eq!(generate(NamedInstance::Example2Deviated).bids.bids()[1].amount, u(40));
    }

    #[test]
    fn names_round_trip() {
        for n in NamedInstance::ALL {
            assert_eq!(n.as_str().parse::<NamedInstance>().unwrap(), n);
        }
        assert_eq!("EXAMPLE2_TRUTHFUL".parse::<NamedInstance>().unwrap(), NamedInstance::Example2Truthful);
        assert!("nope".parse::<NamedInstance>().is_err());
    }

    #[test]
    fn single_bidder_cap_clamped() {
        for cap_dist in [CapDist::Uniform1N, CapDist::Geometric] {
            let spec = RandomSpec { cap_dist, ..RandomSpec::new(1, 0) };
            let i = random_instance(&spec).unwrap();
            assert_eq!(i.len(), 1);
            assert_eq!(i.bids()[0].cap, 1);
        }
    }

    #[test]
    fn spec_parsing() {
        let s: RandomSpec = "n=12,seed=7,step=5".parse().unwrap();
        assert_eq!((s.n, s.seed, s.grid_step), (12, 7, u(5)));
        assert!("seed=7".parse::<RandomSpec>().is_err());
        assert!("n=3,colour=red".parse::<RandomSpec>().is_err());
        let s: RandomSpec = "n=3,values=exp,caps=geom,levels=4".parse().unwrap();
        assert_eq!((s.value_dist, s.cap_dist, s.value_levels), (ValueDist::Exponential, CapDist::Geometric, 4));
    }

    #[test]
    fn n12_fits_oracle() {
        let i = random_instance(&RandomSpec::new(12, 7)).unwrap();
        assert!(crate::oracle::brute_best_allocation(&i, TieK::Largest, Default::default()).is_ok());
    }

    proptest! {
        #[test]
        fn deterministic_and_on_grid(n in 1usize..20, seed: u64, exp: bool, geom: bool, step in 1i64..50) {
            let spec = RandomSpec {
                value_dist: if exp { ValueDist::Exponential } else { ValueDist::Uniform },
                cap_dist: if geom { CapDist::Geometric } else { CapDist::Uniform1N },
                ..RandomSpec::new(n, seed).step(u(step))
            };
            let a = random_valuations(&spec).unwrap();
            prop_assert_eq!(&a, &random_valuations(&spec).unwrap());
            for v in &a {
                prop_assert!(v.cap >= 1 && v.cap <= n);
                prop_assert_eq!(v.value.micros() % u(step).micros(), 0);
                prop_assert!(v.value > Money::ZERO);
            }
        }
    }
}
