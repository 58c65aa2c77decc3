//! Cardinal auctions (MPP_CA, VCG_CA), prefix auctions (pVCG, pGSP), the
//! range-search engine for the optimal number of copies, brute-force
//! oracles, and a grid-based equilibrium lab.

pub mod equilibrium;
pub mod error;
pub mod instances;
pub mod io;
pub mod mechanisms;
pub mod model;
pub mod money;
pub mod oracle;
pub mod sigma;

pub use error::{Error, Result};
pub use model::{
    canonical_cmp, is_feasible, utility, Allocation, Bid, BidderId, Instance, MechanismKind,
    PricedOutcome, Utility, Valuation,
};
pub use money::Money;
pub use sigma::{allocate, sigma_table, sigma_table_naive, RangeStructure, SigmaTable, TieK};
