//! The four mechanisms: MPP_CA and VCG_CA over cardinal bids, pVCG and pGSP
//! over prefix bids.

mod mpp;
mod prefix;
mod vcg;

pub use mpp::{run_mpp, run_mpp_with, second_best_sum, MppPricer};
pub use prefix::{prefix_assignment, run_pgsp, run_pvcg, PrefixInstance};
pub use vcg::{run_vcg, run_vcg_bids};

use crate::error::Result;
use crate::model::{Instance, MechanismKind, PricedOutcome};
use crate::sigma::TieK;

/// Knobs shared by all mechanisms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MechanismConfig {
    pub tie: TieK,
    /// Number of ordered copies for prefix mechanisms; defaults to the number
    /// of bidders.
    pub items: Option<usize>,
}

impl MechanismConfig {
    pub fn with_items(items: usize) -> Self {
        MechanismConfig { items: Some(items), ..Default::default() }
    }
}

/// Runs `kind` on the submitted bids.
pub fn run(kind: MechanismKind, bids: &Instance, config: &MechanismConfig) -> Result<PricedOutcome> {
    match kind {
        MechanismKind::MppCa => run_mpp(bids, config.tie),
        MechanismKind::VcgCa => run_vcg_bids(bids, config.tie),
        MechanismKind::Pvcg | MechanismKind::Pgsp => {
            let items = config.items.unwrap_or(bids.len()).max(1);
            let p = PrefixInstance::new(bids.clone(), items)?;
            if kind == MechanismKind::Pvcg {
                run_pvcg(&p)
            } else {
                run_pgsp(&p)
            }
        }
    }
}
