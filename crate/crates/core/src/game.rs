//! Routing incentives: utilities of locking, lock decisions and the
//! non-refundable fee fraction a sender offers each intermediary.
//!
//! Three fee models are supported. Under [`FeeModel::Original`] fees are paid
//! only on success. Under the two modified models an intermediary that locks
//! receives `x * f` even if the payment later fails; the sender picks `x`
//! either to make locking risk-free ([`FeeModel::ModGuaranteed`]) or just
//! attractive according to its own beliefs ([`FeeModel::ModIncentivized`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pathfinding::HopPlan;
use crate::Satoshi;

pub mod oracle;
pub mod tree;

pub use tree::{backward_induct, build_game_tree, GameError, GameSpec, GameTree, Phase, Solution};

/// Locking decisions accept utilities down to this value, so a zero-utility
/// lock (for instance the failure branch under `x = c / f`) still counts as
/// lock despite floating-point noise.
pub const LOCK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeModel {
    Original,
    ModGuaranteed,
    ModIncentivized,
}

impl FeeModel {
    pub const ALL: [FeeModel; 3] = [
        FeeModel::Original,
        FeeModel::ModGuaranteed,
        FeeModel::ModIncentivized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeeModel::Original => "Original",
            FeeModel::ModGuaranteed => "ModGuaranteed",
            FeeModel::ModIncentivized => "ModIncentivized",
        }
    }

    pub fn is_modified(self) -> bool {
        !matches!(self, FeeModel::Original)
    }
}

impl fmt::Display for FeeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeeModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "original" => Ok(FeeModel::Original),
            "guaranteed" | "modguaranteed" => Ok(FeeModel::ModGuaranteed),
            "incentivized" | "modincentivized" => Ok(FeeModel::ModIncentivized),
            other => Err(format!(
                "unknown fee model `{other}` (expected original, guaranteed or incentivized)"
            )),
        }
    }
}

/// Moves of the routing game: lock / not lock while the payment is set up,
/// reveal / withhold the secret while it settles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    #[serde(rename = "L")]
    Lock,
    #[serde(rename = "NL")]
    NotLock,
    #[serde(rename = "H")]
    Reveal,
    #[serde(rename = "DH")]
    Withhold,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HopEconomics {
    pub fee: Satoshi,
    /// `T * amount * r`.
    pub collateral_cost: f64,
    pub nonrefundable_fraction: f64,
    pub amount: Satoshi,
    pub cumulative_timelock: u32,
}

impl HopEconomics {
    /// Economics of the node forwarding `hop`, with `x = 0`.
    pub fn for_hop(hop: &HopPlan, risk_factor: f64) -> Self {
        HopEconomics {
            fee: hop.fee,
            collateral_cost: collateral_cost(hop.cumulative_timelock, hop.amount, risk_factor),
            nonrefundable_fraction: 0.0,
            amount: hop.amount,
            cumulative_timelock: hop.cumulative_timelock,
        }
    }

    pub fn with_fraction(mut self, x: f64) -> Self {
        self.nonrefundable_fraction = x;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LockDecision {
    pub mv: Move,
    pub expected_utility: f64,
}

pub fn collateral_cost(cumulative_timelock: u32, amount: Satoshi, risk_factor: f64) -> f64 {
    cumulative_timelock as f64 * amount as f64 * risk_factor
}

/// Expected utility of locking with refundable fees only.
pub fn utility_lock_original(p_success: f64, fee: Satoshi, collateral: f64) -> f64 {
    let f = fee as f64;
    p_success * (f - collateral) - (1.0 - p_success) * collateral
}

/// Expected utility of locking when `x * fee` is paid regardless of outcome.
pub fn utility_lock_modified(p_success: f64, fee: Satoshi, collateral: f64, x: f64) -> f64 {
    let f = fee as f64;
    p_success * (f - collateral) + (1.0 - p_success) * (x * f - collateral)
}

/// The intermediary's rule: lock iff its expected utility is not negative
/// and it can cover the amount.
pub fn decide_lock(
    model: FeeModel,
    econ: &HopEconomics,
    p_success: f64,
    balance_sufficient: bool,
) -> LockDecision {
    if !balance_sufficient {
        return LockDecision {
            mv: Move::NotLock,
            expected_utility: 0.0,
        };
    }
    let u = match model {
        FeeModel::Original => utility_lock_original(p_success, econ.fee, econ.collateral_cost),
        FeeModel::ModGuaranteed | FeeModel::ModIncentivized => utility_lock_modified(
            p_success,
            econ.fee,
            econ.collateral_cost,
            econ.nonrefundable_fraction,
        ),
    };
    LockDecision {
        mv: if prefers_lock(u) {
            Move::Lock
        } else {
            Move::NotLock
        },
        expected_utility: u,
    }
}

pub fn prefers_lock(utility: f64) -> bool {
    utility >= -LOCK_TOLERANCE
}

/// Break-even fraction under the sender's estimate `p_tilde` of the
/// intermediary's success belief, clamped to `[0, 1]`.
pub fn xtilde(p_tilde: f64, fee: Satoshi, collateral: f64) -> f64 {
    if fee == 0 {
        return if collateral > 0.0 { 1.0 } else { 0.0 };
    }
    if p_tilde >= 1.0 {
        return 0.0;
    }
    let f = fee as f64;
    ((collateral - p_tilde * f) / ((1.0 - p_tilde) * f)).clamp(0.0, 1.0)
}

/// What the sender knows about one intermediary when pricing `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SenderEstimate {
    /// Estimate of the intermediary's post-lock success probability.
    pub p_tilde: f64,
    /// Buffer added on top of the break-even fraction.
    pub buffer: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionChoice {
    pub x: f64,
    /// Set when the model's formula exceeded 1 and was capped, which under
    /// `ModGuaranteed` means the collateral cost exceeds the fee.
    pub clamped: bool,
}

pub fn choose_fraction(
    model: FeeModel,
    econ: &HopEconomics,
    estimate: SenderEstimate,
) -> FractionChoice {
    let f = econ.fee as f64;
    let c = econ.collateral_cost;
    match model {
        FeeModel::Original => FractionChoice {
            x: 0.0,
            clamped: false,
        },
        FeeModel::ModGuaranteed => {
            if econ.fee == 0 {
                FractionChoice {
                    x: 0.0,
                    clamped: c > 0.0,
                }
            } else {
                let raw = c / f;
                FractionChoice {
                    x: raw.min(1.0),
                    clamped: raw > 1.0,
                }
            }
        }
        FeeModel::ModIncentivized => {
            let raw = xtilde(estimate.p_tilde, econ.fee, c) + estimate.buffer;
            FractionChoice {
                x: raw.min(1.0),
                clamped: raw > 1.0,
            }
        }
    }
}
