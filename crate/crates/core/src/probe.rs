//! Balance probing: an attacker bisects the balance of a target channel with
//! payments it never completes, and pays whatever non-refundable fees the fee
//! model demands for each probe the target locks.
//!
//! The path is attacker → target → far node, where the far node is the
//! receiver. Only the target hop matters: the attacker's own channel is
//! assumed to be funded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beliefs::{BeliefParams, BeliefStore, DirectedHop, ObservationKey, ObservationKind};
use crate::game::{
    choose_fraction, collateral_cost, decide_lock, FeeModel, HopEconomics, Move, SenderEstimate,
};
use crate::pathfinding::hop_fee;
use crate::topology::{ChannelParams, NodeIdx};
use crate::{derive_seed, round_sat, Minutes, Satoshi};

/// Width of the sliding window used to smooth cost curves.
pub const COST_WINDOW: Satoshi = 500_000;

const TARGET: NodeIdx = NodeIdx(1);
const FAR: NodeIdx = NodeIdx(2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeScenario {
    pub capacity: Satoshi,
    /// Balance of the target towards the far node. Hidden from the attacker.
    pub balance: Satoshi,
    /// Timelock of the target hop (T_1).
    pub timelock: u32,
    pub target_params: ChannelParams,
    pub risk_factor: f64,
    /// Fee model of the attacker. Both modified models pay `x = c / f`.
    pub fee_model: FeeModel,
    pub beliefs: BeliefParams,
    pub delay_range: [Minutes; 2],
    pub seed: u64,
}

impl Default for ProbeScenario {
    fn default() -> Self {
        ProbeScenario {
            capacity: 4_600_000,
            balance: 0,
            timelock: 144,
            target_params: ChannelParams {
                base_fee: 1,
                fee_rate: 1e-4,
                timelock_delta: 144,
            },
            risk_factor: 1.5e-7,
            fee_model: FeeModel::ModGuaranteed,
            beliefs: BeliefParams::default(),
            delay_range: [0.1, 1.0],
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub locked: bool,
    pub cost: Satoshi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub amount: Satoshi,
    pub time: Minutes,
    pub belief: f64,
    pub outcome: ProbeOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Final interval `[lo, hi)` believed to contain the balance.
    pub interval: (Satoshi, Satoshi),
    pub iterations: usize,
    pub total_cost: Satoshi,
    pub steps: Vec<ProbeStep>,
}

fn target_economics(scenario: &ProbeScenario, amount: Satoshi) -> HopEconomics {
    HopEconomics {
        fee: hop_fee(&scenario.target_params, amount),
        collateral_cost: collateral_cost(scenario.timelock, amount, scenario.risk_factor),
        nonrefundable_fraction: 0.0,
        amount,
        cumulative_timelock: scenario.timelock,
    }
}

/// One probe of `amount` against a target whose post-lock success belief is
/// `target_belief`.
pub fn probe_once(scenario: &ProbeScenario, amount: Satoshi, target_belief: f64) -> ProbeOutcome {
    let econ = target_economics(scenario, amount);
    let attacker_model = match scenario.fee_model {
        FeeModel::Original => FeeModel::Original,
        FeeModel::ModGuaranteed | FeeModel::ModIncentivized => FeeModel::ModGuaranteed,
    };
    let x = choose_fraction(
        attacker_model,
        &econ,
        SenderEstimate {
            p_tilde: 0.0,
            buffer: 0.0,
        },
    )
    .x;
    let econ = econ.with_fraction(x);
    let funded = amount <= scenario.balance;
    let locked = decide_lock(attacker_model, &econ, target_belief, funded).mv == Move::Lock;
    let cost = if locked {
        round_sat(x * econ.fee as f64)
    } else {
        0
    };
    ProbeOutcome { locked, cost }
}

/// Bisects `[0, capacity]` until the interval is at most `granularity` wide.
pub fn binary_search_balance(scenario: &ProbeScenario, granularity: Satoshi) -> ProbeResult {
    let granularity = granularity.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut target = BeliefStore::new(scenario.beliefs).expect("valid belief parameters");
    let key = ObservationKey {
        observer: TARGET,
        hop: DirectedHop::new(TARGET, FAR),
        kind: ObservationKind::IntermediaryDownstreamFailure,
    };
    let (mut lo, mut hi) = (0, scenario.capacity + 1);
    let mut clock: Minutes = 0.0;
    let mut steps = Vec::new();
    let mut total_cost = 0;
    while hi - lo > granularity {
        let mid = lo + (hi - lo) / 2;
        clock += rng.gen_range(scenario.delay_range[0]..=scenario.delay_range[1]);
        let belief = target.success_estimate(&key, clock);
        let outcome = probe_once(scenario, mid, belief);
        if outcome.locked {
            // The far node rejects, so the target sees a downstream failure.
            target
                .record_failure(key, clock)
                .expect("clock only moves forward");
            lo = mid;
        } else {
            hi = mid;
        }
        total_cost += outcome.cost;
        steps.push(ProbeStep {
            amount: mid,
            time: clock,
            belief,
            outcome,
        });
    }
    ProbeResult {
        interval: (lo, hi),
        iterations: steps.len(),
        total_cost,
        steps,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub balance: Satoshi,
    pub iterations: usize,
    pub cost: Satoshi,
    /// Mean cost of all points within half a window of `balance`.
    pub window_mean_cost: f64,
}

/// Runs a fresh attack per balance and smooths the costs over a sliding window.
pub fn cost_curve(
    template: &ProbeScenario,
    balances: &[Satoshi],
    granularity: Satoshi,
) -> Vec<CostPoint> {
    let raw: Vec<(Satoshi, usize, Satoshi)> = balances
        .iter()
        .enumerate()
        .map(|(i, &balance)| {
            let scenario = ProbeScenario {
                balance: balance.min(template.capacity),
                seed: derive_seed(template.seed, i as u64, 3),
                ..template.clone()
            };
            let result = binary_search_balance(&scenario, granularity);
            (balance, result.iterations, result.total_cost)
        })
        .collect();
    let half = COST_WINDOW / 2;
    raw.iter()
        .map(|&(balance, iterations, cost)| {
            let window: Vec<f64> = raw
                .iter()
                .filter(|(b, _, _)| b.abs_diff(balance) <= half)
                .map(|(_, _, c)| *c as f64)
                .collect();
            let window_mean_cost = window.iter().sum::<f64>() / window.len() as f64;
            CostPoint {
                balance,
                iterations,
                cost,
                window_mean_cost,
            }
        })
        .collect()
}
