//! Cross-check of the closed-form lock rule against the solved game tree on
//! randomly drawn paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    backward_induct, build_game_tree, choose_fraction, collateral_cost, decide_lock, FeeModel,
    GameSpec, HopEconomics, Move, SenderEstimate,
};
use crate::pathfinding::hop_fee;
use crate::topology::ChannelParams;

const BASE_FEES: [u64; 4] = [0, 1, 2, 5];
const FEE_RATES: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 5e-3];
const TIMELOCKS: [u32; 4] = [34, 40, 80, 144];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub paths: usize,
    /// Paths have between 2 and `max_hops` hops.
    pub max_hops: usize,
    /// Fixed risk factor, or log-uniform over `[1e-9, 1e-5]` when absent.
    pub risk_factor: Option<f64>,
    /// Models to draw from, uniformly.
    pub models: Vec<FeeModel>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            paths: 1_000,
            max_hops: 5,
            risk_factor: None,
            models: FeeModel::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDecision {
    pub path: usize,
    pub hops: usize,
    pub model: FeeModel,
    pub party: usize,
    pub belief: f64,
    pub balance_ok: bool,
    pub fee: u64,
    pub collateral_cost: f64,
    pub fraction: f64,
    pub closed_form: Move,
    pub tree: Move,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub paths: usize,
    pub decisions: Vec<OracleDecision>,
    /// Unlocking moves that were not a reveal. Always zero for a sound solver.
    pub withheld: usize,
}

impl OracleReport {
    pub fn mismatches(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.closed_form != d.tree)
            .count()
    }
}

fn draw_belief(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.2) {
        [0.0, 0.6, 1.0][rng.gen_range(0..3)]
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

/// Solves `config.paths` random games and compares every intermediary's
/// locking move with [`decide_lock`].
pub fn run_oracle(config: &OracleConfig, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = if config.models.is_empty() {
        FeeModel::ALL.to_vec()
    } else {
        config.models.clone()
    };
    let max_hops = config.max_hops.max(2);
    let mut report = OracleReport {
        paths: config.paths,
        ..Default::default()
    };

    for path in 0..config.paths {
        let n = rng.gen_range(2..=max_hops);
        let model = models[rng.gen_range(0..models.len())];
        let risk = config
            .risk_factor
            .unwrap_or_else(|| 10f64.powf(rng.gen_range(-9.0..-5.0)));
        let payment: u64 = rng.gen_range(1_000..=500_000);

        let mut econs = vec![HopEconomics::default(); n];
        let mut inbound = payment;
        let mut cumulative = 0;
        for j in (0..n).rev() {
            let params = ChannelParams {
                base_fee: BASE_FEES[rng.gen_range(0..BASE_FEES.len())],
                fee_rate: FEE_RATES[rng.gen_range(0..FEE_RATES.len())],
                timelock_delta: TIMELOCKS[rng.gen_range(0..TIMELOCKS.len())],
            };
            cumulative += params.timelock_delta;
            let fee = if j > 0 { hop_fee(&params, inbound) } else { 0 };
            econs[j] = HopEconomics {
                fee,
                collateral_cost: collateral_cost(cumulative, inbound, risk),
                nonrefundable_fraction: 0.0,
                amount: inbound,
                cumulative_timelock: cumulative,
            };
            inbound += fee;
        }
        for econ in econs.iter_mut().skip(1) {
            let estimate = SenderEstimate {
                p_tilde: draw_belief(&mut rng),
                buffer: 0.1 * (1.0 - draw_belief(&mut rng)),
            };
            *econ = econ.with_fraction(choose_fraction(model, econ, estimate).x);
        }

        let spec = GameSpec {
            amounts: econs.iter().map(|e| e.amount).collect(),
            fees: econs.iter().map(|e| e.fee as f64).collect(),
            collaterals: econs.iter().map(|e| e.collateral_cost).collect(),
            fractions: econs.iter().map(|e| e.nonrefundable_fraction).collect(),
            payment,
            success_utility: 2.0 * inbound as f64,
        };
        let beliefs: Vec<f64> = (0..=n).map(|_| draw_belief(&mut rng)).collect();
        let balance_ok: Vec<bool> = (0..=n).map(|_| rng.gen_bool(0.9)).collect();
        let tree = build_game_tree(&spec).expect("generated paths have at least two hops");
        let solution = backward_induct(&tree, &beliefs, &balance_ok);

        report.withheld += solution
            .unlocking
            .iter()
            .filter(|(_, m)| *m != Move::Reveal)
            .count();
        for party in 1..n {
            let econ = &econs[party];
            report.decisions.push(OracleDecision {
                path,
                hops: n,
                model,
                party,
                belief: beliefs[party],
                balance_ok: balance_ok[party],
                fee: econ.fee,
                collateral_cost: econ.collateral_cost,
                fraction: econ.nonrefundable_fraction,
                closed_form: decide_lock(model, econ, beliefs[party], balance_ok[party]).mv,
                tree: solution.locking[party],
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_agrees_on_default_draws() {
        let report = run_oracle(
            &OracleConfig {
                paths: 300,
                ..Default::default()
            },
            9,
        );
        assert_eq!(report.mismatches(), 0);
        assert_eq!(report.withheld, 0);
        assert!(report.decisions.iter().any(|d| d.tree == Move::Lock));
        assert!(report.decisions.iter().any(|d| d.tree == Move::NotLock));
    }

    #[test]
    fn same_seed_same_report() {
        let config = OracleConfig {
            paths: 50,
            ..Default::default()
        };
        assert_eq!(run_oracle(&config, 4), run_oracle(&config, 4));
    }
}
