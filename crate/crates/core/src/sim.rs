//! Sequential payment execution and the metrics reported per run.
//!
//! Each run works on a private copy of the network and a fresh belief store.
//! Payment draws (pool, endpoints, amounts, delays) come from a stream that
//! does not depend on the fee model, so runs with equal seeds are paired
//! across models. Balances come from a separate stream.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{
    BeliefError, BeliefParams, BeliefStore, DirectedHop, ObservationKey, ObservationKind,
};
use crate::game::{choose_fraction, decide_lock, FeeModel, HopEconomics, Move, SenderEstimate};
use crate::pathfinding::{find_path, PathError, PathPlan, RouteParams};
use crate::topology::{Network, NodeId};
use crate::{derive_seed, round_sat, Minutes, Satoshi};

const STREAM_PAYMENTS: u64 = 1;
const STREAM_BALANCES: u64 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("settlement would overdraw channel {channel}")]
    Overdraft { channel: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub fee_model: FeeModel,
    pub num_payments: usize,
    pub num_runs: usize,
    pub pool_size: usize,
    pub amount_range: [Satoshi; 2],
    pub delay_range: [Minutes; 2],
    pub risk_factor: f64,
    pub penalty: f64,
    pub apriori: f64,
    pub half_life: Minutes,
    pub tau: f64,
    /// Redraw channel balances at the start of every run.
    pub reinitialize_balances: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            fee_model: FeeModel::Original,
            num_payments: 1000,
            num_runs: 10,
            pool_size: 10,
            amount_range: [16_000, 48_000],
            delay_range: [0.1, 1.0],
            risk_factor: 1.5e-7,
            penalty: 100.0,
            apriori: 0.6,
            half_life: 30.0,
            tau: 2.0,
            reinitialize_balances: true,
        }
    }
}

impl SimConfig {
    pub fn belief_params(&self) -> BeliefParams {
        BeliefParams {
            apriori: self.apriori,
            half_life_intermediary: self.half_life,
            tau: self.tau,
        }
    }

    pub fn route_params(&self) -> RouteParams {
        RouteParams {
            risk_factor: self.risk_factor,
            penalty: self.penalty,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.pool_size < 2 {
            return bad("pool_size must be at least 2");
        }
        let [lo, hi] = self.amount_range;
        if lo == 0 || lo > hi {
            return bad("amount_range must be a non-empty interval of positive amounts");
        }
        let [dlo, dhi] = self.delay_range;
        if !(dlo >= 0.0 && dlo <= dhi && dhi.is_finite()) {
            return bad("delay_range must be a non-empty interval of non-negative delays");
        }
        if !(self.risk_factor >= 0.0 && self.risk_factor.is_finite()) {
            return bad("risk_factor must be non-negative");
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return bad("penalty must be non-negative");
        }
        self.belief_params().validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Succeeded,
    FailedNoPath,
    /// Intermediary at this position (0 is the sender's successor) refused.
    FailedRefusal(usize),
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Succeeded)
    }
}

/// What one intermediary saw and did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermediaryRecord {
    pub node: NodeId,
    pub fee: Satoshi,
    pub amount: Satoshi,
    pub collateral_cost: f64,
    pub fraction: f64,
    /// The model asked for a fraction above 1.
    pub fraction_clamped: bool,
    pub balance_sufficient: bool,
    pub belief: f64,
    pub mv: Move,
    /// Non-refundable fee credited to this node.
    pub nonrefundable: Satoshi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentRecord {
    pub run: usize,
    pub index: usize,
    pub timestamp: Minutes,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub amount: Satoshi,
    pub path: Option<PathPlan>,
    /// Intermediaries that made a move, in path order.
    pub intermediaries: Vec<IntermediaryRecord>,
    pub outcome: Outcome,
    /// Fees paid on success.
    pub fees_paid: Satoshi,
    /// Non-refundable fees paid on failure.
    pub nonrefundable_paid: Satoshi,
}

impl PaymentRecord {
    pub fn moves(&self) -> Vec<Move> {
        self.intermediaries.iter().map(|i| i.mv).collect()
    }
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    fn of(values: impl Iterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.flatten().collect();
        if v.is_empty() {
            return Summary::default();
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.len() > 1).then(|| {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        });
        Summary {
            mean: Some(mean),
            std,
        }
    }
}

/// Metrics of one run. A metric whose denominator is zero is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub sr: Option<f64>,
    pub lr: Option<f64>,
    pub f_i: Option<f64>,
    pub f_s: Option<f64>,
    pub f_i_prime: Option<f64>,
    pub f_s_prime: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runs: Vec<RunMetrics>,
    pub sr: Summary,
    pub lr: Summary,
    pub f_i: Summary,
    pub f_s: Summary,
    pub f_i_prime: Summary,
    pub f_s_prime: Summary,
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub records: Vec<PaymentRecord>,
    pub metrics: Metrics,
}

/// Runs `config.num_runs` independent runs of `config.num_payments` payments.
pub fn run_simulation(network: &Network, config: &SimConfig) -> Result<SimOutput, SimError> {
    config.validate()?;
    if network.node_count() < config.pool_size {
        return Err(SimError::InvalidConfig(format!(
            "pool_size {} exceeds the {} nodes of the network",
            config.pool_size,
            network.node_count()
        )));
    }
    let mut records = Vec::with_capacity(config.num_runs * config.num_payments);
    for run in 0..config.num_runs {
        let run_records = run_once(network, config, run)?;
        let succeeded = run_records
            .iter()
            .filter(|r| r.outcome.is_success())
            .count();
        log::debug!(
            "{} run {run}: {succeeded} of {} payments succeeded",
            config.fee_model,
            run_records.len()
        );
        records.extend(run_records);
    }
    let metrics = compute_metrics(&records, config.num_runs);
    Ok(SimOutput { records, metrics })
}

fn run_once(
    base: &Network,
    config: &SimConfig,
    run: usize,
) -> Result<Vec<PaymentRecord>, SimError> {
    let mut network = base.clone();
    if config.reinitialize_balances {
        network.initialize_balances(derive_seed(config.seed, run as u64, STREAM_BALANCES));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, run as u64, STREAM_PAYMENTS));
    let mut pool = index::sample(&mut rng, network.node_count(), config.pool_size).into_vec();
    pool.sort_unstable();

    let mut beliefs = BeliefStore::new(config.belief_params())?;
    let route_params = config.route_params();
    let mut clock: Minutes = 0.0;
    let mut records = Vec::with_capacity(config.num_payments);

    for index in 0..config.num_payments {
        let s = rng.gen_range(0..pool.len());
        let mut r = rng.gen_range(0..pool.len() - 1);
        if r >= s {
            r += 1;
        }
        let sender = crate::topology::NodeIdx(pool[s] as u32);
        let receiver = crate::topology::NodeIdx(pool[r] as u32);
        let amount = rng.gen_range(config.amount_range[0]..=config.amount_range[1]);
        clock += rng.gen_range(config.delay_range[0]..=config.delay_range[1]);

        let path = find_path(
            &network,
            sender,
            receiver,
            amount,
            &route_params,
            &beliefs.route_view(sender, clock),
        )?;
        let mut record = PaymentRecord {
            run,
            index,
            timestamp: clock,
            sender: network.node_id(sender).clone(),
            receiver: network.node_id(receiver).clone(),
            amount,
            path: None,
            intermediaries: Vec::new(),
            outcome: Outcome::FailedNoPath,
            fees_paid: 0,
            nonrefundable_paid: 0,
        };
        if let Some(plan) = path {
            execute(
                &mut network,
                &mut beliefs,
                config,
                &plan,
                clock,
                &mut record,
            )?;
            record.path = Some(plan);
        }
        records.push(record);
    }
    Ok(records)
}

/// Plays the locking game along `plan`, then settles and records failures.
fn execute(
    network: &mut Network,
    beliefs: &mut BeliefStore,
    config: &SimConfig,
    plan: &PathPlan,
    now: Minutes,
    record: &mut PaymentRecord,
) -> Result<(), SimError> {
    let sender = plan.sender();
    let mut refused_at = None;
    for (pos, hop) in plan.hops.iter().enumerate().skip(1) {
        let directed = DirectedHop::new(hop.from, hop.to);
        let econ = HopEconomics::for_hop(hop, config.risk_factor);
        let estimate = SenderEstimate {
            p_tilde: beliefs.success_estimate(
                &ObservationKey {
                    observer: sender,
                    hop: directed,
                    kind: ObservationKind::SenderPostLockFailure,
                },
                now,
            ),
            buffer: beliefs.sender_buffer(sender, directed, now),
        };
        let fraction = choose_fraction(config.fee_model, &econ, estimate);
        let belief = beliefs.success_estimate(
            &ObservationKey {
                observer: hop.from,
                hop: directed,
                kind: ObservationKind::IntermediaryDownstreamFailure,
            },
            now,
        );
        let balance_sufficient = network.channel(hop.channel).balance(hop.dir) >= hop.amount;
        let decision = decide_lock(
            config.fee_model,
            &econ.with_fraction(fraction.x),
            belief,
            balance_sufficient,
        );
        record.intermediaries.push(IntermediaryRecord {
            node: network.node_id(hop.from).clone(),
            fee: hop.fee,
            amount: hop.amount,
            collateral_cost: econ.collateral_cost,
            fraction: fraction.x,
            fraction_clamped: fraction.clamped,
            balance_sufficient,
            belief,
            mv: decision.mv,
            nonrefundable: 0,
        });
        if decision.mv == Move::NotLock {
            refused_at = Some(pos);
            break;
        }
    }

    match refused_at {
        None => {
            settle_success(network, plan)?;
            record.outcome = Outcome::Succeeded;
            record.fees_paid = plan.total_fee;
        }
        Some(pos) => {
            record.outcome = Outcome::FailedRefusal(pos - 1);
            let refuser = &plan.hops[pos];
            beliefs.record_failure(
                ObservationKey {
                    observer: sender,
                    hop: DirectedHop::new(refuser.from, refuser.to),
                    kind: ObservationKind::SenderRefusalToLock,
                },
                now,
            )?;
            for hop in &plan.hops[1..pos] {
                let directed = DirectedHop::new(hop.from, hop.to);
                beliefs.record_failure(
                    ObservationKey {
                        observer: sender,
                        hop: directed,
                        kind: ObservationKind::SenderPostLockFailure,
                    },
                    now,
                )?;
                beliefs.record_failure(
                    ObservationKey {
                        observer: hop.from,
                        hop: directed,
                        kind: ObservationKind::IntermediaryDownstreamFailure,
                    },
                    now,
                )?;
            }
            settle_failure(record);
        }
    }
    Ok(())
}

/// Moves each hop's amount across its channel.
pub fn settle_success(network: &mut Network, plan: &PathPlan) -> Result<(), SimError> {
    let overdrawn = plan
        .hops
        .iter()
        .find(|h| network.channel(h.channel).balance(h.dir) < h.amount);
    if let Some(hop) = overdrawn {
        return Err(SimError::Overdraft {
            channel: network.channel(hop.channel).id.clone(),
        });
    }
    for hop in &plan.hops {
        let moved = network
            .channel_mut(hop.channel)
            .transfer(hop.dir, hop.amount);
        debug_assert!(moved);
    }
    Ok(())
}

/// Credits every intermediary that locked with its rounded non-refundable
/// fee and debits the total from the sender. Balances are not touched: locks
/// are released as soon as the payment fails.
pub fn settle_failure(record: &mut PaymentRecord) {
    let mut total = 0;
    for inter in &mut record.intermediaries {
        inter.nonrefundable = if inter.mv == Move::Lock {
            round_sat(inter.fraction * inter.fee as f64)
        } else {
            0
        };
        total += inter.nonrefundable;
    }
    record.nonrefundable_paid = total;
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Aggregates per-run metrics from records tagged with `run < num_runs`.
pub fn compute_metrics(records: &[PaymentRecord], num_runs: usize) -> Metrics {
    let runs: Vec<RunMetrics> = (0..num_runs)
        .map(|run| {
            let mut attempted = 0;
            let mut succeeded = 0;
            let mut moves = 0;
            let mut locks = 0;
            let mut fees_to_inters = 0u64;
            let mut fees_from_senders = 0u64;
            let mut failed = 0;
            let mut failed_participants = 0;
            let mut nonrefundable = 0u64;
            for r in records.iter().filter(|r| r.run == run) {
                attempted += 1;
                moves += r.intermediaries.len();
                locks += r
                    .intermediaries
                    .iter()
                    .filter(|i| i.mv == Move::Lock)
                    .count();
                if r.outcome.is_success() {
                    succeeded += 1;
                    fees_to_inters += r.intermediaries.iter().map(|i| i.fee).sum::<u64>();
                    fees_from_senders += r.fees_paid;
                } else {
                    failed += 1;
                    failed_participants += r.intermediaries.len();
                    nonrefundable += r.nonrefundable_paid;
                }
            }
            RunMetrics {
                run,
                sr: ratio(succeeded as f64, attempted),
                lr: ratio(locks as f64, moves),
                f_i: ratio(fees_to_inters as f64, moves),
                f_s: ratio(fees_from_senders as f64, attempted),
                f_i_prime: ratio(nonrefundable as f64, failed_participants),
                f_s_prime: ratio(nonrefundable as f64, failed),
            }
        })
        .collect();
    Metrics {
        sr: Summary::of(runs.iter().map(|r| r.sr)),
        lr: Summary::of(runs.iter().map(|r| r.lr)),
        f_i: Summary::of(runs.iter().map(|r| r.f_i)),
        f_s: Summary::of(runs.iter().map(|r| r.f_s)),
        f_i_prime: Summary::of(runs.iter().map(|r| r.f_i_prime)),
        f_s_prime: Summary::of(runs.iter().map(|r| r.f_s_prime)),
        runs,
    }
}
