//! Cheapest-path search in the style of LND.
//!
//! The search runs from the receiver towards the sender so the amount each
//! hop has to carry is known when the hop is priced. Every candidate node
//! carries its whole suffix: summed edge weights, the product of hop success
//! probabilities and the cumulative timelock. A node's cost is
//! `sum(weights) + penalty / prod(probabilities)`.
//!
//! The probability term is multiplicative over the suffix, so a single label
//! per node is a heuristic rather than an exact shortest path. Costs never
//! decrease as a suffix grows, which keeps the settle order well defined.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{ChannelIdx, ChannelParams, Direction, Network, NodeIdx};
use crate::{round_sat, Minutes, Satoshi};

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("negative time since last failure: {0}")]
    NegativeElapsed(f64),
    #[error("sender and receiver are the same node")]
    SelfPayment,
    #[error("payment amount must be positive")]
    ZeroAmount,
}

/// Fee charged for forwarding `amount`: `base_fee + round(amount * fee_rate)`.
pub fn hop_fee(params: &ChannelParams, amount: Satoshi) -> Satoshi {
    params.base_fee + round_sat(amount as f64 * params.fee_rate)
}

/// Edge weight: timelock penalty `amount * timelock * risk` plus the fee.
pub fn edge_weight(amount: Satoshi, hop_timelock: u32, risk_factor: f64, fee: Satoshi) -> f64 {
    amount as f64 * hop_timelock as f64 * risk_factor + fee as f64
}

/// Success probability of a channel given the time since its last failure.
///
/// Unknown history gives the a priori value; otherwise the probability
/// recovers towards it as `apriori * (1 - 2^(-elapsed / half_life))`.
pub fn channel_success_probability(
    elapsed: Option<Minutes>,
    apriori: f64,
    half_life: Minutes,
) -> Result<f64, PathError> {
    match elapsed {
        None => Ok(apriori),
        Some(t) if t < 0.0 => Err(PathError::NegativeElapsed(t)),
        Some(t) => Ok(apriori * (1.0 - (-t / half_life).exp2())),
    }
}

/// `penalty / prod(probs)`; infinite when any probability is zero.
pub fn path_bias(probs: &[f64], penalty: f64) -> f64 {
    let product: f64 = probs.iter().product();
    if product <= 0.0 {
        f64::INFINITY
    } else {
        penalty / product
    }
}

/// Source of per-hop success probabilities as seen by the paying node.
pub trait HopProbability {
    fn success_probability(&self, from: NodeIdx, to: NodeIdx) -> f64;
}

/// Every hop succeeds with the same probability.
#[derive(Clone, Copy, Debug)]
pub struct ConstantProbability(pub f64);

impl HopProbability for ConstantProbability {
    fn success_probability(&self, _from: NodeIdx, _to: NodeIdx) -> f64 {
        self.0
    }
}

impl<F: Fn(NodeIdx, NodeIdx) -> f64> HopProbability for F {
    fn success_probability(&self, from: NodeIdx, to: NodeIdx) -> f64 {
        self(from, to)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteParams {
    pub risk_factor: f64,
    pub penalty: f64,
}

impl Default for RouteParams {
    fn default() -> Self {
        RouteParams {
            risk_factor: 1.5e-7,
            penalty: 100.0,
        }
    }
}

/// One hop of a planned route, `from` locking `amount` towards `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopPlan {
    pub channel: ChannelIdx,
    pub dir: Direction,
    pub from: NodeIdx,
    pub to: NodeIdx,
    /// Amount locked in this hop (α_i).
    pub amount: Satoshi,
    /// Fee earned by `from` for forwarding; zero for the sender's own hop.
    pub fee: Satoshi,
    pub hop_timelock: u32,
    /// Timelock from `from` to the receiver (T_i).
    pub cumulative_timelock: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    pub hops: Vec<HopPlan>,
    pub amount: Satoshi,
    pub total_fee: Satoshi,
    pub cost: f64,
}

impl PathPlan {
    pub fn sender(&self) -> NodeIdx {
        self.hops[0].from
    }

    pub fn receiver(&self) -> NodeIdx {
        self.hops[self.hops.len() - 1].to
    }

    /// Nodes along the path, sender first.
    pub fn nodes(&self) -> Vec<NodeIdx> {
        let mut out: Vec<NodeIdx> = self.hops.iter().map(|h| h.from).collect();
        out.push(self.receiver());
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Label {
    cost: f64,
    weight_sum: f64,
    prob_product: f64,
    /// Amount the predecessor must lock towards this node.
    inbound: Satoshi,
    timelock_sum: u32,
    fee: Satoshi,
    next: Option<(ChannelIdx, Direction, NodeIdx, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeIdx,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then on node id.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn better(candidate: &Label, current: &Label) -> bool {
    match candidate.cost.total_cmp(&current.cost) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            let key = |l: &Label| l.next.map(|(ch, _, to, _)| (to, ch));
            key(candidate) < key(current)
        }
    }
}

/// Finds a route from `sender` to `receiver` delivering `amount`.
///
/// Channels whose public capacity is below the amount they would have to lock
/// are skipped. The sender knows its own balances, so its first hop is
/// filtered by balance instead and is treated as certain to succeed. Channel
/// directions without a complete policy are not routable. Returns `Ok(None)`
/// when no route exists.
pub fn find_path(
    network: &Network,
    sender: NodeIdx,
    receiver: NodeIdx,
    amount: Satoshi,
    params: &RouteParams,
    probabilities: &impl HopProbability,
) -> Result<Option<PathPlan>, PathError> {
    if sender == receiver {
        return Err(PathError::SelfPayment);
    }
    if amount == 0 {
        return Err(PathError::ZeroAmount);
    }

    let n = network.node_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();

    labels[receiver.index()] = Some(Label {
        cost: params.penalty,
        weight_sum: 0.0,
        prob_product: 1.0,
        inbound: amount,
        timelock_sum: 0,
        fee: 0,
        next: None,
    });
    heap.push(Frontier {
        cost: params.penalty,
        node: receiver,
    });

    while let Some(Frontier { node, .. }) = heap.pop() {
        if settled[node.index()] {
            continue;
        }
        settled[node.index()] = true;
        if node == sender {
            break;
        }
        let here = labels[node.index()].expect("settled node has a label");

        for adj in network.adjacent(node) {
            let prev = adj.peer;
            if settled[prev.index()] || prev == receiver {
                continue;
            }
            let dir = adj.dir.reverse();
            let channel = network.channel(adj.channel);
            let Some(policy) = channel.params(dir) else {
                continue;
            };

            let lock = here.inbound;
            let is_sender = prev == sender;
            let usable = if is_sender {
                channel.balance(dir) >= lock
            } else {
                channel.capacity >= lock
            };
            if !usable {
                continue;
            }

            let fee = if is_sender { 0 } else { hop_fee(&policy, lock) };
            let p = if is_sender {
                1.0
            } else {
                probabilities.success_probability(prev, node)
            };
            let prob_product = here.prob_product * p;
            if prob_product <= 0.0 {
                continue;
            }
            let weight_sum =
                here.weight_sum + edge_weight(lock, policy.timelock_delta, params.risk_factor, fee);
            let candidate = Label {
                cost: weight_sum + params.penalty / prob_product,
                weight_sum,
                prob_product,
                inbound: lock + fee,
                timelock_sum: here.timelock_sum + policy.timelock_delta,
                fee,
                next: Some((adj.channel, dir, node, policy.timelock_delta)),
            };
            let slot = &mut labels[prev.index()];
            if slot.as_ref().is_none_or(|cur| better(&candidate, cur)) {
                *slot = Some(candidate);
                heap.push(Frontier {
                    cost: candidate.cost,
                    node: prev,
                });
            }
        }
    }

    if !settled[sender.index()] {
        return Ok(None);
    }

    let start = labels[sender.index()].expect("sender settled");
    let mut hops = Vec::new();
    let mut at = sender;
    let mut label = start;
    while let Some((channel, dir, to, hop_timelock)) = label.next {
        let next_label = labels[to.index()].expect("suffix node has a label");
        hops.push(HopPlan {
            channel,
            dir,
            from: at,
            to,
            amount: next_label.inbound,
            fee: label.fee,
            hop_timelock,
            cumulative_timelock: label.timelock_sum,
        });
        at = to;
        label = next_label;
    }
    let total_fee = hops.iter().map(|h| h.fee).sum();
    Ok(Some(PathPlan {
        hops,
        amount,
        total_fee,
        cost: start.cost,
    }))
}

/// Recomputes the search cost of a route from its hops.
pub fn route_cost(
    network: &Network,
    plan: &PathPlan,
    params: &RouteParams,
    probabilities: &impl HopProbability,
) -> f64 {
    let mut weights = 0.0;
    let mut probs = Vec::with_capacity(plan.hops.len());
    for (i, hop) in plan.hops.iter().enumerate() {
        let timelock = network
            .channel(hop.channel)
            .params(hop.dir)
            .map_or(0, |p| p.timelock_delta);
        weights += edge_weight(hop.amount, timelock, params.risk_factor, hop.fee);
        probs.push(if i == 0 {
            1.0
        } else {
            probabilities.success_probability(hop.from, hop.to)
        });
    }
    weights + path_bias(&probs, params.penalty)
}
