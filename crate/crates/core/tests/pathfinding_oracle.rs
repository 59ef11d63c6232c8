//! Route search against exhaustive enumeration of simple paths.
//!
//! With a zero risk factor, flat fees and certain hops every path's cost is
//! a sum of fixed per-hop weights plus a constant bias, so the search must
//! find the true minimum.

mod common;

use lnfee::pathfinding::{find_path, route_cost, ConstantProbability, RouteParams};
use lnfee::topology::{ChannelIdx, Direction};
use lnfee::{ChannelParams, Network, NodeIdx};
use proptest::prelude::*;

const AMOUNT: u64 = 1_000;

/// Depth-first walk over every simple path from the sender.
struct Enumeration<'a> {
    net: &'a Network,
    sender: NodeIdx,
    receiver: NodeIdx,
    params: &'a RouteParams,
    visited: Vec<NodeIdx>,
    hops: Vec<(ChannelIdx, Direction)>,
    best: Option<f64>,
}

impl Enumeration<'_> {
    fn walk(&mut self, at: NodeIdx) {
        if at == self.receiver {
            if let Some(cost) = path_cost(self.net, self.sender, &self.hops, self.params) {
                if self.best.is_none_or(|b| cost < b) {
                    self.best = Some(cost);
                }
            }
            return;
        }
        for adj in self.net.adjacent(at) {
            if self.visited.contains(&adj.peer) {
                continue;
            }
            self.visited.push(adj.peer);
            self.hops.push((adj.channel, adj.dir));
            self.walk(adj.peer);
            self.hops.pop();
            self.visited.pop();
        }
    }
}

/// Cheapest cost over every simple path, or `None` when no path is usable.
fn enumerate(
    net: &Network,
    sender: NodeIdx,
    receiver: NodeIdx,
    params: &RouteParams,
) -> Option<f64> {
    let mut search = Enumeration {
        net,
        sender,
        receiver,
        params,
        visited: vec![sender],
        hops: Vec::new(),
        best: None,
    };
    search.walk(sender);
    search.best
}

/// Cost of a concrete path, `None` if some hop cannot carry its amount.
fn path_cost(
    net: &Network,
    sender: NodeIdx,
    hops: &[(ChannelIdx, Direction)],
    params: &RouteParams,
) -> Option<f64> {
    let mut inbound = AMOUNT;
    let mut weights = 0.0;
    for (pos, &(channel, dir)) in hops.iter().enumerate().rev() {
        let ch = net.channel(channel);
        let policy = ch.params(dir)?;
        let first = pos == 0;
        let usable = if first {
            ch.balance(dir) >= inbound
        } else {
            ch.capacity >= inbound
        };
        if !usable {
            return None;
        }
        debug_assert_eq!(first, ch.source(dir) == sender);
        let fee = if first { 0 } else { policy.base_fee };
        weights += fee as f64;
        inbound += fee;
    }
    Some(weights + params.penalty)
}

fn arb_network() -> impl Strategy<Value = (usize, Vec<(usize, usize, u64, ChannelParams)>)> {
    (3usize..=7).prop_flat_map(|n| {
        let edge = (
            0..n,
            0..n,
            prop::bool::weighted(0.85),
            0u64..20,
            prop::sample::select(vec![34u32, 40, 144]),
        )
            .prop_filter("no self loops", |(a, b, ..)| a != b)
            .prop_map(|(a, b, wide, base_fee, timelock_delta)| {
                let capacity = if wide { 1_000_000 } else { 600 };
                (
                    a,
                    b,
                    capacity,
                    ChannelParams {
                        base_fee,
                        fee_rate: 0.0,
                        timelock_delta,
                    },
                )
            });
        (Just(n), prop::collection::vec(edge, 1..16))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn search_matches_enumeration((n, edges) in arb_network(), s in 0usize..7, r in 0usize..7) {
        let used: std::collections::BTreeSet<usize> = edges.iter().flat_map(|(a, b, ..)| [*a, *b]).collect();
        // Nodes without channels are dropped on ingest; keep the ids stable.
        prop_assume!(used.len() == n);
        let net = common::network_from_edges(n, &edges);
        let (s, r) = (s % n, r % n);
        prop_assume!(s != r);
        let sender = net.lookup(&format!("n{s}")).unwrap();
        let receiver = net.lookup(&format!("n{r}")).unwrap();
        let params = RouteParams { risk_factor: 0.0, penalty: 100.0 };
        let probs = ConstantProbability(1.0);

        let found = find_path(&net, sender, receiver, AMOUNT, &params, &probs).unwrap();
        let expected = enumerate(&net, sender, receiver, &params);
        match (found, expected) {
            (None, None) => {}
            (Some(plan), Some(best)) => {
                prop_assert!((plan.cost - best).abs() < 1e-9, "search {} vs enumeration {}", plan.cost, best);
                prop_assert!((route_cost(&net, &plan, &params, &probs) - plan.cost).abs() < 1e-9);
                let nodes = plan.nodes();
                prop_assert_eq!(nodes.first(), Some(&sender));
                prop_assert_eq!(nodes.last(), Some(&receiver));
                let mut unique = nodes.clone();
                unique.sort();
                unique.dedup();
                prop_assert_eq!(unique.len(), nodes.len());
                prop_assert_eq!(plan.hops.last().unwrap().amount, AMOUNT);
            }
            (found, expected) => prop_assert!(false, "search {:?} vs enumeration {:?}", found.map(|p| p.cost), expected),
        }
    }
}

/// Two parallel two-hop routes; the cheaper one recently failed. Enumerating
/// both routes by hand shows the bias outweighs the fee difference.
#[test]
fn recent_failure_outweighs_cheaper_fee() {
    struct Failed(NodeIdx);
    impl lnfee::pathfinding::HopProbability for Failed {
        fn success_probability(&self, from: NodeIdx, _to: NodeIdx) -> f64 {
            if from == self.0 {
                0.1
            } else {
                0.6
            }
        }
    }
    let p = |base_fee| ChannelParams {
        base_fee,
        fee_rate: 0.0,
        timelock_delta: 40,
    };
    let edges = [
        (0, 1, 1_000_000, p(1)),
        (1, 3, 1_000_000, p(1)),
        (0, 2, 1_000_000, p(1)),
        (2, 3, 1_000_000, p(50)),
    ];
    let net = common::network_from_edges(4, &edges);
    let node = |i: usize| net.lookup(&format!("n{i}")).unwrap();
    let params = RouteParams {
        risk_factor: 0.0,
        penalty: 100.0,
    };
    // Via n1: fee 1, bias 100 / 0.1 = 1000. Via n2: fee 50, bias 100 / 0.6.
    let via_one = 1.0 + 100.0 / 0.1;
    let via_two = 50.0 + 100.0 / 0.6;
    assert!(via_two < via_one);
    let plan = find_path(&net, node(0), node(3), AMOUNT, &params, &Failed(node(1)))
        .unwrap()
        .unwrap();
    assert_eq!(plan.nodes(), vec![node(0), node(2), node(3)]);
    assert!((plan.cost - via_two).abs() < 1e-9);
}
