#![allow(dead_code)]

use lnfee::game::{
    choose_fraction, collateral_cost, FeeModel, GameSpec, HopEconomics, SenderEstimate,
};
use lnfee::pathfinding::hop_fee;
use lnfee::topology::synthetic::{generate, SyntheticConfig};
use lnfee::topology::{ChannelIdx, SnapshotChannel, SnapshotDoc, SnapshotNode, SnapshotPolicy};
use lnfee::{ChannelParams, Network};
use rand::Rng;

/// Seeded synthetic network used by the simulation checks.
pub fn desk_network() -> Network {
    let doc = generate(
        &SyntheticConfig {
            nodes: 600,
            ..Default::default()
        },
        42,
    );
    let (mut net, _) = Network::from_doc(doc).expect("synthetic snapshot is valid");
    net.sample_missing_params(43)
        .expect("some policies are complete");
    net
}

/// Builds a network from `(a, b, capacity, params)` edges over nodes
/// `n0..n{count}`. Each side holds half of the capacity.
pub fn network_from_edges(count: usize, edges: &[(usize, usize, u64, ChannelParams)]) -> Network {
    let policy = |p: &ChannelParams| SnapshotPolicy {
        base_fee_sat: Some(p.base_fee as f64),
        fee_rate: Some(p.fee_rate),
        timelock_delta: Some(p.timelock_delta as i64),
    };
    let doc = SnapshotDoc {
        nodes: (0..count)
            .map(|i| SnapshotNode {
                id: format!("n{i}"),
            })
            .collect(),
        channels: edges
            .iter()
            .enumerate()
            .map(|(i, (a, b, cap, p))| SnapshotChannel {
                id: format!("c{i}"),
                node1: format!("n{a}"),
                node2: format!("n{b}"),
                capacity_sat: *cap,
                node1_policy: policy(p),
                node2_policy: policy(p),
            })
            .collect(),
    };
    let (mut net, _) = Network::from_doc(doc).expect("valid edge list");
    for i in 0..net.channel_count() {
        let ch = ChannelIdx(i as u32);
        let (node1, cap) = (net.channel(ch).node1, net.channel(ch).capacity);
        net.set_balance(ch, node1, cap / 2);
    }
    net
}

/// One random routing game together with the per-hop inputs the
/// closed-form lock rule needs.
pub struct GameCase {
    pub model: FeeModel,
    pub spec: GameSpec,
    pub econs: Vec<HopEconomics>,
    pub beliefs: Vec<f64>,
    pub balance_ok: Vec<bool>,
}

fn random_belief(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..8) {
        0 => 0.0,
        1 => 1.0,
        2 => 0.6,
        _ => rng.gen_range(0.0..=1.0),
    }
}

/// Random path of `2..=max_hops` hops with fees, collaterals, fractions and
/// beliefs drawn over realistic ranges.
pub fn random_game(rng: &mut impl Rng, max_hops: usize) -> GameCase {
    let n = rng.gen_range(2..=max_hops);
    let model = FeeModel::ALL[rng.gen_range(0..3)];
    let risk = 10f64.powf(rng.gen_range(-9.0..-4.5));
    let payment = rng.gen_range(1_000..200_000u64);

    // Walk back from the receiver so that amounts follow the fee recurrence.
    let mut amounts = vec![0u64; n];
    let mut fees = vec![0u64; n];
    let mut timelocks = vec![0u32; n];
    let mut inbound = payment;
    let mut cumulative = 0u32;
    for j in (0..n).rev() {
        let params = ChannelParams {
            base_fee: rng.gen_range(0..6),
            fee_rate: [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 5e-3][rng.gen_range(0..6)],
            timelock_delta: [34, 40, 80, 144][rng.gen_range(0..4)],
        };
        cumulative += params.timelock_delta;
        amounts[j] = inbound;
        timelocks[j] = cumulative;
        if j > 0 {
            fees[j] = hop_fee(&params, inbound);
            inbound += fees[j];
        }
    }

    let mut econs = Vec::with_capacity(n);
    for j in 0..n {
        let econ = HopEconomics {
            fee: fees[j],
            collateral_cost: collateral_cost(timelocks[j], amounts[j], risk),
            nonrefundable_fraction: 0.0,
            amount: amounts[j],
            cumulative_timelock: timelocks[j],
        };
        let x = if j == 0 {
            0.0
        } else {
            let estimate = SenderEstimate {
                p_tilde: random_belief(rng),
                buffer: 0.1 * (1.0 - random_belief(rng)),
            };
            choose_fraction(model, &econ, estimate).x
        };
        econs.push(econ.with_fraction(x));
    }

    let spec = GameSpec {
        amounts,
        fees: fees.iter().map(|&f| f as f64).collect(),
        collaterals: econs.iter().map(|e| e.collateral_cost).collect(),
        fractions: econs.iter().map(|e| e.nonrefundable_fraction).collect(),
        payment,
        success_utility: 2.0 * inbound as f64 + 1_000.0,
    };
    let beliefs = (0..=n).map(|_| random_belief(rng)).collect();
    let balance_ok = (0..=n).map(|_| rng.gen_bool(0.9)).collect();
    GameCase {
        model,
        spec,
        econs,
        beliefs,
        balance_ok,
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for &k in &order[i..=j] {
                out[k] = rank;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
