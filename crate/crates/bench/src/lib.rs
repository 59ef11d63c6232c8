//! Fixtures shared by the benchmarks.

use lnfee::topology::synthetic::{generate, SyntheticConfig};
use lnfee::{derive_seed, Network, NodeIdx};

/// Synthetic network with every policy filled and balances initialised.
pub fn network(nodes: usize, seed: u64) -> Network {
    let doc = generate(
        &SyntheticConfig {
            nodes,
            ..Default::default()
        },
        seed,
    );
    let (mut net, _) = Network::from_doc(doc).expect("synthetic snapshots are valid");
    net.sample_missing_params(derive_seed(seed, 0, 4))
        .expect("some policies are complete");
    net.initialize_balances(derive_seed(seed, 0, 2));
    net
}

/// `count` distinct sender/receiver pairs spread over the node range.
pub fn endpoint_pairs(net: &Network, count: usize) -> Vec<(NodeIdx, NodeIdx)> {
    let n = net.node_count() as u64;
    (0..count as u64)
        .map(|i| {
            let s = derive_seed(7, i, 0) % n;
            let r = (s + 1 + derive_seed(7, i, 1) % (n - 1)) % n;
            (NodeIdx(s as u32), NodeIdx(r as u32))
        })
        .collect()
}
