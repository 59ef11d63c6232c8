//! Channel graph: snapshot ingestion, missing-policy sampling and balance
//! initialization.
//!
//! A [`Network`] owns its nodes and channels. Nodes are stored sorted by their
//! [`NodeId`], so a [`NodeIdx`] orders the same way the identifiers do; the
//! pathfinder relies on that for deterministic tie-breaking.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Satoshi;

pub mod synthetic;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed snapshot at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("failed to read snapshot: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot contains no usable channels")]
    EmptyNetwork,
    #[error("no channel policy is complete; cannot derive parameter distributions")]
    NoCompletePolicy,
}

/// Opaque, non-empty node identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    /// Returns `None` for the empty string.
    pub fn new(id: impl Into<String>) -> Option<Self> {
        let id = id.into();
        (!id.is_empty()).then_some(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dense index of a node inside one [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIdx(pub u32);

impl NodeIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of a channel inside one [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelIdx(pub u32);

impl ChannelIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Which side of a channel forwards: `Forward` is node1 → node2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn slot(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Backward => 1,
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Complete forwarding policy of one channel direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub base_fee: Satoshi,
    /// Proportional fee, a fraction in `[0, 1)`.
    pub fee_rate: f64,
    pub timelock_delta: u32,
}

/// Policy as announced; any field may be missing until
/// [`Network::sample_missing_params`] fills it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelPolicy {
    pub base_fee: Option<Satoshi>,
    pub fee_rate: Option<f64>,
    pub timelock_delta: Option<u32>,
}

impl ChannelPolicy {
    pub fn complete(params: ChannelParams) -> Self {
        ChannelPolicy {
            base_fee: Some(params.base_fee),
            fee_rate: Some(params.fee_rate),
            timelock_delta: Some(params.timelock_delta),
        }
    }

    pub fn params(&self) -> Option<ChannelParams> {
        Some(ChannelParams {
            base_fee: self.base_fee?,
            fee_rate: self.fee_rate?,
            timelock_delta: self.timelock_delta?,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.params().is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub id: String,
    pub node1: NodeIdx,
    pub node2: NodeIdx,
    pub capacity: Satoshi,
    policies: [ChannelPolicy; 2],
    /// Balance held by node1. The node2 side is always `capacity - node1_balance`.
    node1_balance: Satoshi,
}

impl Channel {
    pub fn policy(&self, dir: Direction) -> &ChannelPolicy {
        &self.policies[dir.slot()]
    }

    pub fn params(&self, dir: Direction) -> Option<ChannelParams> {
        self.policies[dir.slot()].params()
    }

    /// Spendable balance of the forwarding side of `dir`.
    pub fn balance(&self, dir: Direction) -> Satoshi {
        match dir {
            Direction::Forward => self.node1_balance,
            Direction::Backward => self.capacity - self.node1_balance,
        }
    }

    pub fn source(&self, dir: Direction) -> NodeIdx {
        match dir {
            Direction::Forward => self.node1,
            Direction::Backward => self.node2,
        }
    }

    pub fn target(&self, dir: Direction) -> NodeIdx {
        self.source(dir.reverse())
    }

    /// Moves `amount` from the forwarding side of `dir` to the other side.
    /// Returns `false` and leaves the channel untouched if the sender lacks it.
    pub fn transfer(&mut self, dir: Direction, amount: Satoshi) -> bool {
        if self.balance(dir) < amount {
            return false;
        }
        match dir {
            Direction::Forward => self.node1_balance -= amount,
            Direction::Backward => self.node1_balance += amount,
        }
        true
    }

    /// Direction in which `from` forwards over this channel, if it is an endpoint.
    pub fn direction_from(&self, from: NodeIdx) -> Option<Direction> {
        if from == self.node1 {
            Some(Direction::Forward)
        } else if from == self.node2 {
            Some(Direction::Backward)
        } else {
            None
        }
    }
}

/// One outgoing half of a channel as seen from a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Adjacency {
    pub channel: ChannelIdx,
    pub dir: Direction,
    pub peer: NodeIdx,
}

/// Counters for everything ingestion had to drop or repair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub duplicate_nodes: usize,
    pub duplicate_channels: usize,
    pub unknown_endpoint_channels: usize,
    pub self_loop_channels: usize,
    pub zero_capacity_channels: usize,
    pub invalid_policy_fields: usize,
    pub isolated_nodes: usize,
}

impl IngestReport {
    pub fn warnings(&self) -> usize {
        self.duplicate_nodes
            + self.duplicate_channels
            + self.unknown_endpoint_channels
            + self.self_loop_channels
            + self.zero_capacity_channels
            + self.invalid_policy_fields
            + self.isolated_nodes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    nodes: Vec<NodeId>,
    lookup: HashMap<NodeId, NodeIdx>,
    channels: Vec<Channel>,
    adjacency: Vec<Vec<Adjacency>>,
}

// Snapshot document schema.

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub nodes: Vec<SnapshotNode>,
    pub channels: Vec<SnapshotChannel>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotChannel {
    pub id: String,
    pub node1: String,
    pub node2: String,
    pub capacity_sat: u64,
    pub node1_policy: SnapshotPolicy,
    pub node2_policy: SnapshotPolicy,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct SnapshotPolicy {
    #[serde(default)]
    pub base_fee_sat: Option<f64>,
    #[serde(default)]
    pub fee_rate: Option<f64>,
    #[serde(default)]
    pub timelock_delta: Option<i64>,
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut line_start = 0;
    for (i, b) in text.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(text.len())
}

impl SnapshotPolicy {
    fn into_policy(self, report: &mut IngestReport) -> ChannelPolicy {
        let base_fee = match self.base_fee_sat {
            Some(b) if b.is_finite() && b >= 0.0 => Some((b + 0.5).floor() as Satoshi),
            Some(_) => {
                report.invalid_policy_fields += 1;
                None
            }
            None => None,
        };
        let fee_rate = match self.fee_rate {
            Some(r) if r.is_finite() && (0.0..1.0).contains(&r) => Some(r),
            Some(_) => {
                report.invalid_policy_fields += 1;
                None
            }
            None => None,
        };
        let timelock_delta = match self.timelock_delta {
            Some(t) if t > 0 && t <= u32::MAX as i64 => Some(t as u32),
            Some(_) => {
                report.invalid_policy_fields += 1;
                None
            }
            None => None,
        };
        ChannelPolicy {
            base_fee,
            fee_rate,
            timelock_delta,
        }
    }

    fn from_policy(policy: &ChannelPolicy) -> Self {
        SnapshotPolicy {
            base_fee_sat: policy.base_fee.map(|b| b as f64),
            fee_rate: policy.fee_rate,
            timelock_delta: policy.timelock_delta.map(i64::from),
        }
    }
}

impl Network {
    /// Parses a snapshot document and applies the cleanup rules: duplicate
    /// nodes and channels keep their first occurrence, channels with unknown
    /// endpoints, self loops or zero capacity are dropped, out-of-range policy
    /// fields become missing, and nodes left without channels are dropped.
    ///
    /// Balances start split evenly (node1 holds the floor half) until
    /// [`Network::initialize_balances`] runs.
    pub fn ingest_snapshot<R: Read>(
        mut source: R,
    ) -> Result<(Network, IngestReport), TopologyError> {
        let mut text = Vec::new();
        source.read_to_end(&mut text)?;
        let doc: SnapshotDoc = serde_json::from_slice(&text).map_err(|e| TopologyError::Parse {
            offset: byte_offset(&text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: SnapshotDoc) -> Result<(Network, IngestReport), TopologyError> {
        let mut report = IngestReport::default();

        let mut known: HashSet<String> = HashSet::new();
        for node in &doc.nodes {
            if node.id.is_empty() || !known.insert(node.id.clone()) {
                report.duplicate_nodes += 1;
            }
        }

        struct Pending {
            id: String,
            node1: String,
            node2: String,
            capacity: Satoshi,
            policies: [ChannelPolicy; 2],
        }

        let mut seen_channels = HashSet::new();
        let mut pending = Vec::new();
        for ch in doc.channels {
            if !seen_channels.insert(ch.id.clone()) {
                report.duplicate_channels += 1;
                continue;
            }
            if !known.contains(&ch.node1) || !known.contains(&ch.node2) {
                report.unknown_endpoint_channels += 1;
                continue;
            }
            if ch.node1 == ch.node2 {
                report.self_loop_channels += 1;
                continue;
            }
            if ch.capacity_sat == 0 {
                report.zero_capacity_channels += 1;
                continue;
            }
            let policies = [
                ch.node1_policy.into_policy(&mut report),
                ch.node2_policy.into_policy(&mut report),
            ];
            pending.push(Pending {
                id: ch.id,
                node1: ch.node1,
                node2: ch.node2,
                capacity: ch.capacity_sat,
                policies,
            });
        }

        let connected: HashSet<&str> = pending
            .iter()
            .flat_map(|p| [p.node1.as_str(), p.node2.as_str()])
            .collect();
        report.isolated_nodes = known.len() - connected.len();

        let mut ids: Vec<NodeId> = connected
            .into_iter()
            .map(|s| NodeId(s.to_owned()))
            .collect();
        ids.sort();

        if pending.is_empty() {
            return Err(TopologyError::EmptyNetwork);
        }

        let lookup: HashMap<NodeId, NodeIdx> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), NodeIdx(i as u32)))
            .collect();
        let resolve = |s: &str| lookup[&NodeId(s.to_owned())];

        let channels = pending
            .into_iter()
            .map(|p| Channel {
                node1: resolve(&p.node1),
                node2: resolve(&p.node2),
                id: p.id,
                capacity: p.capacity,
                policies: p.policies,
                node1_balance: p.capacity / 2,
            })
            .collect();

        Ok((Network::assemble(ids, lookup, channels), report))
    }

    fn assemble(
        nodes: Vec<NodeId>,
        lookup: HashMap<NodeId, NodeIdx>,
        channels: Vec<Channel>,
    ) -> Network {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, ch) in channels.iter().enumerate() {
            let idx = ChannelIdx(i as u32);
            adjacency[ch.node1.index()].push(Adjacency {
                channel: idx,
                dir: Direction::Forward,
                peer: ch.node2,
            });
            adjacency[ch.node2.index()].push(Adjacency {
                channel: idx,
                dir: Direction::Backward,
                peer: ch.node1,
            });
        }
        Network {
            nodes,
            lookup,
            channels,
            adjacency,
        }
    }

    /// Serializes back into the snapshot schema. Balances are not part of it.
    pub fn to_snapshot(&self) -> SnapshotDoc {
        SnapshotDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| SnapshotNode { id: n.0.clone() })
                .collect(),
            channels: self
                .channels
                .iter()
                .map(|c| SnapshotChannel {
                    id: c.id.clone(),
                    node1: self.nodes[c.node1.index()].0.clone(),
                    node2: self.nodes[c.node2.index()].0.clone(),
                    capacity_sat: c.capacity,
                    node1_policy: SnapshotPolicy::from_policy(&c.policies[0]),
                    node2_policy: SnapshotPolicy::from_policy(&c.policies[1]),
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn node_id(&self, idx: NodeIdx) -> &NodeId {
        &self.nodes[idx.index()]
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn lookup(&self, id: &str) -> Option<NodeIdx> {
        self.lookup.get(&NodeId(id.to_owned())).copied()
    }

    pub fn channel(&self, idx: ChannelIdx) -> &Channel {
        &self.channels[idx.index()]
    }

    pub fn channel_mut(&mut self, idx: ChannelIdx) -> &mut Channel {
        &mut self.channels[idx.index()]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn adjacent(&self, node: NodeIdx) -> &[Adjacency] {
        &self.adjacency[node.index()]
    }

    pub fn is_complete(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.policies.iter().all(ChannelPolicy::is_complete))
    }

    /// Fills every missing policy field by resampling, with replacement, from
    /// the values announced by other channel directions. The three fields are
    /// drawn independently of each other.
    pub fn sample_missing_params(&mut self, seed: u64) -> Result<(), TopologyError> {
        if self.is_complete() {
            return Ok(());
        }
        let policies = || self.channels.iter().flat_map(|c| c.policies.iter());
        if !policies().any(ChannelPolicy::is_complete) {
            return Err(TopologyError::NoCompletePolicy);
        }
        let base_pool: Vec<Satoshi> = policies().filter_map(|p| p.base_fee).collect();
        let rate_pool: Vec<f64> = policies().filter_map(|p| p.fee_rate).collect();
        let delta_pool: Vec<u32> = policies().filter_map(|p| p.timelock_delta).collect();

        let incomplete = policies().filter(|p| !p.is_complete()).count();
        log::debug!("sampling missing policy fields for {incomplete} channel directions");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ch in &mut self.channels {
            for policy in &mut ch.policies {
                if policy.base_fee.is_none() {
                    policy.base_fee = base_pool.choose(&mut rng).copied();
                }
                if policy.fee_rate.is_none() {
                    policy.fee_rate = rate_pool.choose(&mut rng).copied();
                }
                if policy.timelock_delta.is_none() {
                    policy.timelock_delta = delta_pool.choose(&mut rng).copied();
                }
            }
        }
        Ok(())
    }

    /// Draws node1's balance uniformly from `[0, capacity]` for every channel.
    pub fn initialize_balances(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ch in &mut self.channels {
            ch.node1_balance = rng.gen_range(0..=ch.capacity);
        }
    }

    /// Sets the balance `from` holds in `channel`. Used to stage scenarios.
    pub fn set_balance(&mut self, channel: ChannelIdx, from: NodeIdx, balance: Satoshi) -> bool {
        let ch = &mut self.channels[channel.index()];
        if balance > ch.capacity {
            return false;
        }
        match ch.direction_from(from) {
            Some(Direction::Forward) => ch.node1_balance = balance,
            Some(Direction::Backward) => ch.node1_balance = ch.capacity - balance,
            None => return false,
        }
        true
    }

    /// Every channel between `a` and `b`, in either orientation.
    pub fn channels_between(&self, a: NodeIdx, b: NodeIdx) -> impl Iterator<Item = Adjacency> + '_ {
        self.adjacency[a.index()]
            .iter()
            .copied()
            .filter(move |adj| adj.peer == b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy_json(b: &str, r: &str, t: &str) -> String {
        format!(r#"{{"base_fee_sat":{b},"fee_rate":{r},"timelock_delta":{t}}}"#)
    }

    fn chan(id: &str, a: &str, b: &str, cap: u64, p1: &str, p2: &str) -> String {
        format!(
            r#"{{"id":"{id}","node1":"{a}","node2":"{b}","capacity_sat":{cap},"node1_policy":{p1},"node2_policy":{p2}}}"#
        )
    }

    fn doc(nodes: &[&str], channels: &[String]) -> String {
        let nodes: Vec<String> = nodes.iter().map(|n| format!(r#"{{"id":"{n}"}}"#)).collect();
        format!(
            r#"{{"nodes":[{}],"channels":[{}]}}"#,
            nodes.join(","),
            channels.join(",")
        )
    }

    fn full() -> String {
        policy_json("1", "0.0001", "40")
    }

    #[test]
    fn ingest_maps_nodes_and_channels() {
        let text = doc(
            &["a", "b", "c"],
            &[
                chan("ab", "a", "b", 100, &full(), &full()),
                chan("bc", "b", "c", 200, &full(), &full()),
            ],
        );
        let (net, report) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.channel_count(), 2);
        assert_eq!(report.warnings(), 0);
        let b = net.lookup("b").unwrap();
        assert_eq!(net.adjacent(b).len(), 2);
    }

    #[test]
    fn unknown_endpoint_channel_is_dropped() {
        let text = doc(
            &["a", "b"],
            &[
                chan("ab", "a", "b", 100, &full(), &full()),
                chan("ax", "a", "x", 100, &full(), &full()),
            ],
        );
        let (net, report) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert_eq!(net.channel_count(), 1);
        assert_eq!(report.unknown_endpoint_channels, 1);
    }

    #[test]
    fn isolated_node_is_dropped() {
        let text = doc(
            &["a", "b", "lonely"],
            &[chan("ab", "a", "b", 100, &full(), &full())],
        );
        let (net, report) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert_eq!(net.node_count(), 2);
        assert!(net.lookup("lonely").is_none());
        assert_eq!(report.isolated_nodes, 1);
    }

    #[test]
    fn duplicates_keep_first_occurrence() {
        let text = doc(
            &["a", "b", "a"],
            &[
                chan("ab", "a", "b", 100, &full(), &full()),
                chan("ab", "a", "b", 999, &full(), &full()),
            ],
        );
        let (net, report) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert_eq!(net.channel_count(), 1);
        assert_eq!(net.channels()[0].capacity, 100);
        assert_eq!(report.duplicate_nodes, 1);
        assert_eq!(report.duplicate_channels, 1);
    }

    #[test]
    fn malformed_document_reports_offset() {
        let text = "{\"nodes\": [\n  {\"id\": \"a\"},\n  oops\n]}";
        match Network::ingest_snapshot(text.as_bytes()) {
            Err(TopologyError::Parse { offset, .. }) => {
                assert_eq!(&text[offset..offset + 1], "o");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_network_is_distinct_error() {
        let text = doc(&["a"], &[]);
        assert!(matches!(
            Network::ingest_snapshot(text.as_bytes()),
            Err(TopologyError::EmptyNetwork)
        ));
    }

    #[test]
    fn out_of_range_policy_becomes_missing() {
        let bad = policy_json("-3", "1.5", "0");
        let text = doc(&["a", "b"], &[chan("ab", "a", "b", 100, &bad, &full())]);
        let (net, report) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert_eq!(report.invalid_policy_fields, 3);
        assert_eq!(
            *net.channels()[0].policy(Direction::Forward),
            ChannelPolicy::default()
        );
    }

    #[test]
    fn sampling_complete_network_is_noop() {
        let text = doc(&["a", "b"], &[chan("ab", "a", "b", 100, &full(), &full())]);
        let (mut net, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        let before = net.clone();
        net.sample_missing_params(3).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn sampling_single_donor_value() {
        let missing_rate = policy_json("1", "null", "40");
        let text = doc(
            &["a", "b"],
            &[chan("ab", "a", "b", 100, &full(), &missing_rate)],
        );
        let (mut net, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        net.sample_missing_params(11).unwrap();
        assert_eq!(
            net.channels()[0]
                .params(Direction::Backward)
                .unwrap()
                .fee_rate,
            0.0001
        );
    }

    #[test]
    fn sampling_without_donors_fails() {
        let partial = policy_json("1", "null", "40");
        let text = doc(
            &["a", "b"],
            &[chan("ab", "a", "b", 100, &partial, &partial)],
        );
        let (mut net, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        assert!(matches!(
            net.sample_missing_params(0),
            Err(TopologyError::NoCompletePolicy)
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let empty = policy_json("null", "null", "null");
        let mut channels = vec![chan(
            "c0",
            "n0",
            "n1",
            100,
            &policy_json("2", "0.0003", "144"),
            &full(),
        )];
        for i in 1..=10 {
            channels.push(chan(
                &format!("c{i}"),
                "n0",
                &format!("n{}", i + 1),
                100,
                &empty,
                &empty,
            ));
        }
        let nodes: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
        let node_refs: Vec<&str> = nodes.iter().map(String::as_str).collect();
        let text = doc(&node_refs, &channels);
        let (mut a, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        let mut b = a.clone();
        a.sample_missing_params(42).unwrap();
        b.sample_missing_params(42).unwrap();
        assert_eq!(a, b);
        assert!(a.is_complete());
    }

    #[test]
    fn balance_complement() {
        let text = doc(&["a", "b"], &[chan("ab", "a", "b", 100, &full(), &full())]);
        let (mut net, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        let a = net.lookup("a").unwrap();
        assert!(net.set_balance(ChannelIdx(0), a, 37));
        let ch = &net.channels()[0];
        assert_eq!(
            (
                ch.balance(Direction::Forward),
                ch.balance(Direction::Backward)
            ),
            (37, 63)
        );
    }

    #[test]
    fn balances_deterministic_and_bounded() {
        let text = doc(
            &["a", "b", "c"],
            &[
                chan("ab", "a", "b", 100, &full(), &full()),
                chan("bc", "b", "c", 7, &full(), &full()),
            ],
        );
        let (mut a, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        let mut b = a.clone();
        a.initialize_balances(5);
        b.initialize_balances(5);
        assert_eq!(a, b);
        for ch in a.channels() {
            assert_eq!(
                ch.balance(Direction::Forward) + ch.balance(Direction::Backward),
                ch.capacity
            );
        }
    }

    #[test]
    fn transfer_refuses_overdraft() {
        let text = doc(&["a", "b"], &[chan("ab", "a", "b", 100, &full(), &full())]);
        let (mut net, _) = Network::ingest_snapshot(text.as_bytes()).unwrap();
        let ch = net.channel_mut(ChannelIdx(0));
        assert!(!ch.transfer(Direction::Forward, 51));
        assert!(ch.transfer(Direction::Forward, 50));
        assert_eq!(ch.balance(Direction::Backward), 100);
    }
}
