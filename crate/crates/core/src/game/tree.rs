//! Extensive-form routing game for one payment path.
//!
//! The tree has a locking phase (sender, then each intermediary chooses
//! lock / not lock) followed by an unlocking phase (receiver, then each
//! intermediary back towards the sender chooses reveal / withhold). Leaves
//! carry one utility per party, sender first and receiver last.
//!
//! [`backward_induct`] resolves the unlocking phase by plain backward
//! induction. Intermediaries cannot see past their successor, so a locking
//! decision is evaluated against the party's own success belief: the value of
//! locking is `p * u(success leaf) + (1 - p) * u(failure-after-lock leaf)`.

use serde::Serialize;
use thiserror::Error;

use super::{prefers_lock, Move};
use crate::Satoshi;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("a routing game needs at least two hops, got {0}")]
    PathTooShort(usize),
    #[error("per-hop vectors must all have length {expected}, `{field}` has {actual}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
}

/// Inputs for one path with `n` hops and `n + 1` parties.
///
/// Index `i` of each vector refers to the hop leaving party `i`; entry 0 is
/// the sender's own hop, whose fee and fraction are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub amounts: Vec<Satoshi>,
    pub fees: Vec<f64>,
    pub collaterals: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Amount delivered to the receiver.
    pub payment: Satoshi,
    /// Value of a completed payment to the sender and to the receiver.
    pub success_utility: f64,
}

impl GameSpec {
    pub fn hops(&self) -> usize {
        self.fees.len()
    }

    fn validate(&self) -> Result<(), GameError> {
        let n = self.fees.len();
        if n < 2 {
            return Err(GameError::PathTooShort(n));
        }
        for (field, len) in [
            ("amounts", self.amounts.len()),
            ("collaterals", self.collaterals.len()),
            ("fractions", self.fractions.len()),
        ] {
            if len != n {
                return Err(GameError::LengthMismatch {
                    field,
                    expected: n,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Locking,
    Unlocking,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TreeNode {
    Decision {
        player: usize,
        phase: Phase,
        children: Vec<(Move, usize)>,
    },
    Leaf {
        utilities: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameTree {
    nodes: Vec<TreeNode>,
    root: usize,
    players: usize,
}

impl GameTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn child(&self, id: usize, mv: Move) -> Option<usize> {
        match &self.nodes[id] {
            TreeNode::Decision { children, .. } => {
                children.iter().find(|(m, _)| *m == mv).map(|(_, c)| *c)
            }
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Follows a sequence of moves from the root and returns the leaf utilities.
    pub fn play(&self, moves: &[Move]) -> Option<&[f64]> {
        let mut at = self.root;
        for mv in moves {
            at = self.child(at, *mv)?;
        }
        match &self.nodes[at] {
            TreeNode::Leaf { utilities } => Some(utilities),
            TreeNode::Decision { .. } => None,
        }
    }
}

struct Builder {
    nodes: Vec<TreeNode>,
}

impl Builder {
    fn leaf(&mut self, utilities: Vec<f64>) -> usize {
        self.nodes.push(TreeNode::Leaf { utilities });
        self.nodes.len() - 1
    }

    fn decision(&mut self, player: usize, phase: Phase, children: Vec<(Move, usize)>) -> usize {
        self.nodes.push(TreeNode::Decision {
            player,
            phase,
            children,
        });
        self.nodes.len() - 1
    }
}

/// Builds the full game tree for `spec`.
pub fn build_game_tree(spec: &GameSpec) -> Result<GameTree, GameError> {
    spec.validate()?;
    let n = spec.hops();
    let players = n + 1;
    let nonrefundable = |j: usize| spec.fractions[j] * spec.fees[j];
    let paid_upfront = |upto: usize| (1..upto).map(nonrefundable).sum::<f64>();

    // Leaf when the payment fails after parties 0..k have locked and the
    // lockers' fee payments have been made; everyone downstream gets 0.
    let failed_after = |k: usize| -> Vec<f64> {
        let mut u = vec![0.0; players];
        if k == 0 {
            return u;
        }
        u[0] = -spec.collaterals[0] - paid_upfront(k);
        for (j, uj) in u.iter_mut().enumerate().take(k).skip(1) {
            *uj = nonrefundable(j) - spec.collaterals[j];
        }
        u
    };

    let mut b = Builder { nodes: Vec::new() };

    // Unlocking chain, built from the end: all-reveal leaf first.
    let mut success = vec![0.0; players];
    let total_fees: f64 = spec.fees[1..].iter().sum();
    success[0] = spec.success_utility - spec.collaterals[0] - total_fees - spec.payment as f64;
    for (j, sj) in success.iter_mut().enumerate().take(n).skip(1) {
        *sj = spec.fees[j] - spec.collaterals[j];
    }
    success[n] = spec.success_utility;
    let mut next = b.leaf(success);

    // Intermediary k withholds after the receiver and k+1..n-1 revealed.
    for k in 1..n {
        let mut u = vec![0.0; players];
        u[0] = -spec.collaterals[0] - paid_upfront(n);
        for (j, uj) in u.iter_mut().enumerate().take(n).skip(1) {
            *uj = if j > k {
                spec.fees[j] - spec.collaterals[j]
            } else {
                nonrefundable(j) - spec.collaterals[j]
            };
        }
        u[k] -= spec.amounts[k] as f64;
        u[n] = spec.success_utility;
        let withhold = b.leaf(u);
        next = b.decision(
            k,
            Phase::Unlocking,
            vec![(Move::Reveal, next), (Move::Withhold, withhold)],
        );
    }
    let receiver_withholds = b.leaf(failed_after(n));
    next = b.decision(
        n,
        Phase::Unlocking,
        vec![(Move::Reveal, next), (Move::Withhold, receiver_withholds)],
    );

    for i in (0..n).rev() {
        let refuse = b.leaf(failed_after(i));
        next = b.decision(
            i,
            Phase::Locking,
            vec![(Move::Lock, next), (Move::NotLock, refuse)],
        );
    }

    Ok(GameTree {
        root: next,
        nodes: b.nodes,
        players,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    /// Locking-phase move of parties `0..n`.
    pub locking: Vec<Move>,
    /// Expected utility of the chosen locking move under the mover's belief.
    pub locking_utility: Vec<f64>,
    /// Unlocking-phase moves as `(party, move)`, receiver first.
    pub unlocking: Vec<(usize, Move)>,
    /// Leaf reached when the profile is played out.
    pub outcome: Vec<f64>,
}

fn leaf_utilities(tree: &GameTree, id: usize) -> &[f64] {
    match tree.node(id) {
        TreeNode::Leaf { utilities } => utilities,
        TreeNode::Decision { .. } => panic!("expected a leaf"),
    }
}

type UnlockTrace = Vec<(usize, Move)>;

/// Resolves the unlocking subgame rooted at `id` by backward induction.
fn resolve_unlocking(tree: &GameTree, id: usize, trace: &mut UnlockTrace) -> usize {
    match tree.node(id) {
        TreeNode::Leaf { .. } => id,
        TreeNode::Decision {
            player, children, ..
        } => {
            // Each child is resolved with its own trace; only the chosen one is kept.
            // (move, leaf, moves below the child)
            let mut best: Option<(Move, usize, UnlockTrace)> = None;
            for (mv, child) in children {
                let mut sub = Vec::new();
                let leaf = resolve_unlocking(tree, *child, &mut sub);
                let value = leaf_utilities(tree, leaf)[*player];
                let replace = match &best {
                    None => true,
                    Some((_, best_leaf, _)) => value > leaf_utilities(tree, *best_leaf)[*player],
                };
                if replace {
                    best = Some((*mv, leaf, sub));
                }
            }
            let (mv, leaf, sub) = best.expect("decision nodes have children");
            trace.push((*player, mv));
            trace.extend(sub);
            leaf
        }
    }
}

/// Leaf reached from `id` when the payment fails right after the current
/// locker, i.e. the next party refuses (or the receiver withholds).
fn failure_leaf(tree: &GameTree, id: usize) -> usize {
    match tree.node(id) {
        TreeNode::Leaf { .. } => id,
        TreeNode::Decision {
            phase: Phase::Locking,
            ..
        } => tree.child(id, Move::NotLock).expect("locking node"),
        TreeNode::Decision {
            phase: Phase::Unlocking,
            ..
        } => tree.child(id, Move::Withhold).expect("unlocking node"),
    }
}

/// Leaf reached from `id` if everybody downstream locks and the unlocking
/// phase is played rationally.
fn success_leaf(tree: &GameTree, mut id: usize) -> usize {
    loop {
        match tree.node(id) {
            TreeNode::Decision {
                phase: Phase::Locking,
                ..
            } => id = tree.child(id, Move::Lock).expect("locking node"),
            _ => return resolve_unlocking(tree, id, &mut Vec::new()),
        }
    }
}

/// Solves `tree` given each party's success belief `beliefs[i]` (used by
/// intermediaries `1..n`) and whether each party can fund its hop.
///
/// The sender always locks: it initiated the payment.
pub fn backward_induct(tree: &GameTree, beliefs: &[f64], balance_ok: &[bool]) -> Solution {
    let mut locking = Vec::new();
    let mut locking_utility = Vec::new();
    let mut at = tree.root();
    let mut played: Option<usize> = None;

    // Every locking node is evaluated, also those a refusal makes unreachable.
    while let TreeNode::Decision {
        player,
        phase: Phase::Locking,
        ..
    } = tree.node(at)
    {
        let player = *player;
        let lock_child = tree.child(at, Move::Lock).expect("locking node");
        let refuse_leaf = tree.child(at, Move::NotLock).expect("locking node");
        let refuse_value = leaf_utilities(tree, refuse_leaf)[player];

        let (mv, value) = if player == 0 {
            (
                Move::Lock,
                leaf_utilities(tree, success_leaf(tree, lock_child))[0],
            )
        } else if !balance_ok.get(player).copied().unwrap_or(true) {
            (Move::NotLock, refuse_value)
        } else {
            let p = beliefs.get(player).copied().unwrap_or(0.0);
            let on_success = leaf_utilities(tree, success_leaf(tree, lock_child))[player];
            let on_failure = leaf_utilities(tree, failure_leaf(tree, lock_child))[player];
            let value = p * on_success + (1.0 - p) * on_failure;
            if prefers_lock(value - refuse_value) {
                (Move::Lock, value)
            } else {
                (Move::NotLock, refuse_value)
            }
        };
        locking.push(mv);
        locking_utility.push(value);
        if mv == Move::NotLock && played.is_none() {
            played = Some(refuse_leaf);
        }
        at = lock_child;
    }

    let mut unlocking = Vec::new();
    let end = resolve_unlocking(tree, at, &mut unlocking);
    let outcome = leaf_utilities(tree, played.unwrap_or(end)).to_vec();
    Solution {
        locking,
        locking_utility,
        unlocking,
        outcome,
    }
}
