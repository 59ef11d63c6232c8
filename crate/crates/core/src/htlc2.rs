//! Conditional payments that make non-refundable fees enforceable.
//!
//! Besides the main payment, the source sends one small fee payment per
//! intermediary `v_i`, routed through `v_1..v_{i-1}` and locked on `h(r_i)`
//! for a source-chosen secret `r_i`. Every main contract in channel
//! `(v_i, v_{i+1})` needs two preimages: the receiver's `r` and `r_i`. The
//! successor learns `r_i` from its onion payload and hands it back as soon as
//! the main contract is locked, which lets `v_i` claim its fee before it
//! forwards anything.
//!
//! Hashing is simulated: a lock is a bijective mix of the token, so two
//! different tokens never share a lock.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathfinding::PathPlan;
use crate::{round_sat, Satoshi};

mod engine;

pub use engine::{
    adversary_run, trace_jsonl, AdversaryReport, EventKind, Htlc2Scenario, PartyReport,
    PaymentStatus, Script, TraceEvent,
};

#[derive(Debug, Error, PartialEq)]
pub enum Htlc2Error {
    #[error("a path needs at least one hop")]
    EmptyPath,
    #[error("expected {expected} fractions, got {actual}")]
    FractionCount { expected: usize, actual: usize },
    #[error("fraction {0} lies outside [0, 1]")]
    FractionRange(f64),
    #[error("script position {at} is outside 1..={receiver}")]
    ScriptPosition { at: usize, receiver: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Preimage(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HashLock(pub u64);

impl Preimage {
    pub fn lock(self) -> HashLock {
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        HashLock(z ^ (z >> 31))
    }
}

pub fn verify(lock: HashLock, preimage: Preimage) -> bool {
    preimage.lock() == lock
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractRole {
    Main,
    Fee { beneficiary: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractState {
    Pending,
    Claimed,
    Cancelled,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClaimError {
    #[error("contract is no longer pending")]
    NotPending,
    #[error("missing preimage for one of the locks")]
    MissingPreimage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Htlc2Contract {
    pub id: u32,
    pub payment: usize,
    /// Position of the channel on the path; channel `i` joins `v_i` and `v_{i+1}`.
    pub channel: usize,
    pub amount: Satoshi,
    pub locks: Vec<HashLock>,
    pub timelock: u32,
    pub role: ContractRole,
    pub state: ContractState,
}

impl Htlc2Contract {
    /// Claims the contract if every lock is opened by one of `preimages`.
    pub fn claim(&mut self, preimages: &[Preimage]) -> Result<(), ClaimError> {
        if self.state != ContractState::Pending {
            return Err(ClaimError::NotPending);
        }
        if !self
            .locks
            .iter()
            .all(|l| preimages.iter().any(|p| verify(*l, *p)))
        {
            return Err(ClaimError::MissingPreimage);
        }
        self.state = ContractState::Claimed;
        Ok(())
    }

    pub fn cancel(&mut self) -> bool {
        if self.state == ContractState::Pending {
            self.state = ContractState::Cancelled;
            true
        } else {
            false
        }
    }
}

/// Per-hop payloads. Node `v_{i+1}` can read only its own entry, `r_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnionPayload {
    entries: BTreeMap<usize, Preimage>,
}

impl OnionPayload {
    pub fn open(&self, reader: usize) -> Option<Preimage> {
        self.entries.get(&reader).copied()
    }

    /// Replaces the entry of `reader` with a token that fails verification.
    pub fn corrupt(&mut self, reader: usize) {
        if let Some(p) = self.entries.get_mut(&reader) {
            p.0 ^= 1;
        }
    }
}

/// Amount, fee and timelock data of a path, independent of any network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub amount: Satoshi,
    /// Fee of the node forwarding each hop; entry 0 is the source's and is ignored.
    pub fees: Vec<Satoshi>,
    pub timelocks: Vec<u32>,
}

impl PathSpec {
    pub fn hops(&self) -> usize {
        self.fees.len()
    }

    pub fn from_plan(plan: &PathPlan) -> Self {
        PathSpec {
            amount: plan.amount,
            fees: plan.hops.iter().map(|h| h.fee).collect(),
            timelocks: plan.hops.iter().map(|h| h.cumulative_timelock).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeePlan {
    pub beneficiary: usize,
    pub amount: Satoshi,
    pub lock: HashLock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentSetup {
    /// Amount of the main contract in each channel.
    pub main_amounts: Vec<Satoshi>,
    pub main_locks: Vec<Vec<HashLock>>,
    pub timelocks: Vec<u32>,
    /// Fee payments for `v_1..v_{n-1}`, in order.
    pub fee_plans: Vec<FeePlan>,
    pub onion: OnionPayload,
    /// `r_0..r_{n-1}`, known to the source.
    pub source_secrets: Vec<Preimage>,
    /// `r`, known to the receiver.
    pub receiver_secret: Preimage,
}

impl PaymentSetup {
    pub fn fee_amount(&self, beneficiary: usize) -> Satoshi {
        self.fee_plans
            .iter()
            .find(|f| f.beneficiary == beneficiary)
            .map_or(0, |f| f.amount)
    }
}

/// Plans the main and fee payments for `path` with non-refundable fractions
/// `fractions` (one per hop, entry 0 ignored). A single-hop path yields a
/// plain contract locked on `h(r)` only.
pub fn setup_payment(
    path: &PathSpec,
    fractions: &[f64],
    seed: u64,
) -> Result<PaymentSetup, Htlc2Error> {
    let n = path.hops();
    if n == 0 || path.timelocks.len() != n {
        return Err(Htlc2Error::EmptyPath);
    }
    if fractions.len() != n {
        return Err(Htlc2Error::FractionCount {
            expected: n,
            actual: fractions.len(),
        });
    }
    if let Some(x) = fractions.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Htlc2Error::FractionRange(*x));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<u64> = Vec::with_capacity(n + 1);
    while tokens.len() < n + 1 {
        let t: u64 = rng.gen();
        if !tokens.contains(&t) && !tokens.contains(&(t ^ 1)) {
            tokens.push(t);
        }
    }
    let receiver_secret = Preimage(tokens[n]);
    let source_secrets: Vec<Preimage> = tokens[..n].iter().map(|t| Preimage(*t)).collect();

    let nonrefundable: Vec<Satoshi> = (0..n)
        .map(|i| {
            if i == 0 {
                0
            } else {
                round_sat(fractions[i] * path.fees[i] as f64)
            }
        })
        .collect();
    let mut main_amounts = vec![0; n];
    main_amounts[n - 1] = path.amount;
    for i in (0..n - 1).rev() {
        main_amounts[i] = main_amounts[i + 1] + path.fees[i + 1] - nonrefundable[i + 1];
    }

    let payment_lock = receiver_secret.lock();
    let (main_locks, fee_plans, entries) = if n == 1 {
        (vec![vec![payment_lock]], Vec::new(), BTreeMap::new())
    } else {
        let locks = (0..n)
            .map(|i| vec![payment_lock, source_secrets[i].lock()])
            .collect();
        let plans = (1..n)
            .map(|i| FeePlan {
                beneficiary: i,
                amount: nonrefundable[i],
                lock: source_secrets[i].lock(),
            })
            .collect();
        let entries = (0..n).map(|i| (i + 1, source_secrets[i])).collect();
        (locks, plans, entries)
    };

    Ok(PaymentSetup {
        main_amounts,
        main_locks,
        timelocks: path.timelocks.clone(),
        fee_plans,
        onion: OnionPayload { entries },
        source_secrets,
        receiver_secret,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Htlc2ChannelState {
    pub open: bool,
    pub pending: Vec<u32>,
    /// Main contracts whose fee preimage has not been verified yet.
    pub unconfirmed: usize,
}

impl Htlc2ChannelState {
    pub fn new() -> Self {
        Htlc2ChannelState {
            open: true,
            pending: Vec::new(),
            unconfirmed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelEvent {
    /// A main contract is offered; plain single-lock contracts need no confirmation.
    OfferMain { needs_confirmation: bool },
    /// The fee preimage of an unconfirmed main contract was verified.
    Confirm,
    /// An unconfirmed main contract is dropped without a verdict (payment aborted).
    Release,
    /// The successor missed the deadline for an unconfirmed main contract.
    DeadlineExpired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    Rejected,
    Closed,
}

/// Applies the channel rules: at most one unconfirmed main contract, and
/// closure when a successor misses its deadline.
pub fn enforce_rules(state: &mut Htlc2ChannelState, event: ChannelEvent) -> Verdict {
    if !state.open {
        return Verdict::Closed;
    }
    match event {
        ChannelEvent::OfferMain { needs_confirmation } => {
            if !needs_confirmation {
                Verdict::Accepted
            } else if state.unconfirmed >= 1 {
                Verdict::Rejected
            } else {
                state.unconfirmed += 1;
                Verdict::Accepted
            }
        }
        ChannelEvent::Confirm | ChannelEvent::Release => {
            state.unconfirmed = state.unconfirmed.saturating_sub(1);
            Verdict::Accepted
        }
        ChannelEvent::DeadlineExpired => {
            state.open = false;
            state.unconfirmed = 0;
            Verdict::Closed
        }
    }
}
