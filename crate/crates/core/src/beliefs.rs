//! Failure observations and the success estimates derived from them.
//!
//! Only the most recent failure per key matters. Estimates recover towards
//! the a priori probability with a half-life that depends on who observed the
//! failure: intermediaries use the short half-life, senders the long one
//! because they see only the failures of their own payments.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathfinding::{channel_success_probability, HopProbability};
use crate::topology::{Network, NodeIdx};
use crate::Minutes;

/// Sender buffer scale: `d = BUFFER_SCALE * (1 - P)`.
pub const BUFFER_SCALE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("clock regression: recording at {time} after {latest}")]
    ClockRegression { time: Minutes, latest: Minutes },
    #[error("invalid belief parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedHop {
    pub from: NodeIdx,
    pub to: NodeIdx,
}

impl DirectedHop {
    pub fn new(from: NodeIdx, to: NodeIdx) -> Self {
        DirectedHop { from, to }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObservationKind {
    /// An intermediary forwarded over the hop and the payment failed further on.
    IntermediaryDownstreamFailure,
    /// The sender saw its payment fail after `hop.from` had locked.
    SenderPostLockFailure,
    /// The sender saw `hop.from` refuse to lock.
    SenderRefusalToLock,
}

impl ObservationKind {
    fn is_sender_kind(self) -> bool {
        !matches!(self, ObservationKind::IntermediaryDownstreamFailure)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationKey {
    pub observer: NodeIdx,
    pub hop: DirectedHop,
    pub kind: ObservationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefParams {
    pub apriori: f64,
    pub half_life_intermediary: Minutes,
    /// `half_life_sender = tau * half_life_intermediary`, with `tau > 1`.
    pub tau: f64,
}

impl Default for BeliefParams {
    fn default() -> Self {
        BeliefParams {
            apriori: 0.6,
            half_life_intermediary: 30.0,
            tau: 2.0,
        }
    }
}

impl BeliefParams {
    pub fn validate(&self) -> Result<(), BeliefError> {
        if !(0.0..=1.0).contains(&self.apriori) {
            return Err(BeliefError::InvalidParams("apriori must lie in [0, 1]"));
        }
        // Written so that NaN is rejected as well.
        if self.half_life_intermediary.is_nan() || self.half_life_intermediary <= 0.0 {
            return Err(BeliefError::InvalidParams("half-life must be positive"));
        }
        if self.tau.is_nan() || self.tau <= 1.0 {
            return Err(BeliefError::InvalidParams("tau must exceed 1"));
        }
        Ok(())
    }

    pub fn half_life_sender(&self) -> Minutes {
        self.tau * self.half_life_intermediary
    }
}

/// Last-failure times of one party.
#[derive(Clone, Debug)]
pub struct BeliefStore {
    params: BeliefParams,
    last_failure: HashMap<ObservationKey, Minutes>,
    latest: Minutes,
}

impl BeliefStore {
    pub fn new(params: BeliefParams) -> Result<Self, BeliefError> {
        params.validate()?;
        Ok(BeliefStore {
            params,
            last_failure: HashMap::new(),
            latest: f64::NEG_INFINITY,
        })
    }

    pub fn params(&self) -> &BeliefParams {
        &self.params
    }

    pub fn record_failure(
        &mut self,
        key: ObservationKey,
        time: Minutes,
    ) -> Result<(), BeliefError> {
        if time < self.latest {
            return Err(BeliefError::ClockRegression {
                time,
                latest: self.latest,
            });
        }
        self.latest = time;
        self.last_failure.insert(key, time);
        Ok(())
    }

    pub fn last_failure(&self, key: &ObservationKey) -> Option<Minutes> {
        self.last_failure.get(key).copied()
    }

    /// Success estimate for `key` at time `now`.
    pub fn success_estimate(&self, key: &ObservationKey, now: Minutes) -> f64 {
        let half_life = if key.kind.is_sender_kind() {
            self.params.half_life_sender()
        } else {
            self.params.half_life_intermediary
        };
        let elapsed = self.last_failure(key).map(|t| (now - t).max(0.0));
        channel_success_probability(elapsed, self.params.apriori, half_life)
            .expect("elapsed time is clamped to be non-negative")
    }

    /// The sender's estimate that `hop.from` will lock: P^i_S.
    pub fn lock_estimate(&self, sender: NodeIdx, hop: DirectedHop, now: Minutes) -> f64 {
        let key = ObservationKey {
            observer: sender,
            hop,
            kind: ObservationKind::SenderRefusalToLock,
        };
        self.success_estimate(&key, now)
    }

    /// Sender buffer `0.1 * (1 - P^i_S)` added on top of the break-even fraction.
    pub fn sender_buffer(&self, sender: NodeIdx, hop: DirectedHop, now: Minutes) -> f64 {
        BUFFER_SCALE * (1.0 - self.lock_estimate(sender, hop, now))
    }

    /// View used by the pathfinder: hop probabilities from the sender's
    /// refusal observations at time `now`.
    pub fn route_view(&self, sender: NodeIdx, now: Minutes) -> RouteView<'_> {
        RouteView {
            store: self,
            sender,
            now,
        }
    }

    pub fn len(&self) -> usize {
        self.last_failure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_failure.is_empty()
    }

    /// Debug dump, sorted by key, with node identifiers resolved.
    pub fn dump_json(&self, network: &Network) -> serde_json::Value {
        let mut entries: Vec<_> = self.last_failure.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        serde_json::Value::Array(
            entries
                .into_iter()
                .map(|(key, time)| {
                    serde_json::json!({
                        "observer": network.node_id(key.observer).as_str(),
                        "from": network.node_id(key.hop.from).as_str(),
                        "to": network.node_id(key.hop.to).as_str(),
                        "kind": key.kind,
                        "last_failure_time": time,
                    })
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RouteView<'a> {
    store: &'a BeliefStore,
    sender: NodeIdx,
    now: Minutes,
}

impl HopProbability for RouteView<'_> {
    fn success_probability(&self, from: NodeIdx, to: NodeIdx) -> f64 {
        self.store
            .lock_estimate(self.sender, DirectedHop::new(from, to), self.now)
    }
}
