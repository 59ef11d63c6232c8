//! Payment channel network simulator for comparing refundable and
//! non-refundable routing fees.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] loads and prepares the channel graph,
//! * [`pathfinding`] is an LND-style cheapest-path search,
//! * [`beliefs`] tracks per-party failure observations,
//! * [`game`] holds the lock/unlock utilities, fee-fraction rules and a
//!   game-tree evaluator,
//! * [`sim`] executes payment sequences and aggregates metrics,
//! * [`probe`] runs balance-probing attacks and prices them,
//! * [`htlc2`] is a message-level model of the two-preimage conditional
//!   payment protocol that makes non-refundable fees enforceable.

pub mod beliefs;
pub mod game;
pub mod htlc2;
pub mod pathfinding;
pub mod probe;
pub mod sim;
pub mod topology;

/// Amounts and fees, in satoshi.
pub type Satoshi = u64;

/// Simulated wall-clock time, in minutes.
pub type Minutes = f64;

pub use beliefs::{BeliefStore, ObservationKey, ObservationKind};
pub use game::{FeeModel, HopEconomics, LockDecision, Move};
pub use pathfinding::{find_path, HopPlan, PathPlan, RouteParams};
pub use sim::{Metrics, PaymentRecord, SimConfig};
pub use topology::{ChannelParams, Network, NodeId, NodeIdx};

/// Round half up to whole satoshi. Negative inputs clamp to zero.
pub fn round_sat(value: f64) -> Satoshi {
    if value <= 0.0 || !value.is_finite() {
        0
    } else {
        (value + 0.5).floor() as Satoshi
    }
}

/// Mixes a base seed with a run index and a stream tag so that independent
/// random streams can be derived reproducibly (splitmix64 finalizer).
pub fn derive_seed(base: u64, run: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
