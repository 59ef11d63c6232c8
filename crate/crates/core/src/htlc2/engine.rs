//! Event-driven replay of the protocol under a scripted adversary.
//!
//! One or more payments are sent over the same path. Every message takes
//! `latency` time units. A node that locks a main contract expects the fee
//! preimage back within `deadline`; otherwise it closes the channel.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{
    enforce_rules, setup_payment, verify, ChannelEvent, ContractRole, ContractState,
    Htlc2ChannelState, Htlc2Contract, Htlc2Error, PathSpec, PaymentSetup, Preimage, Verdict,
};
use crate::{derive_seed, Satoshi};

/// Adversary behaviour. Positions are node indices on the path, the source
/// being 0 and the receiver `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "script")]
pub enum Script {
    /// Everybody follows the protocol; `refuse_at` declines to lock (or, for
    /// the receiver, to reveal the payment secret).
    Honest { refuse_at: Option<usize> },
    /// `at` never returns the fee preimage to its predecessor.
    BribedSuccessor { at: usize },
    /// The source puts a wrong fee preimage into the payload of `at`.
    SourceWrongPreimage { at: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Htlc2Scenario {
    pub path: PathSpec,
    pub fractions: Vec<f64>,
    pub script: Script,
    /// Payments sent one after another over the same path.
    pub attempts: usize,
    /// Time between the starts of consecutive attempts.
    pub attempt_spacing: f64,
    pub latency: f64,
    pub deadline: f64,
    pub seed: u64,
}

/// Three hops with fees 30 and 20 and fractions one half and one quarter,
/// everybody honest.
impl Default for Htlc2Scenario {
    fn default() -> Self {
        Htlc2Scenario {
            path: PathSpec {
                amount: 100_000,
                fees: vec![0, 30, 20],
                timelocks: vec![120, 80, 40],
            },
            fractions: vec![0.0, 0.5, 0.25],
            script: Script::Honest { refuse_at: None },
            attempts: 1,
            attempt_spacing: 1.0,
            latency: 1.0,
            deadline: 5.0,
            seed: 0,
        }
    }
}

impl Htlc2Scenario {
    fn validate(&self) -> Result<(), Htlc2Error> {
        let receiver = self.path.hops();
        let at = match self.script {
            Script::Honest { refuse_at } => refuse_at,
            Script::BribedSuccessor { at } | Script::SourceWrongPreimage { at } => Some(at),
        };
        if let Some(at) = at {
            if at == 0 || at > receiver {
                return Err(Htlc2Error::ScriptPosition { at, receiver });
            }
        }
        if self.attempts == 0 {
            return Err(Htlc2Error::InvalidScenario(
                "at least one attempt is needed",
            ));
        }
        if !(self.latency > 0.0 && self.deadline > 0.0 && self.attempt_spacing >= 0.0) {
            return Err(Htlc2Error::InvalidScenario(
                "latency and deadline must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PaymentStarted,
    MainLocked,
    MainRejected,
    ChannelUnavailable,
    PreimageSent,
    PreimageWithheld,
    PreimageVerified,
    PreimageInvalid,
    FeeClaimed,
    FeeLocked,
    Confirmed,
    Refused,
    SecretRevealed,
    MainClaimed,
    ContractCancelled,
    DeadlineExpired,
    ChannelClosed,
    PaymentSucceeded,
    PaymentFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub event: EventKind,
    pub payment: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contract: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub party: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amount: Option<Satoshi>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum PaymentStatus {
    Succeeded,
    Refused { node: usize },
    Aborted { channel: usize },
    Rejected { channel: usize },
    ChannelUnavailable { channel: usize },
    Closed { channel: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartyReport {
    pub node: usize,
    /// Fee-payment value received minus value sent.
    pub nonrefundable_net: i64,
    /// Main-payment value received minus value sent.
    pub main_net: i64,
    /// Fees this node was owed but never received, keyed by channel.
    pub lost_fees: BTreeMap<usize, u32>,
    pub lost_amount: Satoshi,
}

impl PartyReport {
    pub fn intake(&self) -> i64 {
        self.nonrefundable_net + self.main_net
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub statuses: Vec<PaymentStatus>,
    pub parties: Vec<PartyReport>,
    pub setups: Vec<PaymentSetup>,
    pub closed_channels: Vec<usize>,
    pub rule_i_rejections: usize,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Copy, Debug)]
enum Action {
    Start {
        payment: usize,
    },
    Offer {
        payment: usize,
        channel: usize,
    },
    MainArrived {
        payment: usize,
        channel: usize,
    },
    PreimageArrived {
        payment: usize,
        channel: usize,
        preimage: Option<Preimage>,
    },
    ConfirmArrived {
        payment: usize,
        channel: usize,
    },
    Settle {
        payment: usize,
        channel: usize,
    },
    Deadline {
        payment: usize,
        channel: usize,
        contract: u32,
    },
}

struct Scheduled {
    time: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct PaymentRun {
    setup: PaymentSetup,
    status: Option<PaymentStatus>,
    main: Vec<Option<u32>>,
    confirmed: Vec<bool>,
    /// Fee contracts keyed by (beneficiary, channel).
    fees: BTreeMap<(usize, usize), u32>,
}

struct Engine<'a> {
    scenario: &'a Htlc2Scenario,
    hops: usize,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    contracts: Vec<Htlc2Contract>,
    channels: Vec<Htlc2ChannelState>,
    payments: Vec<PaymentRun>,
    parties: Vec<PartyReport>,
    rule_i_rejections: usize,
    trace: Vec<TraceEvent>,
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, delay: f64, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time: self.now + delay,
            seq: self.seq,
            action,
        });
    }

    fn log(
        &mut self,
        event: EventKind,
        payment: usize,
        channel: Option<usize>,
        contract: Option<u32>,
        party: Option<usize>,
        amount: Option<Satoshi>,
    ) {
        self.trace.push(TraceEvent {
            time: self.now,
            event,
            payment,
            channel,
            contract,
            party,
            amount,
        });
    }

    fn active(&self, payment: usize) -> bool {
        self.payments[payment].status.is_none()
    }

    fn open_contract(
        &mut self,
        payment: usize,
        channel: usize,
        amount: Satoshi,
        locks: Vec<super::HashLock>,
        role: ContractRole,
    ) -> u32 {
        let id = self.contracts.len() as u32;
        let timelock = self.payments[payment].setup.timelocks[channel];
        self.contracts.push(Htlc2Contract {
            id,
            payment,
            channel,
            amount,
            locks,
            timelock,
            role,
            state: ContractState::Pending,
        });
        self.channels[channel].pending.push(id);
        id
    }

    fn settle_contract(&mut self, id: u32, preimages: &[Preimage]) {
        let c = &mut self.contracts[id as usize];
        c.claim(preimages)
            .expect("protocol only claims with the right preimages");
        let (channel, amount, role) = (c.channel, c.amount as i64, c.role);
        self.channels[channel].pending.retain(|x| *x != id);
        let (payer, payee) = (channel, channel + 1);
        match role {
            ContractRole::Main => {
                self.parties[payer].main_net -= amount;
                self.parties[payee].main_net += amount;
            }
            ContractRole::Fee { .. } => {
                self.parties[payer].nonrefundable_net -= amount;
                self.parties[payee].nonrefundable_net += amount;
            }
        }
    }

    fn fail(&mut self, payment: usize, status: PaymentStatus) {
        self.payments[payment].status = Some(status);
        let pending: Vec<u32> = self
            .contracts
            .iter()
            .filter(|c| c.payment == payment && c.state == ContractState::Pending)
            .map(|c| c.id)
            .collect();
        for id in pending {
            let c = &mut self.contracts[id as usize];
            c.cancel();
            let (channel, role) = (c.channel, c.role);
            self.channels[channel].pending.retain(|x| *x != id);
            if role == ContractRole::Main
                && self.hops > 1
                && !self.payments[payment].confirmed[channel]
            {
                enforce_rules(&mut self.channels[channel], ChannelEvent::Release);
            }
            self.log(
                EventKind::ContractCancelled,
                payment,
                Some(channel),
                Some(id),
                None,
                None,
            );
        }
        self.log(EventKind::PaymentFailed, payment, None, None, None, None);
    }

    fn step(&mut self, action: Action) {
        let latency = self.scenario.latency;
        match action {
            Action::Start { payment } => {
                self.log(
                    EventKind::PaymentStarted,
                    payment,
                    None,
                    None,
                    Some(0),
                    None,
                );
                self.schedule(
                    0.0,
                    Action::Offer {
                        payment,
                        channel: 0,
                    },
                );
            }
            Action::Offer { payment, channel } => {
                if !self.active(payment) {
                    return;
                }
                if channel > 0
                    && self.scenario.script
                        == (Script::Honest {
                            refuse_at: Some(channel),
                        })
                {
                    self.log(
                        EventKind::Refused,
                        payment,
                        Some(channel),
                        None,
                        Some(channel),
                        None,
                    );
                    self.fail(payment, PaymentStatus::Refused { node: channel });
                    return;
                }
                let verdict = enforce_rules(
                    &mut self.channels[channel],
                    ChannelEvent::OfferMain {
                        needs_confirmation: self.hops > 1,
                    },
                );
                match verdict {
                    Verdict::Closed => {
                        self.log(
                            EventKind::ChannelUnavailable,
                            payment,
                            Some(channel),
                            None,
                            Some(channel),
                            None,
                        );
                        self.fail(payment, PaymentStatus::ChannelUnavailable { channel });
                    }
                    Verdict::Rejected => {
                        self.rule_i_rejections += 1;
                        self.log(
                            EventKind::MainRejected,
                            payment,
                            Some(channel),
                            None,
                            Some(channel + 1),
                            None,
                        );
                        self.fail(payment, PaymentStatus::Rejected { channel });
                    }
                    Verdict::Accepted => {
                        let setup = &self.payments[payment].setup;
                        let (amount, locks) = (
                            setup.main_amounts[channel],
                            setup.main_locks[channel].clone(),
                        );
                        let id =
                            self.open_contract(payment, channel, amount, locks, ContractRole::Main);
                        self.payments[payment].main[channel] = Some(id);
                        self.log(
                            EventKind::MainLocked,
                            payment,
                            Some(channel),
                            Some(id),
                            Some(channel),
                            Some(amount),
                        );
                        self.schedule(latency, Action::MainArrived { payment, channel });
                        if self.hops > 1 {
                            self.schedule(
                                self.scenario.deadline,
                                Action::Deadline {
                                    payment,
                                    channel,
                                    contract: id,
                                },
                            );
                        }
                    }
                }
            }
            Action::MainArrived { payment, channel } => self.on_main_locked(payment, channel),
            Action::PreimageArrived {
                payment,
                channel,
                preimage,
            } => {
                if !self.active(payment) {
                    return;
                }
                let expected = self.payments[payment].setup.main_locks[channel][1];
                let Some(preimage) = preimage.filter(|p| verify(expected, *p)) else {
                    self.log(
                        EventKind::PreimageInvalid,
                        payment,
                        Some(channel),
                        None,
                        Some(channel),
                        None,
                    );
                    self.fail(payment, PaymentStatus::Aborted { channel });
                    return;
                };
                self.log(
                    EventKind::PreimageVerified,
                    payment,
                    Some(channel),
                    None,
                    Some(channel),
                    None,
                );
                // The fee for this node is claimed first and the preimage
                // travels back towards the source.
                if channel >= 1 {
                    for j in (0..channel).rev() {
                        let id = self.payments[payment].fees[&(channel, j)];
                        self.settle_contract(id, &[preimage]);
                        let amount = self.contracts[id as usize].amount;
                        self.log(
                            EventKind::FeeClaimed,
                            payment,
                            Some(j),
                            Some(id),
                            Some(j + 1),
                            Some(amount),
                        );
                    }
                }
                for k in channel + 1..self.hops {
                    let plan = self.payments[payment].setup.fee_plans[k - 1].clone();
                    let id = self.open_contract(
                        payment,
                        channel,
                        plan.amount,
                        vec![plan.lock],
                        ContractRole::Fee { beneficiary: k },
                    );
                    self.payments[payment].fees.insert((k, channel), id);
                    self.log(
                        EventKind::FeeLocked,
                        payment,
                        Some(channel),
                        Some(id),
                        Some(channel),
                        Some(plan.amount),
                    );
                }
                enforce_rules(&mut self.channels[channel], ChannelEvent::Confirm);
                self.payments[payment].confirmed[channel] = true;
                self.log(
                    EventKind::Confirmed,
                    payment,
                    Some(channel),
                    self.payments[payment].main[channel],
                    Some(channel),
                    None,
                );
                self.schedule(latency, Action::ConfirmArrived { payment, channel });
            }
            Action::ConfirmArrived { payment, channel } => {
                if !self.active(payment) {
                    return;
                }
                if channel + 1 < self.hops {
                    self.schedule(
                        0.0,
                        Action::Offer {
                            payment,
                            channel: channel + 1,
                        },
                    );
                } else {
                    self.reveal(payment);
                }
            }
            Action::Settle { payment, channel } => {
                let id =
                    self.payments[payment].main[channel].expect("settled contracts were locked");
                let setup = &self.payments[payment].setup;
                let mut preimages = vec![setup.receiver_secret];
                preimages.extend(setup.source_secrets.get(channel).copied());
                self.settle_contract(id, &preimages);
                let amount = self.contracts[id as usize].amount;
                self.log(
                    EventKind::MainClaimed,
                    payment,
                    Some(channel),
                    Some(id),
                    Some(channel + 1),
                    Some(amount),
                );
                if channel > 0 {
                    self.schedule(
                        latency,
                        Action::Settle {
                            payment,
                            channel: channel - 1,
                        },
                    );
                } else {
                    self.payments[payment].status = Some(PaymentStatus::Succeeded);
                    self.log(
                        EventKind::PaymentSucceeded,
                        payment,
                        None,
                        None,
                        Some(0),
                        None,
                    );
                }
            }
            Action::Deadline {
                payment,
                channel,
                contract,
            } => {
                let pending = self.contracts[contract as usize].state == ContractState::Pending;
                if !self.active(payment) || !pending || self.payments[payment].confirmed[channel] {
                    return;
                }
                self.log(
                    EventKind::DeadlineExpired,
                    payment,
                    Some(channel),
                    Some(contract),
                    Some(channel),
                    None,
                );
                enforce_rules(&mut self.channels[channel], ChannelEvent::DeadlineExpired);
                self.log(
                    EventKind::ChannelClosed,
                    payment,
                    Some(channel),
                    None,
                    Some(channel),
                    None,
                );
                if channel >= 1 {
                    let owed = self.payments[payment].setup.fee_amount(channel);
                    let party = &mut self.parties[channel];
                    *party.lost_fees.entry(channel).or_default() += 1;
                    party.lost_amount += owed;
                }
                self.fail(payment, PaymentStatus::Closed { channel });
            }
        }
    }

    /// The main contract of `channel` reached `v_{channel+1}`.
    fn on_main_locked(&mut self, payment: usize, channel: usize) {
        if !self.active(payment) {
            return;
        }
        let node = channel + 1;
        if self.hops == 1 {
            self.reveal(payment);
            return;
        }
        if self.scenario.script == (Script::BribedSuccessor { at: node }) {
            self.log(
                EventKind::PreimageWithheld,
                payment,
                Some(channel),
                None,
                Some(node),
                None,
            );
            return;
        }
        let preimage = self.payments[payment].setup.onion.open(node);
        self.log(
            EventKind::PreimageSent,
            payment,
            Some(channel),
            None,
            Some(node),
            None,
        );
        self.schedule(
            self.scenario.latency,
            Action::PreimageArrived {
                payment,
                channel,
                preimage,
            },
        );
    }

    fn reveal(&mut self, payment: usize) {
        let receiver = self.hops;
        if self.scenario.script
            == (Script::Honest {
                refuse_at: Some(receiver),
            })
        {
            self.log(
                EventKind::Refused,
                payment,
                Some(receiver - 1),
                None,
                Some(receiver),
                None,
            );
            self.fail(payment, PaymentStatus::Refused { node: receiver });
            return;
        }
        self.log(
            EventKind::SecretRevealed,
            payment,
            Some(receiver - 1),
            None,
            Some(receiver),
            None,
        );
        self.schedule(
            0.0,
            Action::Settle {
                payment,
                channel: receiver - 1,
            },
        );
    }
}

/// Replays `scenario` and accounts for every party's gains and losses.
pub fn adversary_run(scenario: &Htlc2Scenario) -> Result<AdversaryReport, Htlc2Error> {
    scenario.validate()?;
    let hops = scenario.path.hops();
    let mut payments = Vec::with_capacity(scenario.attempts);
    for p in 0..scenario.attempts {
        let mut setup = setup_payment(
            &scenario.path,
            &scenario.fractions,
            derive_seed(scenario.seed, p as u64, 0),
        )?;
        if let Script::SourceWrongPreimage { at } = scenario.script {
            setup.onion.corrupt(at);
        }
        payments.push(PaymentRun {
            setup,
            status: None,
            main: vec![None; hops],
            confirmed: vec![false; hops],
            fees: BTreeMap::new(),
        });
    }
    let mut engine = Engine {
        scenario,
        hops,
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::new(),
        contracts: Vec::new(),
        channels: vec![Htlc2ChannelState::new(); hops],
        payments,
        parties: (0..=hops)
            .map(|node| PartyReport {
                node,
                ..Default::default()
            })
            .collect(),
        rule_i_rejections: 0,
        trace: Vec::new(),
    };
    for p in 0..scenario.attempts {
        engine.schedule(
            p as f64 * scenario.attempt_spacing,
            Action::Start { payment: p },
        );
    }
    while let Some(next) = engine.queue.pop() {
        engine.now = next.time;
        engine.step(next.action);
    }

    let closed_channels = engine
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.open)
        .map(|(i, _)| i)
        .collect();
    Ok(AdversaryReport {
        statuses: engine
            .payments
            .iter()
            .map(|p| p.status.expect("every payment terminates"))
            .collect(),
        setups: engine.payments.into_iter().map(|p| p.setup).collect(),
        parties: engine.parties,
        closed_channels,
        rule_i_rejections: engine.rule_i_rejections,
        trace: engine.trace,
    })
}

/// One JSON object per line.
pub fn trace_jsonl(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for event in trace {
        out.push_str(&serde_json::to_string(event).expect("trace events serialize"));
        out.push('\n');
    }
    out
}
