use serde::{Deserialize, Serialize};

use crate::channel::{
    build_offchain_tx, sign_offchain_tx, ChannelId, CloseProposal, LocalChannelState, OffChainTxPair, Role,
    SignedOffChainTx, TimeoutAction, ValueKind,
};
use crate::codec::Encode;
use crate::identity::generate_keypair;
use crate::ledger::{
    approve_close, ChannelPhase, ChannelTerms, Ledger, OnChainTx, Receipt, Settlement,
};

use super::bus::Bus;
use super::message::Message;
use super::{offchain_tx_summary, outcome_for, OpenChannel, RobotCtx, TradeError, TradeOutcome};

/// Misbehaviour of one party.
///
/// Message points number the protocol messages of a trade of `n` units:
/// point `2(i-1)` is the seller's energy half of iteration `i`, point
/// `2(i-1)+1` the buyer's credit half, and point `2n` the close exchange.
/// A point-based adversary defects at the first message it would send at
/// or after its point, then stays silent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adversary {
    Honest,
    /// Stops sending and takes no further action, on or off chain.
    Withhold { point: u64 },
    /// Disappears entirely: ignores messages and the ledger.
    Offline { point: u64 },
    /// Sends forged or value-tampered messages instead, then goes silent.
    ForgeAttempt { point: u64 },
    /// Resends its previous transaction instead, then goes silent.
    ReplayStale { point: u64 },
    /// Completes every iteration, then closes unilaterally with the pair of
    /// `iteration` (0 for the empty-trade marker) and stays passive.
    StaleClose { iteration: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defection {
    pub role: Role,
    pub adversary: Adversary,
}

/// Everything observable about one run of the trade loop.
#[derive(Debug, Clone, Serialize)]
pub struct TradeReport {
    pub terms: ChannelTerms,
    pub units_requested: u64,
    pub buyer: TradeOutcome,
    pub seller: TradeOutcome,
    pub settlement: Settlement,
    /// Off-chain transaction messages put on the bus, forged ones included.
    pub offchain_messages: u64,
    /// Close requests and approvals.
    pub control_messages: u64,
    /// Ledger transactions this run submitted that succeeded.
    pub onchain_txs: u64,
    pub rejected_onchain: u64,
    /// Every off-chain transaction sent, in order.
    pub offchain_log: Vec<SignedOffChainTx>,
    pub transcript: Vec<String>,
    pub blocks_elapsed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Trading,
    /// Seller sent a close request and waits for the approval.
    CloseRequested,
    /// Buyer approved and waits for the close to land.
    Approved,
    /// Off-chain interaction is over; only ledger actions remain.
    Chain,
    Done,
}

struct Party<'a> {
    role: Role,
    ctx: &'a mut RobotCtx,
    state: LocalChannelState,
    adversary: Adversary,
    stage: Stage,
    silent: bool,
    offline: bool,
    timed_out: bool,
    challenged_candidate: Option<u64>,
    sent: Vec<SignedOffChainTx>,
    pairs: Vec<OffChainTxPair>,
}

impl Party<'_> {
    fn defects_at(&self, point: u64) -> bool {
        match self.adversary {
            Adversary::Withhold { point: p }
            | Adversary::Offline { point: p }
            | Adversary::ForgeAttempt { point: p }
            | Adversary::ReplayStale { point: p } => point >= p,
            Adversary::Honest | Adversary::StaleClose { .. } => false,
        }
    }

    fn passive(&self) -> bool {
        self.silent || self.offline
    }

    fn waiting(&self) -> bool {
        match self.stage {
            Stage::Trading => self.role == Role::Buyer || self.state.pending.is_some(),
            Stage::CloseRequested | Stage::Approved => true,
            Stage::Chain | Stage::Done => false,
        }
    }

    fn record_pair(&mut self) {
        if let Some(p) = self.state.last_pair {
            if self.pairs.last() != Some(&p) {
                self.pairs.push(p);
            }
        }
    }

    fn name(&self) -> &'static str {
        match self.role {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
        }
    }
}

struct Engine<'a> {
    buyer: Party<'a>,
    seller: Party<'a>,
    terms: ChannelTerms,
    units: u64,
    ledger: &'a mut Ledger,
    bus: &'a mut Bus,
    moved: u64,
    offchain_messages: u64,
    control_messages: u64,
    onchain_txs: u64,
    rejected_onchain: u64,
    offchain_log: Vec<SignedOffChainTx>,
    transcript: Vec<String>,
    /// Height of the last finalize attempt, so a failing one is not retried
    /// within the same block.
    finalize_tried: Option<u64>,
}

/// Drive an open channel through `units` pay-per-unit iterations and a
/// close, with at most one defecting party.
///
/// Energy moves physically with each energy half, so batteries change even
/// if the message is lost. The run ends when the ledger records the close.
pub fn run_trade(
    buyer: &mut RobotCtx,
    seller: &mut RobotCtx,
    channel: OpenChannel,
    units: u64,
    ledger: &mut Ledger,
    bus: &mut Bus,
    defection: Option<Defection>,
) -> Result<TradeReport, TradeError> {
    let limit = buyer.policy.max_units;
    if units > limit {
        return Err(TradeError::TooManyUnits {
            requested: units,
            limit,
        });
    }
    let adversary_of = |role| match defection {
        Some(d) if d.role == role => d.adversary,
        _ => Adversary::Honest,
    };
    if let Some(Defection {
        adversary: Adversary::StaleClose { iteration },
        ..
    }) = defection
    {
        if iteration >= units {
            return Err(TradeError::InvalidPolicy("stale close iteration must be below units"));
        }
    }
    let cap = 100 + (units + 4) * 4 * (buyer.policy.delta_timeout + seller.policy.delta_timeout + 2)
        + 4 * ledger.config().challenge_period;
    let start = ledger.height();
    bus.register(buyer.did());
    bus.register(seller.did());

    let OpenChannel {
        terms,
        buyer_state,
        seller_state,
    } = channel;
    let mut engine = Engine {
        buyer: Party::new(Role::Buyer, buyer, buyer_state, adversary_of(Role::Buyer)),
        seller: Party::new(Role::Seller, seller, seller_state, adversary_of(Role::Seller)),
        terms,
        units,
        ledger,
        bus,
        moved: 0,
        offchain_messages: 0,
        control_messages: 0,
        onchain_txs: 0,
        rejected_onchain: 0,
        offchain_log: Vec::new(),
        transcript: Vec::new(),
        finalize_tried: None,
    };
    engine.note(format!(
        "channel {} open: {} units at price {}",
        terms.channel_id, units, terms.unit_price
    ));

    loop {
        while engine.settle_round() {}
        if engine.closed().is_some() {
            break;
        }
        if engine.ledger.height() - start > cap {
            return Err(TradeError::Stalled(cap));
        }
        engine.advance()?;
    }
    Ok(engine.finish(start))
}

impl<'a> Party<'a> {
    fn new(role: Role, ctx: &'a mut RobotCtx, state: LocalChannelState, adversary: Adversary) -> Self {
        Party {
            role,
            ctx,
            state,
            adversary,
            stage: Stage::Trading,
            silent: false,
            offline: false,
            timed_out: false,
            challenged_candidate: None,
            sent: Vec::new(),
            pairs: Vec::new(),
        }
    }
}

impl<'a> Engine<'a> {
    fn party(&mut self, role: Role) -> &mut Party<'a> {
        match role {
            Role::Buyer => &mut self.buyer,
            Role::Seller => &mut self.seller,
        }
    }

    fn note(&mut self, line: String) {
        let h = self.ledger.height();
        self.transcript.push(format!("[h={h:>3}] {line}"));
    }

    fn closed(&self) -> Option<&Settlement> {
        self.ledger
            .channel(&self.terms.channel_id)
            .and_then(|r| r.settlement.as_ref())
    }

    fn send(&mut self, from: Role, msg: Message) {
        let (from_did, to_did) = match from {
            Role::Buyer => (self.buyer.ctx.did(), self.seller.ctx.did()),
            Role::Seller => (self.seller.ctx.did(), self.buyer.ctx.did()),
        };
        let who = self.party(from).name();
        let line = match &msg {
            Message::OffChainTx(stx) => {
                self.offchain_messages += 1;
                self.offchain_log.push(*stx);
                format!("{who} -> peer: off-chain {}", offchain_tx_summary(stx))
            }
            Message::CloseRequest(p) => {
                self.control_messages += 1;
                format!("{who} -> peer: close request at iteration {}", p.iteration)
            }
            Message::CloseApproval(_) => {
                self.control_messages += 1;
                format!("{who} -> peer: close approval")
            }
            other => format!("{who} -> peer: message kind {}", other.kind()),
        };
        self.note(line);
        let now = self.ledger.height();
        self.bus.send(msg.envelope(from_did, Some(to_did)), now);
    }

    fn submit(&mut self, by: Role, tx: OnChainTx) -> Receipt {
        let label = match &tx {
            OnChainTx::CooperativeClose { pair, .. } => {
                format!("cooperative close at iteration {}", pair.map_or(0, |p| p.iteration()))
            }
            OnChainTx::UnilateralClose { pair, .. } => {
                format!("unilateral close at iteration {}", pair.map_or(0, |p| p.iteration()))
            }
            OnChainTx::Challenge { pair, .. } => format!("challenge with iteration {}", pair.iteration()),
            OnChainTx::FinalizeClose { .. } => "finalize close".to_string(),
            _ => "transaction".to_string(),
        };
        let stx = tx.sign(&self.party(by).ctx.identity.keypair);
        let receipt = self.ledger.submit_tx(stx);
        let who = self.party(by).name();
        match &receipt.result {
            Ok(_) => {
                self.onchain_txs += 1;
                self.note(format!("{who} => ledger: {label}: ok"));
            }
            Err(e) => {
                self.rejected_onchain += 1;
                self.note(format!("{who} => ledger: {label}: rejected ({e})"));
            }
        }
        receipt
    }

    /// One pass of ledger watching, message handling and proactive steps.
    /// Returns whether anything happened.
    fn settle_round(&mut self) -> bool {
        let mut progress = false;
        for role in [Role::Buyer, Role::Seller] {
            progress |= self.watch_chain(role);
        }
        for role in [Role::Buyer, Role::Seller] {
            let me = self.party(role).ctx.did();
            let now = self.ledger.height();
            for env in self.bus.recv(&me, now) {
                progress = true;
                match Message::open(&env) {
                    Ok(msg) => self.handle(role, msg),
                    Err(e) => {
                        let who = self.party(role).name();
                        self.note(format!("{who}: undecodable message dropped ({e})"));
                    }
                }
            }
        }
        progress |= self.seller_step();
        progress
    }

    fn watch_chain(&mut self, role: Role) -> bool {
        let (passive, stage) = {
            let p = self.party(role);
            (p.passive(), p.stage)
        };
        if passive || stage == Stage::Done {
            return false;
        }
        let Some(record) = self.ledger.channel(&self.terms.channel_id) else {
            return false;
        };
        match record.phase.clone() {
            ChannelPhase::Closed => {
                self.party(role).stage = Stage::Done;
                true
            }
            ChannelPhase::Challenged {
                deadline,
                candidate,
                submitted_by,
            } => {
                let mut progress = false;
                let height = self.ledger.height();
                let finalizable = self.ledger.is_finalizable(&self.terms.channel_id);
                let p = self.party(role);
                if p.stage != Stage::Chain {
                    p.stage = Stage::Chain;
                    progress = true;
                }
                let claimed = candidate.map_or(0, |c| c.iteration());
                let mine = p.state.last_complete_iteration;
                let newer = p.state.last_pair;
                let me = p.ctx.address();
                if submitted_by != me
                    && claimed < mine
                    && height < deadline
                    && p.challenged_candidate != Some(claimed)
                {
                    p.challenged_candidate = Some(claimed);
                    let pair = newer.expect("a complete iteration has a pair");
                    self.submit(
                        role,
                        OnChainTx::Challenge {
                            channel_id: self.terms.channel_id,
                            pair,
                        },
                    );
                    return true;
                }
                if finalizable && self.finalize_tried != Some(height) {
                    self.finalize_tried = Some(height);
                    self.submit(
                        role,
                        OnChainTx::FinalizeClose {
                            channel_id: self.terms.channel_id,
                        },
                    );
                    progress = true;
                }
                progress
            }
            ChannelPhase::Pending | ChannelPhase::Open => false,
        }
    }

    fn handle(&mut self, role: Role, msg: Message) {
        {
            let p = self.party(role);
            if p.passive() || matches!(p.stage, Stage::Chain | Stage::Done) {
                return;
            }
        }
        match (role, msg) {
            (Role::Buyer, Message::OffChainTx(stx)) => {
                let res = self.buyer.state.apply_incoming(&stx);
                match res {
                    Ok(()) => {
                        let point = 2 * (stx.tx.iteration - 1) + 1;
                        if self.buyer.defects_at(point) {
                            self.defect(Role::Buyer, point);
                            return;
                        }
                        let credit = self
                            .buyer
                            .state
                            .send_credit(&self.buyer.ctx.identity.keypair)
                            .expect("buyer holds a pending energy half");
                        self.buyer.record_pair();
                        self.buyer.sent.push(credit);
                        self.send(Role::Buyer, Message::OffChainTx(credit));
                    }
                    Err(e) => self.note(format!("buyer: rejected off-chain tx ({e})")),
                }
            }
            (Role::Seller, Message::OffChainTx(stx)) => match self.seller.state.apply_incoming(&stx) {
                Ok(()) => self.seller.record_pair(),
                Err(e) => self.note(format!("seller: rejected off-chain tx ({e})")),
            },
            (Role::Buyer, Message::CloseRequest(proposal)) => {
                self.buyer.state.deadline_clock = 0;
                let point = 2 * self.units;
                if self.buyer.defects_at(point) {
                    self.defect(Role::Buyer, point);
                    return;
                }
                if let Adversary::StaleClose { iteration } = self.buyer.adversary {
                    self.stale_close(Role::Buyer, iteration);
                    return;
                }
                match self.buyer.state.accept_close(&proposal) {
                    Ok(pair) => {
                        let sig = approve_close(&self.buyer.ctx.identity.keypair, &self.terms.channel_id, pair.as_ref());
                        self.send(Role::Buyer, Message::CloseApproval(sig));
                        self.buyer.stage = Stage::Approved;
                    }
                    Err(e) => self.note(format!("buyer: rejected close request ({e})")),
                }
            }
            (Role::Seller, Message::CloseApproval(sig)) => {
                if self.seller.stage != Stage::CloseRequested {
                    return;
                }
                self.seller.state.deadline_clock = 0;
                let tx = OnChainTx::CooperativeClose {
                    channel_id: self.terms.channel_id,
                    pair: self.seller.state.last_pair,
                    counter_signature: sig,
                };
                if self.submit(Role::Seller, tx).is_ok() {
                    self.seller.stage = Stage::Done;
                }
            }
            (r, other) => {
                let who = self.party(r).name();
                self.note(format!("{who}: ignored message kind {}", other.kind()));
            }
        }
    }

    /// The seller's proactive moves: next energy half or the close request.
    fn seller_step(&mut self) -> bool {
        let s = &self.seller;
        if s.passive() || s.stage != Stage::Trading || s.state.pending.is_some() {
            return false;
        }
        let done = s.state.last_complete_iteration;
        if done < self.units {
            let point = 2 * done;
            if self.seller.defects_at(point) {
                self.defect(Role::Seller, point);
                return true;
            }
            let stx = self
                .seller
                .state
                .send_energy(&self.seller.ctx.identity.keypair)
                .expect("seller may send when nothing is pending");
            // One unit moves over the wireless link with the message.
            self.seller.ctx.battery -= 1;
            self.buyer.ctx.battery += 1;
            self.moved += 1;
            self.seller.sent.push(stx);
            self.send(Role::Seller, Message::OffChainTx(stx));
            return true;
        }
        let point = 2 * self.units;
        if self.seller.defects_at(point) {
            self.defect(Role::Seller, point);
            return true;
        }
        if let Adversary::StaleClose { iteration } = self.seller.adversary {
            self.stale_close(Role::Seller, iteration);
            return true;
        }
        let proposal = self.seller.state.propose_close().expect("no pending half");
        self.send(Role::Seller, Message::CloseRequest(proposal));
        self.seller.stage = Stage::CloseRequested;
        true
    }

    fn defect(&mut self, role: Role, point: u64) {
        let adversary = self.party(role).adversary;
        let who = self.party(role).name();
        self.note(format!("{who} defects at point {point}: {adversary:?}"));
        match adversary {
            Adversary::Withhold { .. } => {}
            Adversary::Offline { .. } => self.party(role).offline = true,
            Adversary::ForgeAttempt { .. } => {
                for msg in self.forgeries(role, point) {
                    self.send(role, msg);
                }
            }
            Adversary::ReplayStale { .. } => {
                if let Some(last) = self.party(role).sent.last().copied() {
                    self.send(role, Message::OffChainTx(last));
                }
            }
            Adversary::Honest | Adversary::StaleClose { .. } => unreachable!("not point based"),
        }
        self.party(role).silent = true;
    }

    /// Messages a cheating party might try at `point`: a correct-looking
    /// transaction with a broken signature and a validly signed one with
    /// the wrong value. At the close point, a proposal or approval that
    /// does not match the real state.
    fn forgeries(&mut self, role: Role, point: u64) -> Vec<Message> {
        let terms = self.terms;
        let units = self.units;
        let p = self.party(role);
        let kp = p.ctx.identity.keypair.clone();
        if point >= 2 * units {
            return match role {
                Role::Seller => vec![Message::CloseRequest(CloseProposal {
                    channel_id: terms.channel_id,
                    exchange_id: terms.exchange_id,
                    iteration: units + 1,
                    pair: None,
                })],
                // Signed over another channel, so the ledger rejects it.
                Role::Buyer => {
                    let other = ChannelId::derive(&[b"robocomm/forged", &terms.channel_id.0]);
                    vec![Message::CloseApproval(approve_close(&kp, &other, p.state.last_pair.as_ref()))]
                }
            };
        }
        let iteration = point / 2 + 1;
        let (kind, honest_value, receiver) = match role {
            Role::Seller => (ValueKind::EnergyUnits, iteration, terms.buyer),
            Role::Buyer => (ValueKind::CreditScore, iteration * terms.unit_price, terms.seller),
        };
        let sender = p.ctx.address();
        let build = |value| {
            build_offchain_tx(terms.exchange_id, iteration, sender, receiver, value, kind).expect("valid fields")
        };
        let mut out = Vec::new();
        // Honest content, signature from a key that is not the sender's.
        let impostor = generate_keypair(&crate::codec::sha256(&[b"robocomm/impostor", &sender.0]))
            .expect("hash is a valid scalar");
        let mut forged = sign_offchain_tx(&kp, build(honest_value)).expect("sender key");
        forged.signature = impostor.sign(&forged.tx.canonical_bytes());
        out.push(Message::OffChainTx(forged));
        // Validly signed but claiming more energy or paying less credit.
        let cheat_value = match role {
            Role::Seller => honest_value + 1,
            Role::Buyer => honest_value - 1,
        };
        if cheat_value >= 1 {
            out.push(Message::OffChainTx(sign_offchain_tx(&kp, build(cheat_value)).expect("sender key")));
        }
        out
    }

    fn stale_close(&mut self, role: Role, iteration: u64) {
        let pair = match iteration {
            0 => None,
            i => Some(self.party(role).pairs[(i - 1) as usize]),
        };
        let who = self.party(role).name();
        self.note(format!("{who} attempts a stale close at iteration {iteration}"));
        self.submit(
            role,
            OnChainTx::UnilateralClose {
                channel_id: self.terms.channel_id,
                pair,
            },
        );
        let p = self.party(role);
        p.stage = Stage::Chain;
        p.silent = true;
    }

    /// Advance one block, tick silence clocks and fire timeouts.
    fn advance(&mut self) -> Result<(), TradeError> {
        self.ledger.advance_block(1)?;
        for role in [Role::Seller, Role::Buyer] {
            let delta = self.party(role).ctx.policy.delta_timeout;
            let p = self.party(role);
            if p.passive() || !p.waiting() {
                continue;
            }
            p.state.tick(1);
            let waited = p.state.deadline_clock;
            if let TimeoutAction::UnilateralClose(pair) = p.state.on_timeout(waited, delta) {
                let who = p.name();
                self.note(format!("{who}: peer silent for {waited} blocks, closing unilaterally"));
                let ok = self
                    .submit(
                        role,
                        OnChainTx::UnilateralClose {
                            channel_id: self.terms.channel_id,
                            pair,
                        },
                    )
                    .is_ok();
                let p = self.party(role);
                p.timed_out = ok;
                p.stage = Stage::Chain;
            }
        }
        Ok(())
    }

    fn finish(self, start: u64) -> TradeReport {
        let settlement = self.closed().expect("loop ends on close").clone();
        let seller_addr = self.terms.seller;
        let price = self.terms.unit_price;
        let buyer = outcome_for(
            self.terms.exchange_id,
            self.terms.buyer,
            self.seller.ctx.did(),
            &settlement,
            seller_addr,
            price,
            self.moved,
            self.buyer.timed_out,
        );
        let seller = outcome_for(
            self.terms.exchange_id,
            self.terms.seller,
            self.buyer.ctx.did(),
            &settlement,
            seller_addr,
            price,
            self.moved,
            self.seller.timed_out,
        );
        let mut transcript = self.transcript;
        transcript.push(format!(
            "[h={:>3}] settled at iteration {}: {} units for {} credits, seller {:+}, buyer {:+}",
            self.ledger.height(),
            settlement.iteration,
            settlement.energy_units,
            settlement.credits,
            settlement.seller_credit_delta,
            settlement.buyer_credit_delta
        ));
        TradeReport {
            terms: self.terms,
            units_requested: self.units,
            buyer,
            seller,
            settlement,
            offchain_messages: self.offchain_messages,
            control_messages: self.control_messages,
            onchain_txs: self.onchain_txs,
            rejected_onchain: self.rejected_onchain,
            offchain_log: self.offchain_log,
            transcript,
            blocks_elapsed: self.ledger.height() - start,
        }
    }
}
