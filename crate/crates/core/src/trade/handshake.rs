use crate::channel::{ChannelId, ExchangeId, LocalChannelState, Role};
use crate::credentials::{Challenge, DidStatus};
use crate::identity::Did;
use crate::ledger::{ChannelPhase, ChannelTerms, Ledger, OnChainTx};

use super::bus::Bus;
use super::message::Message;
use super::{RobotCtx, SellerCandidate, TradeError};

/// Both replicas of a channel that is open on the ledger.
#[derive(Debug, Clone)]
pub struct OpenChannel {
    pub terms: ChannelTerms,
    pub buyer_state: LocalChannelState,
    pub seller_state: LocalChannelState,
}

/// Broadcast a beacon and collect verified offers.
///
/// `peers` are the robots in radio range; each is driven as an actor until
/// the discovery window closes or the bus is empty. Responders are
/// candidates only if their presentation answers the beacon nonce, their
/// DID is active and they are not blacklisted. An empty list is not an
/// error.
pub fn discover(
    buyer: &mut RobotCtx,
    peers: &mut [&mut RobotCtx],
    requested_units: u64,
    ledger: &mut Ledger,
    bus: &mut Bus,
) -> Result<Vec<SellerCandidate>, TradeError> {
    buyer.policy.validate()?;
    let nonce = Challenge::random(&mut buyer.rng);
    let beacon = Message::Beacon {
        requested_units,
        nonce,
        presentation: buyer.present(nonce)?,
    };
    let deadline = ledger.height() + buyer.policy.discovery_window;
    bus.send(beacon.envelope(buyer.did(), None), ledger.height());

    let mut candidates: Vec<SellerCandidate> = Vec::new();
    loop {
        let now = ledger.height();
        for peer in peers.iter_mut() {
            for env in bus.recv(&peer.did(), now) {
                if let Ok(Message::Beacon {
                    requested_units,
                    nonce,
                    presentation,
                }) = Message::open(&env)
                {
                    if let Some(offer) = peer.answer_beacon(ledger, &env.from, requested_units, nonce, &presentation) {
                        bus.send(offer.envelope(peer.did(), Some(env.from)), now);
                    }
                }
            }
        }
        for env in bus.recv(&buyer.did(), now) {
            let Ok(Message::Offer {
                offered_units,
                nonce: seller_nonce,
                presentation,
            }) = Message::open(&env)
            else {
                continue;
            };
            if offered_units == 0 || candidates.iter().any(|c| c.did == env.from) {
                continue;
            }
            if buyer.check_peer(ledger, &env.from, &presentation, &nonce).is_err() {
                continue;
            }
            let Ok(resolved) = ledger.resolve_did(&env.from) else {
                continue;
            };
            if resolved.status != DidStatus::Active {
                continue;
            }
            candidates.push(SellerCandidate {
                did: env.from,
                credit_score: resolved.account.credit_score,
                multiaddr: resolved.multiaddr,
                offered_units,
                challenge: seller_nonce,
            });
        }
        if bus.in_flight() == 0 || now >= deadline {
            break;
        }
        let next = bus.next_delivery().unwrap_or(deadline).clamp(now + 1, deadline);
        ledger.advance_block(next - now)?;
    }
    Ok(candidates)
}

impl RobotCtx {
    fn answer_beacon(
        &mut self,
        ledger: &Ledger,
        from: &Did,
        requested_units: u64,
        beacon_nonce: Challenge,
        presentation: &crate::credentials::Presentation,
    ) -> Option<Message> {
        let units = self.sellable().min(requested_units);
        if units == 0 || *from == self.did() {
            return None;
        }
        // The beacon nonce is buyer-chosen, so this only gates on issuer
        // trust, DID status and claim proofs. Freshness comes from our own
        // nonce answered in the proof step.
        self.check_peer(ledger, from, presentation, &beacon_nonce).ok()?;
        let nonce = Challenge::random(&mut self.rng);
        self.issued.insert(*from, nonce);
        Some(Message::Offer {
            offered_units: units,
            nonce,
            presentation: self.present(beacon_nonce).ok()?,
        })
    }

    /// Seller side of the proof step. Confirms the channel on success.
    fn accept_proof(
        &mut self,
        ledger: &mut Ledger,
        from: &Did,
        terms: &ChannelTerms,
        presentation: &crate::credentials::Presentation,
    ) -> Result<(), TradeError> {
        let nonce = self.issued.remove(from).ok_or(TradeError::Presentation(
            crate::credentials::RejectReason::ReplayedChallenge,
        ))?;
        self.check_peer(ledger, from, presentation, &nonce)?;
        if terms.seller != self.address() || terms.buyer != from.address() {
            return Err(TradeError::HandshakeRejected("terms name the wrong parties".into()));
        }
        if terms.unit_price < self.policy.unit_price {
            return Err(TradeError::HandshakeRejected(format!(
                "price {} below minimum {}",
                terms.unit_price, self.policy.unit_price
            )));
        }
        let tx = OnChainTx::ConfirmChannel { terms: *terms };
        ledger.submit_tx(tx.sign(&self.identity.keypair)).result?;
        Ok(())
    }
}

/// Run the proof step with the chosen seller and open the channel with two
/// on-chain confirmations: seller first, then buyer.
pub fn establish_channel(
    buyer: &mut RobotCtx,
    seller: &mut RobotCtx,
    candidate: &SellerCandidate,
    units: u64,
    ledger: &mut Ledger,
    bus: &mut Bus,
) -> Result<OpenChannel, TradeError> {
    buyer.policy.validate()?;
    let limit = buyer.policy.max_units.min(candidate.offered_units);
    if units > limit {
        return Err(TradeError::TooManyUnits {
            requested: units,
            limit,
        });
    }
    if buyer.policy.blacklist.contains(&candidate.did) {
        return Err(TradeError::Blacklisted(candidate.did));
    }
    let price = buyer.policy.unit_price;
    let credit = ledger
        .account(&buyer.address())
        .map_or(0, |a| a.credit_score);
    let cost = i64::try_from(units.saturating_mul(price)).unwrap_or(i64::MAX);
    if credit.saturating_sub(cost) < ledger.config().credit_floor {
        return Err(TradeError::InsufficientCredit { units });
    }

    buyer.trades_started += 1;
    let exchange_id = ExchangeId::derive(&[
        b"robocomm/exchange",
        &buyer.address().0,
        &seller.address().0,
        &buyer.trades_started.to_be_bytes(),
        &ledger.height().to_be_bytes(),
    ]);
    let terms = ChannelTerms {
        channel_id: ChannelId::derive(&[b"robocomm/channel", &exchange_id.0]),
        exchange_id,
        seller: seller.address(),
        buyer: buyer.address(),
        unit_price: price,
    };
    let proof = Message::Proof {
        terms,
        presentation: buyer.present(candidate.challenge)?,
    };
    let start = ledger.height();
    bus.send(proof.envelope(buyer.did(), Some(seller.did())), start);

    loop {
        let now = ledger.height();
        for env in bus.recv(&seller.did(), now) {
            if let Ok(Message::Proof {
                terms: t,
                presentation,
            }) = Message::open(&env)
            {
                if env.from == buyer.did() && t == terms {
                    seller.accept_proof(ledger, &env.from, &t, &presentation)?;
                }
            }
        }
        let seller_confirmed = ledger
            .channel(&terms.channel_id)
            .is_some_and(|r| r.phase == ChannelPhase::Pending && r.confirmations.0);
        if seller_confirmed {
            break;
        }
        if now - start >= buyer.policy.delta_timeout {
            return Err(TradeError::HandshakeTimeout);
        }
        ledger.advance_block(1)?;
    }

    let tx = OnChainTx::ConfirmChannel { terms };
    ledger.submit_tx(tx.sign(&buyer.identity.keypair)).result?;

    let key_of = |did: &Did| -> Result<_, TradeError> { Ok(ledger.resolve_did(did)?.document.verification_key) };
    let buyer_state = LocalChannelState::new(
        terms.channel_id,
        exchange_id,
        Role::Buyer,
        buyer.address(),
        seller.address(),
        key_of(&seller.did())?,
        price,
    )?;
    let seller_state = LocalChannelState::new(
        terms.channel_id,
        exchange_id,
        Role::Seller,
        seller.address(),
        buyer.address(),
        key_of(&buyer.did())?,
        price,
    )?;
    Ok(OpenChannel {
        terms,
        buyer_state,
        seller_state,
    })
}
