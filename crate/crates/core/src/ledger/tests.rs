use super::*;
use crate::channel::{build_offchain_tx, sign_offchain_tx, ValueKind};
use crate::identity::Identity;

struct World {
    genesis: Identity,
    seller: Identity,
    buyer: Identity,
    ledger: Ledger,
}

fn register(ledger: &mut Ledger, id: &Identity, energy: u64) -> Receipt {
    let tx = OnChainTx::RegisterDid {
        did: id.did,
        document: id.document(ledger.height()),
        multiaddr: id.endpoint.clone(),
        reported_energy: energy,
    };
    ledger.submit_tx(tx.sign(&id.keypair))
}

fn world() -> World {
    let genesis = Identity::from_label("genesis");
    let seller = Identity::from_label("seller");
    let buyer = Identity::from_label("buyer");
    let mut ledger = Ledger::new(LedgerConfig::new(genesis.address()));
    assert!(register(&mut ledger, &seller, 40).is_ok());
    assert!(register(&mut ledger, &buyer, 5).is_ok());
    World {
        genesis,
        seller,
        buyer,
        ledger,
    }
}

impl World {
    fn terms(&self, price: u64) -> ChannelTerms {
        ChannelTerms {
            channel_id: ChannelId([1; 16]),
            exchange_id: ExchangeId([2; 16]),
            seller: self.seller.address(),
            buyer: self.buyer.address(),
            unit_price: price,
        }
    }

    fn open(&mut self, price: u64) -> ChannelId {
        let terms = self.terms(price);
        let r1 = self
            .ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&self.seller.keypair));
        assert_eq!(r1.result, Ok(TxEffect::ChannelPending(terms.channel_id)));
        let r2 = self
            .ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&self.buyer.keypair));
        assert_eq!(r2.result, Ok(TxEffect::ChannelOpened(terms.channel_id)));
        terms.channel_id
    }

    fn pair(&self, n: u64, price: u64) -> OffChainTxPair {
        let x = ExchangeId([2; 16]);
        let (s, b) = (self.seller.address(), self.buyer.address());
        OffChainTxPair {
            energy_tx: sign_offchain_tx(
                &self.seller.keypair,
                build_offchain_tx(x, n, s, b, n, ValueKind::EnergyUnits).unwrap(),
            )
            .unwrap(),
            credit_tx: sign_offchain_tx(
                &self.buyer.keypair,
                build_offchain_tx(x, n, b, s, n * price, ValueKind::CreditScore).unwrap(),
            )
            .unwrap(),
        }
    }

    fn coop_close(&mut self, id: ChannelId, pair: Option<OffChainTxPair>) -> Receipt {
        let approval = approve_close(&self.buyer.keypair, &id, pair.as_ref());
        let tx = OnChainTx::CooperativeClose {
            channel_id: id,
            pair,
            counter_signature: approval,
        };
        self.ledger.submit_tx(tx.sign(&self.seller.keypair))
    }

    fn unilateral(&mut self, by: &Identity, id: ChannelId, pair: Option<OffChainTxPair>) -> Receipt {
        let tx = OnChainTx::UnilateralClose {
            channel_id: id,
            pair,
        };
        self.ledger.submit_tx(tx.sign(&by.keypair))
    }

    fn challenge(&mut self, by: &Identity, id: ChannelId, pair: OffChainTxPair) -> Receipt {
        let tx = OnChainTx::Challenge {
            channel_id: id,
            pair,
        };
        self.ledger.submit_tx(tx.sign(&by.keypair))
    }

    fn finalize(&mut self, id: ChannelId) -> Receipt {
        let tx = OnChainTx::FinalizeClose { channel_id: id };
        self.ledger.submit_tx(tx.sign(&self.genesis.keypair))
    }

    fn credit(&self, id: &Identity) -> i64 {
        self.ledger.account(&id.address()).unwrap().credit_score
    }

    fn energy(&self, id: &Identity) -> u64 {
        self.ledger.account(&id.address()).unwrap().energy_level
    }
}

#[test]
fn register_and_resolve() {
    let w = world();
    let r = w.ledger.resolve_did(&w.seller.did).unwrap();
    assert_eq!(r.status, DidStatus::Active);
    assert_eq!(r.document, w.seller.document(0));
    assert_eq!(r.account.credit_score, LedgerConfig::DEFAULT_INITIAL_CREDIT);
    assert_eq!(r.multiaddr, w.seller.endpoint);
    assert_eq!(
        w.ledger.resolve_did(&Identity::from_label("nobody").did),
        Err(LedgerError::UnknownDid)
    );
    assert!(w.ledger.replay_matches());
}

#[test]
fn duplicate_and_mismatched_registration() {
    let mut w = world();
    let seller = w.seller.clone();
    assert_eq!(
        register(&mut w.ledger, &seller, 1).result,
        Err(LedgerError::DuplicateDid)
    );
    let other = Identity::from_label("other");
    let tx = OnChainTx::RegisterDid {
        did: other.did,
        document: w.seller.document(0),
        multiaddr: other.endpoint.clone(),
        reported_energy: 0,
    };
    assert_eq!(
        w.ledger.submit_tx(tx.sign(&other.keypair)).result,
        Err(LedgerError::DocMismatch)
    );
    // Registering someone else's DID.
    let third = Identity::from_label("third");
    let tx = OnChainTx::RegisterDid {
        did: third.did,
        document: third.document(0),
        multiaddr: third.endpoint.clone(),
        reported_energy: 0,
    };
    assert_eq!(
        w.ledger.submit_tx(tx.sign(&other.keypair)).result,
        Err(LedgerError::NotOwner)
    );
}

#[test]
fn initial_credit_follows_config() {
    let genesis = Identity::from_label("genesis");
    let mut cfg = LedgerConfig::new(genesis.address());
    cfg.initial_credit = 77;
    let mut ledger = Ledger::new(cfg);
    let r = Identity::from_label("r");
    register(&mut ledger, &r, 0);
    assert_eq!(ledger.account(&r.address()).unwrap().credit_score, 77);
}

#[test]
fn mutated_payload_is_bad_signature_and_state_unchanged() {
    let mut w = world();
    let before = w.ledger.state_hash();
    let log_len = w.ledger.tx_log().len();
    let mut tx = OnChainTx::RevokeDid { did: w.seller.did }.sign(&w.seller.keypair);
    let n = tx.payload.len();
    tx.payload[n - 1] ^= 1;
    let r = w.ledger.submit_tx(tx);
    assert_eq!(r.result, Err(LedgerError::BadSignature));
    assert_eq!(w.ledger.state_hash(), before);
    assert_eq!(w.ledger.tx_log().len(), log_len);
}

#[test]
fn every_single_bit_mutation_of_a_tx_is_rejected() {
    let w = world();
    let tx = OnChainTx::RevokeDid { did: w.seller.did }.sign(&w.seller.keypair);
    let bytes = tx.canonical_bytes();
    for bit in 0..bytes.len() * 8 {
        let mut b = bytes.clone();
        b[bit / 8] ^= 1 << (bit % 8);
        let Ok(mutant) = SignedOnChainTx::from_canonical_bytes(&b) else {
            continue;
        };
        let mut l = w.ledger.clone();
        let before = l.state_hash();
        let r = l.submit_tx(mutant);
        assert!(r.result.is_err(), "bit {bit}");
        assert_eq!(l.state_hash(), before);
    }
}

#[test]
fn unknown_kind() {
    let mut w = world();
    let mut tx = OnChainTx::RevokeDid { did: w.seller.did }.sign(&w.seller.keypair);
    tx.kind = 99;
    // Re-sign so only the kind is wrong.
    let mut msg = crate::codec::Writer::new();
    msg.bytes(b"robocomm/onchain-tx/v1").u8(99).bytes(&tx.payload).put(&tx.sender);
    tx.signature = w.seller.keypair.sign(&msg.into_bytes());
    assert_eq!(w.ledger.submit_tx(tx).result, Err(LedgerError::UnknownTxKind(99)));
}

#[test]
fn advance_block() {
    let mut w = world();
    w.ledger.advance_block(5).unwrap();
    assert_eq!(w.ledger.advance_block(3), Ok(8));
    assert_eq!(w.ledger.advance_block(0), Err(LedgerError::ZeroAdvance));
    assert_eq!(w.ledger.height(), 8);
}

#[test]
fn revoke_did_rules() {
    let mut w = world();
    let wrong = OnChainTx::RevokeDid { did: w.seller.did }.sign(&w.buyer.keypair);
    assert_eq!(w.ledger.submit_tx(wrong).result, Err(LedgerError::NotController));
    let ok = OnChainTx::RevokeDid { did: w.seller.did }.sign(&w.seller.keypair);
    assert!(w.ledger.submit_tx(ok.clone()).is_ok());
    assert_eq!(
        w.ledger.resolve_did(&w.seller.did).unwrap().status,
        DidStatus::Revoked
    );
    assert_eq!(w.ledger.submit_tx(ok).result, Err(LedgerError::AlreadyRevoked));
    let ghost = Identity::from_label("ghost");
    let tx = OnChainTx::RevokeDid { did: ghost.did }.sign(&ghost.keypair);
    assert_eq!(w.ledger.submit_tx(tx).result, Err(LedgerError::UnknownDid));
}

#[test]
fn organisation_controller_can_revoke() {
    let genesis = Identity::from_label("genesis");
    let org = Identity::from_label("org");
    let robot = Identity::from_label("robot");
    let mut ledger = Ledger::new(LedgerConfig::new(genesis.address()));
    let doc = crate::identity::build_did_document_with_controller(
        &robot.did,
        &robot.keypair,
        org.did,
        robot.endpoint.clone(),
        0,
    )
    .unwrap();
    let reg = OnChainTx::RegisterDid {
        did: robot.did,
        document: doc,
        multiaddr: robot.endpoint.clone(),
        reported_energy: 0,
    };
    assert!(ledger.submit_tx(reg.sign(&robot.keypair)).is_ok());
    let self_revoke = OnChainTx::RevokeDid { did: robot.did }.sign(&robot.keypair);
    assert_eq!(ledger.submit_tx(self_revoke).result, Err(LedgerError::NotController));
    let org_revoke = OnChainTx::RevokeDid { did: robot.did }.sign(&org.keypair);
    assert!(ledger.submit_tx(org_revoke).is_ok());
}

#[test]
fn issuer_registry() {
    let mut w = world();
    let issuer = Identity::from_label("issuer");
    let add = OnChainTx::AddIssuer {
        issuer_did: issuer.did,
    };
    assert_eq!(
        w.ledger.submit_tx(add.sign(&w.seller.keypair)).result,
        Err(LedgerError::NotAuthorized)
    );
    assert!(w.ledger.submit_tx(add.sign(&w.genesis.keypair)).is_ok());
    assert!(w.ledger.is_trusted_issuer(&issuer.did));
    assert!(!w.ledger.is_trusted_issuer(&w.seller.did));
    assert_eq!(
        w.ledger.submit_tx(add.sign(&w.genesis.keypair)).result,
        Err(LedgerError::DuplicateIssuer)
    );
    // Only DIDs are stored for issuers.
    let json = w.ledger.state_json().to_string();
    assert!(!json.contains("organisation") && !json.contains("organization"));
}

#[test]
fn channel_open_requires_both_confirmations() {
    let mut w = world();
    let terms = w.terms(2);
    let id = terms.channel_id;
    w.ledger
        .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.seller.keypair));
    assert_eq!(w.ledger.channel(&id).unwrap().phase, ChannelPhase::Pending);
    let p = w.pair(1, 2);
    assert_eq!(w.unilateral(&w.seller.clone(), id, Some(p)).result, Err(LedgerError::NotOpen));
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.seller.keypair))
            .result,
        Err(LedgerError::DoubleConfirm)
    );
    let mut other_terms = terms;
    other_terms.unit_price = 3;
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms: other_terms }.sign(&w.buyer.keypair))
            .result,
        Err(LedgerError::TermsMismatch)
    );
    assert!(w
        .ledger
        .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.buyer.keypair))
        .is_ok());
    assert_eq!(w.ledger.channel(&id).unwrap().phase, ChannelPhase::Open);
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.buyer.keypair))
            .result,
        Err(LedgerError::DuplicateChannel)
    );
}

#[test]
fn revoked_participant_cannot_confirm() {
    let mut w = world();
    let revoke = OnChainTx::RevokeDid { did: w.buyer.did }.sign(&w.buyer.keypair);
    assert!(w.ledger.submit_tx(revoke).is_ok());
    let terms = w.terms(2);
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.seller.keypair))
            .result,
        Err(LedgerError::RevokedParticipant)
    );
}

#[test]
fn revoked_between_confirmations() {
    let mut w = world();
    let terms = w.terms(2);
    assert!(w
        .ledger
        .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.seller.keypair))
        .is_ok());
    let revoke = OnChainTx::RevokeDid { did: w.buyer.did }.sign(&w.buyer.keypair);
    assert!(w.ledger.submit_tx(revoke).is_ok());
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&w.buyer.keypair))
            .result,
        Err(LedgerError::RevokedParticipant)
    );
}

#[test]
fn outsider_cannot_confirm() {
    let mut w = world();
    let outsider = Identity::from_label("outsider");
    register(&mut w.ledger, &outsider, 0);
    let terms = w.terms(2);
    assert_eq!(
        w.ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&outsider.keypair))
            .result,
        Err(LedgerError::NotParticipant)
    );
}

#[test]
fn cooperative_three_units_at_price_two() {
    let mut w = world();
    let id = w.open(2);
    let (s0, b0) = (w.credit(&w.seller), w.credit(&w.buyer));
    let (se0, be0) = (w.energy(&w.seller), w.energy(&w.buyer));
    let pair = w.pair(3, 2);
    let r = w.coop_close(id, Some(pair));
    assert!(r.is_ok(), "{:?}", r.result);
    assert_eq!(w.credit(&w.seller), s0 + 6 + 1);
    assert_eq!(w.credit(&w.buyer), b0 - 6 + 1);
    assert_eq!(w.energy(&w.seller), se0 - 3);
    assert_eq!(w.energy(&w.buyer), be0 + 3);
    assert_eq!(w.ledger.channel(&id).unwrap().phase, ChannelPhase::Closed);
    assert!(w.ledger.replay_matches());
}

#[test]
fn empty_trade_close_pays_only_bonus() {
    let mut w = world();
    let id = w.open(2);
    let (s0, b0) = (w.credit(&w.seller), w.credit(&w.buyer));
    assert!(w.coop_close(id, None).is_ok());
    assert_eq!(w.credit(&w.seller), s0 + 1);
    assert_eq!(w.credit(&w.buyer), b0 + 1);
}

#[test]
fn insufficient_credit_keeps_channel_open() {
    let mut w = world();
    let id = w.open(2);
    // Buyer holds 10 credits; 6 units at price 2 costs 12.
    let pair = w.pair(6, 2);
    assert_eq!(w.coop_close(id, Some(pair)).result, Err(LedgerError::InsufficientCredit));
    assert_eq!(w.ledger.channel(&id).unwrap().phase, ChannelPhase::Open);
}

#[test]
fn cooperative_close_needs_counterparty_approval() {
    let mut w = world();
    let id = w.open(2);
    let pair = w.pair(3, 2);
    let stale = w.pair(1, 2);
    // Approval for a different pair does not authorize this one.
    let approval = approve_close(&w.buyer.keypair, &id, Some(&pair));
    let tx = OnChainTx::CooperativeClose {
        channel_id: id,
        pair: Some(stale),
        counter_signature: approval,
    };
    assert_eq!(
        w.ledger.submit_tx(tx.sign(&w.seller.keypair)).result,
        Err(LedgerError::BadApproval)
    );
}

#[test]
fn pair_from_wrong_price_or_forged_is_bad_pair() {
    let mut w = world();
    let id = w.open(2);
    let at_price_3 = w.pair(2, 3);
    let r = w.unilateral(&w.seller.clone(), id, Some(at_price_3));
    assert_eq!(r.result, Err(LedgerError::BadPair(BadPairReason::PriceMismatch)));
    let mut forged = w.pair(2, 2);
    forged.credit_tx.signature = w.seller.keypair.sign(b"x");
    let r = w.unilateral(&w.seller.clone(), id, Some(forged));
    assert_eq!(r.result, Err(LedgerError::BadPair(BadPairReason::BadSignature)));
}

#[test]
fn unilateral_close_outsider() {
    let mut w = world();
    let id = w.open(2);
    let outsider = Identity::from_label("outsider");
    register(&mut w.ledger, &outsider, 0);
    let p = w.pair(1, 2);
    assert_eq!(w.unilateral(&outsider, id, Some(p)).result, Err(LedgerError::NotParticipant));
}

#[test]
fn challenge_flow_with_fraud_penalty() {
    let mut w = world();
    let id = w.open(2);
    w.ledger.advance_block(3).unwrap();
    let (s0, b0) = (w.credit(&w.seller), w.credit(&w.buyer));
    let seller = w.seller.clone();
    let buyer = w.buyer.clone();
    let stale = w.pair(1, 2);
    let latest = w.pair(4, 2);
    let r = w.unilateral(&seller, id, Some(stale));
    assert_eq!(
        r.result,
        Ok(TxEffect::ChannelChallenged {
            channel_id: id,
            deadline: 3 + 10
        })
    );
    assert_eq!(w.challenge(&buyer, id, stale).result, Err(LedgerError::NotNewer));
    let r = w.challenge(&buyer, id, latest);
    assert_eq!(
        r.result,
        Ok(TxEffect::ChallengeAccepted {
            channel_id: id,
            cheater: seller.address()
        })
    );
    assert_eq!(w.finalize(id).result, Err(LedgerError::DeadlineNotReached));
    w.ledger.advance_block(10).unwrap();
    assert!(w.ledger.is_finalizable(&id));
    assert!(w.finalize(id).is_ok());
    // Settled at iteration 4: 8 credits. Seller penalized, buyer rewarded.
    assert_eq!(w.credit(&w.seller), s0 + 8 - 5);
    assert_eq!(w.credit(&w.buyer), b0 - 8 + 1);
    assert!(w.ledger.replay_matches());
}

#[test]
fn challenge_rules() {
    let mut w = world();
    let id = w.open(2);
    let seller = w.seller.clone();
    let buyer = w.buyer.clone();
    assert_eq!(w.challenge(&buyer, id, w.pair(1, 2)).result, Err(LedgerError::NotChallenged));
    w.unilateral(&seller, id, Some(w.pair(2, 2)));
    assert_eq!(w.challenge(&buyer, id, w.pair(2, 2)).result, Err(LedgerError::NotNewer));
    assert_eq!(w.challenge(&buyer, id, w.pair(1, 2)).result, Err(LedgerError::NotNewer));
    assert_eq!(w.challenge(&seller, id, w.pair(3, 2)).result, Err(LedgerError::SelfChallenge));
    w.ledger.advance_block(10).unwrap();
    assert_eq!(w.challenge(&buyer, id, w.pair(3, 2)).result, Err(LedgerError::ChallengeExpired));
    assert!(w.finalize(id).is_ok());
    assert_eq!(w.finalize(id).result, Err(LedgerError::NotChallenged));
}

#[test]
fn timeout_close_without_challenge_settles_as_claimed() {
    let mut w = world();
    let id = w.open(2);
    let (s0, b0) = (w.credit(&w.seller), w.credit(&w.buyer));
    let buyer = w.buyer.clone();
    w.unilateral(&buyer, id, Some(w.pair(2, 2)));
    w.ledger.advance_block(10).unwrap();
    let r = w.finalize(id);
    let Ok(TxEffect::ChannelClosed(s)) = r.result else {
        panic!("{:?}", r.result)
    };
    assert!(!s.cooperative);
    assert!(s.cheaters.is_empty());
    assert_eq!(w.credit(&w.seller), s0 + 4 + 1);
    assert_eq!(w.credit(&w.buyer), b0 - 4 + 1);
}

#[test]
fn penalty_is_floored_at_zero() {
    let genesis = Identity::from_label("genesis");
    let mut cfg = LedgerConfig::new(genesis.address());
    cfg.initial_credit = 2;
    let seller = Identity::from_label("seller");
    let buyer = Identity::from_label("buyer");
    let mut ledger = Ledger::new(cfg);
    register(&mut ledger, &seller, 10);
    register(&mut ledger, &buyer, 10);
    let mut w = World {
        genesis,
        seller: seller.clone(),
        buyer: buyer.clone(),
        ledger,
    };
    let id = w.open(1);
    // Buyer cheats with the empty marker; seller challenges with iteration 1.
    w.unilateral(&buyer, id, None);
    w.challenge(&seller, id, w.pair(1, 1));
    w.ledger.advance_block(10).unwrap();
    assert!(w.finalize(id).is_ok());
    assert_eq!(w.credit(&buyer), 0);
}

#[test]
fn verify_offchain_tx_order_and_signature() {
    let w = world();
    let p = w.pair(1, 2);
    assert!(w.ledger.verify_offchain_tx(&p.energy_tx, 0));
    let p3 = w.pair(3, 2);
    assert!(!w.ledger.verify_offchain_tx(&p3.energy_tx, 0));
    let mut forged = p.energy_tx;
    forged.signature = w.buyer.keypair.sign(b"forged");
    assert!(!w.ledger.verify_offchain_tx(&forged, 0));
}

#[test]
fn conservation_without_bonus_or_penalty() {
    let genesis = Identity::from_label("genesis");
    let mut cfg = LedgerConfig::new(genesis.address());
    cfg.honesty_bonus = 0;
    cfg.initial_credit = 1000;
    let seller = Identity::from_label("seller");
    let buyer = Identity::from_label("buyer");
    let mut ledger = Ledger::new(cfg);
    register(&mut ledger, &seller, 100);
    register(&mut ledger, &buyer, 3);
    let mut w = World {
        genesis,
        seller,
        buyer,
        ledger,
    };
    let id = w.open(3);
    let total_credit = w.credit(&w.seller) + w.credit(&w.buyer);
    let total_energy = w.energy(&w.seller) + w.energy(&w.buyer);
    assert!(w.coop_close(id, Some(w.pair(17, 3))).is_ok());
    assert_eq!(w.credit(&w.seller) + w.credit(&w.buyer), total_credit);
    assert_eq!(w.energy(&w.seller) + w.energy(&w.buyer), total_energy);
}

#[test]
fn phases_are_monotone() {
    let mut w = world();
    let id = w.open(2);
    let seller = w.seller.clone();
    let buyer = w.buyer.clone();
    w.unilateral(&seller, id, Some(w.pair(1, 2)));
    w.challenge(&buyer, id, w.pair(2, 2));
    w.ledger.advance_block(10).unwrap();
    w.finalize(id);
    let ranks: Vec<u8> = w
        .ledger
        .phase_log()
        .iter()
        .filter(|e| e.channel_id == id)
        .map(|e| e.rank)
        .collect();
    assert_eq!(ranks, vec![0, 1, 2, 2, 3]);
    assert!(ranks.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn snapshot_roundtrip_and_tamper_detection() {
    let mut w = world();
    let id = w.open(2);
    w.coop_close(id, Some(w.pair(2, 2)));
    w.ledger.advance_block(4).unwrap();
    let snap = w.ledger.export_snapshot();
    let restored = Ledger::import_snapshot(&snap).unwrap();
    assert_eq!(restored.state_hash(), w.ledger.state_hash());
    assert_eq!(restored.export_snapshot(), snap);

    let mut bad = snap.clone();
    let n = bad.len();
    bad[n - 1] ^= 1;
    assert_eq!(Ledger::import_snapshot(&bad).unwrap_err(), SnapshotError::HashMismatch);
    assert_eq!(
        Ledger::import_snapshot(b"nope").unwrap_err(),
        SnapshotError::BadMagic
    );
}

#[test]
fn ledger_serves_as_credential_views() {
    let w = world();
    let view = w.ledger.did_view(&w.seller.did).unwrap();
    assert_eq!(view.verification_key, *w.seller.keypair.public_key());
    assert_eq!(view.status, DidStatus::Active);
}
