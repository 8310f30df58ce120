use serde::{Deserialize, Serialize};

use super::tx::{
    build_offchain_tx, check_offchain_tx, sign_offchain_tx, ChannelId, ExchangeId, OffChainTxPair,
    SignedOffChainTx, TxCheck, TxRejection, ValueKind,
};
use crate::identity::{Address, KeyPair, PublicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Buyer,
    Seller,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum ChannelError {
    #[error("transaction rejected: {0:?}")]
    Rejected(TxRejection),
    #[error("out of order: expected iteration {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("half-iteration {0} already received")]
    DuplicateHalf(u64),
    #[error("a {0:?} transaction is not expected from the peer in this role")]
    UnexpectedKind(ValueKind),
    #[error("transaction does not belong to this channel")]
    WrongChannel,
    #[error("cumulative value {got} does not match expected {expected}")]
    WrongValue { expected: u64, got: u64 },
    #[error("an iteration is half complete")]
    PendingIncomplete,
    #[error("this role cannot perform that step")]
    WrongRole,
    #[error("close proposal does not match local state")]
    CloseMismatch,
    #[error("unit price must be at least 1")]
    InvalidPrice,
}

/// Cooperative close request carrying the proposer's view of the final state.
/// `pair == None` is the empty-trade marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloseProposal {
    pub channel_id: ChannelId,
    pub exchange_id: ExchangeId,
    pub iteration: u64,
    pub pair: Option<OffChainTxPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum TimeoutAction {
    Wait,
    /// Submit the last complete pair (or the empty-trade marker) on chain.
    UnilateralClose(Option<OffChainTxPair>),
}

/// One party's replica of a two-party energy channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalChannelState {
    pub channel_id: ChannelId,
    pub exchange_id: ExchangeId,
    pub role: Role,
    pub me: Address,
    pub peer: Address,
    pub peer_key: PublicKey,
    pub unit_price: u64,
    pub last_complete_iteration: u64,
    pub cumulative_energy: u64,
    pub cumulative_credit: u64,
    /// Energy half of iteration `last_complete_iteration + 1`, if sent/received.
    pub pending: Option<SignedOffChainTx>,
    pub last_pair: Option<OffChainTxPair>,
    /// Blocks since the last message from the peer.
    pub deadline_clock: u64,
}

impl LocalChannelState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        channel_id: ChannelId,
        exchange_id: ExchangeId,
        role: Role,
        me: Address,
        peer: Address,
        peer_key: PublicKey,
        unit_price: u64,
    ) -> Result<Self, ChannelError> {
        if unit_price == 0 {
            return Err(ChannelError::InvalidPrice);
        }
        Ok(LocalChannelState {
            channel_id,
            exchange_id,
            role,
            me,
            peer,
            peer_key,
            unit_price,
            last_complete_iteration: 0,
            cumulative_energy: 0,
            cumulative_credit: 0,
            pending: None,
            last_pair: None,
            deadline_clock: 0,
        })
    }

    fn next_iteration(&self) -> u64 {
        self.last_complete_iteration + 1
    }

    fn seller_buyer(&self) -> (Address, Address) {
        match self.role {
            Role::Seller => (self.me, self.peer),
            Role::Buyer => (self.peer, self.me),
        }
    }

    /// Seller: sign the energy half for the next unit after physically
    /// transferring it.
    pub fn send_energy(&mut self, keypair: &KeyPair) -> Result<SignedOffChainTx, ChannelError> {
        if self.role != Role::Seller {
            return Err(ChannelError::WrongRole);
        }
        if self.pending.is_some() {
            return Err(ChannelError::PendingIncomplete);
        }
        let n = self.next_iteration();
        let tx = build_offchain_tx(self.exchange_id, n, self.me, self.peer, n, ValueKind::EnergyUnits)
            .expect("fields valid by construction");
        let stx = sign_offchain_tx(keypair, tx).map_err(|_| ChannelError::WrongRole)?;
        self.pending = Some(stx);
        Ok(stx)
    }

    /// Buyer: sign the credit half answering the pending energy half.
    pub fn send_credit(&mut self, keypair: &KeyPair) -> Result<SignedOffChainTx, ChannelError> {
        if self.role != Role::Buyer {
            return Err(ChannelError::WrongRole);
        }
        let energy = self.pending.ok_or(ChannelError::OutOfOrder {
            expected: self.next_iteration(),
            got: self.next_iteration(),
        })?;
        let n = energy.tx.iteration;
        let tx = build_offchain_tx(
            self.exchange_id,
            n,
            self.me,
            self.peer,
            n * self.unit_price,
            ValueKind::CreditScore,
        )
        .expect("fields valid by construction");
        let stx = sign_offchain_tx(keypair, tx).map_err(|_| ChannelError::WrongRole)?;
        self.complete(energy, stx);
        Ok(stx)
    }

    fn complete(&mut self, energy_tx: SignedOffChainTx, credit_tx: SignedOffChainTx) {
        self.pending = None;
        self.last_complete_iteration = energy_tx.tx.iteration;
        self.cumulative_energy = energy_tx.tx.value;
        self.cumulative_credit = credit_tx.tx.value;
        self.last_pair = Some(OffChainTxPair {
            energy_tx,
            credit_tx,
        });
    }

    /// Process one transaction from the peer.
    pub fn apply_incoming(&mut self, stx: &SignedOffChainTx) -> Result<(), ChannelError> {
        let tx = &stx.tx;
        let expected_kind = match self.role {
            Role::Buyer => ValueKind::EnergyUnits,
            Role::Seller => ValueKind::CreditScore,
        };
        if tx.value_kind != expected_kind {
            return Err(ChannelError::UnexpectedKind(tx.value_kind));
        }
        if tx.exchange_id != self.exchange_id || tx.sender != self.peer || tx.receiver != self.me {
            return Err(ChannelError::WrongChannel);
        }
        // Signature and field validity first, so replays surface as
        // duplicates rather than iteration mismatches.
        match check_offchain_tx(stx, tx.iteration, &self.peer_key) {
            TxCheck::Accepted => {}
            TxCheck::Rejected(r) => return Err(ChannelError::Rejected(r)),
        }
        let next = self.next_iteration();
        match self.role {
            Role::Buyer => {
                if tx.iteration < next || (tx.iteration == next && self.pending.is_some()) {
                    return Err(ChannelError::DuplicateHalf(tx.iteration));
                }
                if tx.iteration != next {
                    return Err(ChannelError::OutOfOrder {
                        expected: next,
                        got: tx.iteration,
                    });
                }
                if tx.value != next {
                    return Err(ChannelError::WrongValue {
                        expected: next,
                        got: tx.value,
                    });
                }
                self.pending = Some(*stx);
            }
            Role::Seller => {
                if tx.iteration < next {
                    return Err(ChannelError::DuplicateHalf(tx.iteration));
                }
                let energy = match self.pending {
                    Some(e) if tx.iteration == next => e,
                    _ => {
                        return Err(ChannelError::OutOfOrder {
                            expected: next,
                            got: tx.iteration,
                        })
                    }
                };
                let expected = next * self.unit_price;
                if tx.value != expected {
                    return Err(ChannelError::WrongValue {
                        expected,
                        got: tx.value,
                    });
                }
                self.complete(energy, *stx);
            }
        }
        self.deadline_clock = 0;
        Ok(())
    }

    pub fn tick(&mut self, blocks: u64) {
        self.deadline_clock += blocks;
    }

    pub fn propose_close(&self) -> Result<CloseProposal, ChannelError> {
        if self.pending.is_some() {
            return Err(ChannelError::PendingIncomplete);
        }
        Ok(CloseProposal {
            channel_id: self.channel_id,
            exchange_id: self.exchange_id,
            iteration: self.last_complete_iteration,
            pair: self.last_pair,
        })
    }

    /// Countersign a peer's close proposal by checking it against local state.
    pub fn accept_close(&self, msg: &CloseProposal) -> Result<Option<OffChainTxPair>, ChannelError> {
        if self.pending.is_some() {
            return Err(ChannelError::PendingIncomplete);
        }
        if msg.channel_id != self.channel_id
            || msg.exchange_id != self.exchange_id
            || msg.iteration != self.last_complete_iteration
            || msg.pair != self.last_pair
        {
            return Err(ChannelError::CloseMismatch);
        }
        Ok(self.last_pair)
    }

    /// The pair a unilateral close submits: the last complete iteration, with
    /// any half-finished one rolled back.
    pub fn unilateral_claim(&self) -> Option<OffChainTxPair> {
        self.last_pair
    }

    pub fn on_timeout(&self, blocks_waited: u64, delta: u64) -> TimeoutAction {
        if blocks_waited >= delta {
            TimeoutAction::UnilateralClose(self.unilateral_claim())
        } else {
            TimeoutAction::Wait
        }
    }

    /// Credits owed for energy that has moved minus credits received, from
    /// the seller's point of view. Zero at every complete iteration.
    pub fn outstanding_credit(&self) -> u64 {
        let delivered = self
            .pending
            .map(|p| p.tx.value)
            .unwrap_or(self.cumulative_energy);
        delivered * self.unit_price - self.cumulative_credit
    }

    pub fn seller(&self) -> Address {
        self.seller_buyer().0
    }

    pub fn buyer(&self) -> Address {
        self.seller_buyer().1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::Identity;
    use proptest::prelude::*;

    struct Pair {
        seller_id: Identity,
        buyer_id: Identity,
        seller: LocalChannelState,
        buyer: LocalChannelState,
    }

    fn channel(price: u64) -> Pair {
        let s = Identity::from_label("seller");
        let b = Identity::from_label("buyer");
        let cid = ChannelId([1; 16]);
        let xid = ExchangeId([2; 16]);
        let seller = LocalChannelState::new(cid, xid, Role::Seller, s.address(), b.address(), *b.keypair.public_key(), price).unwrap();
        let buyer = LocalChannelState::new(cid, xid, Role::Buyer, b.address(), s.address(), *s.keypair.public_key(), price).unwrap();
        Pair { seller_id: s, buyer_id: b, seller, buyer }
    }

    impl Pair {
        fn iterate(&mut self) {
            let e = self.seller.send_energy(&self.seller_id.keypair).unwrap();
            self.buyer.apply_incoming(&e).unwrap();
            let c = self.buyer.send_credit(&self.buyer_id.keypair).unwrap();
            self.seller.apply_incoming(&c).unwrap();
        }
    }

    #[test]
    fn first_iteration_at_price_two() {
        let mut p = channel(2);
        p.iterate();
        assert_eq!(p.seller.cumulative_credit, 2);
        assert_eq!(p.seller.cumulative_energy, 1);
        assert_eq!(p.seller.last_complete_iteration, 1);
        assert_eq!(p.seller.last_pair, p.buyer.last_pair);
    }

    #[test]
    fn duplicate_and_out_of_order_halves() {
        let mut p = channel(2);
        let e1 = p.seller.send_energy(&p.seller_id.keypair).unwrap();
        p.buyer.apply_incoming(&e1).unwrap();
        assert_eq!(p.buyer.apply_incoming(&e1), Err(ChannelError::DuplicateHalf(1)));
        let c1 = p.buyer.send_credit(&p.buyer_id.keypair).unwrap();
        p.seller.apply_incoming(&c1).unwrap();
        assert_eq!(p.seller.apply_incoming(&c1), Err(ChannelError::DuplicateHalf(1)));

        // A correctly signed credit half for iteration 3 while at iteration 1.
        let tx = build_offchain_tx(p.buyer.exchange_id, 3, p.buyer.me, p.buyer.peer, 6, ValueKind::CreditScore).unwrap();
        let c3 = sign_offchain_tx(&p.buyer_id.keypair, tx).unwrap();
        assert_eq!(
            p.seller.apply_incoming(&c3),
            Err(ChannelError::OutOfOrder { expected: 2, got: 3 })
        );
    }

    #[test]
    fn wrong_value_and_wrong_kind() {
        let mut p = channel(2);
        let e1 = p.seller.send_energy(&p.seller_id.keypair).unwrap();
        p.buyer.apply_incoming(&e1).unwrap();
        let tx = build_offchain_tx(p.buyer.exchange_id, 1, p.buyer.me, p.buyer.peer, 1, ValueKind::CreditScore).unwrap();
        let cheap = sign_offchain_tx(&p.buyer_id.keypair, tx).unwrap();
        assert_eq!(
            p.seller.apply_incoming(&cheap),
            Err(ChannelError::WrongValue { expected: 2, got: 1 })
        );
        assert_eq!(
            p.seller.apply_incoming(&e1),
            Err(ChannelError::UnexpectedKind(ValueKind::EnergyUnits))
        );
    }

    #[test]
    fn forged_incoming_is_rejected() {
        let mut p = channel(2);
        let tx = build_offchain_tx(p.buyer.exchange_id, 1, p.buyer.peer, p.buyer.me, 1, ValueKind::EnergyUnits).unwrap();
        // The buyer cannot mint an energy half in the seller's name.
        let forged = SignedOffChainTx {
            tx,
            signature: p.buyer_id.keypair.sign(&crate::codec::Encode::canonical_bytes(&tx)),
        };
        assert_eq!(
            p.buyer.apply_incoming(&forged),
            Err(ChannelError::Rejected(TxRejection::BadSig))
        );
    }

    #[test]
    fn close_after_three_iterations() {
        let mut p = channel(2);
        for _ in 0..3 {
            p.iterate();
        }
        let prop = p.seller.propose_close().unwrap();
        assert_eq!(prop.iteration, 3);
        let pair = p.buyer.accept_close(&prop).unwrap().unwrap();
        assert_eq!(pair.iteration(), 3);
        assert_eq!(pair.credits(), 6);
    }

    #[test]
    fn mid_iteration_blocks_cooperative_close_only() {
        let mut p = channel(2);
        p.iterate();
        let e2 = p.seller.send_energy(&p.seller_id.keypair).unwrap();
        p.buyer.apply_incoming(&e2).unwrap();
        assert_eq!(p.seller.propose_close(), Err(ChannelError::PendingIncomplete));
        assert_eq!(p.buyer.propose_close(), Err(ChannelError::PendingIncomplete));
        assert_eq!(p.seller.unilateral_claim().unwrap().iteration(), 1);
        assert_eq!(p.seller.outstanding_credit(), 2);
    }

    #[test]
    fn zero_iteration_close_is_empty_marker() {
        let p = channel(2);
        let prop = p.buyer.propose_close().unwrap();
        assert_eq!(prop.pair, None);
        assert_eq!(p.seller.accept_close(&prop), Ok(None));
    }

    #[test]
    fn mismatched_close_is_refused() {
        let mut p = channel(2);
        p.iterate();
        let mut prop = p.seller.propose_close().unwrap();
        prop.iteration = 0;
        prop.pair = None;
        assert_eq!(p.buyer.accept_close(&prop), Err(ChannelError::CloseMismatch));
    }

    #[test]
    fn timeout_threshold() {
        let mut p = channel(2);
        assert_eq!(p.seller.on_timeout(4, 5), TimeoutAction::Wait);
        assert_eq!(p.seller.on_timeout(5, 5), TimeoutAction::UnilateralClose(None));
        p.iterate();
        assert!(matches!(
            p.buyer.on_timeout(5, 5),
            TimeoutAction::UnilateralClose(Some(pair)) if pair.iteration() == 1
        ));
    }

    #[test]
    fn zero_price_is_rejected() {
        let s = Identity::from_label("s");
        let b = Identity::from_label("b");
        assert_eq!(
            LocalChannelState::new(ChannelId([0; 16]), ExchangeId([0; 16]), Role::Seller, s.address(), b.address(), *b.keypair.public_key(), 0),
            Err(ChannelError::InvalidPrice)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Mirrored replicas agree after any number of iterations, and the
        /// pay-per-unit exposure never exceeds one unit.
        #[test]
        fn mirrored_states_agree(n in 0u64..=50, price in 1u64..=5) {
            let mut p = channel(price);
            let mut seen = Vec::new();
            for _ in 0..n {
                let e = p.seller.send_energy(&p.seller_id.keypair).unwrap();
                prop_assert!(p.seller.outstanding_credit() <= price);
                p.buyer.apply_incoming(&e).unwrap();
                let c = p.buyer.send_credit(&p.buyer_id.keypair).unwrap();
                p.seller.apply_incoming(&c).unwrap();
                prop_assert_eq!(p.seller.outstanding_credit(), 0);
                prop_assert_eq!(p.seller.cumulative_credit, p.seller.cumulative_energy * price);
                seen.push(p.seller.last_complete_iteration);
            }
            prop_assert_eq!(seen, (1..=n).collect::<Vec<_>>());
            prop_assert_eq!(&p.seller.last_pair, &p.buyer.last_pair);
            prop_assert_eq!(p.seller.last_complete_iteration, p.buyer.last_complete_iteration);
            prop_assert_eq!(p.seller.cumulative_credit, p.buyer.cumulative_credit);
            prop_assert_eq!(p.seller.cumulative_energy, p.buyer.cumulative_energy);
        }
    }
}
