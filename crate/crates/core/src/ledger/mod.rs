//! Deterministic single-writer stand-in for the Layer-1 chain.
//!
//! The registry, issuer, energy-trade and on-chain verifier contracts are
//! state transitions applied by [`Ledger::submit_tx`]. Every successful
//! transaction and every block advance is appended to the log, and replaying
//! the log from genesis reproduces the same [`Ledger::state_hash`].

mod snapshot;
mod state;
mod tx;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use snapshot::SnapshotError;
pub use state::{AccountState, ChannelPhase, OnChainChannelRecord, RegistryEntry, Settlement};
pub use tx::{
    approve_close, close_approval_message, kind, ChannelTerms, OnChainTx, SignedOnChainTx,
};

use crate::channel::{ChannelId, ExchangeId, OffChainTxPair, PairError, SignedOffChainTx};
use crate::codec::{self, Decode, DecodeError, Encode, Reader, Writer};
use crate::credentials::{DidStatus, DidStatusView, DidView, IssuerView};
use crate::identity::{create_did, verify, Address, Did, DidDocument, Multiaddr, PublicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub challenge_period: u64,
    pub initial_credit: i64,
    pub credit_floor: i64,
    pub fraud_penalty: i64,
    pub honesty_bonus: i64,
    /// The only account allowed to add trusted issuers.
    pub genesis_authority: Address,
}

impl LedgerConfig {
    pub const DEFAULT_CHALLENGE_PERIOD: u64 = 10;
    pub const DEFAULT_INITIAL_CREDIT: i64 = 10;
    pub const DEFAULT_FRAUD_PENALTY: i64 = 5;
    pub const DEFAULT_HONESTY_BONUS: i64 = 1;

    pub fn new(genesis_authority: Address) -> Self {
        LedgerConfig {
            challenge_period: Self::DEFAULT_CHALLENGE_PERIOD,
            initial_credit: Self::DEFAULT_INITIAL_CREDIT,
            credit_floor: 0,
            fraud_penalty: Self::DEFAULT_FRAUD_PENALTY,
            honesty_bonus: Self::DEFAULT_HONESTY_BONUS,
            genesis_authority,
        }
    }
}

impl Encode for LedgerConfig {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.challenge_period)
            .i64(self.initial_credit)
            .i64(self.credit_floor)
            .i64(self.fraud_penalty)
            .i64(self.honesty_bonus)
            .put(&self.genesis_authority);
    }
}

impl Decode for LedgerConfig {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(LedgerConfig {
            challenge_period: r.u64()?,
            initial_credit: r.i64()?,
            credit_floor: r.i64()?,
            fraud_penalty: r.i64()?,
            honesty_bonus: r.i64()?,
            genesis_authority: r.get()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BadPairReason {
    Inconsistent(PairError),
    WrongExchange,
    WrongParties,
    PriceMismatch,
    BadSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum LedgerError {
    #[error("transaction signature does not verify")]
    BadSignature,
    #[error("unknown transaction kind {0}")]
    UnknownTxKind(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("block advance must be at least 1")]
    ZeroAdvance,
    #[error("DID already registered")]
    DuplicateDid,
    #[error("document does not match the DID or its key")]
    DocMismatch,
    #[error("sender does not own the DID being registered")]
    NotOwner,
    #[error("unknown DID")]
    UnknownDid,
    #[error("sender is not the DID controller")]
    NotController,
    #[error("DID already revoked")]
    AlreadyRevoked,
    #[error("sender is not the genesis authority")]
    NotAuthorized,
    #[error("issuer already trusted")]
    DuplicateIssuer,
    #[error("channel or exchange id already used")]
    DuplicateChannel,
    #[error("unknown channel")]
    UnknownChannel,
    #[error("a participant's DID is revoked")]
    RevokedParticipant,
    #[error("participant already confirmed")]
    DoubleConfirm,
    #[error("confirmation terms differ from the pending channel")]
    TermsMismatch,
    #[error("invalid channel terms")]
    InvalidTerms,
    #[error("sender is not a channel participant")]
    NotParticipant,
    #[error("channel is not open")]
    NotOpen,
    #[error("bad transaction pair: {0:?}")]
    BadPair(BadPairReason),
    #[error("counterparty approval does not verify")]
    BadApproval,
    #[error("buyer credit would fall below the floor")]
    InsufficientCredit,
    #[error("seller settled energy would go negative")]
    InsufficientEnergy,
    #[error("channel is not in a challenge period")]
    NotChallenged,
    #[error("challenge period has not ended")]
    DeadlineNotReached,
    #[error("challenge period is over")]
    ChallengeExpired,
    #[error("pair is not newer than the current candidate")]
    NotNewer,
    #[error("a party cannot challenge its own claim")]
    SelfChallenge,
}

impl LedgerError {
    /// Stable numeric code used across the C boundary.
    pub fn code(&self) -> i32 {
        use LedgerError::*;
        match self {
            BadSignature => 100,
            UnknownTxKind(_) => 101,
            Malformed(_) => 102,
            ZeroAdvance => 103,
            DuplicateDid => 110,
            DocMismatch => 111,
            NotOwner => 112,
            UnknownDid => 113,
            NotController => 114,
            AlreadyRevoked => 115,
            NotAuthorized => 120,
            DuplicateIssuer => 121,
            DuplicateChannel => 130,
            UnknownChannel => 131,
            RevokedParticipant => 132,
            DoubleConfirm => 133,
            TermsMismatch => 134,
            InvalidTerms => 135,
            NotParticipant => 136,
            NotOpen => 137,
            BadPair(_) => 138,
            BadApproval => 139,
            InsufficientCredit => 140,
            InsufficientEnergy => 141,
            NotChallenged => 150,
            DeadlineNotReached => 151,
            ChallengeExpired => 152,
            NotNewer => 153,
            SelfChallenge => 154,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxEffect {
    DidRegistered(Did),
    DidRevoked(Did),
    IssuerAdded(Did),
    ChannelPending(ChannelId),
    ChannelOpened(ChannelId),
    ChannelChallenged { channel_id: ChannelId, deadline: u64 },
    ChallengeAccepted { channel_id: ChannelId, cheater: Address },
    ChannelClosed(Settlement),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub height: u64,
    pub kind: u8,
    pub result: Result<TxEffect, LedgerError>,
}

impl Receipt {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum LogEntry {
    Tx(SignedOnChainTx),
    Advance(u64),
}

impl Encode for LogEntry {
    fn encode(&self, w: &mut Writer) {
        match self {
            LogEntry::Tx(tx) => {
                w.u8(0).put(tx);
            }
            LogEntry::Advance(n) => {
                w.u8(1).u64(*n);
            }
        }
    }
}

impl Decode for LogEntry {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(LogEntry::Tx(r.get()?)),
            1 => Ok(LogEntry::Advance(r.u64()?)),
            t => Err(DecodeError::invalid("log_entry", format!("tag {t}"))),
        }
    }
}

/// One recorded channel phase change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEvent {
    pub channel_id: ChannelId,
    pub phase: &'static str,
    pub rank: u8,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedDid {
    pub document: DidDocument,
    pub multiaddr: Multiaddr,
    pub status: DidStatus,
    pub created_at: u64,
    pub account: AccountState,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    config: LedgerConfig,
    height: u64,
    registry: BTreeMap<Did, RegistryEntry>,
    issuers: BTreeSet<Did>,
    accounts: BTreeMap<Address, AccountState>,
    channels: BTreeMap<ChannelId, OnChainChannelRecord>,
    exchanges: BTreeSet<ExchangeId>,
    tx_log: Vec<LogEntry>,
    phase_log: Vec<PhaseEvent>,
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Self {
        Ledger {
            config,
            height: 0,
            registry: BTreeMap::new(),
            issuers: BTreeSet::new(),
            accounts: BTreeMap::new(),
            channels: BTreeMap::new(),
            exchanges: BTreeSet::new(),
            tx_log: Vec::new(),
            phase_log: Vec::new(),
        }
    }

    /// Rebuild a ledger by replaying a log from genesis.
    pub fn replay(config: LedgerConfig, log: &[LogEntry]) -> Result<Self, (usize, LedgerError)> {
        let mut ledger = Ledger::new(config);
        for (i, entry) in log.iter().enumerate() {
            match entry {
                LogEntry::Tx(tx) => {
                    if let Err(e) = ledger.submit_tx(tx.clone()).result {
                        return Err((i, e));
                    }
                }
                LogEntry::Advance(n) => {
                    ledger.advance_block(*n).map_err(|e| (i, e))?;
                }
            }
        }
        Ok(ledger)
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn tx_log(&self) -> &[LogEntry] {
        &self.tx_log
    }

    pub fn phase_log(&self) -> &[PhaseEvent] {
        &self.phase_log
    }

    pub fn advance_block(&mut self, n: u64) -> Result<u64, LedgerError> {
        if n == 0 {
            return Err(LedgerError::ZeroAdvance);
        }
        self.height += n;
        self.tx_log.push(LogEntry::Advance(n));
        Ok(self.height)
    }

    /// Verify, decode and apply one transaction. Failed transactions leave
    /// the state untouched and are not logged.
    pub fn submit_tx(&mut self, tx: SignedOnChainTx) -> Receipt {
        let result = self.apply(&tx);
        if result.is_ok() {
            self.tx_log.push(LogEntry::Tx(tx.clone()));
        }
        Receipt {
            height: self.height,
            kind: tx.kind,
            result,
        }
    }

    fn apply(&mut self, stx: &SignedOnChainTx) -> Result<TxEffect, LedgerError> {
        if !stx.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let tx = OnChainTx::from_parts(stx.kind, &stx.payload)
            .map_err(|e| LedgerError::Malformed(e.to_string()))?
            .ok_or(LedgerError::UnknownTxKind(stx.kind))?;
        let sender = stx.sender;
        match tx {
            OnChainTx::RegisterDid {
                did,
                document,
                multiaddr,
                reported_energy,
            } => self.register_did(sender, did, document, multiaddr, reported_energy),
            OnChainTx::RevokeDid { did } => self.revoke_did(sender, did),
            OnChainTx::AddIssuer { issuer_did } => self.add_issuer(sender, issuer_did),
            OnChainTx::ConfirmChannel { terms } => self.confirm_channel(sender, terms),
            OnChainTx::CooperativeClose {
                channel_id,
                pair,
                counter_signature,
            } => self.cooperative_close(sender, channel_id, pair, counter_signature),
            OnChainTx::UnilateralClose { channel_id, pair } => {
                self.unilateral_close(sender, channel_id, pair)
            }
            OnChainTx::Challenge { channel_id, pair } => self.challenge(sender, channel_id, pair),
            OnChainTx::FinalizeClose { channel_id } => self.finalize_close(channel_id),
        }
    }

    // ---- registry contract ----

    fn register_did(
        &mut self,
        sender: Address,
        did: Did,
        document: DidDocument,
        multiaddr: Multiaddr,
        reported_energy: u64,
    ) -> Result<TxEffect, LedgerError> {
        if self.registry.contains_key(&did) {
            return Err(LedgerError::DuplicateDid);
        }
        if document.id != did || !document.is_bound() {
            return Err(LedgerError::DocMismatch);
        }
        if sender != did.address() {
            return Err(LedgerError::NotOwner);
        }
        self.registry.insert(
            did,
            RegistryEntry {
                did,
                multiaddr,
                document,
                created_at: self.height,
                status: DidStatus::Active,
            },
        );
        self.accounts.insert(
            did.address(),
            AccountState {
                credit_score: self.config.initial_credit,
                energy_level: reported_energy,
            },
        );
        Ok(TxEffect::DidRegistered(did))
    }

    fn revoke_did(&mut self, sender: Address, did: Did) -> Result<TxEffect, LedgerError> {
        let entry = self.registry.get_mut(&did).ok_or(LedgerError::UnknownDid)?;
        if entry.document.controller.address() != sender {
            return Err(LedgerError::NotController);
        }
        if entry.status == DidStatus::Revoked {
            return Err(LedgerError::AlreadyRevoked);
        }
        entry.status = DidStatus::Revoked;
        Ok(TxEffect::DidRevoked(did))
    }

    pub fn resolve_did(&self, did: &Did) -> Result<ResolvedDid, LedgerError> {
        let entry = self.registry.get(did).ok_or(LedgerError::UnknownDid)?;
        Ok(ResolvedDid {
            document: entry.document.clone(),
            multiaddr: entry.multiaddr.clone(),
            status: entry.status,
            created_at: entry.created_at,
            account: self.accounts[&did.address()],
        })
    }

    pub fn registry_entry(&self, did: &Did) -> Option<&RegistryEntry> {
        self.registry.get(did)
    }

    fn key_of(&self, address: &Address) -> Option<PublicKey> {
        self.registry
            .get(&create_did(*address))
            .map(|e| e.document.verification_key)
    }

    fn require_active(&self, address: &Address) -> Result<(), LedgerError> {
        match self.registry.get(&create_did(*address)) {
            None => Err(LedgerError::UnknownDid),
            Some(e) if e.status == DidStatus::Revoked => Err(LedgerError::RevokedParticipant),
            Some(_) => Ok(()),
        }
    }

    // ---- issuer contract ----

    fn add_issuer(&mut self, sender: Address, issuer_did: Did) -> Result<TxEffect, LedgerError> {
        if sender != self.config.genesis_authority {
            return Err(LedgerError::NotAuthorized);
        }
        if !self.issuers.insert(issuer_did) {
            return Err(LedgerError::DuplicateIssuer);
        }
        Ok(TxEffect::IssuerAdded(issuer_did))
    }

    pub fn is_trusted_issuer(&self, did: &Did) -> bool {
        self.issuers.contains(did)
    }

    // ---- accounts ----

    pub fn account(&self, address: &Address) -> Option<AccountState> {
        self.accounts.get(address).copied()
    }

    pub fn accounts(&self) -> &BTreeMap<Address, AccountState> {
        &self.accounts
    }

    // ---- energy trade contract ----

    pub fn channel(&self, id: &ChannelId) -> Option<&OnChainChannelRecord> {
        self.channels.get(id)
    }

    fn set_phase(&mut self, id: ChannelId, phase: ChannelPhase) {
        let record = self.channels.get_mut(&id).expect("channel exists");
        debug_assert!(phase.rank() >= record.phase.rank());
        self.phase_log.push(PhaseEvent {
            channel_id: id,
            phase: phase.name(),
            rank: phase.rank(),
            height: self.height,
        });
        record.phase = phase;
    }

    fn confirm_channel(&mut self, sender: Address, terms: ChannelTerms) -> Result<TxEffect, LedgerError> {
        if terms.seller == terms.buyer || terms.unit_price == 0 {
            return Err(LedgerError::InvalidTerms);
        }
        if sender != terms.seller && sender != terms.buyer {
            return Err(LedgerError::NotParticipant);
        }
        self.require_active(&terms.seller)?;
        self.require_active(&terms.buyer)?;
        let is_seller = sender == terms.seller;
        match self.channels.get_mut(&terms.channel_id) {
            None => {
                if self.exchanges.contains(&terms.exchange_id) {
                    return Err(LedgerError::DuplicateChannel);
                }
                self.exchanges.insert(terms.exchange_id);
                self.channels.insert(
                    terms.channel_id,
                    OnChainChannelRecord {
                        terms,
                        confirmations: (is_seller, !is_seller),
                        phase: ChannelPhase::Pending,
                        cheaters: BTreeSet::new(),
                        opened_at: None,
                        closed_at: None,
                        settlement: None,
                    },
                );
                self.phase_log.push(PhaseEvent {
                    channel_id: terms.channel_id,
                    phase: "Pending",
                    rank: 0,
                    height: self.height,
                });
                Ok(TxEffect::ChannelPending(terms.channel_id))
            }
            Some(record) => {
                if record.phase != ChannelPhase::Pending {
                    return Err(LedgerError::DuplicateChannel);
                }
                if record.terms != terms {
                    return Err(LedgerError::TermsMismatch);
                }
                let slot = if is_seller {
                    &mut record.confirmations.0
                } else {
                    &mut record.confirmations.1
                };
                if *slot {
                    return Err(LedgerError::DoubleConfirm);
                }
                *slot = true;
                record.opened_at = Some(self.height);
                self.set_phase(terms.channel_id, ChannelPhase::Open);
                Ok(TxEffect::ChannelOpened(terms.channel_id))
            }
        }
    }

    // ---- on-chain verifier contract ----

    /// Signature against the registered key of `tx.sender` and strict
    /// iteration order.
    pub fn verify_offchain_tx(&self, stx: &SignedOffChainTx, expected_prev_iteration: u64) -> bool {
        match self.key_of(&stx.tx.sender) {
            Some(key) => {
                stx.verify_with(&key) && Some(stx.tx.iteration) == expected_prev_iteration.checked_add(1)
            }
            None => false,
        }
    }

    fn verify_pair(&self, record: &OnChainChannelRecord, pair: &OffChainTxPair) -> Result<(), LedgerError> {
        let bad = |r| Err(LedgerError::BadPair(r));
        if let Err(e) = pair.check_consistency() {
            return bad(BadPairReason::Inconsistent(e));
        }
        if pair.exchange_id() != record.terms.exchange_id {
            return bad(BadPairReason::WrongExchange);
        }
        if pair.seller() != record.terms.seller || pair.buyer() != record.terms.buyer {
            return bad(BadPairReason::WrongParties);
        }
        if pair.energy_units() != pair.iteration()
            || Some(pair.credits()) != pair.energy_units().checked_mul(record.terms.unit_price)
        {
            return bad(BadPairReason::PriceMismatch);
        }
        let prev = pair.iteration() - 1;
        if !self.verify_offchain_tx(&pair.energy_tx, prev) || !self.verify_offchain_tx(&pair.credit_tx, prev) {
            return bad(BadPairReason::BadSignature);
        }
        Ok(())
    }

    fn open_record(&self, sender: &Address, id: &ChannelId) -> Result<&OnChainChannelRecord, LedgerError> {
        let record = self.channels.get(id).ok_or(LedgerError::UnknownChannel)?;
        if !record.is_participant(sender) {
            return Err(LedgerError::NotParticipant);
        }
        if record.phase != ChannelPhase::Open {
            return Err(LedgerError::NotOpen);
        }
        Ok(record)
    }

    /// Compute the post-settlement accounts without mutating anything.
    fn settle(
        &self,
        record: &OnChainChannelRecord,
        pair: Option<&OffChainTxPair>,
        cooperative: bool,
    ) -> Result<(Settlement, AccountState, AccountState), LedgerError> {
        let (seller, buyer) = record.participants();
        let mut s = self.accounts[&seller];
        let mut b = self.accounts[&buyer];
        let energy = pair.map_or(0, |p| p.energy_units());
        let credits = pair.map_or(0, |p| p.credits());
        let credits_i = i64::try_from(credits).map_err(|_| LedgerError::InsufficientCredit)?;

        b.credit_score = b
            .credit_score
            .checked_sub(credits_i)
            .filter(|c| *c >= self.config.credit_floor)
            .ok_or(LedgerError::InsufficientCredit)?;
        s.credit_score += credits_i;
        s.energy_level = s
            .energy_level
            .checked_sub(energy)
            .ok_or(LedgerError::InsufficientEnergy)?;
        b.energy_level += energy;

        let floor = self.config.credit_floor;
        for (addr, acct) in [(seller, &mut s), (buyer, &mut b)] {
            if record.cheaters.contains(&addr) {
                let penalized = (acct.credit_score - self.config.fraud_penalty).max(floor);
                acct.credit_score = penalized.min(acct.credit_score);
            } else {
                acct.credit_score += self.config.honesty_bonus;
            }
        }
        let settlement = Settlement {
            channel_id: record.terms.channel_id,
            iteration: pair.map_or(0, |p| p.iteration()),
            energy_units: energy,
            credits,
            cooperative,
            seller_credit_delta: s.credit_score - self.accounts[&seller].credit_score,
            buyer_credit_delta: b.credit_score - self.accounts[&buyer].credit_score,
            cheaters: record.cheaters.iter().copied().collect(),
        };
        Ok((settlement, s, b))
    }

    fn commit_close(&mut self, settlement: Settlement, s: AccountState, b: AccountState) -> TxEffect {
        let id = settlement.channel_id;
        let (seller, buyer) = self.channels[&id].participants();
        self.accounts.insert(seller, s);
        self.accounts.insert(buyer, b);
        let record = self.channels.get_mut(&id).expect("channel exists");
        record.closed_at = Some(self.height);
        record.settlement = Some(settlement.clone());
        self.set_phase(id, ChannelPhase::Closed);
        TxEffect::ChannelClosed(settlement)
    }

    fn cooperative_close(
        &mut self,
        sender: Address,
        id: ChannelId,
        pair: Option<OffChainTxPair>,
        counter_signature: crate::identity::Signature,
    ) -> Result<TxEffect, LedgerError> {
        let record = self.open_record(&sender, &id)?;
        if let Some(p) = &pair {
            self.verify_pair(record, p)?;
        }
        let counterparty = record.counterparty(&sender);
        let key = self.key_of(&counterparty).ok_or(LedgerError::UnknownDid)?;
        if !verify(&key, &close_approval_message(&id, pair.as_ref()), &counter_signature) {
            return Err(LedgerError::BadApproval);
        }
        let (settlement, s, b) = self.settle(record, pair.as_ref(), true)?;
        Ok(self.commit_close(settlement, s, b))
    }

    fn unilateral_close(
        &mut self,
        sender: Address,
        id: ChannelId,
        pair: Option<OffChainTxPair>,
    ) -> Result<TxEffect, LedgerError> {
        let record = self.open_record(&sender, &id)?;
        if let Some(p) = &pair {
            self.verify_pair(record, p)?;
        }
        let deadline = self.height + self.config.challenge_period;
        self.set_phase(
            id,
            ChannelPhase::Challenged {
                deadline,
                candidate: pair,
                submitted_by: sender,
            },
        );
        Ok(TxEffect::ChannelChallenged {
            channel_id: id,
            deadline,
        })
    }

    fn challenge(&mut self, sender: Address, id: ChannelId, newer: OffChainTxPair) -> Result<TxEffect, LedgerError> {
        let record = self.channels.get(&id).ok_or(LedgerError::UnknownChannel)?;
        if !record.is_participant(&sender) {
            return Err(LedgerError::NotParticipant);
        }
        let ChannelPhase::Challenged {
            deadline,
            candidate,
            submitted_by,
        } = &record.phase
        else {
            return Err(LedgerError::NotChallenged);
        };
        if self.height >= *deadline {
            return Err(LedgerError::ChallengeExpired);
        }
        if *submitted_by == sender {
            return Err(LedgerError::SelfChallenge);
        }
        if newer.iteration() <= candidate.map_or(0, |p| p.iteration()) {
            return Err(LedgerError::NotNewer);
        }
        self.verify_pair(record, &newer)?;
        let cheater = *submitted_by;
        let deadline = *deadline;
        let record = self.channels.get_mut(&id).expect("channel exists");
        record.cheaters.insert(cheater);
        self.set_phase(
            id,
            ChannelPhase::Challenged {
                deadline,
                candidate: Some(newer),
                submitted_by: sender,
            },
        );
        Ok(TxEffect::ChallengeAccepted {
            channel_id: id,
            cheater,
        })
    }

    fn finalize_close(&mut self, id: ChannelId) -> Result<TxEffect, LedgerError> {
        let record = self.channels.get(&id).ok_or(LedgerError::UnknownChannel)?;
        let ChannelPhase::Challenged {
            deadline, candidate, ..
        } = &record.phase
        else {
            return Err(LedgerError::NotChallenged);
        };
        if self.height < *deadline {
            return Err(LedgerError::DeadlineNotReached);
        }
        let (settlement, s, b) = self.settle(record, candidate.as_ref(), false)?;
        Ok(self.commit_close(settlement, s, b))
    }

    pub fn is_finalizable(&self, id: &ChannelId) -> bool {
        matches!(
            self.channels.get(id).map(|r| &r.phase),
            Some(ChannelPhase::Challenged { deadline, .. }) if self.height >= *deadline
        )
    }

    // ---- hashing and export ----

    /// Canonical encoding of the world state (excluding the log).
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put(&self.config).u64(self.height);
        w.u32(self.registry.len() as u32);
        for e in self.registry.values() {
            w.put(e);
        }
        let issuers: Vec<Did> = self.issuers.iter().copied().collect();
        w.seq(&issuers);
        w.u32(self.accounts.len() as u32);
        for (a, s) in &self.accounts {
            w.put(a).put(s);
        }
        w.u32(self.channels.len() as u32);
        for (id, c) in &self.channels {
            w.put(id).put(c);
        }
        let exchanges: Vec<ExchangeId> = self.exchanges.iter().copied().collect();
        w.seq(&exchanges);
        w.into_bytes()
    }

    pub fn state_hash(&self) -> [u8; 32] {
        codec::sha256(&[&self.state_bytes()])
    }

    /// Replaying this ledger's log from genesis reproduces its state hash.
    pub fn replay_matches(&self) -> bool {
        Ledger::replay(self.config, &self.tx_log)
            .map(|l| l.state_hash() == self.state_hash())
            .unwrap_or(false)
    }

    pub fn state_json(&self) -> serde_json::Value {
        serde_json::json!({
            "height": self.height,
            "state_hash": hex::encode(self.state_hash()),
            "config": self.config,
            "registry": self.registry.values().collect::<Vec<_>>(),
            "issuers": self.issuers,
            "accounts": self.accounts.iter().map(|(a, s)| serde_json::json!({
                "address": a, "credit_score": s.credit_score, "energy_level": s.energy_level
            })).collect::<Vec<_>>(),
            "channels": self.channels.values().collect::<Vec<_>>(),
            "log_len": self.tx_log.len(),
        })
    }
}

impl DidStatusView for Ledger {
    fn did_view(&self, did: &Did) -> Option<DidView> {
        self.registry.get(did).map(|e| DidView {
            verification_key: e.document.verification_key,
            status: e.status,
        })
    }
}

impl IssuerView for Ledger {
    fn is_trusted_issuer(&self, did: &Did) -> bool {
        Ledger::is_trusted_issuer(self, did)
    }
}

#[cfg(test)]
mod tests;
