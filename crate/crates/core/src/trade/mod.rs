//! Energy trade protocol between robots: discovery beacons, seller
//! selection, channel establishment, the alternating pay-per-unit loop,
//! closure and dispute handling.
//!
//! Each robot is a [`RobotCtx`]. Robots talk over an in-process [`Bus`] and
//! settle on a shared [`Ledger`]. Misbehaviour for tests and demos is
//! injected with a [`Defection`].

mod bus;
mod engine;
mod handshake;
mod message;
pub mod oracle;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelError, ExchangeId, OffChainTx, SignedOffChainTx};
use crate::codec;
use crate::credentials::{
    Challenge, Claim, CredentialError, Issuer, Presentation, RejectReason, VerifiableCredential,
};
use crate::identity::{generate_keypair, Address, Did, Identity, Multiaddr};
use crate::ledger::{Ledger, LedgerConfig, LedgerError, OnChainTx, Settlement};

pub use bus::{Bus, BusStats, Envelope, LinkParams};
pub use engine::{run_trade, Adversary, Defection, TradeReport};
pub use handshake::{discover, establish_channel, OpenChannel};
pub use message::{kind as message_kind, Message};
pub use scenario::{run_scenario, Scenario, ScenarioError, ScenarioResult};

/// Claim keys every robot credential carries.
pub const CLAIM_END_OF_LIFE: &str = "end_of_life_date";
pub const CLAIM_DEVICE_CLASS: &str = "device_class";
pub const CLAIM_MANUFACTURER: &str = "manufacturer";
pub const CLAIM_HARDWARE: &str = "hardware_spec";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TradeError {
    #[error("no seller candidates")]
    EmptyCandidates,
    #[error("invalid trade policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("requested {requested} units but the limit is {limit}")]
    TooManyUnits { requested: u64, limit: u64 },
    #[error("buyer cannot afford {units} units")]
    InsufficientCredit { units: u64 },
    #[error("peer presentation rejected: {0:?}")]
    Presentation(RejectReason),
    #[error("peer did not disclose required claim {0}")]
    MissingClaim(String),
    #[error("peer {0} is blacklisted")]
    Blacklisted(Did),
    #[error("handshake rejected: {0}")]
    HandshakeRejected(String),
    #[error("handshake timed out")]
    HandshakeTimeout,
    #[error("trade did not settle within {0} blocks")]
    Stalled(u64),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

/// Per-robot trading rules and local reputation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradePolicy {
    /// Credits per energy unit. A seller treats it as its minimum price.
    pub unit_price: u64,
    pub max_units: u64,
    /// Blocks of peer silence before closing unilaterally.
    pub delta_timeout: u64,
    pub blacklist: BTreeSet<Did>,
    /// Energy a seller keeps for itself.
    pub retain_floor: u64,
    pub required_claims: Vec<String>,
    pub disclose: Vec<String>,
    /// Blocks a buyer waits for offers after a beacon.
    pub discovery_window: u64,
}

impl Default for TradePolicy {
    fn default() -> Self {
        TradePolicy {
            unit_price: 2,
            max_units: 50,
            delta_timeout: 5,
            blacklist: BTreeSet::new(),
            retain_floor: 0,
            required_claims: vec![CLAIM_END_OF_LIFE.into(), CLAIM_DEVICE_CLASS.into()],
            disclose: vec![CLAIM_END_OF_LIFE.into(), CLAIM_DEVICE_CLASS.into()],
            discovery_window: 2,
        }
    }
}

impl TradePolicy {
    pub fn validate(&self) -> Result<(), TradeError> {
        if self.unit_price == 0 {
            return Err(TradeError::InvalidPolicy("unit_price must be at least 1"));
        }
        if self.delta_timeout == 0 {
            return Err(TradeError::InvalidPolicy("delta_timeout must be at least 1"));
        }
        Ok(())
    }
}

/// A verified responder to a beacon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SellerCandidate {
    pub did: Did,
    pub credit_score: i64,
    pub multiaddr: Multiaddr,
    pub offered_units: u64,
    /// The seller's nonce the buyer must answer when establishing.
    pub challenge: Challenge,
}

/// Highest credit score wins; ties go to the lowest address.
pub fn select_seller(candidates: &[SellerCandidate]) -> Result<&SellerCandidate, TradeError> {
    candidates
        .iter()
        .min_by(|a, b| {
            b.credit_score
                .cmp(&a.credit_score)
                .then_with(|| a.did.address().cmp(&b.did.address()))
        })
        .ok_or(TradeError::EmptyCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    Cooperative,
    /// Closed after a silence timeout. `peer_fault` is set for the party
    /// that timed out waiting.
    UnilateralTimeout { peer_fault: bool },
    DisputedWon,
    DisputedLost,
}

/// One party's view of a settled trade.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradeOutcome {
    pub exchange_id: ExchangeId,
    pub units_transferred: u64,
    pub credits_transferred: u64,
    pub closure: Closure,
    pub counterparty: Did,
    /// Units that physically moved, whether or not they settled.
    pub energy_moved: u64,
    /// Seller side: units delivered but never paid for.
    pub unpaid_energy: u64,
    /// Buyer side: credits settled beyond the energy received.
    pub overpaid_credits: u64,
    /// Net credit change on the ledger including bonus or penalty.
    pub credit_delta: i64,
}

/// Blacklist the counterparty after a peer-caused timeout or a won dispute.
pub fn record_outcome(mut policy: TradePolicy, outcome: &TradeOutcome) -> TradePolicy {
    if matches!(
        outcome.closure,
        Closure::UnilateralTimeout { peer_fault: true } | Closure::DisputedWon
    ) {
        policy.blacklist.insert(outcome.counterparty);
    }
    policy
}

#[allow(clippy::too_many_arguments)]
fn outcome_for(
    exchange_id: ExchangeId,
    me: Address,
    counterparty: Did,
    settlement: &Settlement,
    seller: Address,
    unit_price: u64,
    energy_moved: u64,
    timed_out: bool,
) -> TradeOutcome {
    let closure = if settlement.cooperative {
        Closure::Cooperative
    } else if settlement.cheaters.contains(&me) {
        Closure::DisputedLost
    } else if !settlement.cheaters.is_empty() {
        Closure::DisputedWon
    } else {
        Closure::UnilateralTimeout {
            peer_fault: timed_out,
        }
    };
    let is_seller = me == seller;
    let (unpaid_energy, overpaid_credits, credit_delta) = if is_seller {
        (
            energy_moved.saturating_sub(settlement.energy_units),
            0,
            settlement.seller_credit_delta,
        )
    } else {
        (
            0,
            settlement.credits.saturating_sub(energy_moved * unit_price),
            settlement.buyer_credit_delta,
        )
    };
    TradeOutcome {
        exchange_id,
        units_transferred: settlement.energy_units,
        credits_transferred: settlement.credits,
        closure,
        counterparty,
        energy_moved,
        unpaid_energy,
        overpaid_credits,
        credit_delta,
    }
}

/// A robot's trading identity, credential, battery and policy.
#[derive(Debug, Clone)]
pub struct RobotCtx {
    pub identity: Identity,
    pub credential: VerifiableCredential,
    pub policy: TradePolicy,
    /// Physical energy in the battery.
    pub battery: u64,
    /// Whether this robot answers beacons as a seller.
    pub available: bool,
    rng: ChaCha8Rng,
    issued: BTreeMap<Did, Challenge>,
    trades_started: u64,
}

impl RobotCtx {
    pub fn new(identity: Identity, credential: VerifiableCredential, policy: TradePolicy, battery: u64) -> Self {
        let seed = codec::sha256(&[b"robocomm/robot-rng", &identity.address().0]);
        RobotCtx {
            identity,
            credential,
            policy,
            battery,
            available: true,
            rng: ChaCha8Rng::from_seed(seed),
            issued: BTreeMap::new(),
            trades_started: 0,
        }
    }

    pub fn did(&self) -> Did {
        self.identity.did
    }

    pub fn address(&self) -> Address {
        self.identity.address()
    }

    /// Units this robot would sell right now.
    pub fn sellable(&self) -> u64 {
        if !self.available {
            return 0;
        }
        self.battery
            .saturating_sub(self.policy.retain_floor)
            .min(self.policy.max_units)
    }

    fn present(&self, challenge: Challenge) -> Result<Presentation, CredentialError> {
        crate::credentials::present(
            &self.credential,
            &self.identity.keypair,
            &self.policy.disclose,
            challenge,
        )
    }

    fn check_peer(
        &self,
        ledger: &Ledger,
        from: &Did,
        p: &Presentation,
        expected: &Challenge,
    ) -> Result<(), TradeError> {
        if self.policy.blacklist.contains(from) {
            return Err(TradeError::Blacklisted(*from));
        }
        if p.metadata.subject_did != *from {
            return Err(TradeError::Presentation(RejectReason::BadHolderSig));
        }
        if let crate::credentials::Verdict::Rejected(r) =
            crate::credentials::verify_presentation(p, ledger, ledger, expected)
        {
            return Err(TradeError::Presentation(r));
        }
        if let Some(k) = self
            .policy
            .required_claims
            .iter()
            .find(|k| p.disclosed_claim(k).is_none())
        {
            return Err(TradeError::MissingClaim(k.clone()));
        }
        Ok(())
    }
}

/// Genesis authority, one trusted issuer and a ledger they share.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub ledger: Ledger,
    pub genesis: Identity,
    pub issuer: Issuer,
}

impl Deployment {
    /// `tweak` adjusts the ledger parameters before genesis.
    pub fn new(label: &str, tweak: impl FnOnce(&mut LedgerConfig)) -> Self {
        let genesis = Identity::from_label(&format!("{label}/genesis"));
        let issuer_id = Identity::from_label(&format!("{label}/issuer"));
        let mut config = LedgerConfig::new(genesis.address());
        tweak(&mut config);
        let mut ledger = Ledger::new(config);
        for id in [&genesis, &issuer_id] {
            let r = ledger.submit_tx(register_tx(id, 0, 0).sign(&id.keypair));
            assert!(r.is_ok(), "fresh ledger accepts authority registration");
        }
        let r = ledger.submit_tx(
            OnChainTx::AddIssuer {
                issuer_did: issuer_id.did,
            }
            .sign(&genesis.keypair),
        );
        assert!(r.is_ok(), "genesis may add issuers");
        Deployment {
            ledger,
            genesis,
            issuer: Issuer::new(issuer_id.keypair),
        }
    }

    /// Register `identity` on the ledger and issue its credential.
    pub fn enroll(&mut self, identity: Identity, battery: u64, policy: TradePolicy) -> Result<RobotCtx, TradeError> {
        policy.validate()?;
        let now = self.ledger.height();
        self.ledger
            .submit_tx(register_tx(&identity, battery, now).sign(&identity.keypair))
            .result?;
        let claims = robot_claims(&identity);
        let vc = self.issuer.issue(&identity.did, claims, now)?;
        Ok(RobotCtx::new(identity, vc, policy, battery))
    }

    pub fn enroll_label(&mut self, label: &str, battery: u64) -> Result<RobotCtx, TradeError> {
        self.enroll(Identity::from_label(label), battery, TradePolicy::default())
    }

    /// Identity from a 32-byte seed, retrying on the negligible chance it
    /// is not a valid scalar.
    pub fn identity_from_seed(seed: [u8; 32]) -> Identity {
        let mut s = seed;
        loop {
            if generate_keypair(&s).is_ok() {
                return Identity::from_seed(&s, 10333).expect("valid scalar");
            }
            s = codec::sha256(&[&s]);
        }
    }
}

fn register_tx(id: &Identity, energy: u64, now: u64) -> OnChainTx {
    OnChainTx::RegisterDid {
        did: id.did,
        document: id.document(now),
        multiaddr: id.endpoint.clone(),
        reported_energy: energy,
    }
}

/// Four claims; manufacturer and hardware are the private ones.
pub fn robot_claims(identity: &Identity) -> Vec<Claim> {
    let tag = hex::encode(&identity.address().0[..4]);
    vec![
        Claim::new(CLAIM_END_OF_LIFE, "2031-12-31"),
        Claim::new(CLAIM_DEVICE_CLASS, "courier"),
        Claim::new(CLAIM_MANUFACTURER, format!("maker-{tag}")),
        Claim::new(CLAIM_HARDWARE, format!("cell-4s2p/{tag}")),
    ]
}

pub(crate) fn offchain_tx_summary(stx: &SignedOffChainTx) -> String {
    let OffChainTx {
        iteration,
        value,
        value_kind,
        ..
    } = stx.tx;
    format!("{value_kind:?} iter={iteration} value={value}")
}
